//! Manifold-resolved dressed-state analysis: the N-excitation block matrices
//! of the undriven Hamiltonian, their zero-energy determinant conditions, the
//! closed-form/polynomial resonance branches in Δₐ, and branch curves over a
//! χ grid with nearest-root continuation.

use crate::error::{Error, Result};
use crate::hilbert::SpaceConfig;
use crate::model::coupling_phases;
use crate::sparse::CsMat;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Which sign convention ties the atomic detuning to the cavity detuning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaConvention {
    /// δ = +Δₐ/2
    PlusHalf,
    /// δ = −Δₐ/2
    MinusHalf,
}

/// Basis label inside an excitation manifold: photon count plus the set of
/// excited atoms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ManifoldLabel {
    pub photons: usize,
    pub excited: [bool; 3],
}

/// The N-excitation block of the undriven Hamiltonian (plus the 3δ/2 ground
/// offset), in the fixed label ordering: single excitations on atoms 3, 2, 1;
/// pairs {1,2}, {1,3}, {2,3}; the triple; then the all-photon state.
/// States whose photon count would be negative are omitted, so the size is
/// 4 for N = 1, 7 for N = 2, and 8 for N ≥ 3.
#[derive(Clone, Debug)]
pub struct ManifoldMatrix {
    pub n_excitation: usize,
    pub labels: Vec<ManifoldLabel>,
    pub mat: DMatrix<C64>,
}

const ATOM_SETS: [[bool; 3]; 8] = [
    [false, false, true],  // atom 3
    [false, true, false],  // atom 2
    [true, false, false],  // atom 1
    [true, true, false],   // atoms 1,2
    [true, false, true],   // atoms 1,3
    [false, true, true],   // atoms 2,3
    [true, true, true],    // atoms 1,2,3
    [false, false, false], // photons only
];

fn set_size(s: &[bool; 3]) -> usize {
    s.iter().filter(|&&x| x).count()
}

/// Build the manifold matrix for excitation number `n_excitation` ≥ 1 with
/// photon reference n = N (zero-energy analysis convention).
pub fn build_manifold_matrix(
    n_excitation: usize,
    chi: f64,
    delta_a: f64,
    delta: f64,
    g_a: f64,
    phi: f64,
) -> Result<ManifoldMatrix> {
    if n_excitation == 0 {
        return Err(Error::Invalid("manifold number must be >= 1".into()));
    }
    let n = n_excitation;
    let mut labels = Vec::new();
    for s in ATOM_SETS {
        let k = set_size(&s);
        if n >= k {
            labels.push(ManifoldLabel {
                photons: n - k,
                excited: s,
            });
        }
    }
    let dim = labels.len();
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));

    // Diagonal energies: n_ph·Δₐ + |s|·(δ + χ), already including the +3δ/2
    // shift of the zero-excitation reference.
    for (i, lab) in labels.iter().enumerate() {
        let k = set_size(&lab.excited) as f64;
        m[(i, i)] = C64::new(lab.photons as f64 * delta_a + k * (delta + chi), 0.0);
    }

    // Exchange χ between equal-size excitation sets differing by one atom.
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            let (si, sj) = (&labels[i].excited, &labels[j].excited);
            let (ki, kj) = (set_size(si), set_size(sj));
            if ki != kj || ki == 0 {
                continue;
            }
            let overlap = (0..3).filter(|&t| si[t] && sj[t]).count();
            if overlap == ki - 1 {
                m[(i, j)] += C64::new(chi, 0.0);
            }
        }
    }

    // Photon absorption raising one atom: amplitude gₐ√n_ph with per-atom
    // phases conjugate to the â†(…σ⁻…) term.
    let phases = coupling_phases(phi);
    let exc_phase = [phases[0].conj(), phases[1].conj(), phases[2].conj()];
    for (i, lab) in labels.iter().enumerate() {
        if lab.photons == 0 {
            continue;
        }
        for atom in 0..3 {
            if lab.excited[atom] {
                continue;
            }
            let mut target = lab.excited;
            target[atom] = true;
            let tph = lab.photons - 1;
            if let Some(j) = labels
                .iter()
                .position(|l| l.photons == tph && l.excited == target)
            {
                let amp = C64::new(g_a * (lab.photons as f64).sqrt(), 0.0) * exc_phase[atom];
                m[(j, i)] += amp;
                m[(i, j)] += amp.conj();
            }
        }
    }

    Ok(ManifoldMatrix {
        n_excitation,
        labels,
        mat: m,
    })
}

/// Symmetric-sector reduction at φ = 0, δ = Δₐ/2: the 2×2 (N = 1) or 3×3
/// (N = 2) block on the permutation-symmetric states.
pub fn collective_reduce(
    n_excitation: usize,
    chi: f64,
    delta_a: f64,
    g_a: f64,
) -> Result<DMatrix<f64>> {
    match n_excitation {
        1 => Ok(DMatrix::from_row_slice(
            2,
            2,
            &[
                0.5 * delta_a + 3.0 * chi,
                3f64.sqrt() * g_a,
                3f64.sqrt() * g_a,
                delta_a,
            ],
        )),
        2 => Ok(DMatrix::from_row_slice(
            3,
            3,
            &[
                1.5 * delta_a + 3.0 * chi,
                2.0 * g_a,
                6f64.sqrt() * g_a,
                2.0 * g_a,
                delta_a + 4.0 * chi,
                0.0,
                6f64.sqrt() * g_a,
                0.0,
                2.0 * delta_a,
            ],
        )),
        other => Err(Error::Invalid(format!(
            "collective reduction exists for manifolds 1 and 2 only, got {other}"
        ))),
    }
}

/// A resonance branch: real roots in Δₐ of one polynomial factor of the
/// manifold's zero-energy determinant condition.
#[derive(Clone, Debug)]
pub struct ResonanceBranch {
    pub manifold: usize,
    pub branch_id: usize,
    /// Polynomial coefficients in Δₐ, highest power first.
    pub coefficients: Vec<f64>,
    /// Real roots, ascending; empty when every root is complex.
    pub roots: Vec<f64>,
}

/// Relative tolerance for accepting a companion-matrix eigenvalue as real.
const REAL_IM_TOL: f64 = 1e-9;

/// Evaluate a real polynomial (highest power first) by Horner's rule.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_eval_c(coeffs: &[f64], x: C64) -> C64 {
    coeffs
        .iter()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * x + C64::new(c, 0.0))
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    if n <= 1 {
        return vec![0.0];
    }
    coeffs[..n - 1]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (n - 1 - i) as f64)
        .collect()
}

/// Real roots of a real-coefficient polynomial (highest power first):
/// closed form for degree ≤ 2, companion-matrix eigenvalues above, followed
/// by Newton polish; near-duplicate roots are reported once.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    // Strip leading zeros.
    let first = coeffs.iter().position(|&c| c != 0.0);
    let Some(first) = first else {
        return Vec::new(); // zero polynomial: no isolated roots to report
    };
    let c = &coeffs[first..];
    let deg = c.len() - 1;
    let mut roots: Vec<f64> = match deg {
        0 => Vec::new(),
        1 => vec![-c[1] / c[0]],
        2 => {
            let (a, b, cc) = (c[0], c[1], c[2]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                Vec::new()
            } else {
                let sq = disc.sqrt();
                // Numerically stable quadratic formula.
                let q = -0.5 * (b + b.signum() * sq);
                if q == 0.0 {
                    vec![0.0, -b / a]
                } else {
                    vec![q / a, cc / q]
                }
            }
        }
        _ => {
            let lead = c[0];
            let monic: Vec<f64> = c[1..].iter().map(|&x| x / lead).collect();
            let mut comp = DMatrix::<f64>::zeros(deg, deg);
            for (j, &m) in monic.iter().enumerate() {
                comp[(0, j)] = -m;
            }
            for i in 1..deg {
                comp[(i, i - 1)] = 1.0;
            }
            let eig = comp.complex_eigenvalues();
            let deriv = poly_deriv(c);
            let mut out = Vec::new();
            for lambda in eig.iter() {
                let mut z = C64::new(lambda.re, lambda.im);
                for _ in 0..4 {
                    let d = poly_eval_c(&deriv, z);
                    if d.norm() < 1e-300 {
                        break;
                    }
                    z -= poly_eval_c(c, z) / d;
                }
                if z.im.abs() < REAL_IM_TOL * (1.0 + z.re.abs()) {
                    out.push(z.re);
                }
            }
            out
        }
    };
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + a.abs()));
    roots
}

/// The analytic resonance branches of manifold `n_excitation` under the given
/// δ-convention. For N = 3 only δ = +Δₐ/2 (with φ = 2π/3) exists; asking for
/// the other convention is an error. A branch whose roots are all complex is
/// returned with an empty root list.
pub fn resonance_branches(
    n_excitation: usize,
    chi: f64,
    g_a: f64,
    convention: DeltaConvention,
) -> Result<Vec<ResonanceBranch>> {
    let g2 = g_a * g_a;
    let polys: Vec<Vec<f64>> = match (n_excitation, convention) {
        (1, DeltaConvention::PlusHalf) => vec![vec![1.0, 6.0 * chi, -6.0 * g2]],
        (1, DeltaConvention::MinusHalf) => vec![vec![1.0, -6.0 * chi, 6.0 * g2]],
        (2, DeltaConvention::PlusHalf) => vec![vec![
            3.0,
            18.0 * chi,
            24.0 * chi * chi - 14.0 * g2,
            -24.0 * g2 * chi,
        ]],
        (2, DeltaConvention::MinusHalf) => vec![vec![
            1.0,
            2.0 * chi,
            2.0 * g2 - 24.0 * chi * chi,
            24.0 * g2 * chi,
        ]],
        (3, DeltaConvention::PlusHalf) => vec![
            vec![5.0, 10.0 * chi, -2.0 * g2],
            vec![10.0, 17.0 * chi, 6.0 * chi * chi - 4.0 * g2],
            vec![
                10.0,
                25.0 * chi,
                10.0 * chi * chi - 38.0 * g2,
                -62.0 * chi * g2,
                -12.0 * chi * chi * g2 + 12.0 * g2 * g2,
            ],
        ],
        (3, DeltaConvention::MinusHalf) => {
            return Err(Error::Invalid(
                "manifold 3 branches exist only for the delta = +delta_a/2 convention".into(),
            ))
        }
        (n, _) => {
            return Err(Error::Invalid(format!(
                "resonance branches are defined for manifolds 1..=3, got {n}"
            )))
        }
    };
    Ok(polys
        .into_iter()
        .enumerate()
        .map(|(i, coefficients)| {
            let roots = real_roots(&coefficients);
            ResonanceBranch {
                manifold: n_excitation,
                branch_id: i,
                roots,
                coefficients,
            }
        })
        .collect())
}

/// One row of a resonance-curve table.
#[derive(Clone, Debug)]
pub struct CurveRow {
    pub chi: f64,
    /// Stable track id, constant along a continuously-connected curve.
    pub branch: usize,
    pub delta_a_root: f64,
}

/// Zero-energy resonance curves of manifold N over a χ grid, with stable
/// branch ids assigned by nearest-root continuation. φ selects the family:
/// 0 for manifolds 1–2 (δ = +Δₐ/2) and 2π/3 for manifold 3. A track that
/// loses its real root is retired; ids are never reused.
pub fn resonance_curves(
    n_excitation: usize,
    chi_grid: &[f64],
    g_a: f64,
    phi: f64,
) -> Result<Vec<CurveRow>> {
    let two_thirds_pi = 2.0 * std::f64::consts::FRAC_PI_3;
    let phi_n = phi.rem_euclid(2.0 * std::f64::consts::PI);
    match n_excitation {
        1 | 2 => {
            if phi_n.min((phi_n - 2.0 * std::f64::consts::PI).abs()) > 1e-12 {
                return Err(Error::Invalid(format!(
                    "curve family for manifold {n_excitation} is defined at phi = 0"
                )));
            }
        }
        3 => {
            if (phi_n - two_thirds_pi).abs() > 1e-12 {
                return Err(Error::Invalid(
                    "curve family for manifold 3 is defined at phi = 2*pi/3".into(),
                ));
            }
        }
        n => {
            return Err(Error::Invalid(format!(
                "curve families exist for manifolds 1..=3, got {n}"
            )))
        }
    }

    // All branch polynomials evaluated once per χ, with per-polynomial tracks.
    let n_polys = resonance_branches(n_excitation, 0.0, g_a, DeltaConvention::PlusHalf)?.len();
    struct Track {
        id: usize,
        last: f64,
        alive: bool,
    }
    let mut tracks: Vec<Vec<Track>> = (0..n_polys).map(|_| Vec::new()).collect();
    let mut next_id = n_excitation * 1000;
    let match_radius = 0.15 * g_a.abs().max(1.0);
    let mut rows = Vec::new();
    for &chi in chi_grid {
        let branches = resonance_branches(n_excitation, chi, g_a, DeltaConvention::PlusHalf)?;
        let mut step_rows: Vec<CurveRow> = Vec::new();
        for (p, br) in branches.iter().enumerate() {
            let roots = &br.roots;
            let tr = &mut tracks[p];
            // Greedy nearest matching between live tracks and current roots.
            let mut root_taken = vec![false; roots.len()];
            let mut track_matched = vec![false; tr.len()];
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (ti, t) in tr.iter().enumerate() {
                if !t.alive {
                    continue;
                }
                for (ri, &r) in roots.iter().enumerate() {
                    let d = (r - t.last).abs();
                    if d <= match_radius {
                        pairs.push((d, ti, ri));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for (_, ti, ri) in pairs {
                if track_matched[ti] || root_taken[ri] {
                    continue;
                }
                track_matched[ti] = true;
                root_taken[ri] = true;
                tr[ti].last = roots[ri];
                step_rows.push(CurveRow {
                    chi,
                    branch: tr[ti].id,
                    delta_a_root: roots[ri],
                });
            }
            // Unmatched live tracks are retired for good.
            for (ti, t) in tr.iter_mut().enumerate() {
                if t.alive && !track_matched[ti] {
                    t.alive = false;
                }
            }
            // Unmatched roots start fresh tracks.
            for (ri, &r) in roots.iter().enumerate() {
                if !root_taken[ri] {
                    tr.push(Track {
                        id: next_id,
                        last: r,
                        alive: true,
                    });
                    next_id += 1;
                    step_rows.push(CurveRow {
                        chi,
                        branch: tr.last().unwrap().id,
                        delta_a_root: r,
                    });
                }
            }
        }
        step_rows.sort_by_key(|r| r.branch);
        rows.extend(step_rows);
    }
    Ok(rows)
}

/// Complex determinant of a dense matrix.
pub fn determinant(m: &DMatrix<C64>) -> C64 {
    m.clone().lu().determinant()
}

/// Ascending real eigenvalues of a hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// The N̂ = N block of a full-space Hamiltonian matrix, shifted by +3δ/2 —
/// the independent oracle the manifold construction is compared against.
pub fn projected_block(
    h: &CsMat,
    space: &SpaceConfig,
    n_excitation: usize,
    delta: f64,
) -> DMatrix<C64> {
    let idx: Vec<usize> = (0..space.dimension())
        .filter(|&i| space.excitation_count(i) == n_excitation)
        .collect();
    let k = idx.len();
    let mut m = DMatrix::from_element(k, k, C64::new(0.0, 0.0));
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            m[(r, c)] = h.get(i, j);
        }
        m[(r, r)] += C64::new(1.5 * delta, 0.0);
    }
    m
}
