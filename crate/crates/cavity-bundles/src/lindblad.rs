//! Open-system dynamics: the vectorized generator of the master equation,
//! steady-state solution by a bordered sparse factorization, time propagation
//! of vectorized operators, and cavity-cutoff convergence scanning.
//!
//! Vectorization is fixed to column stacking throughout: vec(AXB) =
//! (Bᵀ⊗A)·vec(X), so matrix entry (i,j) of X lives at vec index i + j·d.

use crate::correlations;
use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceConfig};
use crate::model::{build_effective_hamiltonian, effective_collapse_ops, SystemParams};
use crate::sparse::CsMat;
use faer::linalg::solvers::Solve;
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::fmt;
use std::sync::Once;

/// Vectorization convention marker carried by every generator.
pub const VECTORIZATION: &str = "column-stacking";

/// Absolute bound on the trace functional composed with the generator
/// (trace preservation of the dynamics).
pub const TRACE_PRESERVATION_TOL: f64 = 1e-12;

/// Relative error budget of the propagator, per unit time.
pub const PROPAGATION_TOL: f64 = 1e-8;

/// Cutoff list used by the convergence scan when none is specified.
pub const DEFAULT_CUTOFFS: [usize; 5] = [8, 10, 12, 14, 16];

fn force_sequential_linear_algebra() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// The vectorized generator of the master equation, acting on column-stacked
/// d×d matrices as a sparse (d²)×(d²) map.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    hilbert_dim: usize,
    mat: CsMat,
}

impl Liouvillian {
    /// Dimension d of the underlying Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Dimension d² of the vectorized space the generator acts on.
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn mat(&self) -> &CsMat {
        &self.mat
    }

    /// y ← L·x.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.mat.matvec(x, y);
    }
}

/// Assemble L from a Hamiltonian and a list of (collapse operator, rate):
/// L vec(ρ) = vec(−i[H,ρ] + Σ r (cρc† − ½{c†c, ρ})).
pub fn build_liouvillian(h: &Operator, collapse: &[(CsMat, f64)]) -> Result<Liouvillian> {
    let d = h.dimension();
    let d2 = d * d;
    let ident = CsMat::identity(d);
    let mut trips: Vec<(usize, usize, C64)> = Vec::new();
    let push_scaled = |trips: &mut Vec<(usize, usize, C64)>, m: &CsMat, alpha: C64| {
        for (r, c, v) in m.iter() {
            trips.push((r, c, alpha * v));
        }
    };

    let minus_i = C64::new(0.0, -1.0);
    push_scaled(&mut trips, &ident.kron(h.mat()), minus_i);
    push_scaled(&mut trips, &h.mat().transpose().kron(&ident), -minus_i);

    for (c, rate) in collapse {
        if c.nrows() != d || c.ncols() != d {
            return Err(Error::Dimension(format!(
                "collapse operator is {}x{}, expected {d}x{d}",
                c.nrows(),
                c.ncols()
            )));
        }
        if *rate < 0.0 {
            return Err(Error::Invalid(format!("negative collapse rate {rate}")));
        }
        if *rate == 0.0 {
            continue;
        }
        let r = C64::new(*rate, 0.0);
        let cc = c.dagger().matmul(c)?;
        push_scaled(&mut trips, &c.conj().kron(c), r);
        push_scaled(&mut trips, &ident.kron(&cc), -0.5 * r);
        push_scaled(&mut trips, &cc.transpose().kron(&ident), -0.5 * r);
    }

    let mat = CsMat::from_triplets(d2, d2, &trips)?;

    // Trace preservation: the trace functional annihilates the generator.
    // Column sums over the rows that are diagonal vec-indices must vanish.
    let mut col_sum = vec![C64::new(0.0, 0.0); d2];
    for (r, c, v) in mat.iter() {
        if r % (d + 1) == 0 {
            col_sum[c] += v;
        }
    }
    let worst = col_sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if worst > TRACE_PRESERVATION_TOL {
        return Err(Error::Numerical(format!(
            "generator is not trace-preserving: trace-functional residual {worst:.3e}"
        )));
    }

    Ok(Liouvillian {
        hilbert_dim: d,
        mat,
    })
}

/// Steady state of the generator, with the trace row used for bordering and
/// the residual of the original (unbordered) system.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DMatrix<C64>,
    /// ‖L vec(ρ)‖_∞ evaluated on the returned (hermitized, renormalized) ρ.
    pub residual: f64,
    /// Cavity cutoff the space was built with.
    pub cutoff: usize,
}

/// Solve L vec(ρ) = 0, Tr ρ = 1 by replacing row 0 with the trace functional.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    steady_state_bordered(l, 0)
}

/// Same bordered solve with the trace functional planted on an arbitrary row;
/// solutions must agree for any choice when the stationary state is unique.
pub fn steady_state_bordered(l: &Liouvillian, trace_row: usize) -> Result<SteadyState> {
    force_sequential_linear_algebra();
    let d = l.hilbert_dim;
    let n2 = d * d;
    if trace_row >= n2 {
        return Err(Error::Invalid(format!(
            "trace row {trace_row} outside 0..{n2}"
        )));
    }

    let mut trips: Vec<Triplet<usize, usize, faer::c64>> = Vec::with_capacity(l.mat.nnz() + d);
    for i in 0..n2 {
        if i == trace_row {
            continue;
        }
        let (cols, vals) = l.mat.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            trips.push(Triplet::new(i, c, faer::c64::new(v.re, v.im)));
        }
    }
    for k in 0..d {
        trips.push(Triplet::new(trace_row, k + k * d, faer::c64::new(1.0, 0.0)));
    }

    let a = SparseColMat::try_new_from_triplets(n2, n2, &trips)
        .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))?;
    let sym = SymbolicLu::try_new(a.symbolic())
        .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(sym.clone(), a.rb())
        .map_err(|e| Error::Numerical(format!("numeric factorization failed: {e:?}")))?;

    let mut rhs = faer::Mat::<faer::c64>::zeros(n2, 1);
    rhs[(trace_row, 0)] = faer::c64::new(1.0, 0.0);
    let x = lu.solve(&rhs);

    let mut rho = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for j in 0..d {
        for i in 0..d {
            let z = x[(i + j * d, 0)];
            rho[(i, j)] = C64::new(z.re, z.im);
        }
    }
    if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Numerical(
            "steady-state solve produced non-finite entries (degenerate stationary manifold?)"
                .into(),
        ));
    }

    // Hermitize, then renormalize to unit trace.
    let rho_h = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let tr: C64 = (0..d).map(|i| rho_h[(i, i)]).sum();
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical(
            "steady-state solution has vanishing trace".into(),
        ));
    }
    let rho = rho_h / tr;

    let mut v = vec![C64::new(0.0, 0.0); n2];
    for j in 0..d {
        for i in 0..d {
            v[i + j * d] = rho[(i, j)];
        }
    }
    let mut y = vec![C64::new(0.0, 0.0); n2];
    l.apply(&v, &mut y);
    let residual = y.iter().map(|z| z.norm()).fold(0.0, f64::max);

    Ok(SteadyState {
        rho,
        residual,
        cutoff: d / 8 - 1,
    })
}

/// Dense matrix exponential by Padé(13) approximation with scaling and
/// squaring. Used for the small Hessenberg exponentials inside the
/// propagator and as an independent oracle for small generators.
pub fn expm_dense(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("matrix exponential needs a square matrix".into()));
    }
    // 1-norm (max column sum of moduli)
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let theta13 = 5.371_920_351_148_152;
    let s = if norm1 > theta13 {
        (norm1 / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / C64::new(2f64.powi(s), 0.0);

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let bc = |i: usize| C64::new(B[i], 0.0);
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = &a6 * bc(13) + &a4 * bc(11) + &a2 * bc(9);
    let w2 = &a6 * bc(7) + &a4 * bc(5) + &a2 * bc(3) + &id * bc(1);
    let u = &a * (&a6 * &w1 + w2);
    let z1 = &a6 * bc(12) + &a4 * bc(10) + &a2 * bc(8);
    let v = &a6 * &z1 + &a6 * bc(6) + &a4 * bc(4) + &a2 * bc(2) + &id * bc(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut x = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("Padé denominator is singular".into()))?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

const KRYLOV_DIM: usize = 30;

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Evaluate v(τ) ≈ e^{Lτ} v0 on an ascending grid starting at 0, by adaptive
/// Krylov-subspace approximation of the exponential action. The accepted
/// step size is controlled so the estimated local error stays below
/// `PROPAGATION_TOL` × (elapsed time) × (current norm); the estimate compares
/// the order-m result against the next-order correction term.
pub fn propagate(l: &Liouvillian, v0: &[C64], tau_grid: &[f64]) -> Result<Vec<Vec<C64>>> {
    let n = l.dim();
    if v0.len() != n {
        return Err(Error::Dimension(format!(
            "state length {} does not match generator dimension {n}",
            v0.len()
        )));
    }
    if tau_grid.is_empty() {
        return Err(Error::Invalid("empty time grid".into()));
    }
    if tau_grid[0] != 0.0 {
        return Err(Error::Invalid("time grid must start at 0".into()));
    }
    for w in tau_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Invalid("time grid must be strictly ascending".into()));
        }
    }

    let mut out: Vec<Vec<C64>> = Vec::with_capacity(tau_grid.len());
    out.push(v0.to_vec());
    if tau_grid.len() == 1 {
        return Ok(out);
    }
    let t_final = *tau_grid.last().unwrap();

    let m_cap = KRYLOV_DIM.min(n);
    let mut basis = vec![C64::new(0.0, 0.0); (m_cap + 1) * n];
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut v = v0.to_vec();
    let mut t = 0.0f64;
    let mut gi = 1usize;

    // Initial step guess from the generator's row scale.
    let mut row_scale = 0.0f64;
    for i in 0..n {
        let (_, vals) = l.mat.row(i);
        let s: f64 = vals.iter().map(|z| z.norm()).sum();
        row_scale = row_scale.max(s);
    }
    let mut h_try = if row_scale > 0.0 {
        (1.0 / row_scale).min(t_final)
    } else {
        t_final
    };

    while gi < tau_grid.len() {
        let beta = norm2(&v);
        if beta == 0.0 {
            for _ in gi..tau_grid.len() {
                out.push(vec![C64::new(0.0, 0.0); n]);
            }
            return Ok(out);
        }

        // Arnoldi factorization from v/β with modified Gram–Schmidt and one
        // reorthogonalization pass.
        let inv_beta = 1.0 / beta;
        for k in 0..n {
            basis[k] = v[k] * inv_beta;
        }
        let mut hm = DMatrix::<C64>::zeros(m_cap + 1, m_cap);
        let mut m_used = m_cap;
        let mut happy = false;
        for j in 0..m_cap {
            l.mat.matvec(&basis[j * n..(j + 1) * n], &mut w);
            for _pass in 0..2 {
                for i in 0..=j {
                    let hij = dot(&basis[i * n..(i + 1) * n], &w);
                    hm[(i, j)] += hij;
                    for (wk, bk) in w.iter_mut().zip(&basis[i * n..(i + 1) * n]) {
                        *wk -= hij * bk;
                    }
                }
            }
            let wn = norm2(&w);
            let col_scale = (0..=j)
                .map(|i| hm[(i, j)].norm())
                .fold(1e-300f64, f64::max);
            if wn < 1e-12 * col_scale {
                happy = true;
                m_used = j + 1;
                break;
            }
            hm[(j + 1, j)] = C64::new(wn, 0.0);
            let inv = 1.0 / wn;
            for k in 0..n {
                basis[(j + 1) * n + k] = w[k] * inv;
            }
        }

        // Adapt the step until the local error estimate fits the budget.
        loop {
            let s = h_try.min(t_final - t);
            let hs = DMatrix::from_fn(m_used, m_used, |i, j| hm[(i, j)] * C64::new(s, 0.0));
            let es = expm_dense(&hs)?;
            let finite = es.iter().all(|z| z.re.is_finite() && z.im.is_finite());
            let err_ratio = if happy {
                0.0
            } else {
                // residual coupling × magnitude of the subspace boundary
                // component, relative to the per-unit-time budget
                hm[(m_used, m_used - 1)].norm() * es[(m_used - 1, 0)].norm() / PROPAGATION_TOL
            };
            if finite && err_ratio <= 1.0 {
                // Emit every grid point inside (t, t+s].
                let upper = t + s + 1e-12 * (1.0 + (t + s).abs());
                while gi < tau_grid.len() && tau_grid[gi] <= upper {
                    let sg = tau_grid[gi] - t;
                    let eg = expm_dense(&DMatrix::from_fn(m_used, m_used, |i, j| {
                        hm[(i, j)] * C64::new(sg, 0.0)
                    }))?;
                    let mut vg = vec![C64::new(0.0, 0.0); n];
                    for i in 0..m_used {
                        let coeff = eg[(i, 0)] * C64::new(beta, 0.0);
                        for (vk, bk) in vg.iter_mut().zip(&basis[i * n..(i + 1) * n]) {
                            *vk += coeff * bk;
                        }
                    }
                    out.push(vg);
                    gi += 1;
                }
                // Advance the state to t + s.
                let mut vn = vec![C64::new(0.0, 0.0); n];
                for i in 0..m_used {
                    let coeff = es[(i, 0)] * C64::new(beta, 0.0);
                    for (vk, bk) in vn.iter_mut().zip(&basis[i * n..(i + 1) * n]) {
                        *vk += coeff * bk;
                    }
                }
                v = vn;
                t += s;
                if happy {
                    h_try = t_final;
                } else if err_ratio < 0.1 {
                    h_try = (s * 1.5).min(t_final);
                }
                break;
            }
            h_try = s * 0.5;
            if h_try < 1e-13 {
                return Err(Error::Numerical(
                    "time-step underflow in the propagator".into(),
                ));
            }
        }
    }
    Ok(out)
}

/// One row of a cutoff-convergence table.
#[derive(Clone, Debug)]
pub struct ScanRow {
    pub cutoff: usize,
    pub n_s: f64,
    pub g2: Option<f64>,
    pub g3: Option<f64>,
}

/// Result of a convergence scan: the chosen cutoff and the evaluated table.
#[derive(Clone, Debug)]
pub struct ScanReport {
    pub chosen: usize,
    pub rows: Vec<ScanRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.12e}"),
        None => "undefined".into(),
    }
}

impl fmt::Display for ScanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "chosen cutoff: {}", self.chosen)?;
        for r in &self.rows {
            writeln!(
                f,
                "  N_c={:2}  n_s={:.12e}  g2={}  g3={}",
                r.cutoff,
                r.n_s,
                fmt_opt(r.g2),
                fmt_opt(r.g3)
            )?;
        }
        Ok(())
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale < 1e-12 || (a - b).abs() <= 1e-6 * scale
}

fn opt_close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => rel_close(x, y),
        _ => false,
    }
}

fn scan_point(params: &SystemParams, cutoff: usize) -> Result<ScanRow> {
    let space = SpaceConfig::new(cutoff)?;
    let h = build_effective_hamiltonian(params, &space)?;
    let collapse = effective_collapse_ops(params, &space)?;
    let l = build_liouvillian(&h, &collapse)?;
    let ss = steady_state(&l)?;
    let n_s = correlations::mean_photon(&ss.rho);
    let grab = |n: usize| -> Result<Option<f64>> {
        match correlations::g1n_zero(&ss.rho, n) {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedCorrelation(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(ScanRow {
        cutoff,
        n_s,
        g2: grab(2)?,
        g3: grab(3)?,
    })
}

/// Find the smallest cutoff in `cutoffs` whose observables (n_s and the
/// second/third-order equal-time correlations) change by less than 1e-6
/// relative when moving to the next cutoff. Evaluation stops at the first
/// converged pair; the evaluated table is returned alongside.
pub fn convergence_scan(params: &SystemParams, cutoffs: &[usize]) -> Result<ScanReport> {
    if cutoffs.len() < 2 {
        return Err(Error::Invalid(
            "convergence scan needs at least two cutoffs".into(),
        ));
    }
    for w in cutoffs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Invalid("cutoff list must be ascending".into()));
        }
    }
    let mut rows = vec![scan_point(params, cutoffs[0])?];
    for i in 1..cutoffs.len() {
        rows.push(scan_point(params, cutoffs[i])?);
        let a = &rows[i - 1];
        let b = &rows[i];
        if rel_close(a.n_s, b.n_s) && opt_close(a.g2, b.g2) && opt_close(a.g3, b.g3) {
            return Ok(ScanReport {
                chosen: cutoffs[i - 1],
                rows,
            });
        }
    }
    let report = ScanReport {
        chosen: 0,
        rows,
    };
    Err(Error::Numerical(format!(
        "no cutoff in {cutoffs:?} converged to 1e-6 relative; table:\n{report}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation, excitation_number};
    use crate::model::DeltaRule;

    fn small_params() -> SystemParams {
        SystemParams {
            delta_a: 2.0,
            delta_rule: DeltaRule::Absolute(1.0),
            omega: 0.5,
            g_a: 2.0,
            chi: 0.7,
            phi: 0.7,
            kappa_a: 1.0,
            gamma: 0.2,
            gamma_e: 0.05,
        }
    }

    fn small_setup() -> (SpaceConfig, Liouvillian) {
        let space = SpaceConfig::new(3).unwrap();
        let p = small_params();
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let c = effective_collapse_ops(&p, &space).unwrap();
        (space, build_liouvillian(&h, &c).unwrap())
    }

    /// One-photon space (d = 16): small enough for dense brute-force oracles.
    fn tiny_setup() -> (SpaceConfig, Liouvillian) {
        let space = SpaceConfig::new(1).unwrap();
        let p = small_params();
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let c = effective_collapse_ops(&p, &space).unwrap();
        (space, build_liouvillian(&h, &c).unwrap())
    }

    #[test]
    fn vacuum_is_stationary_for_pure_cavity_decay() {
        let space = SpaceConfig::new(3).unwrap();
        let d = space.dimension();
        let h = Operator::from_mat(CsMat::zeros(d, d)).unwrap();
        let a = annihilation(&space);
        let l = build_liouvillian(&h, &[(a.mat().clone(), 1.0)]).unwrap();
        // |0⟩⟨0|_cavity ⊗ arbitrary diagonal spin state
        let mut v = vec![C64::new(0.0, 0.0); d * d];
        let weights = [0.4, 0.1, 0.1, 0.05, 0.1, 0.05, 0.1, 0.1];
        for (s, &p) in weights.iter().enumerate() {
            v[s + s * d] = C64::new(p, 0.0);
        }
        let mut y = vec![C64::new(0.0, 0.0); d * d];
        l.apply(&v, &mut y);
        let worst = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "vacuum block not stationary: {worst:.3e}");
    }

    #[test]
    fn undriven_steady_state_is_the_ground_state() {
        let space = SpaceConfig::new(3).unwrap();
        let p = SystemParams {
            omega: 0.0,
            ..small_params()
        };
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let c = effective_collapse_ops(&p, &space).unwrap();
        let l = build_liouvillian(&h, &c).unwrap();
        let ss = steady_state(&l).unwrap();
        assert!((ss.rho[(0, 0)].re - 1.0).abs() < 1e-12);
        for i in 0..space.dimension() {
            for j in 0..space.dimension() {
                if (i, j) != (0, 0) {
                    assert!(ss.rho[(i, j)].norm() < 1e-12);
                }
            }
        }
        assert!(ss.residual < 1e-10);
        assert_eq!(ss.cutoff, 3);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let space = SpaceConfig::new(3).unwrap();
        let d = space.dimension();
        let h = Operator::from_mat(CsMat::zeros(d, d)).unwrap();
        let a = annihilation(&space);
        assert!(build_liouvillian(&h, &[(a.mat().clone(), -1.0)]).is_err());
    }

    #[test]
    fn dense_oracle_matches_sparse_generator_at_minimal_cutoff() {
        // One-photon cutoff keeps the space at dimension 16 so a brute-force
        // dense construction is cheap.
        let space = SpaceConfig::new(1).unwrap();
        let p = small_params();
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let c = effective_collapse_ops(&p, &space).unwrap();
        let l = build_liouvillian(&h, &c).unwrap();

        let d = space.dimension();
        assert_eq!(d, 16);
        let hd = h.mat().to_dense();
        let id = DMatrix::<C64>::identity(d, d);
        let mi = C64::new(0.0, -1.0);
        let mut dense = id.kronecker(&hd) * mi - hd.transpose().kronecker(&id) * mi;
        for (op, rate) in &c {
            let cd = op.to_dense();
            let cc = cd.adjoint() * &cd;
            let r = C64::new(*rate, 0.0);
            dense += cd.map(|z| z.conj()).kronecker(&cd) * r
                - id.kronecker(&cc) * (r * 0.5)
                - cc.transpose().kronecker(&id) * (r * 0.5);
        }
        let ours = l.mat().to_dense();
        let diff = (&ours - &dense).camax();
        assert!(diff < 1e-14, "generator mismatch {diff:.3e}");
    }

    #[test]
    fn collapse_order_does_not_change_the_steady_state() {
        let space = SpaceConfig::new(3).unwrap();
        let p = small_params();
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let mut c = effective_collapse_ops(&p, &space).unwrap();
        let l1 = build_liouvillian(&h, &c).unwrap();
        c.reverse();
        let l2 = build_liouvillian(&h, &c).unwrap();
        let s1 = steady_state(&l1).unwrap();
        let s2 = steady_state(&l2).unwrap();
        assert!((&s1.rho - &s2.rho).camax() < 1e-8);
        assert!((s1.residual - s2.residual).abs() < 1e-8);
    }

    #[test]
    fn bordered_row_choice_does_not_change_the_steady_state() {
        let (space, l) = small_setup();
        let d2 = space.dimension() * space.dimension();
        let s1 = steady_state_bordered(&l, 0).unwrap();
        let s2 = steady_state_bordered(&l, d2 - 1).unwrap();
        assert!((&s1.rho - &s2.rho).camax() < 1e-8);
    }

    #[test]
    fn expm_known_forms() {
        // diagonal
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.3, 1.2),
            C64::new(-0.5, -2.0),
        ]));
        let e = expm_dense(&a).unwrap();
        assert!((e[(0, 0)] - C64::new(0.3, 1.2).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(-0.5, -2.0).exp()).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15 && e[(1, 0)].norm() < 1e-15);
        // symmetric off-diagonal: e^{θσx} = cosh θ I + sinh θ σx
        let th = 0.7;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(th, 0.0),
                C64::new(th, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let e = expm_dense(&a).unwrap();
        assert!((e[(0, 0)].re - th.cosh()).abs() < 1e-14);
        assert!((e[(0, 1)].re - th.sinh()).abs() < 1e-14);
        // nilpotent
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(3.0, 1.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let e = expm_dense(&a).unwrap();
        assert!((e[(0, 1)] - C64::new(3.0, 1.0)).norm() < 1e-14);
        // inverse property on a scaled-up matrix (exercises squaring); the
        // matrix is made anti-Hermitian so e^M is unitary and the product
        // e^M e^{-M} is well conditioned even at large norm
        let r = DMatrix::from_fn(5, 5, |i, j| {
            C64::new(
                ((i * 7 + j * 3) % 11) as f64 - 5.0,
                ((i * 5 + j * 2) % 7) as f64 - 3.0,
            ) * C64::new(2.0, 0.0)
        });
        let m = (&r - r.adjoint()) * C64::new(0.5, 0.0);
        let norm1 = m
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(norm1 > 20.0, "test matrix too tame to exercise squaring");
        let e1 = expm_dense(&m).unwrap();
        let e2 = expm_dense(&(-&m)).unwrap();
        let prod = &e1 * &e2;
        let diff = (&prod - DMatrix::<C64>::identity(5, 5)).camax();
        assert!(diff < 1e-9, "expm inverse defect {diff:.3e}");
    }

    #[test]
    fn propagate_grid_validation() {
        let (_, l) = small_setup();
        let v0 = vec![C64::new(0.0, 0.0); l.dim()];
        assert!(propagate(&l, &v0, &[]).is_err());
        assert!(propagate(&l, &v0, &[0.5, 1.0]).is_err());
        assert!(propagate(&l, &v0, &[0.0, 1.0, 1.0]).is_err());
        assert!(propagate(&l, &v0[..5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn propagate_zero_delay_returns_input_exactly() {
        let (space, l) = small_setup();
        let d = space.dimension();
        let mut v0 = vec![C64::new(0.0, 0.0); d * d];
        for (k, z) in v0.iter_mut().enumerate() {
            *z = C64::new((k % 13) as f64 - 6.0, (k % 7) as f64 - 3.0);
        }
        let traj = propagate(&l, &v0, &[0.0]).unwrap();
        assert_eq!(traj.len(), 1);
        for (a, b) in traj[0].iter().zip(&v0) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn propagate_holds_the_fixed_point() {
        let (space, l) = small_setup();
        let d = space.dimension();
        let ss = steady_state(&l).unwrap();
        let mut v0 = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for i in 0..d {
                v0[i + j * d] = ss.rho[(i, j)];
            }
        }
        let traj = propagate(&l, &v0, &[0.0, 1.0, 5.0]).unwrap();
        for vt in &traj {
            let drift = vt
                .iter()
                .zip(&v0)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(drift < 1e-8, "fixed point drifts by {drift:.3e}");
        }
    }

    #[test]
    fn propagate_matches_dense_exponential_oracle() {
        let (space, l) = tiny_setup();
        let d = space.dimension();
        let ld = l.mat().to_dense();
        // physical seed: â ρ_ss â†
        let ss = steady_state(&l).unwrap();
        let ad = annihilation(&space).mat().to_dense();
        let seed = &ad * &ss.rho * ad.adjoint();
        let mut v0 = vec![C64::new(0.0, 0.0); d * d];
        for j in 0..d {
            for i in 0..d {
                v0[i + j * d] = seed[(i, j)];
            }
        }
        let grid = [0.0, 0.3, 0.7, 2.0];
        let traj = propagate(&l, &v0, &grid).unwrap();
        let scale = norm2(&v0);
        for (k, &tau) in grid.iter().enumerate() {
            let e = expm_dense(&(&ld * C64::new(tau, 0.0))).unwrap();
            let v0m = nalgebra::DVector::from_vec(v0.clone());
            let exact = &e * v0m;
            let dev = traj[k]
                .iter()
                .zip(exact.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-7 * scale.max(1.0), "tau={tau}: deviation {dev:.3e}");
        }
    }

    #[test]
    fn propagate_matches_oracle_on_nonphysical_state() {
        let (space, l) = tiny_setup();
        let d = space.dimension();
        let mut v0 = vec![C64::new(0.0, 0.0); d * d];
        for (k, z) in v0.iter_mut().enumerate() {
            *z = C64::new(
                ((k * 17) % 29) as f64 / 29.0 - 0.5,
                ((k * 23) % 31) as f64 / 31.0 - 0.5,
            );
        }
        let ld = l.mat().to_dense();
        let grid = [0.0, 0.5, 1.1];
        let traj = propagate(&l, &v0, &grid).unwrap();
        let scale = norm2(&v0);
        for (k, &tau) in grid.iter().enumerate() {
            let e = expm_dense(&(&ld * C64::new(tau, 0.0))).unwrap();
            let exact = &e * nalgebra::DVector::from_vec(v0.clone());
            let dev = traj[k]
                .iter()
                .zip(exact.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-7 * scale, "tau={tau}: deviation {dev:.3e}");
        }
    }

    #[test]
    fn scan_converges_immediately_without_drive() {
        let p = SystemParams {
            omega: 0.0,
            ..small_params()
        };
        let report = convergence_scan(&p, &[3, 4, 5]).unwrap();
        assert_eq!(report.chosen, 3);
        assert!(report.rows.len() == 2);
        assert!(report.rows[0].g2.is_none());
    }

    #[test]
    fn scan_rejects_bad_cutoff_lists() {
        let p = small_params();
        assert!(convergence_scan(&p, &[8]).is_err());
        assert!(convergence_scan(&p, &[8, 8]).is_err());
        assert!(convergence_scan(&p, &[10, 8]).is_err());
    }

    #[test]
    fn excited_spin_projector_decays_toward_ground() {
        // Propagating a spin-excited density matrix must lose excitation:
        // ⟨N̂⟩ decreases monotonically on a coarse grid when the drive is off.
        let space = SpaceConfig::new(3).unwrap();
        let p = SystemParams {
            omega: 0.0,
            ..small_params()
        };
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let c = effective_collapse_ops(&p, &space).unwrap();
        let l = build_liouvillian(&h, &c).unwrap();
        let d = space.dimension();
        // |0,egg⟩⟨0,egg|
        let idx = space.encode(0, [true, false, false]);
        let mut v0 = vec![C64::new(0.0, 0.0); d * d];
        v0[idx + idx * d] = C64::new(1.0, 0.0);
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
        let traj = propagate(&l, &v0, &grid).unwrap();
        // The single-spin population oscillates (excitation swaps with the
        // cavity), but the total excitation count only ever leaks out.
        let ntot = excitation_number(&space);
        let nums: Vec<f64> = traj
            .iter()
            .map(|vt| {
                let mut acc = C64::new(0.0, 0.0);
                for (r, cc, val) in ntot.mat().iter() {
                    acc += val * vt[cc + r * d];
                }
                acc.re
            })
            .collect();
        for wpair in nums.windows(2) {
            assert!(wpair[1] < wpair[0] + 1e-9, "excitation not decaying: {nums:?}");
        }
        assert!(nums[0] > 0.99 && nums[5] < 0.1, "endpoints: {nums:?}");
    }
}
