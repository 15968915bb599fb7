//! Physical parameters and Hamiltonian assembly.
//!
//! Single-mode Hamiltonian (all rates in units of the cavity linewidth κₐ):
//!
//! H = Δₐ â†â + Σⱼ (½ δ σⱼᶻ + Ω σⱼˣ) + χ J⁺J⁻
//!     + gₐ [â†(e^{iφ} σ₁⁻ + σ₂⁻ + e^{−iφ} σ₃⁻) + h.c.]
//!
//! with J⁻ = σ₁⁻ + σ₂⁻ + σ₃⁻. The drive amplitude Ω multiplies σˣ directly
//! (Ω is the half-Rabi amplitude), and the exchange term is the full
//! collective product J⁺J⁻, diagonal j = k terms included.
//!
//! Two-mode variant: an auxiliary far-detuned mode b̂ couples phase-free;
//! adiabatic elimination of b̂ yields the exchange strength χ and the extra
//! atomic decay γₑ of the single-mode model.

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, pauli, Axis, Operator, SpaceConfig, ATOM_COUNT};
use crate::sparse::CsMat;
use num_complex::Complex64 as C64;

/// How the atomic detuning δ is specified: proportional to Δₐ or absolute.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaRule {
    /// δ = coefficient · Δₐ.
    Coefficient(f64),
    /// δ fixed independently of Δₐ.
    Absolute(f64),
}

impl DeltaRule {
    pub fn delta(&self, delta_a: f64) -> f64 {
        match *self {
            DeltaRule::Coefficient(alpha) => alpha * delta_a,
            DeltaRule::Absolute(d) => d,
        }
    }
}

/// All single-mode model rates and detunings, in units of κₐ.
#[derive(Clone, Debug)]
pub struct SystemParams {
    /// Cavity detuning Δₐ.
    pub delta_a: f64,
    /// Atomic detuning rule (δ itself follows from `delta_a`).
    pub delta_rule: DeltaRule,
    /// Drive amplitude Ω (multiplies σˣ).
    pub omega: f64,
    /// Atom–cavity coupling gₐ.
    pub g_a: f64,
    /// Spin-exchange strength χ.
    pub chi: f64,
    /// Geometric phase φ in radians, stored in [0, 2π).
    pub phi: f64,
    /// Cavity decay κₐ (the unit; 1 unless deliberately rescaled).
    pub kappa_a: f64,
    /// Intrinsic atomic decay γ.
    pub gamma: f64,
    /// Exchange-induced extra atomic decay γₑ.
    pub gamma_e: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            delta_a: 0.0,
            delta_rule: DeltaRule::Coefficient(0.5),
            omega: 0.5,
            g_a: 10.0,
            chi: 0.0,
            phi: 0.0,
            kappa_a: 1.0,
            gamma: 0.2,
            gamma_e: 0.0,
        }
    }
}

impl SystemParams {
    /// The atomic detuning δ implied by the rule and current Δₐ.
    pub fn delta(&self) -> f64 {
        self.delta_rule.delta(self.delta_a)
    }

    /// Normalize φ into [0, 2π) and check rate signs.
    pub fn validate(&mut self) -> Result<()> {
        if !(self.kappa_a > 0.0) {
            return Err(Error::Invalid(format!("kappa_a must be > 0, got {}", self.kappa_a)));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("gamma_e", self.gamma_e),
            ("omega", self.omega),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.phi.is_finite() {
            return Err(Error::Invalid("phi must be finite".into()));
        }
        self.phi = self.phi.rem_euclid(2.0 * std::f64::consts::PI);
        Ok(())
    }
}

/// Auxiliary-mode parameters for the two-mode Hamiltonian.
#[derive(Clone, Copy, Debug)]
pub struct AuxCavityParams {
    pub g_b: f64,
    pub delta_b: f64,
    pub kappa_b: f64,
}

impl AuxCavityParams {
    /// |Δ_b| / max(g_b, κ_b); below 10 the dispersive elimination is dubious.
    pub fn dispersive_ratio(&self) -> f64 {
        self.delta_b.abs() / self.g_b.abs().max(self.kappa_b.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn is_dispersive(&self) -> bool {
        self.dispersive_ratio() >= 10.0
    }
}

/// Exchange strength and induced decay from eliminating the auxiliary mode:
/// χ = −g_b²Δ_b/(Δ_b²+κ_b²), γₑ = κ_b g_b²/(Δ_b²+κ_b²).
pub fn derive_effective_params(aux: &AuxCavityParams) -> Result<(f64, f64)> {
    let den = aux.delta_b * aux.delta_b + aux.kappa_b * aux.kappa_b;
    if den == 0.0 {
        return Err(Error::Invalid(
            "delta_b and kappa_b cannot both be zero".into(),
        ));
    }
    let chi = -aux.g_b * aux.g_b * aux.delta_b / den;
    let gamma_e = aux.kappa_b * aux.g_b * aux.g_b / den;
    Ok((chi, gamma_e))
}

/// Per-atom coupling phase factors e^{iφ}, 1, e^{−iφ} multiplying σⱼ⁻ inside
/// the â†(…) interaction term.
pub fn coupling_phases(phi: f64) -> [C64; 3] {
    [
        C64::new(0.0, phi).exp(),
        C64::new(1.0, 0.0),
        C64::new(0.0, -phi).exp(),
    ]
}

/// Assemble the single-mode Hamiltonian on `space`.
pub fn build_effective_hamiltonian(params: &SystemParams, space: &SpaceConfig) -> Result<Operator> {
    let delta = params.delta();
    let a = annihilation(space);
    let ad = a.dagger();
    let mut h = ad.mat().matmul(a.mat())?.scale(C64::new(params.delta_a, 0.0));

    let sm: Vec<Operator> = (1..=ATOM_COUNT)
        .map(|j| pauli(space, j, Axis::Minus))
        .collect::<Result<_>>()?;
    for j in 1..=ATOM_COUNT {
        let sz = pauli(space, j, Axis::Z)?;
        let sx = pauli(space, j, Axis::X)?;
        h = h.add_scaled(C64::new(0.5 * delta, 0.0), sz.mat())?;
        h = h.add_scaled(C64::new(params.omega, 0.0), sx.mat())?;
    }

    // χ J⁺J⁻ with collective J⁻ (all ordered pairs, j = k included).
    let jm = sm[0].mat().add(sm[1].mat())?.add(sm[2].mat())?;
    let jpjm = jm.dagger().matmul(&jm)?;
    h = h.add_scaled(C64::new(params.chi, 0.0), &jpjm)?;

    // gₐ â†(e^{iφ}σ₁⁻ + σ₂⁻ + e^{−iφ}σ₃⁻) + h.c.
    let phases = coupling_phases(params.phi);
    let mut cpl = CsMat::zeros(space.dimension(), space.dimension());
    for j in 0..ATOM_COUNT {
        cpl = cpl.add_scaled(phases[j], sm[j].mat())?;
    }
    let up = ad.mat().matmul(&cpl)?.scale(C64::new(params.g_a, 0.0));
    h = h.add(&up)?.add(&up.dagger())?;

    let op = Operator::from_mat(h)?;
    if !op.is_hermitian() {
        return Err(Error::Numerical(
            "assembled Hamiltonian failed the hermiticity assertion".into(),
        ));
    }
    Ok(op)
}

/// Decay channels of the single-mode model: cavity loss at κₐ and per-atom
/// spin decay at γ + γₑ.
pub fn effective_collapse_ops(params: &SystemParams, space: &SpaceConfig) -> Result<Vec<(CsMat, f64)>> {
    let mut out = vec![(annihilation(space).mat().clone(), params.kappa_a)];
    for j in 1..=ATOM_COUNT {
        out.push((
            pauli(space, j, Axis::Minus)?.mat().clone(),
            params.gamma + params.gamma_e,
        ));
    }
    Ok(out)
}

/// Two-cavity space: mode a (cutoff `n_c`) ⊗ mode b (cutoff `n_b`) ⊗ atoms.
/// Index of `(n_a, n_b, spins)` is `(n_a·(N_b+1) + n_b)·8 + spin_bits`.
#[derive(Clone, Copy, Debug)]
pub struct FullSpaceConfig {
    pub n_c: usize,
    pub n_b: usize,
}

impl FullSpaceConfig {
    pub fn new(n_c: usize, n_b: usize) -> Result<Self> {
        if n_c < 3 || n_b < 1 {
            return Err(Error::Invalid(format!(
                "two-mode space needs n_c >= 3 and n_b >= 1, got ({n_c}, {n_b})"
            )));
        }
        Ok(FullSpaceConfig { n_c, n_b })
    }

    pub fn dimension(&self) -> usize {
        (self.n_c + 1) * (self.n_b + 1) * 8
    }

    fn mode_a(&self) -> CsMat {
        ladder(self.n_c)
            .kron(&CsMat::identity(self.n_b + 1))
            .kron(&CsMat::identity(8))
    }

    fn mode_b(&self) -> CsMat {
        CsMat::identity(self.n_c + 1)
            .kron(&ladder(self.n_b))
            .kron(&CsMat::identity(8))
    }

    fn spin_minus(&self, j: usize) -> CsMat {
        let sm = CsMat::from_triplets(2, 2, &[(0, 1, C64::new(1.0, 0.0))]).expect("in bounds");
        let spin = CsMat::identity(1 << (j - 1))
            .kron(&sm)
            .kron(&CsMat::identity(1 << (ATOM_COUNT - j)));
        CsMat::identity((self.n_c + 1) * (self.n_b + 1)).kron(&spin)
    }

    /// Collapse operators with rates for the two-mode master equation.
    pub fn collapse_ops(&self, params: &SystemParams, aux: &AuxCavityParams) -> Vec<(CsMat, f64)> {
        let mut v = vec![(self.mode_a(), params.kappa_a), (self.mode_b(), aux.kappa_b)];
        for j in 1..=ATOM_COUNT {
            v.push((self.spin_minus(j), params.gamma));
        }
        v
    }

    /// Photon-number diagonal of mode a, for observables on the joint space.
    pub fn photon_number_a(&self) -> CsMat {
        let d = self.dimension();
        let per = (self.n_b + 1) * 8;
        let diag: Vec<C64> = (0..d).map(|i| C64::new((i / per) as f64, 0.0)).collect();
        CsMat::from_diag(&diag)
    }

    pub fn mode_a_op(&self) -> CsMat {
        self.mode_a()
    }
}

fn ladder(cutoff: usize) -> CsMat {
    let mut t = Vec::with_capacity(cutoff);
    for n in 1..=cutoff {
        t.push((n - 1, n, C64::new((n as f64).sqrt(), 0.0)));
    }
    CsMat::from_triplets(cutoff + 1, cutoff + 1, &t).expect("in bounds")
}

/// Assemble the two-mode Hamiltonian: Δₐ â†â + Δ_b b̂†b̂ + atomic terms +
/// phase-structured coupling to mode a + phase-free coupling g_b to mode b.
/// No direct exchange term — it emerges from eliminating b̂.
pub fn build_full_hamiltonian(
    params: &SystemParams,
    aux: &AuxCavityParams,
    space2: &FullSpaceConfig,
) -> Result<CsMat> {
    let delta = params.delta();
    let d = space2.dimension();
    let a = space2.mode_a();
    let b = space2.mode_b();
    let mut h = a
        .dagger()
        .matmul(&a)?
        .scale(C64::new(params.delta_a, 0.0))
        .add(&b.dagger().matmul(&b)?.scale(C64::new(aux.delta_b, 0.0)))?;

    for j in 1..=ATOM_COUNT {
        let smj = space2.spin_minus(j);
        let spj = smj.dagger();
        // ½δσᶻ = δ(σ⁺σ⁻ − ½I)  and  Ωσˣ = Ω(σ⁺ + σ⁻)
        let proj = spj.matmul(&smj)?;
        h = h.add_scaled(C64::new(delta, 0.0), &proj)?;
        h = h.add_scaled(C64::new(-0.5 * delta, 0.0), &CsMat::identity(d))?;
        h = h.add_scaled(C64::new(params.omega, 0.0), &spj.add(&smj)?)?;
    }

    let phases = coupling_phases(params.phi);
    let mut cpl_a = CsMat::zeros(d, d);
    let mut cpl_b = CsMat::zeros(d, d);
    for j in 1..=ATOM_COUNT {
        let smj = space2.spin_minus(j);
        cpl_a = cpl_a.add_scaled(phases[j - 1], &smj)?;
        cpl_b = cpl_b.add(&smj)?;
    }
    let up_a = a.dagger().matmul(&cpl_a)?.scale(C64::new(params.g_a, 0.0));
    let up_b = b.dagger().matmul(&cpl_b)?.scale(C64::new(aux.g_b, 0.0));
    h = h.add(&up_a)?.add(&up_a.dagger())?;
    h = h.add(&up_b)?.add(&up_b.dagger())?;

    if h.hermiticity_defect() >= 1e-12 {
        return Err(Error::Numerical(
            "two-mode Hamiltonian failed the hermiticity assertion".into(),
        ));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::excitation_number;

    #[test]
    fn defaults_match_operating_units() {
        let p = SystemParams::default();
        assert_eq!(p.kappa_a, 1.0);
        assert_eq!(p.gamma, 0.2);
        assert_eq!(p.g_a, 10.0);
        assert_eq!(p.omega, 0.5);
        assert_eq!(p.gamma_e, 0.0);
    }

    #[test]
    fn delta_rule_variants() {
        assert_eq!(DeltaRule::Coefficient(0.5).delta(25.0), 12.5);
        assert_eq!(DeltaRule::Coefficient(-0.5).delta(29.2), -14.6);
        assert_eq!(DeltaRule::Absolute(-7.86).delta(123.0), -7.86);
    }

    #[test]
    fn validate_rejects_bad_rates() {
        let mut p = SystemParams {
            kappa_a: 0.0,
            ..SystemParams::default()
        };
        assert!(p.validate().is_err());
        let mut p = SystemParams {
            gamma: -0.1,
            ..SystemParams::default()
        };
        assert!(p.validate().is_err());
        let mut p = SystemParams {
            phi: -2.0 * std::f64::consts::FRAC_PI_3,
            ..SystemParams::default()
        };
        p.validate().unwrap();
        assert!(p.phi >= 0.0 && p.phi < 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn hamiltonian_is_hermitian_for_random_draws() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut r = StdRng::seed_from_u64(2024);
        let space = SpaceConfig::new(3).unwrap();
        for _ in 0..10 {
            let p = SystemParams {
                delta_a: 40.0 * (r.random::<f64>() - 0.5),
                delta_rule: DeltaRule::Coefficient(r.random::<f64>() - 0.5),
                omega: r.random::<f64>(),
                g_a: 10.0 * r.random::<f64>(),
                chi: 5.0 * (r.random::<f64>() - 0.5),
                phi: 6.28 * r.random::<f64>(),
                ..SystemParams::default()
            };
            let h = build_effective_hamiltonian(&p, &space).unwrap();
            assert!(h.is_hermitian());
        }
    }

    #[test]
    fn excitation_number_conserved_without_drive() {
        let space = SpaceConfig::new(4).unwrap();
        let p = SystemParams {
            delta_a: 7.0,
            omega: 0.0,
            chi: 1.3,
            phi: 2.0 * std::f64::consts::FRAC_PI_3,
            ..SystemParams::default()
        };
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let n = excitation_number(&space);
        let hn = h.mat().matmul(n.mat()).unwrap();
        let nh = n.mat().matmul(h.mat()).unwrap();
        assert!(hn.max_abs_diff(&nh).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_spot_value_with_couplings_off() {
        // gₐ = Ω = χ = 0, δ = 2: H is diagonal; on |1,egg⟩ the value is
        // Δₐ + ½δ(+1 − 1 − 1) = Δₐ − δ/2.
        let space = SpaceConfig::new(3).unwrap();
        let p = SystemParams {
            delta_a: 5.0,
            delta_rule: DeltaRule::Absolute(2.0),
            omega: 0.0,
            g_a: 0.0,
            chi: 0.0,
            phi: 0.0,
            ..SystemParams::default()
        };
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let idx = space.encode(1, [true, false, false]);
        let got = h.mat().get(idx, idx);
        assert!((got - C64::new(5.0 - 1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn symmetric_phase_cancels_bright_single_excitation_coupling() {
        // At φ = 2π/3 the matrix element between |1,ggg⟩ and the symmetric
        // one-excitation atomic state vanishes: 1 + e^{iφ} + e^{−iφ} = 0.
        let space = SpaceConfig::new(3).unwrap();
        let p = SystemParams {
            delta_a: 3.0,
            omega: 0.0,
            phi: 2.0 * std::f64::consts::FRAC_PI_3,
            ..SystemParams::default()
        };
        let h = build_effective_hamiltonian(&p, &space).unwrap();
        let bright = space.encode(1, [false, false, false]);
        let mut amp = C64::new(0.0, 0.0);
        for e in [
            [true, false, false],
            [false, true, false],
            [false, false, true],
        ] {
            amp += h.mat().get(bright, space.encode(0, e));
        }
        // amp = gₐ(e^{iφ} + 1 + e^{−iφ}) = √3·gₐ·⟨1,ggg|H|0,W⟩
        assert!((amp / 3f64.sqrt()).norm() < 1e-13);
    }

    #[test]
    fn atom_swap_one_three_maps_phi_to_minus_phi() {
        // Relabeling atoms 1↔3 conjugates the coupling phases: the swapped
        // H(φ) equals H(−φ) entry for entry.
        let space = SpaceConfig::new(3).unwrap();
        let phi = 1.1;
        let mk = |phi: f64| {
            let p = SystemParams {
                delta_a: 4.0,
                chi: 0.7,
                phi,
                ..SystemParams::default()
            };
            build_effective_hamiltonian(&p, &space).unwrap()
        };
        let h_plus = mk(phi);
        let h_minus = mk(-phi);
        let d = space.dimension();
        let swap = |idx: usize| {
            let (n, e) = space.decode(idx);
            space.encode(n, [e[2], e[1], e[0]])
        };
        for i in 0..d {
            for j in 0..d {
                let a = h_plus.mat().get(swap(i), swap(j));
                let b = h_minus.mat().get(i, j);
                assert!((a - b).norm() < 1e-13, "mismatch at ({i},{j})");
            }
        }
    }

    #[test]
    fn effective_params_examples() {
        let (chi, ge) = derive_effective_params(&AuxCavityParams {
            g_b: 10.0,
            delta_b: -100.0,
            kappa_b: 0.0,
        })
        .unwrap();
        assert!((chi - 1.0).abs() < 1e-12 && ge == 0.0);

        let (chi, ge) = derive_effective_params(&AuxCavityParams {
            g_b: 1.0,
            delta_b: 0.0,
            kappa_b: 1.0,
        })
        .unwrap();
        assert!(chi == 0.0 && (ge - 1.0).abs() < 1e-12);

        let (chi, ge) = derive_effective_params(&AuxCavityParams {
            g_b: 3.0,
            delta_b: -60.0,
            kappa_b: 1.0,
        })
        .unwrap();
        assert!((chi - 540.0 / 3601.0).abs() < 1e-12);
        assert!((ge - 9.0 / 3601.0).abs() < 1e-12);

        assert!(derive_effective_params(&AuxCavityParams {
            g_b: 1.0,
            delta_b: 0.0,
            kappa_b: 0.0,
        })
        .is_err());
    }

    #[test]
    fn dispersive_ratio_flag() {
        let aux = AuxCavityParams {
            g_b: 3.0,
            delta_b: -60.0,
            kappa_b: 1.0,
        };
        assert!(aux.is_dispersive());
        assert!((aux.dispersive_ratio() - 20.0).abs() < 1e-12);
        let tight = AuxCavityParams {
            g_b: 3.0,
            delta_b: -9.0,
            kappa_b: 1.0,
        };
        assert!(!tight.is_dispersive());
    }

    #[test]
    fn full_hamiltonian_reduces_when_aux_decoupled_and_conserves_excitation() {
        let space2 = FullSpaceConfig::new(3, 1).unwrap();
        let p = SystemParams {
            delta_a: 2.0,
            omega: 0.0,
            chi: 0.0,
            phi: 0.4,
            ..SystemParams::default()
        };
        let aux = AuxCavityParams {
            g_b: 0.0,
            delta_b: -50.0,
            kappa_b: 1.0,
        };
        let h2 = build_full_hamiltonian(&p, &aux, &space2).unwrap();
        // b-vacuum block (n_b = 0) equals the single-mode H with χ = 0.
        let space = SpaceConfig::new(3).unwrap();
        let h1 = build_effective_hamiltonian(&p, &space).unwrap();
        let nb1 = space2.n_b + 1;
        for i in 0..space.dimension() {
            for j in 0..space.dimension() {
                let (na_i, sp_i) = (i / 8, i % 8);
                let (na_j, sp_j) = (j / 8, j % 8);
                let i2 = (na_i * nb1) * 8 + sp_i;
                let j2 = (na_j * nb1) * 8 + sp_j;
                let x = h2.get(i2, j2);
                let y = h1.mat().get(i, j);
                assert!((x - y).norm() < 1e-13);
            }
        }
        // Ω = 0: total excitation of both modes + atoms commutes with H.
        let d2 = space2.dimension();
        let per = (space2.n_b + 1) * 8;
        let diag: Vec<C64> = (0..d2)
            .map(|i| {
                let na = i / per;
                let nb = (i / 8) % (space2.n_b + 1);
                let s = (i % 8).count_ones() as usize;
                C64::new((na + nb + s) as f64, 0.0)
            })
            .collect();
        let ntot = CsMat::from_diag(&diag);
        let aux_on = AuxCavityParams {
            g_b: 2.0,
            ..aux
        };
        let h2 = build_full_hamiltonian(&p, &aux_on, &space2).unwrap();
        let c = h2
            .matmul(&ntot)
            .unwrap()
            .sub(&ntot.matmul(&h2).unwrap())
            .unwrap();
        assert!(c.max_abs() < 1e-12);
    }
}
