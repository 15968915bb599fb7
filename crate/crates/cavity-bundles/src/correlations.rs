//! Steady-state photon statistics: mean occupation, equal-time normalized
//! correlations g₁⁽ⁿ⁾(0), delayed correlations gₙ⁽²⁾(τ) via regression under
//! the same generator, photon-number distributions, and the blockade/bundle
//! classification flags.

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, SpaceConfig};
use crate::lindblad::{propagate, Liouvillian, SteadyState};
use crate::model::SystemParams;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const SPIN_DIM: usize = 8;

/// Threshold below which a normalizing moment counts as vacuum and the
/// correlation is undefined.
pub const VACUUM_TOL: f64 = 1e-14;

/// A delayed-correlation trace on a time grid.
#[derive(Clone, Debug)]
pub struct GTrace {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
}

/// Everything observed at one parameter point.
#[derive(Clone, Debug)]
pub struct ObservableRecord {
    /// Parameter echo making the record self-describing.
    pub params: SystemParams,
    pub cutoff: usize,
    pub n_s: f64,
    pub g2_0: Option<f64>,
    pub g3_0: Option<f64>,
    pub g4_0: Option<f64>,
    /// p(q), q = 0..=N_c.
    pub p: Vec<f64>,
    /// p̃(q) = p(q)/(1−p(0)) for q ≥ 1 (entry 0 is zero); None at vacuum.
    pub p_tilde: Option<Vec<f64>>,
    /// g₁⁽²⁾(τ)
    pub g12_trace: Option<GTrace>,
    /// g₂⁽²⁾(τ)
    pub g22_trace: Option<GTrace>,
    /// g₃⁽²⁾(τ)
    pub g32_trace: Option<GTrace>,
}

fn photon_diag(rho: &DMatrix<C64>) -> Vec<f64> {
    let d = rho.nrows();
    assert_eq!(d % SPIN_DIM, 0, "state dimension must be a multiple of 8");
    assert_eq!(d, rho.ncols(), "state must be square");
    let qmax = d / SPIN_DIM;
    (0..qmax)
        .map(|q| {
            (0..SPIN_DIM)
                .map(|s| rho[(q * SPIN_DIM + s, q * SPIN_DIM + s)].re)
                .sum()
        })
        .collect()
}

/// Photon-number distribution p(q) of the cavity-reduced state, and the
/// vacuum-excluded conditional distribution p̃(q) = p(q)/(1−p(0)) for q ≥ 1
/// (None when the state is vacuum to numerical precision).
pub fn photon_distribution(rho: &DMatrix<C64>) -> (Vec<f64>, Option<Vec<f64>>) {
    let p = photon_diag(rho);
    let tail: f64 = 1.0 - p[0];
    let p_tilde = if tail > VACUUM_TOL {
        let mut pt = vec![0.0; p.len()];
        for (q, v) in p.iter().enumerate().skip(1) {
            pt[q] = v / tail;
        }
        Some(pt)
    } else {
        None
    };
    (p, p_tilde)
}

/// ⟨(â†)ⁿâⁿ⟩ from the photon distribution: Σ_q q(q−1)⋯(q−n+1)·p(q).
/// Exact because the normal-ordered power is photon-diagonal.
pub fn factorial_moment(rho: &DMatrix<C64>, n: usize) -> f64 {
    let p = photon_diag(rho);
    p.iter()
        .enumerate()
        .map(|(q, &pq)| {
            let mut f = 1.0;
            for k in 0..n {
                f *= (q as f64) - (k as f64);
            }
            if q >= n {
                f * pq
            } else {
                0.0
            }
        })
        .sum()
}

/// The same moment through explicit sparse operators, Tr((â†)ⁿâⁿ ρ) —
/// an independent path used by the invariant suites.
pub fn moment_via_operators(rho: &DMatrix<C64>, n: usize) -> Result<f64> {
    let d = rho.nrows();
    let space = SpaceConfig::new(d / SPIN_DIM - 1)?;
    let a = annihilation(&space);
    let mut an = a.mat().clone();
    for _ in 1..n {
        an = an.matmul(a.mat())?;
    }
    let m = an.dagger().matmul(&an)?;
    let mut acc = C64::new(0.0, 0.0);
    for (r, c, v) in m.iter() {
        acc += v * rho[(c, r)];
    }
    Ok(acc.re)
}

/// Mean steady-state photon number ⟨â†â⟩.
pub fn mean_photon(rho: &DMatrix<C64>) -> f64 {
    factorial_moment(rho, 1)
}

/// Equal-time normalized correlation g₁⁽ⁿ⁾(0) = ⟨(â†)ⁿâⁿ⟩/⟨â†â⟩ⁿ, n ∈ {2,3,4}.
pub fn g1n_zero(rho: &DMatrix<C64>, n: usize) -> Result<f64> {
    if !(2..=4).contains(&n) {
        return Err(Error::Invalid(format!(
            "equal-time correlation order must be 2, 3, or 4, got {n}"
        )));
    }
    let n_s = mean_photon(rho);
    if n_s <= VACUUM_TOL {
        return Err(Error::UndefinedCorrelation(format!(
            "mean photon number {n_s:.3e} is vacuum to tolerance"
        )));
    }
    Ok(factorial_moment(rho, n) / n_s.powi(n as i32))
}

/// Delayed correlation gₙ⁽²⁾(τ) = Tr[(â†)ⁿâⁿ · e^{Lτ}(âⁿ ρ (â†)ⁿ)] /
/// Tr[(â†)ⁿâⁿ ρ]², n ∈ {1,2,3}, on an ascending grid starting at 0.
pub fn gn2_tau(
    l: &Liouvillian,
    rho_ss: &DMatrix<C64>,
    n: usize,
    tau_grid: &[f64],
) -> Result<GTrace> {
    if !(1..=3).contains(&n) {
        return Err(Error::Invalid(format!(
            "delayed correlation order must be 1, 2, or 3, got {n}"
        )));
    }
    let d = l.hilbert_dim();
    if rho_ss.nrows() != d || rho_ss.ncols() != d {
        return Err(Error::Dimension(format!(
            "state is {}x{}, generator acts on {d}x{d}",
            rho_ss.nrows(),
            rho_ss.ncols()
        )));
    }
    let space = SpaceConfig::new(d / SPIN_DIM - 1)?;
    let a = annihilation(&space);
    let mut an = a.mat().clone();
    for _ in 1..n {
        an = an.matmul(a.mat())?;
    }
    let m = an.dagger().matmul(&an)?;

    let mut denom = C64::new(0.0, 0.0);
    for (r, c, v) in m.iter() {
        denom += v * rho_ss[(c, r)];
    }
    let denom = denom.re;
    if denom <= VACUUM_TOL {
        return Err(Error::UndefinedCorrelation(format!(
            "order-{n} moment {denom:.3e} is vacuum to tolerance"
        )));
    }

    let and = an.to_dense();
    let seed = &and * rho_ss * and.adjoint();
    let mut v0 = vec![C64::new(0.0, 0.0); d * d];
    for j in 0..d {
        for i in 0..d {
            v0[i + j * d] = seed[(i, j)];
        }
    }
    let traj = propagate(l, &v0, tau_grid)?;
    let values = traj
        .iter()
        .map(|vt| {
            let mut acc = C64::new(0.0, 0.0);
            for (r, c, val) in m.iter() {
                acc += val * vt[c + r * d];
            }
            acc.re / (denom * denom)
        })
        .collect();
    Ok(GTrace {
        tau: tau_grid.to_vec(),
        values,
    })
}

/// Uniform time grid with `points` samples from 0 to `tau_max` inclusive.
pub fn uniform_tau_grid(points: usize, tau_max: f64) -> Result<Vec<f64>> {
    if points < 2 || !(tau_max > 0.0) {
        return Err(Error::Invalid(
            "time grid needs at least 2 points and a positive span".into(),
        ));
    }
    Ok((0..points)
        .map(|i| tau_max * i as f64 / (points - 1) as f64)
        .collect())
}

/// Blockade and bundle flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Classification {
    pub one_pb: bool,
    pub two_pb: bool,
    pub three_pb: bool,
    pub two_bundle: bool,
    pub three_bundle: bool,
}

impl Classification {
    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.one_pb {
            out.push("1PB");
        }
        if self.two_pb {
            out.push("2PB");
        }
        if self.three_pb {
            out.push("3PB");
        }
        if self.two_bundle {
            out.push("2-bundle");
        }
        if self.three_bundle {
            out.push("3-bundle");
        }
        out
    }
}

fn need_trace<'a>(t: &'a Option<GTrace>, what: &str) -> Result<&'a GTrace> {
    let tr = t
        .as_ref()
        .ok_or_else(|| Error::IncompleteRecord(format!("missing {what}")))?;
    if tr.values.len() < 2 {
        return Err(Error::IncompleteRecord(format!(
            "{what} has fewer than two grid points"
        )));
    }
    Ok(tr)
}

/// Evaluate the blockade/bundle inequalities literally. Comparisons of a
/// zero-delay value against "the delayed value" use the first grid point
/// τ₁ > 0 for the `>` direction and the maximum over τ > 0 for the `<`
/// direction.
pub fn classify(record: &ObservableRecord) -> Result<Classification> {
    let g2_0 = record
        .g2_0
        .ok_or_else(|| Error::IncompleteRecord("missing g2_0".into()))?;
    let g3_0 = record
        .g3_0
        .ok_or_else(|| Error::IncompleteRecord("missing g3_0".into()))?;
    let g4_0 = record
        .g4_0
        .ok_or_else(|| Error::IncompleteRecord("missing g4_0".into()))?;
    let t1 = need_trace(&record.g12_trace, "g12 trace")?;
    let t2 = need_trace(&record.g22_trace, "g22 trace")?;
    let t3 = need_trace(&record.g32_trace, "g32 trace")?;

    let max_tail = |t: &GTrace| t.values[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let photon_bunched_within = t1.values[0] > t1.values[1];

    Ok(Classification {
        one_pb: g2_0 < 1.0 && g2_0 < max_tail(t1),
        two_pb: g2_0 > 1.0 && g3_0 < 1.0,
        three_pb: g3_0 > 1.0 && g4_0 < 1.0,
        two_bundle: t2.values[0] < max_tail(t2) && photon_bunched_within,
        three_bundle: t3.values[0] < max_tail(t3) && photon_bunched_within,
    })
}

/// Assemble the full record at one parameter point; delayed traces are
/// computed on `tau_grid` when given. Undefined correlations (vacuum) become
/// `None` fields rather than errors so records survive dark points.
pub fn build_record(
    params: &SystemParams,
    l: &Liouvillian,
    ss: &SteadyState,
    tau_grid: Option<&[f64]>,
) -> Result<ObservableRecord> {
    let defined = |r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedCorrelation(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let defined_trace = |r: Result<GTrace>| -> Result<Option<GTrace>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::UndefinedCorrelation(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let n_s = mean_photon(&ss.rho);
    let (p, p_tilde) = photon_distribution(&ss.rho);
    let (g12, g22, g32) = match tau_grid {
        Some(grid) => (
            defined_trace(gn2_tau(l, &ss.rho, 1, grid))?,
            defined_trace(gn2_tau(l, &ss.rho, 2, grid))?,
            defined_trace(gn2_tau(l, &ss.rho, 3, grid))?,
        ),
        None => (None, None, None),
    };
    Ok(ObservableRecord {
        params: params.clone(),
        cutoff: ss.cutoff,
        n_s,
        g2_0: defined(g1n_zero(&ss.rho, 2))?,
        g3_0: defined(g1n_zero(&ss.rho, 3))?,
        g4_0: defined(g1n_zero(&ss.rho, 4))?,
        p,
        p_tilde,
        g12_trace: g12,
        g22_trace: g22,
        g32_trace: g32,
    })
}
