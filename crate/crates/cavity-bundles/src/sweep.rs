//! Deterministic parameter sweeps over one or two axes, with CSV output.
//!
//! Grid convention: inclusive endpoints, uniform spacing; every axis value is
//! recomputed from its index (never accumulated) so long sweeps cannot drift.
//! The truncation cutoff is established once per sweep, by a convergence scan
//! at the most demanding corner of the grid, and reused for every point.
//! Worker scheduling never affects output: rows are aggregated in row-major
//! axis order and each point is computed independently, so the emitted bytes
//! are identical for any worker count.

use crate::correlations::{build_record, ObservableRecord};
use crate::error::{Error, Result};
use crate::hilbert::SpaceConfig;
use crate::lindblad::{
    build_liouvillian, convergence_scan, steady_state, DEFAULT_CUTOFFS,
};
use crate::model::{build_effective_hamiltonian, effective_collapse_ops, SystemParams};
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

/// Parameter a sweep axis may range over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    DeltaA,
    Chi,
    Phi,
    Omega,
    GammaE,
}

impl SweepParameter {
    /// Parse the CSV/config-facing axis name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "delta_a" => Ok(SweepParameter::DeltaA),
            "chi" => Ok(SweepParameter::Chi),
            "phi" => Ok(SweepParameter::Phi),
            "omega" => Ok(SweepParameter::Omega),
            "gamma_e" => Ok(SweepParameter::GammaE),
            other => Err(Error::Invalid(format!(
                "unknown sweep axis {other:?}; expected one of delta_a, chi, phi, omega, gamma_e"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::DeltaA => "delta_a",
            SweepParameter::Chi => "chi",
            SweepParameter::Phi => "phi",
            SweepParameter::Omega => "omega",
            SweepParameter::GammaE => "gamma_e",
        }
    }

    fn apply(self, p: &mut SystemParams, v: f64) {
        match self {
            SweepParameter::DeltaA => p.delta_a = v,
            SweepParameter::Chi => p.chi = v,
            SweepParameter::Phi => p.phi = v,
            SweepParameter::Omega => p.omega = v,
            SweepParameter::GammaE => p.gamma_e = v,
        }
    }
}

/// One sweep axis: inclusive [min, max] with `points` uniform samples.
#[derive(Clone, Debug)]
pub struct AxisSpec {
    pub parameter: SweepParameter,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(parameter: SweepParameter, min: f64, max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::Invalid(format!(
                "axis {} needs at least 2 points, got {points}",
                parameter.name()
            )));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Invalid(format!(
                "axis {} range [{min}, {max}] is not finite",
                parameter.name()
            )));
        }
        Ok(AxisSpec {
            parameter,
            min,
            max,
            points,
        })
    }

    /// The i-th grid value, recomputed from the index.
    pub fn value(&self, i: usize) -> f64 {
        debug_assert!(i < self.points);
        self.min + (self.max - self.min) * (i as f64) / ((self.points - 1) as f64)
    }
}

/// Extra per-row output column beyond the fixed observable set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtraObservable {
    /// Photon-number probability p(q); column `p{q}`.
    PhotonProbability(usize),
    /// Vacuum-excluded probability p̃(q) = p(q)/(1−p(0)); column `pt{q}`.
    ConditionalProbability(usize),
}

impl ExtraObservable {
    pub fn column_name(self) -> String {
        match self {
            ExtraObservable::PhotonProbability(q) => format!("p{q}"),
            ExtraObservable::ConditionalProbability(q) => format!("pt{q}"),
        }
    }

    fn order(self) -> usize {
        match self {
            ExtraObservable::PhotonProbability(q) | ExtraObservable::ConditionalProbability(q) => q,
        }
    }

    fn evaluate(self, record: &ObservableRecord) -> f64 {
        match self {
            ExtraObservable::PhotonProbability(q) => record.p[q],
            ExtraObservable::ConditionalProbability(q) => match &record.p_tilde {
                Some(pt) => pt[q],
                None => f64::NAN,
            },
        }
    }
}

/// Full description of a sweep. `base` carries every fixed parameter,
/// including the δ rule applied at each grid point.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    pub axis2: Option<AxisSpec>,
    pub base: SystemParams,
    pub extras: Vec<ExtraObservable>,
    /// When set, `run_sweep` also writes the CSV here.
    pub output: Option<PathBuf>,
    pub workers: usize,
    /// Cutoff ladder for the convergence scan; `None` uses the default.
    pub cutoffs: Option<Vec<usize>>,
    /// Skip the corner scan and force this cutoff. The caller then owns the
    /// convergence claim — the same override the command line exposes.
    pub cutoff_override: Option<usize>,
}

/// Outcome code for one grid point, emitted in the `status` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    /// All observables evaluated.
    Ok,
    /// Steady state found but normalized correlations are undefined (vacuum).
    Undefined,
    /// The point failed to solve; observables carry the `nan` sentinel.
    Failed,
}

impl RowStatus {
    pub fn code(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Undefined => "undefined",
            RowStatus::Failed => "failed",
        }
    }
}

/// One output row. Parameter columns echo the exact values the model saw
/// (φ normalized into [0, 2π), δ derived from the rule).
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub delta_a: f64,
    pub chi: f64,
    pub phi: f64,
    pub delta: f64,
    pub omega: f64,
    pub n_s: f64,
    pub g2_0: f64,
    pub g3_0: f64,
    pub g4_0: f64,
    pub extras: Vec<f64>,
    pub status: RowStatus,
}

/// All rows of a finished sweep plus the cutoff they were computed at.
#[derive(Clone, Debug)]
pub struct SweepTable {
    pub cutoff: usize,
    pub extra_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// The corner of the grid expected to need the largest truncation: the
/// largest drive magnitude and the smallest |Δₐ| reachable on the axes.
/// Axes beyond those two take their own conservative extreme (strongest
/// |χ| and |φ|, weakest extra damping).
fn corner_params(spec: &SweepSpec) -> SystemParams {
    let mut p = spec.base.clone();
    for axis in std::iter::once(&spec.axis1).chain(spec.axis2.as_ref()) {
        let values = (0..axis.points).map(|i| axis.value(i));
        let v = match axis.parameter {
            SweepParameter::Omega | SweepParameter::Chi | SweepParameter::Phi => values
                .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc }),
            SweepParameter::DeltaA => values
                .fold(f64::INFINITY, |acc, v| if v.abs() < acc.abs() { v } else { acc }),
            SweepParameter::GammaE => values.fold(f64::INFINITY, f64::min),
        };
        axis.parameter.apply(&mut p, v);
    }
    p
}

fn point_record(params: &SystemParams, space: &SpaceConfig) -> Result<ObservableRecord> {
    let mut p = params.clone();
    p.validate()?;
    let h = build_effective_hamiltonian(&p, space)?;
    let collapse = effective_collapse_ops(&p, space)?;
    let l = build_liouvillian(&h, &collapse)?;
    let ss = steady_state(&l)?;
    build_record(&p, &l, &ss, None)
}

fn compute_row(spec: &SweepSpec, space: &SpaceConfig, i: usize, j: usize) -> SweepRow {
    let mut p = spec.base.clone();
    spec.axis1.parameter.apply(&mut p, spec.axis1.value(i));
    if let Some(a2) = &spec.axis2 {
        a2.parameter.apply(&mut p, a2.value(j));
    }
    // Echo through a validated copy so the parameter columns show exactly
    // what the model used, even for rows that later fail.
    let mut echo = p.clone();
    let _ = echo.validate();
    let (delta_a, chi, phi, delta, omega) =
        (echo.delta_a, echo.chi, echo.phi, echo.delta(), echo.omega);
    match point_record(&p, space) {
        Ok(record) => {
            let nan = f64::NAN;
            let status = if record.g2_0.is_some() && record.g3_0.is_some() && record.g4_0.is_some()
            {
                RowStatus::Ok
            } else {
                RowStatus::Undefined
            };
            let extras = spec.extras.iter().map(|e| e.evaluate(&record)).collect();
            SweepRow {
                delta_a,
                chi,
                phi,
                delta,
                omega,
                n_s: record.n_s,
                g2_0: record.g2_0.unwrap_or(nan),
                g3_0: record.g3_0.unwrap_or(nan),
                g4_0: record.g4_0.unwrap_or(nan),
                extras,
                status,
            }
        }
        Err(_) => SweepRow {
            delta_a,
            chi,
            phi,
            delta,
            omega,
            n_s: f64::NAN,
            g2_0: f64::NAN,
            g3_0: f64::NAN,
            g4_0: f64::NAN,
            extras: vec![f64::NAN; spec.extras.len()],
            status: RowStatus::Failed,
        },
    }
}

/// Run the sweep: establish the cutoff once at the most demanding corner,
/// evaluate every grid point in row-major axis order, and (when an output
/// path is set) write the CSV. A point that fails poisons only its own row.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let mut base_check = spec.base.clone();
    base_check.validate()?;
    if let Some(a2) = &spec.axis2 {
        if a2.parameter == spec.axis1.parameter {
            return Err(Error::Invalid(format!(
                "both axes sweep {}; axes must differ",
                a2.parameter.name()
            )));
        }
    }
    if spec.workers == 0 {
        return Err(Error::Invalid("worker count must be at least 1".into()));
    }

    let cutoff = match spec.cutoff_override {
        Some(c) => c,
        None => {
            let mut corner = corner_params(spec);
            corner.validate()?;
            let ladder: Vec<usize> = spec
                .cutoffs
                .clone()
                .unwrap_or_else(|| DEFAULT_CUTOFFS.to_vec());
            convergence_scan(&corner, &ladder)?.chosen
        }
    };
    for e in &spec.extras {
        if e.order() > cutoff {
            return Err(Error::Invalid(format!(
                "column {} asks for photon number {} beyond the converged cutoff {cutoff}",
                e.column_name(),
                e.order()
            )));
        }
    }
    let space = SpaceConfig::new(cutoff)?;

    let n2 = spec.axis2.as_ref().map_or(1, |a| a.points);
    let indices: Vec<(usize, usize)> = (0..spec.axis1.points)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool construction failed: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        indices
            .par_iter()
            .map(|&(i, j)| compute_row(spec, &space, i, j))
            .collect()
    });

    let table = SweepTable {
        cutoff,
        extra_names: spec.extras.iter().map(|e| e.column_name()).collect(),
        rows,
    };
    if let Some(path) = &spec.output {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        write_csv(&table, &mut w)?;
    }
    Ok(table)
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

/// Write the table as UTF-8 CSV with LF line endings and full double
/// precision (17 significant digits). Failed values print as `nan`.
pub fn write_csv<W: Write>(table: &SweepTable, w: &mut W) -> Result<()> {
    let mut header = String::from("delta_a,chi,phi,delta,omega,n_s,g2_0,g3_0,g4_0");
    for name in &table.extra_names {
        header.push(',');
        header.push_str(name);
    }
    header.push_str(",status\n");
    w.write_all(header.as_bytes())?;
    for r in &table.rows {
        let mut line = String::new();
        for (k, v) in [
            r.delta_a, r.chi, r.phi, r.delta, r.omega, r.n_s, r.g2_0, r.g3_0, r.g4_0,
        ]
        .into_iter()
        .enumerate()
        {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&fmt_value(v));
        }
        for v in &r.extras {
            line.push(',');
            line.push_str(&fmt_value(*v));
        }
        line.push(',');
        line.push_str(r.status.code());
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Render the whole CSV into a byte buffer (used by determinism checks).
pub fn csv_bytes(table: &SweepTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{g1n_zero, mean_photon};
    use crate::model::DeltaRule;

    /// Small lit-cavity parameters; plumbing tests force the cutoff so they
    /// stay fast (three-photon truncation error would otherwise demand the
    /// production ladder at every test).
    fn tame_base() -> SystemParams {
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

    fn tame_spec(axis1: AxisSpec, axis2: Option<AxisSpec>) -> SweepSpec {
        SweepSpec {
            axis1,
            axis2,
            base: tame_base(),
            extras: vec![],
            output: None,
            workers: 1,
            cutoffs: None,
            cutoff_override: Some(3),
        }
    }

    #[test]
    fn axis_and_spec_validation() {
        assert!(SweepParameter::from_name("delta_a").is_ok());
        assert!(SweepParameter::from_name("gamma_e").is_ok());
        assert!(SweepParameter::from_name("g_a").is_err());
        assert!(AxisSpec::new(SweepParameter::Chi, 0.0, 1.0, 1).is_err());
        assert!(AxisSpec::new(SweepParameter::Chi, 0.0, f64::INFINITY, 5).is_err());
        assert!(AxisSpec::new(SweepParameter::Chi, 2.0, 2.0, 2).is_ok());

        let ax = AxisSpec::new(SweepParameter::Chi, 0.0, 1.0, 3).unwrap();
        let mut spec = tame_spec(ax.clone(), Some(ax));
        assert!(run_sweep(&spec).is_err());
        spec.axis2 = None;
        spec.workers = 0;
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn axis_values_are_recomputed_from_indices() {
        let ax = AxisSpec::new(SweepParameter::DeltaA, -1.0, 2.0, 7).unwrap();
        assert_eq!(ax.value(0), -1.0);
        assert_eq!(ax.value(6), 2.0);
        assert!((ax.value(2) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_grid_repeats_one_point() {
        let a1 = AxisSpec::new(SweepParameter::DeltaA, 2.0, 2.0, 2).unwrap();
        let a2 = AxisSpec::new(SweepParameter::Chi, 0.7, 0.7, 2).unwrap();
        let table = run_sweep(&tame_spec(a1, Some(a2))).unwrap();
        assert_eq!(table.rows.len(), 4);
        let first = &table.rows[0];
        assert_eq!(first.status, RowStatus::Ok);
        for r in &table.rows[1..] {
            assert_eq!(r.n_s, first.n_s);
            assert_eq!(r.g2_0, first.g2_0);
            assert_eq!(r.g3_0, first.g3_0);
            assert_eq!(r.g4_0, first.g4_0);
        }
    }

    #[test]
    fn rows_match_standalone_points() {
        let a1 = AxisSpec::new(SweepParameter::DeltaA, 1.5, 2.5, 3).unwrap();
        let a2 = AxisSpec::new(SweepParameter::Chi, 0.0, 0.8, 2).unwrap();
        let spec = tame_spec(a1.clone(), Some(a2.clone()));
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows.len(), 6);
        let space = SpaceConfig::new(table.cutoff).unwrap();
        for (i, j) in [(0usize, 0usize), (1, 1), (2, 0)] {
            let row = &table.rows[i * 2 + j];
            let mut p = tame_base();
            p.delta_a = a1.value(i);
            p.chi = a2.value(j);
            p.validate().unwrap();
            let h = build_effective_hamiltonian(&p, &space).unwrap();
            let c = effective_collapse_ops(&p, &space).unwrap();
            let l = build_liouvillian(&h, &c).unwrap();
            let ss = steady_state(&l).unwrap();
            let n_s = mean_photon(&ss.rho);
            assert!((row.n_s - n_s).abs() <= 1e-12 * n_s.abs().max(1.0));
            let g2 = g1n_zero(&ss.rho, 2).unwrap();
            assert!((row.g2_0 - g2).abs() <= 1e-12 * g2.abs().max(1.0));
            assert_eq!(row.delta_a, a1.value(i));
            assert_eq!(row.chi, a2.value(j));
            assert_eq!(row.delta, 1.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let a1 = AxisSpec::new(SweepParameter::DeltaA, 1.5, 2.5, 3).unwrap();
        let a2 = AxisSpec::new(SweepParameter::Omega, 0.1, 0.3, 2).unwrap();
        let mut spec = tame_spec(a1, Some(a2));
        spec.extras = vec![
            ExtraObservable::PhotonProbability(0),
            ExtraObservable::ConditionalProbability(1),
        ];
        let t1 = run_sweep(&spec).unwrap();
        spec.workers = 4;
        let t8 = run_sweep(&spec).unwrap();
        assert_eq!(csv_bytes(&t1).unwrap(), csv_bytes(&t8).unwrap());
    }

    #[test]
    fn csv_contract_and_dark_point_sentinels() {
        let a1 = AxisSpec::new(SweepParameter::Omega, 0.0, 0.3, 2).unwrap();
        let mut spec = tame_spec(a1, None);
        spec.extras = vec![ExtraObservable::ConditionalProbability(1)];
        let table = run_sweep(&spec).unwrap();
        let text = String::from_utf8(csv_bytes(&table).unwrap()).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(
            lines[0],
            "delta_a,chi,phi,delta,omega,n_s,g2_0,g3_0,g4_0,pt1,status"
        );
        assert!(!text.contains('\r'));
        assert_eq!(lines.len(), 4, "2 data rows + header + trailing newline");

        // Ω = 0 leaves the cavity dark: correlations carry the sentinel.
        let dark: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(dark.last().copied(), Some("undefined"));
        assert_eq!(dark[6], "nan");
        assert_eq!(dark[9], "nan");
        let n_s: f64 = dark[5].parse().unwrap();
        assert!(n_s.abs() < 1e-12);
        // the driven row is fully populated
        let lit: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(lit.last().copied(), Some("ok"));
        assert!(lit[6].parse::<f64>().unwrap().is_finite());
        // 17 significant digits: 1 lead + '.' + 16 fractional
        assert!(lit[5].contains('.') && lit[5].split('.').nth(1).unwrap().len() >= 17);
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let a1 = AxisSpec::new(SweepParameter::Chi, 0.4, 0.6, 2).unwrap();
        let mut spec = tame_spec(a1, None);
        spec.output = Some(PathBuf::from("/nonexistent-dir-for-sure/out.csv"));
        match run_sweep(&spec) {
            Err(Error::Io(_)) => {}
            other => panic!("expected Io error, got {other:?}"),
        }
    }

    #[test]
    fn corner_picks_strongest_drive_and_smallest_detuning() {
        let a1 = AxisSpec::new(SweepParameter::DeltaA, -30.0, 10.0, 5).unwrap();
        let a2 = AxisSpec::new(SweepParameter::Omega, 0.1, 0.4, 4).unwrap();
        let spec = tame_spec(a1, Some(a2));
        let corner = corner_params(&spec);
        assert_eq!(corner.delta_a, 0.0);
        assert_eq!(corner.omega, 0.4);
        let a1 = AxisSpec::new(SweepParameter::GammaE, 0.02, 0.1, 3).unwrap();
        let spec = tame_spec(a1, None);
        assert_eq!(corner_params(&spec).gamma_e, 0.02);
    }

    #[test]
    fn antibunching_profile_has_two_symmetric_dips() {
        // Sweeping Δₐ at χ = 0, φ = 0 with the production parameters must
        // show the two antibunching minima at Δₐ = ±2.5 gₐ.
        let a1 = AxisSpec::new(SweepParameter::DeltaA, -35.0, 35.0, 15).unwrap();
        let spec = SweepSpec {
            axis1: a1,
            axis2: None,
            base: SystemParams::default(),
            extras: vec![],
            output: None,
            workers: 1,
            cutoffs: Some(vec![8, 10, 12]),
            cutoff_override: None,
        };
        let table = run_sweep(&spec).unwrap();
        assert_eq!(table.rows.len(), 15);
        for r in &table.rows {
            assert_eq!(r.status, RowStatus::Ok, "row at delta_a={}", r.delta_a);
        }
        let argmin = |rows: &[SweepRow]| {
            rows.iter()
                .min_by(|a, b| a.g2_0.partial_cmp(&b.g2_0).unwrap())
                .unwrap()
                .delta_a
        };
        let neg: Vec<SweepRow> = table.rows[..7].to_vec();
        let pos: Vec<SweepRow> = table.rows[8..].to_vec();
        assert_eq!(argmin(&neg), -25.0, "left dip sits at -2.5 g_a");
        assert_eq!(argmin(&pos), 25.0, "right dip sits at +2.5 g_a");
        // mirror symmetry of the profile under (Δₐ, δ) → (−Δₐ, −δ)
        for k in 0..15 {
            let l = &table.rows[k];
            let r = &table.rows[14 - k];
            assert!(
                (l.g2_0 - r.g2_0).abs() <= 1e-6 * l.g2_0.abs().max(1e-30),
                "asymmetry at delta_a={}",
                l.delta_a
            );
        }
    }
}
