//! The five subcommands as library functions returning result tables.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::output::{Cell, Format, Provenance, ResultTable};
use super::scenario::{Scenario, ScenarioError, Variable};
use crate::conditional::{
    covariance_closed, covariance_numeric, determinant_slack, optimal_quadrature, CovarianceMatrix, NumericOptions,
};
use crate::criteria::{self, classify};
use crate::multimode::{self, SecondMode, PHOTON_RANGE};
use crate::params::{DimensionlessParams, UnitScale};
use crate::spectra::{self, log_grid, SpectrumUnits};
use crate::wiener::{self, Target, WienerFilter};

/// Relative closed-form vs numeric disagreement that counts as a
/// consistency failure.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("closed form and numeric integral disagree at {count} point(s); first: {first}")]
    Consistency { count: usize, first: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(ScenarioError::Read { .. }) | RunError::Io(_) => 4,
            RunError::Scenario(_) | RunError::Validation(_) => 2,
            RunError::Numeric(_) | RunError::Consistency { .. } => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
    /// Fraction of sweep points re-verified against the numeric integral.
    pub verify_fraction: f64,
    pub overrides: Vec<(String, f64)>,
    pub command: String,
}

/// Whether point `index` is among the deterministically verified ones.
pub fn selected_for_verification(index: u64, fraction: f64) -> bool {
    if fraction <= 0.0 {
        return false;
    }
    if fraction >= 1.0 {
        return true;
    }
    let digest = Sha256::digest(index.to_le_bytes());
    let head = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    (head as f64) < fraction * 18_446_744_073_709_551_616.0
}

fn ratio_tag(r: f64) -> String {
    format!("R{r}")
}

fn provenance(s: &Scenario, options: &RunOptions) -> Provenance {
    let mut p = Provenance::new(&s.name, &s.sha256, &options.command);
    if let Some(m) = &s.mapping {
        p.push("kappa_rad_per_s", super::output::format_number(m.kappa));
        p.push("g0_rad_per_s", super::output::format_number(m.g0));
    }
    p
}

pub const COVARIANCE_COLUMNS: [&str; 19] = [
    "eta",
    "C",
    "n_th",
    "Q",
    "R",
    "vxx",
    "vpp",
    "vxp",
    "purity",
    "theta",
    "v_min",
    "det",
    "n_tot_over_eta_c",
    "rwa",
    "backaction_dominated",
    "weak_measurement",
    "n_cav",
    "verified",
    "status",
];

pub const BOUND_COLUMNS: [&str; 4] = ["v_lower", "v_upper", "omega12", "bound_regime"];

pub const NUMERIC_COLUMNS: [&str; 4] = ["vxx_numeric", "vpp_numeric", "vxp_numeric", "max_rel_diff"];

/// Result of evaluating one grid point.
struct PointRecord {
    cells: Vec<Cell>,
    mismatch: Option<String>,
}

fn point_record(
    p: Result<DimensionlessParams, String>,
    n_cav: Option<f64>,
    second_mode: Option<&SecondMode>,
    verify: bool,
    numeric_columns: bool,
) -> PointRecord {
    let nan = f64::NAN;
    let extra =
        second_mode.map_or(0, |_| BOUND_COLUMNS.len()) + if numeric_columns { NUMERIC_COLUMNS.len() } else { 0 };
    let failed = |p: Option<&DimensionlessParams>, status: String| {
        let head: Vec<Cell> = match p {
            Some(p) => vec![
                p.eta().into(),
                p.cooperativity().into(),
                p.n_th().into(),
                p.quality_factor().into(),
                p.ratio().into(),
            ],
            None => vec![nan.into(); 5],
        };
        let mut cells = head;
        cells.extend(std::iter::repeat_n(Cell::Number(nan), 8));
        cells.extend([Cell::Flag(false), Cell::Flag(false), Cell::Flag(false)]);
        cells.push(n_cav.into());
        cells.push(Cell::Flag(false));
        cells.push(Cell::Text(status));
        cells.extend(std::iter::repeat_n(Cell::Number(nan), extra));
        PointRecord { cells, mismatch: None }
    };
    let p = match p {
        Ok(p) => p,
        Err(e) => return failed(None, format!("error: {e}")),
    };
    let v = match covariance_closed(&p) {
        Ok(v) => v,
        Err(e) => return failed(Some(&p), format!("error: {e}")),
    };
    let mut status = String::from("ok");
    let purity = match v.purity(determinant_slack(&p)) {
        Ok(x) => x,
        Err(e) => {
            status = format!("error: {e}");
            nan
        }
    };
    let q = optimal_quadrature(&v);
    let regime = classify(&p);
    let mut numeric: Option<CovarianceMatrix> = None;
    let mut mismatch = None;
    if verify {
        match covariance_numeric(&p, &NumericOptions::default()) {
            Ok(n) => {
                let diff = v.max_relative_difference(&n);
                if !(diff <= CONSISTENCY_TOLERANCE) {
                    let msg = format!("consistency failure: relative difference {diff:e}");
                    mismatch = Some(format!("{p:?}: {msg}"));
                    status = msg;
                }
                numeric = Some(n);
            }
            Err(e) => {
                let msg = format!("verification failed: {e}");
                mismatch = Some(format!("{p:?}: {msg}"));
                status = msg;
            }
        }
    }
    let mut cells: Vec<Cell> = vec![
        p.eta().into(),
        p.cooperativity().into(),
        p.n_th().into(),
        p.quality_factor().into(),
        p.ratio().into(),
        v.vxx.into(),
        v.vpp.into(),
        v.vxp.into(),
        purity.into(),
        q.theta.into(),
        q.v_min.into(),
        v.det().into(),
        (p.n_tot() / (p.eta() * p.cooperativity())).into(),
        regime.rwa.into(),
        regime.backaction_dominated.into(),
        regime.weak_measurement.into(),
        n_cav.into(),
        verify.into(),
    ];
    let mut tail: Vec<Cell> = Vec::new();
    if let Some(m2) = second_mode {
        match multimode::variance_bounds(&p, m2) {
            Ok(b) => tail.extend([
                b.lower.into(),
                b.upper.into(),
                b.omega12.into(),
                Cell::Text(bound_regime(b.regime).into()),
            ]),
            Err(e) => {
                if status == "ok" {
                    status = format!("error: {e}");
                }
                tail.extend([nan.into(), nan.into(), nan.into(), Cell::Text(String::new())]);
            }
        }
    }
    if numeric_columns {
        match numeric {
            Some(n) => tail.extend([n.vxx.into(), n.vpp.into(), n.vxp.into(), v.max_relative_difference(&n).into()]),
            None => tail.extend(std::iter::repeat_n(Cell::Number(nan), NUMERIC_COLUMNS.len())),
        }
    }
    cells.push(Cell::Text(status));
    cells.extend(tail);
    PointRecord { cells, mismatch }
}

fn bound_regime(r: multimode::BoundRegime) -> &'static str {
    match r {
        multimode::BoundRegime::ImprecisionDominated => "imprecision-dominated",
        multimode::BoundRegime::SignalCrossing => "signal-crossing",
    }
}

fn covariance_columns(second_mode: bool, numeric: bool) -> Vec<&'static str> {
    let mut cols = COVARIANCE_COLUMNS.to_vec();
    if second_mode {
        cols.extend(BOUND_COLUMNS);
    }
    if numeric {
        cols.extend(NUMERIC_COLUMNS);
    }
    cols
}

/// Single point at the first feedback ratio with overrides applied. The
/// numeric integral is always evaluated.
pub fn run_point(s: &Scenario, options: &RunOptions) -> Result<(ResultTable, Option<String>), RunError> {
    let (p, n_cav) = s.apply_overrides(&s.base, &options.overrides)?;
    let record = point_record(Ok(p), n_cav, s.second_mode.as_ref(), true, true);
    let mut table = ResultTable::new(covariance_columns(s.second_mode.is_some(), true), provenance(s, options));
    table.push(record.cells);
    Ok((table, record.mismatch))
}

fn point_params(
    s: &Scenario,
    base: &DimensionlessParams,
    coords: &[(Variable, f64)],
) -> Result<(DimensionlessParams, Option<f64>), String> {
    let mut p = *base;
    let mut n_cav = s.n_cav;
    for &(var, x) in coords {
        p = match var {
            Variable::Cooperativity => p.with_cooperativity(x).map_err(|e| e.to_string())?,
            Variable::NTh => p.with_n_th(x).map_err(|e| e.to_string())?,
            Variable::Eta => p.with_eta(x).map_err(|e| e.to_string())?,
            Variable::QualityFactor => DimensionlessParams::new(p.eta(), p.cooperativity(), p.n_th(), x, p.ratio())
                .map_err(|e| e.to_string())?,
            Variable::NCav => {
                n_cav = Some(x);
                s.at_photons(&p, x).map_err(|e| e.to_string())?
            }
        };
    }
    Ok((p, n_cav))
}

fn grid_coords(s: &Scenario, index: usize) -> Vec<(Variable, f64)> {
    // row-major: the first axis varies slowest
    let mut coords = Vec::with_capacity(s.axes.len());
    let mut rest = index;
    let mut stride = s.grid_len();
    for axis in &s.axes {
        stride /= axis.values.len();
        coords.push((axis.variable, axis.values[rest / stride]));
        rest %= stride;
    }
    coords
}

/// Outcome of a multi-file command.
#[derive(Debug)]
pub struct RunSummary {
    pub tables: Vec<(String, ResultTable)>,
    pub mismatches: Vec<String>,
}

impl RunSummary {
    pub fn save(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>, RunError> {
        self.tables.iter().map(|(stem, t)| Ok(t.save(dir, stem, format)?)).collect()
    }

    pub fn into_result(self) -> Result<Self, RunError> {
        match self.mismatches.first() {
            Some(first) => Err(RunError::Consistency { count: self.mismatches.len(), first: first.clone() }),
            None => Ok(self),
        }
    }
}

/// Covariance over the scenario grid, one table per feedback ratio.
pub fn run_sweep(s: &Scenario, options: &RunOptions) -> Result<RunSummary, RunError> {
    let points = s.feedback_points().map_err(|e| RunError::Validation(e.to_string()))?;
    let n = s.grid_len();
    let mut tables = Vec::new();
    let mut mismatches = Vec::new();
    for (ri, base) in points.iter().enumerate() {
        let (base, _) = s.apply_overrides(base, &options.overrides)?;
        let records: Vec<PointRecord> = (0..n)
            .into_par_iter()
            .map(|i| {
                let coords = grid_coords(s, i);
                let verify = selected_for_verification((ri * n + i) as u64, options.verify_fraction);
                match point_params(s, &base, &coords) {
                    Ok((p, n_cav)) => point_record(Ok(p), n_cav, s.second_mode.as_ref(), verify, false),
                    Err(e) => point_record(Err(e), None, s.second_mode.as_ref(), false, false),
                }
            })
            .collect();
        let mut table = ResultTable::new(covariance_columns(s.second_mode.is_some(), false), provenance(s, options));
        for r in records {
            mismatches.extend(r.mismatch);
            table.push(r.cells);
        }
        tables.push((format!("{}_{}", s.name, ratio_tag(base.ratio())), table));
    }
    Ok(RunSummary { tables, mismatches })
}

pub const THRESHOLD_COLUMNS: [&str; 15] = [
    "target",
    "regime",
    "n_th",
    "R",
    "eta",
    "c_closed",
    "c_full",
    "ratio",
    "formula",
    "Q",
    "c_optimal",
    "v_optimal",
    "n_cav_closed",
    "n_cav_full",
    "status",
];

/// Threshold table over targets, efficiencies, occupancies and ratios.
pub fn run_thresholds(s: &Scenario, options: &RunOptions) -> Result<RunSummary, RunError> {
    let grid =
        s.thresholds.as_ref().ok_or_else(|| RunError::Validation("scenario has no [thresholds] section".into()))?;
    let (base, _) = s.apply_overrides(&s.base, &options.overrides)?;
    let mut jobs = Vec::new();
    for &target in &grid.targets {
        for &eta in &grid.eta {
            for &n_th in &grid.n_th {
                for &r in &s.ratios {
                    jobs.push((target, eta, n_th, r));
                }
            }
        }
    }
    let nan = f64::NAN;
    let rows: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(target, eta, n_th, r)| {
            let params = base.with_eta(eta).and_then(|p| p.with_n_th(n_th)).and_then(|p| p.with_ratio(r));
            let head = |regime: &str| -> Vec<Cell> {
                vec![target.as_str().into(), regime.into(), n_th.into(), r.into(), eta.into()]
            };
            let p = match params {
                Ok(p) => p,
                Err(e) => {
                    let mut row = head("none");
                    row.extend(std::iter::repeat_n(Cell::Number(nan), 3));
                    row.push("".into());
                    row.extend(std::iter::repeat_n(Cell::Number(nan), 5));
                    row.push(format!("error: {e}").into());
                    return row;
                }
            };
            let result = match target {
                Target::Position => criteria::position_threshold(&p, grid.full_model),
                Target::Momentum => criteria::momentum_threshold(&p, grid.full_model),
            };
            let photons = |c: Option<f64>| s.mapping.as_ref().and_then(|m| c.map(|c| m.photons(c)));
            match result.and_then(|t| Ok((criteria::threshold_row(&p, &t)?, t))) {
                Ok((row, t)) => {
                    let complete = t.c_closed_form.is_some() && (t.c_full_model.is_some() || !grid.full_model);
                    let status = if complete { "ok" } else { "no-threshold" };
                    let mut cells = head(row.regime);
                    cells.extend([
                        row.c_closed.into(),
                        row.c_full.into(),
                        row.ratio.into(),
                        t.formula.as_str().into(),
                        p.quality_factor().into(),
                        t.c_optimal.into(),
                        t.v_optimal.into(),
                        photons(t.c_closed_form).into(),
                        photons(t.c_full_model).into(),
                        status.into(),
                    ]);
                    cells
                }
                Err(e) => {
                    let mut row = head("none");
                    row.extend(std::iter::repeat_n(Cell::Number(nan), 3));
                    row.push("".into());
                    row.push(p.quality_factor().into());
                    row.extend(std::iter::repeat_n(Cell::Number(nan), 4));
                    row.push(format!("error: {e}").into());
                    row
                }
            }
        })
        .collect();
    let mut table = ResultTable::new(THRESHOLD_COLUMNS.to_vec(), provenance(s, options));
    rows.into_iter().for_each(|r| table.push(r));
    let mut tables = vec![(format!("{}_thresholds", s.name), table)];

    if let Some(m) = &s.mapping {
        let mut t =
            ResultTable::new(vec!["n_th", "g0", "kappa", "null_spring_photons", "status"], provenance(s, options));
        t.push(vec![
            m.n_th().into(),
            m.g0.into(),
            m.kappa.into(),
            criteria::null_spring_photons(m).into(),
            "ok".into(),
        ]);
        tables.push((format!("{}_feasibility", s.name), t));
    }
    Ok(RunSummary { tables, mismatches: Vec::new() })
}

pub const BOUNDS_COLUMNS: [&str; 8] =
    ["n_cav", "R", "v_lower", "v_upper", "v_single_mode", "omega12", "bound_regime", "status"];

/// Second-mode bounds against photon number, one table per ratio, plus the
/// optimal photon numbers and the weakest feedback that still squeezes.
pub fn run_bounds(s: &Scenario, options: &RunOptions) -> Result<RunSummary, RunError> {
    let m2 =
        s.second_mode.as_ref().ok_or_else(|| RunError::Validation("scenario has no [second_mode] section".into()))?;
    let mapping = s.mapping.as_ref().ok_or_else(|| RunError::Validation("bounds need a photon mapping".into()))?;
    if !options.overrides.is_empty() {
        return Err(RunError::Validation("bounds do not accept overrides".into()));
    }
    let photons = match s.axes.iter().find(|a| a.variable == Variable::NCav) {
        Some(a) => a.values.clone(),
        None => log_grid(10f64.powf(PHOTON_RANGE.0), 10f64.powf(PHOTON_RANGE.1), 141),
    };
    let nan = f64::NAN;
    let mut tables = Vec::new();
    for &r in &s.ratios {
        let rows: Vec<Vec<Cell>> = photons
            .par_iter()
            .map(|&n| {
                let bounds = mapping
                    .params(n, r)
                    .map_err(multimode::MultimodeError::from)
                    .and_then(|p| multimode::variance_bounds(&p, m2));
                match (multimode::bounds_row(mapping, n, r, m2), bounds) {
                    (Ok(row), Ok(b)) => vec![
                        n.into(),
                        r.into(),
                        row.v_lower.into(),
                        row.v_upper.into(),
                        row.v_single_mode.into(),
                        b.omega12.into(),
                        bound_regime(b.regime).into(),
                        "ok".into(),
                    ],
                    (Err(e), _) | (_, Err(e)) => {
                        let mut cells: Vec<Cell> = vec![n.into(), r.into()];
                        cells.extend(std::iter::repeat_n(Cell::Number(nan), 4));
                        cells.extend(["".into(), format!("error: {e}").into()]);
                        cells
                    }
                }
            })
            .collect();
        let mut table = ResultTable::new(BOUNDS_COLUMNS.to_vec(), provenance(s, options));
        rows.into_iter().for_each(|row| table.push(row));
        tables.push((format!("{}_bounds_{}", s.name, ratio_tag(r)), table));
    }

    let mut optimum = ResultTable::new(
        vec![
            "R",
            "n_opt_lower",
            "v_opt_lower",
            "n_opt_upper",
            "v_opt_upper",
            "lower_at_boundary",
            "upper_at_boundary",
            "status",
        ],
        provenance(s, options),
    );
    let optima: Vec<_> = s.ratios.par_iter().map(|&r| (r, multimode::optimal_measurement(mapping, r, m2))).collect();
    for (r, o) in optima {
        match o {
            Ok(o) => optimum.push(vec![
                r.into(),
                o.lower.n_cav.into(),
                o.lower.variance.into(),
                o.upper.n_cav.into(),
                o.upper.variance.into(),
                o.lower.at_boundary.into(),
                o.upper.at_boundary.into(),
                "ok".into(),
            ]),
            Err(e) => {
                let mut cells: Vec<Cell> = vec![r.into()];
                cells.extend(std::iter::repeat_n(Cell::Number(nan), 4));
                cells.extend([false.into(), false.into(), format!("error: {e}").into()]);
                optimum.push(cells);
            }
        }
    }
    tables.push((format!("{}_bounds_optimum", s.name), optimum));

    let mut summary = ResultTable::new(vec!["max_squeezing_ratio", "status"], provenance(s, options));
    match multimode::min_feedback_for_squeezing(mapping, m2) {
        Ok(Some(r)) => summary.push(vec![r.into(), "ok".into()]),
        Ok(None) => summary.push(vec![f64::NAN.into(), "no-squeezing".into()]),
        Err(e) => summary.push(vec![f64::NAN.into(), format!("error: {e}").into()]),
    }
    tables.push((format!("{}_bounds_summary", s.name), summary));
    Ok(RunSummary { tables, mismatches: Vec::new() })
}

/// Noise spectra and optimal filters at the scenario point, for every
/// feedback ratio. Files use the fixed `# omega,S` and `# omega,ReH,ImH`
/// layouts in SI units when the oscillator is physical.
type SpectrumFn = Box<dyn Fn(f64) -> f64>;

pub fn run_spectra(s: &Scenario, options: &RunOptions) -> Result<Vec<PathBuf>, RunError> {
    let (lo, hi, n) = s.spectra.unwrap_or((1e-2, 1e2, 801));
    let omegas = log_grid(lo, hi, n);
    let scale = s.oscillator.map_or(UnitScale::SCALED, |o| o.unit_scale());
    std::fs::create_dir_all(&options.out)?;
    let mut written = Vec::new();
    let numeric = |e: &dyn std::fmt::Display| RunError::Numeric(e.to_string());
    for base in s.feedback_points().map_err(|e| RunError::Validation(e.to_string()))? {
        let (p, _) = s.apply_overrides(&base, &options.overrides)?;
        let stem = format!("{}_{}", s.name, ratio_tag(p.ratio()));
        let model = spectra::NoiseModel::new(&p);
        let measured = spectra::measured_psd(&p).map_err(|e| numeric(&e))?;
        let mut tables: Vec<(String, SpectrumUnits, SpectrumFn)> = vec![
            ("force".into(), SpectrumUnits::Force, Box::new(move |_| model.force)),
            ("imprecision".into(), SpectrumUnits::Displacement, Box::new(move |_| model.imprecision)),
            ("displacement".into(), SpectrumUnits::Displacement, Box::new(move |w| model.displacement(w))),
            ("measured".into(), SpectrumUnits::Displacement, Box::new(move |w| measured.eval(w))),
        ];
        if let Some(m2) = s.second_mode {
            tables.push(("second_mode".into(), SpectrumUnits::Displacement, Box::new(move |w| m2.psd(&p, w))));
        }
        for (kind, units, f) in &tables {
            let path = options.out.join(format!("{stem}_{kind}.csv"));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            spectra::write_spectrum_table(&mut file, &omegas, *units, &scale, f)?;
            written.push(path);
        }
        for target in [Target::Position, Target::Momentum] {
            let h = WienerFilter::closed_form(&p, target).map_err(|e| numeric(&e))?;
            let path = options.out.join(format!("{stem}_filter_{}.csv", target.as_str()));
            let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
            wiener::write_filter_table(&mut file, &omegas, &scale, |w| h.eval(w))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verification_selection_is_stable_and_proportional() {
        let picked: Vec<u64> = (0..100_000u64).filter(|&i| selected_for_verification(i, 0.01)).collect();
        assert!((900..1100).contains(&picked.len()), "{}", picked.len());
        let again: Vec<u64> = (0..100_000u64).filter(|&i| selected_for_verification(i, 0.01)).collect();
        assert_eq!(picked, again);
        assert!(!selected_for_verification(3, 0.0));
        assert!(selected_for_verification(3, 1.0));
    }

    #[test]
    fn grid_order_is_row_major() {
        let s = Scenario::bundled("fig3a").unwrap();
        let inner = s.axes[1].values.len();
        let c = grid_coords(&s, inner + 2);
        assert_eq!(c[0], (Variable::NTh, s.axes[0].values[1]));
        assert_eq!(c[1], (Variable::Cooperativity, s.axes[1].values[2]));
    }

    #[test]
    fn point_row_identity_columns() {
        let s = Scenario::bundled("fig2").unwrap();
        let options = RunOptions {
            out: PathBuf::new(),
            format: Format::Csv,
            verify_fraction: 1.0,
            overrides: vec![("ratio".into(), 1.0)],
            command: "point".into(),
        };
        let (table, mismatch) = run_point(&s, &options).unwrap();
        assert!(mismatch.is_none());
        let row = &table.rows[0];
        let col = |name| row[table.column(name).unwrap()].as_number().unwrap();
        assert_eq!(col("C"), 1e4);
        assert_eq!(col("n_th"), 2e3);
        assert!(col("max_rel_diff") < 1e-6);
        // the identity column and the determinant agree to the closed form's
        // finite-Q accuracy
        assert!((col("det") / col("n_tot_over_eta_c") - 1.0).abs() < 0.05);
    }

    #[test]
    fn failed_points_keep_row_width() {
        let r = point_record(Err("bad".into()), None, None, false, false);
        assert_eq!(r.cells.len(), COVARIANCE_COLUMNS.len());
        let m2 = SecondMode::new(2.0, 1e6, 1.0, 1.0).unwrap();
        let r = point_record(Err("bad".into()), None, Some(&m2), false, true);
        assert_eq!(r.cells.len(), COVARIANCE_COLUMNS.len() + BOUND_COLUMNS.len() + NUMERIC_COLUMNS.len());
        let p = DimensionlessParams::new(1.0, 10.0, 5.0, 20.0, 1.0).unwrap();
        let r = point_record(Ok(p), None, Some(&m2), true, true);
        assert_eq!(r.cells.len(), COVARIANCE_COLUMNS.len() + BOUND_COLUMNS.len() + NUMERIC_COLUMNS.len());
    }
}
