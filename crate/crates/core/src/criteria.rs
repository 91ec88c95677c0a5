//! Regime classification, squeezing thresholds in cooperativity and the
//! radiation-pressure actuation check.

use serde::Serialize;
use thiserror::Error;

use crate::conditional::{covariance_closed, ConditionalError, CovarianceMatrix};
use crate::multimode::golden_section_min;
use crate::params::{DimensionlessParams, OscillatorParams, ParamError, PhotonMapping};
use crate::wiener::Target;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("threshold C = {c} lies in the weak-measurement regime, where the protocol does not apply")]
    WeakMeasurement { c: f64 },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Conditional(#[from] ConditionalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeReport {
    /// `Omega_meas < Omega0` (strict; equality counts as non-RWA).
    pub rwa: bool,
    /// `C > n_th` (strict).
    pub backaction_dominated: bool,
    /// `Omega_meas <= sqrt(Omega0 Gamma)`.
    pub weak_measurement: bool,
}

impl RegimeReport {
    pub fn label(&self) -> &'static str {
        match (self.weak_measurement, self.rwa) {
            (true, _) => "weak",
            (false, true) => "rwa",
            (false, false) => "non-rwa",
        }
    }
}

pub fn classify(p: &DimensionlessParams) -> RegimeReport {
    let wm = p.omega_meas();
    RegimeReport {
        rwa: wm < 1.0,
        backaction_dominated: p.cooperativity() > p.n_th(),
        weak_measurement: wm <= p.gamma().sqrt(),
    }
}

/// Closed-form threshold expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// `(n_tot Q^2 R^4 / 4)^{1/3} / eta`
    PositionNonRwa,
    /// `(n_th Q^2 R^4 / 4)^{1/3} / eta`
    PositionThermal,
    /// `Q R^2 / (2 eta^{3/2})`
    PositionBackaction,
    /// `n_tot R^2 / eta`
    PositionRwa,
    /// `64 n_tot^3 / (eta R^4 Q^2)`
    MomentumNonRwa,
    /// `n_tot / (eta R^2)`
    MomentumRwa,
}

impl Formula {
    pub fn target(self) -> Target {
        match self {
            Formula::MomentumNonRwa | Formula::MomentumRwa => Target::Momentum,
            _ => Target::Position,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Formula::PositionNonRwa => "position-non-rwa",
            Formula::PositionThermal => "position-thermal",
            Formula::PositionBackaction => "position-backaction",
            Formula::PositionRwa => "position-rwa",
            Formula::MomentumNonRwa => "momentum-non-rwa",
            Formula::MomentumRwa => "momentum-rwa",
        }
    }

    /// Right-hand side for a trial cooperativity `c` (which sets `n_tot`).
    fn rhs(self, base: &DimensionlessParams, c: f64) -> f64 {
        let (eta, q, r, n_th) = (base.eta(), base.quality_factor(), base.ratio(), base.n_th());
        let n_tot = n_th + c + 0.5;
        let r2 = r * r;
        match self {
            Formula::PositionNonRwa => (n_tot * q * q * r2 * r2 / 4.0).cbrt() / eta,
            Formula::PositionThermal => (n_th * q * q * r2 * r2 / 4.0).cbrt() / eta,
            Formula::PositionBackaction => q * r2 / (2.0 * eta.powf(1.5)),
            Formula::PositionRwa => n_tot * r2 / eta,
            Formula::MomentumNonRwa => 64.0 * n_tot.powi(3) / (eta * r2 * r2 * q * q),
            Formula::MomentumRwa => n_tot / (eta * r2),
        }
    }

    /// Self-consistent threshold `C = rhs(C)` by fixed-point iteration
    /// (at most 50 steps, relative tolerance 1e-10). `None` when the
    /// iteration does not settle, which means the inequality has no solution.
    pub fn solve(self, base: &DimensionlessParams) -> Option<f64> {
        let mut c = self.rhs(base, 0.0);
        for _ in 0..50 {
            let next = self.rhs(base, c);
            if !next.is_finite() || next > 1e30 {
                return None;
            }
            if (next - c).abs() <= 1e-10 * next {
                return Some(next);
            }
            c = next;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub target: Target,
    pub formula: Formula,
    pub c_closed_form: Option<f64>,
    /// Lowest cooperativity where the full model crosses the zero-point level.
    pub c_full_model: Option<f64>,
    /// Cooperativity minimizing the variance (momentum only).
    pub c_optimal: Option<f64>,
    pub v_optimal: Option<f64>,
}

impl ThresholdResult {
    /// Closed form over full model.
    pub fn ratio(&self) -> Option<f64> {
        Some(self.c_closed_form? / self.c_full_model?)
    }
}

/// Cooperativity search range of the full-model crossing.
pub const C_RANGE: (f64, f64) = (1e-3, 1e12);

fn variance(base: &DimensionlessParams, target: Target, c: f64) -> Result<f64, CriteriaError> {
    let v = covariance_closed(&base.with_cooperativity(c)?)?;
    Ok(component(&v, target))
}

fn component(v: &CovarianceMatrix, target: Target) -> f64 {
    match target {
        Target::Position => v.vxx,
        Target::Momentum => v.vpp,
    }
}

/// Lowest `C` in [`C_RANGE`] with `V_target(C) = 1`, approached from the
/// non-squeezed side, by a log scan followed by bisection to `|dC|/C < 1e-9`.
pub fn full_model_crossing(base: &DimensionlessParams, target: Target) -> Result<Option<f64>, CriteriaError> {
    let (lo, hi) = (C_RANGE.0.log10(), C_RANGE.1.log10());
    let steps = ((hi - lo) * 10.0).round() as usize;
    let mut prev = (lo, variance(base, target, 10f64.powf(lo))?);
    if prev.1 < 1.0 {
        return Ok(Some(C_RANGE.0));
    }
    for i in 1..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let v = variance(base, target, 10f64.powf(x))?;
        if v < 1.0 {
            return bisect_crossing(base, target, prev.0, x).map(Some);
        }
        prev = (x, v);
    }
    Ok(None)
}

fn bisect_crossing(base: &DimensionlessParams, target: Target, mut a: f64, mut b: f64) -> Result<f64, CriteriaError> {
    // a: variance above one, b: below; work on log10 C
    while (10f64.powf(b - a) - 1.0) > 1e-10 {
        let mid = 0.5 * (a + b);
        if variance(base, target, 10f64.powf(mid))? < 1.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(10f64.powf(0.5 * (a + b)))
}

/// Cooperativity minimizing the momentum variance, with the minimum value.
pub fn optimal_momentum_cooperativity(base: &DimensionlessParams) -> Result<(f64, f64), CriteriaError> {
    let (lo, hi) = (C_RANGE.0.log10(), C_RANGE.1.log10());
    let steps = ((hi - lo) * 10.0).round() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let v = variance(base, Target::Momentum, 10f64.powf(x))?;
        if v < best.1 {
            best = (x, v);
        }
    }
    let step = (hi - lo) / steps as f64;
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let (x, v) = golden_section_min(|x| variance(base, Target::Momentum, 10f64.powf(x)), a, b, 1e-9)?;
    Ok((10f64.powf(x), v))
}

fn check_not_weak(base: &DimensionlessParams, c: Option<f64>) -> Result<(), CriteriaError> {
    if let Some(c) = c {
        if classify(&base.with_cooperativity(c)?).weak_measurement {
            return Err(CriteriaError::WeakMeasurement { c });
        }
    }
    Ok(())
}

/// Threshold for a specific formula, optionally with the full-model crossing.
pub fn threshold_for(
    base: &DimensionlessParams,
    formula: Formula,
    full_model: bool,
) -> Result<ThresholdResult, CriteriaError> {
    let target = formula.target();
    let c_closed = formula.solve(base);
    check_not_weak(base, c_closed)?;
    let c_full = if full_model { full_model_crossing(base, target)? } else { None };
    let (c_opt, v_opt) = if full_model && target == Target::Momentum {
        let (c, v) = optimal_momentum_cooperativity(base)?;
        (Some(c), Some(v))
    } else {
        (None, None)
    };
    Ok(ThresholdResult {
        target,
        formula,
        c_closed_form: c_closed,
        c_full_model: c_full,
        c_optimal: c_opt,
        v_optimal: v_opt,
    })
}

/// Picks the RWA or non-RWA form according to the regime at the threshold.
fn auto_formula(base: &DimensionlessParams, non_rwa: Formula, rwa: Formula) -> Result<Formula, CriteriaError> {
    if let Some(c) = non_rwa.solve(base) {
        if !classify(&base.with_cooperativity(c)?).rwa {
            return Ok(non_rwa);
        }
    }
    if let Some(c) = rwa.solve(base) {
        if classify(&base.with_cooperativity(c)?).rwa {
            return Ok(rwa);
        }
    }
    Ok(non_rwa)
}

/// Position-squeezing threshold in `C` (the cooperativity in `base` is ignored).
pub fn position_threshold(base: &DimensionlessParams, full_model: bool) -> Result<ThresholdResult, CriteriaError> {
    let formula = auto_formula(base, Formula::PositionNonRwa, Formula::PositionRwa)?;
    threshold_for(base, formula, full_model)
}

/// Momentum-squeezing threshold in `C` (the cooperativity in `base` is ignored).
pub fn momentum_threshold(base: &DimensionlessParams, full_model: bool) -> Result<ThresholdResult, CriteriaError> {
    let formula = auto_formula(base, Formula::MomentumNonRwa, Formula::MomentumRwa)?;
    threshold_for(base, formula, full_model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// `sqrt(2) n_cav g0 / (sqrt(n_tot) Omega0)`.
    pub margin: f64,
}

/// Whether the radiation-pressure force can outweigh the mechanical spring
/// force, which is needed to shift the resonance all the way down.
pub fn actuation_feasible(osc: &OscillatorParams, g0: f64, n_cav: f64, n_tot: f64) -> Feasibility {
    let margin = std::f64::consts::SQRT_2 * n_cav * g0 / (n_tot.sqrt() * osc.omega0());
    Feasibility { feasible: margin > 1.0, margin }
}

/// Photon number at which the actuation margin reaches one, with `n_tot`
/// following the photon number through the backaction.
pub fn null_spring_photons(mapping: &PhotonMapping) -> f64 {
    let n_th = mapping.n_th();
    let solve = |n: f64| {
        let n_tot = n_th + mapping.cooperativity(n) + 0.5;
        n_tot.sqrt() * mapping.osc.omega0() / (std::f64::consts::SQRT_2 * mapping.g0)
    };
    let mut n = solve(0.0);
    for _ in 0..200 {
        let next = solve(n);
        if (next - n).abs() <= 1e-12 * next {
            return next;
        }
        n = next;
    }
    n
}

/// Row of a threshold table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub target: Target,
    pub regime: &'static str,
    pub n_th: f64,
    pub r: f64,
    pub eta: f64,
    pub c_closed: Option<f64>,
    pub c_full: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn threshold_row(base: &DimensionlessParams, result: &ThresholdResult) -> Result<ThresholdRow, CriteriaError> {
    let regime = match result.c_closed_form.or(result.c_full_model) {
        Some(c) => classify(&base.with_cooperativity(c)?).label(),
        None => "none",
    };
    Ok(ThresholdRow {
        target: result.target,
        regime,
        n_th: base.n_th(),
        r: base.ratio(),
        eta: base.eta(),
        c_closed: result.c_closed_form,
        c_full: result.c_full_model,
        ratio: result.ratio(),
    })
}
