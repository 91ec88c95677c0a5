//! Degradation of the position estimate by a second, stiffer mechanical mode.
//!
//! The second mode's transduced motion is treated as extra white measurement
//! noise. Evaluating its spectrum at zero frequency and at the frequency where
//! it meets the fundamental's spectrum brackets the conditional variance.

use serde::Serialize;
use thiserror::Error;

use crate::conditional::{covariance_closed, ConditionalError};
use crate::params::{DimensionlessParams, OscillatorParams, ParamError, PhotonMapping};
use crate::spectra::{self, Susceptibility};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultimodeError {
    #[error("spectra of the two modes do not cross between the resonances")]
    NoCrossing,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Conditional(#[from] ConditionalError),
}

/// Second mechanical mode relative to the fundamental.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMode {
    /// `Omega2 / Omega0`, greater than one.
    frequency_ratio: f64,
    q2: f64,
    /// `m2 / m`.
    mass_ratio: f64,
    /// `G2 / G`, the relative transduction of the second mode.
    g_ratio: f64,
}

impl SecondMode {
    pub fn new(frequency_ratio: f64, q2: f64, mass_ratio: f64, g_ratio: f64) -> Result<Self, ParamError> {
        let check = |field: &'static str, v: f64, ok: bool| {
            if v.is_finite() && ok {
                Ok(v)
            } else {
                Err(ParamError::Invalid { field, reason: format!("out of range: {v}") })
            }
        };
        Ok(Self {
            frequency_ratio: check("omega2", frequency_ratio, frequency_ratio > 1.0)?,
            q2: check("q2", q2, q2 >= 1.0)?,
            mass_ratio: check("mass2", mass_ratio, mass_ratio > 0.0)?,
            g_ratio: check("g_ratio", g_ratio, g_ratio >= 0.0)?,
        })
    }

    /// From SI quantities of both modes.
    pub fn from_physical(
        osc: &OscillatorParams,
        omega2: f64,
        q2: f64,
        mass2: f64,
        g_ratio: f64,
    ) -> Result<Self, ParamError> {
        Self::new(omega2 / osc.omega0(), q2, mass2 / osc.mass(), g_ratio)
    }

    pub fn frequency_ratio(&self) -> f64 {
        self.frequency_ratio
    }
    pub fn q2(&self) -> f64 {
        self.q2
    }
    pub fn mass_ratio(&self) -> f64 {
        self.mass_ratio
    }
    pub fn g_ratio(&self) -> f64 {
        self.g_ratio
    }

    pub fn with_g_ratio(&self, g_ratio: f64) -> Result<Self, ParamError> {
        Self::new(self.frequency_ratio, self.q2, self.mass_ratio, g_ratio)
    }

    pub fn gamma(&self) -> f64 {
        self.frequency_ratio / self.q2
    }

    /// Backaction cooperativity of the second mode.
    ///
    /// The measurement rate scales with the transduction squared and with
    /// `x_zp2^2 / Gamma2 = 1 / (m2 Omega2 Gamma2)` relative to the fundamental.
    pub fn cooperativity(&self, p: &DimensionlessParams) -> f64 {
        p.cooperativity() * self.g_ratio * self.g_ratio * p.gamma()
            / (self.mass_ratio * self.frequency_ratio * self.gamma())
    }

    /// Thermal occupancy at the second mode's frequency (high-temperature limit).
    pub fn n_th(&self, p: &DimensionlessParams) -> f64 {
        p.n_th() / self.frequency_ratio
    }

    pub fn n_tot(&self, p: &DimensionlessParams) -> f64 {
        self.n_th(p) + self.cooperativity(p) + 0.5
    }

    /// White force PSD acting on the second mode, `2 hbar m2 Omega2 Gamma2 n_tot2`.
    pub fn force_level(&self, p: &DimensionlessParams) -> f64 {
        4.0 * self.mass_ratio * self.frequency_ratio * self.gamma() * self.n_tot(p)
    }

    pub fn susceptibility(&self, _p: &DimensionlessParams) -> Susceptibility {
        Susceptibility { mass: self.mass_ratio, omega_r: self.frequency_ratio, gamma: self.gamma() }
    }

    /// Transduced displacement PSD of the second mode.
    pub fn psd(&self, p: &DimensionlessParams, omega: f64) -> f64 {
        self.g_ratio * self.g_ratio * self.force_level(p) * self.susceptibility(p).norm_sqr(omega)
    }
}

fn fundamental_open_loop(p: &DimensionlessParams, omega: f64) -> f64 {
    let chi = Susceptibility { mass: 1.0, omega_r: 1.0, gamma: p.gamma() };
    4.0 * p.n_tot() * p.gamma() * chi.norm_sqr(omega)
}

/// Frequency between the two resonances where the second mode's spectrum
/// overtakes the fundamental's.
///
/// The fundamental is taken without feedback so that the crossing, and the
/// bounds derived from it, depend on the measurement alone.
pub fn crossing_frequency(p: &DimensionlessParams, m2: &SecondMode) -> Result<f64, MultimodeError> {
    if m2.g_ratio == 0.0 {
        return Err(MultimodeError::NoCrossing);
    }
    let f = |w: f64| fundamental_open_loop(p, w).ln() - m2.psd(p, w).ln();
    let (mut lo, mut hi) = (1.0 + p.gamma(), m2.frequency_ratio - m2.gamma());
    if !(lo < hi) {
        return Err(MultimodeError::NoCrossing);
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(MultimodeError::NoCrossing);
    }
    while (hi - lo) > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoncausalError {
    pub omega: Vec<f64>,
    /// `S_xx / (1 + SNR)`.
    pub exact: Vec<f64>,
    /// `min(S_xx, S_nn)`.
    pub approx: Vec<f64>,
    /// Largest pointwise `approx / exact`, which never exceeds 2.
    pub max_ratio: f64,
}

/// Error spectrum of the non-causal Wiener estimate, with and without the
/// signal-or-noise approximation.
pub fn error_spectrum_noncausal(p: &DimensionlessParams, m2: Option<&SecondMode>, omegas: &[f64]) -> NoncausalError {
    let model = spectra::NoiseModel::new(p);
    let mut exact = Vec::with_capacity(omegas.len());
    let mut approx = Vec::with_capacity(omegas.len());
    let mut max_ratio: f64 = 0.0;
    for &w in omegas {
        let signal = model.displacement(w);
        let noise = model.imprecision + m2.map_or(0.0, |m| m.psd(p, w));
        let e = signal * noise / (signal + noise);
        let a = signal.min(noise);
        max_ratio = max_ratio.max(a / e);
        exact.push(e);
        approx.push(a);
    }
    NoncausalError { omega: omegas.to_vec(), exact, approx, max_ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundRegime {
    /// The second mode stays below the imprecision noise where it meets the
    /// fundamental; both bounds use its zero-frequency level.
    ImprecisionDominated,
    SignalCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceBounds {
    pub lower: f64,
    pub upper: f64,
    pub omega12: Option<f64>,
    pub regime: BoundRegime,
}

/// Efficiency after folding a white displacement noise into the imprecision.
pub fn effective_efficiency(p: &DimensionlessParams, added: f64) -> f64 {
    let imprecision = 1.0 / (4.0 * p.eta() * p.cooperativity() * p.gamma());
    p.eta() / (1.0 + added / imprecision)
}

/// Bounds on the conditional position variance.
pub fn variance_bounds(p: &DimensionlessParams, m2: &SecondMode) -> Result<VarianceBounds, MultimodeError> {
    let imprecision = 1.0 / (4.0 * p.eta() * p.cooperativity() * p.gamma());
    let at_dc = m2.psd(p, 0.0);
    let vxx = |added: f64| -> Result<f64, MultimodeError> {
        let eff = p.with_eta(effective_efficiency(p, added))?;
        Ok(covariance_closed(&eff)?.vxx)
    };
    let crossing = match crossing_frequency(p, m2) {
        Ok(w) => Some(w),
        Err(MultimodeError::NoCrossing) => None,
        Err(e) => return Err(e),
    };
    let lower = vxx(at_dc)?;
    // The upper bound always folds in the level at the crossing. Forcing it
    // onto the lower bound below the imprecision would put a jump into the
    // curve against photon number where the regime flag flips.
    match crossing {
        Some(w) => {
            let level = m2.psd(p, w).max(at_dc);
            let regime =
                if level >= imprecision { BoundRegime::SignalCrossing } else { BoundRegime::ImprecisionDominated };
            Ok(VarianceBounds { lower, upper: vxx(level)?, omega12: Some(w), regime })
        }
        None => Ok(VarianceBounds { lower, upper: lower, omega12: None, regime: BoundRegime::ImprecisionDominated }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum {
    pub n_cav: f64,
    pub variance: f64,
    /// The minimum sits at the edge of the search range.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalMeasurement {
    pub lower: Optimum,
    pub upper: Optimum,
}

/// Photon-number search range (log10).
pub const PHOTON_RANGE: (f64, f64) = (5.0, 12.0);

pub(crate) fn golden_section_min<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64), E> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Photon number minimizing each bound at feedback ratio `ratio`.
pub fn optimal_measurement(
    mapping: &PhotonMapping,
    ratio: f64,
    m2: &SecondMode,
) -> Result<OptimalMeasurement, MultimodeError> {
    let (lo, hi) = PHOTON_RANGE;
    let tol = 1e-4;
    let bound = |upper: bool| {
        move |log_n: f64| -> Result<f64, MultimodeError> {
            let p = mapping.params(10f64.powf(log_n), ratio)?;
            let b = variance_bounds(&p, m2)?;
            Ok(if upper { b.upper } else { b.lower })
        }
    };
    let optimum = |upper: bool| -> Result<Optimum, MultimodeError> {
        let (x, v) = golden_section_min(bound(upper), lo, hi, tol)?;
        Ok(Optimum { n_cav: 10f64.powf(x), variance: v, at_boundary: x - lo < 10.0 * tol || hi - x < 10.0 * tol })
    };
    Ok(OptimalMeasurement { lower: optimum(false)?, upper: optimum(true)? })
}

/// Largest feedback ratio in `[1e-3, 1]` for which the upper bound at its
/// optimal photon number drops below the zero-point level. `None` when even
/// `R = 1e-3` does not squeeze.
pub fn min_feedback_for_squeezing(mapping: &PhotonMapping, m2: &SecondMode) -> Result<Option<f64>, MultimodeError> {
    let best = |log_r: f64| -> Result<f64, MultimodeError> {
        Ok(optimal_measurement(mapping, 10f64.powf(log_r), m2)?.upper.variance)
    };
    let (mut lo, mut hi) = (-3.0, 0.0);
    if best(lo)? >= 1.0 {
        return Ok(None);
    }
    if best(hi)? < 1.0 {
        return Ok(Some(1.0));
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if best(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(10f64.powf(0.5 * (lo + hi))))
}

/// One row of the photon-number sweep with the second mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsRow {
    pub n_cav: f64,
    pub r: f64,
    pub v_lower: f64,
    pub v_upper: f64,
    pub v_single_mode: f64,
}

pub fn bounds_row(
    mapping: &PhotonMapping,
    n_cav: f64,
    ratio: f64,
    m2: &SecondMode,
) -> Result<BoundsRow, MultimodeError> {
    let p = mapping.params(n_cav, ratio)?;
    let b = variance_bounds(&p, m2)?;
    Ok(BoundsRow { n_cav, r: ratio, v_lower: b.lower, v_upper: b.upper, v_single_mode: covariance_closed(&p)?.vxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::log_grid;

    fn params(eta: f64, c: f64, n: f64, q: f64, r: f64) -> DimensionlessParams {
        DimensionlessParams::new(eta, c, n, q, r).unwrap()
    }

    fn membrane_mode() -> SecondMode {
        SecondMode::new(2.0, 1e6, 1.0, 1.0).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert!(SecondMode::new(1.0, 1e6, 1.0, 1.0).is_err());
        assert!(SecondMode::new(2.0, 0.5, 1.0, 1.0).is_err());
        assert!(SecondMode::new(2.0, 1e6, -1.0, 1.0).is_err());
        assert!(SecondMode::new(2.0, 1e6, 1.0, 0.0).is_ok());
    }

    #[test]
    fn second_mode_scalings() {
        let p = params(0.63, 100.0, 1e4, 1e6, 1.0);
        let m2 = membrane_mode();
        assert!((m2.cooperativity(&p) - 25.0).abs() < 1e-12);
        assert_eq!(m2.n_th(&p), 5e3);
        // hand-built spectrum
        let w: f64 = 0.7;
        let g2 = 2.0 / 1e6;
        let n2 = 5e3 + 25.0 + 0.5;
        let hand = 4.0 * n2 * 2.0 * g2 / ((4.0 - w * w).powi(2) + g2 * g2 * w * w);
        assert!((m2.psd(&p, w) / hand - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_crossing_without_coupling() {
        let p = params(0.63, 100.0, 1e4, 1e6, 1.0);
        let m2 = membrane_mode().with_g_ratio(0.0).unwrap();
        assert_eq!(crossing_frequency(&p, &m2), Err(MultimodeError::NoCrossing));
    }

    #[test]
    fn weak_coupling_pushes_crossing_to_second_resonance() {
        let p = params(0.63, 100.0, 1e4, 1e6, 1.0);
        let strong = crossing_frequency(&p, &membrane_mode()).unwrap();
        let weak = crossing_frequency(&p, &membrane_mode().with_g_ratio(1e-3).unwrap()).unwrap();
        assert!(strong > 1.0 && strong < 2.0);
        assert!(weak > strong);
        assert!((2.0 - weak) < 0.01, "{weak}");
        let s1 = fundamental_open_loop(&p, strong);
        assert!((s1 / membrane_mode().psd(&p, strong) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn noncausal_error_limits() {
        let p = params(1.0, 1e3, 10.0, 1e3, 1.0);
        let grid = log_grid(1e-3, 1e3, 400);
        let e = error_spectrum_noncausal(&p, Some(&membrane_mode()), &grid);
        assert!(e.max_ratio <= 2.0 + 1e-12);
        let model = spectra::NoiseModel::new(&p);
        for (i, &w) in grid.iter().enumerate() {
            let signal = model.displacement(w);
            let noise = model.imprecision + membrane_mode().psd(&p, w);
            let snr = signal / noise;
            if snr > 1e4 {
                assert!((e.exact[i] / noise - 1.0).abs() < 1e-3);
            }
            if snr < 1e-4 {
                assert!((e.exact[i] / signal - 1.0).abs() < 1e-3);
            }
        }
        // SNR = 1 exactly halves the signal
        let w = 1.0;
        let added = model.displacement(w) - model.imprecision;
        let flat = |_: f64| added;
        let e = model.displacement(w) * (model.imprecision + flat(w))
            / (model.displacement(w) + model.imprecision + flat(w));
        assert!((e / (0.5 * model.displacement(w)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncoupled_mode_reproduces_single_mode_variance() {
        let p = params(0.63, 3e3, 7.8e6, 1e6, 0.1);
        let m2 = membrane_mode().with_g_ratio(0.0).unwrap();
        let b = variance_bounds(&p, &m2).unwrap();
        let single = covariance_closed(&p).unwrap().vxx;
        assert_eq!(b.lower, b.upper);
        assert!((b.lower / single - 1.0).abs() < 1e-9);
        assert_eq!(b.regime, BoundRegime::ImprecisionDominated);
    }

    #[test]
    fn bounds_are_ordered() {
        for c in [1e1, 1e2, 1e3, 1e4, 1e5, 1e6] {
            let p = params(0.63, c, 7.8e6, 1e6, 0.05);
            let b = variance_bounds(&p, &membrane_mode()).unwrap();
            assert!(b.lower <= b.upper, "C = {c}");
            if b.regime == BoundRegime::ImprecisionDominated {
                // the spread is capped by the relative size of the add-on
                let imprecision = 1.0 / (4.0 * p.eta() * p.cooperativity() * p.gamma());
                let added = membrane_mode().psd(&p, b.omega12.unwrap()) / imprecision;
                assert!(b.upper / b.lower - 1.0 <= added, "C = {c}");
            }
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_section_min(|x: f64| Ok::<_, ()>((x - 0.3).powi(2) + 2.0), -1.0, 2.0, 1e-8).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }
}
