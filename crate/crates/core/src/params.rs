//! Physical and dimensionless parameter models.
//!
//! Everything downstream of [`DimensionlessParams`] works in scaled units:
//! natural frequency `1`, mass `1`, damping `1/Q`, and a zero-point position
//! spread of `1` at the natural frequency (`hbar = 2`).

use qd::Quad;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::dd::{dd, to_f64};

/// Reduced Planck constant, CODATA 2018 (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, CODATA 2018 (J/K).
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("unstable feedback: gain {gain} must exceed -omega0^2 = {limit}")]
    UnstableFeedback { gain: f64, limit: f64 },
    #[error("inconsistent optomechanical coupling: g0 = {given} but G * x_zp = {derived}")]
    InconsistentCoupling { given: f64, derived: f64 },
}

fn positive(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Invalid { field, reason: format!("must be finite and > 0, got {value}") })
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::Invalid { field, reason: format!("must be finite and >= 0, got {value}") })
    }
}

/// Physical description of the mechanical mode (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    mass: f64,
    omega0: f64,
    gamma: f64,
    temperature: f64,
}

impl OscillatorParams {
    pub fn new(mass: f64, omega0: f64, gamma: f64, temperature: f64) -> Result<Self, ParamError> {
        let osc = Self {
            mass: positive("mass", mass)?,
            omega0: positive("omega0", omega0)?,
            gamma: positive("gamma", gamma)?,
            temperature: positive("temperature", temperature)?,
        };
        if osc.quality_factor() < 1.0 {
            return Err(ParamError::Invalid {
                field: "gamma",
                reason: format!("overdamped: Q = {} < 1", osc.quality_factor()),
            });
        }
        Ok(osc)
    }

    pub fn from_quality_factor(mass: f64, omega0: f64, q: f64, temperature: f64) -> Result<Self, ParamError> {
        let q = positive("q", q)?;
        Self::new(mass, omega0, positive("omega0", omega0)? / q, temperature)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
    pub fn quality_factor(&self) -> f64 {
        self.omega0 / self.gamma
    }

    /// Zero-point position spread `sqrt(hbar / (2 m omega))`.
    pub fn x_zp(&self, omega: f64) -> f64 {
        (HBAR / (2.0 * self.mass * omega)).sqrt()
    }

    /// Zero-point momentum spread `sqrt(hbar m omega / 2)`.
    pub fn p_zp(&self, omega: f64) -> f64 {
        (HBAR * self.mass * omega / 2.0).sqrt()
    }

    /// High-temperature occupancy `k_B T / (hbar omega)`.
    pub fn thermal_occupancy(&self, omega: f64) -> f64 {
        K_B * self.temperature / (HBAR * omega)
    }

    pub fn unit_scale(&self) -> UnitScale {
        UnitScale { omega0: self.omega0, mass: self.mass, x_zp: self.x_zp(self.omega0) }
    }
}

/// Physical optomechanical drive from which the cooperativity follows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptomechanicalDrive {
    /// Single-photon coupling rate (rad/s); derived from `pull` when absent.
    pub g0: Option<f64>,
    /// Frequency pull per displacement `G` (rad/s per m).
    pub pull: Option<f64>,
    /// Cavity energy decay rate (rad/s).
    pub kappa: f64,
    /// Mean intracavity photon number.
    pub n_cav: f64,
}

impl OptomechanicalDrive {
    /// Single-photon coupling, cross-checked against `G x_zp` when both exist.
    pub fn single_photon_coupling(&self, osc: &OscillatorParams) -> Result<f64, ParamError> {
        let derived = self.pull.map(|g| positive("pull", g).map(|g| g * osc.x_zp(osc.omega0)));
        match (self.g0, derived) {
            (Some(g0), Some(d)) => {
                let g0 = positive("g0", g0)?;
                let d = d?;
                if ((g0 - d) / d).abs() > 1e-12 {
                    return Err(ParamError::InconsistentCoupling { given: g0, derived: d });
                }
                Ok(g0)
            }
            (Some(g0), None) => positive("g0", g0),
            (None, Some(d)) => d,
            (None, None) => Err(ParamError::Invalid { field: "g0", reason: "either g0 or pull is required".into() }),
        }
    }

    /// `C = 4 g0^2 n_cav / (kappa Gamma)`.
    pub fn cooperativity(&self, osc: &OscillatorParams) -> Result<f64, ParamError> {
        let g0 = self.single_photon_coupling(osc)?;
        let kappa = positive("kappa", self.kappa)?;
        let n_cav = positive("n_cav", self.n_cav)?;
        Ok(4.0 * g0 * g0 * n_cav / (kappa * osc.gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeasurementStrength {
    Cooperativity(f64),
    Drive(OptomechanicalDrive),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementParams {
    pub eta: f64,
    pub strength: MeasurementStrength,
}

impl MeasurementParams {
    pub fn cooperativity(&self, osc: &OscillatorParams) -> Result<f64, ParamError> {
        match self.strength {
            MeasurementStrength::Cooperativity(c) => positive("cooperativity", c),
            MeasurementStrength::Drive(ref d) => d.cooperativity(osc),
        }
    }
}

/// Real-gain feedback, given either as a frequency ratio or as a spring gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeedbackSetting {
    /// `R = Omega / Omega0`.
    Ratio(f64),
    /// `K` in (rad/s)^2, so that `Omega^2 = Omega0^2 + K`.
    Gain(f64),
}

impl FeedbackSetting {
    pub fn ratio(&self, omega0: f64) -> Result<f64, ParamError> {
        match *self {
            FeedbackSetting::Ratio(r) => positive("ratio", r),
            FeedbackSetting::Gain(k) => Ok(shifted_frequency(omega0, k)? / omega0),
        }
    }
}

/// `sqrt(omega0^2 + K)`.
pub fn shifted_frequency(omega0: f64, gain: f64) -> Result<f64, ParamError> {
    let omega0 = positive("omega0", omega0)?;
    if !gain.is_finite() {
        return Err(ParamError::Invalid { field: "gain", reason: format!("must be finite, got {gain}") });
    }
    let limit = -omega0 * omega0;
    if gain <= limit {
        return Err(ParamError::UnstableFeedback { gain, limit });
    }
    Ok((omega0 * omega0 + gain).sqrt())
}

/// Frequency at which the thermal occupancy is evaluated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NthConvention {
    #[default]
    Unshifted,
    /// Use the feedback-shifted frequency (`nth-at-shifted`).
    AtShifted,
}

/// The governing numbers `{eta, C, n_th, Q, R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    eta: f64,
    c: f64,
    n_th: f64,
    q: f64,
    r: f64,
}

/// Derived frequencies in double-double precision (scaled units).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frequencies {
    pub gamma: Quad,
    pub eta_c: Quad,
    pub n_tot: Quad,
    pub omega_meas4: Quad,
    /// `Omega'^2`
    pub prime_sq: Quad,
    /// `Omega'^2 - 1`, computed without cancellation.
    pub prime_sq_minus_one: Quad,
    pub gamma_prime: Quad,
    pub r: Quad,
    /// `Omega^2 = R^2`
    pub shifted_sq: Quad,
    /// `K = R^2 - 1`
    pub gain: Quad,
}

impl DimensionlessParams {
    pub fn new(eta: f64, c: f64, n_th: f64, q: f64, r: f64) -> Result<Self, ParamError> {
        let eta = positive("eta", eta)?;
        if eta > 1.0 {
            return Err(ParamError::Invalid { field: "eta", reason: format!("must be <= 1, got {eta}") });
        }
        let q = positive("q", q)?;
        if q < 1.0 {
            return Err(ParamError::Invalid { field: "q", reason: format!("overdamped: Q = {q} < 1") });
        }
        Ok(Self {
            eta,
            c: positive("cooperativity", c)?,
            n_th: non_negative("n_th", n_th)?,
            q,
            r: positive("ratio", r)?,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn cooperativity(&self) -> f64 {
        self.c
    }
    pub fn n_th(&self) -> f64 {
        self.n_th
    }
    pub fn quality_factor(&self) -> f64 {
        self.q
    }
    pub fn ratio(&self) -> f64 {
        self.r
    }

    pub fn with_cooperativity(&self, c: f64) -> Result<Self, ParamError> {
        Self::new(self.eta, c, self.n_th, self.q, self.r)
    }
    pub fn with_ratio(&self, r: f64) -> Result<Self, ParamError> {
        Self::new(self.eta, self.c, self.n_th, self.q, r)
    }
    pub fn with_eta(&self, eta: f64) -> Result<Self, ParamError> {
        Self::new(eta, self.c, self.n_th, self.q, self.r)
    }
    pub fn with_n_th(&self, n_th: f64) -> Result<Self, ParamError> {
        Self::new(self.eta, self.c, n_th, self.q, self.r)
    }

    /// `n_th + C + 1/2`.
    pub fn n_tot(&self) -> f64 {
        self.n_th + self.c + 0.5
    }

    /// Damping rate in units of the natural frequency.
    pub fn gamma(&self) -> f64 {
        1.0 / self.q
    }

    /// Feedback spring gain `K = R^2 - 1` in scaled units.
    pub fn gain(&self) -> f64 {
        self.r * self.r - 1.0
    }

    pub fn omega_meas(&self) -> f64 {
        characteristic_measurement_rate(self.eta * self.c, self.n_tot(), self.gamma(), 1.0)
    }

    pub fn omega_prime(&self) -> f64 {
        to_f64(self.frequencies().prime_sq.sqrt())
    }

    pub fn gamma_prime(&self) -> f64 {
        to_f64(self.frequencies().gamma_prime)
    }

    /// Purity `sqrt(eta C / n_tot)` implied by the closed-form identity.
    pub fn purity_bound(&self) -> f64 {
        (self.eta * self.c / self.n_tot()).sqrt()
    }

    pub(crate) fn frequencies(&self) -> Frequencies {
        let gamma = Quad::ONE / dd(self.q);
        let eta_c = dd(self.eta) * dd(self.c);
        let n_tot = dd(self.n_th) + dd(self.c) + dd(0.5);
        let omega_meas4 = dd(16.0) * eta_c * n_tot * gamma * gamma;
        let prime_sq = (Quad::ONE + omega_meas4).sqrt();
        let prime_sq_minus_one = omega_meas4 / (prime_sq + Quad::ONE);
        let gamma_prime = (gamma * gamma + dd(2.0) * prime_sq_minus_one).sqrt();
        let r = dd(self.r);
        let shifted_sq = r * r;
        Frequencies {
            gamma,
            eta_c,
            n_tot,
            omega_meas4,
            prime_sq,
            prime_sq_minus_one,
            gamma_prime,
            r,
            shifted_sq,
            gain: shifted_sq - Quad::ONE,
        }
    }
}

/// `2 (eta C n_tot)^{1/4} sqrt(Gamma Omega0)`.
pub fn characteristic_measurement_rate(eta_c: f64, n_tot: f64, gamma: f64, omega0: f64) -> f64 {
    2.0 * (eta_c * n_tot).powf(0.25) * (gamma * omega0).sqrt()
}

/// Maps physical inputs onto the governing numbers.
pub fn derive_dimensionless(
    osc: &OscillatorParams,
    meas: &MeasurementParams,
    fb: &FeedbackSetting,
    convention: NthConvention,
) -> Result<DimensionlessParams, ParamError> {
    let r = fb.ratio(osc.omega0)?;
    let c = meas.cooperativity(osc)?;
    let n_th = match convention {
        NthConvention::Unshifted => osc.thermal_occupancy(osc.omega0),
        NthConvention::AtShifted => osc.thermal_occupancy(r * osc.omega0),
    };
    DimensionlessParams::new(meas.eta, c, n_th, osc.quality_factor(), r)
}

/// Fixed optomechanical setup in which only the photon number varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonMapping {
    pub osc: OscillatorParams,
    pub eta: f64,
    /// Single-photon coupling (rad/s).
    pub g0: f64,
    /// Cavity decay rate (rad/s).
    pub kappa: f64,
}

impl PhotonMapping {
    pub fn cooperativity(&self, n_cav: f64) -> f64 {
        4.0 * self.g0 * self.g0 * n_cav / (self.kappa * self.osc.gamma)
    }

    pub fn photons(&self, cooperativity: f64) -> f64 {
        cooperativity * self.kappa * self.osc.gamma / (4.0 * self.g0 * self.g0)
    }

    pub fn n_th(&self) -> f64 {
        self.osc.thermal_occupancy(self.osc.omega0)
    }

    pub fn params(&self, n_cav: f64, ratio: f64) -> Result<DimensionlessParams, ParamError> {
        DimensionlessParams::new(self.eta, self.cooperativity(n_cav), self.n_th(), self.osc.quality_factor(), ratio)
    }

    /// Cavity decay rate that maps `cooperativity` onto `n_cav` photons.
    pub fn kappa_for(osc: &OscillatorParams, g0: f64, n_cav: f64, cooperativity: f64) -> f64 {
        4.0 * g0 * g0 * n_cav / (cooperativity * osc.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    /// Bandwidth in units of the natural frequency.
    pub value: f64,
    /// Set when `Q < 100`, where the resolved-thermal-noise picture is marginal.
    pub low_q: bool,
}

/// Frequency band over which intrinsic thermal noise is resolved.
///
/// `Omega_meas^2 / Omega0` below the natural frequency, `Omega_meas` at and above it.
pub fn measurement_bandwidth(p: &DimensionlessParams) -> Bandwidth {
    let wm = p.omega_meas();
    let value = if wm < 1.0 { wm * wm } else { wm };
    Bandwidth { value, low_q: p.quality_factor() < 100.0 }
}

/// Conversion from scaled units to SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub omega0: f64,
    pub mass: f64,
    /// Zero-point position spread at the natural frequency.
    pub x_zp: f64,
}

impl UnitScale {
    /// Identity mapping: results stay in scaled units.
    pub const SCALED: UnitScale = UnitScale { omega0: 1.0, mass: 1.0, x_zp: 1.0 };

    pub fn frequency(&self, omega: f64) -> f64 {
        omega * self.omega0
    }
    /// Displacement PSD (m^2 s).
    pub fn displacement_psd(&self, s: f64) -> f64 {
        s * self.x_zp * self.x_zp / self.omega0
    }
    /// Force PSD (N^2 s).
    pub fn force_psd(&self, s: f64) -> f64 {
        let f = self.mass * self.omega0 * self.omega0 * self.x_zp;
        s * f * f / self.omega0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn membrane() -> OscillatorParams {
        OscillatorParams::from_quality_factor(7e-12, 2.0 * std::f64::consts::PI * 0.8e6, 1e6, 300.0).unwrap()
    }

    #[test]
    fn omega_meas_unit_case() {
        assert_eq!(characteristic_measurement_rate(1.0, 1.0, 1.0, 1.0), 2.0);
    }

    #[test]
    fn zero_gain_is_unit_ratio() {
        assert_eq!(FeedbackSetting::Gain(0.0).ratio(3.0).unwrap(), 1.0);
        let p = derive_dimensionless(
            &membrane(),
            &MeasurementParams { eta: 1.0, strength: MeasurementStrength::Cooperativity(1.0) },
            &FeedbackSetting::Gain(0.0),
            NthConvention::Unshifted,
        )
        .unwrap();
        assert_eq!(p.ratio(), 1.0);
    }

    #[test]
    fn membrane_thermal_occupancy() {
        // k_B * 300 / (hbar * 2 pi * 0.8e6), evaluated by hand
        let expected = 1.380649e-23 * 300.0 / (1.054571817e-34 * 2.0 * std::f64::consts::PI * 0.8e6);
        let n = membrane().thermal_occupancy(membrane().omega0());
        assert!((n / expected - 1.0).abs() < 1e-14);
        assert!((n / 7.813_732e6 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shifted_frequency_examples() {
        assert_eq!(shifted_frequency(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(shifted_frequency(1.0, 3.0).unwrap(), 2.0);
        assert!((shifted_frequency(1.0, -0.99).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(shifted_frequency(1.0, -1.0), Err(ParamError::UnstableFeedback { .. })));
        assert!(matches!(FeedbackSetting::Gain(-2.0).ratio(1.0), Err(ParamError::UnstableFeedback { .. })));
    }

    #[test]
    fn bandwidth_branches() {
        // eta C n_tot = (w/2)^4 Q^2 with Gamma = 1/Q picks the requested Omega_meas.
        let q = 1e4;
        let pick = |w: f64| {
            let x = (w / 2.0).powi(4) * q * q;
            let c = (-0.5 + (0.25 + 4.0 * x).sqrt()) / 2.0;
            DimensionlessParams::new(1.0, c, 0.0, q, 1.0).unwrap()
        };
        for (w, expect) in [(1.0, 1.0), (0.1, 0.01), (10.0, 10.0)] {
            let p = pick(w);
            assert!((p.omega_meas() - w).abs() < 1e-9 * w);
            let b = measurement_bandwidth(&p);
            assert!((b.value - expect).abs() < 1e-8 * expect, "{w}: {}", b.value);
            assert!(!b.low_q);
        }
        assert!(measurement_bandwidth(&DimensionlessParams::new(1.0, 1.0, 1.0, 50.0, 1.0).unwrap()).low_q);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(DimensionlessParams::new(0.0, 1.0, 1.0, 10.0, 1.0).is_err());
        assert!(DimensionlessParams::new(1.1, 1.0, 1.0, 10.0, 1.0).is_err());
        assert!(DimensionlessParams::new(1.0, -1.0, 1.0, 10.0, 1.0).is_err());
        assert!(DimensionlessParams::new(1.0, 1.0, f64::NAN, 10.0, 1.0).is_err());
        assert!(DimensionlessParams::new(1.0, 1.0, 1.0, 0.5, 1.0).is_err());
        assert!(OscillatorParams::new(1.0, 1.0, 2.0, 1.0).is_err());
        let err = OscillatorParams::new(-1.0, 1.0, 0.1, 1.0).unwrap_err();
        assert!(err.to_string().contains("`mass`"));
    }

    #[test]
    fn coupling_consistency_check() {
        let osc = membrane();
        let pull = 2.0 * std::f64::consts::PI * 14e6 / 1e-9;
        let g0 = pull * osc.x_zp(osc.omega0());
        let ok = OptomechanicalDrive { g0: Some(g0), pull: Some(pull), kappa: 1e7, n_cav: 1e8 };
        assert!(ok.cooperativity(&osc).is_ok());
        let bad = OptomechanicalDrive { g0: Some(g0 * (1.0 + 1e-9)), ..ok };
        assert!(matches!(bad.cooperativity(&osc), Err(ParamError::InconsistentCoupling { .. })));
        let c = OptomechanicalDrive { g0: None, ..ok }.cooperativity(&osc).unwrap();
        assert!((c - 4.0 * g0 * g0 * 1e8 / (1e7 * osc.gamma())).abs() < 1e-12 * c);
    }

    #[test]
    fn nth_convention_switch() {
        let osc = membrane();
        let meas = MeasurementParams { eta: 1.0, strength: MeasurementStrength::Cooperativity(1.0) };
        let a = derive_dimensionless(&osc, &meas, &FeedbackSetting::Ratio(0.1), NthConvention::Unshifted).unwrap();
        let b = derive_dimensionless(&osc, &meas, &FeedbackSetting::Ratio(0.1), NthConvention::AtShifted).unwrap();
        assert!((b.n_th() / a.n_th() - 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_invariance(lambda in 1e-3f64..1e3, r in 0.05f64..20.0, c in 1e-1f64..1e5) {
            let base = OscillatorParams::from_quality_factor(1e-11, 5e6, 1e5, 10.0).unwrap();
            let gain = (r * r - 1.0) * base.omega0() * base.omega0();
            let meas = MeasurementParams { eta: 0.7, strength: MeasurementStrength::Cooperativity(c) };
            let a = derive_dimensionless(&base, &meas, &FeedbackSetting::Gain(gain), NthConvention::Unshifted).unwrap();
            let scaled = OscillatorParams::new(
                base.mass(), base.omega0() * lambda, base.gamma() * lambda, base.temperature() * lambda,
            ).unwrap();
            let b = derive_dimensionless(
                &scaled, &meas, &FeedbackSetting::Gain(gain * lambda * lambda), NthConvention::Unshifted,
            ).unwrap();
            for (x, y) in [(a.eta(), b.eta()), (a.cooperativity(), b.cooperativity()), (a.n_th(), b.n_th()),
                           (a.quality_factor(), b.quality_factor()), (a.ratio(), b.ratio())] {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs());
            }
        }

        #[test]
        fn omega_meas_identity(eta in 0.01f64..1.0, c in 1e-2f64..1e6, n in 0.0f64..1e7, q in 1.0f64..1e8) {
            let p = DimensionlessParams::new(eta, c, n, q, 1.0).unwrap();
            let lhs = p.omega_meas().powi(4);
            let rhs = 16.0 * eta * c * p.n_tot() * p.gamma() * p.gamma();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs);
            prop_assert!(p.gamma_prime() >= p.gamma());
            let lower = p.omega_meas().max(1.0) / 2f64.powf(0.25);
            prop_assert!(p.omega_prime() >= lower * (1.0 - 1e-15));
        }
    }

    #[test]
    fn gamma_prime_tends_to_gamma() {
        let p = DimensionlessParams::new(1.0, 1e-14, 0.0, 1e3, 1.0).unwrap();
        assert!((p.gamma_prime() / p.gamma() - 1.0).abs() < 1e-9);
    }
}
