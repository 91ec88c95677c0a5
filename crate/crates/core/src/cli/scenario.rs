//! Scenario files: a strict TOML schema plus validation into model types.

use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::criteria;
use crate::multimode::SecondMode;
use crate::params::{DimensionlessParams, NthConvention, OscillatorParams, ParamError, PhotonMapping};
use crate::wiener::Target;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario `{path}`: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("kappa calibration failed: {0}")]
    Calibration(String),
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Field { field: field.into(), reason: reason.into() }
}

/// Scenarios shipped with the binary, addressable by name.
pub const BUNDLED: [(&str, &str); 5] = [
    ("fig2", include_str!("../../scenarios/fig2.toml")),
    ("fig3a", include_str!("../../scenarios/fig3a.toml")),
    ("fig3b", include_str!("../../scenarios/fig3b.toml")),
    ("fig4", include_str!("../../scenarios/fig4.toml")),
    ("membrane", include_str!("../../scenarios/membrane.toml")),
];

pub const MAX_AXIS_POINTS: usize = 1_000_000;
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub oscillator: OscillatorSection,
    pub measurement: MeasurementSection,
    pub feedback: FeedbackSection,
    pub second_mode: Option<SecondModeSection>,
    #[serde(default)]
    pub sweep: Vec<AxisSection>,
    pub thresholds: Option<ThresholdSection>,
    pub spectra: Option<SpectraSection>,
}

/// Either `n_th` directly or the physical triple `mass`, `frequency_hz`,
/// `temperature` (which also enables the photon-number mapping).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    pub quality_factor: f64,
    pub n_th: Option<f64>,
    /// kg
    pub mass: Option<f64>,
    /// Natural frequency in Hz (not rad/s).
    pub frequency_hz: Option<f64>,
    /// K
    pub temperature: Option<f64>,
    #[serde(default)]
    pub nth_convention: NthConvention,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub eta: f64,
    pub cooperativity: Option<f64>,
    pub n_cav: Option<f64>,
    /// Frequency pull `G / 2 pi` in Hz per metre.
    pub pull_hz_per_m: Option<f64>,
    /// Single-photon coupling `g0 / 2 pi` in Hz.
    pub g0_hz: Option<f64>,
    /// Cavity decay rate `kappa / 2 pi` in Hz.
    pub kappa_hz: Option<f64>,
    pub calibration: Option<CalibrationSection>,
}

/// Chooses `kappa` so that the full-model threshold of `target` at feedback
/// ratio `ratio` sits at `n_cav` photons.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub n_cav: f64,
    pub target: Target,
    #[serde(default = "one")]
    pub ratio: f64,
}

fn one() -> f64 {
    1.0
}

/// Exactly one of `ratios` (`R = Omega / Omega0`) or `gains`
/// (`K / Omega0^2`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub ratios: Option<Vec<f64>>,
    pub gains: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondModeSection {
    pub frequency_ratio: f64,
    pub quality_factor: f64,
    #[serde(default = "one")]
    pub mass_ratio: f64,
    #[serde(default = "one")]
    pub g_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Cooperativity,
    NTh,
    Eta,
    QualityFactor,
    NCav,
}

impl Variable {
    pub fn column(self) -> &'static str {
        match self {
            Variable::Cooperativity => "C",
            Variable::NTh => "n_th",
            Variable::Eta => "eta",
            Variable::QualityFactor => "Q",
            Variable::NCav => "n_cav",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub variable: Variable,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub targets: Vec<Target>,
    pub n_th: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub full_model: bool,
}

fn yes() -> bool {
    true
}

/// Frequency grid in units of the natural frequency.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraSection {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub variable: Variable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub targets: Vec<Target>,
    pub n_th: Vec<f64>,
    pub eta: Vec<f64>,
    pub full_model: bool,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// Hex SHA-256 of the scenario text.
    pub sha256: String,
    /// Parameters at the first feedback ratio. When the measurement is given
    /// only through a photon mapping without `n_cav`, the cooperativity is a
    /// placeholder of one.
    pub base: DimensionlessParams,
    pub ratios: Vec<f64>,
    pub oscillator: Option<OscillatorParams>,
    pub mapping: Option<PhotonMapping>,
    pub n_cav: Option<f64>,
    pub second_mode: Option<SecondMode>,
    pub axes: Vec<Axis>,
    pub thresholds: Option<ThresholdGrid>,
    pub spectra: Option<(f64, f64, usize)>,
}

impl Scenario {
    /// Loads a scenario from a path, or from the bundled set when `source`
    /// names one and no such file exists.
    pub fn load(source: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(source);
        if !path.exists() {
            if let Some((_, text)) = BUNDLED.iter().find(|(name, _)| *name == source) {
                return Self::parse(text);
            }
        }
        let text = std::fs::read_to_string(path)
            .map_err(|source_err| ScenarioError::Read { path: source.to_string(), source: source_err })?;
        Self::parse(&text)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| field_error("scenario", format!("no bundled scenario named `{name}`")))?;
        Self::parse(text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let sha256 = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        file.validate(sha256)
    }

    /// Base parameters at each feedback ratio.
    pub fn feedback_points(&self) -> Result<Vec<DimensionlessParams>, ParamError> {
        self.ratios.iter().map(|&r| self.base.with_ratio(r)).collect()
    }

    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Parameters at a photon number, keeping every other setting.
    pub fn at_photons(&self, p: &DimensionlessParams, n_cav: f64) -> Result<DimensionlessParams, ScenarioError> {
        let mapping =
            self.mapping.as_ref().ok_or_else(|| field_error("measurement", "n_cav requires a photon mapping"))?;
        Ok(p.with_cooperativity(mapping.cooperativity(n_cav))?)
    }

    /// Applies `key=value` overrides to the parameters of a single point.
    /// Returns the updated parameters and the photon number, if any.
    pub fn apply_overrides(
        &self,
        p: &DimensionlessParams,
        overrides: &[(String, f64)],
    ) -> Result<(DimensionlessParams, Option<f64>), ScenarioError> {
        let mut p = *p;
        let mut n_cav = self.n_cav;
        for (key, value) in overrides {
            p = match key.as_str() {
                "eta" => p.with_eta(*value)?,
                "cooperativity" | "C" => p.with_cooperativity(*value)?,
                "n_th" => p.with_n_th(*value)?,
                "quality_factor" | "Q" => {
                    DimensionlessParams::new(p.eta(), p.cooperativity(), p.n_th(), *value, p.ratio())?
                }
                "ratio" | "R" => p.with_ratio(*value)?,
                "gain" | "K" => p.with_ratio(ratio_from_gain("gain", *value)?)?,
                "n_cav" => {
                    n_cav = Some(*value);
                    self.at_photons(&p, *value)?
                }
                other => return Err(field_error(other.to_string(), "unknown override key")),
            };
        }
        Ok((p, n_cav))
    }
}

fn ratio_from_gain(field: &str, gain: f64) -> Result<f64, ScenarioError> {
    if !gain.is_finite() || gain <= -1.0 {
        return Err(field_error(field, format!("unstable feedback gain {gain} (must exceed -1)")));
    }
    Ok((1.0 + gain).sqrt())
}

impl AxisSection {
    fn values(&self, index: usize) -> Result<Vec<f64>, ScenarioError> {
        let field = |name: &str| format!("sweep[{index}].{name}");
        if self.points == 0 || self.points > MAX_AXIS_POINTS {
            return Err(field_error(field("points"), format!("must be in 1..={MAX_AXIS_POINTS}, got {}", self.points)));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(field_error(field("min"), "min and max must be finite with min <= max"));
        }
        if self.log && self.min <= 0.0 {
            return Err(field_error(field("min"), "log axes need min > 0"));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let n = self.points - 1;
        Ok(if self.log {
            let (a, b) = (self.min.log10(), self.max.log10());
            (0..=n).map(|i| 10f64.powf(a + (b - a) * i as f64 / n as f64)).collect()
        } else {
            (0..=n).map(|i| self.min + (self.max - self.min) * i as f64 / n as f64).collect()
        })
    }
}

impl ScenarioFile {
    fn validate(self, sha256: String) -> Result<Scenario, ScenarioError> {
        let osc_sec = &self.oscillator;
        let q = osc_sec.quality_factor;
        let physical = match (osc_sec.mass, osc_sec.frequency_hz, osc_sec.temperature) {
            (Some(m), Some(f), Some(t)) => {
                Some(OscillatorParams::from_quality_factor(m, 2.0 * std::f64::consts::PI * f, q, t)?)
            }
            (None, None, None) => None,
            _ => {
                return Err(field_error("oscillator", "mass, frequency_hz and temperature must be given together"));
            }
        };
        let ratios = match (&self.feedback.ratios, &self.feedback.gains) {
            (Some(r), None) => r.clone(),
            (None, Some(g)) => g.iter().map(|&k| ratio_from_gain("feedback.gains", k)).collect::<Result<_, _>>()?,
            _ => return Err(field_error("feedback", "give exactly one of `ratios` or `gains`")),
        };
        if ratios.is_empty() {
            return Err(field_error("feedback", "at least one feedback value is required"));
        }
        let n_th = match (osc_sec.n_th, physical) {
            (Some(n), _) => n,
            (None, Some(osc)) => match osc_sec.nth_convention {
                NthConvention::Unshifted => osc.thermal_occupancy(osc.omega0()),
                NthConvention::AtShifted => osc.thermal_occupancy(ratios[0] * osc.omega0()),
            },
            (None, None) => return Err(field_error("oscillator.n_th", "required without a physical oscillator")),
        };

        let meas = &self.measurement;
        let g0 = match (meas.g0_hz, meas.pull_hz_per_m, physical) {
            (Some(g), None, _) => Some(2.0 * std::f64::consts::PI * g),
            (None, Some(pull), Some(osc)) => Some(2.0 * std::f64::consts::PI * pull * osc.x_zp(osc.omega0())),
            (None, Some(_), None) => {
                return Err(field_error("measurement.pull_hz_per_m", "needs a physical oscillator"))
            }
            (Some(_), Some(_), _) => {
                return Err(field_error("measurement", "give only one of g0_hz and pull_hz_per_m"))
            }
            (None, None, _) => None,
        };
        // placeholder cooperativity until the mapping or n_cav fixes it
        let mut base = DimensionlessParams::new(meas.eta, meas.cooperativity.unwrap_or(1.0), n_th, q, ratios[0])?;
        let mapping = match (g0, physical) {
            (Some(g0), Some(osc)) => {
                let kappa = match (meas.kappa_hz, &meas.calibration) {
                    (Some(k), None) => 2.0 * std::f64::consts::PI * k,
                    (None, Some(cal)) => calibrate_kappa(&base, &osc, g0, cal)?,
                    (None, None) => {
                        return Err(field_error("measurement", "a photon mapping needs kappa_hz or calibration"))
                    }
                    (Some(_), Some(_)) => {
                        return Err(field_error("measurement", "give only one of kappa_hz and calibration"))
                    }
                };
                Some(PhotonMapping { osc, eta: meas.eta, g0, kappa })
            }
            (Some(_), None) => return Err(field_error("measurement.g0_hz", "needs a physical oscillator")),
            (None, _) => None,
        };
        if let Some(n_cav) = meas.n_cav {
            let m = mapping.as_ref().ok_or_else(|| field_error("measurement.n_cav", "needs a photon mapping"))?;
            if meas.cooperativity.is_some() {
                return Err(field_error("measurement", "give only one of cooperativity and n_cav"));
            }
            base = base.with_cooperativity(m.cooperativity(n_cav))?;
        } else if meas.cooperativity.is_none() && mapping.is_none() {
            return Err(field_error("measurement.cooperativity", "required without a photon mapping"));
        }

        let second_mode = match &self.second_mode {
            Some(s) => Some(SecondMode::new(s.frequency_ratio, s.quality_factor, s.mass_ratio, s.g_ratio)?),
            None => None,
        };

        if self.sweep.len() > 2 {
            return Err(field_error("sweep", "at most two axes are supported"));
        }
        let axes = self
            .sweep
            .iter()
            .enumerate()
            .map(|(i, a)| Ok(Axis { variable: a.variable, values: a.values(i)? }))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        if axes.len() == 2 && axes[0].variable == axes[1].variable {
            return Err(field_error("sweep[1].variable", "duplicates the first axis"));
        }
        let total: usize = axes.iter().map(|a| a.values.len()).product();
        if total > MAX_GRID_POINTS {
            return Err(field_error("sweep", format!("{total} grid points exceed the cap of {MAX_GRID_POINTS}")));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.variable == Variable::NCav && mapping.is_none() {
                return Err(field_error(format!("sweep[{i}].variable"), "n_cav needs a photon mapping"));
            }
            if a.variable == Variable::NCav && axes.iter().any(|b| b.variable == Variable::Cooperativity) {
                return Err(field_error(
                    format!("sweep[{i}].variable"),
                    "n_cav and cooperativity cannot both be swept",
                ));
            }
        }

        let thresholds = self.thresholds.as_ref().map(|t| ThresholdGrid {
            targets: t.targets.clone(),
            n_th: t.n_th.clone().unwrap_or_else(|| vec![n_th]),
            eta: t.eta.clone().unwrap_or_else(|| vec![meas.eta]),
            full_model: t.full_model,
        });
        if let Some(t) = &thresholds {
            if t.targets.is_empty() {
                return Err(field_error("thresholds.targets", "at least one target is required"));
            }
            for &n in &t.n_th {
                base.with_n_th(n).map_err(|e| field_error("thresholds.n_th", e.to_string()))?;
            }
            for &e in &t.eta {
                base.with_eta(e).map_err(|err| field_error("thresholds.eta", err.to_string()))?;
            }
        }
        let spectra = match &self.spectra {
            Some(s) => {
                if !(s.min > 0.0 && s.max > s.min && s.max.is_finite()) || s.points < 2 || s.points > MAX_AXIS_POINTS {
                    return Err(field_error("spectra", "need 0 < min < max and 2 <= points <= 1e6"));
                }
                Some((s.min, s.max, s.points))
            }
            None => None,
        };
        for (i, &r) in ratios.iter().enumerate() {
            base.with_ratio(r).map_err(|e| field_error(format!("feedback.ratios[{i}]"), e.to_string()))?;
        }

        Ok(Scenario {
            name: self.name,
            description: self.description,
            sha256,
            base,
            ratios,
            oscillator: physical,
            mapping,
            n_cav: meas.n_cav,
            second_mode,
            axes,
            thresholds,
            spectra,
        })
    }
}

fn calibrate_kappa(
    base: &DimensionlessParams,
    osc: &OscillatorParams,
    g0: f64,
    cal: &CalibrationSection,
) -> Result<f64, ScenarioError> {
    if !(cal.n_cav.is_finite() && cal.n_cav > 0.0) {
        return Err(field_error("measurement.calibration.n_cav", "must be finite and > 0"));
    }
    let p = base.with_ratio(cal.ratio)?;
    let c = criteria::full_model_crossing(&p, cal.target)
        .map_err(|e| ScenarioError::Calibration(e.to_string()))?
        .ok_or_else(|| {
            ScenarioError::Calibration(format!("no {} squeezing at R = {}", cal.target.as_str(), cal.ratio))
        })?;
    Ok(PhotonMapping::kappa_for(osc, g0, cal.n_cav, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let s = Scenario::bundled(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.sha256.len(), 64);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = include_str!("../../scenarios/fig2.toml").replace("eta = 1.0", "eta = 1.0\netaa = 2.0");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(err.to_string().contains("etaa"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let text = include_str!("../../scenarios/fig2.toml").replace("points = 351", "points = 0");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(err.to_string().contains("sweep[0].points"), "{err}");
        let text = include_str!("../../scenarios/fig2.toml").replace("eta = 1.0", "eta = 1.5");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("eta"));
    }

    #[test]
    fn gain_and_ratio_encodings_agree() {
        let s = Scenario::bundled("fig2").unwrap();
        let p = s.base.with_ratio(1.0).unwrap();
        let (a, _) = s.apply_overrides(&p, &[("ratio".into(), 1.0)]).unwrap();
        let (b, _) = s.apply_overrides(&p, &[("gain".into(), 0.0)]).unwrap();
        assert_eq!(a, b);
        assert!(s.apply_overrides(&p, &[("gain".into(), -1.0)]).is_err());
        assert!(s.apply_overrides(&p, &[("bogus".into(), 1.0)]).is_err());
    }

    #[test]
    fn membrane_calibration_hits_target_photons() {
        let s = Scenario::bundled("membrane").unwrap();
        let mapping = s.mapping.unwrap();
        let c = criteria::full_model_crossing(&s.base.with_ratio(1.0).unwrap(), Target::Position).unwrap().unwrap();
        assert!((mapping.photons(c) / 3e9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axis_grids() {
        let a = AxisSection { variable: Variable::Cooperativity, min: 0.1, max: 1e6, points: 8, log: true };
        let v = a.values(0).unwrap();
        assert_eq!(v.len(), 8);
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[7] / 1e6 - 1.0).abs() < 1e-12);
        let b = AxisSection { variable: Variable::Eta, min: 0.2, max: 1.0, points: 5, log: false };
        assert_eq!(b.values(0).unwrap(), vec![0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        let c = AxisSection { variable: Variable::Eta, min: 0.0, max: 1.0, points: 3, log: true };
        assert!(c.values(0).is_err());
    }
}
