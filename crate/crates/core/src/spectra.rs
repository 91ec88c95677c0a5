//! Susceptibilities and double-sided power spectral densities of the
//! feedback loop, both as direct functions of frequency and as exact even
//! rational functions for the factorization machinery.
//!
//! Fourier convention: `F(omega) = integral f(t) exp(+i omega t) dt`, so causal
//! responses have their poles in the lower half-plane.

use std::io::{self, Write};

use num_complex::Complex;
use qd::Quad;
use serde::Serialize;
use thiserror::Error;

use crate::cli::output::format_number;
use crate::multimode::SecondMode;
use crate::numeric::dd::{cdd_re, dd, to_f64, Cdd};
use crate::numeric::poly::{self, RootError};
use crate::params::{DimensionlessParams, UnitScale};
use crate::wiener::{CrossConvention, Target};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("cannot combine a {0:?} spectrum with a {1:?} spectrum")]
    UnitMismatch(SpectrumUnits, SpectrumUnits),
    #[error("imprecision noise is unbounded when eta * C = 0")]
    InfiniteImprecision,
    #[error("spectrum is not strictly positive on the real axis near omega = {omega}")]
    NonPhysical { omega: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumUnits {
    /// Position spectra (m^2 s in SI).
    Displacement,
    /// Force spectra (N^2 s in SI).
    Force,
}

/// Mechanical susceptibility `1 / (m (omega_r^2 - omega^2 - i Gamma omega))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibility {
    pub mass: f64,
    pub omega_r: f64,
    pub gamma: f64,
}

impl Susceptibility {
    pub fn inverse(&self, omega: f64) -> Complex<f64> {
        let detuning = (self.omega_r - omega) * (self.omega_r + omega);
        Complex::new(self.mass * detuning, -self.mass * self.gamma * omega)
    }

    pub fn eval(&self, omega: f64) -> Complex<f64> {
        self.inverse(omega).inv()
    }

    /// `|chi(omega)|^2`.
    pub fn norm_sqr(&self, omega: f64) -> f64 {
        1.0 / self.inverse(omega).norm_sqr()
    }

    /// `|chi^{-1}|^2` as a polynomial in `omega^2`.
    pub(crate) fn inverse_norm_sqr_poly(&self) -> Vec<Quad> {
        let m2 = dd(self.mass) * dd(self.mass);
        let w2 = dd(self.omega_r) * dd(self.omega_r);
        let g2 = dd(self.gamma) * dd(self.gamma);
        vec![m2 * w2 * w2, m2 * (g2 - dd(2.0) * w2), m2]
    }
}

/// Even spectrum `S(omega) = num(omega^2) / den(omega^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSpectrum {
    num: Vec<Quad>,
    den: Vec<Quad>,
    units: SpectrumUnits,
}

impl RationalSpectrum {
    pub(crate) fn from_dd(num: Vec<Quad>, den: Vec<Quad>, units: SpectrumUnits) -> Self {
        Self { num, den, units }
    }

    pub fn constant(value: f64, units: SpectrumUnits) -> Self {
        Self { num: vec![dd(value)], den: vec![Quad::ONE], units }
    }

    pub fn units(&self) -> SpectrumUnits {
        self.units
    }

    /// Numerator coefficients in ascending powers of `omega^2`.
    pub fn numerator(&self) -> Vec<f64> {
        self.num.iter().map(|&c| to_f64(c)).collect()
    }

    /// Denominator coefficients in ascending powers of `omega^2`.
    pub fn denominator(&self) -> Vec<f64> {
        self.den.iter().map(|&c| to_f64(c)).collect()
    }

    pub(crate) fn num_dd(&self) -> &[Quad] {
        &self.num
    }

    pub(crate) fn den_dd(&self) -> &[Quad] {
        &self.den
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let u = dd(omega) * dd(omega);
        to_f64(poly::eval_real(&self.num, u) / poly::eval_real(&self.den, u))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { num: self.num.iter().map(|&c| c * dd(factor)).collect(), den: self.den.clone(), units: self.units }
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpectrumError> {
        if self.units != other.units {
            return Err(SpectrumError::UnitMismatch(self.units, other.units));
        }
        if self.den == other.den {
            return Ok(Self { num: poly::add_real(&self.num, &other.num), den: self.den.clone(), units: self.units });
        }
        let num = poly::add_real(&poly::mul_real(&self.num, &other.den), &poly::mul_real(&other.num, &self.den));
        Ok(Self { num, den: poly::mul_real(&self.den, &other.den), units: self.units })
    }

    /// Positivity on the real axis by root analysis plus sampling.
    ///
    /// A real-axis zero or pole shows up as a non-negative real root of the
    /// numerator or denominator in `omega^2`.
    pub fn check_positive(&self) -> Result<(), SpectrumError> {
        for coeffs in [&self.num, &self.den] {
            if poly::trim(coeffs).len() > 1 {
                for u in poly::roots(coeffs)? {
                    let (re, im) = (to_f64(u.re), to_f64(u.im));
                    if re >= 0.0 && im.abs() <= 1e-14 * re.max(f64::MIN_POSITIVE) {
                        return Err(SpectrumError::NonPhysical { omega: re.sqrt() });
                    }
                }
            }
        }
        for omega in log_grid(1e-4, 1e4, 401).into_iter().chain([0.0]) {
            let s = self.eval(omega);
            if !(s > 0.0) {
                return Err(SpectrumError::NonPhysical { omega });
            }
        }
        Ok(())
    }
}

/// Cross-spectrum `num(omega) / den(omega^2)` with a complex numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    pub(crate) num: Vec<Cdd>,
    pub(crate) den: Vec<Quad>,
}

impl CrossSpectrum {
    pub fn eval(&self, omega: f64) -> Complex<f64> {
        let w = cdd_re(dd(omega));
        let v = poly::eval_complex(&self.num, w) / cdd_re(poly::eval_real(&self.den, dd(omega) * dd(omega)));
        Complex::new(to_f64(v.re), to_f64(v.im))
    }
}

/// Closed-loop noise model evaluated pointwise in double precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Total white force PSD.
    pub force: f64,
    /// White imprecision PSD.
    pub imprecision: f64,
    /// Feedback spring gain `K`.
    pub gain: f64,
    pub loop_chi: Susceptibility,
    pub bare_chi: Susceptibility,
}

impl NoiseModel {
    pub fn new(p: &DimensionlessParams) -> Self {
        let gamma = p.gamma();
        Self {
            force: 4.0 * p.n_tot() * gamma,
            imprecision: 1.0 / (4.0 * p.eta() * p.cooperativity() * gamma),
            gain: p.gain(),
            loop_chi: Susceptibility { mass: 1.0, omega_r: p.ratio(), gamma },
            bare_chi: Susceptibility { mass: 1.0, omega_r: 1.0, gamma },
        }
    }

    /// Closed-loop displacement PSD `(S_F + K^2 S_imp) |chi|^2`.
    pub fn displacement(&self, omega: f64) -> f64 {
        (self.force + self.gain * self.gain * self.imprecision) * self.loop_chi.norm_sqr(omega)
    }

    /// In-loop record PSD, `(S_F + S_imp |chi0^{-1}|^2) |chi|^2`.
    pub fn measured(&self, omega: f64) -> f64 {
        (self.force + self.imprecision * self.bare_chi.inverse(omega).norm_sqr()) * self.loop_chi.norm_sqr(omega)
    }

    /// Correlation between the displacement and the imprecision noise.
    pub fn displacement_imprecision(&self, omega: f64, convention: CrossConvention) -> Complex<f64> {
        let chi = self.loop_chi.eval(omega);
        match convention {
            CrossConvention::Exact => -self.gain * self.imprecision * chi,
            CrossConvention::Symmetrized => Complex::new(-self.gain * self.imprecision * chi.re, 0.0),
        }
    }

    /// Cross-spectrum between a target observable and the record.
    pub fn target_record(&self, omega: f64, target: Target, convention: CrossConvention) -> Complex<f64> {
        let x = self.displacement(omega) + self.displacement_imprecision(omega, convention);
        match target {
            Target::Position => x,
            Target::Momentum => Complex::new(0.0, -omega) * x,
        }
    }
}

/// White force PSD from thermal and backaction noise, `4 n_tot Gamma`.
pub fn force_psd_total(p: &DimensionlessParams) -> RationalSpectrum {
    RationalSpectrum::constant(4.0 * p.n_tot() * p.gamma(), SpectrumUnits::Force)
}

/// White imprecision PSD `1 / (4 eta C Gamma)`.
pub fn imprecision_psd(p: &DimensionlessParams) -> Result<RationalSpectrum, SpectrumError> {
    let eta_c = p.eta() * p.cooperativity();
    if !(eta_c > 0.0) {
        return Err(SpectrumError::InfiniteImprecision);
    }
    let f = p.frequencies();
    Ok(RationalSpectrum::from_dd(
        vec![Quad::ONE / (dd(4.0) * f.eta_c * f.gamma)],
        vec![Quad::ONE],
        SpectrumUnits::Displacement,
    ))
}

fn loop_denominator(p: &DimensionlessParams) -> Vec<Quad> {
    let f = p.frequencies();
    vec![f.shifted_sq * f.shifted_sq, f.gamma * f.gamma - dd(2.0) * f.shifted_sq, Quad::ONE]
}

fn white_levels(p: &DimensionlessParams) -> (Quad, Quad) {
    let f = p.frequencies();
    let force = dd(4.0) * f.n_tot * f.gamma;
    let imp = Quad::ONE / (dd(4.0) * f.eta_c * f.gamma);
    (force, imp)
}

/// Closed-loop displacement PSD including fed-back imprecision.
pub fn displacement_psd(p: &DimensionlessParams) -> RationalSpectrum {
    let (force, imp) = white_levels(p);
    let k = p.frequencies().gain;
    RationalSpectrum::from_dd(vec![force + k * k * imp], loop_denominator(p), SpectrumUnits::Displacement)
}

/// PSD of the in-loop measurement record.
pub fn measured_psd(p: &DimensionlessParams) -> Result<RationalSpectrum, SpectrumError> {
    let (force, imp) = white_levels(p);
    let f = p.frequencies();
    let bare = [Quad::ONE, f.gamma * f.gamma - dd(2.0), Quad::ONE];
    let num = vec![force + imp * bare[0], imp * bare[1], imp * bare[2]];
    let s = RationalSpectrum::from_dd(num, loop_denominator(p), SpectrumUnits::Displacement);
    s.check_positive()?;
    Ok(s)
}

/// Cross-spectrum between the target observable and the record.
pub fn target_record_cross(p: &DimensionlessParams, target: Target, convention: CrossConvention) -> CrossSpectrum {
    let (force, imp) = white_levels(p);
    let f = p.frequencies();
    let k = f.gain;
    let mut num = vec![cdd_re(force + k * k * imp - k * imp * f.shifted_sq), cdd_re(Quad::ZERO), cdd_re(k * imp)];
    if convention == CrossConvention::Exact {
        num[1] = Complex::new(Quad::ZERO, -(k * imp * f.gamma));
    }
    if target == Target::Momentum {
        let minus_i = Complex::new(Quad::ZERO, dd(-1.0));
        num = std::iter::once(cdd_re(Quad::ZERO)).chain(num.into_iter().map(|c| c * minus_i)).collect();
    }
    CrossSpectrum { num, den: loop_denominator(p) }
}

/// Apparent displacement PSD contributed by a second mechanical mode.
pub fn second_mode_psd(m2: &SecondMode, p: &DimensionlessParams) -> RationalSpectrum {
    let level = m2.force_level(p);
    let chi = m2.susceptibility(p);
    let g2 = dd(m2.g_ratio()) * dd(m2.g_ratio());
    RationalSpectrum::from_dd(vec![g2 * dd(level)], chi.inverse_norm_sqr_poly(), SpectrumUnits::Displacement)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
        }
    }
}

/// Writes a two-column `# omega,S` table, converting to SI with `scale`.
pub fn write_spectrum_table<W: Write>(
    out: &mut W,
    omegas: &[f64],
    units: SpectrumUnits,
    scale: &UnitScale,
    spectrum: impl Fn(f64) -> f64,
) -> io::Result<()> {
    writeln!(out, "# omega,S")?;
    for &w in omegas {
        let s = spectrum(w);
        let s_si = match units {
            SpectrumUnits::Displacement => scale.displacement_psd(s),
            SpectrumUnits::Force => scale.force_psd(s),
        };
        writeln!(out, "{},{}", format_number(scale.frequency(w)), format_number(s_si))?;
    }
    Ok(())
}
