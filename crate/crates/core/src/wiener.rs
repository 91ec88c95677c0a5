//! Optimal causal Wiener filters for the position and momentum estimates.
//!
//! Two independent constructions live here. [`WienerFilter::closed_form`]
//! evaluates the analytic coefficients of the second-order filter
//! `(A - i B omega) / (Omega'^2 - omega^2 - i Gamma' omega)`, and
//! [`filter_numeric`] builds the filter from scratch by spectral factorization
//! of the record spectrum and partial-fraction extraction of the causal part.

use std::io::{self, Write};

use num_complex::Complex;
use qd::Quad;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cli::output::format_number;
use crate::numeric::dd::{cabs, cdd, cdd_re, csqrt, dd, to_c64, to_f64, Cdd};
use crate::numeric::poly::{self, RootError};
use crate::params::{DimensionlessParams, UnitScale};
use crate::spectra::{self, CrossSpectrum, RationalSpectrum, SpectrumError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WienerError {
    #[error("spectrum has a zero or pole on the real axis near omega = {omega}")]
    MarginalSpectrum { omega: f64 },
    #[error("spectrum is negative or has a non-positive leading coefficient")]
    NegativeSpectrum,
    #[error("repeated poles are not supported (relative separation {separation:e})")]
    RepeatedPole { separation: f64 },
    #[error("pole on the real axis at {pole}")]
    PoleOnAxis { pole: Complex<f64> },
    #[error("causal part requires a strictly proper rational function")]
    Improper,
    #[error("filter denominator vanishes")]
    DegenerateFilter,
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Observable being estimated from the record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    #[default]
    Position,
    Momentum,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Position => "position",
            Target::Momentum => "momentum",
        }
    }
}

/// Treatment of the correlation between the oscillator and the fed-back
/// imprecision noise.
///
/// `Symmetrized` keeps only the real (in-phase) part of that correlation and
/// reproduces the analytic filter and covariance expressions. `Exact` keeps
/// the full complex cross-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossConvention {
    #[default]
    Symmetrized,
    Exact,
}

/// Polynomial factor `scale * prod(omega - root)` with every root strictly in
/// the lower half-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    roots: Vec<Cdd>,
    scale: Quad,
}

impl SpectralFactor {
    pub fn scale(&self) -> f64 {
        to_f64(self.scale)
    }

    pub fn roots(&self) -> Vec<Complex<f64>> {
        self.roots.iter().map(|&r| to_c64(r)).collect()
    }

    /// Coefficients in ascending powers of `omega`.
    pub fn coefficients(&self) -> Vec<Complex<f64>> {
        poly::from_roots(&self.roots).into_iter().map(|c| to_c64(c * cdd_re(self.scale))).collect()
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    pub(crate) fn eval_dd(&self, omega: Cdd) -> Cdd {
        self.roots.iter().fold(cdd_re(self.scale), |acc, &r| acc * (omega - r))
    }

    pub fn eval(&self, omega: f64) -> Complex<f64> {
        to_c64(self.eval_dd(cdd_re(dd(omega))))
    }
}

/// Causal factor `M = numerator / denominator` of an even rational spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFactor {
    pub numerator: SpectralFactor,
    pub denominator: SpectralFactor,
}

impl RationalFactor {
    pub(crate) fn eval_dd(&self, omega: Cdd) -> Cdd {
        self.numerator.eval_dd(omega) / self.denominator.eval_dd(omega)
    }

    pub fn eval(&self, omega: f64) -> Complex<f64> {
        to_c64(self.eval_dd(cdd_re(dd(omega))))
    }
}

/// Lower-half-plane square root of each root of a polynomial in `u = omega^2`.
fn lower_half_roots(coeffs: &[Quad]) -> Result<Vec<Cdd>, WienerError> {
    let mut out = Vec::new();
    for u in poly::roots(coeffs)? {
        let s = csqrt(u);
        let size = to_f64(cabs(s)).max(f64::MIN_POSITIVE);
        if to_f64(s.im).abs() <= 1e-15 * size {
            return Err(WienerError::MarginalSpectrum { omega: to_f64(s.re) });
        }
        out.push(if s.im.0 < 0.0 { s } else { -s });
    }
    poly::sort_roots(&mut out);
    Ok(out)
}

fn factor_polynomial(coeffs: &[Quad]) -> Result<SpectralFactor, WienerError> {
    let coeffs = poly::trim(coeffs);
    let lead = *coeffs.last().ok_or(WienerError::NegativeSpectrum)?;
    if !(lead.0 > 0.0) {
        return Err(WienerError::NegativeSpectrum);
    }
    Ok(SpectralFactor { roots: lower_half_roots(coeffs)?, scale: lead.sqrt() })
}

/// Factorizes `S = M M*` with all poles and zeros of `M` in the lower
/// half-plane and a real positive leading coefficient.
pub fn spectral_factorize(s: &RationalSpectrum) -> Result<RationalFactor, WienerError> {
    s.check_positive().map_err(|e| match e {
        SpectrumError::NonPhysical { omega } => WienerError::MarginalSpectrum { omega },
        other => WienerError::Spectrum(other),
    })?;
    Ok(RationalFactor { numerator: factor_polynomial(s.num_dd())?, denominator: factor_polynomial(s.den_dd())? })
}

/// Proper rational function `numerator(omega) / (lead * prod(omega - pole))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleRational {
    numerator: Vec<Cdd>,
    poles: Vec<Cdd>,
    lead: Cdd,
}

impl PoleRational {
    pub fn new(numerator: &[Complex<f64>], poles: &[Complex<f64>], lead: Complex<f64>) -> Self {
        Self {
            numerator: numerator.iter().map(|&c| cdd(c)).collect(),
            poles: poles.iter().map(|&c| cdd(c)).collect(),
            lead: cdd(lead),
        }
    }

    pub(crate) fn eval_dd(&self, omega: Cdd) -> Cdd {
        let den = self.poles.iter().fold(self.lead, |acc, &p| acc * (omega - p));
        poly::eval_complex(&self.numerator, omega) / den
    }

    pub fn eval(&self, omega: Complex<f64>) -> Complex<f64> {
        to_c64(self.eval_dd(cdd(omega)))
    }
}

/// Sum of simple-pole terms `residue / (omega - pole)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialFractions {
    terms: Vec<(Cdd, Cdd)>,
}

impl PartialFractions {
    pub fn poles(&self) -> Vec<Complex<f64>> {
        self.terms.iter().map(|t| to_c64(t.0)).collect()
    }

    pub fn residues(&self) -> Vec<Complex<f64>> {
        self.terms.iter().map(|t| to_c64(t.1)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub(crate) fn eval_dd(&self, omega: Cdd) -> Cdd {
        self.terms.iter().fold(cdd_re(Quad::ZERO), |acc, &(p, r)| acc + r / (omega - p))
    }

    pub fn eval(&self, omega: Complex<f64>) -> Complex<f64> {
        to_c64(self.eval_dd(cdd(omega)))
    }

    /// Numerator over `prod(omega - pole)`, in ascending powers.
    fn combined_numerator(&self) -> Vec<Cdd> {
        let n = self.terms.len();
        let mut out = vec![cdd_re(Quad::ZERO); n.max(1)];
        for (j, &(_, res)) in self.terms.iter().enumerate() {
            let others: Vec<Cdd> = self.terms.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, t)| t.0).collect();
            for (k, c) in poly::from_roots(&others).into_iter().enumerate() {
                out[k] += c * res;
            }
        }
        out
    }
}

fn relative_gap(a: Cdd, b: Cdd) -> f64 {
    let scale = to_f64(cabs(a)).max(to_f64(cabs(b))).max(f64::MIN_POSITIVE);
    to_f64(cabs(a - b)) / scale
}

/// Lower-half-plane (causal) part of a proper rational function with simple
/// poles.
pub fn causal_part(f: &PoleRational) -> Result<PartialFractions, WienerError> {
    let numerator = trim_complex(&f.numerator);
    if numerator.len() > f.poles.len() {
        return Err(WienerError::Improper);
    }
    for (i, &p) in f.poles.iter().enumerate() {
        if to_f64(p.im).abs() <= 1e-15 * to_f64(cabs(p)).max(f64::MIN_POSITIVE) {
            return Err(WienerError::PoleOnAxis { pole: to_c64(p) });
        }
        for &q in &f.poles[..i] {
            let gap = relative_gap(p, q);
            if gap < 1e-12 {
                return Err(WienerError::RepeatedPole { separation: gap });
            }
        }
    }
    let mut terms = Vec::new();
    for (j, &p) in f.poles.iter().enumerate() {
        if p.im.0 >= 0.0 {
            continue;
        }
        let mut den = f.lead;
        for (i, &q) in f.poles.iter().enumerate() {
            if i != j {
                den *= p - q;
            }
        }
        terms.push((p, poly::eval_complex(numerator, p) / den));
    }
    Ok(PartialFractions { terms })
}

fn trim_complex(c: &[Cdd]) -> &[Cdd] {
    let mut n = c.len();
    while n > 0 && c[n - 1].re.0 == 0.0 && c[n - 1].im.0 == 0.0 {
        n -= 1;
    }
    &c[..n]
}

/// Removes entries of `cancel` that match a root in `roots` (relative gap
/// below `tol`). Returns the unmatched entries of `cancel`.
fn cancel_roots(roots: &mut Vec<Cdd>, cancel: &[Cdd], tol: f64) -> Vec<Cdd> {
    let mut leftover = Vec::new();
    for &c in cancel {
        let best = roots.iter().enumerate().map(|(i, &r)| (i, relative_gap(r, c))).min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((i, gap)) if gap < tol => {
                roots.swap_remove(i);
            }
            _ => leftover.push(c),
        }
    }
    leftover
}

const CANCEL_TOL: f64 = 1e-12;

/// Filter `numerator(omega) / prod(omega - pole)` from the generic
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericFilter {
    pub target: Target,
    numerator: Vec<Cdd>,
    poles: Vec<Cdd>,
}

impl NumericFilter {
    pub(crate) fn eval_dd(&self, omega: Cdd) -> Cdd {
        let den = self.poles.iter().fold(cdd_re(Quad::ONE), |acc, &p| acc * (omega - p));
        poly::eval_complex(&self.numerator, omega) / den
    }

    pub fn eval(&self, omega: f64) -> Complex<f64> {
        to_c64(self.eval_dd(cdd_re(dd(omega))))
    }

    pub fn eval_complex(&self, omega: Complex<f64>) -> Complex<f64> {
        to_c64(self.eval_dd(cdd(omega)))
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        self.poles.iter().map(|&p| to_c64(p)).collect()
    }

    pub fn sample(&self, omegas: &[f64]) -> Vec<Complex<f64>> {
        omegas.iter().map(|&w| self.eval(w)).collect()
    }

    /// Reads off `(A, B, Omega'^2, Gamma')` when the filter has the
    /// second-order form. `None` if it does not.
    pub fn second_order_form(&self) -> Option<WienerFilter> {
        let num = trim_complex(&self.numerator);
        if self.poles.len() != 2 || num.len() > 2 {
            return None;
        }
        let (z1, z2) = (self.poles[0], self.poles[1]);
        let n0 = num.first().copied().unwrap_or(cdd_re(Quad::ZERO));
        let n1 = num.get(1).copied().unwrap_or(cdd_re(Quad::ZERO));
        // (omega - z1)(omega - z2) = -(Omega'^2 - omega^2 - i Gamma' omega)
        let prime_sq = -to_f64((z1 * z2).re);
        let gamma_prime = -to_f64((z1 + z2).im);
        Some(WienerFilter::from_parts(self.target, -to_f64(n0.re), to_f64(n1.im), prime_sq, gamma_prime))
    }
}

/// Builds the optimal causal filter from scratch:
/// `H = [S_target,record / M*]_+ / M` with `S_record = M M*`.
pub fn filter_numeric(
    p: &DimensionlessParams,
    target: Target,
    convention: CrossConvention,
) -> Result<NumericFilter, WienerError> {
    let record = spectra::measured_psd(p)?;
    let m = spectral_factorize(&record)?;
    let cross = spectra::target_record_cross(p, target, convention);
    filter_from_factor(&m, &cross, target)
}

pub(crate) fn filter_from_factor(
    m: &RationalFactor,
    cross: &CrossSpectrum,
    target: Target,
) -> Result<NumericFilter, WienerError> {
    // M*(omega) = scale prod(omega - conj z) / prod(omega - conj p)
    let conj = |v: &[Cdd]| v.iter().map(|z| z.conj()).collect::<Vec<_>>();
    let m_zeros_conj = conj(&m.numerator.roots);
    let m_poles_conj = conj(&m.denominator.roots);

    let den = poly::trim(&cross.den);
    let lead_den = *den.last().ok_or(WienerError::DegenerateFilter)?;
    let mut cross_poles = Vec::new();
    for r in lower_half_roots(den)? {
        cross_poles.push(r);
        cross_poles.push(-r);
    }
    // poles of 1/M* become zeros of G; cancel them against the cross-spectrum poles
    let extra_zeros = cancel_roots(&mut cross_poles, &m_poles_conj, CANCEL_TOL);
    let numerator = poly::mul_complex(&cross.num, &poly::from_roots(&extra_zeros));
    let scale = m.numerator.scale / m.denominator.scale;
    let mut poles = cross_poles;
    poles.extend(m_zeros_conj);
    let g = PoleRational { numerator, poles, lead: cdd_re(lead_den * scale) };

    let causal = causal_part(&g)?;
    // H = [G]_+ prod(omega - p) / (scale prod(omega - z))
    let mut causal_poles: Vec<Cdd> = causal.terms.iter().map(|t| t.0).collect();
    let n_plus = causal.combined_numerator();
    let m_den_roots = m.denominator.roots.clone();
    let extra = cancel_roots(&mut causal_poles, &m_den_roots, CANCEL_TOL);
    let numerator =
        poly::mul_complex(&n_plus, &poly::from_roots(&extra)).into_iter().map(|c| c / cdd_re(scale)).collect();
    let mut poles = causal_poles;
    poles.extend(m.numerator.roots.iter().copied());
    Ok(NumericFilter { target, numerator, poles })
}

/// Second-order causal filter `(A - i B omega) chi'(omega)` with
/// `chi' = 1 / (Omega'^2 - omega^2 - i Gamma' omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WienerFilter {
    pub target: Target,
    pub a: f64,
    pub b: f64,
    pub omega_prime_sq: f64,
    pub gamma_prime: f64,
    omega_prime: f64,
}

/// Filter coefficients `(A_x, B_x, A_p, B_p)` in double-double precision.
pub(crate) struct FilterCoefficients {
    pub ax: Quad,
    pub bx: Quad,
    pub ap: Quad,
    pub bp: Quad,
}

pub(crate) fn closed_form_coefficients(p: &DimensionlessParams) -> Result<FilterCoefficients, WienerError> {
    let f = p.frequencies();
    let (g, gp, ps, wm4) = (f.gamma, f.gamma_prime, f.prime_sq, f.omega_meas4);
    let s = f.shifted_sq;
    // 1 - Omega^2 = -K, kept exact
    let soft = -f.gain;
    let gsum = g + gp;
    let den = g * gsum * ps + ps * ps + (gp * gsum - dd(2.0) * ps) * s + s * s;
    if !(to_f64(den).abs() > 0.0) {
        return Err(WienerError::DegenerateFilter);
    }
    let ax = wm4 * (g * g + g * gp + ps - s) + soft * ((g * gsum + ps) - (Quad::ONE + ps) * s + s * s);
    let damping = wm4 * gsum + soft * (g * (Quad::ONE - ps) + gp * soft);
    let bp = wm4 * (ps - s) + soft * (g * g * ps + g * gp * s + (ps - s) * soft);
    Ok(FilterCoefficients { ax: ax / den, bx: damping / den, ap: -(s * damping) / den, bp: bp / den })
}

impl WienerFilter {
    fn from_parts(target: Target, a: f64, b: f64, omega_prime_sq: f64, gamma_prime: f64) -> Self {
        Self { target, a, b, omega_prime_sq, gamma_prime, omega_prime: omega_prime_sq.sqrt() }
    }

    /// Analytic optimal filter under the symmetrized cross-spectrum.
    pub fn closed_form(p: &DimensionlessParams, target: Target) -> Result<Self, WienerError> {
        let c = closed_form_coefficients(p)?;
        let (a, b) = match target {
            Target::Position => (c.ax, c.bx),
            Target::Momentum => (c.ap, c.bp),
        };
        Ok(Self::from_parts(target, to_f64(a), to_f64(b), p.omega_prime().powi(2), p.gamma_prime()))
    }

    /// Position filter for the exact (complex) cross-spectrum, whose
    /// coefficients reduce to `A = Omega'^2 - Omega^2` and `B = Gamma' - Gamma`.
    pub fn exact_position(p: &DimensionlessParams) -> Self {
        let f = p.frequencies();
        Self::from_parts(
            Target::Position,
            to_f64(f.prime_sq - f.shifted_sq),
            to_f64(f.gamma_prime - f.gamma),
            to_f64(f.prime_sq),
            to_f64(f.gamma_prime),
        )
    }

    /// Same filter with the numerator coefficients replaced.
    pub fn with_coefficients(&self, a: f64, b: f64) -> Self {
        Self { a, b, ..*self }
    }

    pub fn susceptibility(&self, omega: f64) -> Complex<f64> {
        let detuning = (self.omega_prime - omega) * (self.omega_prime + omega);
        Complex::new(detuning, -self.gamma_prime * omega).inv()
    }

    pub fn eval(&self, omega: f64) -> Complex<f64> {
        Complex::new(self.a, -self.b * omega) * self.susceptibility(omega)
    }

    pub fn eval_complex(&self, omega: Complex<f64>) -> Complex<f64> {
        let d = self.omega_prime_sq - omega * omega - Complex::new(0.0, self.gamma_prime) * omega;
        (self.a - Complex::new(0.0, self.b) * omega) / d
    }

    pub fn dc_gain(&self) -> f64 {
        self.a / self.omega_prime_sq
    }

    /// Poles of the filter, `-i Gamma'/2 +- sqrt(Omega'^2 - Gamma'^2/4)`.
    pub fn poles(&self) -> [Complex<f64>; 2] {
        let disc = Complex::new(self.omega_prime_sq - 0.25 * self.gamma_prime * self.gamma_prime, 0.0).sqrt();
        let center = Complex::new(0.0, -0.5 * self.gamma_prime);
        [center - disc, center + disc]
    }
}

/// Fraction of impulse-response energy at negative times.
///
/// `h` is evaluated on the line `omega + i sigma` (which damps the response by
/// `exp(-sigma t)`) and multiplied by a causal second-order low-pass with
/// corner `cutoff` to smooth the step at `t = 0`. Because the damping
/// amplifies any acausal tail, the estimate is conservative.
pub fn acausal_energy_fraction(h: impl Fn(Complex<f64>) -> Complex<f64>, sigma: f64, cutoff: f64) -> f64 {
    const N: usize = 1 << 16;
    let period = 40.0 / sigma;
    let step = 2.0 * std::f64::consts::PI / period;
    let mut buf: Vec<Complex<f64>> = (0..N)
        .map(|k| {
            let idx = if k < N / 2 { k as f64 } else { k as f64 - N as f64 };
            let w = Complex::new(idx * step, sigma);
            let lp = (Complex::new(1.0, 0.0) - Complex::new(0.0, 1.0) * w / cutoff).powi(-2);
            h(w) * lp
        })
        .collect();
    // f(t) = (1/2pi) integral F(w) exp(-i w t) dw: a forward FFT over the samples
    FftPlanner::new().plan_fft_forward(N).process(&mut buf);
    let energy = |s: &[Complex<f64>]| s.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let total = energy(&buf);
    if total == 0.0 {
        return 0.0;
    }
    energy(&buf[N / 2..]) / total
}

/// Writes a `# omega,ReH,ImH` table.
pub fn write_filter_table<W: Write>(
    out: &mut W,
    omegas: &[f64],
    scale: &UnitScale,
    filter: impl Fn(f64) -> Complex<f64>,
) -> io::Result<()> {
    writeln!(out, "# omega,ReH,ImH")?;
    for &w in omegas {
        let h = filter(w);
        writeln!(out, "{},{},{}", format_number(scale.frequency(w)), format_number(h.re), format_number(h.im))?;
    }
    Ok(())
}
