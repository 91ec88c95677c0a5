//! Conditional covariance of the estimation error.
//!
//! Variances are normalized by the zero-point spreads at the feedback-shifted
//! frequency, so in scaled units `vxx = R Vxx`, `vpp = Vpp / R` and `vxp = Vxp`.

use num_complex::Complex;
use qd::Quad;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::dd::{dd, to_f64};
use crate::numeric::quadrature;
use crate::params::DimensionlessParams;
use crate::wiener::{self, CrossConvention, Target, WienerError, WienerFilter};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConditionalError {
    #[error("covariance violates the uncertainty bound (det = {det})")]
    Unphysical { det: f64 },
    #[error("closed-form covariance is inconsistent: det = {det} below 1 by more than {slack:e}")]
    Inconsistent { det: f64, slack: f64 },
    #[error("covariance integral did not reach the requested accuracy ({component}: error {error:e}, tail {tail:e})")]
    Accuracy { component: &'static str, error: f64, tail: f64 },
    #[error("generic filter is not of second order")]
    FilterShape,
    #[error(transparent)]
    Filter(#[from] WienerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    pub vxx: f64,
    pub vpp: f64,
    pub vxp: f64,
}

impl CovarianceMatrix {
    pub fn new(vxx: f64, vpp: f64, vxp: f64) -> Self {
        Self { vxx, vpp, vxp }
    }

    pub fn det(&self) -> f64 {
        self.vxx * self.vpp - self.vxp * self.vxp
    }

    /// Positive diagonal and `det >= 1 - tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.vxx > 0.0 && self.vpp > 0.0 && self.det() >= 1.0 - tol
    }

    /// `1 / sqrt(det)`; fails when the determinant is below one by more than
    /// `slack`.
    pub fn purity(&self, slack: f64) -> Result<f64, ConditionalError> {
        let det = self.det();
        if !(det >= 1.0 - slack) || !(self.vxx > 0.0 && self.vpp > 0.0) {
            return Err(ConditionalError::Unphysical { det });
        }
        Ok(1.0 / det.sqrt())
    }

    /// Re-normalizes to zero-point units at the unshifted frequency.
    pub fn at_natural_frequency(&self, ratio: f64) -> Self {
        Self { vxx: self.vxx / ratio, vpp: self.vpp * ratio, vxp: self.vxp }
    }

    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        let scale = (self.vxx * self.vpp).sqrt();
        [
            (self.vxx - other.vxx).abs() / self.vxx.abs(),
            (self.vpp - other.vpp).abs() / self.vpp.abs(),
            (self.vxp - other.vxp).abs() / self.vxp.abs().max(1e-3 * scale),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    /// Angle of the minimum-variance quadrature `X cos(theta) + P sin(theta)`,
    /// in `(-pi/2, pi/2]`.
    pub theta: f64,
    pub v_min: f64,
}

/// How far below one the determinant may fall before a result is rejected.
///
/// The white-noise bath model does not enforce the uncertainty relation
/// exactly: near the pure-state limit the determinant undershoots one by up to
/// about `0.2 Gamma` (also reproduced by the numeric integral), so the
/// allowance scales with the damping rate.
pub fn determinant_slack(p: &DimensionlessParams) -> f64 {
    1e-6 + p.gamma()
}

/// Full closed-form conditional covariance.
///
/// The three expressions are evaluated in double-double arithmetic; they
/// involve cancellations between terms of order `Omega'^8` that would
/// otherwise lose most significant digits at high Q.
pub fn covariance_closed(p: &DimensionlessParams) -> Result<CovarianceMatrix, ConditionalError> {
    let v = closed_terms(p);
    let det = v.det();
    let slack = determinant_slack(p);
    if !(det >= 1.0 - slack) || !(v.vxx > 0.0 && v.vpp > 0.0) {
        return Err(ConditionalError::Inconsistent { det, slack });
    }
    Ok(v)
}

fn closed_terms(p: &DimensionlessParams) -> CovarianceMatrix {
    let f = p.frequencies();
    let two = dd(2.0);
    let one = Quad::ONE;
    let (g, gp, ps, a) = (f.gamma, f.gamma_prime, f.prime_sq, f.omega_meas4);
    let (r, r2, k) = (f.r, f.shifted_sq, f.gain);
    let r4 = r2 * r2;
    let gs = g + gp;
    let (g2, gp2, ps2) = (g * g, gp * gp, ps * ps);
    let den = r4 + g * gs * ps + ps2 + r2 * (gp * gs - two * ps);
    let den2 = den * den;
    let eta_c = f.eta_c;

    let inner = -(two * r2 * k * (a - k) * (r4 + two * g * gs * ps + ps2 + r2 * (gp2 - g2 - two * ps)))
        - r2 * k * k * (r4 * r2 + g2 * ps2 + r4 * (gp2 - two * ps) + r2 * ps * (two * g * gp + ps))
        - (k - a) * (k - a) * (r4 + r2 * (gp2 - g2 - two * ps) + (g * gs + ps) * (g * gs + ps));
    let vxx = (a + k * k + inner / den2) / (dd(8.0) * eta_c * r * g2);

    let gs2 = gs * gs;
    let measured = a
        * (-(two * r2 * gs2) - r4 * r4
            + r4 * (gp2 * gs2 + two * (g2 + dd(4.0) * g * gp + two * gp2) - two)
            + r4 * r2 * (dd(4.0) - two * g * gp)
            + two
                * r2
                * (g * gp * gs2 - ((r2 - two) * g2 + r2 * g * gp + two * r2 * gp2) + two * (one - two * r2))
                * ps
            + (g2 * gs2 - two * ((one + r2) * g2 + r2 * g * gp - r2 * gp2) + two * (two * (r2 + r4) - one)) * ps2
            + two * (g * gs - two * r2) * ps2 * ps
            + ps2 * ps2);
    let quadratic = a * a * (r4 + ps2 + r2 * (gs2 - two * ps));
    let spring = k
        * k
        * (ps2 * (g * gp - one + ps) * (g * (two * g + gp) + one + ps)
            + r2 * (-gs2
                + two * (g * gp2 * gp + one + two * g2 * (gp2 + one)) * ps
                + (two * (gp2 + one) - dd(3.0) * g2 - two * g * gp) * ps2
                - dd(4.0) * ps2 * ps)
            + r4 * r2 * (gp2 + two * (one - ps))
            + r4 * (gp2 * gp2 + two * gp2 - one - dd(4.0) * (gp2 + one) * ps
                + dd(5.0) * ps2
                + two * g * gp * (gp2 + two - ps)));
    let vpp = (measured - quadratic + spring) / (dd(8.0) * eta_c * r * g2 * den2);

    let corr = a * gs + k * (g * ps - (gs - r2 * gp));
    let vxp = corr * corr / (dd(8.0) * eta_c * g * den2);

    CovarianceMatrix::new(to_f64(vxx), to_f64(vpp), to_f64(vxp))
}

/// Leading high-Q form. The off-diagonal element carries the same prefactor
/// as the diagonal ones, which makes `det = n_tot / (eta C)` hold exactly.
pub fn covariance_high_q(p: &DimensionlessParams) -> CovarianceMatrix {
    let f = p.frequencies();
    let prefactor = dd(4.0) * f.n_tot * f.gamma / f.omega_meas4;
    let gamma_inf = (dd(2.0) * f.prime_sq_minus_one).sqrt();
    CovarianceMatrix::new(
        to_f64(prefactor * gamma_inf * f.r),
        to_f64(prefactor * gamma_inf * f.prime_sq / f.r),
        to_f64(prefactor * f.prime_sq_minus_one),
    )
}

/// Limit far outside the rotating-wave regime (`Omega_meas >> Omega_0`).
pub fn covariance_nonrwa_limit(p: &DimensionlessParams) -> CovarianceMatrix {
    let inv_purity = 1.0 / p.purity_bound();
    let s = std::f64::consts::SQRT_2;
    CovarianceMatrix::new(
        inv_purity * s * p.ratio() / p.omega_meas(),
        inv_purity * s * p.omega_meas() / p.ratio(),
        inv_purity,
    )
}

/// Limit deep inside the rotating-wave regime.
pub fn covariance_rwa_limit(p: &DimensionlessParams) -> CovarianceMatrix {
    let inv_purity = 1.0 / p.purity_bound();
    CovarianceMatrix::new(inv_purity * p.ratio(), inv_purity / p.ratio(), 0.0)
}

/// Minimum quadrature variance and its angle.
pub fn optimal_quadrature(v: &CovarianceMatrix) -> QuadratureResult {
    // adding +0.0 turns a negative zero into a positive one so that the
    // diagonal case with vxx > vpp lands on +pi/2
    let theta = 0.5 * (-2.0 * v.vxp + 0.0).atan2(v.vpp - v.vxx);
    let half_sum = 0.5 * (v.vxx + v.vpp);
    let radius = (0.25 * (v.vxx - v.vpp).powi(2) + v.vxp * v.vxp).sqrt();
    // det / v_max avoids cancellation for strongly squeezed states
    let v_min = v.det() / (half_sum + radius);
    QuadratureResult { theta, v_min }
}

/// Minimum variance with the correlation terms dropped, which is exact for
/// the far-non-RWA matrix.
pub fn min_variance_simplified(v: &CovarianceMatrix) -> f64 {
    0.5 * (v.vxx + v.vpp - v.vxx.hypot(v.vpp))
}

/// Strong-squeezing approximation `min(vxx, vpp) / 2`.
pub fn min_variance_strong(v: &CovarianceMatrix) -> f64 {
    0.5 * v.vxx.min(v.vpp)
}

/// Which filter coefficients feed the numeric integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterSource {
    /// Analytic coefficients.
    #[default]
    ClosedForm,
    /// Spectral factorization and causal-part extraction.
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    pub convention: CrossConvention,
    pub filters: FilterSource,
    pub rel_tol: f64,
    pub max_evaluations: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        Self {
            convention: CrossConvention::Symmetrized,
            filters: FilterSource::ClosedForm,
            rel_tol: 1e-10,
            max_evaluations: 4_000_000,
        }
    }
}

/// Diagnostics from the numeric integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericReport {
    pub covariance: CovarianceMatrix,
    /// Estimated absolute quadrature error per component (xx, pp, xp).
    pub error: [f64; 3],
    /// Analytic tail contribution beyond the last grid point.
    pub tail: [f64; 3],
    pub evaluations: usize,
}

/// Error-covariance integral for given position and momentum filters.
///
/// The error signals are split by noise source: the force noise reaches the
/// estimation error through `chi (1 - H_x)` and `chi (-i omega - H_p)`, the
/// imprecision through `chi (K + H_x chi0^{-1})` and
/// `chi (i omega K - H_p chi0^{-1})`. Each transfer function is rearranged
/// into a smooth part over `chi'^{-1}` plus a narrow resonant remainder so
/// that no large terms cancel in double precision.
pub fn covariance_with_filters(
    p: &DimensionlessParams,
    hx: &WienerFilter,
    hp: &WienerFilter,
    options: &NumericOptions,
) -> Result<NumericReport, ConditionalError> {
    let f = p.frequencies();
    let shifts = FilterShifts::new(&f, hx, hp);
    let model = Integrand {
        force: to_f64(dd(4.0) * f.n_tot * f.gamma),
        imprecision: to_f64(Quad::ONE / (dd(4.0) * f.eta_c * f.gamma)),
        k: p.gain(),
        r: p.ratio(),
        gamma: p.gamma(),
        prime: p.omega_prime(),
        gamma_prime: p.gamma_prime(),
        hx: *hx,
        hp: *hp,
        shifts,
        symmetrized: options.convention == CrossConvention::Symmetrized,
    };

    let top = 1e5 * p.ratio().max(p.omega_prime()).max(1.0);
    let points = breakpoints(p, top);
    let floor = model.scale_hint();
    let abs_tol = [1e-15 * floor[0], 1e-15 * floor[1], 1e-15 * (floor[0] * floor[1]).sqrt()];
    let res = quadrature::integrate(|w| model.eval(w), &points, options.rel_tol, abs_tol, options.max_evaluations);

    let end = model.eval(top);
    let tail: [f64; 3] = std::array::from_fn(|i| top * end[i]);
    // compare the 1/omega^2 tail estimate from half the cutoff against the
    // integral it should reproduce
    let half = model.eval(0.5 * top);
    let last = quadrature::integrate(|w| model.eval(w), &[0.5 * top, top], 1e-12, [0.0; 3], 20_000);
    let pi = std::f64::consts::PI;
    let mut v = [0.0; 3];
    for i in 0..3 {
        v[i] = (res.value[i] + tail[i]) / pi;
    }
    let scale = [v[0].abs(), v[1].abs(), (v[0] * v[1]).abs().sqrt()];
    const NAMES: [&str; 3] = ["vxx", "vpp", "vxp"];
    for i in 0..3 {
        let tail_mismatch = (0.5 * top * half[i] - last.value[i] - tail[i]).abs() / pi;
        if tail_mismatch > 1e-8 * scale[i] {
            return Err(ConditionalError::Accuracy {
                component: NAMES[i],
                error: res.error[i] / pi,
                tail: tail_mismatch,
            });
        }
        if !res.converged && res.error[i] / pi > 1e-7 * scale[i] {
            return Err(ConditionalError::Accuracy {
                component: NAMES[i],
                error: res.error[i] / pi,
                tail: tail_mismatch,
            });
        }
    }
    let r = p.ratio();
    Ok(NumericReport {
        covariance: CovarianceMatrix::new(v[0] * r, v[1] / r, v[2]),
        error: std::array::from_fn(|i| res.error[i] / pi),
        tail: std::array::from_fn(|i| tail[i] / pi),
        evaluations: res.evaluations,
    })
}

/// Independent numeric covariance built from the error spectra.
pub fn covariance_numeric(
    p: &DimensionlessParams,
    options: &NumericOptions,
) -> Result<CovarianceMatrix, ConditionalError> {
    let (hx, hp) = filters_for(p, options)?;
    Ok(covariance_with_filters(p, &hx, &hp, options)?.covariance)
}

/// Position and momentum filters selected by `options`.
pub fn filters_for(
    p: &DimensionlessParams,
    options: &NumericOptions,
) -> Result<(WienerFilter, WienerFilter), ConditionalError> {
    match (options.filters, options.convention) {
        (FilterSource::ClosedForm, CrossConvention::Symmetrized) => {
            Ok((WienerFilter::closed_form(p, Target::Position)?, WienerFilter::closed_form(p, Target::Momentum)?))
        }
        (_, convention) => {
            let generic = |t| -> Result<WienerFilter, ConditionalError> {
                wiener::filter_numeric(p, t, convention)?.second_order_form().ok_or(ConditionalError::FilterShape)
            };
            Ok((generic(Target::Position)?, generic(Target::Momentum)?))
        }
    }
}

/// Filter coefficient offsets from the values that cancel the loop
/// resonance, computed once per parameter point.
#[derive(Debug, Clone, Copy)]
struct FilterShifts {
    /// `Omega'^2 - A_x - Omega^2`
    ax: f64,
    /// `Gamma' - B_x - Gamma`
    bx: f64,
    /// `(Gamma' - Gamma) Omega^2 + A_p`
    ap: f64,
    /// `Omega'^2 - Omega^2 - B_p - Gamma (Gamma' - Gamma)`
    bp: f64,
}

impl FilterShifts {
    fn new(f: &crate::params::Frequencies, hx: &WienerFilter, hp: &WienerFilter) -> Self {
        let damping = f.gamma_prime - f.gamma;
        let spread = f.prime_sq - f.shifted_sq;
        Self {
            ax: to_f64(spread - dd(hx.a)),
            bx: to_f64(damping - dd(hx.b)),
            ap: to_f64(damping * f.shifted_sq + dd(hp.a)),
            bp: to_f64(spread - dd(hp.b) - f.gamma * damping),
        }
    }
}

struct Integrand {
    force: f64,
    imprecision: f64,
    k: f64,
    r: f64,
    gamma: f64,
    prime: f64,
    gamma_prime: f64,
    hx: WienerFilter,
    hp: WienerFilter,
    shifts: FilterShifts,
    symmetrized: bool,
}

impl Integrand {
    /// Rough magnitudes of the two diagonal integrals, for absolute tolerances.
    fn scale_hint(&self) -> [f64; 2] {
        let level = self.force.max(self.imprecision) / self.gamma_prime.max(self.gamma);
        [level / self.prime.powi(2), level]
    }

    fn eval(&self, w: f64) -> [f64; 3] {
        let loop_inv = Complex::new((self.r - w) * (self.r + w), -self.gamma * w);
        let prime_inv = Complex::new((self.prime - w) * (self.prime + w), -self.gamma_prime * w);
        let smooth = prime_inv.inv();
        let resonant = smooth / loop_inv;
        let s = &self.shifts;
        let (k, hx, hp) = (self.k, &self.hx, &self.hp);

        let dx = Complex::new(s.ax, -s.bx * w);
        let ux = smooth + dx * resonant;
        let vx = Complex::new(k + hx.a, -hx.b * w) * smooth + k * dx * resonant;
        let dp = Complex::new(s.ap, s.bp * w);
        let up = Complex::new(self.gamma_prime - self.gamma, -w) * smooth - dp * resonant;
        let vp = Complex::new(-hp.a - k * (self.gamma_prime - self.gamma), (hp.b + k) * w) * smooth + k * dp * resonant;

        let mut sxx = ux.norm_sqr() * self.force + vx.norm_sqr() * self.imprecision;
        let mut spp = up.norm_sqr() * self.force + vp.norm_sqr() * self.imprecision;
        let mut sxp = (ux * up.conj()).re * self.force - (vx * vp.conj()).re * self.imprecision;

        if self.symmetrized && k != 0.0 {
            // drop the quadrature (out-of-phase) part of the loop-imprecision
            // correlation from the estimator's view of the cross-spectrum
            let im_chi = self.gamma * w / loop_inv.norm_sqr();
            let hxw = hx.eval(w);
            let hpw = hp.eval(w);
            let c = k * im_chi * self.imprecision;
            sxx -= 2.0 * c * hxw.im;
            spp -= 2.0 * w * c * hpw.re;
            sxp -= c * (hpw.im + w * hxw.re);
        }
        [sxx, spp, sxp]
    }
}

fn breakpoints(p: &DimensionlessParams, top: f64) -> Vec<f64> {
    let mut pts = vec![0.0, top];
    let mut around = |center: f64, width: f64| {
        let mut k = 1.0;
        while k * width < 0.5 * center {
            pts.push(center - k * width);
            pts.push(center + k * width);
            k *= 3.0;
        }
        pts.push(center);
    };
    around(p.ratio(), p.gamma());
    around(p.omega_prime(), p.gamma_prime());
    let low = 1e-4 * p.ratio().min(p.omega_prime()).min(1.0);
    let mut w = low;
    while w < top {
        pts.push(w);
        w *= 10f64.powf(0.25);
    }
    pts.retain(|&x| x >= 0.0 && x <= top);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(eta: f64, c: f64, n: f64, q: f64, r: f64) -> DimensionlessParams {
        DimensionlessParams::new(eta, c, n, q, r).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // 50-digit evaluations of the closed form, frozen from an independent
    // arbitrary-precision implementation
    const REFERENCE: [([f64; 5], [f64; 3]); 7] = [
        ([1.0, 10.0, 5.0, 20.0, 1.0], [0.8927503944427776, 2.3556505193576744, 0.7970032667777349]),
        ([1.0, 10.0, 100.0, 1e4, 1.0], [3.299174579225747, 3.2994640364583105, 0.021769105808418773]),
        ([1.0, 1e3, 2e3, 1e5, 0.1], [0.17312822208978323, 17.353083605650653, 0.05993810694141474]),
        ([0.63, 1e4, 7.8e6, 1e6, 1.0], [32.57253218738527, 43.54555243913871, 13.368220149037946]),
        ([0.5, 0.3, 5.0, 1e2, 20.0], [145.40029895856512, 16.988720644716025, 0.12429280177486213]),
        ([0.9, 1e5, 1e3, 1e6, 0.05], [0.0520612193246441, 22.287429591181084, 0.19514616194648884]),
        ([1.0, 100.0, 2e3, 1e6, 10.0], [45.843699636097334, 0.47081276651204823, 0.004200997720246281]),
    ];

    #[test]
    fn closed_form_matches_reference() {
        for (x, v) in REFERENCE {
            let c = covariance_closed(&params(x[0], x[1], x[2], x[3], x[4])).unwrap();
            assert!(rel(c.vxx, v[0]) < 1e-12, "{x:?} vxx {} vs {}", c.vxx, v[0]);
            assert!(rel(c.vpp, v[1]) < 1e-12, "{x:?} vpp {} vs {}", c.vpp, v[1]);
            assert!(rel(c.vxp, v[2]) < 1e-12, "{x:?} vxp {} vs {}", c.vxp, v[2]);
        }
    }

    #[test]
    fn numeric_matches_closed_form_on_fixed_points() {
        for (x, v) in REFERENCE {
            let p = params(x[0], x[1], x[2], x[3], x[4]);
            let n = covariance_numeric(&p, &NumericOptions::default()).unwrap();
            let target = CovarianceMatrix::new(v[0], v[1], v[2]);
            assert!(target.max_relative_difference(&n) < 1e-7, "{x:?}: {n:?} vs {target:?}");
        }
    }

    // steady-state Kalman covariances from an independent Riccati solver,
    // with the loop's imprecision entering as correlated process noise
    const RICCATI: [([f64; 5], [f64; 3]); 4] = [
        ([1.0, 10.0, 5.0, 20.0, 0.5], [0.4463751972213892, 4.711301038715347, 0.7970032667777349]),
        ([0.8, 40.0, 70.0, 1e3, 0.4], [0.7350543442408132, 4.721719062270775, 0.2161219555949208]),
        ([0.6, 3.0, 2.0, 50.0, 2.5], [4.00300826230396, 0.6589833866236572, 0.18459734570580666]),
        ([1.0, 1e4, 0.0, 1e4, 1.0], [0.6247952385212839, 2.5760793023166064, 0.7807381801577363]),
    ];

    #[test]
    fn exact_convention_matches_kalman_filter() {
        let options = NumericOptions { convention: CrossConvention::Exact, ..Default::default() };
        for (x, v) in RICCATI {
            let p = params(x[0], x[1], x[2], x[3], x[4]);
            let n = covariance_numeric(&p, &options).unwrap();
            let target = CovarianceMatrix::new(v[0], v[1], v[2]);
            assert!(target.max_relative_difference(&n) < 1e-7, "{x:?}: {n:?} vs {target:?}");
        }
    }

    #[test]
    fn exact_convention_gives_smaller_position_error() {
        let p = params(1.0, 10.0, 5.0, 20.0, 0.5);
        let exact =
            covariance_numeric(&p, &NumericOptions { convention: CrossConvention::Exact, ..Default::default() })
                .unwrap();
        let sym = covariance_numeric(&p, &NumericOptions::default()).unwrap();
        assert!(exact.vxx < sym.vxx);
    }

    #[test]
    fn generic_filters_reproduce_closed_form_integral() {
        let p = params(0.8, 40.0, 70.0, 1e3, 0.4);
        let a = covariance_numeric(&p, &NumericOptions::default()).unwrap();
        let b =
            covariance_numeric(&p, &NumericOptions { filters: FilterSource::Generic, ..Default::default() }).unwrap();
        assert!(a.max_relative_difference(&b) < 1e-8);
    }

    #[test]
    fn tail_correction_matches_decay() {
        let p = params(1.0, 10.0, 100.0, 1e3, 2.0);
        let (hx, hp) = filters_for(&p, &NumericOptions::default()).unwrap();
        let r = covariance_with_filters(&p, &hx, &hp, &NumericOptions::default()).unwrap();
        // the tail is a small positive correction for the diagonal terms
        assert!(r.tail[0] > 0.0 && r.tail[1] > 0.0);
        assert!(r.tail[1] < 1e-3 * r.covariance.vpp * p.ratio());
    }

    #[test]
    fn optimal_filters_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let options = NumericOptions { convention: CrossConvention::Exact, ..Default::default() };
        for _ in 0..4 {
            let p = params(
                rng.random_range(0.3..1.0),
                10f64.powf(rng.random_range(0.0..3.0)),
                10f64.powf(rng.random_range(0.0..3.0)),
                10f64.powf(rng.random_range(2.0..4.0)),
                10f64.powf(rng.random_range(-1.0..1.0)),
            );
            let (hx, hp) = filters_for(&p, &options).unwrap();
            let base = covariance_with_filters(&p, &hx, &hp, &options).unwrap().covariance;
            for (da, db) in [(0.01, 0.0), (-0.01, 0.0), (0.0, 0.01), (0.0, -0.01)] {
                let hx2 = hx.with_coefficients(hx.a * (1.0 + da), hx.b * (1.0 + db));
                let hp2 = hp.with_coefficients(hp.a * (1.0 + da), hp.b * (1.0 + db));
                let v = covariance_with_filters(&p, &hx2, &hp2, &options).unwrap().covariance;
                assert!(v.vxx >= base.vxx * (1.0 - 1e-10), "{p:?} x {da} {db}");
                assert!(v.vpp >= base.vpp * (1.0 - 1e-10), "{p:?} p {da} {db}");
            }
        }
    }

    #[test]
    fn high_q_form_identities() {
        let p = params(0.7, 300.0, 1e3, 1e6, 0.3);
        let v = covariance_high_q(&p);
        assert!(rel(v.det(), p.n_tot() / (p.eta() * p.cooperativity())) < 1e-9);
        let weak = params(1.0, 1e-12, 1.0, 1e6, 1.0);
        let w = covariance_high_q(&weak);
        assert!(w.vxp / (w.vxx * w.vpp).sqrt() < 1e-5);
    }

    #[test]
    fn limits_algebra() {
        let p = params(1.0, 1e6, 1.0, 1e4, 1.0);
        let s8 = covariance_nonrwa_limit(&p);
        assert!(rel(s8.det(), 1.0 / p.purity_bound().powi(2)) < 1e-12);
        let r = covariance_rwa_limit(&p.with_ratio(0.2).unwrap());
        assert!(rel(r.vxx * r.vpp, 1.0 / p.purity_bound().powi(2)) < 1e-12);
        assert_eq!(r.vxp, 0.0);
    }

    #[test]
    fn nonrwa_boundary_at_sqrt_two() {
        // eta C = n_tot makes the state pure; Omega = Omega_meas / sqrt 2 puts
        // the position variance exactly at the zero-point level
        let p = params(1.0, 1e8, 0.0, 1e2, 1.0);
        let r = p.omega_meas() / std::f64::consts::SQRT_2;
        let v = covariance_nonrwa_limit(&p.with_ratio(r).unwrap());
        assert!(rel(v.vxx, 1.0 / p.purity_bound()) < 1e-12);
    }

    #[test]
    fn quadrature_cases() {
        let d = optimal_quadrature(&CovarianceMatrix::new(0.5, 2.0, 0.0));
        assert_eq!(d.theta, 0.0);
        assert!(rel(d.v_min, 0.5) < 1e-15);
        let d = optimal_quadrature(&CovarianceMatrix::new(2.0, 0.5, 0.0));
        assert_eq!(d.theta, std::f64::consts::FRAC_PI_2);
        assert!(rel(d.v_min, 0.5) < 1e-15);
        let e = optimal_quadrature(&CovarianceMatrix::new(1.3, 1.3, 0.4));
        assert!((e.theta + std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        // strong-measurement matrix with unit purity at Omega = Omega_meas: [[sqrt2, 1], [1, sqrt2]]
        let s = std::f64::consts::SQRT_2;
        let m = CovarianceMatrix::new(s, s, 1.0);
        assert!(rel(optimal_quadrature(&m).v_min, s - 1.0) < 1e-14);
    }

    #[test]
    fn angle_matches_nonrwa_formula() {
        // the arctangent form fixes the angle only modulo pi/2; above the
        // measurement frequency it points at the anti-squeezed quadrature
        let s = std::f64::consts::SQRT_2;
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (wm, w) in [(40.0, 3.0), (40.0, 50.0), (100.0, 1.0), (10.0, 30.0)] {
            let v = CovarianceMatrix::new(s * w / wm, s * wm / w, 1.0);
            let q = optimal_quadrature(&v);
            let expected = -(s / (wm / w - w / wm)).atan() / 2.0;
            let offset = if w < wm { 0.0 } else { -half_pi };
            assert!((q.theta - expected - offset).abs() < 1e-12, "{} vs {expected}", q.theta);
            let (c, sn) = (q.theta.cos(), q.theta.sin());
            let along = v.vxx * c * c + v.vpp * sn * sn + 2.0 * v.vxp * sn * c;
            assert!(rel(along, q.v_min) < 1e-12);
        }
    }

    #[test]
    fn strong_squeezing_taylor_form() {
        let p = params(1.0, 1e10, 0.0, 1e2, 0.01);
        let v = covariance_nonrwa_limit(&p);
        let min = v.vxx.min(v.vpp);
        assert!(min < 0.05);
        let exact = optimal_quadrature(&v).v_min;
        assert!(rel(min_variance_strong(&v), min_variance_simplified(&v)) < 0.1);
        assert!(exact <= min);
    }

    #[test]
    fn fig2_purity_value() {
        let p = params(1.0, 100.0, 2e3, 1e6, 1.0);
        assert!(rel(p.purity_bound(), (100.0f64 / 2100.5).sqrt()) < 1e-14);
    }

    #[test]
    fn weaker_detection_lowers_purity_bound() {
        let p = params(1.0, 50.0, 10.0, 1e3, 1.0);
        let q = p.with_eta(0.5).unwrap();
        assert!(rel(q.purity_bound() / p.purity_bound(), 0.5f64.sqrt()) < 1e-14);
    }

    #[test]
    fn unphysical_matrix_rejected() {
        assert!(CovarianceMatrix::new(0.5, 0.5, 0.0).purity(1e-6).is_err());
        assert!(rel(CovarianceMatrix::new(2.0, 2.0, 0.0).purity(1e-6).unwrap(), 0.5) < 1e-15);
    }

    #[test]
    fn random_suite_numeric_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..12 {
            let p = params(
                rng.random_range(0.3..1.0),
                10f64.powf(rng.random_range(-1.0..5.0)),
                10f64.powf(rng.random_range(0.0..7.0)),
                10f64.powf(rng.random_range(2.0..6.0)),
                10f64.powf(rng.random_range(0.05f64.log10()..20f64.log10())),
            );
            let c = covariance_closed(&p).unwrap();
            let n = covariance_numeric(&p, &NumericOptions::default()).unwrap();
            assert!(c.max_relative_difference(&n) < 1e-6, "{p:?}: {c:?} vs {n:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn quadrature_invariants(vxx in 0.01f64..100.0, vpp in 0.01f64..100.0, t in -0.99f64..0.99) {
            let vxp = t * (vxx * vpp).sqrt();
            let q = optimal_quadrature(&CovarianceMatrix::new(vxx, vpp, vxp));
            prop_assert!(q.v_min <= vxx.min(vpp) * (1.0 + 1e-12));
            prop_assert!(q.theta > -std::f64::consts::FRAC_PI_2 && q.theta <= std::f64::consts::FRAC_PI_2);
            let (c, s) = (q.theta.cos(), q.theta.sin());
            let v = vxx * c * c + vpp * s * s + 2.0 * vxp * s * c;
            prop_assert!((v - q.v_min).abs() <= 1e-9 * vxx.max(vpp));
        }

        #[test]
        fn closed_form_is_positive(
            eta in 0.3f64..1.0, lc in -1.0f64..5.0, ln in 0.0f64..7.0, lq in 2.0f64..6.0, lr in -1.3f64..1.3,
        ) {
            let p = params(eta, 10f64.powf(lc), 10f64.powf(ln), 10f64.powf(lq), 10f64.powf(lr));
            let v = closed_terms(&p);
            prop_assert!(v.vxx > 0.0 && v.vpp > 0.0);
            let h = covariance_high_q(&p);
            prop_assert!((h.det() * p.eta() * p.cooperativity() / p.n_tot() - 1.0).abs() < 1e-9);
        }
    }
}
