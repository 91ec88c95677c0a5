//! Dense polynomials with double-double coefficients, stored in ascending
//! powers, and their roots.

use nalgebra::DMatrix;
use num_complex::Complex;
use qd::Quad;
use thiserror::Error;

use super::dd::{cabs, cdd, cdd_re, to_f64, Cdd};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("root polishing did not converge (worst relative residual {residual:e})")]
    NoConvergence { residual: f64 },
}

pub(crate) fn trim(coeffs: &[Quad]) -> &[Quad] {
    let mut n = coeffs.len();
    while n > 0 && coeffs[n - 1].0 == 0.0 && coeffs[n - 1].1 == 0.0 {
        n -= 1;
    }
    &coeffs[..n]
}

pub(crate) fn eval_real(coeffs: &[Quad], x: Quad) -> Quad {
    coeffs.iter().rev().fold(Quad::ZERO, |acc, &c| acc * x + c)
}

pub(crate) fn eval_real_at(coeffs: &[Quad], z: Cdd) -> Cdd {
    coeffs.iter().rev().fold(cdd_re(Quad::ZERO), |acc, &c| acc * z + cdd_re(c))
}

pub(crate) fn eval_complex(coeffs: &[Cdd], z: Cdd) -> Cdd {
    coeffs.iter().rev().fold(cdd_re(Quad::ZERO), |acc, &c| acc * z + c)
}

pub(crate) fn mul_real(a: &[Quad], b: &[Quad]) -> Vec<Quad> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Quad::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn add_real(a: &[Quad], b: &[Quad]) -> Vec<Quad> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(Quad::ZERO) + b.get(i).copied().unwrap_or(Quad::ZERO)).collect()
}

pub(crate) fn mul_complex(a: &[Cdd], b: &[Cdd]) -> Vec<Cdd> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![cdd_re(Quad::ZERO); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given roots.
pub(crate) fn from_roots(roots: &[Cdd]) -> Vec<Cdd> {
    roots.iter().fold(vec![cdd_re(Quad::ONE)], |acc, &r| mul_complex(&acc, &[-r, cdd_re(Quad::ONE)]))
}

/// Ascending real part, then ascending imaginary part.
pub(crate) fn sort_roots(roots: &mut [Cdd]) {
    roots.sort_by(|a, b| {
        let key = |z: &Cdd| (to_f64(z.re), to_f64(z.im));
        let ((ar, ai), (br, bi)) = (key(a), key(b));
        ar.total_cmp(&br).then(ai.total_cmp(&bi))
    });
}

fn companion_guesses(monic: &[f64]) -> Vec<Complex<f64>> {
    let n = monic.len() - 1;
    if n == 1 {
        return vec![Complex::new(-monic[0], 0.0)];
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic[i];
    }
    m.complex_eigenvalues().iter().copied().collect()
}

fn fallback_guesses(monic: &[f64]) -> Vec<Complex<f64>> {
    let n = monic.len() - 1;
    let radius = monic[..n].iter().map(|c| c.abs()).fold(1.0_f64, f64::max);
    let seed = Complex::new(0.4, 0.9);
    (0..n).map(|k| seed.powu(k as u32 + 1) * radius).collect()
}

/// Roots of a real polynomial (ascending coefficients).
///
/// Companion-matrix eigenvalues in double precision seed a simultaneous
/// Weierstrass iteration carried out in double-double arithmetic. The
/// returned roots are sorted by ascending real then imaginary part.
pub(crate) fn roots(coeffs: &[Quad]) -> Result<Vec<Cdd>, RootError> {
    let coeffs = trim(coeffs);
    if coeffs.is_empty() {
        return Err(RootError::ZeroPolynomial);
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let monic: Vec<Quad> = coeffs.iter().map(|&c| c / lead).collect();
    let monic_f: Vec<f64> = monic.iter().map(|&c| to_f64(c)).collect();

    let mut guesses = companion_guesses(&monic_f);
    if guesses.len() != n || guesses.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        guesses = fallback_guesses(&monic_f);
    }
    let mut z: Vec<Cdd> = guesses.into_iter().map(cdd).collect();
    separate_coincident(&mut z);

    let magnitude = |z: &[Cdd]| z.iter().map(|r| to_f64(cabs(*r))).fold(0.0_f64, f64::max);
    for _ in 0..500 {
        let scale_floor = 1e-20 * magnitude(&z).max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..n {
            let num = eval_real_at(&monic, z[i]);
            let mut den = cdd_re(Quad::ONE);
            for j in 0..n {
                if j != i {
                    den *= z[i] - z[j];
                }
            }
            if to_f64(cabs(den)) == 0.0 {
                z[i] = z[i] + cdd(Complex::new(1e-12, 1e-12) * (1.0 + to_f64(cabs(z[i]))));
                worst = f64::INFINITY;
                continue;
            }
            let step = num / den;
            z[i] -= step;
            let rel = to_f64(cabs(step)) / to_f64(cabs(z[i])).max(scale_floor);
            worst = worst.max(rel);
        }
        if worst < 1e-30 {
            break;
        }
    }

    let residual = worst_residual(&monic, &z);
    if !(residual < 1e-24) {
        return Err(RootError::NoConvergence { residual });
    }
    sort_roots(&mut z);
    Ok(z)
}

fn separate_coincident(z: &mut [Cdd]) {
    for i in 0..z.len() {
        for j in 0..i {
            let gap = to_f64(cabs(z[i] - z[j]));
            if gap <= 1e-14 * (1.0 + to_f64(cabs(z[i]))) {
                let nudge = 1e-7 * (1.0 + to_f64(cabs(z[i])));
                z[i] += cdd(Complex::new(nudge * 0.6, nudge * 0.8));
            }
        }
    }
}

/// Largest |p(z)| relative to the sum of |c_k z^k| over the roots.
pub(crate) fn worst_residual(monic: &[Quad], z: &[Cdd]) -> f64 {
    z.iter()
        .map(|&r| {
            let value = to_f64(cabs(eval_real_at(monic, r)));
            let rabs = to_f64(cabs(r));
            let bound: f64 = monic.iter().enumerate().map(|(k, c)| to_f64(c.abs()) * rabs.powi(k as i32)).sum();
            if bound == 0.0 {
                0.0
            } else {
                value / bound
            }
        })
        .fold(0.0_f64, f64::max)
}

/// Convenience for building polynomials from f64 literals.
#[cfg(test)]
pub(crate) fn real_poly(c: &[f64]) -> Vec<Quad> {
    c.iter().map(|&x| super::dd::dd(x)).collect()
}
