use num_complex::Complex;
use qd::Quad;

/// Complex double-double.
pub(crate) type Cdd = Complex<Quad>;

#[inline]
pub(crate) fn dd(x: f64) -> Quad {
    Quad::from(x)
}

#[inline]
pub(crate) fn to_f64(x: Quad) -> f64 {
    x.0 + x.1
}

#[inline]
pub(crate) fn cdd(z: Complex<f64>) -> Cdd {
    Complex::new(dd(z.re), dd(z.im))
}

#[inline]
pub(crate) fn cdd_re(x: Quad) -> Cdd {
    Complex::new(x, Quad::ZERO)
}

#[inline]
pub(crate) fn to_c64(z: Cdd) -> Complex<f64> {
    Complex::new(to_f64(z.re), to_f64(z.im))
}

pub(crate) fn cabs(z: Cdd) -> Quad {
    let (a, b) = (z.re.abs(), z.im.abs());
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    if big.0 == 0.0 {
        return Quad::ZERO;
    }
    let r = small / big;
    big * (Quad::ONE + r * r).sqrt()
}

/// Principal square root.
pub(crate) fn csqrt(z: Cdd) -> Cdd {
    let r = cabs(z);
    if r.0 == 0.0 {
        return cdd_re(Quad::ZERO);
    }
    let half = dd(0.5);
    if z.re.0 >= 0.0 {
        let t = ((r + z.re) * half).sqrt();
        Complex::new(t, z.im / (t * dd(2.0)))
    } else {
        let t = ((r - z.re) * half).sqrt();
        let re = z.im.abs() / (t * dd(2.0));
        let im = if z.im.0 < 0.0 { -t } else { t };
        Complex::new(re, im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_keeps_low_word() {
        let third = Quad::ONE / dd(3.0);
        assert!(third.1 != 0.0);
        assert!(to_f64((third * dd(3.0) - Quad::ONE).abs()) < 1e-31);
    }

    #[test]
    fn complex_sqrt_branches() {
        for &(re, im) in &[(4.0, 0.0), (-4.0, 0.0), (-4.0, -1e-20), (3.0, 4.0), (-3.0, -4.0), (0.0, 2.0)] {
            let z = Complex::new(dd(re), dd(im));
            let s = csqrt(z);
            let back = s * s - z;
            assert!(to_f64(cabs(back)) < 1e-30 * (1.0 + to_f64(cabs(z))), "{re} {im}");
            assert!(s.re.0 >= 0.0);
        }
        let s = csqrt(Complex::new(dd(-4.0), dd(-1e-20)));
        assert!(s.im.0 < 0.0);
    }
}
