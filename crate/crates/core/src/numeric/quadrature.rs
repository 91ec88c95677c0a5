//! Globally adaptive Gauss-Kronrod (7/15) quadrature for several integrands
//! sharing one set of abscissae.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub evaluations: usize,
    pub converged: bool,
}

fn kronrod<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64) -> ([f64; N], [f64; N]) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = [0.0; N];
    for i in 0..N {
        k[i] *= h;
        err[i] = (k[i] - g[i] * h).abs();
    }
    (k, err)
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

/// Integrates `f` over consecutive intervals `[points[i], points[i+1]]`.
///
/// Stops once every component satisfies `error <= rel_tol * |value| + abs_tol[i]`
/// or the evaluation budget is spent.
pub(crate) fn integrate<const N: usize, F>(
    f: F,
    points: &[f64],
    rel_tol: f64,
    abs_tol: [f64; N],
    max_evaluations: usize,
) -> QuadResult<N>
where
    F: Fn(f64) -> [f64; N],
{
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut raw = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (v, e) = kronrod(&f, w[0], w[1]);
            evaluations += 15;
            raw.push((w[0], w[1], v, e));
        }
    }
    let mut scale = [0.0; N];
    for (_, _, v, _) in &raw {
        for i in 0..N {
            scale[i] += v[i].abs();
        }
    }
    let weight = |e: &[f64; N]| -> f64 {
        (0..N).map(|i| e[i] / (rel_tol * scale[i] + abs_tol[i]).max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
    };
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];
    for (a, b, v, e) in raw {
        for i in 0..N {
            total[i] += v[i];
            total_err[i] += e[i];
        }
        heap.push(Segment { a, b, value: v, error: e, priority: weight(&e) });
    }

    let done = |t: &[f64; N], e: &[f64; N]| (0..N).all(|i| e[i] <= rel_tol * t[i].abs() + abs_tol[i]);
    let mut converged = done(&total, &total_err);
    while !converged && evaluations + 30 <= max_evaluations {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            heap.push(Segment { priority: 0.0, ..seg });
            continue;
        }
        let (v1, e1) = kronrod(&f, seg.a, mid);
        let (v2, e2) = kronrod(&f, mid, seg.b);
        evaluations += 30;
        for i in 0..N {
            total[i] += v1[i] + v2[i] - seg.value[i];
            total_err[i] += e1[i] + e2[i] - seg.error[i];
        }
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1, priority: weight(&e1) });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2, priority: weight(&e2) });
        converged = done(&total, &total_err);
    }

    // Re-sum from the segments to shed accumulated update round-off.
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for seg in heap.iter() {
        for i in 0..N {
            value[i] += seg.value[i];
            error[i] += seg.error[i];
        }
    }
    QuadResult { value, error, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| [x.powi(5), 1.0], &[0.0, 2.0], 1e-14, [0.0; 2], 1000);
        assert!((r.value[0] - 64.0 / 6.0).abs() < 1e-12);
        assert!((r.value[1] - 2.0).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn sharp_lorentzian() {
        let g: f64 = 1e-6;
        let f = |x: f64| [g / ((x - 1.0).powi(2) + g * g)];
        let r = integrate(f, &[0.0, 1.0 - 1e-3, 1.0, 1.0 + 1e-3, 2.0], 1e-11, [0.0], 200_000);
        let exact = 2.0 * (1.0 / g).atan();
        assert!(r.converged);
        assert!((r.value[0] - exact).abs() < 1e-9 * exact, "{} vs {}", r.value[0], exact);
    }
}
