//! Adaptive Gauss–Kronrod (7, 15) quadrature for small vector integrands.

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Kronrod panel: the 15-point estimate and `|K15 − G7|` (max norm).
pub fn gk15<const N: usize>(f: &mut impl FnMut(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = [0.0; N];
    let mut gauss = [0.0; N];
    let fc = f(center);
    for k in 0..N {
        kronrod[k] = WGK[7] * fc[k];
        gauss[k] = WG[3] * fc[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kronrod[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0_f64;
    for k in 0..N {
        kronrod[k] *= half;
        gauss[k] *= half;
        err = err.max((kronrod[k] - gauss[k]).abs());
    }
    (kronrod, err)
}

/// A subinterval of an adaptive integration with its local estimate.
#[derive(Clone, Copy, Debug)]
pub struct Panel<const N: usize> {
    pub a: f64,
    pub b: f64,
    pub value: [f64; N],
    pub error: f64,
}

struct Ranked<const N: usize>(Panel<N>);

impl<const N: usize> PartialEq for Ranked<N> {
    fn eq(&self, other: &Self) -> bool {
        self.0.error.total_cmp(&other.0.error) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Ranked<N> {}
impl<const N: usize> PartialOrd for Ranked<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Ranked<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Debug)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    pub error: f64,
    pub converged: bool,
    /// Final partition, sorted by position.
    pub panels: Vec<Panel<N>>,
}

/// Globally adaptive bisection until the summed error estimate is below
/// `tol` or `max_panels` panels are in use.
pub fn integrate<const N: usize>(
    mut f: impl FnMut(f64) -> [f64; N],
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Integral<N> {
    let mut heap = BinaryHeap::new();
    let (value, error) = gk15(&mut f, a, b);
    heap.push(Ranked(Panel { a, b, value, error }));
    let mut total_error = error;
    while total_error > tol && heap.len() < max_panels {
        let Ranked(worst) = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(Ranked(worst));
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        total_error += le + re - worst.error;
        heap.push(Ranked(Panel { a: worst.a, b: mid, value: lv, error: le }));
        heap.push(Ranked(Panel { a: mid, b: worst.b, value: rv, error: re }));
    }
    let mut panels: Vec<Panel<N>> = heap.into_iter().map(|r| r.0).collect();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = [0.0; N];
    let mut error = 0.0;
    for p in &panels {
        for k in 0..N {
            value[k] += p.value[k];
        }
        error += p.error;
    }
    Integral {
        value,
        error,
        converged: error <= tol,
        panels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact_on_one_panel() {
        let (v, e) = gk15(&mut |x: f64| [x.powi(10)], 0.0, 1.0);
        assert!((v[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!(e < 1e-6);
    }

    #[test]
    fn adaptive_log_integral() {
        let r = integrate(|x: f64| [1.0 / x, 1.0], 0.01, 10.0, 1e-13, 1000);
        assert!(r.converged);
        assert!((r.value[0] - (1000.0f64).ln()).abs() < 1e-12);
        assert!((r.value[1] - 9.99).abs() < 1e-12);
    }
}
