//! Numerical building blocks: log-space helpers, the exponential integral,
//! adaptive Gauss–Kronrod quadrature and safeguarded root inversion.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub use statrs::function::gamma::{digamma, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln(k!)`.
pub fn ln_factorial(k: usize) -> f64 {
    if k <= 20 {
        (2..=k).map(|j| (j as f64).ln()).sum()
    } else {
        ln_gamma(k as f64 + 1.0)
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0, got {x}");
    if x <= 1.0 {
        // Power series: -γ - ln x - Σ (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Continued fraction, modified Lentz.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// A numerical value with an estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

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
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive Gauss–Kronrod (7/15) quadrature of `f` over the finite interval
/// `[a, b]`. Stops when the summed error estimate falls below
/// `max(abs_tol, rel_tol * |I|)`; endpoints are never evaluated.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    const MAX_SEGMENTS: usize = 2000;
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b);
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature {
                achieved: error,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval below floating point resolution.
            return Err(Error::Quadrature {
                achieved: error,
                requested: abs_tol.max(rel_tol * total.abs()),
            });
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    if !f64::is_finite(value) {
        return Err(Error::Divergent("integrand produced a non-finite value".into()));
    }
    Ok(Estimate { value, error })
}

/// Solves `g(x) = target` for a strictly decreasing `g` on `(lo, hi)` using
/// Newton steps safeguarded by bisection. `dg` is the derivative of `g`.
pub fn invert_decreasing(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(g(lo) >= target && g(hi) <= target) {
        return Err(Error::Bracket(format!(
            "target {target} not within [g({hi:e}), g({lo:e})] = [{}, {}]",
            g(hi),
            g(lo)
        )));
    }
    // Bisect in log space first when the bracket spans many decades.
    let mut x = (lo * hi).sqrt();
    for _ in 0..400 {
        let gx = g(x) - target;
        if gx == 0.0 {
            return Ok(x);
        }
        if gx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if (hi - lo) <= rel_tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let d = dg(x);
        let newton = x - gx / d;
        if d < 0.0 && (newton - x).abs() <= rel_tol * x.abs() && newton > lo && newton < hi {
            return Ok(newton);
        }
        x = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // Reference values from Abramowitz & Stegun table 5.1.
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((exp_integral_e1(0.5) - 0.559_773_594_776_160_8).abs() < 1e-14);
        assert!((exp_integral_e1(2.0) - 0.048_900_510_708_061_16).abs() < 1e-15);
        assert!((exp_integral_e1(10.0) - 4.156_968_929_685_324e-6).abs() < 1e-18);
    }

    #[test]
    fn e1_matches_quadrature() {
        for &x in &[1e-6, 0.01, 0.3, 0.99, 1.01, 3.7, 25.0] {
            // ∫_x^∞ e^{-t}/t dt with t = x / u, u in (0, 1].
            let q = integrate(|u| (-x / u).exp() / u, 0.0, 1.0, 1e-16, 1e-13).unwrap();
            let e = exp_integral_e1(x);
            assert!((q.value - e).abs() <= 1e-11 * e, "x={x}: {} vs {e}", q.value);
        }
    }

    #[test]
    fn quadrature_polynomial_and_singular() {
        let q = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14).unwrap();
        assert!((q.value - 9.0).abs() < 1e-12);
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-10).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quadrature_reports_failure() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-12, 1e-12);
        assert!(r.is_err());
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn inversion_recovers_root() {
        let x = invert_decreasing(|x| (-x).exp(), |x| -(-x).exp(), 0.25, 1e-10, 100.0, 1e-14)
            .unwrap();
        assert!((x - 4f64.ln()).abs() < 1e-12);
        assert!(invert_decreasing(|x| (-x).exp(), |x| -(-x).exp(), 2.0, 1e-10, 100.0, 1e-14).is_err());
    }
}
