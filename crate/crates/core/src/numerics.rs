//! Small numerical kernels shared by the channel and BER models.
//!
//! - [`q_function`]: Gaussian tail probability.
//! - [`GaussHermite`]: Gauss–Hermite rules and lognormal expectations.
//! - [`integrate`]: adaptive Gauss–Kronrod (7/15) over a finite interval.

use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Below this the Gaussian-approximation error probabilities carry no meaning.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Standard Gaussian tail `Q(x) = P(Z > x)`, evaluated through `erfc` so the
/// upper tail keeps full relative accuracy.
pub fn q_function(x: f64) -> f64 {
    let q = 0.5 * libm::erfc(x / SQRT_2);
    if q < PROBABILITY_FLOOR {
        0.0
    } else {
        q
    }
}

/// Gauss–Hermite rule for the weight `exp(-x^2)` on the real line.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule. Roots are bracketed by sign changes of the
    /// orthonormal Hermite function on a fine grid, then polished by
    /// safeguarded Newton steps.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("nodes", "need at least one node"));
        }
        let half = n / 2;
        let mut positive = Vec::with_capacity(half);
        let edge = (2.0 * n as f64 + 1.0).sqrt();
        // the closest roots sit about pi / sqrt(2n + 1) apart
        let step = 0.1 * PI / edge;
        let mut lo = if n % 2 == 1 { step * 0.5 } else { 0.0 };
        let (mut f_lo, _) = hermite_function(n, lo);
        while positive.len() < half {
            let hi = lo + step;
            if hi > edge + 1.0 {
                return Err(Error::IntegrationFailure {
                    estimate: f64::NAN,
                    tolerance: 0.0,
                });
            }
            let (f_hi, _) = hermite_function(n, hi);
            if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
                positive.push(polish_root(n, lo, hi));
            }
            lo = hi;
            f_lo = f_hi;
        }
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let weight_at = |x: f64| {
            let (_, prev) = hermite_function(n, x);
            (-x * x - (n as f64 * prev * prev).ln()).exp()
        };
        for &x in positive.iter().rev() {
            nodes.push(-x);
            weights.push(weight_at(x));
        }
        if n % 2 == 1 {
            nodes.push(0.0);
            weights.push(weight_at(0.0));
        }
        for &x in &positive {
            nodes.push(x);
            weights.push(weight_at(x));
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and probability weights (summing to one) for `exp(2X)` with
    /// `X ~ Normal(mean, variance)`. Zero variance collapses to one atom.
    pub fn lognormal_atoms(&self, mean: f64, variance: f64) -> Vec<(f64, f64)> {
        if variance <= 0.0 {
            return vec![((2.0 * mean).exp(), 1.0)];
        }
        let scale = (2.0 * variance).sqrt();
        let norm = PI.sqrt().recip();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| ((2.0 * (mean + scale * x)).exp(), w * norm))
            .collect()
    }

    /// `E[f(exp(2X))]` for `X ~ Normal(mean, variance)`.
    pub fn expect_lognormal(&self, mean: f64, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.lognormal_atoms(mean, variance)
            .into_iter()
            .map(|(h, w)| w * f(h))
            .sum()
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

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
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Orthonormal Hermite functions `psi_n(x)` and `psi_{n-1}(x)`, i.e. the
/// orthonormal polynomials times `exp(-x^2/2)`, which stay bounded.
fn hermite_function(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    let mut p0 = 0.0;
    for j in 0..n {
        let jf = j as f64;
        let next = x * (2.0 / (jf + 1.0)).sqrt() * p1 - (jf / (jf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = next;
    }
    (p1, p0)
}

fn polish_root(n: usize, mut lo: f64, mut hi: f64) -> f64 {
    let (f_lo, _) = hermite_function(n, lo);
    if f_lo == 0.0 {
        return lo;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (p, prev) = hermite_function(n, x);
        if p == 0.0 {
            return x;
        }
        if p.signum() == f_lo.signum() {
            lo = x;
        } else {
            hi = x;
        }
        // derivative of the polynomial part; the Gaussian factor cancels in p/p'
        let dp = (2.0 * n as f64).sqrt() * prev - x * p;
        let mut next = x - p / dp;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`, bisecting the
/// worst segment until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_segments: usize,
) -> Result<Integral> {
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= max_segments {
            let estimate = if total == 0.0 {
                f64::INFINITY
            } else {
                total_err / total.abs()
            };
            return Err(Error::IntegrationFailure {
                estimate,
                tolerance: rel_tol,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // re-sum from the segments to shed drift from the running updates
    let mut segments: Vec<Segment> = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = pairwise_sum(&segments.iter().map(|s| s.value).collect::<Vec<_>>());
    let error = segments.iter().map(|s| s.error).sum();
    Ok(Integral { value, error })
}

/// Pairwise summation; the reduction tree depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// `ln(n!)` by direct summation; only used for small counts.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
