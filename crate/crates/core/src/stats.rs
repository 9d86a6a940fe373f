//! Monte Carlo summaries, the two-sample Kolmogorov–Smirnov test and Halton
//! sequences.

use serde::Serialize;

use crate::{Error, Result};

pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Summary statistics of a sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// `(level, value)` pairs for [`QUANTILE_LEVELS`].
    pub quantiles: Vec<(f64, f64)>,
    pub min: f64,
    pub max: f64,
}

/// Mean and variance by Welford's recurrence, quantiles by linear
/// interpolation between order statistics.
pub fn summarize(samples: &[f64]) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = samples.len();
    let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles = QUANTILE_LEVELS.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect();
    Ok(Summary {
        n,
        mean,
        variance,
        std_error: (variance / n as f64).sqrt(),
        quantiles,
        min: sorted[0],
        max: sorted[n - 1],
    })
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pairwise summation: deterministic and accurate for long vectors.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let s = summarize(samples)?;
        Ok(Self {
            value: mean(samples),
            std_error: s.std_error,
        })
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Outcome of a two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub level: f64,
    pub pass: bool,
}

/// `c(level)` with critical distance `c · sqrt((n + m) / (n m))`.
pub fn ks_coefficient(level: f64) -> f64 {
    (-(0.5 * level).ln() / 2.0).sqrt()
}

/// Asymptotic Kolmogorov tail probability `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS test. Ties are handled by stepping over equal values, and
/// infinities (for example censored or absorbed samples) are allowed.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("KS samples must not contain NaN".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0_f64;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let scale = (n * m / (n + m)).sqrt();
    let critical = ks_coefficient(level) / scale;
    let lambda = (scale + 0.12 + 0.11 / scale) * d;
    Ok(KsResult {
        statistic: d,
        critical_value: critical,
        p_value: kolmogorov_tail(lambda),
        level,
        pass: d < critical,
    })
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The `index`-th element of the van der Corput sequence in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    value
}

/// Point `index` of the Halton sequence in `[0, 1)^dims` (dims <= 8). The
/// zero index is skipped so no point sits on the lower boundary.
pub fn halton(index: u64, dims: usize) -> Vec<f64> {
    assert!(dims <= PRIMES.len(), "at most {} Halton dimensions", PRIMES.len());
    PRIMES[..dims].iter().map(|&p| radical_inverse(index + 1, p)).collect()
}
