//! Descriptive statistics, percentile bootstrap and histograms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("non-finite sample value {0}")]
    NonFinite(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapCI {
    pub level: f64,
    pub resamples: usize,
    pub seed: u64,
    /// Mean of the original sample.
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

fn check_finite(samples: &[f64]) -> Result<(), StatsError> {
    match samples.iter().find(|x| !x.is_finite()) {
        Some(&bad) => Err(StatsError::NonFinite(bad)),
        None => Ok(()),
    }
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_of_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return s[lo];
    }
    let frac = pos - lo as f64;
    s[lo] + (s[hi] - s[lo]) * frac
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(samples)?;
    let n = samples.len();
    let m = mean(samples);
    let variance = if n > 1 { samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let s = sorted(samples);
    Ok(SummaryStats {
        n,
        // keep the mean inside [min, max] despite rounding
        mean: m.clamp(s[0], s[n - 1]),
        median: median_of_sorted(&s),
        std: variance.sqrt(),
        variance,
        min: s[0],
        max: s[n - 1],
    })
}

/// Percentile bootstrap interval for the mean.
pub fn bootstrap_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<BootstrapCI, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    check_finite(samples)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    if resamples == 0 {
        return Err(StatsError::InvalidArgument("resamples must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> =
        (0..resamples).map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64).collect();
    means.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&means, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&means, (1.0 + level) / 2.0);
    Ok(BootstrapCI { level, resamples, seed, estimate: mean(samples), lo, hi })
}

/// Equal-width bins spanning `[min, max]`; the last bin includes its right
/// edge. A constant sample lands entirely in the first bin.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<Bin>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if bins == 0 {
        return Err(StatsError::InvalidArgument("bins must be at least 1".into()));
    }
    check_finite(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> = (0..bins)
        .map(|k| Bin {
            lo: lo + width * k as f64,
            hi: if k + 1 == bins { hi } else { lo + width * (k + 1) as f64 },
            count: 0,
        })
        .collect();
    for &x in samples {
        let k = if width == 0.0 { 0 } else { (((x - lo) / width).floor() as usize).min(bins - 1) };
        out[k].count += 1;
    }
    Ok(out)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::InvalidArgument(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFew { needed: 2, got: a.len() });
    }
    check_finite(a)?;
    check_finite(b)?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(StatsError::InvalidArgument("correlation undefined for a constant series".into()));
    }
    Ok(sab / (saa.sqrt() * sbb.sqrt()))
}
