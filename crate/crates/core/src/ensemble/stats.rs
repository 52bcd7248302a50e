//! Histograms, summary statistics and the small set of tests used on
//! ensemble outputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metrics::wrap_around;

/// Uniform-bin histogram normalized as a probability density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// In-range samples; equals the sum of `counts`.
    pub total: u64,
    /// Samples outside the range (or NaN).
    pub excluded: u64,
}

impl Histogram {
    /// Bins `[lo, hi]` into `bins` equal cells. Both end points are inside.
    pub fn new(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter {
                field: "bins",
                reason: "need at least one bin".into(),
            });
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                field: "range",
                reason: format!("empty range [{lo}, {hi}]"),
            });
        }
        if samples.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, have: 0 });
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        let mut excluded = 0;
        for &x in samples {
            if !(x >= lo && x <= hi) {
                excluded += 1;
                continue;
            }
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let total = counts.iter().sum();
        Ok(Self {
            edges,
            counts,
            total,
            excluded,
        })
    }

    /// Phases re-wrapped into `(center - pi, center + pi]` and binned there.
    pub fn phases(samples: &[f64], bins: usize, center: f64) -> Result<Self> {
        let wrapped: Vec<f64> = samples.iter().map(|&x| wrap_around(x, center)).collect();
        Self::new(&wrapped, bins, center - PI, center + PI)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        let norm = self.total as f64 * self.bin_width();
        self.counts
            .iter()
            .map(|&c| if norm > 0.0 { c as f64 / norm } else { 0.0 })
            .collect()
    }

    /// Centre of the most populated bin (first one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        self.centers()[best]
    }
}

/// Mean, unbiased variance, standard error and upper tail mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub tail_threshold: f64,
    pub tail_mass: f64,
}

pub fn summarize(samples: &[f64], tail_threshold: f64) -> Result<Summary> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: samples.len(),
        });
    }
    Ok(summary_unchecked(samples, tail_threshold))
}

/// As [`summarize`], but a single sample gets zero variance.
pub(crate) fn summary_unchecked(samples: &[f64], tail_threshold: f64) -> Summary {
    let n = samples.len();
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let variance = if n > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        variance,
        std_error: (variance / nf).sqrt(),
        tail_threshold,
        tail_mass: samples.iter().filter(|&&x| x > tail_threshold).count() as f64 / nf,
    }
}

pub fn variance(samples: &[f64]) -> f64 {
    summary_unchecked(samples, f64::INFINITY).variance
}

/// Percentile bootstrap interval of `stat` at confidence `level`.
pub fn bootstrap_ci(
    samples: &[f64],
    stat: impl Fn(&[f64]) -> f64,
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: samples.len(),
        });
    }
    if resamples < 2 || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter {
            field: "bootstrap",
            reason: format!("resamples {resamples}, level {level}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    let at = |q: f64| stats[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Ok((at(alpha), at(1.0 - alpha)))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at the 95% level.
pub fn ks_threshold_95(n: usize, m: usize) -> f64 {
    1.358 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Pooled two-proportion z statistic for `x1/n1 > x2/n2`.
pub fn two_proportion_z(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let p = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p1 > p2 { f64::INFINITY } else { 0.0 };
    }
    (p1 - p2) / se
}

/// One-sided 99% standard normal quantile.
pub const Z_99_ONE_SIDED: f64 = 2.326_347_874;

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
