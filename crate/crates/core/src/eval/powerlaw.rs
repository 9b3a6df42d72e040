//! Log-binned tail fits of inter-shift-interval distributions.

use serde::{Deserialize, Serialize};

use crate::detect::ShiftEvent;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerLawConfig {
    pub bins_per_decade: usize,
    /// Fit from this ISI value on; the density mode when unset.
    pub tail_start: Option<f64>,
    /// Minimum number of pooled intervals.
    pub min_samples: usize,
    /// Tail bins with fewer intervals are left out of the fit.
    pub min_bin_count: usize,
}

impl Default for PowerLawConfig {
    fn default() -> Self {
        Self {
            bins_per_decade: 20,
            tail_start: None,
            min_samples: 200,
            min_bin_count: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    /// Geometric centre.
    pub center: f64,
    pub count: usize,
    /// `count / (n · width)`.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Positive tail exponent, the negative of `slope`.
    pub q: f64,
    /// Least-squares slope of log10 density on log10 bin centre.
    pub slope: f64,
    pub intercept: f64,
    pub tail_start: f64,
    pub r_squared: f64,
    /// Non-empty tail bins used in the fit.
    pub bins_used: usize,
    pub samples: usize,
    pub mean: f64,
    pub histogram: Vec<HistBin>,
}

/// Intervals between consecutive events of each dataset, in seconds.
pub fn isis_seconds(datasets: &[Vec<ShiftEvent>], rate_hz: f64) -> Vec<f64> {
    datasets
        .iter()
        .flat_map(|events| events.windows(2).map(|w| (w[1].index - w[0].index) as f64 / rate_hz))
        .collect()
}

/// Logarithmic histogram anchored at the smallest value, so rescaling the
/// input only relabels the bins.
fn log_histogram(x: &[f64], per_decade: usize) -> Vec<HistBin> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(0.0, f64::max);
    let step = 1.0 / per_decade as f64;
    let nbins = (((hi / lo).log10() / step).floor() as usize) + 1;
    let mut counts = vec![0usize; nbins];
    for &v in x {
        let k = (((v / lo).log10() / step).floor() as usize).min(nbins - 1);
        counts[k] += 1;
    }
    let n = x.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let a = lo * 10f64.powf(k as f64 * step);
            let b = lo * 10f64.powf((k + 1) as f64 * step);
            HistBin {
                lo: a,
                hi: b,
                center: (a * b).sqrt(),
                count,
                density: count as f64 / (n * (b - a)),
            }
        })
        .collect()
}

/// Fits `log density = slope · log ISI + c` over the bins at or beyond the
/// tail start holding at least `min_bin_count` intervals (at least one) and
/// reports `q = −slope`. Sparse far-tail bins are biased upward because
/// only the non-empty ones are seen, which flattens the slope.
pub fn isi_powerlaw(isis: &[f64], cfg: &PowerLawConfig) -> Result<PowerLawFit> {
    if cfg.bins_per_decade == 0 {
        return Err(invalid("bins_per_decade", "must be positive"));
    }
    if isis.len() < cfg.min_samples {
        return Err(Error::TooShort {
            needed: cfg.min_samples,
            got: isis.len(),
        });
    }
    if isis.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(invalid("isis", "intervals must be positive and finite"));
    }
    let histogram = log_histogram(isis, cfg.bins_per_decade);
    let start = match cfg.tail_start {
        Some(t) => histogram.iter().position(|b| b.hi > t).unwrap_or(histogram.len()),
        None => histogram
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (k, b)| if b.density > best.1 { (k, b.density) } else { best })
            .0,
    };
    let pts: Vec<(f64, f64)> = histogram[start..]
        .iter()
        .filter(|b| b.count >= cfg.min_bin_count.max(1))
        .map(|b| (b.center.log10(), b.density.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical(format!(
            "only {} tail bins hold at least {} intervals; need at least 3",
            pts.len(),
            cfg.min_bin_count.max(1)
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(PowerLawFit {
        q: -slope,
        slope,
        intercept: my - slope * mx,
        tail_start: histogram[start].lo,
        r_squared,
        bins_used: pts.len(),
        samples: isis.len(),
        mean: isis.iter().sum::<f64>() / isis.len() as f64,
        histogram,
    })
}
