//! Sample autocorrelation and the dependence scale τ.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::phase::PhaseSeries;

/// How per-segment zero crossings are combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
}

/// Biased sample autocorrelation `r(k) = Σ (x_i − x̄)(x_{i+k} − x̄) / Σ (x_i − x̄)²`
/// for lags `0..=max_lag` (clamped to `n − 1`). A constant input gives `r(k) = 0` for `k ≥ 1`.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    let max_lag = max_lag.min(n - 1);
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let ck: f64 = d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum();
        out.push(if c0 > 0.0 { ck / c0 } else { 0.0 });
    }
    out
}

/// First lag `k ≥ 1` with `r(k) ≤ 0`.
pub fn first_zero_crossing(r: &[f64]) -> Option<usize> {
    r.iter().skip(1).position(|&v| v <= 0.0).map(|k| k + 1)
}

/// τ from consecutive segments of `segment_s` seconds of the analysed part of
/// `phi`, taken on the values as stored. Segments whose ACF never reaches
/// zero are skipped.
pub fn acf_first_zero(phi: &PhaseSeries, segment_s: f64, aggregation: Aggregation) -> Result<usize> {
    if !(segment_s > 0.0) {
        return Err(invalid("segment_s", "must be positive"));
    }
    let seg = (segment_s * phi.rate_hz).round() as usize;
    if seg < 3 {
        return Err(invalid("segment_s", "segments must hold at least 3 samples"));
    }
    let x = phi.analysis();
    if x.len() < seg {
        return Err(Error::TooShort {
            needed: seg,
            got: x.len(),
        });
    }
    let mut taus: Vec<usize> = x
        .chunks_exact(seg)
        .filter_map(|s| first_zero_crossing(&acf(s, seg - 1)))
        .collect();
    if taus.is_empty() {
        return Err(Error::Numerical(format!(
            "no segment of {seg} samples has an autocorrelation zero crossing"
        )));
    }
    Ok(match aggregation {
        Aggregation::Mean => (taus.iter().sum::<usize>() as f64 / taus.len() as f64).round() as usize,
        Aggregation::Median => {
            taus.sort_unstable();
            let m = taus.len();
            if m % 2 == 1 {
                taus[m / 2]
            } else {
                ((taus[m / 2 - 1] + taus[m / 2]) as f64 / 2.0).round() as usize
            }
        }
    })
}
