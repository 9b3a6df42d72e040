//! The CUSUM and phase-derivative statistics.
//!
//! Both are indexed by 1-based `t = 2..=N−1` over the analysed samples. For a
//! step whose first post-change sample has 0-based index `k`, the CUSUM peaks
//! at `t = k` and the phase derivative at `t ∈ {k, k+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// `s₁(t) = |√(N / (t(N−t))) Σ_{i≤t} (φ̂_i − φ̄)|`.
    Cusum,
    /// `s₂(t) = |φ̂_{t+1} − φ̂_{t−1}| / 2`.
    Pd,
}

impl StatKind {
    pub fn min_len(self) -> usize {
        match self {
            StatKind::Cusum => 4,
            StatKind::Pd => 3,
        }
    }

    /// `(max, argmax)` of the statistic on `x`; ties go to the smallest `t`.
    pub fn max(self, x: &[f64]) -> Result<(f64, usize)> {
        ensure_len(self, x.len())?;
        Ok(match self {
            StatKind::Cusum => cusum_max(x),
            StatKind::Pd => pd_max(x),
        })
    }

    pub fn series(self, x: &[f64]) -> Result<StatSeries> {
        match self {
            StatKind::Cusum => cusum_values(x),
            StatKind::Pd => pd_values(x),
        }
    }
}

/// `s(t)` for `t = 2..=N−1`, with its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSeries {
    pub kind: StatKind,
    /// `values[i]` is `s(i + 2)`.
    pub values: Vec<f64>,
    pub max_value: f64,
    /// 1-based `t` of the first maximum.
    pub argmax: usize,
}

impl StatSeries {
    fn from_values(kind: StatKind, values: Vec<f64>) -> Self {
        let (mut best, mut arg) = (f64::NEG_INFINITY, 2);
        for (i, &v) in values.iter().enumerate() {
            if v > best {
                best = v;
                arg = i + 2;
            }
        }
        Self {
            kind,
            values,
            max_value: best,
            argmax: arg,
        }
    }

    /// `s(t)`, or `None` outside `2..=N−1`.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(2).and_then(|i| self.values.get(i).copied())
    }
}

fn ensure_len(kind: StatKind, n: usize) -> Result<()> {
    if n < kind.min_len() {
        return Err(Error::TooShort {
            needed: kind.min_len(),
            got: n,
        });
    }
    Ok(())
}

fn cusum_scan(x: &[f64], mut visit: impl FnMut(usize, f64)) {
    let n = x.len();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let mut partial = x[0] - mean;
    for t in 2..n {
        partial += x[t - 1] - mean;
        let tf = t as f64;
        visit(t, (nf / (tf * (nf - tf))).sqrt() * partial.abs());
    }
}

pub(crate) fn cusum_max(x: &[f64]) -> (f64, usize) {
    let (mut best, mut arg) = (f64::NEG_INFINITY, 2);
    cusum_scan(x, |t, v| {
        if v > best {
            best = v;
            arg = t;
        }
    });
    (best, arg)
}

pub(crate) fn pd_max(x: &[f64]) -> (f64, usize) {
    let (mut best, mut arg) = (f64::NEG_INFINITY, 2);
    for t in 2..x.len() {
        let v = (x[t] - x[t - 2]).abs() / 2.0;
        if v > best {
            best = v;
            arg = t;
        }
    }
    (best, arg)
}

fn cusum_values(x: &[f64]) -> Result<StatSeries> {
    ensure_len(StatKind::Cusum, x.len())?;
    let mut values = Vec::with_capacity(x.len() - 2);
    cusum_scan(x, |_, v| values.push(v));
    Ok(StatSeries::from_values(StatKind::Cusum, values))
}

fn pd_values(x: &[f64]) -> Result<StatSeries> {
    ensure_len(StatKind::Pd, x.len())?;
    let values = (2..x.len()).map(|t| (x[t] - x[t - 2]).abs() / 2.0).collect();
    Ok(StatSeries::from_values(StatKind::Pd, values))
}

/// CUSUM statistic over the analysed part of `phi`.
pub fn cusum_stat(phi: &PhaseSeries) -> Result<StatSeries> {
    cusum_values(phi.analysis())
}

/// Phase-derivative statistic over the analysed part of `phi`.
pub fn pd_stat(phi: &PhaseSeries) -> Result<StatSeries> {
    pd_values(phi.analysis())
}
