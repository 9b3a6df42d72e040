//! Binary segmentation with exclusion intervals.

use serde::{Deserialize, Serialize};

use crate::detect::bootstrap::BlockBootstrap;
use crate::detect::null::NullTable;
use crate::detect::stats::StatKind;
use crate::error::Result;

/// Where a segment's critical value comes from.
pub enum CriticalSource<'a> {
    Table(&'a NullTable),
    Block(&'a mut BlockBootstrap),
}

impl CriticalSource<'_> {
    /// `None` when the segment cannot be tested.
    pub fn critical(&mut self, x: &[f64], start: usize, end: usize, alpha: f64) -> Result<Option<f64>> {
        match self {
            CriticalSource::Table(t) => Ok(t.critical(end - start, alpha)),
            CriticalSource::Block(b) => b.critical(x, start, end, alpha),
        }
    }
}

/// A change point in analysis coordinates; samples strictly between `t_l`
/// and `t_u` are excluded from later tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawEvent {
    pub t: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub t_l: usize,
    pub t_u: usize,
}

/// One tested segment `[start, end)` and the outcome of its test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentTest {
    pub start: usize,
    pub end: usize,
    pub statistic: f64,
    pub critical: f64,
    pub rejected: bool,
}

/// How far an exclusion interval reaches around a detected change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exclusion {
    /// `t̂ ± isi_min`.
    HalfWidth(usize),
    /// The run of `s₂ ≥ Φ` containing `t̂`, widened by `margin` samples on
    /// each side to cover the filter transient around the change.
    AboveThreshold { margin: usize },
}

/// Recursively tests `x`, splitting at each rejection into the parts left
/// and right of the exclusion interval. Segments shorter than `n_min` or
/// without a critical value are not tested.
pub fn segment(
    x: &[f64],
    kind: StatKind,
    n_min: usize,
    exclusion: Exclusion,
    alpha: f64,
    source: &mut CriticalSource<'_>,
) -> Result<(Vec<RawEvent>, Vec<SegmentTest>)> {
    let mut events = Vec::new();
    let mut tests = Vec::new();
    let mut stack = vec![(0usize, x.len())];
    let floor = n_min.max(kind.min_len());
    while let Some((a, b)) = stack.pop() {
        if b - a < floor {
            continue;
        }
        let seg = &x[a..b];
        let Some(phi) = source.critical(x, a, b, alpha)? else {
            continue;
        };
        let (s, t) = kind.max(seg)?;
        let rejected = s > phi;
        tests.push(SegmentTest {
            start: a,
            end: b,
            statistic: s,
            critical: phi,
            rejected,
        });
        if !rejected {
            continue;
        }
        let (l, u) = match exclusion {
            Exclusion::HalfWidth(w) => (t.saturating_sub(w), (t + w).min(b - a)),
            Exclusion::AboveThreshold { margin } => {
                let (l, u) = pd_run(seg, t, phi);
                (l.saturating_sub(margin), (u + margin).min(b - a))
            }
        };
        events.push(RawEvent {
            t: a + t,
            statistic: s,
            threshold: phi,
            t_l: a + l,
            t_u: a + u,
        });
        // the parts end and start on the interval bounds, so the exclusion
        // intervals of later events can touch this one but not overlap it
        stack.push((a + u, b));
        stack.push((a, a + l));
    }
    events.sort_by_key(|e| e.t);
    tests.sort_by_key(|t| (t.start, t.end));
    Ok((events, tests))
}

/// Nearest `t` on each side of `t_hat` with `s₂(t) < phi`, falling back to
/// the segment ends.
fn pd_run(seg: &[f64], t_hat: usize, phi: f64) -> (usize, usize) {
    let s2 = |t: usize| (seg[t] - seg[t - 2]).abs() / 2.0;
    let n = seg.len();
    let l = (2..t_hat).rev().find(|&t| s2(t) < phi).unwrap_or(0);
    let u = (t_hat + 1..n).find(|&t| s2(t) < phi).unwrap_or(n);
    (l, u)
}
