//! Scoring detections against ground truth.

pub mod bench;
mod powerlaw;
mod uniformity;

pub use powerlaw::{isi_powerlaw, isis_seconds, HistBin, PowerLawConfig, PowerLawFit};
pub use uniformity::{uniformity_test, UniformityTest};

use serde::{Deserialize, Serialize};

use crate::detect::ShiftEvent;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub matching_tolerance: usize,
    pub decision_window: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fn)`, zero without positives.
    pub fn tp_rate(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `fp / (fp + tn)`, zero without negatives.
    pub fn fp_rate(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Element-wise sum; tolerances must agree.
    pub fn add(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
            ..*self
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Greedy one-to-one matching on sorted sample indices.
///
/// Each detection, in increasing order, claims the earliest unmatched truth
/// within `±tolerance`. `[0, n)` is tiled by disjoint windows of
/// `decision_window` samples (a partial last window is dropped); windows
/// holding neither a truth nor a detection are true negatives.
pub fn match_indices(
    detected: &[usize],
    truth: &[usize],
    tolerance: usize,
    n: usize,
    decision_window: usize,
) -> Result<ConfusionCounts> {
    if tolerance == 0 {
        return Err(invalid("tolerance", "must be positive"));
    }
    if decision_window == 0 {
        return Err(invalid("decision_window", "must be positive"));
    }
    if !detected.is_sorted() || !truth.is_sorted() {
        return Err(invalid("events", "indices must be sorted"));
    }
    let mut matched = vec![false; truth.len()];
    let mut first = 0;
    let mut tp = 0;
    for &d in detected {
        while first < truth.len() && truth[first] + tolerance < d {
            first += 1;
        }
        let hit = (first..truth.len())
            .take_while(|&j| truth[j] <= d + tolerance)
            .find(|&j| !matched[j]);
        if let Some(j) = hit {
            matched[j] = true;
            tp += 1;
        }
    }
    let windows = n / decision_window;
    let mut occupied = vec![false; windows];
    for &i in detected.iter().chain(truth) {
        if let Some(o) = occupied.get_mut(i / decision_window) {
            *o = true;
        }
    }
    Ok(ConfusionCounts {
        tp,
        fp: detected.len() - tp,
        tn: occupied.iter().filter(|&&o| !o).count(),
        fn_: truth.len() - tp,
        matching_tolerance: tolerance,
        decision_window,
    })
}

/// [`match_indices`] on event lists with the decision window equal to the tolerance.
pub fn match_events(detected: &[ShiftEvent], truth: &[ShiftEvent], tolerance: usize, n: usize) -> Result<ConfusionCounts> {
    let d: Vec<usize> = detected.iter().map(|e| e.index).collect();
    let t: Vec<usize> = truth.iter().map(|e| e.index).collect();
    match_indices(&d, &t, tolerance, n, tolerance)
}

/// `(TP + TN) / (TP + FP + TN + FN)`.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    if c.total() == 0 {
        return Err(invalid("counts", "all counts are zero"));
    }
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fp_rate: f64,
    pub tp_rate: f64,
    pub alpha: f64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted by `(fp_rate, tp_rate, alpha)`.
    pub points: Vec<RocPoint>,
    pub auroc: f64,
    /// `(accuracy, alpha)` at the most accurate grid point.
    pub max_accuracy: (f64, f64),
}

/// ROC curve from one pooled confusion count per significance level.
/// AUROC is the trapezoid area over the sorted points with `(0,0)` and
/// `(1,1)` anchors.
pub fn roc_curve(runs: &[(f64, ConfusionCounts)]) -> Result<RocCurve> {
    if runs.len() < 3 {
        return Err(invalid("runs", "need at least three significance levels"));
    }
    let mut points = runs
        .iter()
        .map(|&(alpha, counts)| {
            Ok(RocPoint {
                fp_rate: counts.fp_rate(),
                tp_rate: counts.tp_rate(),
                alpha,
                accuracy: accuracy(&counts)?,
                counts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.fp_rate
            .total_cmp(&b.fp_rate)
            .then(a.tp_rate.total_cmp(&b.tp_rate))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    let mut xy = vec![(0.0, 0.0)];
    xy.extend(points.iter().map(|p| (p.fp_rate, p.tp_rate)));
    xy.push((1.0, 1.0));
    let auroc = xy.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    let best = points
        .iter()
        .fold(None::<&RocPoint>, |best, p| match best {
            Some(b) if b.accuracy > p.accuracy || (b.accuracy == p.accuracy && b.alpha <= p.alpha) => Some(b),
            _ => Some(p),
        })
        .expect("non-empty");
    Ok(RocCurve {
        max_accuracy: (best.accuracy, best.alpha),
        points,
        auroc,
    })
}

/// Pools per-dataset counts at each significance level and builds the ROC curve.
///
/// `detections[a][d]` are the events found at `alphas[a]` in dataset `d`;
/// `truth[d]` and `lengths[d]` describe dataset `d`.
pub fn roc_from_detections(
    alphas: &[f64],
    detections: &[Vec<Vec<ShiftEvent>>],
    truth: &[Vec<ShiftEvent>],
    lengths: &[usize],
    tolerance: usize,
    decision_window: usize,
) -> Result<RocCurve> {
    if detections.len() != alphas.len() || truth.len() != lengths.len() {
        return Err(invalid("detections", "grid and dataset counts disagree"));
    }
    let runs = alphas
        .iter()
        .zip(detections)
        .map(|(&a, per_set)| {
            if per_set.len() != truth.len() {
                return Err(invalid("detections", "one event list per dataset is required"));
            }
            let mut total = ConfusionCounts::default();
            for ((d, t), &n) in per_set.iter().zip(truth).zip(lengths) {
                let d: Vec<usize> = d.iter().map(|e| e.index).collect();
                let t: Vec<usize> = t.iter().map(|e| e.index).collect();
                total = total.add(&match_indices(&d, &t, tolerance, n, decision_window)?);
            }
            total.matching_tolerance = tolerance;
            total.decision_window = decision_window;
            Ok((a, total))
        })
        .collect::<Result<Vec<_>>>()?;
    roc_curve(&runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts {
            tp,
            fp,
            tn,
            fn_,
            matching_tolerance: 1,
            decision_window: 1,
        }
    }

    #[test]
    fn perfect_and_empty_matching() {
        let t = [100, 400, 900];
        let c = match_indices(&t, &t, 20, 1000, 20).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (3, 0, 0));
        assert_eq!(c.tn, 50 - 3);
        let c = match_indices(&[], &t, 20, 1000, 20).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 3));
    }

    #[test]
    fn greedy_hand_trace() {
        let c = match_indices(&[990, 1500], &[1000], 50, 2000, 50).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 0));
        // the first detection takes the only truth, the second is a false positive
        let c = match_indices(&[995, 1004], &[1000], 50, 2000, 50).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (1, 1, 0));
        // two truths both in range of both detections
        let c = match_indices(&[1000, 1010], &[1005, 1020], 30, 2000, 30).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (2, 0, 0));
        assert!(match_indices(&[1], &[1], 0, 10, 1).is_err());
        assert!(match_indices(&[5, 1], &[1], 2, 10, 2).is_err());
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(accuracy(&counts(5, 0, 5, 0)).unwrap(), 1.0);
        assert_eq!(accuracy(&counts(1, 1, 1, 1)).unwrap(), 0.5);
        let a = accuracy(&counts(380, 10, 600, 20)).unwrap();
        assert!((a - 980.0 / 1010.0).abs() < 1e-15);
        assert!((a - 0.9703).abs() < 5e-5);
        assert!(accuracy(&counts(0, 0, 0, 0)).is_err());
    }

    #[test]
    fn roc_degenerate_cases() {
        let perfect: Vec<_> = [0.01, 0.05, 0.1].iter().map(|&a| (a, counts(10, 0, 90, 0))).collect();
        let r = roc_curve(&perfect).unwrap();
        assert!((r.auroc - 1.0).abs() < 1e-15);
        assert_eq!(r.max_accuracy, (1.0, 0.01));
        let silent: Vec<_> = [0.01, 0.05, 0.1].iter().map(|&a| (a, counts(0, 0, 90, 10))).collect();
        assert!((roc_curve(&silent).unwrap().auroc - 0.5).abs() < 1e-15);
        assert!(roc_curve(&perfect[..2]).is_err());
    }

    #[test]
    fn roc_area_of_a_single_interior_point() {
        let runs: Vec<_> = [0.01, 0.05, 0.1].iter().map(|&a| (a, counts(8, 2, 8, 2))).collect();
        // (0,0) → (0.2,0.8) → (1,1): 0.08 + 0.72
        assert!((roc_curve(&runs).unwrap().auroc - 0.8).abs() < 1e-12);
    }
}
