//! χ² test of event timing relative to stimulus onsets.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityTest {
    pub counts: Vec<usize>,
    pub expected: f64,
    pub chi2: f64,
    pub p_value: f64,
}

/// Bins the lag of each event behind its most recent stimulus over
/// `[0, window_s)` and tests the counts against a uniform expectation with
/// `bins − 1` degrees of freedom. Events before the first stimulus or more
/// than `window_s` after the latest one are ignored.
pub fn uniformity_test(event_times_s: &[f64], stimulus_times_s: &[f64], window_s: f64, bins: usize) -> Result<UniformityTest> {
    if bins < 2 {
        return Err(invalid("bins", "need at least two bins"));
    }
    if !(window_s > 0.0) {
        return Err(invalid("window_s", "must be positive"));
    }
    if !stimulus_times_s.is_sorted() {
        return Err(invalid("stimulus_times_s", "must be sorted"));
    }
    let mut counts = vec![0usize; bins];
    for &e in event_times_s {
        let k = stimulus_times_s.partition_point(|&s| s <= e);
        if k == 0 {
            continue;
        }
        let lag = e - stimulus_times_s[k - 1];
        if lag < window_s {
            counts[((lag / window_s * bins as f64) as usize).min(bins - 1)] += 1;
        }
    }
    let n: usize = counts.iter().sum();
    let expected = n as f64 / bins as f64;
    if expected < 5.0 {
        return Err(Error::Numerical(format!(
            "{n} events in the window give fewer than 5 expected per bin over {bins} bins; use fewer bins"
        )));
    }
    let chi2 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum::<f64>();
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(UniformityTest {
        counts,
        expected,
        chi2,
        p_value: dist.sf(chi2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_uniform_counts() {
        let stim = [0.0];
        let events: Vec<f64> = (0..100).map(|i| (i / 10) as f64 * 0.05 + 0.025).collect();
        let t = uniformity_test(&events, &stim, 0.5, 10).unwrap();
        assert_eq!(t.counts, vec![10; 10]);
        assert_eq!(t.chi2, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concentrated_events_reject() {
        let stim: Vec<f64> = (0..100).map(|i| i as f64 * 2.0).collect();
        let events: Vec<f64> = stim.iter().map(|s| s + 0.11).collect();
        let t = uniformity_test(&events, &stim, 0.5, 10).unwrap();
        assert!(t.p_value < 1e-12);
        assert_eq!(t.counts[2], 100);
    }

    #[test]
    fn too_few_events() {
        assert!(matches!(
            uniformity_test(&[0.1, 0.2], &[0.0], 0.5, 10),
            Err(Error::Numerical(_))
        ));
        assert!(uniformity_test(&[0.1], &[1.0, 0.0], 0.5, 10).is_err());
    }
}
