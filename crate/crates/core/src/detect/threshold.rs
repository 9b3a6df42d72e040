//! Phase-derivative detection with a pooled-variance threshold.
//!
//! The signed central differences `d_t = (φ̂_{t+1} − φ̂_{t−1}) / 2` are
//! centred and compared with `σ̂_pool · q`, where `q` treats the maximum as
//! that of `K* = 2⌊N/τ⌋` independent standard normals. The variance is
//! pooled over the pieces of the series outside the current exclusion
//! intervals and the procedure repeats until no new run crosses the threshold.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::detect::recursive::RawEvent;
use crate::error::{ensure_open_unit, invalid, Error, Result};

/// Normal quantile used for the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdQuantile {
    /// `Φ⁻¹((1−α)^{1/K*})`: the maximum of `K*` standard normals exceeds it with probability α.
    #[default]
    OneSided,
    /// `Φ⁻¹(1 − (1 − (1−α)^{1/K*}) / 2)`: the same for the maximum of `K*` absolute values.
    TwoSided,
    /// Upper `α^{K*}` point, read literally as a tail probability.
    Literal,
}

/// The standardised threshold `q` for `K*` effective observations.
pub fn threshold_quantile(alpha: f64, k_star: usize, rule: ThresholdQuantile) -> Result<f64> {
    ensure_open_unit("alpha", alpha)?;
    if k_star == 0 {
        return Err(invalid("k_star", "must be positive"));
    }
    let n = Normal::standard();
    let k = k_star as f64;
    // 1 − (1−α)^{1/K} computed without cancellation
    let per_point = -((1.0 - alpha).ln() / k).exp_m1();
    Ok(match rule {
        ThresholdQuantile::OneSided => n.inverse_cdf(1.0 - per_point),
        ThresholdQuantile::TwoSided => n.inverse_cdf(1.0 - per_point / 2.0),
        ThresholdQuantile::Literal => {
            let tail = alpha.powf(k);
            if tail <= f64::MIN_POSITIVE {
                f64::INFINITY
            } else {
                -n.inverse_cdf(tail)
            }
        }
    })
}

/// Thresholds and pooled deviations visited by one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTrace {
    pub k_star: usize,
    pub quantile: f64,
    pub sigma: Vec<f64>,
    pub thresholds: Vec<f64>,
}

/// Runs the threshold iteration on analysed samples `x`. Event indices use
/// the same convention as the PD statistic.
pub fn threshold_events(
    x: &[f64],
    tau: usize,
    alpha: f64,
    rule: ThresholdQuantile,
) -> Result<(Vec<RawEvent>, ThresholdTrace)> {
    let n = x.len();
    if tau == 0 {
        return Err(invalid("tau", "must be positive"));
    }
    if tau >= n {
        return Err(invalid("tau", format!("τ = {tau} must be shorter than the series ({n})")));
    }
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let k_star = 2 * (n / tau);
    let q = threshold_quantile(alpha, k_star, rule)?;
    let mut trace = ThresholdTrace {
        k_star,
        quantile: q,
        ..Default::default()
    };
    // d[i] belongs to t = i + 2
    let d: Vec<f64> = (2..n).map(|t| (x[t] - x[t - 2]) / 2.0).collect();
    let mut events: Vec<RawEvent> = Vec::new();
    let mut phi = f64::INFINITY;
    for _ in 0..=n {
        let mut excluded = vec![false; d.len()];
        for e in &events {
            for t in e.t_l + 1..e.t_u {
                if let Some(slot) = t.checked_sub(2).and_then(|i| excluded.get_mut(i)) {
                    *slot = true;
                }
            }
        }
        let Some((mean, sigma)) = pooled(&d, &excluded) else {
            break;
        };
        trace.sigma.push(sigma);
        if sigma == 0.0 {
            break;
        }
        phi = phi.min(sigma * q);
        trace.thresholds.push(phi);
        let z: Vec<f64> = d.iter().map(|v| (v - mean).abs()).collect();

        // widen the runs of known events for the current threshold
        for e in &mut events {
            let (l, u) = run_around(&z, e.t, phi);
            e.t_l = e.t_l.min(l);
            e.t_u = e.t_u.max(u);
            e.threshold = phi;
        }
        let mut found = false;
        let mut i = 0;
        while i < z.len() {
            let t = i + 2;
            let inside = events.iter().any(|e| e.t_l <= t && t <= e.t_u);
            if z[i] > phi && !inside {
                let mut j = i;
                while j + 1 < z.len() && z[j + 1] > phi {
                    j += 1;
                }
                let best = (i..=j).fold(i, |b, k| if z[k] > z[b] { k } else { b });
                events.push(RawEvent {
                    t: best + 2,
                    statistic: z[best],
                    threshold: phi,
                    t_l: i + 1,
                    t_u: j + 3,
                });
                found = true;
                i = j + 1;
            } else {
                i += 1;
            }
        }
        events = merge(events);
        if !found {
            break;
        }
    }
    Ok((events, trace))
}

/// Mean of the included values and the pooled within-piece deviation.
fn pooled(d: &[f64], excluded: &[bool]) -> Option<(f64, f64)> {
    let (mut ss, mut dof, mut sum, mut count) = (0.0, 0usize, 0.0, 0usize);
    let mut i = 0;
    while i < d.len() {
        if excluded[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < d.len() && !excluded[i] {
            i += 1;
        }
        let piece = &d[start..i];
        let m = piece.iter().sum::<f64>() / piece.len() as f64;
        sum += piece.iter().sum::<f64>();
        count += piece.len();
        if piece.len() >= 2 {
            ss += piece.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            dof += piece.len() - 1;
        }
    }
    (dof > 0).then(|| (sum / count as f64, (ss / dof as f64).sqrt()))
}

fn run_around(z: &[f64], t: usize, phi: f64) -> (usize, usize) {
    let i = t - 2;
    let mut l = i;
    while l > 0 && z[l - 1] > phi {
        l -= 1;
    }
    let mut u = i;
    while u + 1 < z.len() && z[u + 1] > phi {
        u += 1;
    }
    (l + 1, u + 3)
}

/// Sorts and merges events whose exclusion intervals touch or overlap,
/// keeping the index with the larger statistic.
pub(crate) fn merge(mut events: Vec<RawEvent>) -> Vec<RawEvent> {
    events.sort_by_key(|e| e.t_l);
    let mut out: Vec<RawEvent> = Vec::with_capacity(events.len());
    for e in events {
        match out.last_mut() {
            Some(last) if e.t_l <= last.t_u => {
                if e.statistic > last.statistic {
                    last.t = e.t;
                    last.statistic = e.statistic;
                }
                last.t_u = last.t_u.max(e.t_u);
                last.threshold = last.threshold.min(e.threshold);
            }
            _ => out.push(e),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_rules() {
        // K* = 1 reduces to the ordinary upper quantile
        let q = threshold_quantile(0.05, 1, ThresholdQuantile::OneSided).unwrap();
        assert!((q - 1.644_853_627).abs() < 1e-6);
        let q2 = threshold_quantile(0.05, 1, ThresholdQuantile::TwoSided).unwrap();
        assert!((q2 - 1.959_963_985).abs() < 1e-6);
        // grows with K*
        let a = threshold_quantile(0.05, 10, ThresholdQuantile::OneSided).unwrap();
        let b = threshold_quantile(0.05, 1000, ThresholdQuantile::OneSided).unwrap();
        assert!(b > a && a > q);
        assert!(threshold_quantile(0.05, 400, ThresholdQuantile::Literal).unwrap().is_infinite());
        assert!(threshold_quantile(1.0, 4, ThresholdQuantile::OneSided).is_err());
    }

    #[test]
    fn single_step_in_constant_phase() {
        let mut x: Vec<f64> = (0..400).map(|i| 1e-3 * ((i * 7919 % 113) as f64 / 113.0 - 0.5)).collect();
        for v in &mut x[200..] {
            *v += 1.0;
        }
        let (ev, trace) = threshold_events(&x, 2, 0.05, ThresholdQuantile::OneSided).unwrap();
        assert_eq!(ev.len(), 1);
        assert!(ev[0].t == 200 || ev[0].t == 201);
        assert!(ev[0].t_u - ev[0].t_l <= 4, "{:?}", ev[0]);
        assert!(trace.thresholds.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_phase_is_quiet() {
        let (ev, _) = threshold_events(&[0.3; 50], 3, 0.05, ThresholdQuantile::OneSided).unwrap();
        assert!(ev.is_empty());
        assert!(threshold_events(&[0.3; 50], 50, 0.05, ThresholdQuantile::OneSided).is_err());
    }

    #[test]
    fn merge_touching() {
        let e = |t, s, l, u| RawEvent { t, statistic: s, threshold: 1.0, t_l: l, t_u: u };
        let m = merge(vec![e(10, 2.0, 8, 12), e(13, 3.0, 12, 15), e(30, 1.0, 28, 32)]);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].t, m[0].t_l, m[0].t_u), (13, 8, 15));
    }
}
