//! Simulation-based calibration of segment lengths, exclusion widths and power.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    bootstrap::BlockBootstrap, detect_events, null::NullSimulator, null::NullTable, recursive::CriticalSource,
    threshold::threshold_events, DetectorConfig, Method, StatKind,
};
use crate::error::{invalid, Error, Result};
use crate::seed;
use crate::signals::{weight_from_snr, PhaseProfile};

/// Rejections out of independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateCheck {
    pub rejections: usize,
    pub trials: usize,
}

impl RateCheck {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.trials.max(1) as f64
    }

    /// Binomial standard error of a rate of `alpha` over these trials.
    pub fn se(&self, alpha: f64) -> f64 {
        (alpha * (1.0 - alpha) / self.trials.max(1) as f64).sqrt()
    }

    /// `rate ≤ α + k·se`.
    pub fn at_most(&self, alpha: f64, k: f64) -> bool {
        self.rate() <= alpha + k * self.se(alpha)
    }

    /// `|rate − α| ≤ k·se`.
    pub fn within(&self, alpha: f64, k: f64) -> bool {
        (self.rate() - alpha).abs() <= k * self.se(alpha)
    }
}

/// Result of a doubling-then-bisection search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSearch {
    pub value: usize,
    pub check: RateCheck,
    /// Every evaluated candidate with its rejection rate, in evaluation order.
    pub evaluated: Vec<(usize, f64)>,
}

/// Smallest `v ≥ start` with `pass(v)`, assuming `pass` is monotone; the
/// search doubles from `start` up to `ceiling` and then bisects.
fn search(
    start: usize,
    ceiling: usize,
    mut eval: impl FnMut(usize) -> Result<RateCheck>,
    pass: impl Fn(&RateCheck) -> bool,
    what: &str,
) -> Result<CalibrationSearch> {
    let mut evaluated = Vec::new();
    let mut lo = None;
    let mut v = start.max(1);
    let (hi, hi_check) = loop {
        let c = eval(v)?;
        evaluated.push((v, c.rate()));
        if pass(&c) {
            break (v, c);
        }
        if v >= ceiling {
            return Err(Error::Unreachable(format!(
                "{what}: rejection rate {:.4} still too high at the ceiling {ceiling}; evaluated {evaluated:?}",
                c.rate()
            )));
        }
        lo = Some(v);
        v = (2 * v).min(ceiling);
    };
    let (mut lo, mut hi, mut best) = match lo {
        None => {
            return Ok(CalibrationSearch {
                value: hi,
                check: hi_check,
                evaluated,
            })
        }
        Some(l) => (l, hi, hi_check),
    };
    while hi - lo > 1.max(hi / 64) {
        let mid = lo + (hi - lo) / 2;
        let c = eval(mid)?;
        evaluated.push((mid, c.rate()));
        if pass(&c) {
            hi = mid;
            best = c;
        } else {
            lo = mid;
        }
    }
    Ok(CalibrationSearch {
        value: hi,
        check: best,
        evaluated,
    })
}

/// Whether the top-level test of `cfg.method` rejects on `x`.
fn rejects(cfg: &DetectorConfig, table: Option<&NullTable>, x: &[f64], tau: usize, seed: u64) -> Result<bool> {
    match cfg.method {
        Method::PdThreshold => Ok(!threshold_events(x, tau, cfg.alpha, cfg.quantile)?.0.is_empty()),
        Method::CusumBlock => {
            let mut b = BlockBootstrap::new(tau, cfg.bootstrap_b, seed)?;
            let Some(phi) = CriticalSource::Block(&mut b).critical(x, 0, x.len(), cfg.alpha)? else {
                return Ok(false);
            };
            Ok(StatKind::Cusum.max(x)?.0 > phi)
        }
        m => {
            let t = table.ok_or_else(|| invalid("table", "parametric methods need a null table"))?;
            match t.critical(x.len(), cfg.alpha) {
                Some(phi) => Ok(m.kind().max(x)?.0 > phi),
                None => Ok(false),
            }
        }
    }
}

fn tau_of(cfg: &DetectorConfig) -> usize {
    cfg.tau.unwrap_or(1)
}

/// Rate at which the full detector reports any event on `trials` fresh null
/// replicates of `n` analysed samples.
pub fn null_rejection_rate(
    cfg: &DetectorConfig,
    sim: &NullSimulator,
    table: Option<&NullTable>,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<RateCheck> {
    let hits: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let phi = sim.simulate(&PhaseProfile::default(), n, seed, i)?;
            let c = DetectorConfig {
                seed: seed::derive_seed(seed, "null-rate-bootstrap", i),
                ..*cfg
            };
            Ok(!detect_events(&phi, &c, table)?.events.is_empty())
        })
        .collect::<Result<_>>()?;
    Ok(RateCheck {
        rejections: hits.iter().filter(|&&h| h).count(),
        trials,
    })
}

/// Smallest segment length whose null rejection rate is at most
/// `α + 2·se` over `b` fresh replicates.
pub fn calibrate_nmin(
    cfg: &DetectorConfig,
    sim: &NullSimulator,
    table: Option<&NullTable>,
    b: usize,
    seed: u64,
    ceiling: usize,
) -> Result<CalibrationSearch> {
    cfg.validate()?;
    if b < 200 {
        return Err(invalid("b", format!("need at least 200 replicates, got {b}")));
    }
    let tau = tau_of(cfg);
    let start = match cfg.method {
        Method::CusumBlock => 2 * tau * super::MIN_BLOCKS,
        Method::PdThreshold => tau + 1,
        _ => table.map_or(4, |t| t.lengths[0]),
    };
    let ceiling = match (cfg.method.is_parametric(), table) {
        (true, Some(t)) => ceiling.min(t.max_len()),
        _ => ceiling,
    };
    let eval = |n: usize| -> Result<RateCheck> {
        let hits: Vec<bool> = (0..b as u64)
            .into_par_iter()
            .map(|i| {
                let x = sim.null_replicate(n, seed::derive_seed(seed, "nmin", n as u64), i)?;
                rejects(cfg, table, &x, tau, seed::derive_seed(seed, "nmin-bootstrap", i))
            })
            .collect::<Result<_>>()?;
        Ok(RateCheck {
            rejections: hits.iter().filter(|&&h| h).count(),
            trials: b,
        })
    };
    search(start, ceiling, eval, |c| c.at_most(cfg.alpha, 2.0), "n_min")
}

/// Smallest exclusion half-width `w` such that, around a single shift of
/// `delta` radians in the middle of `n` analysed samples, the parts left of
/// `t̂ − w` and right of `t̂ + w` each reject at most `α + 2·se` of the time.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_isimin(
    cfg: &DetectorConfig,
    sim: &NullSimulator,
    table: Option<&NullTable>,
    delta: f64,
    n: usize,
    b: usize,
    seed: u64,
) -> Result<CalibrationSearch> {
    cfg.validate()?;
    if b < 200 {
        return Err(invalid("b", format!("need at least 200 replicates, got {b}")));
    }
    let tau = tau_of(cfg);
    let kind = cfg.method.kind();
    let profile = PhaseProfile::with_steps(0.0, &[(n / 2, delta)])?;
    let reps: Vec<(Vec<f64>, usize)> = (0..b as u64)
        .into_par_iter()
        .map(|i| {
            let phi = sim.simulate(&profile, n, seed, i)?;
            let x = phi.values[sim.n_burn..].to_vec();
            let t_hat = kind.max(&x)?.1;
            Ok((x, t_hat))
        })
        .collect::<Result<_>>()?;
    let eval = |w: usize| -> Result<RateCheck> {
        let sides: Vec<(bool, bool)> = reps
            .par_iter()
            .enumerate()
            .map(|(i, (x, t))| {
                let s = seed::derive_seed(seed, "isimin-bootstrap", i as u64);
                let left = &x[..t.saturating_sub(w)];
                let right = &x[(t + w).min(x.len())..];
                let test = |part: &[f64]| -> Result<bool> {
                    if part.len() < kind.min_len() {
                        return Ok(false);
                    }
                    rejects(cfg, table, part, tau, s)
                };
                Ok((test(left)?, test(right)?))
            })
            .collect::<Result<_>>()?;
        let l = sides.iter().filter(|s| s.0).count();
        let r = sides.iter().filter(|s| s.1).count();
        Ok(RateCheck {
            rejections: l.max(r),
            trials: b,
        })
    };
    search(8, n / 2, eval, |c| c.at_most(cfg.alpha, 2.0), "isi_min")
}

/// Detection power over an SNR × Δ grid, with the smallest Δ reaching the
/// target power at each SNR (linearly interpolated on the grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSurface {
    pub method: Method,
    pub snr_db: Vec<f64>,
    pub delta: Vec<f64>,
    /// `power[i][j]` at `snr_db[i]`, `delta[j]`.
    pub power: Vec<Vec<f64>>,
    pub target_power: f64,
    pub delta_min: Vec<Option<f64>>,
}

fn crossing(xs: &[f64], ys: &[f64], target: f64) -> Option<f64> {
    let j = ys.iter().position(|&p| p >= target)?;
    if j == 0 {
        return Some(xs[0]);
    }
    let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
    Some(x0 + (target - y0) / (y1 - y0) * (x1 - x0))
}

/// Simulation settings shared by the shift experiments.
pub struct ShiftExperiment<'a> {
    pub cfg: DetectorConfig,
    /// Template simulator; its weight is replaced per SNR.
    pub sim: NullSimulator,
    /// Analysed samples per replicate.
    pub n: usize,
    pub replicates: usize,
    /// Null-table replicates for the parametric methods.
    pub table_replicates: usize,
    pub tolerance: usize,
    pub seed: u64,
    pub snr_db: &'a [f64],
}

impl ShiftExperiment<'_> {
    fn simulator(&self, snr: f64) -> Result<NullSimulator> {
        Ok(NullSimulator {
            weight: weight_from_snr(snr)?,
            ..self.sim
        })
    }

    fn table(&self, sim: &NullSimulator, snr_index: usize) -> Result<Option<NullTable>> {
        if !self.cfg.method.is_parametric() {
            return Ok(None);
        }
        let s = seed::derive_seed(self.seed, "experiment-table", snr_index as u64);
        let lo = self.cfg.n_min.max(8).min(self.n);
        Ok(NullTable::build(sim, &[self.cfg.method.kind()], lo, self.n, self.table_replicates, s)?.pop())
    }

    /// Fraction of replicates where every shift of `steps` is matched by a
    /// distinct detected event within the tolerance.
    fn power(&self, sim: &NullSimulator, table: Option<&NullTable>, steps: &[(usize, f64)], label: u64) -> Result<f64> {
        let profile = PhaseProfile::with_steps(0.0, steps)?;
        let hits: Vec<bool> = (0..self.replicates as u64)
            .into_par_iter()
            .map(|i| {
                let s = seed::derive_seed(self.seed, "experiment", label ^ (i << 40));
                let phi = sim.simulate(&profile, self.n, s, i)?;
                let cfg = DetectorConfig { seed: s, ..self.cfg };
                let events = detect_events(&phi, &cfg, table)?.events;
                let mut used = vec![false; events.len()];
                Ok(steps.iter().all(|&(t, _)| {
                    let truth = sim.n_burn + t;
                    let hit = events
                        .iter()
                        .enumerate()
                        .filter(|(k, e)| !used[*k] && e.index.abs_diff(truth) <= self.tolerance)
                        .min_by_key(|(_, e)| e.index.abs_diff(truth))
                        .map(|(k, _)| k);
                    match hit {
                        Some(k) => {
                            used[k] = true;
                            true
                        }
                        None => false,
                    }
                }))
            })
            .collect::<Result<_>>()?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / self.replicates as f64)
    }
}

/// Power to detect a single shift in the middle of the series.
pub fn power_analysis(exp: &ShiftExperiment<'_>, delta_grid: &[f64], target_power: f64) -> Result<PowerSurface> {
    if exp.snr_db.is_empty() || delta_grid.is_empty() {
        return Err(invalid("grid", "SNR and Δ grids must be non-empty"));
    }
    exp.cfg.validate()?;
    let mut power = Vec::with_capacity(exp.snr_db.len());
    for (i, &snr) in exp.snr_db.iter().enumerate() {
        let sim = exp.simulator(snr)?;
        let table = exp.table(&sim, i)?;
        let row = delta_grid
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let steps: Vec<(usize, f64)> = if d == 0.0 { Vec::new() } else { vec![(exp.n / 2, d)] };
                if steps.is_empty() {
                    // power at Δ = 0 is the rate of any event
                    let rc = null_rejection_rate(&exp.cfg, &sim, table.as_ref(), exp.n, exp.replicates, exp.seed)?;
                    return Ok(rc.rate());
                }
                exp.power(&sim, table.as_ref(), &steps, ((i as u64) << 20) | j as u64)
            })
            .collect::<Result<Vec<f64>>>()?;
        power.push(row);
    }
    let delta_min = power.iter().map(|row| crossing(delta_grid, row, target_power)).collect();
    Ok(PowerSurface {
        method: exp.cfg.method,
        snr_db: exp.snr_db.to_vec(),
        delta: delta_grid.to_vec(),
        power,
        target_power,
        delta_min,
    })
}

/// Smallest separation at which two equal shifts are both resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiResolution {
    pub method: Method,
    pub target_power: f64,
    /// `(snr_db, delta, isi_min in samples)`; `None` where even `isi_max` fails.
    pub cells: Vec<(f64, f64, Option<usize>)>,
}

/// For each SNR × Δ cell, bisects for the smallest separation at which
/// both shifts of a two-shift profile are detected with at least
/// `target_power`, searching `[isi_lo, isi_max]` samples.
pub fn isi_resolution(
    exp: &ShiftExperiment<'_>,
    delta_grid: &[f64],
    isi_lo: usize,
    isi_max: usize,
    target_power: f64,
) -> Result<IsiResolution> {
    exp.cfg.validate()?;
    if isi_max >= exp.n || isi_lo == 0 || isi_lo >= isi_max {
        return Err(invalid("isi_max", "need 0 < isi_lo < isi_max < n"));
    }
    let mut cells = Vec::new();
    for (i, &snr) in exp.snr_db.iter().enumerate() {
        let sim = exp.simulator(snr)?;
        let table = exp.table(&sim, i)?;
        for (j, &d) in delta_grid.iter().enumerate() {
            let label = ((i as u64) << 20) | ((j as u64) << 10);
            let ok = |isi: usize| -> Result<bool> {
                let first = (exp.n - isi) / 2;
                let p = exp.power(&sim, table.as_ref(), &[(first, d), (first + isi, d)], label)?;
                Ok(p >= target_power)
            };
            if !ok(isi_max)? {
                cells.push((snr, d, None));
                continue;
            }
            let (mut lo, mut hi) = (isi_lo, isi_max);
            if ok(lo)? {
                cells.push((snr, d, Some(lo)));
                continue;
            }
            while hi - lo > 2 {
                let mid = lo + (hi - lo) / 2;
                if ok(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            cells.push((snr, d, Some(hi)));
        }
    }
    Ok(IsiResolution {
        method: exp.cfg.method,
        target_power,
        cells,
    })
}

pub(crate) fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { (v[m / 2 - 1] + v[m / 2]) / 2.0 })
}

impl IsiResolution {
    /// Median resolved separation over the cells where both `self` and
    /// `other` succeed, in samples.
    pub fn common_median(&self, other: &IsiResolution) -> Option<(f64, f64)> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (x, y) in self.cells.iter().zip(&other.cells) {
            if let (Some(p), Some(q)) = (x.2, y.2) {
                a.push(p as f64);
                b.push(q as f64);
            }
        }
        Some((median(&mut a)?, median(&mut b)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_check_bounds() {
        let c = RateCheck {
            rejections: 60,
            trials: 1000,
        };
        assert!((c.rate() - 0.06).abs() < 1e-15);
        assert!(c.within(0.05, 3.0));
        assert!(!c.within(0.05, 1.0));
        assert!(c.at_most(0.05, 2.0));
    }

    #[test]
    fn search_finds_threshold() {
        let eval = |v: usize| {
            Ok(RateCheck {
                rejections: if v >= 37 { 0 } else { 100 },
                trials: 100,
            })
        };
        let s = search(4, 1000, eval, |c| c.at_most(0.05, 2.0), "t").unwrap();
        assert_eq!(s.value, 37);
        let s = search(40, 1000, eval, |c| c.at_most(0.05, 2.0), "t").unwrap();
        assert_eq!(s.value, 40);
        assert!(matches!(
            search(4, 20, eval, |c| c.at_most(0.05, 2.0), "t"),
            Err(Error::Unreachable(_))
        ));
    }

    #[test]
    fn crossing_interpolates() {
        let x = [0.1, 0.2, 0.3];
        assert_eq!(crossing(&x, &[0.5, 0.7, 0.9], 0.8), Some(0.25));
        assert_eq!(crossing(&x, &[0.9, 1.0, 1.0], 0.8), Some(0.1));
        assert_eq!(crossing(&x, &[0.1, 0.2, 0.3], 0.8), None);
    }
}
