//! Phase-shift detection: statistics, critical values and segmentation.

mod bootstrap;
mod calibrate;
mod gev;
mod null;
mod recursive;
mod stats;
mod threshold;

pub use bootstrap::{
    block_bootstrap_critical, block_bootstrap_maxima, block_surrogate, BlockBootstrap, MIN_BLOCKS,
};
pub use calibrate::{
    calibrate_isimin, calibrate_nmin, isi_resolution, null_rejection_rate, power_analysis,
    CalibrationSearch, IsiResolution, PowerSurface, RateCheck, ShiftExperiment,
};
pub use gev::{fit_gev, gev_lmoments, GevFit};
pub(crate) use null::upper_quantile;
pub use null::{length_grid, parametric_critical, NullSimulator, NullTable, ParametricCritical};
pub use recursive::{segment, CriticalSource, Exclusion, RawEvent, SegmentTest};
pub use stats::{cusum_stat, pd_stat, StatKind, StatSeries};
pub use threshold::{threshold_events, threshold_quantile, ThresholdQuantile, ThresholdTrace};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_open_unit, invalid, Result};
use crate::phase::{acf_first_zero, Aggregation, PhaseSeries};

/// Detection method: statistic plus calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    CusumParametric,
    CusumBlock,
    PdParametric,
    PdThreshold,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::CusumParametric,
        Method::CusumBlock,
        Method::PdParametric,
        Method::PdThreshold,
    ];

    pub fn kind(self) -> StatKind {
        match self {
            Method::CusumParametric | Method::CusumBlock => StatKind::Cusum,
            Method::PdParametric | Method::PdThreshold => StatKind::Pd,
        }
    }

    pub fn is_parametric(self) -> bool {
        matches!(self, Method::CusumParametric | Method::PdParametric)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::CusumParametric => "cusum-parametric",
            Method::CusumBlock => "cusum-block",
            Method::PdParametric => "pd-parametric",
            Method::PdThreshold => "pd-threshold",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid("method", format!("unknown method `{s}`")))
    }
}

/// A detected or ground-truth phase shift.
///
/// Indices are samples of the input signal. For detections they are
/// corrected for the demodulation filter's group delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEvent {
    pub index: usize,
    pub time_s: f64,
    /// Mean phase after minus mean phase before, in radians.
    #[serde(rename = "magnitude_rad")]
    pub magnitude: f64,
    pub statistic: f64,
    pub threshold: f64,
    #[serde(rename = "t_L")]
    pub t_l: usize,
    #[serde(rename = "t_U")]
    pub t_u: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

impl ShiftEvent {
    /// A known shift of `delta` radians at `index`.
    pub fn truth(index: usize, delta: f64, rate_hz: f64) -> Self {
        Self {
            index,
            time_s: index as f64 / rate_hz,
            magnitude: delta,
            statistic: 0.0,
            threshold: 0.0,
            t_l: index,
            t_u: index,
            method: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub method: Method,
    pub alpha: f64,
    /// Shortest segment that is tested.
    pub n_min: usize,
    /// Exclusion half-width for the CUSUM statistic, in samples.
    pub isi_min: usize,
    /// Dependence scale; estimated from the series when unset.
    pub tau: Option<usize>,
    /// Segment length for estimating τ, in seconds.
    pub tau_segment_s: f64,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub quantile: ThresholdQuantile,
    /// Extra exclusion on each side of a parametric PD run, in samples;
    /// the series' filter group delay when unset.
    pub pd_margin: Option<usize>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            method: Method::CusumParametric,
            alpha: 0.05,
            n_min: 64,
            isi_min: 250,
            tau: None,
            tau_segment_s: 4.0,
            bootstrap_b: 1000,
            seed: 0,
            quantile: ThresholdQuantile::OneSided,
            pd_margin: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_open_unit("alpha", self.alpha)?;
        if self.isi_min == 0 {
            return Err(invalid("isi_min", "must be positive"));
        }
        if self.method == Method::CusumBlock && self.bootstrap_b < 200 {
            return Err(invalid("bootstrap_b", "need at least 200 replicates"));
        }
        if self.tau == Some(0) {
            return Err(invalid("tau", "must be positive"));
        }
        Ok(())
    }

    /// τ from the configuration or, failing that, from the series.
    pub fn resolve_tau(&self, phi: &PhaseSeries) -> Result<usize> {
        match self.tau {
            Some(t) => Ok(t),
            None => acf_first_zero(phi, self.tau_segment_s, Aggregation::Mean),
        }
    }

    /// Matching tolerance implied by the configuration: `isi_min / 2`.
    pub fn tolerance(&self) -> usize {
        (self.isi_min / 2).max(1)
    }
}

/// Events found at one significance level, with the tests that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub alpha: f64,
    pub events: Vec<ShiftEvent>,
    /// Segment tests of the recursive methods, in analysis coordinates.
    #[serde(default)]
    pub tests: Vec<SegmentTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<ThresholdTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
}

/// Runs one method over an α grid, sharing expensive state between levels.
pub struct Detector<'a> {
    cfg: DetectorConfig,
    table: Option<&'a NullTable>,
    bootstrap: Option<BlockBootstrap>,
    tau: Option<usize>,
}

impl<'a> Detector<'a> {
    /// `table` must be the null table of the method's statistic for the
    /// parametric methods and is ignored otherwise.
    pub fn new(cfg: DetectorConfig, phi: &PhaseSeries, table: Option<&'a NullTable>) -> Result<Self> {
        cfg.validate()?;
        let tau = match cfg.method {
            Method::CusumBlock | Method::PdThreshold => Some(cfg.resolve_tau(phi)?),
            _ => None,
        };
        if cfg.method.is_parametric() {
            match table {
                Some(t) if t.kind == cfg.method.kind() => {}
                _ => {
                    return Err(invalid(
                        "table",
                        format!("{} needs a null table of its statistic", cfg.method),
                    ))
                }
            }
        }
        let bootstrap = match (cfg.method, tau) {
            (Method::CusumBlock, Some(t)) => Some(BlockBootstrap::new(t, cfg.bootstrap_b, cfg.seed)?),
            _ => None,
        };
        Ok(Self {
            cfg,
            table,
            bootstrap,
            tau,
        })
    }

    pub fn tau(&self) -> Option<usize> {
        self.tau
    }

    pub fn run(&mut self, phi: &PhaseSeries, alpha: f64) -> Result<Detection> {
        ensure_open_unit("alpha", alpha)?;
        let x = phi.analysis();
        let cfg = self.cfg;
        let (raw, tests, trace) = match cfg.method {
            Method::PdThreshold => {
                let (ev, tr) = threshold_events(x, self.tau.unwrap_or(1), alpha, cfg.quantile)?;
                (ev, Vec::new(), Some(tr))
            }
            m => {
                let exclusion = match m.kind() {
                    StatKind::Cusum => Exclusion::HalfWidth(cfg.isi_min),
                    StatKind::Pd => Exclusion::AboveThreshold {
                        margin: cfg.pd_margin.unwrap_or(phi.group_delay.round() as usize),
                    },
                };
                let mut source = match (&mut self.bootstrap, self.table) {
                    (Some(b), _) => CriticalSource::Block(b),
                    (None, Some(t)) => CriticalSource::Table(t),
                    (None, None) => unreachable!("checked in Detector::new"),
                };
                let (ev, tests) = segment(x, m.kind(), cfg.n_min, exclusion, alpha, &mut source)?;
                (ev, tests, None)
            }
        };
        Ok(Detection {
            alpha,
            events: to_events(&raw, phi, cfg.isi_min, Some(cfg.method)),
            tests,
            trace,
            tau: self.tau,
        })
    }
}

/// Detects events at `cfg.alpha`.
pub fn detect_events(phi: &PhaseSeries, cfg: &DetectorConfig, table: Option<&NullTable>) -> Result<Detection> {
    Detector::new(*cfg, phi, table)?.run(phi, cfg.alpha)
}

/// Detects events at each level of `alphas`.
pub fn detect_alpha_grid(
    phi: &PhaseSeries,
    cfg: &DetectorConfig,
    alphas: &[f64],
    table: Option<&NullTable>,
) -> Result<Vec<Detection>> {
    let mut d = Detector::new(*cfg, phi, table)?;
    alphas.iter().map(|&a| d.run(phi, a)).collect()
}

/// Recursive CUSUM detection with a parametric table or block bootstrap,
/// depending on `cfg.method`.
pub fn recursive_cusum_detect(
    phi: &PhaseSeries,
    cfg: &DetectorConfig,
    table: Option<&NullTable>,
) -> Result<Vec<ShiftEvent>> {
    if cfg.method.kind() != StatKind::Cusum {
        return Err(invalid("method", "recursive CUSUM detection needs a CUSUM method"));
    }
    Ok(detect_events(phi, cfg, table)?.events)
}

/// Threshold detection on the phase derivative.
pub fn threshold_pd_detect(
    phi: &PhaseSeries,
    tau: usize,
    alpha: f64,
    rule: ThresholdQuantile,
) -> Result<Vec<ShiftEvent>> {
    let (raw, _) = threshold_events(phi.analysis(), tau, alpha, rule)?;
    Ok(to_events(&raw, phi, (phi.rate_hz / 4.0).round() as usize, Some(Method::PdThreshold)))
}

fn trimmed_mean(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 10;
    let kept = &s[k..s.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Converts analysis-coordinate events to signal coordinates, estimating
/// each magnitude from 10%-trimmed means over `min(isi_min, 250 ms)`
/// windows just outside the exclusion interval.
pub fn to_events(raw: &[RawEvent], phi: &PhaseSeries, isi_min: usize, method: Option<Method>) -> Vec<ShiftEvent> {
    let x = phi.analysis();
    let n = x.len();
    let w = isi_min.min((0.25 * phi.rate_hz).round() as usize).max(1);
    let offset = phi.burn_in as f64 - phi.group_delay.round();
    let place = |t: usize| (t as f64 + offset).max(0.0) as usize;
    raw.iter()
        .map(|e| {
            let before_end = (e.t_l + 1).min(n).max(1);
            let before = &x[before_end.saturating_sub(w)..before_end];
            let after_start = e.t_u.min(n - 1);
            let after = &x[after_start..(after_start + w).min(n)];
            let index = place(e.t);
            ShiftEvent {
                index,
                time_s: index as f64 / phi.rate_hz,
                magnitude: trimmed_mean(after) - trimmed_mean(before),
                statistic: e.statistic,
                threshold: e.threshold,
                t_l: place(e.t_l),
                t_u: place(e.t_u),
                method,
            }
        })
        .collect()
}
