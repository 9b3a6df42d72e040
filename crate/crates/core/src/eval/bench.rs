//! End-to-end benchmarks: simulate, detect over an α grid, score.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::detect::{
    detect_alpha_grid, DetectorConfig, Method, NullSimulator, NullTable, ShiftEvent,
};
use crate::error::{invalid, Error, Result};
use crate::eval::{isi_powerlaw, isis_seconds, roc_from_detections, PowerLawConfig, PowerLawFit, RocCurve};
use crate::phase::{acf_first_zero, phase_difference, straight_phase, Aggregation, DemodConfig, PhaseSeries};
use crate::seed;
use crate::signals::{
    gen_oscillator, gen_shift_profile, mix_noise, phase_slips, simulate_rossler, weight_from_snr, CouplingForm,
    RosslerParams,
};

pub const TABLE_ALPHAS: [f64; 9] = [0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2];

/// A labelled dataset: straightened phase plus ground truth in analysis
/// coordinates (sample 0 is the first analysed sample).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub phi: PhaseSeries,
    pub truth: Vec<ShiftEvent>,
}

impl Dataset {
    pub fn analysed_len(&self) -> usize {
        self.phi.analysis().len()
    }
}

/// Score of one method over a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub roc: RocCurve,
    pub mean_events_per_dataset: Vec<(f64, f64)>,
}

impl MethodScore {
    pub fn macc(&self) -> f64 {
        self.roc.max_accuracy.0
    }

    pub fn auroc(&self) -> f64 {
        self.roc.auroc
    }
}

/// Simple-oscillator benchmark: noisy oscillators with random shift schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillatorBenchmark {
    pub f0_hz: f64,
    pub rate_hz: f64,
    pub snr_db: f64,
    pub datasets: usize,
    pub shifts: usize,
    pub delta_min: f64,
    /// Minimum gap of the generated schedule, in seconds.
    pub gap_s: f64,
    /// Analysed duration of each dataset, in seconds.
    pub duration_s: f64,
    pub demod: DemodConfig,
    pub detector: DetectorConfig,
    pub alphas: Vec<f64>,
    /// Null replicates behind the parametric critical values.
    pub table_replicates: usize,
    pub seed: u64,
}

impl Default for OscillatorBenchmark {
    fn default() -> Self {
        Self {
            f0_hz: 9.0,
            rate_hz: 250.0,
            snr_db: 0.0,
            datasets: 20,
            shifts: 20,
            delta_min: 0.15,
            gap_s: 1.0,
            duration_s: 60.0,
            demod: DemodConfig::butterworth(9.0, 1.0, 4),
            detector: DetectorConfig::default(),
            alphas: TABLE_ALPHAS.to_vec(),
            table_replicates: 1000,
            seed: 2024,
        }
    }
}

impl OscillatorBenchmark {
    pub fn simulator(&self) -> Result<NullSimulator> {
        NullSimulator::new(self.f0_hz, self.rate_hz, weight_from_snr(self.snr_db)?, self.demod)
    }

    pub fn n_analysis(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }

    /// The labelled datasets; identical for every method.
    pub fn datasets(&self) -> Result<Vec<Dataset>> {
        let sim = self.simulator()?;
        let n = self.n_analysis();
        let gap = (self.gap_s * self.rate_hz).round() as usize;
        (0..self.datasets as u64)
            .into_par_iter()
            .map(|d| {
                let mut rng = seed::derived_rng(self.seed, "bench-base-phase", d);
                let mut profile = gen_shift_profile(
                    self.shifts,
                    self.delta_min,
                    gap,
                    n,
                    seed::derive_seed(self.seed, "bench-profile", d),
                )?;
                profile.base_phase = -PI + 2.0 * PI * rng.random::<f64>();
                let truth = profile
                    .events
                    .iter()
                    .map(|e| ShiftEvent::truth(e.index, e.delta, self.rate_hz))
                    .collect();
                let clean = gen_oscillator(self.f0_hz, self.rate_hz, &profile.offset(sim.n_burn), sim.n_burn + n)?;
                let noisy = mix_noise(&clean, sim.weight, seed::derive_seed(self.seed, "bench-noise", d))?;
                let phi = straight_phase(&noisy, &self.demod.with_burn_in(sim.n_burn))?;
                Ok(Dataset { phi, truth })
            })
            .collect()
    }

    /// Null table of the method's statistic covering every segment length
    /// the recursion can test.
    pub fn table(&self, method: Method) -> Result<Option<NullTable>> {
        if !method.is_parametric() {
            return Ok(None);
        }
        let sim = self.simulator()?;
        let s = seed::derive_seed(self.seed, "bench-table", method.kind() as u64);
        Ok(NullTable::build(
            &sim,
            &[method.kind()],
            self.detector.n_min,
            self.n_analysis(),
            self.table_replicates,
            s,
        )?
        .pop())
    }

    pub fn run(&self, methods: &[Method]) -> Result<Vec<MethodScore>> {
        let sets = self.datasets()?;
        methods
            .iter()
            .map(|&m| {
                let cfg = DetectorConfig {
                    method: m,
                    ..self.detector
                };
                let table = self.table(m)?;
                let tol = cfg.tolerance();
                score_method(&sets, &cfg, table.as_ref(), &self.alphas, (tol, tol), self.seed)
            })
            .collect()
    }
}

/// Runs one method over every dataset at every α and scores it against the
/// ground truth. `scoring` is `(matching tolerance, decision window)` in samples.
pub fn score_method(
    sets: &[Dataset],
    cfg: &DetectorConfig,
    table: Option<&NullTable>,
    alphas: &[f64],
    scoring: (usize, usize),
    seed: u64,
) -> Result<MethodScore> {
    let detections = detect_all(sets, cfg, table, alphas, seed)?;
    let truth: Vec<Vec<ShiftEvent>> = sets.iter().map(|s| s.truth.clone()).collect();
    let lengths: Vec<usize> = sets.iter().map(Dataset::analysed_len).collect();
    let roc = roc_from_detections(alphas, &detections, &truth, &lengths, scoring.0, scoring.1)?;
    let mean_events_per_dataset = alphas
        .iter()
        .zip(&detections)
        .map(|(&a, d)| (a, d.iter().map(Vec::len).sum::<usize>() as f64 / sets.len() as f64))
        .collect();
    Ok(MethodScore {
        method: cfg.method,
        roc,
        mean_events_per_dataset,
    })
}

/// Detections as `[alpha][dataset]`, with indices in analysis coordinates.
pub fn detect_all(
    sets: &[Dataset],
    cfg: &DetectorConfig,
    table: Option<&NullTable>,
    alphas: &[f64],
    seed: u64,
) -> Result<Vec<Vec<Vec<ShiftEvent>>>> {
    if sets.is_empty() {
        return Err(invalid("datasets", "need at least one dataset"));
    }
    let per_set: Vec<Vec<Vec<ShiftEvent>>> = sets
        .par_iter()
        .enumerate()
        .map(|(d, s)| {
            let c = DetectorConfig {
                seed: seed::derive_seed(seed, "bench-detector", d as u64),
                ..*cfg
            };
            let runs = detect_alpha_grid(&s.phi, &c, alphas, table)?;
            let burn = s.phi.burn_in;
            Ok(runs
                .into_iter()
                .map(|r| {
                    r.events
                        .into_iter()
                        .map(|mut e| {
                            e.index = e.index.saturating_sub(burn);
                            e
                        })
                        .collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    // transpose to [alpha][dataset]
    Ok((0..alphas.len())
        .map(|a| per_set.iter().map(|runs| runs[a].clone()).collect())
        .collect())
}

/// Coupled Rössler benchmark: the detector runs on the demodulated phase
/// difference of `x1` and `x2`; ground truth is the set of 2π slips of the
/// Poincaré phase difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosslerBenchmark {
    pub params: RosslerParams,
    pub datasets: usize,
    /// Analysed duration of each dataset, in seconds.
    pub duration_s: f64,
    pub demod: DemodConfig,
    pub detector: DetectorConfig,
    /// Coupling of the slip-free runs that set τ.
    pub strong_coupling: f64,
    pub tau_runs: usize,
    /// Confirmation margin of the slip detector, in radians.
    pub slip_margin: f64,
    /// Matching tolerance in seconds.
    pub tolerance_s: f64,
    /// Length of the windows counted as true negatives, in seconds.
    pub decision_window_s: f64,
    pub alphas: Vec<f64>,
    pub seed: u64,
}

impl Default for RosslerBenchmark {
    fn default() -> Self {
        Self {
            params: RosslerParams {
                coupling_form: CouplingForm::SelfMinusOther,
                delta_omega: 0.16,
                ..RosslerParams::default()
            },
            datasets: 50,
            duration_s: 600.0,
            demod: DemodConfig::butterworth(9.25, 0.15, 4),
            detector: DetectorConfig {
                method: Method::CusumBlock,
                n_min: 250,
                isi_min: 1250,
                tau_segment_s: 20.0,
                ..DetectorConfig::default()
            },
            strong_coupling: 0.5,
            tau_runs: 4,
            slip_margin: PI / 2.0,
            tolerance_s: 5.0,
            decision_window_s: 5.0,
            alphas: TABLE_ALPHAS.to_vec(),
            seed: 2024,
        }
    }
}

/// Inter-shift intervals of the block-bootstrap CUSUM detections on long
/// Rössler runs, in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiStudy {
    pub alpha: f64,
    pub tau: usize,
    pub datasets: usize,
    pub diverged: usize,
    pub events: usize,
    pub truth_events: usize,
    pub intervals: usize,
    pub mean_min: f64,
    pub sd_min: f64,
    pub fit: std::result::Result<PowerLawFit, String>,
}

/// Labelled Rössler datasets and the number of runs that diverged and were
/// replaced.
#[derive(Debug, Clone)]
pub struct RosslerSets {
    pub sets: Vec<Dataset>,
    pub diverged: usize,
}

impl RosslerBenchmark {
    fn rate(&self) -> f64 {
        self.params.output_rate_hz
    }

    fn burn_in(&self) -> Result<usize> {
        self.demod.default_burn_in(self.rate())
    }

    /// Phase difference and Poincaré difference of one run, both with the
    /// demodulation burn-in, or `None` when the trajectory diverged.
    fn run_one(&self, params: &RosslerParams, s: u64) -> Result<Option<(PhaseSeries, PhaseSeries)>> {
        let burn = self.burn_in()?;
        let total = self.duration_s + burn as f64 / self.rate();
        let tr = match simulate_rossler(params, total, s) {
            Ok(t) => t,
            Err(Error::Numerical(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let demod = self.demod.with_burn_in(burn);
        let phi = phase_difference(&straight_phase(&tr.x1, &demod)?, &straight_phase(&tr.x2, &demod)?)?;
        let poincare = tr.poincare_difference()?.with_burn_in(burn);
        Ok(Some((phi, poincare)))
    }

    /// Runs with seeds derived from `label`, skipping diverged ones, until
    /// `count` have succeeded.
    fn runs(&self, params: &RosslerParams, label: &str, count: usize) -> Result<(Vec<(PhaseSeries, PhaseSeries)>, usize)> {
        let mut out = Vec::with_capacity(count);
        let mut next = 0u64;
        let mut diverged = 0;
        while out.len() < count {
            let want = (count - out.len()) as u64;
            let batch: Vec<Option<(PhaseSeries, PhaseSeries)>> = (next..next + want)
                .into_par_iter()
                .map(|k| self.run_one(params, seed::derive_seed(self.seed, label, k)))
                .collect::<Result<_>>()?;
            next += want;
            for r in batch {
                match r {
                    Some(r) => out.push(r),
                    None => diverged += 1,
                }
            }
            if diverged > 10 * count + 10 {
                return Err(Error::Numerical(format!(
                    "{diverged} of {next} Rössler runs diverged"
                )));
            }
        }
        Ok((out, diverged))
    }

    /// The labelled datasets; identical for every method.
    pub fn datasets(&self) -> Result<RosslerSets> {
        let (runs, diverged) = self.runs(&self.params, "rossler-bench", self.datasets)?;
        let sets = runs
            .into_iter()
            .map(|(phi, poincare)| {
                let burn = poincare.burn_in;
                let truth = phase_slips(&poincare, 1, self.slip_margin)?
                    .into_iter()
                    .map(|s| ShiftEvent::truth(s.index - burn, s.delta, self.rate()))
                    .collect();
                Ok(Dataset { phi, truth })
            })
            .collect::<Result<_>>()?;
        Ok(RosslerSets { sets, diverged })
    }

    /// τ of the demodulated phase difference under strong coupling, averaged
    /// over `runs` slip-free runs.
    pub fn strong_coupling_tau(&self, runs: usize) -> Result<usize> {
        let params = RosslerParams {
            coupling: self.strong_coupling,
            ..self.params
        };
        let (rs, _) = self.runs(&params, "rossler-tau", runs.max(1))?;
        let taus = rs
            .iter()
            .map(|(phi, _)| acf_first_zero(phi, self.detector.tau_segment_s, Aggregation::Mean))
            .collect::<Result<Vec<_>>>()?;
        Ok((taus.iter().sum::<usize>() as f64 / taus.len() as f64).round() as usize)
    }

    /// Detector configuration for `method`; τ comes from
    /// [`Self::strong_coupling_tau`] unless one is configured.
    pub fn detector_for(&self, method: Method) -> Result<DetectorConfig> {
        if method.is_parametric() {
            return Err(invalid("method", "the Rössler benchmark uses the nonparametric methods"));
        }
        let tau = match self.detector.tau {
            Some(t) => t,
            None => self.strong_coupling_tau(self.tau_runs)?,
        };
        Ok(DetectorConfig {
            method,
            tau: Some(tau),
            ..self.detector
        })
    }

    pub fn scoring(&self) -> (usize, usize) {
        (
            (self.tolerance_s * self.rate()).round() as usize,
            (self.decision_window_s * self.rate()).round() as usize,
        )
    }

    pub fn run(&self, methods: &[Method]) -> Result<Vec<MethodScore>> {
        let sets = self.datasets()?.sets;
        let mut tau = self.detector.tau;
        methods
            .iter()
            .map(|&m| {
                let cfg = Self {
                    detector: DetectorConfig { tau, ..self.detector },
                    ..self.clone()
                }
                .detector_for(m)?;
                tau = cfg.tau;
                score_method(&sets, &cfg, None, &self.alphas, self.scoring(), self.seed)
            })
            .collect()
    }

    /// Detects with the block-bootstrap CUSUM at `alpha` on every dataset and
    /// fits the tail of the pooled inter-shift intervals, measured in minutes.
    pub fn isi_study(&self, alpha: f64, fit: &PowerLawConfig) -> Result<IsiStudy> {
        let data = self.datasets()?;
        let cfg = self.detector_for(Method::CusumBlock)?;
        let det = detect_all(&data.sets, &cfg, None, &[alpha], self.seed)?;
        let isis: Vec<f64> = isis_seconds(&det[0], self.rate()).into_iter().map(|v| v / 60.0).collect();
        let n = isis.len() as f64;
        let mean = isis.iter().sum::<f64>() / n;
        let sd = (isis.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        Ok(IsiStudy {
            alpha,
            tau: cfg.tau.unwrap_or(0),
            datasets: data.sets.len(),
            diverged: data.diverged,
            events: det[0].iter().map(Vec::len).sum(),
            truth_events: data.sets.iter().map(|s| s.truth.len()).sum(),
            intervals: isis.len(),
            mean_min: mean,
            sd_min: sd,
            fit: isi_powerlaw(&isis, fit).map_err(|e| e.to_string()),
        })
    }
}
