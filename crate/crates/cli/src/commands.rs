//! Subcommand implementations. Each returns the files it wrote, relative to
//! the output directory, for the manifest.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use phaseshift::detect::{
    calibrate_isimin, calibrate_nmin, detect_alpha_grid, parametric_critical, power_analysis, Detection,
    DetectorConfig, Method, NullSimulator, NullTable, ShiftEvent, ShiftExperiment, StatKind,
};
use phaseshift::error::Error;
use phaseshift::eval::bench::{MethodScore, OscillatorBenchmark, RosslerBenchmark};
use phaseshift::eval::{
    accuracy, isi_powerlaw, isis_seconds, match_indices, roc_curve, uniformity_test, ConfusionCounts, PowerLawFit,
    RocCurve, UniformityTest,
};
use phaseshift::io::{read_json, read_table_csv, write_json, write_table_csv, SampledTable};
use phaseshift::phase::{
    calibrate_nburn, phase_difference, straight_phase, straighten_phase, PhaseSeries,
};
use phaseshift::seed;
use phaseshift::signals::{
    gen_oscillator, gen_shift_profile, mix_noise, phase_slips, poincare_phase, simulate_rossler, weight_from_snr,
    PhaseProfile, TimeSeries,
};
use phaseshift::Result;

use crate::cache::{Cache, CacheStatus};
use crate::config::RunConfig;
use crate::{Benchmark, CalibrateArgs, CalibrationKind, Command, DetectArgs, EvaluateArgs, GlobalArgs};

const MANIFEST: &str = "manifest.json";

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

/// Ground truth written by the simulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub rate_hz: f64,
    pub n_samples: usize,
    /// First sample that belongs to the analysed stretch.
    pub analysis_start: usize,
    pub events: Vec<ShiftEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PhaseProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectMetadata {
    pub input: String,
    pub channels: Vec<String>,
    pub method: Method,
    pub rate_hz: f64,
    pub n_samples: usize,
    pub analysis_start: usize,
    pub group_delay: f64,
    pub detector: DetectorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_table: Option<CacheStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectFile {
    pub metadata: DetectMetadata,
    pub runs: Vec<Detection>,
}

pub fn run(g: &GlobalArgs, cmd: Command) -> Result<()> {
    if let Some(t) = g.threads {
        // a second call in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let (cmd, cfg) = match cmd {
        Command::Rerun { manifest } => {
            let m: Manifest = read_json(&manifest)?;
            (m.command, m.config)
        }
        c => {
            let mut cfg = match &g.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            apply_flags(&mut cfg, g, &c);
            (c, cfg)
        }
    };
    cfg.detector.validate()?;
    let cache = Cache::new(g.cache_dir.as_deref());
    let out = g.out_dir.as_path();
    let outputs = match &cmd {
        Command::SimulateOscillator(_) => simulate_oscillator(&cfg, out)?,
        Command::SimulateRossler(_) => simulate_rossler_cmd(&cfg, out)?,
        Command::Detect(a) => detect(&cfg, a, &cache, out)?,
        Command::Calibrate(a) => calibrate(&cfg, a, &cache, out)?,
        Command::Evaluate(a) => evaluate(&cfg, a, out)?,
        Command::Rerun { .. } => return Err(invalid("manifest", "a manifest cannot record a rerun")),
    };
    let manifest = Manifest {
        tool: "phaseshift".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        config: cfg,
        outputs,
    };
    write_json(&out.join(MANIFEST), &manifest)
}

fn apply_flags(cfg: &mut RunConfig, g: &GlobalArgs, cmd: &Command) {
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(a) = g.alpha {
        cfg.detector.alpha = a;
    }
    if let Some(m) = g.method {
        cfg.detector.method = m;
    }
    match cmd {
        Command::SimulateOscillator(a) => {
            let o = &mut cfg.oscillator;
            o.duration_s = a.duration.unwrap_or(o.duration_s);
            o.shifts = a.shifts.unwrap_or(o.shifts);
            o.snr_db = a.snr_db.unwrap_or(o.snr_db);
            o.delta_min = a.delta_min.unwrap_or(o.delta_min);
        }
        Command::SimulateRossler(a) => {
            let r = &mut cfg.rossler;
            r.duration_s = a.duration.unwrap_or(r.duration_s);
            r.params.coupling = a.coupling.unwrap_or(r.params.coupling);
            r.params.delta_omega = a.delta_omega.unwrap_or(r.params.delta_omega);
            if let Some(f) = a.coupling_form {
                r.params.coupling_form = f.into();
            }
        }
        Command::Calibrate(a) => {
            cfg.calibrate.replicates = a.replicates.unwrap_or(cfg.calibrate.replicates);
            cfg.calibrate.n_analysis = a.n.unwrap_or(cfg.calibrate.n_analysis);
        }
        _ => {}
    }
}

fn simulate_oscillator(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let o = &cfg.oscillator;
    let n = (o.duration_s * o.rate_hz).round() as usize;
    let gap = (o.isi_min_s * o.rate_hz).round() as usize;
    cfg.demod.validate(o.rate_hz)?;
    let burn = cfg.demod.default_burn_in(o.rate_hz)?;
    let mut profile = gen_shift_profile(o.shifts, o.delta_min, gap, n, seed::derive_seed(cfg.seed, "sim-profile", 0))?;
    profile.base_phase = -PI + 2.0 * PI * seed::derived_rng(cfg.seed, "sim-base-phase", 0).random::<f64>();
    let profile = profile.offset(burn);
    let clean = gen_oscillator(o.f0_hz, o.rate_hz, &profile, burn + n)?;
    let x = mix_noise(&clean, weight_from_snr(o.snr_db)?, seed::derive_seed(cfg.seed, "sim-noise", 0))?;
    write_table_csv(&out.join("signal.csv"), &SampledTable::from_series(&[("x", &x)])?)?;
    let truth = TruthFile {
        rate_hz: o.rate_hz,
        n_samples: x.len(),
        analysis_start: burn,
        events: profile
            .events
            .iter()
            .map(|e| ShiftEvent::truth(e.index, e.delta, o.rate_hz))
            .collect(),
        profile: Some(profile),
    };
    write_json(&out.join("truth.json"), &truth)?;
    Ok(vec!["signal.csv".into(), "truth.json".into()])
}

fn simulate_rossler_cmd(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let r = &cfg.rossler;
    let tr = simulate_rossler(&r.params, r.duration_s, seed::derive_seed(cfg.seed, "sim-rossler", 0))?;
    let ch = tr.channels();
    let named: Vec<(&str, &TimeSeries)> = phaseshift::signals::RosslerTrajectory::CHANNELS
        .iter()
        .copied()
        .zip(ch)
        .collect();
    write_table_csv(&out.join("rossler.csv"), &SampledTable::from_series(&named)?)?;
    let p1 = poincare_phase(&tr.x1, &tr.y1)?;
    let p2 = poincare_phase(&tr.x2, &tr.y2)?;
    let diff = phase_difference(&p1, &p2)?;
    let rate = r.params.output_rate_hz;
    let table = SampledTable {
        rate_hz: rate,
        start_index: 0,
        names: vec!["phase1".into(), "phase2".into(), "difference".into()],
        columns: vec![p1.values.clone(), p2.values.clone(), diff.values.clone()],
    };
    write_table_csv(&out.join("poincare.csv"), &table)?;
    let settle = rate.round() as usize;
    let truth = TruthFile {
        rate_hz: rate,
        n_samples: diff.len(),
        analysis_start: 0,
        events: phase_slips(&diff, settle, r.slip_margin)?
            .into_iter()
            .map(|s| ShiftEvent::truth(s.index, s.delta, rate))
            .collect(),
        profile: None,
    };
    write_json(&out.join("truth.json"), &truth)?;
    Ok(vec!["rossler.csv".into(), "poincare.csv".into(), "truth.json".into()])
}

fn null_simulator(cfg: &RunConfig, rate_hz: f64) -> Result<NullSimulator> {
    let o = &cfg.oscillator;
    NullSimulator::new(o.f0_hz, rate_hz, weight_from_snr(o.snr_db)?, cfg.demod)
}

#[derive(Serialize, Deserialize)]
struct TableKey {
    sim: NullSimulator,
    kind: StatKind,
    n_min: usize,
    n_max: usize,
    replicates: usize,
    seed: u64,
}

fn null_table(
    cfg: &RunConfig,
    sim: &NullSimulator,
    kind: StatKind,
    n_max: usize,
    cache: &Cache,
) -> Result<(NullTable, CacheStatus)> {
    let key = TableKey {
        sim: *sim,
        kind,
        n_min: cfg.detector.n_min,
        n_max,
        replicates: cfg.null_table.replicates,
        seed: seed::derive_seed(cfg.seed, "null-table", kind as u64),
    };
    cache.get_or("null-table", &key, || {
        NullTable::build(sim, &[kind], key.n_min, n_max, key.replicates, key.seed)?
            .pop()
            .ok_or_else(|| Error::Numerical("null table build returned nothing".into()))
    })
}

fn load_phase(cfg: &RunConfig, a: &DetectArgs) -> Result<(PhaseSeries, Vec<String>)> {
    let table = read_table_csv(&a.input, None)?;
    let channels = if a.channels.is_empty() {
        vec![table.names[0].clone()]
    } else {
        a.channels.clone()
    };
    if channels.len() > 2 {
        return Err(invalid("channels", "give one channel, or two for a phase difference"));
    }
    let mut phases = Vec::new();
    for c in &channels {
        let s = table.series(c).ok_or_else(|| Error::Format {
            path: a.input.display().to_string(),
            reason: format!("no channel `{c}`; available: {}", table.names.join(", ")),
        })?;
        let phi = if a.phase_input {
            straighten_phase(&PhaseSeries::wrapped(s.samples, s.rate_hz)).with_burn_in(cfg.demod.burn_in.unwrap_or(0))
        } else {
            straight_phase(&s, &cfg.demod)?
        };
        phases.push(phi);
    }
    let phi = match phases.as_slice() {
        [p] => p.clone(),
        [a, b] => phase_difference(a, b)?,
        _ => unreachable!(),
    };
    Ok((phi, channels))
}

fn detect(cfg: &RunConfig, a: &DetectArgs, cache: &Cache, out: &Path) -> Result<Vec<String>> {
    let (phi, channels) = load_phase(cfg, a)?;
    let alphas = if a.alphas.is_empty() {
        vec![cfg.detector.alpha]
    } else {
        a.alphas.clone()
    };
    let det = DetectorConfig {
        seed: seed::derive_seed(cfg.seed, "detect", 0),
        ..cfg.detector
    };
    let (table, status) = if det.method.is_parametric() {
        let sim = null_simulator(cfg, phi.rate_hz)?;
        let (t, s) = null_table(cfg, &sim, det.method.kind(), phi.analysis().len(), cache)?;
        (Some(t), Some(s))
    } else {
        (None, None)
    };
    let runs = detect_alpha_grid(&phi, &det, &alphas, table.as_ref())?;
    let file = DetectFile {
        metadata: DetectMetadata {
            input: a.input.display().to_string(),
            channels,
            method: det.method,
            rate_hz: phi.rate_hz,
            n_samples: phi.len(),
            analysis_start: phi.burn_in,
            group_delay: phi.group_delay,
            detector: det,
            null_table: status,
        },
        runs,
    };
    write_json(&out.join("events.json"), &file)?;
    Ok(vec!["events.json".into()])
}

/// Inclusive linear grid `lo..hi` with `k` points.
fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Parses `snr=-5..20,delta=0.05..3.14`.
fn parse_grid(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut snr = None;
    let mut delta = None;
    for part in s.split(',') {
        let (name, range) = part
            .split_once('=')
            .ok_or_else(|| invalid("grid", format!("expected name=lo..hi, got `{part}`")))?;
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| invalid("grid", format!("expected lo..hi, got `{range}`")))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| invalid("grid", format!("bad number `{v}`")));
        let axis = linspace(parse(lo)?, parse(hi)?, 5);
        match name.trim() {
            "snr" => snr = Some(axis),
            "delta" => delta = Some(axis),
            other => return Err(invalid("grid", format!("unknown axis `{other}`"))),
        }
    }
    Ok((
        snr.ok_or_else(|| invalid("grid", "missing snr axis"))?,
        delta.ok_or_else(|| invalid("grid", "missing delta axis"))?,
    ))
}

#[derive(Serialize)]
struct CalibrationFile<T: Serialize> {
    kind: CalibrationKind,
    method: Method,
    alpha: f64,
    replicates: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    null_table: Option<CacheStatus>,
    result: T,
}

#[derive(Serialize, Deserialize)]
struct CriticalKey {
    sim: NullSimulator,
    kind: StatKind,
    n: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CriticalReport {
    critical: f64,
    gev: phaseshift::detect::GevFit,
    cache: CacheStatus,
    /// Exceedance rate of the critical value on fresh replicates.
    audit_rate: f64,
    audit_replicates: usize,
}

#[derive(Serialize)]
struct PowerReport {
    surface: phaseshift::detect::PowerSurface,
    /// Adjacent grid pairs where power drops by more than 0.1.
    monotonicity_violations: usize,
}

fn calibrate(cfg: &RunConfig, a: &CalibrateArgs, cache: &Cache, out: &Path) -> Result<Vec<String>> {
    let c = &cfg.calibrate;
    let rate = cfg.oscillator.rate_hz;
    let sim = null_simulator(cfg, rate)?;
    let det = cfg.detector;
    let b = c.replicates;
    let s = seed::derive_seed(cfg.seed, "calibrate", a.kind as u64);
    let table = |n_max: usize| -> Result<(Option<NullTable>, Option<CacheStatus>)> {
        if det.method.is_parametric() {
            let (t, st) = null_table(cfg, &sim, det.method.kind(), n_max, cache)?;
            Ok((Some(t), Some(st)))
        } else {
            Ok((None, None))
        }
    };
    let header = |null_table| CalibrationFileHeader {
        kind: a.kind,
        method: det.method,
        alpha: det.alpha,
        replicates: b,
        seed: s,
        null_table,
    };
    let path = out.join("calibration.json");
    match a.kind {
        CalibrationKind::Nburn => {
            let r = calibrate_nburn(&sim, c.n_analysis, det.alpha, b, None, s)?;
            write_json(&path, &header(None).with(r))?;
        }
        CalibrationKind::Nmin => {
            let (t, st) = table(c.ceiling)?;
            let r = calibrate_nmin(&det, &sim, t.as_ref(), b, s, c.ceiling)?;
            write_json(&path, &header(st).with(r))?;
        }
        CalibrationKind::Isimin => {
            let (t, st) = table(c.n_analysis)?;
            let r = calibrate_isimin(&det, &sim, t.as_ref(), c.delta, c.n_analysis, b, s)?;
            write_json(&path, &header(st).with(r))?;
        }
        CalibrationKind::Critical => {
            let kind = det.method.kind();
            let key = CriticalKey {
                sim,
                kind,
                n: c.n_analysis,
                alpha: det.alpha,
                replicates: b,
                seed: s,
            };
            let (crit, status) = cache.get_or("critical", &key, || {
                parametric_critical(kind, &sim, key.n, key.alpha, b, s)
            })?;
            let audit_seed = seed::derive_seed(s, "critical-audit", 0);
            let hits: Vec<bool> = (0..b as u64)
                .into_par_iter()
                .map(|i| Ok(kind.max(&sim.null_replicate(key.n, audit_seed, i)?)?.0 > crit.critical))
                .collect::<Result<_>>()?;
            let report = CriticalReport {
                critical: crit.critical,
                gev: crit.gev,
                cache: status,
                audit_rate: hits.iter().filter(|&&h| h).count() as f64 / b as f64,
                audit_replicates: b,
            };
            write_json(&path, &header(None).with(report))?;
        }
        CalibrationKind::Power => {
            let (snr, delta) = match &a.grid {
                Some(g) => parse_grid(g)?,
                None => (c.snr_db.clone(), c.delta_grid.clone()),
            };
            let exp = ShiftExperiment {
                cfg: det,
                sim,
                n: c.n_analysis,
                replicates: b,
                table_replicates: cfg.null_table.replicates,
                tolerance: cfg.tolerance(),
                seed: s,
                snr_db: &snr,
            };
            let surface = power_analysis(&exp, &delta, c.target_power)?;
            let mut violations = 0;
            for (i, row) in surface.power.iter().enumerate() {
                for j in 0..row.len() {
                    if j + 1 < row.len() && row[j + 1] < row[j] - 0.1 {
                        violations += 1;
                    }
                    if i + 1 < surface.power.len() && surface.power[i + 1][j] < row[j] - 0.1 {
                        violations += 1;
                    }
                }
            }
            let report = PowerReport {
                surface,
                monotonicity_violations: violations,
            };
            write_json(&path, &header(None).with(report))?;
        }
    }
    Ok(vec!["calibration.json".into()])
}

struct CalibrationFileHeader {
    kind: CalibrationKind,
    method: Method,
    alpha: f64,
    replicates: usize,
    seed: u64,
    null_table: Option<CacheStatus>,
}

impl CalibrationFileHeader {
    fn with<T: Serialize>(self, result: T) -> CalibrationFile<T> {
        CalibrationFile {
            kind: self.kind,
            method: self.method,
            alpha: self.alpha,
            replicates: self.replicates,
            seed: self.seed,
            null_table: self.null_table,
            result,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaCounts {
    pub alpha: f64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub datasets: usize,
    pub matching_tolerance: usize,
    pub decision_window: usize,
    pub per_alpha: Vec<AlphaCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocCurve>,
    /// α whose detections feed the ISI and uniformity analyses.
    pub analysis_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law: Option<PowerLawFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_law_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniformity: Option<UniformityTest>,
}

fn evaluate(cfg: &RunConfig, a: &EvaluateArgs, out: &Path) -> Result<Vec<String>> {
    if let Some(b) = a.benchmark {
        return benchmark(cfg, b, a.datasets, out);
    }
    if a.events.len() != a.truth.len() || a.events.is_empty() {
        return Err(invalid("events", "give one --truth per --events file, at least one pair"));
    }
    let mut files = Vec::new();
    for (e, t) in a.events.iter().zip(&a.truth) {
        let d: DetectFile = read_json(e)?;
        let tr: TruthFile = read_json(t)?;
        if (d.metadata.rate_hz - tr.rate_hz).abs() > 1e-9 * tr.rate_hz {
            return Err(invalid(
                "events",
                format!(
                    "{} is sampled at {} Hz but {} at {} Hz",
                    e.display(),
                    d.metadata.rate_hz,
                    t.display(),
                    tr.rate_hz
                ),
            ));
        }
        files.push((d, tr));
    }
    let alphas: Vec<f64> = files[0].0.runs.iter().map(|r| r.alpha).collect();
    if files.iter().any(|(d, _)| d.runs.iter().map(|r| r.alpha).ne(alphas.iter().copied())) {
        return Err(invalid("events", "every detection file must cover the same α grid"));
    }
    let tol = cfg.tolerance();
    let window = cfg.decision_window();
    let analysed = |events: &[ShiftEvent], start: usize| -> Vec<usize> {
        events.iter().filter(|e| e.index >= start).map(|e| e.index - start).collect()
    };
    let mut per_alpha = Vec::with_capacity(alphas.len());
    for (k, &alpha) in alphas.iter().enumerate() {
        let mut total = ConfusionCounts {
            matching_tolerance: tol,
            decision_window: window,
            ..ConfusionCounts::default()
        };
        for (d, tr) in &files {
            let start = d.metadata.analysis_start.max(tr.analysis_start);
            let n = d.metadata.n_samples.min(tr.n_samples).saturating_sub(start);
            let mut det = analysed(&d.runs[k].events, start);
            det.sort_unstable();
            let mut truth = analysed(&tr.events, start);
            truth.sort_unstable();
            total = total.add(&match_indices(&det, &truth, tol, n, window)?);
        }
        let acc = accuracy(&total).unwrap_or(f64::NAN);
        per_alpha.push(AlphaCounts {
            alpha,
            counts: total,
            accuracy: acc,
        });
    }
    let roc = if alphas.len() >= 3 {
        Some(roc_curve(&per_alpha.iter().map(|p| (p.alpha, p.counts.clone())).collect::<Vec<_>>())?)
    } else {
        None
    };
    let k = alphas
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - cfg.detector.alpha).abs().total_cmp(&(y.1 - cfg.detector.alpha).abs()))
        .map_or(0, |(i, _)| i);
    let events: Vec<Vec<ShiftEvent>> = files.iter().map(|(d, _)| d.runs[k].events.clone()).collect();
    let rate = files[0].1.rate_hz;
    let (power_law, power_law_error) = match isi_powerlaw(&isis_seconds(&events, rate), &cfg.evaluate.power_law) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let uniformity = match &a.stimuli {
        Some(p) => {
            let mut stim: Vec<f64> = read_json(p)?;
            stim.sort_by(f64::total_cmp);
            let times: Vec<f64> = events.iter().flatten().map(|e| e.time_s).collect();
            Some(uniformity_test(
                &times,
                &stim,
                cfg.evaluate.stimulus_window_s,
                cfg.evaluate.stimulus_bins,
            )?)
        }
        None => None,
    };
    let report = EvaluationReport {
        datasets: files.len(),
        matching_tolerance: tol,
        decision_window: window,
        per_alpha,
        roc,
        analysis_alpha: alphas.get(k).copied().unwrap_or(cfg.detector.alpha),
        power_law,
        power_law_error,
        uniformity,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(vec!["report.json".into()])
}

#[derive(Serialize)]
struct BenchmarkReport<C: Serialize, R: Serialize> {
    benchmark: Benchmark,
    settings: C,
    results: R,
}

fn benchmark(cfg: &RunConfig, which: Benchmark, datasets: Option<usize>, out: &Path) -> Result<Vec<String>> {
    let path = out.join("report.json");
    match which {
        Benchmark::Oscillator => {
            let o = &cfg.oscillator;
            let b = OscillatorBenchmark {
                f0_hz: o.f0_hz,
                rate_hz: o.rate_hz,
                snr_db: o.snr_db,
                datasets: datasets.unwrap_or(20),
                shifts: o.shifts,
                delta_min: o.delta_min,
                gap_s: o.isi_min_s,
                duration_s: o.duration_s,
                demod: cfg.demod,
                detector: cfg.detector,
                table_replicates: cfg.null_table.replicates,
                seed: cfg.seed,
                ..OscillatorBenchmark::default()
            };
            let r: Vec<MethodScore> = b.run(&Method::ALL)?;
            write_json(&path, &BenchmarkReport { benchmark: which, settings: &b, results: r })?;
        }
        Benchmark::Rossler => {
            let b = RosslerBenchmark {
                datasets: datasets.unwrap_or(50),
                seed: cfg.seed,
                ..RosslerBenchmark::default()
            };
            let r = b.run(&[Method::CusumBlock, Method::PdThreshold])?;
            write_json(&path, &BenchmarkReport { benchmark: which, settings: &b, results: r })?;
        }
        Benchmark::RosslerIsi => {
            let b = RosslerBenchmark {
                datasets: datasets.unwrap_or(100),
                duration_s: 1200.0,
                seed: cfg.seed,
                ..RosslerBenchmark::default()
            };
            let r = b.isi_study(cfg.detector.alpha, &cfg.evaluate.power_law)?;
            write_json(&path, &BenchmarkReport { benchmark: which, settings: &b, results: r })?;
        }
    }
    Ok(vec!["report.json".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parses_both_axes() {
        let (s, d) = parse_grid("snr=-5..20,delta=0.05..3.14").unwrap();
        assert_eq!(s, vec![-5.0, 1.25, 7.5, 13.75, 20.0]);
        assert_eq!(d.len(), 5);
        assert!((d[4] - 3.14).abs() < 1e-12);
        assert!(parse_grid("snr=1..2").is_err());
        assert!(parse_grid("snr=1..2,freq=1..2").is_err());
    }
}
