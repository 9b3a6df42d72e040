//! Test-signal generation: noisy oscillators with piecewise-constant phase
//! and coupled Rössler trajectories.

mod rossler;

pub use rossler::{
    phase_slips, poincare_phase, PhaseSlip, simulate_rossler, simulate_single_rossler, CouplingForm, RosslerParams,
    RosslerTrajectory,
};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_open_unit, invalid, Result};
use crate::seed;

/// A uniformly sampled real-valued signal.
///
/// Sample `i` sits at time `(start_index + i) / rate_hz` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    pub rate_hz: f64,
    #[serde(default)]
    pub start_index: usize,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(invalid("rate_hz", format!("must be positive, got {rate_hz}")));
        }
        Ok(Self {
            samples,
            rate_hz,
            start_index: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_of(&self, i: usize) -> f64 {
        (self.start_index + i) as f64 / self.rate_hz
    }

    /// Root-mean-square amplitude.
    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Sub-series `[from, to)`, keeping absolute time via `start_index`.
    pub fn slice(&self, from: usize, to: usize) -> TimeSeries {
        TimeSeries {
            samples: self.samples[from..to].to_vec(),
            rate_hz: self.rate_hz,
            start_index: self.start_index + from,
        }
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// One step of a phase profile: from sample `index` on, the phase is offset
/// by an additional `delta` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub index: usize,
    pub delta: f64,
}

/// Piecewise-constant phase `φ_t = base_phase + Σ_{index_i ≤ t} delta_i`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub base_phase: f64,
    pub events: Vec<PhaseStep>,
    /// Events generated past the end of the signal and dropped.
    #[serde(default)]
    pub truncated: usize,
}

impl PhaseProfile {
    pub fn constant(base_phase: f64) -> Self {
        Self {
            base_phase,
            ..Self::default()
        }
    }

    pub fn with_steps(base_phase: f64, steps: &[(usize, f64)]) -> Result<Self> {
        let events: Vec<PhaseStep> = steps
            .iter()
            .map(|&(index, delta)| PhaseStep { index, delta })
            .collect();
        if events.windows(2).any(|w| w[1].index <= w[0].index) {
            return Err(invalid("steps", "event indices must be strictly increasing"));
        }
        Ok(Self {
            base_phase,
            events,
            truncated: 0,
        })
    }

    /// The phase trajectory over `n` samples.
    pub fn phase_at_each(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut level = self.base_phase;
        let mut next = self.events.iter().peekable();
        for t in 0..n {
            while let Some(ev) = next.peek() {
                if ev.index <= t {
                    level += ev.delta;
                    next.next();
                } else {
                    break;
                }
            }
            out.push(level);
        }
        out
    }

    /// Shifts every event by `offset` samples.
    pub fn offset(&self, offset: usize) -> PhaseProfile {
        PhaseProfile {
            base_phase: self.base_phase,
            events: self
                .events
                .iter()
                .map(|e| PhaseStep {
                    index: e.index + offset,
                    delta: e.delta,
                })
                .collect(),
            truncated: self.truncated,
        }
    }
}

/// Unit-amplitude oscillator `sin(2π f0 t / rate + φ_t)`.
pub fn gen_oscillator(f0: f64, rate: f64, profile: &PhaseProfile, n: usize) -> Result<TimeSeries> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !(rate > 0.0) {
        return Err(invalid("rate", format!("must be positive, got {rate}")));
    }
    if !(f0 > 0.0 && f0 < rate / 2.0) {
        return Err(invalid(
            "f0",
            format!(
                "must lie strictly between 0 and the Nyquist frequency {}, got {f0}",
                rate / 2.0
            ),
        ));
    }
    let omega = 2.0 * PI * f0 / rate;
    let phase = profile.phase_at_each(n);
    let samples = phase
        .iter()
        .enumerate()
        .map(|(t, p)| (omega * t as f64 + p).sin())
        .collect();
    TimeSeries::new(samples, rate)
}

/// `r·x/‖x‖ + (1−r)·ε/‖ε‖` with ε i.i.d. N(0,1) and ‖·‖ the RMS norm.
pub fn mix_noise(clean: &TimeSeries, r: f64, seed: u64) -> Result<TimeSeries> {
    ensure_open_unit("r", r)?;
    let signal_rms = clean.rms();
    if !(signal_rms > 0.0) {
        return Err(invalid("clean", "signal has zero power"));
    }
    let mut rng = seed::rng(seed);
    let noise: Vec<f64> = (0..clean.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise_rms = rms(&noise);
    let samples = clean
        .samples
        .iter()
        .zip(&noise)
        .map(|(x, e)| r * x / signal_rms + (1.0 - r) * e / noise_rms)
        .collect();
    Ok(TimeSeries {
        samples,
        rate_hz: clean.rate_hz,
        start_index: clean.start_index,
    })
}

pub fn snr_from_weight(r: f64) -> Result<f64> {
    ensure_open_unit("r", r)?;
    Ok(10.0 * (r * r / ((1.0 - r) * (1.0 - r))).log10())
}

pub fn weight_from_snr(snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(invalid("snr_db", "must be finite"));
    }
    let k = 10f64.powf(snr_db / 20.0);
    Ok(k / (1.0 + k))
}

/// Random shift schedule: magnitudes uniform on `(−π, −Δmin] ∪ [Δmin, π]`,
/// gaps `isi_min + Exp(mean = isi_min)`, first event one gap after sample 0.
/// Events landing at or past `n` are dropped and counted in `truncated`.
pub fn gen_shift_profile(
    m: usize,
    delta_min: f64,
    isi_min: usize,
    n: usize,
    seed: u64,
) -> Result<PhaseProfile> {
    if !(delta_min > 0.0 && delta_min < PI) {
        return Err(invalid(
            "delta_min",
            format!("must lie in (0, π), got {delta_min}"),
        ));
    }
    if isi_min == 0 {
        return Err(invalid("isi_min", "must be positive"));
    }
    let mut rng = seed::rng(seed);
    let mut profile = PhaseProfile::default();
    let mut t = 0.0_f64;
    for _ in 0..m {
        let magnitude = delta_min + (PI - delta_min) * rng.random::<f64>();
        let delta = if rng.random::<bool>() { magnitude } else { -magnitude };
        // inverse-CDF exponential draw
        let u: f64 = rng.random();
        t += isi_min as f64 - isi_min as f64 * (1.0 - u).ln();
        let index = t.round() as usize;
        if index < n {
            profile.events.push(PhaseStep { index, delta });
        } else {
            profile.truncated += 1;
        }
    }
    Ok(profile)
}
