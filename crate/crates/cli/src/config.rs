//! Run configuration: defaults, then the `--config` file, then flags.

use std::path::Path;

use serde::{Deserialize, Serialize};

use phaseshift::detect::DetectorConfig;
use phaseshift::eval::PowerLawConfig;
use phaseshift::phase::DemodConfig;
use phaseshift::signals::RosslerParams;
use phaseshift::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub oscillator: OscillatorConfig,
    pub rossler: RosslerConfig,
    pub demod: DemodConfig,
    pub detector: DetectorConfig,
    pub null_table: NullTableConfig,
    pub calibrate: CalibrateConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            oscillator: OscillatorConfig::default(),
            rossler: RosslerConfig::default(),
            demod: DemodConfig::default(),
            detector: DetectorConfig::default(),
            null_table: NullTableConfig::default(),
            calibrate: CalibrateConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

/// Noisy oscillator with a random shift schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatorConfig {
    pub f0_hz: f64,
    pub rate_hz: f64,
    pub snr_db: f64,
    pub shifts: usize,
    pub delta_min: f64,
    /// Minimum gap of the shift schedule, in seconds.
    pub isi_min_s: f64,
    /// Length after the demodulation burn-in, in seconds.
    pub duration_s: f64,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        Self {
            f0_hz: 9.0,
            rate_hz: 250.0,
            snr_db: 0.0,
            shifts: 20,
            delta_min: 0.15,
            isi_min_s: 1.0,
            duration_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosslerConfig {
    #[serde(flatten)]
    pub params: RosslerParams,
    pub duration_s: f64,
    /// Confirmation margin of the slip detector, in radians.
    pub slip_margin: f64,
}

impl Default for RosslerConfig {
    fn default() -> Self {
        Self {
            params: RosslerParams::default(),
            duration_s: 600.0,
            slip_margin: std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Null simulation behind the parametric critical values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NullTableConfig {
    pub replicates: usize,
}

impl Default for NullTableConfig {
    fn default() -> Self {
        Self { replicates: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Replicates per evaluated candidate.
    pub replicates: usize,
    /// Analysed samples per replicate.
    pub n_analysis: usize,
    /// Shift magnitude for the ISI_min search.
    pub delta: f64,
    /// Largest segment length tried by the N_min search.
    pub ceiling: usize,
    pub snr_db: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub target_power: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            replicates: 400,
            n_analysis: 2500,
            delta: 1.0,
            ceiling: 20_000,
            snr_db: vec![-5.0, 0.0, 5.0, 10.0, 20.0],
            delta_grid: vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.14],
            target_power: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Matching tolerance in samples; `isi_min / 2` when unset.
    pub tolerance: Option<usize>,
    /// True-negative window in samples; the tolerance when unset.
    pub decision_window: Option<usize>,
    pub power_law: PowerLawConfig,
    pub stimulus_window_s: f64,
    pub stimulus_bins: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            tolerance: None,
            decision_window: None,
            power_law: PowerLawConfig::default(),
            stimulus_window_s: 0.5,
            stimulus_bins: 10,
        }
    }
}

impl RunConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let bad = |reason: String| Error::InvalidParameter {
            name: "config",
            reason: format!("{}: {reason}", path.display()),
        };
        let raw: serde_json::Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| bad(e.to_string()))?
        };
        check_rossler_keys(&raw).map_err(bad)?;
        serde_json::from_value(raw).map_err(|e| bad(e.to_string()))
    }

    pub fn tolerance(&self) -> usize {
        self.evaluate.tolerance.unwrap_or_else(|| self.detector.tolerance())
    }

    pub fn decision_window(&self) -> usize {
        self.evaluate.decision_window.unwrap_or_else(|| self.tolerance())
    }
}

/// `deny_unknown_fields` does not combine with `flatten`, so the keys of the
/// Rössler section are checked against those of the default.
fn check_rossler_keys(raw: &serde_json::Value) -> std::result::Result<(), String> {
    let Some(section) = raw.get("rossler").and_then(|v| v.as_object()) else {
        return Ok(());
    };
    let known = serde_json::to_value(RosslerConfig::default()).map_err(|e| e.to_string())?;
    match section.keys().find(|k| known.get(k.as_str()).is_none()) {
        Some(k) => Err(format!("unknown field `{k}` in [rossler]")),
        None => Ok(()),
    }
}
