//! Instantaneous phase by complex demodulation.
//!
//! The demodulated phase of `x_t` at centre frequency `ω` (radians/sample) is
//! `atan2(H[x_t cos ωt], H[x_t sin ωt])`, with `H` a low-pass filter of
//! cutoff `δ` Hz. For `x_t = sin(ωt + φ)` this tends to `φ`.

mod acf;
mod bias;
mod burnin;
mod filter;

pub use acf::{acf, acf_first_zero, first_zero_crossing, Aggregation};
pub use bias::{
    bias_bound, phase_bias_approx, phase_bias_bound, phase_error_bound, theoretical_bias, theoretical_bias_as_printed,
    BiasTerms,
};
pub use burnin::{calibrate_nburn, NburnCalibration};
pub use filter::{
    butterworth_lowpass, ewma_alpha_for_cutoff, ewma_filter, settling_samples, Biquad,
    Butterworth, Ewma, LowPass,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::signals::TimeSeries;

/// A sequence of phase estimates in radians.
///
/// `values` covers every input sample; the first `burn_in` of them are filter
/// start-up and are excluded from inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeries {
    pub values: Vec<f64>,
    pub rate_hz: f64,
    pub burn_in: usize,
    pub straightened: bool,
    /// Passband group delay of the filter that produced the estimate, in samples.
    #[serde(default)]
    pub group_delay: f64,
}

impl PhaseSeries {
    /// A wrapped phase series with no burn-in. Values are wrapped into (−π, π].
    pub fn wrapped(values: Vec<f64>, rate_hz: f64) -> Self {
        Self {
            values: values.into_iter().map(wrap).collect(),
            rate_hz,
            burn_in: 0,
            straightened: false,
            group_delay: 0.0,
        }
    }

    /// A series taken as already straightened (e.g. a synthetic step profile).
    pub fn from_straight(values: Vec<f64>, rate_hz: f64) -> Self {
        Self {
            values,
            rate_hz,
            burn_in: 0,
            straightened: true,
            group_delay: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The samples available for inference.
    pub fn analysis(&self) -> &[f64] {
        &self.values[self.burn_in.min(self.values.len())..]
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Removes 2π discontinuities so consecutive differences lie in (−π, π].
pub fn straighten_phase(phi: &PhaseSeries) -> PhaseSeries {
    let mut values = Vec::with_capacity(phi.len());
    let mut turns = 0.0_f64;
    let mut prev: Option<f64> = None;
    for &v in &phi.values {
        if let Some(p) = prev {
            let d = v - p;
            if d > PI {
                turns -= 1.0;
            } else if d <= -PI {
                turns += 1.0;
            }
        }
        prev = Some(v);
        values.push(v + 2.0 * PI * turns);
    }
    PhaseSeries {
        values,
        straightened: true,
        ..phi.clone()
    }
}

/// `straighten(a) − straighten(b)` on a common time base.
pub fn phase_difference(a: &PhaseSeries, b: &PhaseSeries) -> Result<PhaseSeries> {
    if a.len() != b.len() {
        return Err(invalid(
            "phase_difference",
            format!("length mismatch: {} vs {}", a.len(), b.len()),
        ));
    }
    if (a.rate_hz - b.rate_hz).abs() > 1e-9 * a.rate_hz {
        return Err(invalid("phase_difference", "sampling rates differ"));
    }
    let sa = if a.straightened { a.clone() } else { straighten_phase(a) };
    let sb = if b.straightened { b.clone() } else { straighten_phase(b) };
    Ok(PhaseSeries {
        values: sa.values.iter().zip(&sb.values).map(|(x, y)| x - y).collect(),
        rate_hz: a.rate_hz,
        burn_in: a.burn_in.max(b.burn_in),
        straightened: true,
        group_delay: a.group_delay.max(b.group_delay),
    })
}

/// Low-pass filter used inside the demodulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterSpec {
    /// First-order EWMA with the given weight.
    Ewma { alpha: f64 },
    /// Causal Butterworth low-pass; the cutoff is the demodulation half-bandwidth.
    Butterworth { order: usize },
}

/// Demodulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemodConfig {
    /// Centre frequency in Hz.
    pub center_freq: f64,
    /// Half-bandwidth δ in Hz; the low-pass cutoff.
    pub half_bandwidth: f64,
    pub filter: FilterSpec,
    /// Overrides the default burn-in when set.
    #[serde(default)]
    pub burn_in: Option<usize>,
}

impl Default for DemodConfig {
    /// Fourth-order Butterworth, 9 Hz centre, 1 Hz half-bandwidth.
    fn default() -> Self {
        Self::butterworth(9.0, 1.0, 4)
    }
}

impl DemodConfig {
    pub fn butterworth(center_freq: f64, half_bandwidth: f64, order: usize) -> Self {
        Self {
            center_freq,
            half_bandwidth,
            filter: FilterSpec::Butterworth { order },
            burn_in: None,
        }
    }

    pub fn ewma(center_freq: f64, half_bandwidth: f64, alpha: f64) -> Self {
        Self {
            center_freq,
            half_bandwidth,
            filter: FilterSpec::Ewma { alpha },
            burn_in: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        let lo = self.center_freq - self.half_bandwidth;
        let hi = self.center_freq + self.half_bandwidth;
        if !(self.half_bandwidth > 0.0) {
            return Err(invalid("half_bandwidth", "must be positive"));
        }
        if !(lo > 0.0 && hi < rate_hz / 2.0) {
            return Err(invalid(
                "center_freq",
                format!(
                    "band ({lo}, {hi}) Hz must lie inside (0, {}) Hz (Nyquist)",
                    rate_hz / 2.0
                ),
            ));
        }
        match self.filter {
            FilterSpec::Ewma { alpha } => crate::error::ensure_open_unit("alpha", alpha),
            FilterSpec::Butterworth { order } if order == 0 => {
                Err(invalid("order", "Butterworth order must be at least 1"))
            }
            FilterSpec::Butterworth { .. } => Ok(()),
        }
    }

    pub(crate) fn low_pass(&self, rate_hz: f64) -> Result<Box<dyn LowPass>> {
        Ok(match self.filter {
            FilterSpec::Ewma { alpha } => Box::new(Ewma::new(alpha)?),
            FilterSpec::Butterworth { order } => {
                Box::new(Butterworth::design(order, self.half_bandwidth, rate_hz)?)
            }
        })
    }

    /// Passband group delay in samples.
    pub fn group_delay(&self, rate_hz: f64) -> Result<f64> {
        Ok(self.low_pass(rate_hz)?.group_delay())
    }

    /// Burn-in used when none is configured: the number of samples after which
    /// at most 10⁻⁶ of the filter's impulse-response energy remains.
    pub fn default_burn_in(&self, rate_hz: f64) -> Result<usize> {
        Ok(match self.burn_in {
            Some(b) => b,
            None => settling_samples(self.low_pass(rate_hz)?.as_mut(), 1e-6),
        })
    }
}

/// The two quadrature components `(H[x sin ωt], H[x cos ωt])`.
pub fn demodulate_components(x: &TimeSeries, cfg: &DemodConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate(x.rate_hz)?;
    let omega = 2.0 * PI * cfg.center_freq / x.rate_hz;
    let mut fs = cfg.low_pass(x.rate_hz)?;
    let mut fc = cfg.low_pass(x.rate_hz)?;
    let mut ys = Vec::with_capacity(x.len());
    let mut yc = Vec::with_capacity(x.len());
    for (i, &v) in x.samples.iter().enumerate() {
        let (s, c) = (omega * (x.start_index + i) as f64).sin_cos();
        ys.push(fs.step(v * s));
        yc.push(fc.step(v * c));
    }
    Ok((ys, yc))
}

/// Wrapped instantaneous phase of `x` in the band `center_freq ± half_bandwidth`.
pub fn complex_demodulate(x: &TimeSeries, cfg: &DemodConfig) -> Result<PhaseSeries> {
    let (ys, yc) = demodulate_components(x, cfg)?;
    let values = ys.iter().zip(&yc).map(|(s, c)| c.atan2(*s)).collect();
    Ok(PhaseSeries {
        values,
        rate_hz: x.rate_hz,
        burn_in: cfg.default_burn_in(x.rate_hz)?,
        straightened: false,
        group_delay: cfg.group_delay(x.rate_hz)?,
    })
}

/// Demodulates and straightens in one go.
pub fn straight_phase(x: &TimeSeries, cfg: &DemodConfig) -> Result<PhaseSeries> {
    Ok(straighten_phase(&complex_demodulate(x, cfg)?))
}
