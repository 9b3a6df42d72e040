//! Calibration of the number of start-up samples excluded from inference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{upper_quantile, NullSimulator, StatKind};
use crate::error::{invalid, Error, Result};
use crate::phase::{complex_demodulate, straighten_phase, DemodConfig};
use crate::seed;
use crate::signals::{PhaseProfile, TimeSeries};

/// Outcome of [`calibrate_nburn`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NburnCalibration {
    pub n_burn: usize,
    /// Reference critical values `(cusum, pd)` taken at the largest burn-in.
    pub critical: (f64, f64),
    /// `(burn-in, cusum rate, pd rate)` for every scanned candidate, descending.
    pub rates: Vec<(usize, f64, f64)>,
    pub replicates: usize,
}

/// Scans burn-in candidates downward from `max_burn` and returns the smallest
/// one from which every larger candidate keeps the null rejection rate of both
/// statistics at most `α + 2·se`.
///
/// Each replicate is a noisy oscillator of `max_burn + n_analysis` samples.
/// For a candidate `nb` the demodulator starts cold `nb` samples before the
/// last `n_analysis` samples, so every candidate analyses the same stretch
/// of signal and differs only in how long the filter had to settle. Critical
/// values come from the same replicates at `max_burn`, so the rate there is at
/// most `α` by construction. `sim.n_burn` is ignored. With `max_burn = None`
/// the search starts at four times the filter's settling length (at least 64
/// samples).
pub fn calibrate_nburn(
    sim: &NullSimulator,
    n_analysis: usize,
    alpha_level: f64,
    b: usize,
    max_burn: Option<usize>,
    seed: u64,
) -> Result<NburnCalibration> {
    crate::error::ensure_open_unit("alpha_level", alpha_level)?;
    if b < 100 {
        return Err(invalid("b", format!("need at least 100 replicates, got {b}")));
    }
    if n_analysis < StatKind::Cusum.min_len() {
        return Err(invalid("n_analysis", "too short for the statistics"));
    }
    let cold = DemodConfig { burn_in: None, ..sim.demod };
    let max_burn = match max_burn {
        Some(m) => m,
        None => (4 * cold.default_burn_in(sim.rate_hz)?).max(64),
    };
    let total = max_burn + n_analysis;
    let s = seed::derive_seed(seed, "nburn", 0);
    let signals: Vec<TimeSeries> = (0..b as u64)
        .into_par_iter()
        .map(|i| sim.signal(&PhaseProfile::default(), total, s, i))
        .collect::<Result<_>>()?;
    let maxima = |x: &TimeSeries, nb: usize| -> Result<(f64, f64)> {
        let part = x.slice(max_burn - nb, total);
        let phi = straighten_phase(&complex_demodulate(&part, &cold.with_burn_in(nb))?);
        let a = phi.analysis();
        Ok((StatKind::Cusum.max(a)?.0, StatKind::Pd.max(a)?.0))
    };
    let at = |nb: usize| -> Result<Vec<(f64, f64)>> { signals.par_iter().map(|x| maxima(x, nb)).collect() };

    let reference = at(max_burn)?;
    let mut rc: Vec<f64> = reference.iter().map(|m| m.0).collect();
    let mut rp: Vec<f64> = reference.iter().map(|m| m.1).collect();
    rc.sort_by(f64::total_cmp);
    rp.sort_by(f64::total_cmp);
    let critical = (upper_quantile(&rc, alpha_level), upper_quantile(&rp, alpha_level));

    let limit = alpha_level + 2.0 * (alpha_level * (1.0 - alpha_level) / b as f64).sqrt();
    let step = max_burn.div_ceil(100).max(1);
    let mut rates = Vec::new();
    let mut best = None;
    let mut nb = max_burn as isize;
    while nb >= 0 {
        let n = nb as usize;
        let m = if n == max_burn { reference.clone() } else { at(n)? };
        let c = m.iter().filter(|v| v.0 > critical.0).count() as f64 / b as f64;
        let p = m.iter().filter(|v| v.1 > critical.1).count() as f64 / b as f64;
        rates.push((n, c, p));
        if c > limit || p > limit {
            break;
        }
        best = Some(n);
        nb -= step as isize;
    }
    match best {
        Some(n_burn) => Ok(NburnCalibration {
            n_burn,
            critical,
            rates,
            replicates: b,
        }),
        None => Err(Error::Unreachable(format!(
            "null rejection rate exceeds {limit:.4} already at the maximum burn-in {max_burn}: {:?}",
            rates[0]
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(demod: DemodConfig) -> NullSimulator {
        NullSimulator::new(9.0, 250.0, 0.5, demod).unwrap()
    }

    #[test]
    fn wider_band_needs_no_more_burn_in() {
        let narrow = calibrate_nburn(&sim(DemodConfig::butterworth(9.0, 0.5, 4)), 500, 0.05, 200, None, 3).unwrap();
        let wide = calibrate_nburn(&sim(DemodConfig::butterworth(9.0, 4.0, 4)), 500, 0.05, 200, None, 3).unwrap();
        assert!(wide.n_burn <= narrow.n_burn, "{} > {}", wide.n_burn, narrow.n_burn);
        assert!(narrow.n_burn > 0);
    }

    #[test]
    fn memoryless_filter_needs_a_few_samples() {
        let c = calibrate_nburn(&sim(DemodConfig::ewma(9.0, 1.0, 1e-3)), 400, 0.05, 200, None, 1).unwrap();
        assert!(c.n_burn <= 4, "{}", c.n_burn);
    }

    #[test]
    fn doubling_replicates_is_stable() {
        let s = sim(DemodConfig::butterworth(9.0, 1.0, 4));
        let a = calibrate_nburn(&s, 500, 0.05, 150, None, 9).unwrap();
        let b = calibrate_nburn(&s, 500, 0.05, 300, None, 9).unwrap();
        // one time constant of a 1 Hz filter at 250 Hz
        let tc = (250.0 / (2.0 * std::f64::consts::PI * 1.0)).ceil() as usize;
        assert!(a.n_burn.abs_diff(b.n_burn) <= tc, "{} vs {}", a.n_burn, b.n_burn);
    }

    #[test]
    fn rejects_small_b() {
        let s = sim(DemodConfig::butterworth(9.0, 1.0, 4));
        assert!(calibrate_nburn(&s, 500, 0.05, 50, None, 0).is_err());
    }
}
