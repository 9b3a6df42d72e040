//! Parametric null distributions from simulated noisy oscillators.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::detect::gev::{fit_gev, GevFit};
use crate::detect::stats::StatKind;
use crate::error::{ensure_open_unit, invalid, Error, Result};
use crate::phase::{straighten_phase, complex_demodulate, DemodConfig, PhaseSeries};
use crate::seed;
use crate::signals::{gen_oscillator, mix_noise, PhaseProfile, TimeSeries};

/// Generator of demodulated phase for a unit oscillator in white noise.
///
/// Each replicate draws its base phase uniformly on (−π, π] and its noise
/// from a stream derived from `(seed, replicate)`. Returned series carry
/// `n_burn` samples of burn-in ahead of the analysed samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSimulator {
    pub f0_hz: f64,
    pub rate_hz: f64,
    /// Signal weight `r` of the noise mixture.
    pub weight: f64,
    pub demod: DemodConfig,
    pub n_burn: usize,
}

impl NullSimulator {
    pub fn new(f0_hz: f64, rate_hz: f64, weight: f64, demod: DemodConfig) -> Result<Self> {
        ensure_open_unit("weight", weight)?;
        demod.validate(rate_hz)?;
        let n_burn = demod.default_burn_in(rate_hz)?;
        Ok(Self {
            f0_hz,
            rate_hz,
            weight,
            demod,
            n_burn,
        })
    }

    pub fn with_burn_in(mut self, n_burn: usize) -> Self {
        self.n_burn = n_burn;
        self
    }

    /// Noisy oscillator of `n_total` samples for one replicate, with `profile`
    /// applied as is on top of a random base phase.
    pub fn signal(&self, profile: &PhaseProfile, n_total: usize, seed: u64, replicate: u64) -> Result<TimeSeries> {
        let mut rng = seed::derived_rng(seed, "null-phase", replicate);
        let base = -PI + 2.0 * PI * rng.random::<f64>();
        let shifted = PhaseProfile {
            base_phase: profile.base_phase + base,
            ..profile.clone()
        };
        let clean = gen_oscillator(self.f0_hz, self.rate_hz, &shifted, n_total)?;
        mix_noise(&clean, self.weight, seed::derive_seed(seed, "null-noise", replicate))
    }

    /// Straightened demodulated phase of one replicate whose phase profile is
    /// `profile` (indices relative to the first analysed sample) on top of a
    /// random base phase.
    pub fn simulate(&self, profile: &PhaseProfile, n_analysis: usize, seed: u64, replicate: u64) -> Result<PhaseSeries> {
        let noisy = self.signal(&profile.offset(self.n_burn), self.n_burn + n_analysis, seed, replicate)?;
        let demod = self.demod.with_burn_in(self.n_burn);
        Ok(straighten_phase(&complex_demodulate(&noisy, &demod)?))
    }

    /// Analysed samples of a constant-phase replicate.
    pub fn null_replicate(&self, n_analysis: usize, seed: u64, replicate: u64) -> Result<Vec<f64>> {
        let mut phi = self.simulate(&PhaseProfile::default(), n_analysis, seed, replicate)?;
        Ok(phi.values.split_off(self.n_burn))
    }

    /// Signal delay introduced by the demodulation filter, in whole samples.
    pub fn delay(&self) -> Result<usize> {
        Ok(self.demod.group_delay(self.rate_hz)?.round() as usize)
    }
}

/// Index of the empirical `(1 − α)` quantile in an ascending sample of size `b`.
pub(crate) fn quantile_index(b: usize, alpha: f64) -> usize {
    (((1.0 - alpha) * b as f64).ceil() as usize).clamp(1, b) - 1
}

pub(crate) fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    sorted[quantile_index(sorted.len(), alpha)]
}

/// Sorted null maxima of one statistic at a geometric grid of series lengths.
///
/// Maxima at length `n` are taken over the first `n` analysed samples of
/// each replicate, so every grid length sees the same `B` replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTable {
    pub kind: StatKind,
    pub lengths: Vec<usize>,
    /// `maxima[g]` is the ascending sample of maxima at `lengths[g]`.
    pub maxima: Vec<Vec<f64>>,
}

/// Geometric grid from `lo` to `hi` with ratio at most `ratio`, always containing `hi`.
pub fn length_grid(lo: usize, hi: usize, ratio: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = lo as f64;
    while (v.round() as usize) < hi {
        let r = v.round() as usize;
        if out.last() != Some(&r) {
            out.push(r);
        }
        v *= ratio;
    }
    out.push(hi);
    out
}

impl NullTable {
    /// Simulates `b` replicates of `n_max` analysed samples once and tabulates
    /// every kind in `kinds` on the shared replicates.
    pub fn build(
        sim: &NullSimulator,
        kinds: &[StatKind],
        n_min: usize,
        n_max: usize,
        b: usize,
        seed: u64,
    ) -> Result<Vec<NullTable>> {
        if b < 2 {
            return Err(invalid("b", "need at least two replicates"));
        }
        let lo = n_min.max(4);
        if n_max < lo {
            return Err(invalid("n_max", format!("must be at least {lo}")));
        }
        let lengths = length_grid(lo, n_max, 1.1);
        let per_rep: Vec<Vec<Vec<f64>>> = (0..b as u64)
            .into_par_iter()
            .map(|i| {
                let x = sim.null_replicate(n_max, seed, i)?;
                Ok(kinds
                    .iter()
                    .map(|k| lengths.iter().map(|&n| k.max(&x[..n]).map(|m| m.0)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?)
            })
            .collect::<Result<_>>()?;
        Ok(kinds
            .iter()
            .enumerate()
            .map(|(ki, &kind)| {
                let maxima = (0..lengths.len())
                    .map(|g| {
                        let mut col: Vec<f64> = per_rep.iter().map(|r| r[ki][g]).collect();
                        col.sort_by(f64::total_cmp);
                        col
                    })
                    .collect();
                NullTable {
                    kind,
                    lengths: lengths.clone(),
                    maxima,
                }
            })
            .collect())
    }

    pub fn replicates(&self) -> usize {
        self.maxima.first().map_or(0, Vec::len)
    }

    pub fn max_len(&self) -> usize {
        *self.lengths.last().unwrap_or(&0)
    }

    /// Critical value for a series of `n` analysed samples, interpolated
    /// linearly in `log n` between grid lengths. `None` outside the grid.
    pub fn critical(&self, n: usize, alpha: f64) -> Option<f64> {
        let g = self.lengths.partition_point(|&l| l < n);
        if g == self.lengths.len() || n < self.lengths[0] {
            return None;
        }
        let hi = upper_quantile(&self.maxima[g], alpha);
        if self.lengths[g] == n {
            return Some(hi);
        }
        let lo = upper_quantile(&self.maxima[g - 1], alpha);
        let (a, b) = (self.lengths[g - 1] as f64, self.lengths[g] as f64);
        let w = ((n as f64).ln() - a.ln()) / (b.ln() - a.ln());
        Some(lo + w * (hi - lo))
    }
}

/// A parametric critical value with the GEV fitted to the same maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricCritical {
    pub kind: StatKind,
    pub alpha: f64,
    pub n: usize,
    pub critical: f64,
    pub gev: GevFit,
    pub maxima: Vec<f64>,
}

/// Empirical `(1 − α)` quantile of the maximum statistic over `b` null
/// replicates of `n` analysed samples.
pub fn parametric_critical(
    kind: StatKind,
    sim: &NullSimulator,
    n: usize,
    alpha: f64,
    b: usize,
    seed: u64,
) -> Result<ParametricCritical> {
    ensure_open_unit("alpha", alpha)?;
    if b < 200 {
        return Err(invalid("b", format!("need at least 200 replicates, got {b}")));
    }
    let mut maxima: Vec<f64> = (0..b as u64)
        .into_par_iter()
        .map(|i| kind.max(&sim.null_replicate(n, seed, i)?).map(|m| m.0))
        .collect::<Result<_>>()?;
    maxima.sort_by(f64::total_cmp);
    if maxima[0] == maxima[b - 1] {
        return Err(Error::Numerical("degenerate null sample: all maxima equal".into()));
    }
    let gev = fit_gev(&maxima)?;
    Ok(ParametricCritical {
        kind,
        alpha,
        n,
        critical: upper_quantile(&maxima, alpha),
        gev,
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> NullSimulator {
        NullSimulator::new(9.0, 250.0, 0.5, DemodConfig::butterworth(9.0, 1.0, 4)).unwrap()
    }

    #[test]
    fn quantile_index_convention() {
        assert_eq!(quantile_index(1000, 0.05), 949);
        assert_eq!(quantile_index(200, 0.01), 197);
        assert_eq!(quantile_index(10, 0.5), 4);
    }

    #[test]
    fn grid_contains_endpoints() {
        let g = length_grid(16, 1000, 1.1);
        assert_eq!(g[0], 16);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[1] > w[0] && (w[1] as f64) <= 1.1 * w[0] as f64 + 1.0));
    }

    #[test]
    fn replicates_are_deterministic() {
        let s = sim();
        assert_eq!(s.null_replicate(300, 1, 4).unwrap(), s.null_replicate(300, 1, 4).unwrap());
        assert_ne!(s.null_replicate(300, 1, 4).unwrap(), s.null_replicate(300, 1, 5).unwrap());
    }

    #[test]
    fn table_matches_direct_quantile_on_grid() {
        let s = sim();
        let t = NullTable::build(&s, &[StatKind::Cusum, StatKind::Pd], 50, 500, 200, 7).unwrap();
        let direct = parametric_critical(StatKind::Cusum, &s, 500, 0.05, 200, 7).unwrap();
        assert_eq!(t[0].critical(500, 0.05).unwrap(), direct.critical);
        assert!(t[0].critical(10, 0.05).is_none());
        assert!(t[0].critical(501, 0.05).is_none());
        // critical values fall as α grows
        for tab in &t {
            let c: Vec<f64> = [0.01, 0.05, 0.1, 0.2].iter().map(|&a| tab.critical(300, a).unwrap()).collect();
            assert!(c.windows(2).all(|w| w[1] <= w[0]), "{c:?}");
        }
    }
}
