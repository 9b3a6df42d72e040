//! Non-overlapping block-permutation bootstrap for the CUSUM statistic.

use rand::seq::SliceRandom;
use std::collections::HashMap;

use crate::detect::null::upper_quantile;
use crate::detect::stats::cusum_max;
use crate::error::{ensure_open_unit, invalid, Error, Result};
use crate::phase::PhaseSeries;
use crate::seed;

/// Fewest blocks a permutation test is run on.
pub const MIN_BLOCKS: usize = 4;

/// Concatenates the blocks of length `l` of `x` in the order `perm`.
/// Samples past the last whole block are dropped.
pub fn block_surrogate(x: &[f64], l: usize, perm: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(perm.len() * l);
    for &k in perm {
        out.extend_from_slice(&x[k * l..(k + 1) * l]);
    }
    out
}

/// Ascending CUSUM maxima of `b` block-permutation surrogates of `x`.
pub fn block_bootstrap_maxima(x: &[f64], tau: usize, b: usize, seed: u64) -> Result<Vec<f64>> {
    if tau == 0 {
        return Err(invalid("tau", "must be positive"));
    }
    let l = 2 * tau;
    let k = x.len() / l;
    if k < MIN_BLOCKS {
        return Err(Error::TooShort {
            needed: MIN_BLOCKS * l,
            got: x.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut buf = vec![0.0; k * l];
    let mut maxima = Vec::with_capacity(b);
    for _ in 0..b {
        perm.shuffle(&mut rng);
        for (slot, &src) in perm.iter().enumerate() {
            buf[slot * l..(slot + 1) * l].copy_from_slice(&x[src * l..(src + 1) * l]);
        }
        maxima.push(cusum_max(&buf).0);
    }
    maxima.sort_by(f64::total_cmp);
    Ok(maxima)
}

/// Block-bootstrap critical value for the CUSUM statistic on the analysed
/// part of `phi`, with blocks of length `L = 2τ`.
pub fn block_bootstrap_critical(phi: &PhaseSeries, tau: usize, alpha: f64, b: usize, seed: u64) -> Result<f64> {
    ensure_open_unit("alpha", alpha)?;
    if b == 0 {
        return Err(invalid("b", "must be positive"));
    }
    Ok(upper_quantile(&block_bootstrap_maxima(phi.analysis(), tau, b, seed)?, alpha))
}

/// Memoised per-segment bootstrap distributions, so that a sweep over α
/// reuses the surrogates of segments it has already visited.
#[derive(Debug, Clone)]
pub struct BlockBootstrap {
    pub tau: usize,
    pub replicates: usize,
    pub seed: u64,
    cache: HashMap<(usize, usize), Option<Vec<f64>>>,
}

impl BlockBootstrap {
    pub fn new(tau: usize, replicates: usize, seed: u64) -> Result<Self> {
        if tau == 0 || replicates == 0 {
            return Err(invalid("tau", "τ and the replicate count must be positive"));
        }
        Ok(Self {
            tau,
            replicates,
            seed,
            cache: HashMap::new(),
        })
    }

    /// Critical value for `x[start..end]`; `None` when the segment holds
    /// fewer than four blocks.
    pub fn critical(&mut self, x: &[f64], start: usize, end: usize, alpha: f64) -> Result<Option<f64>> {
        let (tau, b) = (self.tau, self.replicates);
        let seg_seed = seed::derive_seed(self.seed, "block-bootstrap", ((start as u64) << 32) ^ end as u64);
        let entry = match self.cache.entry((start, end)) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                let m = match block_bootstrap_maxima(&x[start..end], tau, b, seg_seed) {
                    Ok(m) => Some(m),
                    Err(Error::TooShort { .. }) => None,
                    Err(e) => return Err(e),
                };
                v.insert(m)
            }
        };
        Ok(entry.as_deref().map(|m| upper_quantile(m, alpha)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_preserves_blocks() {
        let x: Vec<f64> = (0..23).map(f64::from).collect();
        let s = block_surrogate(&x, 5, &[3, 0, 2, 1]);
        assert_eq!(s.len(), 20);
        assert_eq!(&s[..5], &x[15..20]);
        let mut a: Vec<f64> = s.clone();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, x[..20].to_vec());
        assert_eq!(block_surrogate(&x, 5, &[0, 1, 2, 3]), x[..20].to_vec());
    }

    #[test]
    fn too_few_blocks_rejected() {
        let x = vec![0.0; 30];
        assert!(matches!(block_bootstrap_maxima(&x, 4, 10, 1), Err(Error::TooShort { .. })));
        assert!(block_bootstrap_maxima(&x, 3, 10, 1).is_ok());
    }

    #[test]
    fn memo_returns_same_values() {
        let x: Vec<f64> = (0..400).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut bb = BlockBootstrap::new(5, 200, 3).unwrap();
        let a = bb.critical(&x, 0, 400, 0.05).unwrap().unwrap();
        let b = bb.critical(&x, 0, 400, 0.05).unwrap().unwrap();
        assert_eq!(a, b);
        let c = bb.critical(&x, 0, 400, 0.2).unwrap().unwrap();
        assert!(c <= a);
        assert!(bb.critical(&x, 0, 30, 0.05).unwrap().is_none());
        let phi = PhaseSeries::from_straight(x.clone(), 250.0);
        let seg_seed = seed::derive_seed(3, "block-bootstrap", 400);
        assert_eq!(block_bootstrap_critical(&phi, 5, 0.05, 200, seg_seed).unwrap(), a);
    }
}
