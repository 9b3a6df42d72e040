//! Generalised extreme value fits for bootstrap maxima.
//!
//! Parametrisation: `F(x) = exp(−(1 + ξ(x−μ)/σ)^{−1/ξ})`, with the Gumbel
//! law at `ξ = 0`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};

const GUMBEL_EPS: f64 = 1e-8;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevFit {
    pub location: f64,
    pub scale: f64,
    pub shape: f64,
    /// Kolmogorov–Smirnov distance between the fit and the sample.
    pub ks_statistic: f64,
    /// Asymptotic KS p-value; conservative because the parameters are estimated.
    pub ks_p_value: f64,
}

impl GevFit {
    pub fn cdf(&self, x: f64) -> f64 {
        gev_cdf(x, self.location, self.scale, self.shape)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let y = -p.ln();
        if self.shape.abs() < GUMBEL_EPS {
            self.location - self.scale * y.ln()
        } else {
            self.location + self.scale / self.shape * (y.powf(-self.shape) - 1.0)
        }
    }
}

fn gev_cdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    let y = (x - mu) / sigma;
    if xi.abs() < GUMBEL_EPS {
        return (-(-y).exp()).exp();
    }
    let z = 1.0 + xi * y;
    if z <= 0.0 {
        return if xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-z.powf(-1.0 / xi)).exp()
}

fn neg_log_lik(x: &[f64], mu: f64, log_sigma: f64, xi: f64) -> f64 {
    let sigma = log_sigma.exp();
    let n = x.len() as f64;
    let mut acc = n * log_sigma;
    if xi.abs() < GUMBEL_EPS {
        for &v in x {
            let y = (v - mu) / sigma;
            acc += y + (-y).exp();
        }
        return acc;
    }
    for &v in x {
        let z = 1.0 + xi * (v - mu) / sigma;
        if z <= 0.0 {
            return f64::INFINITY;
        }
        acc += (1.0 + 1.0 / xi) * z.ln() + z.powf(-1.0 / xi);
    }
    acc
}

/// Probability-weighted-moment L-moment estimates (location, scale, shape).
pub fn gev_lmoments(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len() as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (i, &v) in sorted.iter().enumerate() {
        let i = i as f64;
        b0 += v;
        b1 += v * i / (n - 1.0);
        b2 += v * i * (i - 1.0) / ((n - 1.0) * (n - 2.0));
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;
    let l1 = b0;
    let l2 = 2.0 * b1 - b0;
    let l3 = 6.0 * b2 - 6.0 * b1 + b0;
    let t3 = l3 / l2;
    let c = 2.0 / (3.0 + t3) - 2f64.ln() / 3f64.ln();
    // Hosking's k, with ξ = −k
    let k = 7.8590 * c + 2.9554 * c * c;
    if k.abs() < 1e-6 {
        let sigma = l2 / 2f64.ln();
        return (l1 - EULER_GAMMA * sigma, sigma, 0.0);
    }
    let g = gamma(1.0 + k);
    let sigma = l2 * k / ((1.0 - 2f64.powf(-k)) * g);
    let mu = l1 - sigma * (1.0 - g) / k;
    (mu, sigma, -k)
}

/// Nelder–Mead minimisation; returns the best vertex and whether the simplex converged.
fn nelder_mead(f: impl Fn(&[f64; 3]) -> f64, start: [f64; 3], step: [f64; 3]) -> ([f64; 3], bool) {
    let mut pts = vec![start];
    for i in 0..3 {
        let mut p = start;
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(&f).collect();
    for _ in 0..5000 {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i]).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[3] - vals[0]).abs();
        if spread <= 1e-10 * (1.0 + vals[0].abs()) && vals[0].is_finite() {
            return (pts[0], true);
        }
        let mut centroid = [0.0; 3];
        for p in &pts[..3] {
            for k in 0..3 {
                centroid[k] += p[k] / 3.0;
            }
        }
        let along = |t: f64| -> [f64; 3] {
            let mut q = [0.0; 3];
            for k in 0..3 {
                q[k] = centroid[k] + t * (pts[3][k] - centroid[k]);
            }
            q
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[3] = xe;
                vals[3] = fe;
            } else {
                pts[3] = xr;
                vals[3] = fr;
            }
        } else if fr < vals[2] {
            pts[3] = xr;
            vals[3] = fr;
        } else {
            let xc = if fr < vals[3] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < vals[3].min(fr) {
                pts[3] = xc;
                vals[3] = fc;
            } else {
                for i in 1..4 {
                    for k in 0..3 {
                        pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
                    }
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    (pts[0], false)
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub(crate) fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

pub(crate) fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = cdf(v);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Maximum-likelihood GEV fit started from the L-moment estimates.
pub fn fit_gev(sample: &[f64]) -> Result<GevFit> {
    if sample.len() < 100 {
        return Err(Error::TooShort {
            needed: 100,
            got: sample.len(),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(invalid("sample", "contains non-finite values"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Numerical("degenerate sample: all values equal".into()));
    }
    let (mu0, sigma0, xi0) = gev_lmoments(&sorted);
    let fallback = || {
        Error::Numerical(format!(
            "GEV likelihood did not converge; L-moment estimate location={mu0}, scale={sigma0}, shape={xi0}"
        ))
    };
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(fallback());
    }
    let mut start = [mu0, sigma0.ln(), xi0.clamp(-0.9, 0.9)];
    if !neg_log_lik(&sorted, start[0], start[1], start[2]).is_finite() {
        // the L-moment support can exclude extreme points; start from Gumbel
        start[2] = 0.0;
    }
    let nll = |p: &[f64; 3]| neg_log_lik(&sorted, p[0], p[1], p[2]);
    let (mut best, mut ok) = nelder_mead(nll, start, [0.1 * sigma0, 0.1, 0.05]);
    if ok {
        // restart once to escape a collapsed simplex
        let (again, ok2) = nelder_mead(nll, best, [0.05 * sigma0, 0.05, 0.02]);
        best = again;
        ok = ok2;
    }
    if !ok || !nll(&best).is_finite() {
        return Err(fallback());
    }
    let (location, scale, shape) = (best[0], best[1].exp(), best[2]);
    let d = ks_statistic(&sorted, |x| gev_cdf(x, location, scale, shape));
    Ok(GevFit {
        location,
        scale,
        shape,
        ks_statistic: d,
        ks_p_value: ks_p_value(d, sorted.len()),
    })
}
