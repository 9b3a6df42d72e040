//! Closed-form expectations of the EWMA-demodulated quadrature components
//! for a noisy sinusoid `x_t = sin(ωt + φ) + ε_t`.
//!
//! With `y_t = H[x_t sin ωt]` and `ỹ_t = H[x_t cos ωt]`,
//! `E y_t = cos φ / 2 + b(y_t)` and `E ỹ_t = sin φ / 2 + b(ỹ_t)`. Each bias
//! splits into an oscillatory remainder of the 2ω carrier and a start-up
//! transient proportional to `α^{t+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_open_unit, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasTerms {
    pub b_y: f64,
    pub b_y_tilde: f64,
    /// `(y, ỹ)` oscillatory components.
    pub oscillatory_part: (f64, f64),
    /// `(y, ỹ)` boundary components.
    pub boundary_part: (f64, f64),
}

impl BiasTerms {
    fn from_parts(osc: (f64, f64), bnd: (f64, f64)) -> Self {
        Self {
            b_y: osc.0 + bnd.0,
            b_y_tilde: osc.1 + bnd.1,
            oscillatory_part: osc,
            boundary_part: bnd,
        }
    }

    /// Expected `(y_t, ỹ_t)` for the phase the terms were evaluated at.
    pub fn expectations(&self, phi: f64) -> (f64, f64) {
        (phi.cos() / 2.0 + self.b_y, phi.sin() / 2.0 + self.b_y_tilde)
    }
}

fn denominator(alpha: f64, omega: f64) -> Result<f64> {
    ensure_open_unit("alpha", alpha)?;
    let d = 1.0 - 2.0 * alpha * (2.0 * omega).cos() + alpha * alpha;
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Numerical(format!(
            "bias denominator 1 − 2α cos 2ω + α² vanishes at α={alpha}, ω={omega}"
        )))
    }
}

fn boundary(alpha: f64, omega: f64, phi: f64, t: usize, d: f64) -> (f64, f64) {
    let g = alpha.powf(t as f64 + 1.0) / 2.0;
    let k = (1.0 - alpha) / d;
    (
        -g * (phi.cos() - k * ((phi - 2.0 * omega).cos() - alpha * phi.cos())),
        -g * (phi.sin() + k * ((phi - 2.0 * omega).sin() - alpha * phi.sin())),
    )
}

/// Biases of `y_t` and `ỹ_t` at sample `t` (ω in radians per sample).
pub fn theoretical_bias(alpha: f64, omega: f64, phi: f64, t: usize) -> Result<BiasTerms> {
    let d = denominator(alpha, omega)?;
    let theta = 2.0 * omega * t as f64 + phi;
    let k = (1.0 - alpha) / (2.0 * d);
    let osc = (
        -k * (theta.cos() - alpha * (theta + 2.0 * omega).cos()),
        k * (theta.sin() - alpha * (theta + 2.0 * omega).sin()),
    );
    Ok(BiasTerms::from_parts(osc, boundary(alpha, omega, phi, t, d)))
}

/// The same quantities with the oscillatory term of `b(y_t)` written as
/// `(1−α)(cos(2ωt+φ) + α cos(2ω(t+1)+φ)) / 2D`. This form does not match a
/// direct evaluation of the filter; it is kept for comparison only.
pub fn theoretical_bias_as_printed(alpha: f64, omega: f64, phi: f64, t: usize) -> Result<BiasTerms> {
    let exact = theoretical_bias(alpha, omega, phi, t)?;
    let d = denominator(alpha, omega)?;
    let theta = 2.0 * omega * t as f64 + phi;
    let osc_y = (1.0 - alpha) * (theta.cos() + alpha * (theta + 2.0 * omega).cos()) / (2.0 * d);
    Ok(BiasTerms::from_parts(
        (osc_y, exact.oscillatory_part.1),
        exact.boundary_part,
    ))
}

/// Large-t magnitude bound on either bias: `(1+α) / (2(1−α))`.
pub fn bias_bound(alpha: f64) -> Result<f64> {
    ensure_open_unit("alpha", alpha)?;
    Ok((1.0 + alpha) / (2.0 * (1.0 - alpha)))
}

/// Phase bias implied by the expected components, `atan2(E ỹ, E y) − φ`:
/// `atan((cos φ·b̃ − sin φ·b) / (½ + cos φ·b + sin φ·b̃))`.
pub fn phase_bias_approx(terms: &BiasTerms, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let num = c * terms.b_y_tilde - s * terms.b_y;
    let den = 0.5 + c * terms.b_y + s * terms.b_y_tilde;
    num.atan2(den)
}

/// `atan((1+α) / (√2(1−α) − (1+α)))`; `None` when the denominator is not positive.
pub fn phase_bias_bound(alpha: f64) -> Result<Option<f64>> {
    ensure_open_unit("alpha", alpha)?;
    let den = std::f64::consts::SQRT_2 * (1.0 - alpha) - (1.0 + alpha);
    Ok((den > 0.0).then(|| ((1.0 + alpha) / den).atan()))
}

/// Largest large-t phase error of the noiseless EWMA demodulator at carrier
/// `omega`: the oscillatory bias vector has length `A = (1−α) / (2√D)`, so
/// the error is at most `asin(2A)`, reaching π/2 when `2A = 1`.
pub fn phase_error_bound(alpha: f64, omega: f64) -> Result<f64> {
    let d = denominator(alpha, omega)?;
    Ok(((1.0 - alpha) / d.sqrt()).min(1.0).asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct EWMA of the noiseless demodulated products.
    fn direct(alpha: f64, omega: f64, phi: f64, t: usize) -> (f64, f64) {
        let mut y = 0.0;
        let mut yt = 0.0;
        for i in 0..=t {
            let x = (omega * i as f64 + phi).sin();
            y = alpha * y + (1.0 - alpha) * x * (omega * i as f64).sin();
            yt = alpha * yt + (1.0 - alpha) * x * (omega * i as f64).cos();
        }
        (y, yt)
    }

    #[test]
    fn matches_direct_evaluation() {
        let omega = 2.0 * PI * 9.0 / 250.0;
        for &alpha in &[0.3, 0.9, 0.98] {
            for &phi in &[0.0, 0.5, 2.0, -1.3] {
                for &t in &[0, 1, 7, 50, 500] {
                    let b = theoretical_bias(alpha, omega, phi, t).unwrap();
                    let (ey, eyt) = b.expectations(phi);
                    let (y, yt) = direct(alpha, omega, phi, t);
                    assert!((ey - y).abs() < 1e-10, "α={alpha} φ={phi} t={t}");
                    assert!((eyt - yt).abs() < 1e-10, "α={alpha} φ={phi} t={t}");
                }
            }
        }
    }

    #[test]
    fn printed_form_disagrees_with_the_filter() {
        // flagged discrepancy: the printed oscillatory term of b(y) is off by
        // (1−α)·cos(2ωt+φ)/D, the ỹ term is exact
        let (alpha, omega, phi, t) = (0.98, 2.0 * PI * 9.0 / 250.0, 0.5, 500);
        let printed = theoretical_bias_as_printed(alpha, omega, phi, t).unwrap();
        let (y, yt) = direct(alpha, omega, phi, t);
        let (py, pyt) = printed.expectations(phi);
        assert!((py - y).abs() > 1e-2);
        assert!((pyt - yt).abs() < 1e-10);
    }

    #[test]
    fn boundary_vanishes_for_large_t() {
        let omega = 0.3;
        let b = theoretical_bias(0.9, omega, 1.0, 2000).unwrap();
        assert!(b.boundary_part.0.abs() < 1e-40 && b.boundary_part.1.abs() < 1e-40);
        assert_eq!(b.b_y, b.oscillatory_part.0 + b.boundary_part.0);
    }

    #[test]
    fn boundary_halves_every_log2_over_log_inv_alpha() {
        let alpha = 0.5f64.powf(0.1); // halving period 10 samples
        let step = (2.0f64.ln() / (1.0 / alpha).ln()).round() as usize;
        assert_eq!(step, 10);
        for t in [3usize, 40, 100] {
            let a = theoretical_bias(alpha, 0.4, 0.7, t).unwrap().boundary_part;
            let b = theoretical_bias(alpha, 0.4, 0.7, t + step).unwrap().boundary_part;
            assert!((b.0 / a.0 - 0.5).abs() < 1e-9);
            assert!((b.1 / a.1 - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn bias_bound_values() {
        assert!((bias_bound(1.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for k in 1..100 {
            let b = bias_bound(k as f64 / 100.0).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(bias_bound(1.0).is_err());
    }

    #[test]
    fn bias_bound_dominates_large_t_bias() {
        for &alpha in &[0.2, 0.6, 0.9, 0.98] {
            let bound = bias_bound(alpha).unwrap();
            for wi in 1..40 {
                let omega = wi as f64 * PI / 41.0;
                for pi_ in 0..12 {
                    let phi = -PI + pi_ as f64 * PI / 6.0;
                    for t in [1000usize, 1001, 1013] {
                        let b = theoretical_bias(alpha, omega, phi, t).unwrap();
                        assert!(b.b_y.abs() <= bound && b.b_y_tilde.abs() <= bound);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_bias_gives_zero_phase_error() {
        let zero = BiasTerms::from_parts((0.0, 0.0), (0.0, 0.0));
        assert_eq!(phase_bias_approx(&zero, 1.2), 0.0);
    }

    #[test]
    fn phase_bias_matches_noiseless_demodulation() {
        let (alpha, omega) = (0.98, 2.0 * PI * 9.0 / 250.0);
        for &phi in &[0.0, 0.7, 2.0, -2.4] {
            for &t in &[200usize, 500, 900] {
                let b = theoretical_bias(alpha, omega, phi, t).unwrap();
                let approx = phase_bias_approx(&b, phi);
                let (y, yt) = direct(alpha, omega, phi, t);
                let actual = crate::phase::wrap(yt.atan2(y) - phi);
                assert!((actual - approx).abs() < approx * approx + 1e-12);
            }
        }
    }

    #[test]
    fn phase_bias_bound_availability() {
        // √2(1−α) − (1+α) > 0 only for α < (√2−1)/(√2+1) ≈ 0.1716
        assert!(phase_bias_bound(0.9).unwrap().is_none());
        assert!(phase_bias_bound(0.995).unwrap().is_none());
        let b = phase_bias_bound(0.1).unwrap().unwrap();
        assert!((b - (1.1f64 / (2f64.sqrt() * 0.9 - 1.1)).atan()).abs() < 1e-12);
    }

    #[test]
    fn printed_phase_bound_can_be_exceeded() {
        // flagged discrepancy: at α = 0.02, ω = 0.1 the noiseless error
        // exceeds the α-only bound
        let (alpha, omega, phi) = (0.02, 0.1, 0.0);
        let bound = phase_bias_bound(alpha).unwrap().unwrap();
        let worst = (300..340)
            .map(|t| {
                let (y, yt) = direct(alpha, omega, phi, t);
                crate::phase::wrap(yt.atan2(y) - phi).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst > bound, "{worst} <= {bound}");
    }

    #[test]
    fn noiseless_error_within_exact_bound() {
        for &alpha in &[0.02, 0.08, 0.15, 0.6, 0.98] {
            for wi in [0.1, 0.2262, 0.5, 1.0, 1.4] {
                let bound = phase_error_bound(alpha, wi).unwrap();
                let mut worst = 0.0f64;
                for &phi in &[0.0, 0.9, -2.0] {
                    for t in 2000..2100 {
                        let (y, yt) = direct(alpha, wi, phi, t);
                        worst = worst.max(crate::phase::wrap(yt.atan2(y) - phi).abs());
                    }
                }
                assert!(worst <= bound + 1e-9, "α={alpha} ω={wi}: {worst} > {bound}");
                // the bound is attained over a full carrier cycle
                assert!(worst > 0.9 * bound, "α={alpha} ω={wi}: {worst} ≪ {bound}");
            }
        }
    }
}
