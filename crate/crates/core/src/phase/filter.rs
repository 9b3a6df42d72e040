//! Causal low-pass filters for the demodulator.

use std::f64::consts::PI;

use crate::error::{ensure_open_unit, invalid, Result};
use crate::signals::TimeSeries;

/// A streaming single-input single-output low-pass filter.
pub trait LowPass: Send {
    fn step(&mut self, x: f64) -> f64;
    fn reset(&mut self);
    /// Group delay at DC, in samples.
    fn group_delay(&self) -> f64;
}

/// `y_t = α y_{t−1} + (1−α) x_t`, started from rest; equal to
/// `(1−α) Σ_{i=0}^{t} α^i x_{t−i}`.
#[derive(Debug, Clone)]
pub struct Ewma {
    alpha: f64,
    state: f64,
}

impl Ewma {
    pub fn new(alpha: f64) -> Result<Self> {
        ensure_open_unit("alpha", alpha)?;
        Ok(Self { alpha, state: 0.0 })
    }
}

impl LowPass for Ewma {
    fn step(&mut self, x: f64) -> f64 {
        self.state = self.alpha * self.state + (1.0 - self.alpha) * x;
        self.state
    }

    fn reset(&mut self) {
        self.state = 0.0;
    }

    fn group_delay(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }
}

/// EWMA weight whose −3 dB point sits near `cutoff_hz`: `α = exp(−2π f_c / T)`.
pub fn ewma_alpha_for_cutoff(cutoff_hz: f64, rate_hz: f64) -> Result<f64> {
    if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
        return Err(invalid("cutoff_hz", "must lie in (0, Nyquist)"));
    }
    Ok((-2.0 * PI * cutoff_hz / rate_hz).exp())
}

pub fn ewma_filter(x: &TimeSeries, alpha: f64) -> Result<TimeSeries> {
    let mut f = Ewma::new(alpha)?;
    Ok(TimeSeries {
        samples: x.samples.iter().map(|&v| f.step(v)).collect(),
        rate_hz: x.rate_hz,
        start_index: x.start_index,
    })
}

/// Second-order section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`,
/// transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 2]) -> Self {
        Self { b, a, s1: 0.0, s2: 0.0 }
    }

    #[inline]
    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    fn group_delay(&self) -> f64 {
        // at ω = 0: Σ n·b_n / Σ b_n − Σ n·a_n / Σ a_n
        let num = (self.b[1] + 2.0 * self.b[2]) / (self.b[0] + self.b[1] + self.b[2]);
        let den = (self.a[0] + 2.0 * self.a[1]) / (1.0 + self.a[0] + self.a[1]);
        num - den
    }
}

/// Butterworth low-pass from the analog prototype via the bilinear transform
/// with cutoff pre-warping, realised as cascaded biquads.
#[derive(Debug, Clone)]
pub struct Butterworth {
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn design(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("order", "must be at least 1"));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
            return Err(invalid(
                "cutoff_hz",
                format!(
                    "must lie strictly between 0 and the Nyquist frequency {}, got {cutoff_hz}",
                    rate_hz / 2.0
                ),
            ));
        }
        let k = (PI * cutoff_hz / rate_hz).tan();
        let k2 = k * k;
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        if order % 2 == 1 {
            // k / (s + k)
            let d = 1.0 + k;
            sections.push(Biquad::new([k / d, k / d, 0.0], [(k - 1.0) / d, 0.0]));
        }
        for i in 0..order / 2 {
            // s² + 2 sin θ s + 1, θ = π(2i+1)/(2N)
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let q = 2.0 * theta.sin() * k;
            let d = 1.0 + q + k2;
            sections.push(Biquad::new(
                [k2 / d, 2.0 * k2 / d, k2 / d],
                [2.0 * (k2 - 1.0) / d, (1.0 - q + k2) / d],
            ));
        }
        Ok(Self { sections })
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }
}

impl LowPass for Butterworth {
    #[inline]
    fn step(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |v, s| s.step(v))
    }

    fn reset(&mut self) {
        for s in &mut self.sections {
            s.s1 = 0.0;
            s.s2 = 0.0;
        }
    }

    fn group_delay(&self) -> f64 {
        self.sections.iter().map(Biquad::group_delay).sum()
    }
}

pub fn butterworth_lowpass(x: &TimeSeries, cutoff_hz: f64, order: usize) -> Result<TimeSeries> {
    let mut f = Butterworth::design(order, cutoff_hz, x.rate_hz)?;
    Ok(TimeSeries {
        samples: x.samples.iter().map(|&v| f.step(v)).collect(),
        rate_hz: x.rate_hz,
        start_index: x.start_index,
    })
}

/// Smallest `n` such that the impulse-response energy past `n` is at most
/// `tol` times the total energy. The filter is reset before and after.
pub fn settling_samples(filter: &mut dyn LowPass, tol: f64) -> usize {
    const MAX: usize = 1 << 22;
    filter.reset();
    let mut h = Vec::new();
    let mut total = 0.0;
    let mut x = 1.0;
    // run until the tail has clearly died out
    let mut quiet = 0usize;
    while h.len() < MAX {
        let y = filter.step(x);
        x = 0.0;
        total += y * y;
        h.push(y);
        if y * y <= tol * tol * total {
            quiet += 1;
            if quiet > 64 && quiet * 4 > h.len() {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    filter.reset();
    let mut tail = 0.0;
    for (n, y) in h.iter().enumerate().rev() {
        tail += y * y;
        if tail > tol * total {
            return n + 1;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, rate: f64, n: usize) -> TimeSeries {
        TimeSeries::new(
            (0..n).map(|t| (2.0 * PI * f * t as f64 / rate).sin()).collect(),
            rate,
        )
        .unwrap()
    }

    /// Steady-state amplitude, measured as √2·RMS of the second half.
    fn steady_gain(y: &TimeSeries) -> f64 {
        let tail = &y.samples[y.len() / 2..];
        (2.0 * tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    }

    #[test]
    fn ewma_constant_and_impulse() {
        let a = 0.9;
        let c = TimeSeries::new(vec![2.0; 50], 1.0).unwrap();
        let y = ewma_filter(&c, a).unwrap();
        for (t, v) in y.samples.iter().enumerate() {
            assert!((v - 2.0 * (1.0 - a.powi(t as i32 + 1))).abs() < 1e-12);
        }
        let mut imp = vec![0.0; 30];
        imp[0] = 1.0;
        let y = ewma_filter(&TimeSeries::new(imp, 1.0).unwrap(), a).unwrap();
        for (t, v) in y.samples.iter().enumerate() {
            assert!((v - (1.0 - a) * a.powi(t as i32)).abs() < 1e-15);
        }
        assert!(Ewma::new(1.0).is_err());
        assert!(Ewma::new(0.0).is_err());
    }

    #[test]
    fn butterworth_dc_gain_is_one() {
        let x = TimeSeries::new(vec![1.5; 4000], 250.0).unwrap();
        for order in 1..=6 {
            let y = butterworth_lowpass(&x, 2.0, order).unwrap();
            assert!((y.samples.last().unwrap() - 1.5).abs() < 1e-9, "order {order}");
        }
    }

    #[test]
    fn butterworth_half_power_at_cutoff() {
        for &(fc, order) in &[(1.0, 4), (5.0, 4), (10.0, 2), (3.0, 3)] {
            let y = butterworth_lowpass(&tone(fc, 250.0, 100_000), fc, order).unwrap();
            let g = steady_gain(&y);
            assert!((g / 0.5f64.sqrt() - 1.0).abs() < 0.02, "fc={fc} order={order}: {g}");
        }
    }

    #[test]
    fn butterworth_rolloff_two_octaves() {
        let fc = 5.0;
        let y = butterworth_lowpass(&tone(4.0 * fc, 250.0, 40_000), fc, 4).unwrap();
        let att_db = -20.0 * steady_gain(&y).log10();
        assert!(att_db >= 45.0, "{att_db}");
    }

    #[test]
    fn butterworth_rejects_cutoff_past_nyquist() {
        assert!(Butterworth::design(4, 125.0, 250.0).is_err());
        assert!(Butterworth::design(0, 10.0, 250.0).is_err());
    }

    #[test]
    fn group_delay_matches_known_values() {
        let e = Ewma::new(0.75).unwrap();
        assert!((e.group_delay() - 3.0).abs() < 1e-12);
        // analog 4th-order Butterworth: τ(0) = Σ 2 sin θ_k / ω_c = 2.6131 / ω_c
        let b = Butterworth::design(4, 1.0, 250.0).unwrap();
        let expect = 2.613_125_9 / (2.0 * PI) * 250.0;
        assert!((b.group_delay() - expect).abs() / expect < 1e-3, "{}", b.group_delay());
    }

    #[test]
    fn settling_is_longer_for_narrower_filters() {
        let mut wide = Butterworth::design(4, 2.0, 250.0).unwrap();
        let mut narrow = Butterworth::design(4, 0.5, 250.0).unwrap();
        let a = settling_samples(&mut wide, 1e-6);
        let b = settling_samples(&mut narrow, 1e-6);
        assert!(a > 10 && b > 3 * a, "{a} {b}");
        let mut memoryless = Ewma::new(1e-3).unwrap();
        assert!(settling_samples(&mut memoryless, 1e-6) <= 3);
    }
}
