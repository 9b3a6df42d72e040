//! Two coupled Rössler attractors integrated with fixed-step RK4.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::phase::{straighten_phase, PhaseSeries};
use crate::seed;
use crate::signals::TimeSeries;

/// Sign of the coupling term in the `ẋ` equations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingForm {
    /// `C (x_self − x_other)`.
    #[default]
    SelfMinusOther,
    /// `C (x_other − x_self)`: attractive diffusive coupling.
    Diffusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RosslerParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub coupling: f64,
    pub coupling_form: CouplingForm,
    /// Mean frequency; `ω_{1,2} = 2π f0 ± δω`.
    pub f0_hz: f64,
    /// Frequency mismatch δω in rad/s.
    pub delta_omega: f64,
    pub internal_rate_hz: f64,
    pub output_rate_hz: f64,
    pub burn_in_s: f64,
    /// Initial conditions are uniform in `[−ic_half_width, ic_half_width]³`.
    pub ic_half_width: f64,
    /// Any state component beyond this magnitude aborts the run.
    pub divergence_bound: f64,
}

impl Default for RosslerParams {
    fn default() -> Self {
        Self {
            a: 0.15,
            b: 0.2,
            c: 10.0,
            coupling: 0.12,
            coupling_form: CouplingForm::SelfMinusOther,
            f0_hz: 9.0,
            delta_omega: 0.675,
            internal_rate_hz: 10_000.0,
            output_rate_hz: 250.0,
            burn_in_s: 30.0,
            ic_half_width: 10.0,
            divergence_bound: 1e6,
        }
    }
}

impl RosslerParams {
    pub fn omegas(&self) -> (f64, f64) {
        let w = 2.0 * PI * self.f0_hz;
        (w + self.delta_omega, w - self.delta_omega)
    }

    /// Internal steps per output sample.
    pub fn decimation(&self) -> Result<usize> {
        if !(self.output_rate_hz > 0.0 && self.internal_rate_hz >= self.output_rate_hz) {
            return Err(invalid(
                "output_rate_hz",
                "rates must be positive with internal ≥ output",
            ));
        }
        let ratio = self.internal_rate_hz / self.output_rate_hz;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio {
            return Err(invalid(
                "internal_rate_hz",
                format!(
                    "must be an integer multiple of the output rate ({} / {})",
                    self.internal_rate_hz, self.output_rate_hz
                ),
            ));
        }
        Ok(k as usize)
    }

    fn validate(&self) -> Result<()> {
        self.decimation()?;
        if !(self.burn_in_s >= 0.0) {
            return Err(invalid("burn_in_s", "must be non-negative"));
        }
        if !(self.ic_half_width > 0.0) || !(self.divergence_bound > 0.0) {
            return Err(invalid("ic_half_width", "box and divergence bound must be positive"));
        }
        Ok(())
    }

    fn coupling_sign(&self) -> f64 {
        match self.coupling_form {
            CouplingForm::Diffusive => 1.0,
            CouplingForm::SelfMinusOther => -1.0,
        }
    }
}

/// The six output channels at the output rate, starting after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosslerTrajectory {
    pub x1: TimeSeries,
    pub y1: TimeSeries,
    pub z1: TimeSeries,
    pub x2: TimeSeries,
    pub y2: TimeSeries,
    pub z2: TimeSeries,
}

impl RosslerTrajectory {
    pub const CHANNELS: [&'static str; 6] = ["x1", "y1", "z1", "x2", "y2", "z2"];

    pub fn channels(&self) -> [&TimeSeries; 6] {
        [&self.x1, &self.y1, &self.z1, &self.x2, &self.y2, &self.z2]
    }

    /// Straightened Poincaré phase of attractor 1 minus that of attractor 2.
    pub fn poincare_difference(&self) -> Result<PhaseSeries> {
        let p1 = poincare_phase(&self.x1, &self.y1)?;
        let p2 = poincare_phase(&self.x2, &self.y2)?;
        crate::phase::phase_difference(&p1, &p2)
    }
}

type State = [f64; 3];

#[inline]
fn rossler(s: &State, omega: f64, p: &RosslerParams, drive: f64) -> State {
    [
        omega * (-s[1] - s[2]) + drive,
        omega * (s[0] + p.a * s[1]),
        omega * (p.b + s[2] * (s[0] - p.c)),
    ]
}

#[inline]
fn axpy(s: &State, k: &State, h: f64) -> State {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// Right-hand side of the coupled pair.
#[inline]
fn pair(s: &[State; 2], w: (f64, f64), p: &RosslerParams, g: f64) -> [State; 2] {
    let d = g * (s[1][0] - s[0][0]);
    [rossler(&s[0], w.0, p, d), rossler(&s[1], w.1, p, -d)]
}

fn initial_state(p: &RosslerParams, seed: u64, which: u64) -> State {
    let mut rng = seed::derived_rng(seed, "rossler-ic", which);
    let h = p.ic_half_width;
    [
        rng.random_range(-h..=h),
        rng.random_range(-h..=h),
        rng.random_range(-h..=h),
    ]
}

fn check(states: &[State], bound: f64, step: usize, rate: f64) -> Result<()> {
    if states.iter().flatten().any(|v| !(v.abs() <= bound)) {
        return Err(Error::Numerical(format!(
            "Rössler trajectory diverged at t = {:.4} s (|state| > {bound})",
            step as f64 / rate
        )));
    }
    Ok(())
}

fn output_len(p: &RosslerParams, duration_s: f64) -> Result<(usize, usize)> {
    if !(duration_s > 0.0) {
        return Err(invalid("duration_s", "must be positive"));
    }
    p.validate()?;
    let burn = (p.burn_in_s * p.output_rate_hz).round() as usize;
    let n = (duration_s * p.output_rate_hz).round() as usize;
    if n == 0 {
        return Err(invalid("duration_s", "shorter than one output sample"));
    }
    Ok((burn, n))
}

fn series(v: Vec<f64>, rate: f64) -> TimeSeries {
    TimeSeries {
        samples: v,
        rate_hz: rate,
        start_index: 0,
    }
}

/// Integrates the coupled pair from seeded random initial conditions,
/// discards `burn_in_s` and keeps every `internal/output`-th state.
pub fn simulate_rossler(p: &RosslerParams, duration_s: f64, seed: u64) -> Result<RosslerTrajectory> {
    let (burn, n) = output_len(p, duration_s)?;
    let k = p.decimation()?;
    let h = 1.0 / p.internal_rate_hz;
    let w = p.omegas();
    let g = p.coupling * p.coupling_sign();
    let mut s = [initial_state(p, seed, 0), initial_state(p, seed, 1)];
    let mut out: [Vec<f64>; 6] = Default::default();
    for o in &mut out {
        o.reserve(n);
    }
    for j in 0..burn + n {
        if j >= burn {
            for (c, o) in out.iter_mut().enumerate() {
                o.push(s[c / 3][c % 3]);
            }
        }
        if j + 1 == burn + n {
            break;
        }
        for _ in 0..k {
            let k1 = pair(&s, w, p, g);
            let s2 = [axpy(&s[0], &k1[0], h / 2.0), axpy(&s[1], &k1[1], h / 2.0)];
            let k2 = pair(&s2, w, p, g);
            let s3 = [axpy(&s[0], &k2[0], h / 2.0), axpy(&s[1], &k2[1], h / 2.0)];
            let k3 = pair(&s3, w, p, g);
            let s4 = [axpy(&s[0], &k3[0], h), axpy(&s[1], &k3[1], h)];
            let k4 = pair(&s4, w, p, g);
            for a in 0..2 {
                for c in 0..3 {
                    s[a][c] += h / 6.0 * (k1[a][c] + 2.0 * k2[a][c] + 2.0 * k3[a][c] + k4[a][c]);
                }
            }
        }
        check(&s, p.divergence_bound, (j + 1) * k, p.internal_rate_hz)?;
    }
    let rate = p.output_rate_hz;
    let [x1, y1, z1, x2, y2, z2] = out.map(|v| series(v, rate));
    Ok(RosslerTrajectory {
        x1,
        y1,
        z1,
        x2,
        y2,
        z2,
    })
}

/// Attractor `which` (0 or 1) integrated on its own, with the same initial
/// condition it receives in [`simulate_rossler`]. Returns `(x, y, z)`.
pub fn simulate_single_rossler(
    p: &RosslerParams,
    which: usize,
    duration_s: f64,
    seed: u64,
) -> Result<[TimeSeries; 3]> {
    if which > 1 {
        return Err(invalid("which", "attractor index must be 0 or 1"));
    }
    let (burn, n) = output_len(p, duration_s)?;
    let k = p.decimation()?;
    let h = 1.0 / p.internal_rate_hz;
    let w = if which == 0 { p.omegas().0 } else { p.omegas().1 };
    let mut s = initial_state(p, seed, which as u64);
    let mut out: [Vec<f64>; 3] = Default::default();
    for j in 0..burn + n {
        if j >= burn {
            for (c, o) in out.iter_mut().enumerate() {
                o.push(s[c]);
            }
        }
        if j + 1 == burn + n {
            break;
        }
        for _ in 0..k {
            let k1 = rossler(&s, w, p, 0.0);
            let k2 = rossler(&axpy(&s, &k1, h / 2.0), w, p, 0.0);
            let k3 = rossler(&axpy(&s, &k2, h / 2.0), w, p, 0.0);
            let k4 = rossler(&axpy(&s, &k3, h), w, p, 0.0);
            for c in 0..3 {
                s[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        check(&[s], p.divergence_bound, (j + 1) * k, p.internal_rate_hz)?;
    }
    Ok(out.map(|v| series(v, p.output_rate_hz)))
}

/// Straightened four-quadrant angle of `(x_t, y_t)`.
pub fn poincare_phase(x: &TimeSeries, y: &TimeSeries) -> Result<PhaseSeries> {
    if x.len() != y.len() {
        return Err(invalid(
            "poincare_phase",
            format!("length mismatch: {} vs {}", x.len(), y.len()),
        ));
    }
    let mut values = Vec::with_capacity(x.len());
    for (i, (&a, &b)) in x.samples.iter().zip(&y.samples).enumerate() {
        if a == 0.0 && b == 0.0 {
            return Err(Error::Numerical(format!(
                "phase undefined at sample {i}: (x, y) = (0, 0)"
            )));
        }
        values.push(b.atan2(a));
    }
    Ok(straighten_phase(&PhaseSeries::wrapped(values, x.rate_hz)))
}

/// A 2π jump of a phase difference between two locked levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlip {
    pub index: usize,
    /// `+2π` or `−2π`.
    pub delta: f64,
}

/// Phase slips of a straightened phase difference.
///
/// The locked level starts at the median of the first `settle` samples. A
/// slip is confirmed once the difference comes within `margin` of the
/// neighbouring level `level ± 2π`; it is dated at the last crossing of the
/// midpoint `level ± π` before confirmation. Excursions that turn back before
/// confirmation are not slips.
pub fn phase_slips(diff: &PhaseSeries, settle: usize, margin: f64) -> Result<Vec<PhaseSlip>> {
    if !(margin >= 0.0 && margin < PI) {
        return Err(invalid("margin", "must lie in [0, π)"));
    }
    let v = diff.analysis();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    let mut head = v[..settle.clamp(1, v.len())].to_vec();
    head.sort_by(f64::total_cmp);
    let mut level = head[head.len() / 2];
    let mut slips = Vec::new();
    let (mut up, mut down) = (0usize, 0usize);
    let mut prev = v[0];
    for (i, &p) in v.iter().enumerate() {
        if p >= level + PI && prev < level + PI {
            up = i;
        }
        if p <= level - PI && prev > level - PI {
            down = i;
        }
        if p >= level + 2.0 * PI - margin {
            slips.push(PhaseSlip {
                index: diff.burn_in + up,
                delta: 2.0 * PI,
            });
            level += 2.0 * PI;
            down = i;
        } else if p <= level - 2.0 * PI + margin {
            slips.push(PhaseSlip {
                index: diff.burn_in + down,
                delta: -2.0 * PI,
            });
            level -= 2.0 * PI;
            up = i;
        }
        prev = p;
    }
    Ok(slips)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short() -> RosslerParams {
        RosslerParams {
            burn_in_s: 1.0,
            ..RosslerParams::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_rossler(&short(), 2.0, 3).unwrap();
        let b = simulate_rossler(&short(), 2.0, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_rossler(&short(), 2.0, 4).unwrap();
        assert_ne!(a.x1.samples, c.x1.samples);
        assert_eq!(a.x1.len(), 500);
    }

    #[test]
    fn uncoupled_attractor_is_independent_of_its_partner() {
        let p = RosslerParams {
            coupling: 0.0,
            ..short()
        };
        let pair = simulate_rossler(&p, 3.0, 9).unwrap();
        let [x, y, z] = simulate_single_rossler(&p, 0, 3.0, 9).unwrap();
        assert_eq!(pair.x1.samples, x.samples);
        assert_eq!(pair.y1.samples, y.samples);
        assert_eq!(pair.z1.samples, z.samples);
        let [x2, _, _] = simulate_single_rossler(&p, 1, 3.0, 9).unwrap();
        assert_eq!(pair.x2.samples, x2.samples);
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let p = RosslerParams {
            c: -10.0,
            burn_in_s: 0.0,
            ..RosslerParams::default()
        };
        match simulate_rossler(&p, 60.0, 1) {
            Err(Error::Numerical(m)) => assert!(m.contains("diverged at t ="), "{m}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_integer_decimation() {
        let p = RosslerParams {
            internal_rate_hz: 10_100.0,
            ..RosslerParams::default()
        };
        assert!(simulate_rossler(&p, 1.0, 1).is_err());
        assert!(simulate_rossler(&RosslerParams::default(), 0.0, 1).is_err());
    }

    #[test]
    fn poincare_quadrants() {
        let one = |v: f64| TimeSeries::new(vec![v], 250.0).unwrap();
        assert_eq!(poincare_phase(&one(1.0), &one(0.0)).unwrap().values[0], 0.0);
        let p = poincare_phase(&one(-1.0), &one(1.0)).unwrap().values[0];
        assert!((p - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!(poincare_phase(&one(0.0), &one(0.0)).is_err());
    }

    #[test]
    fn poincare_of_circle_is_a_ramp() {
        let n = 2000;
        let th: Vec<f64> = (0..n).map(|i| 0.05 * i as f64).collect();
        let x = TimeSeries::new(th.iter().map(|t| t.cos()).collect(), 250.0).unwrap();
        let y = TimeSeries::new(th.iter().map(|t| t.sin()).collect(), 250.0).unwrap();
        let p = poincare_phase(&x, &y).unwrap();
        for (a, b) in p.values.iter().zip(&th) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn slips_of_a_staircase() {
        let mut v = vec![0.3; 100];
        v.extend(vec![0.3 + 2.0 * PI; 100]);
        v.extend(vec![0.3; 100]);
        let d = PhaseSeries::from_straight(v, 250.0);
        let s = phase_slips(&d, 10, 0.5).unwrap();
        let idx: Vec<usize> = s.iter().map(|s| s.index).collect();
        assert_eq!(idx, vec![100, 200]);
        assert_eq!((s[0].delta, s[1].delta), (2.0 * PI, -2.0 * PI));
        let flat = PhaseSeries::from_straight(vec![1.0; 50], 250.0);
        assert!(phase_slips(&flat, 10, 0.5).unwrap().is_empty());
        assert!(phase_slips(&flat, 10, PI).is_err());
    }

    #[test]
    fn excursions_that_turn_back_are_not_slips() {
        // climbs past the midpoint, falls back, then completes a slip
        let mut v: Vec<f64> = (0..100).map(|i| 4.0 * i as f64 / 100.0).collect();
        v.extend((0..100).map(|i| 4.0 - 4.0 * i as f64 / 100.0));
        v.extend((0..100).map(|i| 7.0 * i as f64 / 100.0));
        v.extend(vec![7.0; 50]);
        let d = PhaseSeries::from_straight(v, 250.0);
        let s = phase_slips(&d, 1, PI / 2.0).unwrap();
        assert_eq!(s.len(), 1);
        // the rising ramp crosses π at 7i/100 ≥ π, i = 45
        assert_eq!(s[0].index, 245);
    }
}
