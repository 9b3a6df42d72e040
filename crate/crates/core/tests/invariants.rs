//! Property tests for the module invariants.

use std::f64::consts::PI;

use proptest::prelude::*;

use phaseshift::detect::{
    block_surrogate, cusum_stat, detect_events, pd_stat, threshold_events, threshold_quantile, DetectorConfig, Method,
    StatSeries, ThresholdQuantile,
};
use phaseshift::eval::{accuracy, isi_powerlaw, match_indices, roc_curve, uniformity_test, ConfusionCounts, PowerLawConfig};
use phaseshift::phase::{
    complex_demodulate, ewma_filter, phase_error_bound, straight_phase, straighten_phase, wrap, DemodConfig,
    PhaseSeries,
};
use phaseshift::signals::{gen_oscillator, gen_shift_profile, mix_noise, PhaseProfile, TimeSeries};

const CASES: u32 = 128;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn same_stat(a: &StatSeries, b: &StatSeries, tol: f64) -> bool {
    a.argmax == b.argmax
        && close(a.max_value, b.max_value, tol)
        && a.values.iter().zip(&b.values).all(|(x, y)| close(*x, *y, tol))
}

/// Random walk with occasional steps, as a straightened phase.
fn phase_walk() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-0.3f64..0.3, 16..400), prop::collection::vec(0usize..400, 0..4), -2.0f64..2.0).prop_map(
        |(inc, steps, size)| {
            let mut level = 0.0;
            inc.iter()
                .enumerate()
                .map(|(i, d)| {
                    if steps.contains(&i) {
                        level += size;
                    }
                    level += d;
                    level
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn shift_profiles_are_ordered_and_bounded(
        m in 0usize..40, delta_min in 0.01f64..3.0, gap in 1usize..500, n in 1usize..50_000, seed in any::<u64>()
    ) {
        let p = gen_shift_profile(m, delta_min, gap, n, seed).unwrap();
        prop_assert!(p.events.windows(2).all(|w| w[0].index < w[1].index));
        prop_assert!(p.events.iter().all(|e| e.index < n));
        prop_assert!(p.events.iter().all(|e| e.delta.abs() >= delta_min && e.delta.abs() <= PI));
        prop_assert_eq!(p.events.len() + p.truncated, m);
        prop_assert_eq!(p, gen_shift_profile(m, delta_min, gap, n, seed).unwrap());
    }

    #[test]
    fn noise_mixing_keeps_shape_and_is_deterministic(r in 0.05f64..0.95, n in 8usize..2000, seed in any::<u64>()) {
        let clean = gen_oscillator(9.0, 250.0, &PhaseProfile::constant(0.3), n).unwrap();
        let a = mix_noise(&clean, r, seed).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a.rate_hz, 250.0);
        prop_assert_eq!(&a, &mix_noise(&clean, r, seed).unwrap());
    }

    #[test]
    fn straightening_is_undone_by_wrapping(raw in prop::collection::vec(-50.0f64..50.0, 1..500)) {
        let wrapped = PhaseSeries::wrapped(raw, 250.0);
        let s = straighten_phase(&wrapped);
        prop_assert!(s.straightened);
        for (w, v) in wrapped.values.iter().zip(&s.values) {
            let back = wrap(*v);
            // the branch cut at ±π may come back on the other side
            prop_assert!((back - w).abs() < 1e-9 || ((back - w).abs() - 2.0 * PI).abs() < 1e-9);
        }
        prop_assert!(s.values.windows(2).all(|d| d[1] - d[0] > -PI - 1e-9 && d[1] - d[0] <= PI + 1e-9));
    }

    #[test]
    fn ewma_recursion_matches_the_weighted_sum(alpha in 0.01f64..0.995, x in prop::collection::vec(-10.0f64..10.0, 1..300)) {
        let y = ewma_filter(&TimeSeries::new(x.clone(), 250.0).unwrap(), alpha).unwrap();
        for t in 0..x.len() {
            let direct: f64 = (0..=t).map(|i| alpha.powi(i as i32) * x[t - i]).sum::<f64>() * (1.0 - alpha);
            prop_assert!(close(y.samples[t], direct, 1e-12), "t={} {} vs {}", t, y.samples[t], direct);
        }
    }

    #[test]
    fn demodulated_phase_ignores_amplitude(scale in 0.01f64..100.0, phi0 in -3.0f64..3.0, seed in any::<u64>()) {
        let clean = gen_oscillator(9.0, 250.0, &PhaseProfile::constant(phi0), 1500).unwrap();
        let x = mix_noise(&clean, 0.5, seed).unwrap();
        let scaled = TimeSeries::new(x.samples.iter().map(|v| v * scale).collect(), 250.0).unwrap();
        let cfg = DemodConfig::butterworth(9.0, 1.0, 4);
        let a = straight_phase(&x, &cfg).unwrap();
        let b = straight_phase(&scaled, &cfg).unwrap();
        prop_assert!(a.values.iter().zip(&b.values).all(|(p, q)| (p - q).abs() < 1e-9));
    }

    #[test]
    fn noiseless_ewma_error_stays_within_the_bound(alpha in 0.5f64..0.99, f0 in 5.0f64..40.0, phi0 in -3.1f64..3.1) {
        let rate = 250.0;
        let settle = (40.0 / (1.0 - alpha)) as usize;
        let x = gen_oscillator(f0, rate, &PhaseProfile::constant(phi0), settle + 500).unwrap();
        let est = complex_demodulate(&x, &DemodConfig::ewma(f0, 1.0, alpha).with_burn_in(0)).unwrap();
        let bound = phase_error_bound(alpha, 2.0 * PI * f0 / rate).unwrap();
        for &v in &est.values[settle..] {
            prop_assert!(wrap(v - phi0).abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn statistics_ignore_offset_and_sign(x in phase_walk(), c in -100.0f64..100.0) {
        for stat in [cusum_stat, pd_stat] {
            let base = stat(&PhaseSeries::from_straight(x.clone(), 250.0)).unwrap();
            let shifted = stat(&PhaseSeries::from_straight(x.iter().map(|v| v + c).collect(), 250.0)).unwrap();
            let negated = stat(&PhaseSeries::from_straight(x.iter().map(|v| -v).collect(), 250.0)).unwrap();
            prop_assert!(same_stat(&base, &shifted, 1e-6));
            prop_assert!(same_stat(&base, &negated, 1e-12));
            prop_assert!(base.values.iter().all(|&v| v >= 0.0));
            prop_assert_eq!(base.at(base.argmax), Some(base.max_value));
        }
    }

    #[test]
    fn block_surrogates_preserve_the_block_multiset(
        (x, l, perm) in (1usize..20, 4usize..12).prop_flat_map(|(l, k)| (
            prop::collection::vec(-5.0f64..5.0, l * k..l * k + l),
            Just(l),
            Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        ))
    ) {
        let s = block_surrogate(&x, l, &perm);
        let k = perm.len();
        prop_assert_eq!(s.len(), k * l);
        let mut original: Vec<&[f64]> = x[..k * l].chunks(l).collect();
        let mut shuffled: Vec<&[f64]> = s.chunks(l).collect();
        let key = |a: &&[f64], b: &&[f64]| a.iter().zip(b.iter()).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal);
        original.sort_by(key);
        shuffled.sort_by(key);
        prop_assert_eq!(original, shuffled);
        let identity: Vec<usize> = (0..k).collect();
        prop_assert_eq!(&block_surrogate(&x, l, &identity)[..], &x[..k * l]);
    }

    #[test]
    fn threshold_quantile_is_monotone(a1 in 0.001f64..0.5, a2 in 0.001f64..0.5, k1 in 1usize..10_000, k2 in 1usize..10_000) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let (kl, kh) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        for rule in [ThresholdQuantile::OneSided, ThresholdQuantile::TwoSided] {
            prop_assert!(threshold_quantile(lo, kl, rule).unwrap() >= threshold_quantile(hi, kl, rule).unwrap());
            prop_assert!(threshold_quantile(lo, kh, rule).unwrap() >= threshold_quantile(lo, kl, rule).unwrap());
        }
    }

    #[test]
    fn threshold_iterations_never_raise_the_threshold(x in phase_walk(), tau in 1usize..8, alpha in 0.01f64..0.2) {
        prop_assume!(tau < x.len());
        let (events, trace) = threshold_events(&x, tau, alpha, ThresholdQuantile::OneSided).unwrap();
        prop_assert!(trace.thresholds.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(events.windows(2).all(|w| w[0].t_u <= w[1].t_l));
        prop_assert!(events.iter().all(|e| e.t_l <= e.t && e.t <= e.t_u));
    }

    #[test]
    fn detections_are_sorted_disjoint_and_reproducible(x in phase_walk(), seed in any::<u64>(), block in any::<bool>()) {
        prop_assume!(x.len() >= 64);
        let phi = PhaseSeries::from_straight(x, 250.0);
        let cfg = DetectorConfig {
            method: if block { Method::CusumBlock } else { Method::PdThreshold },
            tau: Some(2),
            n_min: 32,
            isi_min: 8,
            bootstrap_b: 200,
            seed,
            ..DetectorConfig::default()
        };
        let d = detect_events(&phi, &cfg, None).unwrap();
        prop_assert!(d.events.iter().all(|e| e.t_l <= e.index && e.index <= e.t_u));
        prop_assert!(d.events.windows(2).all(|w| w[0].index < w[1].index && w[0].t_u <= w[1].t_l));
        prop_assert_eq!(d, detect_events(&phi, &cfg, None).unwrap());
    }

    #[test]
    fn matching_ignores_translation(
        det in prop::collection::btree_set(0usize..5000, 0..30),
        truth in prop::collection::btree_set(0usize..5000, 0..30),
        tol in 1usize..100, window in 1usize..200, k in 0usize..20,
    ) {
        let det: Vec<usize> = det.into_iter().collect();
        let truth: Vec<usize> = truth.into_iter().collect();
        let n = 5000;
        let c = match_indices(&det, &truth, tol, n, window).unwrap();
        let shift = k * window;
        let moved = |v: &[usize]| v.iter().map(|i| i + shift).collect::<Vec<_>>();
        let d = match_indices(&moved(&det), &moved(&truth), tol, n + shift, window).unwrap();
        prop_assert_eq!((c.tp, c.fp, c.fn_), (d.tp, d.fp, d.fn_));
        prop_assert_eq!(c.tp + c.fn_, truth.len());
        prop_assert_eq!(c.tp + c.fp, det.len());
        prop_assert!((0.0..=1.0).contains(&c.tp_rate()) && (0.0..=1.0).contains(&c.fp_rate()));
        if let Ok(a) = accuracy(&c) {
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn auroc_ignores_grid_order(
        counts in prop::collection::vec((0usize..50, 0usize..50, 1usize..50, 0usize..50), 3..10),
        order in Just((0..10).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let runs: Vec<(f64, ConfusionCounts)> = counts
            .iter()
            .enumerate()
            .map(|(i, &(tp, fp, tn, fn_))| (0.01 * (i + 1) as f64, ConfusionCounts { tp, fp, tn, fn_, ..Default::default() }))
            .collect();
        let permuted: Vec<_> = order.iter().filter(|&&i| i < runs.len()).map(|&i| runs[i]).collect();
        let a = roc_curve(&runs).unwrap();
        let b = roc_curve(&permuted).unwrap();
        prop_assert!((a.auroc - b.auroc).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.auroc));
        prop_assert_eq!(a.max_accuracy, b.max_accuracy);
        prop_assert!(a.points.windows(2).all(|w| w[0].fp_rate <= w[1].fp_rate));
    }

    #[test]
    fn power_law_slope_ignores_units(
        u in prop::collection::vec(0.001f64..1.0, 300..600), q in 1.5f64..5.0, scale in 0.01f64..1000.0,
    ) {
        // Pareto draws by inverse CDF
        let isis: Vec<f64> = u.iter().map(|v| v.powf(-1.0 / (q - 1.0))).collect();
        let cfg = PowerLawConfig { min_bin_count: 1, ..PowerLawConfig::default() };
        let a = isi_powerlaw(&isis, &cfg);
        let b = isi_powerlaw(&isis.iter().map(|v| v * scale).collect::<Vec<_>>(), &cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.slope - b.slope).abs() < 1e-6, "{} vs {}", a.slope, b.slope);
                prop_assert!((a.intercept - (a.slope + 1.0) * scale.log10() - b.intercept).abs() < 1e-6);
                prop_assert!(a.histogram.iter().filter(|h| h.center >= a.tail_start).count() >= a.bins_used);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "fits disagree: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn uniformity_ignores_a_common_time_shift(
        lags in prop::collection::vec(0.0f64..0.5, 100..300), c in -1000.0f64..1000.0,
    ) {
        let stimuli: Vec<f64> = (0..lags.len()).map(|i| i as f64).collect();
        let events: Vec<f64> = lags.iter().enumerate().map(|(i, l)| i as f64 + l).collect();
        let a = uniformity_test(&events, &stimuli, 0.5, 5).unwrap();
        let shift = |v: &[f64]| v.iter().map(|t| t + c).collect::<Vec<_>>();
        let b = uniformity_test(&shift(&events), &shift(&stimuli), 0.5, 5).unwrap();
        // a lag sitting on a bin edge may round into the neighbour
        let moved: usize = a.counts.iter().zip(&b.counts).map(|(x, y)| x.abs_diff(*y)).sum();
        prop_assert!(moved <= 2 * lags.len() / 50);
        if moved == 0 {
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }
}
