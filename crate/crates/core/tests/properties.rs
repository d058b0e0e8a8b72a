//! Cross-module properties: exact rates against the enumeration oracle, hull
//! membership against the workload conditions, and Monte-Carlo convergence.

use dcqos::region::{boundary_scale, extended_region, polling_region};
use dcqos::sim::stream_rng;
use dcqos::{
    brute_force_rate, enumerate_group_schedules, expected_rate, hull_feasible, polling_admission, simulate_schedule,
    workload_admission, ChannelParams, FrameConfig, RateRegion, RateVector,
};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_channel(rng: &mut ChaCha8Rng, n: usize) -> ChannelParams {
    ChannelParams::new((0..n).map(|_| rng.gen_range(0.02..0.98)).collect()).unwrap()
}

/// A random point of the hull: exponential weights over the corner points.
fn random_hull_point(rng: &mut ChaCha8Rng, region: &RateRegion) -> Vec<f64> {
    let pts = region.corner_points();
    let lam: Vec<f64> = pts.iter().map(|_| -rng.gen::<f64>().ln()).collect();
    let total: f64 = lam.iter().sum();
    (0..region.channel().n_users())
        .map(|i| pts.iter().zip(&lam).map(|(p, l)| p.rates[i] * l / total).sum())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expected_rate_matches_enumeration(
        p in prop::collection::vec(0.0..=1.0f64, 1..=3),
        tau in 1usize..=4,
        pick in any::<prop::sample::Index>(),
    ) {
        let n = p.len();
        let channel = ChannelParams::new(p).unwrap();
        let frame = FrameConfig::new(tau).unwrap();
        let schedules = enumerate_group_schedules(n, n).unwrap();
        let s = &schedules[pick.index(schedules.len())];
        let exact = expected_rate(s, &channel, frame).unwrap();
        let oracle = brute_force_rate(s, &channel, frame).unwrap();
        for i in 0..n {
            prop_assert!((exact[i] - oracle[i]).abs() <= 1e-12, "{s}: {} vs {}", exact[i], oracle[i]);
        }
    }
}

#[test]
fn hull_accepts_inside_and_rejects_outside_the_boundary() {
    let mut rng = stream_rng(21, 0);
    for _ in 0..40 {
        let n = rng.gen_range(2..=3);
        let channel = random_channel(&mut rng, n);
        let frame = FrameConfig::new(rng.gen_range(1..=5)).unwrap();
        let region = extended_region(&channel, frame, n).unwrap();
        let inside: Vec<f64> = random_hull_point(&mut rng, &region).iter().map(|v| 0.99 * v).collect();
        assert!(hull_feasible(&RateVector::new(inside).unwrap(), &region)
            .unwrap()
            .is_feasible());

        let direction: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let alpha = boundary_scale(&direction, &region).unwrap();
        let outside: Vec<f64> = direction.iter().map(|v| 1.01 * alpha * v).collect();
        if outside.iter().all(|&v| v <= 1.0) {
            let decision = hull_feasible(&RateVector::new(outside).unwrap(), &region).unwrap();
            assert!(!decision.is_feasible());
        }
    }
}

#[test]
fn adding_schedules_never_shrinks_the_region() {
    let mut rng = stream_rng(22, 0);
    for _ in 0..20 {
        let n = rng.gen_range(2..=3);
        let channel = random_channel(&mut rng, n);
        let frame = FrameConfig::new(rng.gen_range(1..=5)).unwrap();
        let polling = polling_region(&channel, frame).unwrap();
        let extended = extended_region(&channel, frame, n).unwrap();
        for _ in 0..25 {
            let d: Vec<f64> = random_hull_point(&mut rng, &polling)
                .iter()
                .map(|v| (v * rng.gen_range(0.5..1.5)).min(1.0))
                .collect();
            let d = RateVector::new(d).unwrap();
            let small = hull_feasible(&d, &polling).unwrap();
            let large = hull_feasible(&d, &extended).unwrap();
            if small.is_feasible() {
                assert!(large.is_feasible());
            }
            assert!(large.slack() >= small.slack() - 1e-9);
        }
    }
}

/// The workload conditions are an independent description of the polling
/// region; away from the boundary (where the two tolerances differ in units)
/// both admission tests must agree with the hull LP.
#[test]
fn polling_admission_agrees_with_hull() {
    let mut rng = stream_rng(23, 0);
    let (mut compared, mut rejected) = (0, 0);
    while compared < 1000 {
        let n = rng.gen_range(2..=4);
        let channel = random_channel(&mut rng, n);
        let frame = FrameConfig::new(rng.gen_range(1..=6)).unwrap();
        let region = polling_region(&channel, frame).unwrap();
        for _ in 0..50 {
            let d: Vec<f64> = random_hull_point(&mut rng, &region)
                .iter()
                .map(|v| (v * rng.gen_range(0.5..2.0)).min(1.0))
                .collect();
            let d = RateVector::new(d).unwrap();
            let hull = hull_feasible(&d, &region).unwrap();
            if hull.slack().abs() < 1e-7 {
                continue;
            }
            compared += 1;
            rejected += usize::from(!hull.is_feasible());
            let chain = polling_admission(&d, &channel, frame).unwrap();
            let exhaustive = workload_admission(&d, &channel, frame).unwrap();
            assert_eq!(chain.accepted, hull.is_feasible(), "{channel:?} {frame:?} {d:?}");
            assert_eq!(exhaustive.accepted, hull.is_feasible(), "{channel:?} {frame:?} {d:?}");
            assert!(chain.conditions_checked <= n + 1);
        }
    }
    // both outcomes are well represented
    assert!(rejected > 200 && rejected < 800, "{rejected}");
}

#[test]
fn simulation_converges_to_expected_rates() {
    let mut rng = stream_rng(24, 0);
    let (mut within, mut total) = (0, 0);
    for case in 0..60u64 {
        let n = rng.gen_range(1..=3);
        let channel = random_channel(&mut rng, n);
        let frame = FrameConfig::new(rng.gen_range(1..=6)).unwrap();
        let schedules = enumerate_group_schedules(n, n).unwrap();
        let s = &schedules[rng.gen_range(0..schedules.len())];
        let exact = expected_rate(s, &channel, frame).unwrap();
        let sim = simulate_schedule(s, &channel, frame, 50_000, case).unwrap();
        for i in 0..n {
            total += 1;
            let err = (sim.per_user_throughput[i] - exact[i]).abs();
            within += usize::from(err <= 3.0 * sim.ci_halfwidth[i]);
        }
    }
    assert!(within as f64 >= 0.99 * total as f64, "{within}/{total}");
}
