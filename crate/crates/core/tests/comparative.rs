use repricing::comparative::{
    competition_effect_report, existence_condition, find_threshold, interior_grid, premium_at,
    premium_map, threshold_sweep,
};
use repricing::{MarketParams, ModelKind};

fn market(k: f64) -> MarketParams {
    MarketParams::new(2.0, 1.0, 0.8, 0.9, k, 100).unwrap()
}

#[test]
fn threshold_absent_when_reputations_are_far_apart() {
    // (r_H u - c) / gap = 1.8 / 1.6 < e, so the condition fails.
    let p = MarketParams::new(2.0, 0.0, 0.1, 0.9, 1.0, 100).unwrap();
    assert!(existence_condition(&p) < 1.0);
    let t = find_threshold(&p, ModelKind::Benchmark);
    assert!(t.k_star.is_none());
    assert!(!t.exists());
    // The premium keeps one sign over the whole range.
    let map = premium_map(&p, ModelKind::Benchmark, &interior_grid(2.0, 400)).unwrap();
    assert_eq!(map.sign_changes(), 0);
}

#[test]
fn thresholds_are_roots_of_the_premium() {
    let p = market(1.4);
    for model in [ModelKind::Benchmark, ModelKind::Competition] {
        let t = find_threshold(&p, model);
        let k = t.k_star.unwrap();
        assert!(premium_at(&p, model, k).unwrap().abs() <= 1e-10);
        assert!(premium_at(&p, model, k - 1e-3).unwrap() < 0.0);
        assert!(premium_at(&p, model, k + 1e-3).unwrap() > 0.0);
    }
}

#[test]
fn rivals_lower_high_prices() {
    for k in [1.4, 0.6] {
        let e = competition_effect_report(&market(k)).unwrap();
        assert!(e.high_price_falls, "k={k}: {e:?}");
        assert!(e.low_price_rises, "k={k}: {e:?}");
        assert!(e.cdf_ordering_holds, "k={k}: {e:?}");
        assert!(e.competition.high < e.benchmark.high);
    }
}

#[test]
fn premium_vanishes_as_reputations_merge() {
    let mut last = f64::INFINITY;
    for gap in [0.1, 0.01, 0.001, 1e-5] {
        let p = MarketParams::new(2.0, 1.0, 0.9 - gap, 0.9, 1.4, 100).unwrap();
        let premium = premium_at(&p, ModelKind::Benchmark, 1.4).unwrap().abs();
        assert!(premium < last, "gap {gap}: {premium}");
        last = premium;
    }
    assert!(last < 1e-3);
}

#[test]
fn sweep_is_reproducible() {
    let a = threshold_sweep(20, 3);
    let b = threshold_sweep(20, 3);
    assert_eq!(a, b);
    assert!(a.all_ordered);
    assert!(a.points.iter().all(|q| q.existence_condition_value >= 1.0));
}
