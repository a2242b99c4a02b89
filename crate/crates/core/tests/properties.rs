mod common;

use common::{check_curves, conversion_residual, nonanticipativity_violation, random_scenarios_with, storage_residual, Toy};
use heatflow::config::MarketSide;
use heatflow::model::{ModelOptions, PlanningMode};
use heatflow::network::{FlowNetwork, NetworkOptions};
use heatflow::rolling::iteration_plan;
use heatflow::schedule::{solve, BidCurve, Metrics};
use heatflow::solver::SolveParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut toy = Toy::random(&mut rng);
    toy.storage = rng.random_bool(0.7);
    toy.buying = rng.random_bool(0.5);
    toy
}

fn solve_toy(seed: u64, mode: PlanningMode, ties: bool) -> (FlowNetwork, heatflow::schedule::Schedule) {
    let spec = toy(seed).spec();
    let set = random_scenarios_with(seed ^ 0x5eed, 4, 6, ties);
    let net = FlowNetwork::build(&spec, &set, &NetworkOptions::new(&spec, 6, 3)).unwrap();
    let params = SolveParams { gap_tol: 1e-9, ..SolveParams::default() };
    let (_, sched) = solve(&net, &ModelOptions::with_mode(mode), None, &params).unwrap();
    (net, sched)
}

fn metrics_strategy() -> impl Strategy<Value = Metrics> {
    (-1e4..1e4f64, 0.0..500.0f64, 0.0..500.0f64, 0.0..1.0f64, -50.0..50.0f64, -1e3..1e3f64, -5.0..5.0f64, 0.0..5.0f64)
        .prop_map(|(objective, heat, extra, res, el_net, income, imbalance, missing)| {
            Metrics::mix(&[(
                1.0,
                Metrics {
                    objective,
                    heat_delivered: heat,
                    heat_produced: heat + extra,
                    res_heat: res * (heat + extra),
                    el_net,
                    market_income: income,
                    imbalance,
                    missing_heat: missing,
                    ..Metrics::default()
                },
            )])
        })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn solutions_conserve_energy(seed in any::<u64>(), mode in prop_oneof![
        Just(PlanningMode::Deterministic), Just(PlanningMode::Operational), Just(PlanningMode::Bidding)
    ]) {
        let (net, sched) = solve_toy(seed, mode, false);
        prop_assert!(conversion_residual(&net, &sched) <= 1e-6);
        prop_assert!(storage_residual(&net, &sched) <= 1e-6);
    }

    #[test]
    fn operational_first_stage_is_shared(seed in any::<u64>()) {
        let (net, sched) = solve_toy(seed, PlanningMode::Operational, false);
        let (spread, mismatches) = nonanticipativity_violation(&net, &sched);
        prop_assert!(spread <= 1e-6, "spread {}", spread);
        prop_assert_eq!(mismatches, 0);
    }

    #[test]
    fn bid_curves_are_monotone(seed in any::<u64>(), ties in any::<bool>()) {
        let (net, sched) = solve_toy(seed, PlanningMode::Bidding, ties);
        let checked = check_curves(&net, &sched);
        prop_assert!(checked.is_ok(), "{:?}", checked);
        prop_assert!(checked.unwrap() >= 3);
    }

    #[test]
    fn curves_from_monotone_points_settle_monotonically(
        mut pts in prop::collection::vec((0.0..200.0f64, 0.0..50.0f64), 1..12),
        a in 0.0..220.0f64,
        b in 0.0..220.0f64,
    ) {
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut q = 0.0;
        let selling: Vec<(f64, f64)> = pts.iter().map(|&(p, dq)| { q += dq; (p, q) }).collect();
        let merged = merge_ties(&selling);
        let curve = BidCurve::from_points("da", 0, MarketSide::Selling, &merged).unwrap();
        prop_assert!(curve.is_monotone());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(curve.settle(lo) <= curve.settle(hi));

        let buying: Vec<(f64, f64)> = merged.iter().map(|&(p, q)| (p, 1000.0 - q)).collect();
        let curve = BidCurve::from_points("grid", 0, MarketSide::Buying, &buying).unwrap();
        prop_assert!(curve.is_monotone());
        prop_assert!(curve.settle(lo) >= curve.settle(hi));
    }

    #[test]
    fn metrics_mix_is_linear(m1 in metrics_strategy(), m2 in metrics_strategy(), p in 0.0..1.0f64) {
        let same = Metrics::mix(&[(p, m1.clone()), (1.0 - p, m1.clone())]);
        prop_assert!(close(same.objective, m1.objective));
        prop_assert!(close(same.heat_delivered, m1.heat_delivered));
        prop_assert!(close(same.cost_per_mwh, m1.cost_per_mwh) || m1.heat_delivered < 1e-9);
        prop_assert!(close(same.res_share, m1.res_share) || m1.heat_produced < 1e-9);

        let mixed = Metrics::mix(&[(p, m1.clone()), (1.0 - p, m2.clone())]);
        prop_assert!(close(mixed.objective, p * m1.objective + (1.0 - p) * m2.objective));
        prop_assert!(close(mixed.market_income, p * m1.market_income + (1.0 - p) * m2.market_income));
        prop_assert!(close(mixed.missing_heat, p * m1.missing_heat + (1.0 - p) * m2.missing_heat));
        if mixed.heat_delivered > 0.0 {
            prop_assert!(close(mixed.cost_per_mwh, mixed.objective / mixed.heat_delivered));
        }
    }

    #[test]
    fn iteration_plan_tiles_the_horizon(total in 1usize..400, window in 1usize..200, step_frac in 0.01..1.0f64) {
        let step = ((window as f64 * step_frac).ceil() as usize).clamp(1, window);
        let plan = iteration_plan(total, window, step);
        prop_assert_eq!(plan.len(), total.div_ceil(step));
        let mut next = 0;
        for &(offset, len, committed) in &plan {
            prop_assert_eq!(offset, next);
            prop_assert!(len <= window && committed <= len && committed >= 1);
            prop_assert!(offset + len <= total);
            next += committed;
        }
        prop_assert_eq!(next, total);
    }
}

/// Keeps the largest quantity per distinct price, as a solver would report.
fn merge_ties(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(p, q) in points {
        match out.last_mut() {
            Some(last) if last.0 == p => last.1 = q,
            _ => out.push((p, q)),
        }
    }
    out
}
