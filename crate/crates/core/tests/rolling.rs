mod common;

use chrono::NaiveDateTime;
use common::{start, Toy};
use heatflow::evaluate::SolveSetup;
use heatflow::model::PlanningMode;
use heatflow::rolling::{clairvoyant_bound, roll_horizon, DataSource, RollConfig};
use heatflow::scenario::{Scenario, ScenarioSet};
use heatflow::series::Bundle;

/// Realized data follows a fixed daily pattern; planning sees it shifted up
/// and down by a constant.
struct Pattern {
    spread: f64,
}

impl Pattern {
    fn bundle(&self, start: NaiveDateTime, len: usize, shift: f64) -> Bundle {
        let base = (start - common::start()).num_hours() as usize;
        let mut b = Bundle::new();
        b.insert("price".into(), (0..len).map(|t| 40.0 + 30.0 * (((base + t) % 24) as f64 / 24.0 * 6.283).sin() + shift * 10.0).collect());
        b.insert("buy_price".into(), vec![60.0; len]);
        b.insert("heat".into(), (0..len).map(|t| 5.0 + 2.0 * (((base + t) % 24) as f64 / 24.0 * 6.283).cos() + shift).collect());
        b
    }
}

impl DataSource for Pattern {
    fn planning(&self, start: NaiveDateTime, len: usize) -> heatflow::Result<ScenarioSet> {
        let scenarios = [-self.spread, 0.0, self.spread]
            .iter()
            .enumerate()
            .map(|(i, &s)| Scenario { label: format!("s{i}"), probability: [0.25, 0.5, 0.25][i], data: self.bundle(start, len, s) })
            .collect();
        let set = ScenarioSet { start, len, scenarios };
        set.check()?;
        Ok(set)
    }

    fn realized(&self, start: NaiveDateTime, len: usize) -> heatflow::Result<ScenarioSet> {
        ScenarioSet::deterministic(start, self.bundle(start, len, 0.0))
    }
}

fn config(mode: PlanningMode) -> RollConfig {
    RollConfig { window: 24, step: 12, total: 72, mode, expected: false, perfect_foresight: false }
}

#[test]
fn custom_source_drives_every_mode() {
    let spec = Toy { storage: true, min_up: 2, ..Toy::default() }.spec();
    let source = Pattern { spread: 1.0 };
    for mode in [PlanningMode::Deterministic, PlanningMode::Operational, PlanningMode::Bidding] {
        let mut setup = SolveSetup::new(&spec, mode);
        setup.params.gap_tol = 1e-9;
        let out = roll_horizon(&spec, &source, start(), &config(mode), &setup).unwrap();
        assert_eq!(out.iterations.len(), 6);
        for (k, it) in out.iterations.iter().enumerate() {
            assert_eq!(it.offset, 12 * k);
            assert_eq!(it.committed, 12);
            assert_eq!(it.window, 24.min(72 - 12 * k));
            if k > 0 {
                assert_eq!(it.state_in, out.iterations[k - 1].state_out);
            }
        }
        let (bound, _) = clairvoyant_bound(&spec, &source, start(), 72, &setup).unwrap();
        assert!(out.realized_total() >= bound - 1e-6, "{mode:?}: {} below {bound}", out.realized_total());
    }
}

#[test]
fn perfect_foresight_without_spread_matches_the_plan() {
    let spec = Toy { storage: true, ..Toy::default() }.spec();
    let source = Pattern { spread: 0.0 };
    let mut setup = SolveSetup::new(&spec, PlanningMode::Operational);
    setup.params.gap_tol = 0.0;
    let cfg = RollConfig { perfect_foresight: true, ..config(PlanningMode::Operational) };
    let out = roll_horizon(&spec, &source, start(), &cfg, &setup).unwrap();
    for it in &out.iterations {
        assert!((it.planned_cost - it.realized_cost).abs() <= 1e-6 * (1.0 + it.planned_cost.abs()), "{} vs {}", it.planned_cost, it.realized_cost);
    }
}

#[test]
fn invalid_steps_are_rejected() {
    let spec = Toy::default().spec();
    let setup = SolveSetup::new(&spec, PlanningMode::Operational);
    let source = Pattern { spread: 1.0 };
    for (window, step) in [(24, 0), (0, 0), (12, 24)] {
        let cfg = RollConfig { window, step, ..config(PlanningMode::Operational) };
        assert!(roll_horizon(&spec, &source, start(), &cfg, &setup).is_err());
    }
}
