//! Receding-horizon simulation: plan, commit the first periods, settle on
//! realized data, carry the end state forward.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::config::SystemSpec;
use crate::error::{Error, Result};
use crate::evaluate::{Policy, SolveSetup};
use crate::model::{ModelOptions, PlanningMode};
use crate::network::{FlowNetwork, NetworkOptions, SystemState, TargetMode, UnitState};
use crate::scenario::{planning_scenarios, ScenarioSet};
pub use crate::schedule::ScheduleRow;
use crate::schedule::{metrics_until, schedule_rows, solve, Metrics, Schedule};
use crate::series::{fixed6, format_timestamp, SeriesStore};

/// Where planning scenarios and realized data come from.
pub trait DataSource: Sync {
    fn planning(&self, start: NaiveDateTime, len: usize) -> Result<ScenarioSet>;
    fn realized(&self, start: NaiveDateTime, len: usize) -> Result<ScenarioSet>;
}

/// Scenarios from weighted history, realizations from the same store.
pub struct StoreSource<'a> {
    pub store: &'a SeriesStore,
    pub price: Vec<String>,
    pub heat: Vec<String>,
    pub known: Vec<String>,
}

impl<'a> StoreSource<'a> {
    pub fn new(spec: &SystemSpec, store: &'a SeriesStore) -> StoreSource<'a> {
        let price = spec.uncertainty.price.clone();
        let heat = spec.uncertainty.heat_flow.clone();
        let known = spec
            .referenced_series()
            .into_iter()
            .filter(|s| !price.contains(s) && !heat.contains(s))
            .collect();
        StoreSource { store, price, heat, known }
    }

    fn all(&self) -> Vec<String> {
        self.price.iter().chain(&self.heat).chain(&self.known).cloned().collect()
    }
}

impl DataSource for StoreSource<'_> {
    fn planning(&self, start: NaiveDateTime, len: usize) -> Result<ScenarioSet> {
        planning_scenarios(self.store, &self.price, &self.heat, &self.known, start, len)
    }

    fn realized(&self, start: NaiveDateTime, len: usize) -> Result<ScenarioSet> {
        ScenarioSet::deterministic(start, self.store.bundle(&self.all(), start, len)?)
    }
}

#[derive(Debug, Clone)]
pub struct RollConfig {
    pub window: usize,
    pub step: usize,
    pub total: usize,
    pub mode: PlanningMode,
    /// Plan on the probability-weighted mean scenario.
    pub expected: bool,
    /// Plan on the realized data.
    pub perfect_foresight: bool,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub index: usize,
    pub start: NaiveDateTime,
    pub offset: usize,
    pub window: usize,
    pub committed: usize,
    pub planned_cost: f64,
    pub realized_cost: f64,
    pub metrics: Metrics,
    pub state_in: SystemState,
    /// Storage levels the realized model opened with.
    pub opening_levels: BTreeMap<String, f64>,
    pub state_out: SystemState,
    pub rows: Vec<ScheduleRow>,
}

#[derive(Debug, Clone)]
pub struct RollOutcome {
    pub iterations: Vec<IterationRecord>,
}

impl RollOutcome {
    pub fn realized_total(&self) -> f64 {
        self.iterations.iter().map(|i| i.realized_cost).sum()
    }

    pub fn write_trace(&self, dir: &Path) -> Result<()> {
        let csv_err = |p: &Path, e: csv::Error| Error::Csv { path: p.to_path_buf(), message: e.to_string() };
        for it in &self.iterations {
            let d = dir.join(format!("iteration_{}", it.index));
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
            let p = d.join("schedule.csv");
            let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
            w.write_record(["timestamp", "kind", "from", "to", "energy", "value"]).map_err(|e| csv_err(&p, e))?;
            for r in &it.rows {
                w.write_record([
                    format_timestamp(r.timestamp),
                    r.kind.to_string(),
                    r.from.clone(),
                    r.to.clone(),
                    r.energy.clone(),
                    format!("{}", r.value),
                ])
                .map_err(|e| csv_err(&p, e))?;
            }
            w.flush().map_err(|e| Error::io(&p, e))?;
        }
        let p = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
        w.write_record(["iteration", "planned_cost", "realized_cost", "heat_MWh", "el_net_MWh", "imbalance_MWh"])
            .map_err(|e| csv_err(&p, e))?;
        for it in &self.iterations {
            w.write_record([
                it.index.to_string(),
                fixed6(it.planned_cost),
                fixed6(it.realized_cost),
                fixed6(it.metrics.heat_delivered),
                fixed6(it.metrics.el_net),
                fixed6(it.metrics.imbalance),
            ])
            .map_err(|e| csv_err(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))
    }
}

/// Number of iterations and `(offset, window, committed)` of each.
pub fn iteration_plan(total: usize, window: usize, step: usize) -> Vec<(usize, usize, usize)> {
    if step == 0 {
        return Vec::new();
    }
    (0..total.div_ceil(step))
        .map(|k| {
            let offset = k * step;
            let len = window.min(total - offset);
            (offset, len, step.min(len))
        })
        .collect()
}

/// State at the start of period `at` of a solved single-scenario schedule.
pub fn advance_state(net: &FlowNetwork, sched: &Schedule, prev: &SystemState, at: usize) -> SystemState {
    let mut out = prev.clone();
    let last = at - 1;
    for (si, s) in net.storages.iter().enumerate() {
        out.storage.insert(net.vertices[s.vertex].id.clone(), sched.storage_level(net, si, last, 0));
    }
    for (ui, u) in net.units.iter().enumerate() {
        let id = net.vertices[u.vertex].id.clone();
        let mut st = UnitState { status: u.initial_status, periods: 0, production: BTreeMap::new() };
        for &e in u.ramp_up.keys().chain(u.ramp_down.keys()).chain(u.initial_production.keys()) {
            let p = sched.flow_sum(net.arcs_out(u.vertex, e, last, 0));
            st.production.insert(net.energies[e].clone(), p);
        }
        if u.commitment {
            let on = sched.on[ui][0][last];
            st.status = on;
            // remaining frozen periods from the previous freeze or a switch in this window
            let mut remaining = u.initial_periods.saturating_sub(at);
            let off_switches = stops(net, sched, ui);
            let (switches, hold) = if on { (&sched.starts[ui][0], u.min_up) } else { (&off_switches, u.min_down) };
            if let Some(ts) = (0..at).rev().find(|&t| switches[t]) {
                remaining = remaining.max((ts + hold).saturating_sub(last));
            }
            st.periods = remaining;
        }
        out.units.insert(id, st);
    }
    out
}

fn stops(net: &FlowNetwork, sched: &Schedule, ui: usize) -> Vec<bool> {
    let on = &sched.on[ui][0];
    let init = net.units[ui].initial_status;
    (0..on.len()).map(|t| !on[t] && if t == 0 { init } else { on[t - 1] }).collect()
}

pub fn roll_horizon(
    spec: &SystemSpec,
    source: &dyn DataSource,
    start: NaiveDateTime,
    cfg: &RollConfig,
    setup: &SolveSetup,
) -> Result<RollOutcome> {
    if cfg.step == 0 || cfg.window == 0 || cfg.step > cfg.window {
        return Err(Error::Config("need 0 < step <= window".into()));
    }
    let mut state = SystemState::from_spec(spec);
    let mut iterations = Vec::new();
    for (k, (offset, len, committed)) in iteration_plan(cfg.total, cfg.window, cfg.step).into_iter().enumerate() {
        let t0 = start + Duration::hours(offset as i64);
        let targets = if offset + len == cfg.total { TargetMode::Spec } else { TargetMode::Free };
        let opts = NetworkOptions { horizon: len, first_stage: committed, state: state.clone(), targets };
        let realized = source.realized(t0, len)?;
        let planning = if cfg.perfect_foresight {
            realized.clone()
        } else if cfg.expected {
            source.planning(t0, len)?.expected()
        } else {
            source.planning(t0, len)?
        };
        let plan_net = FlowNetwork::build(spec, &planning, &opts)?;
        let (_, plan) = solve(&plan_net, &ModelOptions { mode: cfg.mode, ..setup.model }, None, &setup.params)?;
        let policy = Policy::from_schedule(&plan_net, &plan, cfg.mode, committed)?;

        let real_net = FlowNetwork::build(spec, &realized, &opts)?;
        let fix = policy.fix_for(&real_net, setup.deviation_penalty);
        let recourse_opts = ModelOptions { mode: PlanningMode::Deterministic, ..setup.model };
        let (_, rec) = solve(&real_net, &recourse_opts, Some(&fix), &setup.params)?;

        let realized_cost = rec.scenario_cost_until(&real_net, 0, committed);
        let next = advance_state(&real_net, &rec, &state, committed);
        log::info!("iteration {k}: window {len} from {}, realized {:.2}", format_timestamp(t0), realized_cost);
        iterations.push(IterationRecord {
            index: k,
            start: t0,
            offset,
            window: len,
            committed,
            planned_cost: plan.expected_cost_until(&plan_net, committed),
            realized_cost,
            metrics: metrics_until(&real_net, &rec, committed),
            state_in: state,
            opening_levels: real_net.storages.iter().map(|s| (real_net.vertices[s.vertex].id.clone(), s.initial)).collect(),
            state_out: next.clone(),
            rows: schedule_rows(&real_net, &rec, t0, 0, committed),
        });
        state = next;
    }
    Ok(RollOutcome { iterations })
}

/// Best bound of the full-horizon problem on realized data.
pub fn clairvoyant_bound(
    spec: &SystemSpec,
    source: &dyn DataSource,
    start: NaiveDateTime,
    total: usize,
    setup: &SolveSetup,
) -> Result<(f64, f64)> {
    let realized = source.realized(start, total)?;
    let net = FlowNetwork::build(spec, &realized, &NetworkOptions::new(spec, total, total))?;
    let (_, sched) =
        solve(&net, &ModelOptions { mode: PlanningMode::Deterministic, ..setup.model }, None, &setup.params)?;
    Ok((sched.objective, sched.best_bound))
}
