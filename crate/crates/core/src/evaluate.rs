//! Policies, recourse evaluation and the value of the stochastic solution.

use heatflow_solver::SolveParams;

use crate::config::SystemSpec;
use crate::error::Result;
use crate::model::{FirstStageFix, ModelOptions, PlanningMode};
use crate::network::{ArcKind, FlowNetwork, NetworkOptions};
use crate::parallel::{self, Parallelism};
use crate::scenario::ScenarioSet;
use crate::schedule::{metrics, solve, BidCurve, Metrics, Schedule};

/// Everything needed to solve a planning or recourse model.
#[derive(Debug, Clone)]
pub struct SolveSetup {
    pub params: SolveParams,
    pub model: ModelOptions,
    pub par: Parallelism,
    /// Cost per unit of deviation from a fixed first-stage flow.
    pub deviation_penalty: f64,
}

impl SolveSetup {
    pub fn new(spec: &SystemSpec, mode: PlanningMode) -> SolveSetup {
        let params = SolveParams {
            gap_tol: spec.defaults.gap,
            time_limit: Some(std::time::Duration::from_secs_f64(spec.defaults.time_limit)),
            ..SolveParams::default()
        };
        SolveSetup {
            params,
            model: ModelOptions::with_mode(mode),
            par: Parallelism::Parallel,
            deviation_penalty: spec.defaults.missing_heat_penalty,
        }
    }
}

/// First-stage decisions taken from a planning solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// Commitment of first-stage units and their flows, fixed regardless of price.
    Operational {
        statuses: Vec<(String, usize, bool)>,
        flows: Vec<(String, String, String, usize, f64)>,
    },
    /// Day-ahead bid curves, settled against the realized price.
    Bidding { curves: Vec<BidCurve> },
}

impl Policy {
    /// Reads the first `upto` periods of a planning solution.
    pub fn from_schedule(net: &FlowNetwork, sched: &Schedule, mode: PlanningMode, upto: usize) -> Result<Policy> {
        let upto = upto.min(net.horizon);
        if mode == PlanningMode::Bidding {
            let mut curves = Vec::new();
            for (mi, m) in net.markets.iter().enumerate() {
                if !m.bidding {
                    continue;
                }
                for t in 0..upto {
                    curves.push(sched.bid_curve(net, mi, t)?);
                }
            }
            return Ok(Policy::Bidding { curves });
        }
        let mut statuses = Vec::new();
        for (ui, u) in net.units.iter().enumerate() {
            let v = &net.vertices[u.vertex];
            if u.commitment && v.first_stage {
                for t in 0..upto {
                    statuses.push((v.id.clone(), t, sched.on[ui][0][t]));
                }
            }
        }
        let mut flows = Vec::new();
        for (a, arc) in net.arcs.iter().enumerate() {
            if arc.scenario != 0 || arc.kind != ArcKind::Flow || arc.t >= upto || !net.vertices[arc.from].first_stage {
                continue;
            }
            let value: f64 = net.siblings(a).iter().map(|&s| net.probabilities[net.arcs[s].scenario] * sched.flows[s]).sum();
            flows.push((
                net.vertices[arc.from].id.clone(),
                net.vertices[arc.to].id.clone(),
                net.energies[arc.energy].clone(),
                arc.t,
                value,
            ));
        }
        Ok(Policy::Operational { statuses, flows })
    }

    /// Fixings for a recourse model on realized data.
    pub fn fix_for(&self, realized: &FlowNetwork, deviation_penalty: f64) -> FirstStageFix {
        match self {
            Policy::Operational { statuses, flows } => FirstStageFix {
                statuses: statuses.clone(),
                flows: flows.clone(),
                positions: Vec::new(),
                deviation_penalty,
            },
            Policy::Bidding { curves } => {
                let positions = curves
                    .iter()
                    .filter_map(|c| {
                        let m = realized.markets.iter().find(|m| m.id == c.market)?;
                        (c.period < realized.horizon).then(|| (c.market.clone(), c.period, c.settle(m.price.get(c.period, 0))))
                    })
                    .collect();
                FirstStageFix { statuses: Vec::new(), flows: Vec::new(), positions, deviation_penalty }
            }
        }
    }
}

/// Solves the recourse problem of every scenario under a fixed policy.
/// Returns the cost and metrics of each scenario.
pub fn recourse_runs(
    spec: &SystemSpec,
    scenarios: &ScenarioSet,
    opts: &NetworkOptions,
    policy: &Policy,
    setup: &SolveSetup,
) -> Result<Vec<(f64, Metrics)>> {
    let results = parallel::map_range(scenarios.len(), setup.par, |w| {
        let realized = FlowNetwork::build(spec, &scenarios.single(w), opts)?;
        let fix = policy.fix_for(&realized, setup.deviation_penalty);
        let model = ModelOptions { mode: PlanningMode::Deterministic, ..setup.model };
        let (_, sched) = solve(&realized, &model, Some(&fix), &setup.params)?;
        Ok((sched.objective, metrics(&realized, &sched)))
    });
    results.into_iter().collect()
}

pub fn recourse_costs(
    spec: &SystemSpec,
    scenarios: &ScenarioSet,
    opts: &NetworkOptions,
    policy: &Policy,
    setup: &SolveSetup,
) -> Result<Vec<f64>> {
    Ok(recourse_runs(spec, scenarios, opts, policy, setup)?.into_iter().map(|r| r.0).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvResult {
    pub ev_objective: f64,
    pub eev: f64,
    pub scenario_costs: Vec<f64>,
    /// Probability-weighted metrics of the recourse solutions.
    pub metrics: Metrics,
}

/// Expected cost of the policy obtained from the expected-value problem.
pub fn eev(spec: &SystemSpec, scenarios: &ScenarioSet, opts: &NetworkOptions, setup: &SolveSetup) -> Result<EvResult> {
    let ev_net = FlowNetwork::build(spec, &scenarios.expected(), opts)?;
    let (_, ev) = solve(&ev_net, &setup.model, None, &setup.params)?;
    let policy = Policy::from_schedule(&ev_net, &ev, setup.model.mode, opts.first_stage)?;
    let runs = recourse_runs(spec, scenarios, opts, &policy, setup)?;
    let probs = scenarios.probabilities();
    let eev = probs.iter().zip(&runs).map(|(p, r)| p * r.0).sum();
    let metrics = Metrics::mix(&probs.iter().zip(&runs).map(|(&p, r)| (p, r.1.clone())).collect::<Vec<_>>());
    Ok(EvResult { ev_objective: ev.objective, eev, scenario_costs: runs.into_iter().map(|r| r.0).collect(), metrics })
}

/// `(EEV - RP, 100 * (EEV - RP) / |EEV|)`.
pub fn vss(rp: f64, eev: f64) -> (f64, f64) {
    let v = eev - rp;
    let pct = if eev.abs() > 0.0 { 100.0 * v / eev.abs() } else { 0.0 };
    (v, pct)
}

/// Relative savings of `b` over `a` in percent.
pub fn savings_pct(a: f64, b: f64) -> f64 {
    if a.abs() > 0.0 { 100.0 * (a - b) / a.abs() } else { 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutOfSample {
    pub cost_a: Vec<f64>,
    pub cost_b: Vec<f64>,
    pub savings_pct: Vec<f64>,
}

impl OutOfSample {
    pub fn mean_savings_pct(&self) -> f64 {
        let a: f64 = self.cost_a.iter().sum();
        let b: f64 = self.cost_b.iter().sum();
        savings_pct(a, b)
    }
}

/// Evaluates two policies on the same realized samples.
pub fn compare_out_of_sample(
    spec: &SystemSpec,
    samples: &[ScenarioSet],
    opts: &NetworkOptions,
    a: &Policy,
    b: &Policy,
    setup: &SolveSetup,
) -> Result<OutOfSample> {
    let inner = SolveSetup { par: Parallelism::Sequential, ..setup.clone() };
    let results = parallel::map(samples, setup.par, |s| -> Result<(f64, f64)> {
        let ca = recourse_costs(spec, s, opts, a, &inner)?[0];
        let cb = recourse_costs(spec, s, opts, b, &inner)?[0];
        Ok((ca, cb))
    });
    let pairs: Vec<(f64, f64)> = results.into_iter().collect::<Result<_>>()?;
    Ok(OutOfSample {
        savings_pct: pairs.iter().map(|&(x, y)| savings_pct(x, y)).collect(),
        cost_a: pairs.iter().map(|p| p.0).collect(),
        cost_b: pairs.iter().map(|p| p.1).collect(),
    })
}
