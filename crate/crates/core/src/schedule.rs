//! Solving a built model and reading the dispatch back out of it.

use chrono::{Duration, NaiveDateTime};
use heatflow_solver::{solve_milp, MilpStatus, SolveParams};

use crate::config::{MarketSide, VertexKind};
use crate::error::{Error, Result};
use crate::model::{build_model, position_terms, BuiltModel, FirstStageFix, ModelOptions, PRICE_TIE_TOL};
use crate::network::{ArcKind, FlowNetwork, Role};

/// Largest tolerated monotonicity violation before a bid curve is rejected.
pub const CURVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Schedule {
    pub status: MilpStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub flows: Vec<f64>,
    /// `[unit][scenario][period]`, for units with commitment.
    pub on: Vec<Vec<Vec<bool>>>,
    pub starts: Vec<Vec<Vec<bool>>>,
    /// Deviation from soft fixes, `[scenario][period]`.
    pub deviation: Vec<Vec<f64>>,
    pub deviation_penalty: f64,
}

pub fn solve(
    net: &FlowNetwork,
    opts: &ModelOptions,
    fix: Option<&FirstStageFix>,
    params: &SolveParams,
) -> Result<(BuiltModel, Schedule)> {
    let model = build_model(net, opts, fix)?;
    let out = solve_milp(&model.problem, params);
    log::info!(
        "{}: {} after {} nodes, objective {:.4}, bound {:.4}",
        net.name,
        out.status.as_str(),
        out.nodes,
        out.objective,
        out.best_bound
    );
    let Some(x) = out.x else {
        return Err(Error::NoSolution { status: out.status, context: net.name.clone() });
    };
    let ns = net.num_scenarios();
    let mut on = Vec::new();
    let mut starts = Vec::new();
    for (ui, u) in net.units.iter().enumerate() {
        if !u.commitment {
            on.push(Vec::new());
            starts.push(Vec::new());
            continue;
        }
        let grid = |f: &dyn Fn(usize, usize) -> bool| {
            (0..ns).map(|w| (0..net.horizon).map(|t| f(t, w)).collect()).collect::<Vec<Vec<bool>>>()
        };
        on.push(grid(&|t, w| x[model.status[&(ui, t, w)].z.0] > 0.5));
        starts.push(grid(&|t, w| x[model.status[&(ui, t, w)].start.0] > 0.5));
    }
    let mut deviation = vec![vec![0.0; net.horizon]; ns];
    for &(v, t, w) in &model.deviations {
        deviation[w][t] += x[v.0];
    }
    let flows = model.arc_vars.iter().map(|v| x[v.0]).collect();
    let schedule = Schedule {
        status: out.status,
        objective: out.objective,
        best_bound: out.best_bound,
        gap: out.gap,
        nodes: out.nodes,
        flows,
        on,
        starts,
        deviation,
        deviation_penalty: fix.map_or(0.0, |f| f.deviation_penalty),
    };
    Ok((model, schedule))
}

impl Schedule {
    pub fn flow_sum(&self, arcs: &[usize]) -> f64 {
        arcs.iter().map(|&a| self.flows[a]).sum()
    }

    /// Level at the end of period `t`.
    pub fn storage_level(&self, net: &FlowNetwork, s: usize, t: usize, w: usize) -> f64 {
        let st = &net.storages[s];
        net.arcs_out(st.vertex, st.energy, t, w)
            .iter()
            .filter(|&&a| matches!(net.arcs[a].kind, ArcKind::Carry | ArcKind::Target))
            .map(|&a| self.flows[a])
            .sum()
    }

    pub fn position(&self, net: &FlowNetwork, market: usize, t: usize, w: usize) -> f64 {
        let m = &net.markets[market];
        position_terms(net, m, m.da, t, w).into_iter().map(|(a, c)| c * self.flows[a]).sum()
    }

    pub fn is_on(&self, unit: usize, t: usize, w: usize) -> Option<bool> {
        self.on.get(unit)?.get(w)?.get(t).copied()
    }

    /// Cost of scenario `w` over periods `[0, until)`, unweighted.
    pub fn scenario_cost_until(&self, net: &FlowNetwork, w: usize, until: usize) -> f64 {
        let mut cost = 0.0;
        for (a, arc) in net.arcs.iter().enumerate() {
            if arc.scenario == w && arc.t < until {
                cost += arc.unit_cost * self.flows[a];
            }
        }
        for (ui, u) in net.units.iter().enumerate() {
            if u.commitment {
                cost += u.start_cost * self.starts[ui][w].iter().take(until).filter(|s| **s).count() as f64;
            }
        }
        cost + self.deviation_penalty * self.deviation[w].iter().take(until).sum::<f64>()
    }

    pub fn scenario_cost(&self, net: &FlowNetwork, w: usize) -> f64 {
        self.scenario_cost_until(net, w, net.horizon)
    }

    /// Probability-weighted cost over periods `[0, until)`.
    pub fn expected_cost_until(&self, net: &FlowNetwork, until: usize) -> f64 {
        (0..net.num_scenarios()).map(|w| net.probabilities[w] * self.scenario_cost_until(net, w, until)).sum()
    }

    /// Day-ahead bid curve of a market for one period, built from the
    /// scenario positions.
    pub fn bid_curve(&self, net: &FlowNetwork, market: usize, t: usize) -> Result<BidCurve> {
        let m = &net.markets[market];
        let points: Vec<(f64, f64)> = (0..net.num_scenarios())
            .map(|w| (m.price.get(t, w), self.position(net, market, t, w)))
            .collect();
        BidCurve::from_points(&m.id, t, m.side, &points)
    }
}

/// Price/quantity steps, one per distinct scenario price.
#[derive(Debug, Clone, PartialEq)]
pub struct BidCurve {
    pub market: String,
    pub period: usize,
    pub side: MarketSide,
    pub steps: Vec<(f64, f64)>,
}

impl BidCurve {
    pub fn from_points(market: &str, period: usize, side: MarketSide, points: &[(f64, f64)]) -> Result<BidCurve> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut steps: Vec<(f64, f64)> = Vec::new();
        let mut group: Vec<f64> = Vec::new();
        let mut group_price = f64::NAN;
        let flush = |steps: &mut Vec<(f64, f64)>, group: &mut Vec<f64>, price: f64| -> Result<()> {
            if group.is_empty() {
                return Ok(());
            }
            let lo = group.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = group.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > CURVE_TOL {
                return Err(Error::BidCurve(format!(
                    "{market} period {period}: quantities {lo} and {hi} at the same price {price}"
                )));
            }
            steps.push((price, group.iter().sum::<f64>() / group.len() as f64));
            group.clear();
            Ok(())
        };
        for (p, q) in pts {
            if !group.is_empty() && (p - group_price).abs() > PRICE_TIE_TOL {
                flush(&mut steps, &mut group, group_price)?;
            }
            if group.is_empty() {
                group_price = p;
            }
            group.push(q);
        }
        flush(&mut steps, &mut group, group_price)?;
        for i in 1..steps.len() {
            let (prev, cur) = (steps[i - 1].1, steps[i].1);
            let violation = match side {
                MarketSide::Selling => prev - cur,
                MarketSide::Buying => cur - prev,
            };
            if violation > CURVE_TOL {
                return Err(Error::BidCurve(format!("{market} period {period}: curve is not monotone ({violation})")));
            }
            steps[i].1 = match side {
                MarketSide::Selling => cur.max(prev),
                MarketSide::Buying => cur.min(prev),
            };
        }
        Ok(BidCurve { market: market.to_string(), period, side, steps })
    }

    /// Quantity accepted at the realized price.
    pub fn settle(&self, price: f64) -> f64 {
        match self.side {
            MarketSide::Selling => {
                self.steps.iter().rev().find(|(p, _)| *p <= price + PRICE_TIE_TOL).map_or(0.0, |s| s.1)
            }
            MarketSide::Buying => self.steps.iter().find(|(p, _)| *p >= price - PRICE_TIE_TOL).map_or(0.0, |s| s.1),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.steps.windows(2).all(|w| match self.side {
            MarketSide::Selling => w[1].1 >= w[0].1 && w[1].0 > w[0].0,
            MarketSide::Buying => w[1].1 <= w[0].1 && w[1].0 > w[0].0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRow {
    pub timestamp: NaiveDateTime,
    pub kind: &'static str,
    pub from: String,
    pub to: String,
    pub energy: String,
    pub value: f64,
}

/// Nonzero flows, storage levels and statuses of one scenario for the
/// periods before `upto`.
pub fn schedule_rows(net: &FlowNetwork, sched: &Schedule, start: NaiveDateTime, w: usize, upto: usize) -> Vec<ScheduleRow> {
    let ts = |t: usize| start + Duration::hours(t as i64);
    let mut rows = Vec::new();
    for (a, arc) in net.arcs.iter().enumerate() {
        if arc.scenario != w || arc.t >= upto || sched.flows[a].abs() < 1e-9 {
            continue;
        }
        if arc.kind == ArcKind::Flow {
            rows.push(ScheduleRow {
                timestamp: ts(arc.t),
                kind: "flow",
                from: net.vertices[arc.from].id.clone(),
                to: net.vertices[arc.to].id.clone(),
                energy: net.energies[arc.energy].clone(),
                value: sched.flows[a],
            });
        }
    }
    for (si, s) in net.storages.iter().enumerate() {
        for t in 0..upto {
            rows.push(ScheduleRow {
                timestamp: ts(t),
                kind: "level",
                from: net.vertices[s.vertex].id.clone(),
                to: String::new(),
                energy: net.energies[s.energy].clone(),
                value: sched.storage_level(net, si, t, w),
            });
        }
    }
    for (ui, u) in net.units.iter().enumerate().filter(|(_, u)| u.commitment) {
        for t in 0..upto {
            rows.push(ScheduleRow {
                timestamp: ts(t),
                kind: "status",
                from: net.vertices[u.vertex].id.clone(),
                to: String::new(),
                energy: String::new(),
                value: if sched.on[ui][w][t] { 1.0 } else { 0.0 },
            });
        }
    }
    rows
}

/// Aggregates of a schedule, probability weighted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub objective: f64,
    pub heat_delivered: f64,
    pub heat_produced: f64,
    pub res_heat: f64,
    /// Day-ahead sales minus purchases.
    pub el_net: f64,
    pub market_income: f64,
    pub imbalance: f64,
    pub missing_heat: f64,
    pub cost_per_mwh: f64,
    pub res_share: f64,
}

impl Metrics {
    /// Weighted combination, with the ratios recomputed from the totals.
    pub fn mix(items: &[(f64, Metrics)]) -> Metrics {
        let mut m = Metrics::default();
        for (w, x) in items {
            m.objective += w * x.objective;
            m.heat_delivered += w * x.heat_delivered;
            m.heat_produced += w * x.heat_produced;
            m.res_heat += w * x.res_heat;
            m.el_net += w * x.el_net;
            m.market_income += w * x.market_income;
            m.imbalance += w * x.imbalance;
            m.missing_heat += w * x.missing_heat;
        }
        m.finish();
        m
    }

    fn finish(&mut self) {
        self.cost_per_mwh = if self.heat_delivered > 0.0 { self.objective / self.heat_delivered } else { 0.0 };
        self.res_share = if self.heat_produced > 0.0 { self.res_heat / self.heat_produced } else { 0.0 };
    }
}

pub fn metrics_until(net: &FlowNetwork, sched: &Schedule, until: usize) -> Metrics {
    let mut m = Metrics::default();
    for w in 0..net.num_scenarios() {
        let pi = net.probabilities[w];
        m.objective += pi * sched.scenario_cost_until(net, w, until);
        for (a, arc) in net.arcs.iter().enumerate() {
            if arc.scenario != w || arc.t >= until || arc.kind != ArcKind::Flow {
                continue;
            }
            let x = sched.flows[a] * pi;
            let from = &net.vertices[arc.from];
            let to = &net.vertices[arc.to];
            if Some(arc.energy) == net.heat_energy {
                if to.role == Role::Regular && to.kind == VertexKind::Demand {
                    m.heat_delivered += x;
                }
                if from.role == Role::Regular && matches!(from.kind, VertexKind::Unit | VertexKind::Source) {
                    m.heat_produced += x;
                    if from.res {
                        m.res_heat += x;
                    }
                }
                if matches!(from.role, Role::Missing(_)) {
                    m.missing_heat += x;
                }
            }
            match (from.role, to.role) {
                (_, Role::MarketDa(mi)) | (Role::MarketDa(mi), _) => {
                    let sign = if matches!(to.role, Role::MarketDa(_)) { 1.0 } else { -1.0 };
                    if !matches!(from.role, Role::MarketBmb(_)) && !matches!(to.role, Role::MarketBms(_)) {
                        m.el_net += sign * x;
                        m.market_income += sign * x * net.markets[mi].price.get(arc.t, w);
                    }
                }
                _ => {}
            }
            if matches!(from.role, Role::MarketBmb(_)) || matches!(to.role, Role::MarketBms(_)) {
                m.imbalance += x;
            }
        }
    }
    m.finish();
    m
}

pub fn metrics(net: &FlowNetwork, sched: &Schedule) -> Metrics {
    metrics_until(net, sched, net.horizon)
}
