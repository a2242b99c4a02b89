//! Translation of a [`FlowNetwork`] into a mixed-integer program.

use std::collections::{BTreeSet, HashMap};

use heatflow_solver::{MilpProblem, RowBounds, VarId};

use crate::config::{MarketSide, VertexKind};
use crate::error::{Error, Result};
use crate::network::{ArcKind, FlowNetwork, MarketData};

/// Equal-price tolerance for chaining bid constraints.
pub const PRICE_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanningMode {
    /// No coupling between scenarios.
    Deterministic,
    /// Commitment and production of first-stage units are scenario independent.
    #[default]
    Operational,
    /// Day-ahead positions form non-decreasing (selling) or non-increasing
    /// (buying) curves in the scenario price.
    Bidding,
}

impl PlanningMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanningMode::Deterministic => "deterministic",
            PlanningMode::Operational => "operational",
            PlanningMode::Bidding => "bidding",
        }
    }
}

impl std::str::FromStr for PlanningMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "deterministic" => Ok(PlanningMode::Deterministic),
            "operational" => Ok(PlanningMode::Operational),
            "bidding" => Ok(PlanningMode::Bidding),
            _ => Err(format!("unknown mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowCoupling {
    /// Each scenario's flow equals the probability-weighted mean.
    #[default]
    ExpectedFlow,
    /// Each scenario's flow equals the first scenario's.
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConversionForm {
    /// `out = factor * in`.
    #[default]
    OutputPerInput,
    /// `factor * out = in`.
    InputPerOutput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BidScope {
    #[default]
    DayAhead,
    /// Day-ahead and both balancing vertices.
    AllMarketVertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StorageLoss {
    /// `level[t] = (1 - loss) * level[t-1] + in[t] - out[t]`.
    #[default]
    CarriedStock,
    /// Total outflow equals `(1 - loss)` times total inflow, carry included.
    Throughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelOptions {
    pub mode: PlanningMode,
    pub coupling: FlowCoupling,
    pub conversion: ConversionForm,
    pub bid_scope: BidScope,
    pub storage_loss: StorageLoss,
}

impl ModelOptions {
    pub fn with_mode(mode: PlanningMode) -> ModelOptions {
        ModelOptions { mode, ..ModelOptions::default() }
    }
}

/// First-stage values imposed on a recourse model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FirstStageFix {
    pub statuses: Vec<(String, usize, bool)>,
    /// `(from, to, energy, period, flow)`; kept as soft equalities.
    pub flows: Vec<(String, String, String, usize, f64)>,
    /// Day-ahead net position per market and period.
    pub positions: Vec<(String, usize, f64)>,
    /// Cost per unit of deviation from a fixed flow.
    pub deviation_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatusVars {
    pub z: VarId,
    pub start: VarId,
    pub stop: VarId,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub problem: MilpProblem,
    pub options: ModelOptions,
    pub arc_vars: Vec<VarId>,
    /// Keyed by (unit position in `FlowNetwork::units`, period, scenario).
    pub status: HashMap<(usize, usize, usize), StatusVars>,
    /// Deviation variables of soft fixes with (period, scenario).
    pub deviations: Vec<(VarId, usize, usize)>,
}

impl BuiltModel {
    pub fn status_value(&self, x: &[f64], unit: usize, t: usize, w: usize) -> Option<bool> {
        self.status.get(&(unit, t, w)).map(|s| x[s.z.0] > 0.5)
    }
}

struct Builder<'a> {
    net: &'a FlowNetwork,
    p: MilpProblem,
    arc_vars: Vec<VarId>,
}

impl Builder<'_> {
    fn sum(&self, arcs: &[usize], coef: f64) -> Vec<(VarId, f64)> {
        arcs.iter().map(|&a| (self.arc_vars[a], coef)).collect()
    }

    fn row(&mut self, name: String, tag: &str, coeffs: Vec<(VarId, f64)>, bounds: RowBounds) {
        self.p.add_constraint(name, tag, coeffs, bounds);
    }

    fn vid(&self, v: usize) -> &str {
        &self.net.vertices[v].id
    }

    fn eid(&self, e: usize) -> &str {
        &self.net.energies[e]
    }
}

/// Signed arcs whose sum is the day-ahead net position of `v`.
pub fn position_terms(net: &FlowNetwork, m: &MarketData, v: usize, t: usize, w: usize) -> Vec<(usize, f64)> {
    let sign = match m.side {
        MarketSide::Selling => 1.0,
        MarketSide::Buying => -1.0,
    };
    let mut out: Vec<(usize, f64)> = net.arcs_in(v, m.energy, t, w).iter().map(|&a| (a, sign)).collect();
    out.extend(net.arcs_out(v, m.energy, t, w).iter().map(|&a| (a, -sign)));
    out
}

pub fn build_model(net: &FlowNetwork, opts: &ModelOptions, fix: Option<&FirstStageFix>) -> Result<BuiltModel> {
    let t_len = net.horizon;
    let ns = net.num_scenarios();
    let mut b = Builder { net, p: MilpProblem::new(net.name.clone()), arc_vars: Vec::with_capacity(net.arcs.len()) };

    for (a, arc) in net.arcs.iter().enumerate() {
        if arc.lower > arc.upper + 1e-12 {
            return Err(Error::Data(format!("{}: lower bound above upper bound", net.arc_name(a))));
        }
        let v = b.p.add_continuous(net.arc_name(a), arc.lower, arc.upper.max(arc.lower), net.weighted_cost(a));
        b.arc_vars.push(v);
    }

    // status variables
    let mut status = HashMap::new();
    for (ui, u) in net.units.iter().enumerate().filter(|(_, u)| u.commitment) {
        let id = net.vertices[u.vertex].id.clone();
        for w in 0..ns {
            for t in 0..t_len {
                let z = b.p.add_binary(format!("z__{id}__{t}__{w}"), 0.0);
                let start = b.p.add_binary(format!("zs__{id}__{t}__{w}"), net.probabilities[w] * u.start_cost);
                let stop = b.p.add_binary(format!("ze__{id}__{t}__{w}"), 0.0);
                status.insert((ui, t, w), StatusVars { z, start, stop });
            }
        }
    }
    let committed: HashMap<usize, usize> =
        net.units.iter().enumerate().filter(|(_, u)| u.commitment).map(|(i, u)| (u.vertex, i)).collect();

    add_vertex_rows(&mut b, opts, &committed)?;
    add_unit_rows(&mut b, &status);
    add_storage_rows(&mut b, opts);

    match opts.mode {
        PlanningMode::Deterministic => {}
        PlanningMode::Operational if ns > 1 => add_nonanticipativity(&mut b, &status, opts.coupling),
        PlanningMode::Operational => {}
        PlanningMode::Bidding if ns > 1 => add_bidding(&mut b, opts.bid_scope),
        PlanningMode::Bidding => {}
    }

    let mut deviations = Vec::new();
    if let Some(fix) = fix {
        apply_fix(&mut b, &status, fix, &mut deviations)?;
    }

    Ok(BuiltModel { problem: b.p, options: *opts, arc_vars: b.arc_vars, status, deviations })
}

fn add_vertex_rows(b: &mut Builder, opts: &ModelOptions, committed: &HashMap<usize, usize>) -> Result<()> {
    let net = b.net;
    let ns = net.num_scenarios();
    let mut keys: Vec<(bool, usize, usize)> = net
        .inflow
        .keys()
        .map(|&(v, e)| (true, v, e))
        .chain(net.outflow.keys().map(|&(v, e)| (false, v, e)))
        .collect();
    keys.sort_unstable();
    for (incoming, v, e) in keys {
        if committed.contains_key(&v) || net.vertices[v].kind == VertexKind::Storage {
            continue;
        }
        let lim = if incoming { &net.inflow[&(v, e)] } else { &net.outflow[&(v, e)] };
        for w in 0..ns {
            for t in 0..net.horizon {
                let (lo, hi) = (lim.lower.get(t, w), lim.upper.get(t, w));
                if lo > hi + 1e-9 {
                    return Err(Error::Data(format!("vertex '{}': lower flow bound above upper in period {t}", b.vid(v))));
                }
                if lo <= 0.0 && hi == f64::INFINITY {
                    continue;
                }
                let arcs = if incoming { net.arcs_in(v, e, t, w) } else { net.arcs_out(v, e, t, w) };
                match arcs {
                    [] if lo > 0.0 => {
                        return Err(Error::Data(format!(
                            "vertex '{}' needs {} of '{}' but has no such connection",
                            b.vid(v),
                            if incoming { "inflow" } else { "outflow" },
                            b.eid(e)
                        )));
                    }
                    [] => {}
                    [a] => {
                        let var = b.arc_vars[*a];
                        let (l, u) = (b.p.var(var).lower, b.p.var(var).upper);
                        b.p.set_bounds(var, l.max(lo), u.min(hi).max(l.max(lo)));
                        if u.min(hi) < l.max(lo) - 1e-9 {
                            return Err(Error::Data(format!("{}: empty flow range", net.arc_name(*a))));
                        }
                    }
                    arcs => {
                        let coeffs = b.sum(arcs, 1.0);
                        let dir = if incoming { "in" } else { "out" };
                        let name = format!("{dir}__{}__{}__{t}__{w}", b.vid(v), b.eid(e));
                        b.row(name, &format!("{dir}flow-bounds"), coeffs, RowBounds::from_interval(lo.max(0.0), hi));
                    }
                }
            }
        }
    }

    // conversions and interconnection losses
    for u in &net.units {
        for (ci, &(fin, fout, factor)) in u.conversions.iter().enumerate() {
            for w in 0..ns {
                for t in 0..net.horizon {
                    let (ka, kb) = match opts.conversion {
                        ConversionForm::OutputPerInput => (1.0, factor),
                        ConversionForm::InputPerOutput => (factor, 1.0),
                    };
                    let mut coeffs = b.sum(net.arcs_out(u.vertex, fout, t, w), ka);
                    coeffs.extend(b.sum(net.arcs_in(u.vertex, fin, t, w), -kb));
                    let name = format!("conv{ci}__{}__{t}__{w}", b.vid(u.vertex));
                    b.row(name, "transformation", coeffs, RowBounds::Eq(0.0));
                }
            }
        }
    }
    let mut ics: Vec<(usize, f64)> = net.interconnection_loss.iter().map(|(&v, &l)| (v, l)).collect();
    ics.sort_unstable_by_key(|x| x.0);
    for (v, loss) in ics {
        let (ins, _) = net.vertex_energies(v);
        for e in ins {
            for w in 0..ns {
                for t in 0..net.horizon {
                    let mut coeffs = b.sum(net.arcs_out(v, e, t, w), 1.0);
                    coeffs.extend(b.sum(net.arcs_in(v, e, t, w), -(1.0 - loss)));
                    let name = format!("conv__{}__{t}__{w}", b.vid(v));
                    b.row(name, "transformation", coeffs, RowBounds::Eq(0.0));
                }
            }
        }
    }
    Ok(())
}

fn add_unit_rows(b: &mut Builder, status: &HashMap<(usize, usize, usize), StatusVars>) {
    let net = b.net;
    let ns = net.num_scenarios();
    let t_len = net.horizon;
    for (ui, u) in net.units.iter().enumerate() {
        let id = b.vid(u.vertex).to_string();
        let (ins, outs) = net.vertex_energies(u.vertex);
        if u.commitment {
            for w in 0..ns {
                for t in 0..t_len {
                    let s = status[&(ui, t, w)];
                    for (incoming, e) in ins.iter().map(|&e| (true, e)).chain(outs.iter().map(|&e| (false, e))) {
                        let lim = if incoming { &net.inflow[&(u.vertex, e)] } else { &net.outflow[&(u.vertex, e)] };
                        let arcs = if incoming { net.arcs_in(u.vertex, e, t, w) } else { net.arcs_out(u.vertex, e, t, w) };
                        let dir = if incoming { "in" } else { "out" };
                        let (lo, hi) = (lim.lower.get(t, w), lim.upper.get(t, w));
                        let mut coeffs = b.sum(arcs, 1.0);
                        coeffs.push((s.z, -hi));
                        b.row(format!("{dir}max__{id}__{}__{t}__{w}", b.eid(e)), "status-bounds", coeffs, RowBounds::Le(0.0));
                        if lo > 0.0 {
                            let mut coeffs = b.sum(arcs, 1.0);
                            coeffs.push((s.z, -lo));
                            b.row(format!("{dir}min__{id}__{}__{t}__{w}", b.eid(e)), "status-bounds", coeffs, RowBounds::Ge(0.0));
                        }
                    }
                }
            }
        }

        // ramping
        let ramp_energies: BTreeSet<usize> = u.ramp_up.keys().chain(u.ramp_down.keys()).copied().collect();
        for e in ramp_energies {
            let p0 = u.initial_production.get(&e).copied().unwrap_or(0.0);
            let b0 = if u.initial_status { 1.0 } else { 0.0 };
            for w in 0..ns {
                for t in 0..t_len {
                    let cur = net.arcs_out(u.vertex, e, t, w).to_vec();
                    let prev = if t > 0 { net.arcs_out(u.vertex, e, t - 1, w).to_vec() } else { Vec::new() };
                    let lo = net.outflow[&(u.vertex, e)].lower.get(t, w);
                    if let Some(&ru) = u.ramp_up.get(&e) {
                        let mut coeffs = b.sum(&cur, 1.0);
                        coeffs.extend(b.sum(&prev, -1.0));
                        let mut rhs = if t == 0 { ru + p0 } else { ru };
                        if u.commitment {
                            let s = status[&(ui, t, w)];
                            coeffs.push((s.start, -lo));
                            if t > 0 {
                                coeffs.push((status[&(ui, t - 1, w)].z, -ru));
                            } else {
                                rhs = ru * b0 + p0;
                            }
                        }
                        b.row(format!("rampup__{id}__{}__{t}__{w}", b.eid(e)), "ramp", coeffs, RowBounds::Le(rhs));
                    }
                    if let Some(&rd) = u.ramp_down.get(&e) {
                        let mut coeffs = b.sum(&prev, 1.0);
                        coeffs.extend(b.sum(&cur, -1.0));
                        let mut rhs = if t == 0 { rd - p0 } else { rd };
                        if u.commitment {
                            let s = status[&(ui, t, w)];
                            coeffs.push((s.z, -rd));
                            coeffs.push((s.stop, -lo));
                            rhs = if t == 0 { -p0 } else { 0.0 };
                        }
                        b.row(format!("rampdown__{id}__{}__{t}__{w}", b.eid(e)), "ramp", coeffs, RowBounds::Le(rhs));
                    }
                }
            }
        }

        if !u.commitment {
            continue;
        }
        let init = if u.initial_status { 1.0 } else { 0.0 };
        for w in 0..ns {
            for t in 0..t_len {
                let s = status[&(ui, t, w)];
                let mut coeffs = vec![(s.start, 1.0), (s.stop, -1.0), (s.z, -1.0)];
                let rhs = if t > 0 {
                    coeffs.push((status[&(ui, t - 1, w)].z, 1.0));
                    0.0
                } else {
                    -init
                };
                b.row(format!("trans__{id}__{t}__{w}"), "status-transition", coeffs, RowBounds::Eq(rhs));
                b.row(
                    format!("startstop__{id}__{t}__{w}"),
                    "status-transition",
                    vec![(s.start, 1.0), (s.stop, 1.0)],
                    RowBounds::Le(1.0),
                );
                if t < u.initial_periods {
                    b.row(format!("initstatus__{id}__{t}__{w}"), "initial-status", vec![(s.z, 1.0)], RowBounds::Eq(init));
                }
            }
            let first = u.initial_periods.max(1) - 1;
            for t in first..t_len {
                let z = status[&(ui, t, w)].z;
                if u.min_up > 0 {
                    let mut coeffs: Vec<(VarId, f64)> =
                        (t.saturating_sub(u.min_up)..=t).map(|k| (status[&(ui, k, w)].start, 1.0)).collect();
                    coeffs.push((z, -1.0));
                    b.row(format!("minup__{id}__{t}__{w}"), "min-up", coeffs, RowBounds::Le(0.0));
                }
                if u.min_down > 0 {
                    let mut coeffs: Vec<(VarId, f64)> =
                        (t.saturating_sub(u.min_down)..=t).map(|k| (status[&(ui, k, w)].stop, 1.0)).collect();
                    coeffs.push((z, 1.0));
                    b.row(format!("mindown__{id}__{t}__{w}"), "min-down", coeffs, RowBounds::Le(1.0));
                }
            }
        }
    }

    // exclusions (symmetric) and dependencies
    let pos: HashMap<usize, usize> = net.units.iter().enumerate().map(|(i, u)| (u.vertex, i)).collect();
    let mut pairs = BTreeSet::new();
    for (ui, u) in net.units.iter().enumerate() {
        for &o in &u.excludes {
            let oi = pos[&o];
            pairs.insert((ui.min(oi), ui.max(oi)));
        }
    }
    for (a, c) in pairs {
        let (ia, ic) = (b.vid(net.units[a].vertex).to_string(), b.vid(net.units[c].vertex).to_string());
        for w in 0..ns {
            for t in 0..t_len {
                let (sa, sc) = (status[&(a, t, w)], status[&(c, t, w)]);
                b.row(format!("excl__{ia}__{ic}__{t}__{w}"), "exclusion", vec![(sa.z, 1.0), (sc.z, 1.0)], RowBounds::Le(1.0));
                b.row(
                    format!("exclss__{ia}__{ic}__{t}__{w}"),
                    "exclusion",
                    vec![(sa.start, 1.0), (sc.stop, 1.0)],
                    RowBounds::Le(1.0),
                );
                b.row(
                    format!("exclss__{ic}__{ia}__{t}__{w}"),
                    "exclusion",
                    vec![(sc.start, 1.0), (sa.stop, 1.0)],
                    RowBounds::Le(1.0),
                );
            }
        }
    }
    for (ui, u) in net.units.iter().enumerate() {
        for &o in &u.depends_on {
            let oi = pos[&o];
            let (iu, io) = (b.vid(u.vertex).to_string(), b.vid(o).to_string());
            for w in 0..ns {
                for t in 0..t_len {
                    b.row(
                        format!("dep__{iu}__{io}__{t}__{w}"),
                        "dependency",
                        vec![(status[&(ui, t, w)].z, 1.0), (status[&(oi, t, w)].z, -1.0)],
                        RowBounds::Eq(0.0),
                    );
                }
            }
        }
    }
}

fn add_storage_rows(b: &mut Builder, opts: &ModelOptions) {
    let net = b.net;
    for s in &net.storages {
        let id = b.vid(s.vertex).to_string();
        let keep = 1.0 - s.loss;
        for w in 0..net.num_scenarios() {
            for t in 0..net.horizon {
                let ins = net.arcs_in(s.vertex, s.energy, t, w);
                let outs = net.arcs_out(s.vertex, s.energy, t, w);
                let is_carry = |a: &usize| net.arcs[*a].kind != ArcKind::Flow;
                let (carry_in, flow_in): (Vec<usize>, Vec<usize>) = ins.iter().partition(|a| is_carry(a));
                let (carry_out, flow_out): (Vec<usize>, Vec<usize>) = outs.iter().partition(|a| is_carry(a));
                let mut coeffs = b.sum(&carry_out, 1.0);
                coeffs.extend(b.sum(&flow_out, 1.0));
                match opts.storage_loss {
                    StorageLoss::CarriedStock => {
                        coeffs.extend(b.sum(&carry_in, -keep));
                        coeffs.extend(b.sum(&flow_in, -1.0));
                    }
                    StorageLoss::Throughput => {
                        coeffs.extend(b.sum(&carry_in, -keep));
                        coeffs.extend(b.sum(&flow_in, -keep));
                    }
                }
                b.row(format!("balance__{id}__{t}__{w}"), "storage-balance", coeffs, RowBounds::Eq(0.0));
                if s.max_flow.is_finite() {
                    for (dir, arcs) in [("in", &flow_in), ("out", &flow_out)] {
                        if arcs.len() > 1 {
                            let coeffs = b.sum(arcs, 1.0);
                            b.row(format!("{dir}max__{id}__{t}__{w}"), "storage-flow", coeffs, RowBounds::Le(s.max_flow));
                        }
                    }
                }
            }
        }
    }
}

fn add_nonanticipativity(b: &mut Builder, status: &HashMap<(usize, usize, usize), StatusVars>, coupling: FlowCoupling) {
    let net = b.net;
    let ns = net.num_scenarios();
    for (ui, u) in net.units.iter().enumerate() {
        if !u.commitment || !net.vertices[u.vertex].first_stage {
            continue;
        }
        let id = b.vid(u.vertex).to_string();
        for t in 0..net.first_stage {
            let z0 = status[&(ui, t, 0)].z;
            for w in 1..ns {
                b.row(
                    format!("nastatus__{id}__{t}__{w}"),
                    "nonanticipativity-status",
                    vec![(status[&(ui, t, w)].z, 1.0), (z0, -1.0)],
                    RowBounds::Eq(0.0),
                );
            }
        }
    }
    for a in 0..net.arcs.len() {
        if net.arcs[a].scenario != 0 || !net.is_first_stage_arc(a) {
            continue;
        }
        let group = net.siblings(a).to_vec();
        for (w, &aw) in group.iter().enumerate() {
            let coeffs = match coupling {
                FlowCoupling::ExpectedFlow => {
                    let mut c: Vec<(VarId, f64)> =
                        group.iter().map(|&ak| (b.arc_vars[ak], -net.probabilities[net.arcs[ak].scenario])).collect();
                    c.push((b.arc_vars[aw], 1.0));
                    c
                }
                FlowCoupling::Pairwise if w == 0 => continue,
                FlowCoupling::Pairwise => vec![(b.arc_vars[aw], 1.0), (b.arc_vars[a], -1.0)],
            };
            let name = format!("naflow__{}", net.arc_name(aw));
            b.row(name, "nonanticipativity-flow", coeffs, RowBounds::Eq(0.0));
        }
    }
}

/// Scenario indices sorted by price, ties by index.
pub fn price_order(m: &MarketData, t: usize, ns: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&a, &c| m.price.get(t, a).total_cmp(&m.price.get(t, c)).then(a.cmp(&c)));
    order
}

fn add_bidding(b: &mut Builder, scope: BidScope) {
    let net = b.net;
    let ns = net.num_scenarios();
    for m in net.markets.iter().filter(|m| m.bidding) {
        let vertices = match scope {
            BidScope::DayAhead => vec![m.da],
            BidScope::AllMarketVertices => vec![m.da, m.bmb, m.bms],
        };
        for &v in &vertices {
            let id = b.vid(v).to_string();
            for t in 0..net.first_stage {
                let order = price_order(m, t, ns);
                for pair in order.windows(2) {
                    let (lo, hi) = (pair[0], pair[1]);
                    let mut coeffs: Vec<(VarId, f64)> =
                        position_terms(net, m, v, t, hi).into_iter().map(|(a, c)| (b.arc_vars[a], c)).collect();
                    coeffs.extend(position_terms(net, m, v, t, lo).into_iter().map(|(a, c)| (b.arc_vars[a], -c)));
                    let equal = (m.price.get(t, hi) - m.price.get(t, lo)).abs() <= PRICE_TIE_TOL;
                    let name = format!("bid__{id}__{t}__{lo}__{hi}");
                    let bounds = match (equal, m.side) {
                        (true, _) => RowBounds::Eq(0.0),
                        (false, MarketSide::Selling) => RowBounds::Ge(0.0),
                        (false, MarketSide::Buying) => RowBounds::Le(0.0),
                    };
                    let tag = if equal { "bid-equal" } else { "bid-monotone" };
                    b.row(name, tag, coeffs, bounds);
                }
            }
        }
    }
}

fn apply_fix(
    b: &mut Builder,
    status: &HashMap<(usize, usize, usize), StatusVars>,
    fix: &FirstStageFix,
    deviations: &mut Vec<(VarId, usize, usize)>,
) -> Result<()> {
    let net = b.net;
    let ns = net.num_scenarios();
    let unit_pos = |id: &str| {
        net.units
            .iter()
            .position(|u| net.vertices[u.vertex].id == id)
            .ok_or_else(|| Error::Data(format!("fix refers to unknown unit '{id}'")))
    };
    for (id, t, on) in &fix.statuses {
        let ui = unit_pos(id)?;
        if *t >= net.horizon {
            continue;
        }
        for w in 0..ns {
            let s = status
                .get(&(ui, *t, w))
                .ok_or_else(|| Error::Data(format!("unit '{id}' has no commitment status")))?;
            let v = if *on { 1.0 } else { 0.0 };
            b.p.set_bounds(s.z, v, v);
        }
    }
    for (from, to, energy, t, value) in &fix.flows {
        if *t >= net.horizon {
            continue;
        }
        let (Some(f), Some(d), Some(e)) = (net.vertex_id(from), net.vertex_id(to), net.energy_id(energy)) else {
            return Err(Error::Data(format!("fix refers to unknown arc {from} -> {to} ({energy})")));
        };
        for w in 0..ns {
            let arcs: Vec<usize> =
                net.arcs_out(f, e, *t, w).iter().copied().filter(|&a| net.arcs[a].to == d).collect();
            let [a] = arcs[..] else {
                return Err(Error::Data(format!("fix refers to unknown arc {from} -> {to} ({energy})")));
            };
            let name = format!("fix__{}", net.arc_name(a));
            let cost = net.probabilities[w] * fix.deviation_penalty;
            let up = b.p.add_continuous(format!("devup__{}", net.arc_name(a)), 0.0, f64::INFINITY, cost);
            let down = b.p.add_continuous(format!("devdown__{}", net.arc_name(a)), 0.0, f64::INFINITY, cost);
            deviations.push((up, *t, w));
            deviations.push((down, *t, w));
            let x = b.arc_vars[a];
            b.row(name, "first-stage-flow", vec![(x, 1.0), (up, -1.0), (down, 1.0)], RowBounds::Eq(*value));
        }
    }
    for (market, t, q) in &fix.positions {
        if *t >= net.horizon {
            continue;
        }
        let m = net
            .markets
            .iter()
            .find(|m| &m.id == market)
            .ok_or_else(|| Error::Data(format!("fix refers to unknown market '{market}'")))?;
        for w in 0..ns {
            let coeffs: Vec<(VarId, f64)> =
                position_terms(net, m, m.da, *t, w).into_iter().map(|(a, c)| (b.arc_vars[a], c)).collect();
            b.row(format!("position__{market}__{t}__{w}"), "first-stage-position", coeffs, RowBounds::Eq(*q));
        }
    }
    Ok(())
}
