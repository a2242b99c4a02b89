//! Time- and scenario-expanded flow network.
//!
//! Every connection of the system becomes one arc per period and scenario.
//! Storages additionally get carry arcs between consecutive periods and
//! artificial initial/target vertices that pin the first and last level.
//! Market and penalty vertices are generated from the config.

use std::collections::{BTreeMap, HashMap};

use crate::config::{BoundSpec, MarketSide, Param, SystemSpec, VertexKind, VertexSpec};
use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Regular,
    MarketDa(usize),
    MarketBmb(usize),
    MarketBms(usize),
    Missing(usize),
    Excess(usize),
    StorageInit(usize),
    StorageTarget(usize),
}

impl Role {
    pub fn is_artificial(self) -> bool {
        !matches!(self, Role::Regular)
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: String,
    pub kind: VertexKind,
    pub role: Role,
    pub spec: Option<usize>,
    pub res: bool,
    pub first_stage: bool,
    pub commitment: bool,
}

/// Values over periods and scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    periods: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn constant(periods: usize, scenarios: usize, v: f64) -> Grid {
        Grid { periods, values: vec![v; periods * scenarios] }
    }

    pub fn get(&self, t: usize, w: usize) -> f64 {
        self.values[w * self.periods + t]
    }

    fn set(&mut self, t: usize, w: usize, v: f64) {
        self.values[w * self.periods + t] = v;
    }

    pub fn is_constant(&self, v: f64) -> bool {
        self.values.iter().all(|x| *x == v)
    }
}

#[derive(Debug, Clone)]
pub struct FlowLimits {
    pub lower: Grid,
    pub upper: Grid,
}

#[derive(Debug, Clone)]
pub struct StorageData {
    pub vertex: usize,
    pub energy: usize,
    pub capacity: Grid,
    pub loss: f64,
    pub max_flow: f64,
    pub initial: f64,
    pub target: Option<f64>,
    pub init_vertex: usize,
    pub target_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct UnitData {
    pub vertex: usize,
    pub commitment: bool,
    pub start_cost: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub initial_status: bool,
    pub initial_periods: usize,
    pub initial_production: BTreeMap<usize, f64>,
    pub ramp_up: BTreeMap<usize, f64>,
    pub ramp_down: BTreeMap<usize, f64>,
    pub conversions: Vec<(usize, usize, f64)>,
    pub excludes: Vec<usize>,
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MarketData {
    pub id: String,
    pub side: MarketSide,
    pub energy: usize,
    pub da: usize,
    pub bmb: usize,
    pub bms: usize,
    pub price: Grid,
    pub penalty: f64,
    pub bidding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    Flow,
    Carry,
    Initial,
    Target,
}

#[derive(Debug, Clone)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub energy: usize,
    pub t: usize,
    pub t_end: usize,
    pub scenario: usize,
    pub kind: ArcKind,
    pub lower: f64,
    pub upper: f64,
    /// Cost per unit of flow, not weighted by probability.
    pub unit_cost: f64,
    /// Connection the arc was generated from, for flow arcs.
    pub link: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub energy: usize,
    pub capacity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitState {
    pub status: bool,
    pub periods: usize,
    pub production: BTreeMap<String, f64>,
}

/// Conditions at the start of a horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemState {
    pub storage: BTreeMap<String, f64>,
    pub units: BTreeMap<String, UnitState>,
}

impl SystemState {
    pub fn from_spec(spec: &SystemSpec) -> SystemState {
        let mut st = SystemState::default();
        for v in &spec.vertices {
            match v.kind() {
                VertexKind::Storage => {
                    st.storage.insert(v.id.clone(), v.initial_level.unwrap_or(0.0));
                }
                VertexKind::Unit => {
                    st.units.insert(
                        v.id.clone(),
                        UnitState {
                            status: v.initial_status,
                            periods: v.initial_periods,
                            production: v.initial_production.clone(),
                        },
                    );
                }
                _ => {}
            }
        }
        st
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// Storage target levels as configured.
    #[default]
    Spec,
    /// End levels anywhere in `[0, capacity]`.
    Free,
}

#[derive(Debug, Clone)]
pub struct NetworkOptions {
    pub horizon: usize,
    pub first_stage: usize,
    pub state: SystemState,
    pub targets: TargetMode,
}

impl NetworkOptions {
    pub fn new(spec: &SystemSpec, horizon: usize, first_stage: usize) -> NetworkOptions {
        NetworkOptions { horizon, first_stage, state: SystemState::from_spec(spec), targets: TargetMode::Spec }
    }
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    pub name: String,
    pub energies: Vec<String>,
    pub vertices: Vec<Vertex>,
    pub links: Vec<Link>,
    pub arcs: Vec<Arc>,
    pub horizon: usize,
    pub first_stage: usize,
    pub probabilities: Vec<f64>,
    pub inflow: HashMap<(usize, usize), FlowLimits>,
    pub outflow: HashMap<(usize, usize), FlowLimits>,
    pub cost_in: HashMap<(usize, usize), Grid>,
    pub cost_out: HashMap<(usize, usize), Grid>,
    pub storages: Vec<StorageData>,
    pub units: Vec<UnitData>,
    pub interconnection_loss: HashMap<usize, f64>,
    pub markets: Vec<MarketData>,
    pub heat_energy: Option<usize>,
    in_index: Vec<Vec<usize>>,
    out_index: Vec<Vec<usize>>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    vertex_index: HashMap<String, usize>,
}

struct Resolver<'a> {
    scenarios: &'a ScenarioSet,
    horizon: usize,
}

impl Resolver<'_> {
    fn grid(&self, p: &Param, what: &str) -> Result<Grid> {
        let s = self.scenarios.len();
        match p {
            Param::Value(v) => Ok(Grid::constant(self.horizon, s, *v)),
            Param::Series { series, scale } => {
                let mut g = Grid::constant(self.horizon, s, 0.0);
                for w in 0..s {
                    let data = self.scenarios.scenarios[w].data.get(series).ok_or_else(|| {
                        Error::Data(format!("{what}: series '{series}' is not in the scenario data"))
                    })?;
                    if data.len() < self.horizon {
                        return Err(Error::Data(format!("{what}: series '{series}' is shorter than the horizon")));
                    }
                    for t in 0..self.horizon {
                        g.set(t, w, data[t] * scale);
                    }
                }
                Ok(g)
            }
        }
    }

    fn limits(&self, b: Option<&BoundSpec>, what: &str) -> Result<FlowLimits> {
        let lower = match b.and_then(|b| b.lower.as_ref()) {
            Some(p) => self.grid(p, what)?,
            None => Grid::constant(self.horizon, self.scenarios.len(), 0.0),
        };
        let upper = match b.and_then(|b| b.upper.as_ref()) {
            Some(p) => self.grid(p, what)?,
            None => Grid::constant(self.horizon, self.scenarios.len(), f64::INFINITY),
        };
        Ok(FlowLimits { lower, upper })
    }
}

impl FlowNetwork {
    pub fn build(spec: &SystemSpec, scenarios: &ScenarioSet, opts: &NetworkOptions) -> Result<FlowNetwork> {
        spec.validate().into_result()?;
        scenarios.check()?;
        let horizon = opts.horizon;
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if scenarios.len < horizon {
            return Err(Error::Data(format!("scenario data covers {} periods, horizon is {horizon}", scenarios.len)));
        }
        let first_stage = opts.first_stage.min(horizon);
        let ns = scenarios.len();
        let res = Resolver { scenarios, horizon };
        let energy_index: HashMap<&str, usize> =
            spec.energy_types.iter().enumerate().map(|(i, e)| (e.as_str(), i)).collect();
        let eidx = |e: &str| energy_index[e];

        let mut net = FlowNetwork {
            name: spec.name.clone(),
            energies: spec.energy_types.clone(),
            vertices: Vec::new(),
            links: Vec::new(),
            arcs: Vec::new(),
            horizon,
            first_stage,
            probabilities: scenarios.probabilities(),
            inflow: HashMap::new(),
            outflow: HashMap::new(),
            cost_in: HashMap::new(),
            cost_out: HashMap::new(),
            storages: Vec::new(),
            units: Vec::new(),
            interconnection_loss: HashMap::new(),
            markets: Vec::new(),
            heat_energy: energy_index.get(spec.defaults.heat_energy.as_str()).copied(),
            in_index: Vec::new(),
            out_index: Vec::new(),
            groups: Vec::new(),
            group_of: Vec::new(),
            vertex_index: HashMap::new(),
        };

        for (si, v) in spec.vertices.iter().enumerate() {
            let kind = v.kind();
            let idx = net.add_vertex(Vertex {
                id: v.id.clone(),
                kind,
                role: Role::Regular,
                spec: Some(si),
                res: v.res,
                first_stage: v.first_stage,
                commitment: v.commitment,
            });
            let what = format!("vertex '{}'", v.id);
            let (ins, outs) = vertex_energies(v);
            for e in ins {
                let lim = if kind == VertexKind::Storage {
                    storage_limits(v, &res)
                } else {
                    res.limits(v.inflow.get(&e), &what)?
                };
                net.inflow.insert((idx, eidx(&e)), lim);
            }
            for e in outs {
                let lim = if kind == VertexKind::Storage {
                    storage_limits(v, &res)
                } else {
                    res.limits(v.outflow.get(&e), &what)?
                };
                net.outflow.insert((idx, eidx(&e)), lim);
            }
            for (e, p) in &v.cost_in {
                net.cost_in.insert((idx, eidx(e)), res.grid(p, &what)?);
            }
            for (e, p) in &v.cost_out {
                net.cost_out.insert((idx, eidx(e)), res.grid(p, &what)?);
            }
            if kind == VertexKind::Interconnection {
                net.interconnection_loss.insert(idx, v.loss.unwrap_or(0.0));
            }
        }

        for (mi, m) in spec.markets.iter().enumerate() {
            let e = eidx(&m.energy);
            let penalty = m.penalty.unwrap_or(spec.defaults.imbalance_penalty);
            let price = res.grid(&m.price, &format!("market '{}'", m.id))?;
            let (da_kind, bmb, bms) = (
                match m.side {
                    MarketSide::Selling => VertexKind::Demand,
                    MarketSide::Buying => VertexKind::Source,
                },
                m.bmb_id(),
                m.bms_id(),
            );
            let da = net.add_artificial(&m.id, da_kind, Role::MarketDa(mi));
            let bmb = net.add_artificial(&bmb, VertexKind::Source, Role::MarketBmb(mi));
            let bms = net.add_artificial(&bms, VertexKind::Demand, Role::MarketBms(mi));
            net.open_source(bmb, e, penalty);
            net.open_demand(bms, e, penalty);
            let mut neg = price.clone();
            neg.values.iter_mut().for_each(|x| *x = -*x);
            match m.side {
                MarketSide::Selling => net.open_demand_grid(da, e, neg),
                MarketSide::Buying => net.open_source_grid(da, e, price.clone()),
            }
            net.markets.push(MarketData {
                id: m.id.clone(),
                side: m.side,
                energy: e,
                da,
                bmb,
                bms,
                price,
                penalty,
                bidding: m.bidding.unwrap_or(true),
            });
        }

        for c in &spec.connections {
            let from = net.vertex_index[&c.from];
            let to = net.vertex_index[&c.to];
            net.links.push(Link { from, to, energy: eidx(&c.energy), capacity: c.capacity.unwrap_or(f64::INFINITY) });
        }

        let base_links = net.links.clone();
        for mi in 0..net.markets.len() {
            let m = net.markets[mi].clone();
            match m.side {
                MarketSide::Selling => {
                    net.push_link(m.bmb, m.da, m.energy);
                    for l in base_links.iter().filter(|l| l.to == m.da) {
                        net.push_link(l.from, m.bms, l.energy);
                    }
                }
                MarketSide::Buying => {
                    net.push_link(m.da, m.bms, m.energy);
                    for l in base_links.iter().filter(|l| l.from == m.da) {
                        net.push_link(m.bmb, l.to, l.energy);
                    }
                }
            }
        }

        if spec.defaults.penalty_vertices {
            if let Some(h) = net.heat_energy {
                let demands: Vec<usize> = (0..net.vertices.len())
                    .filter(|&v| {
                        let vx = &net.vertices[v];
                        vx.role == Role::Regular && vx.kind == VertexKind::Demand && net.inflow.contains_key(&(v, h))
                    })
                    .collect();
                for d in demands {
                    let id = net.vertices[d].id.clone();
                    let miss = net.add_artificial(&format!("$missing_{id}"), VertexKind::Source, Role::Missing(d));
                    let excess = net.add_artificial(&format!("$excess_{id}"), VertexKind::Demand, Role::Excess(d));
                    net.open_source(miss, h, spec.defaults.missing_heat_penalty);
                    net.open_demand(excess, h, spec.defaults.excess_heat_penalty);
                    net.push_link(miss, d, h);
                    let feeders: Vec<usize> = base_links.iter().filter(|l| l.to == d && l.energy == h).map(|l| l.from).collect();
                    for f in feeders {
                        net.push_link(f, excess, h);
                    }
                }
            }
        }

        for v in &spec.vertices {
            let idx = net.vertex_index[&v.id];
            match v.kind() {
                VertexKind::Storage => {
                    let e = eidx(v.energy.as_deref().unwrap());
                    let capacity = res.grid(v.capacity.as_ref().unwrap(), &format!("storage '{}'", v.id))?;
                    let initial = *opts.state.storage.get(&v.id).unwrap_or(&v.initial_level.unwrap_or(0.0));
                    let target = match opts.targets {
                        TargetMode::Spec => v.target_level,
                        TargetMode::Free => None,
                    };
                    let init_vertex =
                        net.add_artificial(&format!("$init_{}", v.id), VertexKind::Source, Role::StorageInit(idx));
                    let target_vertex =
                        net.add_artificial(&format!("$target_{}", v.id), VertexKind::Demand, Role::StorageTarget(idx));
                    net.storages.push(StorageData {
                        vertex: idx,
                        energy: e,
                        capacity,
                        loss: v.loss.unwrap_or(0.0),
                        max_flow: v.max_flow.unwrap_or(f64::INFINITY),
                        initial,
                        target,
                        init_vertex,
                        target_vertex,
                    });
                }
                VertexKind::Unit => {
                    let st = opts.state.units.get(&v.id);
                    let production = st.map_or(&v.initial_production, |s| &s.production);
                    let status = st.map_or(v.initial_status, |s| s.status);
                    let periods = st.map_or(v.initial_periods, |s| s.periods);
                    if v.commitment && periods > horizon {
                        log::warn!("unit '{}': status frozen beyond the horizon", v.id);
                    }
                    let emap = |m: &BTreeMap<String, f64>| m.iter().map(|(k, x)| (eidx(k), *x)).collect();
                    let vid = |ids: &Vec<String>| ids.iter().map(|u| net.vertex_index[u]).collect::<Vec<_>>();
                    net.units.push(UnitData {
                        vertex: idx,
                        commitment: v.commitment,
                        start_cost: v.start_cost,
                        min_up: v.min_up,
                        min_down: v.min_down,
                        initial_status: status,
                        initial_periods: if v.commitment { periods } else { 0 },
                        initial_production: emap(production),
                        ramp_up: emap(&v.ramp_up),
                        ramp_down: emap(&v.ramp_down),
                        conversions: v.conversion.iter().map(|c| (eidx(&c.from), eidx(&c.to), c.factor)).collect(),
                        excludes: vid(&v.excludes),
                        depends_on: vid(&v.depends_on),
                    });
                }
                _ => {}
            }
        }

        net.generate_arcs(ns);
        Ok(net)
    }

    fn add_vertex(&mut self, v: Vertex) -> usize {
        let idx = self.vertices.len();
        self.vertex_index.insert(v.id.clone(), idx);
        self.vertices.push(v);
        idx
    }

    fn add_artificial(&mut self, id: &str, kind: VertexKind, role: Role) -> usize {
        self.add_vertex(Vertex {
            id: id.to_string(),
            kind,
            role,
            spec: None,
            res: false,
            first_stage: false,
            commitment: false,
        })
    }

    fn open_limits(&self) -> FlowLimits {
        let s = self.probabilities.len();
        FlowLimits {
            lower: Grid::constant(self.horizon, s, 0.0),
            upper: Grid::constant(self.horizon, s, f64::INFINITY),
        }
    }

    fn open_source(&mut self, v: usize, e: usize, cost: f64) {
        let g = Grid::constant(self.horizon, self.probabilities.len(), cost);
        self.open_source_grid(v, e, g);
    }

    fn open_source_grid(&mut self, v: usize, e: usize, cost: Grid) {
        self.outflow.insert((v, e), self.open_limits());
        self.cost_out.insert((v, e), cost);
    }

    fn open_demand(&mut self, v: usize, e: usize, cost: f64) {
        let g = Grid::constant(self.horizon, self.probabilities.len(), cost);
        self.open_demand_grid(v, e, g);
    }

    fn open_demand_grid(&mut self, v: usize, e: usize, cost: Grid) {
        self.inflow.insert((v, e), self.open_limits());
        self.cost_in.insert((v, e), cost);
    }

    fn push_link(&mut self, from: usize, to: usize, energy: usize) {
        if !self.links.iter().any(|l| l.from == from && l.to == to && l.energy == energy) {
            self.links.push(Link { from, to, energy, capacity: f64::INFINITY });
        }
    }

    fn endpoint_upper(&self, v: usize, e: usize, t: usize, w: usize, outgoing: bool) -> f64 {
        let map = if outgoing { &self.outflow } else { &self.inflow };
        map.get(&(v, e)).map_or(f64::INFINITY, |l| l.upper.get(t, w))
    }

    fn cost(&self, map: &HashMap<(usize, usize), Grid>, v: usize, e: usize, t: usize, w: usize) -> f64 {
        map.get(&(v, e)).map_or(0.0, |g| g.get(t, w))
    }

    fn generate_arcs(&mut self, ns: usize) {
        let t_len = self.horizon;
        let mut arcs = Vec::new();
        let mut groups = Vec::new();
        for (li, l) in self.links.iter().enumerate() {
            for t in 0..t_len {
                let mut g = Vec::with_capacity(ns);
                for w in 0..ns {
                    let upper = l
                        .capacity
                        .min(self.endpoint_upper(l.from, l.energy, t, w, true))
                        .min(self.endpoint_upper(l.to, l.energy, t, w, false));
                    let unit_cost =
                        self.cost(&self.cost_out, l.from, l.energy, t, w) + self.cost(&self.cost_in, l.to, l.energy, t, w);
                    g.push(arcs.len());
                    arcs.push(Arc {
                        from: l.from,
                        to: l.to,
                        energy: l.energy,
                        t,
                        t_end: t,
                        scenario: w,
                        kind: ArcKind::Flow,
                        lower: 0.0,
                        upper,
                        unit_cost,
                        link: Some(li),
                    });
                }
                groups.push(g);
            }
        }
        for s in &self.storages {
            let push = |arcs: &mut Vec<Arc>, kind, from, to, t, t_end, w, lower, upper| {
                arcs.push(Arc {
                    from,
                    to,
                    energy: s.energy,
                    t,
                    t_end,
                    scenario: w,
                    kind,
                    lower,
                    upper,
                    unit_cost: 0.0,
                    link: None,
                });
            };
            let mut g = Vec::new();
            for w in 0..ns {
                g.push(arcs.len());
                push(&mut arcs, ArcKind::Initial, s.init_vertex, s.vertex, 0, 0, w, s.initial, s.initial);
            }
            groups.push(g);
            for t in 0..t_len.saturating_sub(1) {
                let mut g = Vec::new();
                for w in 0..ns {
                    g.push(arcs.len());
                    push(&mut arcs, ArcKind::Carry, s.vertex, s.vertex, t, t + 1, w, 0.0, s.capacity.get(t, w));
                }
                groups.push(g);
            }
            let last = t_len - 1;
            let mut g = Vec::new();
            for w in 0..ns {
                let cap = s.capacity.get(last, w);
                let (lo, hi) = match s.target {
                    Some(target) => (target, cap.max(target)),
                    None => (0.0, cap),
                };
                g.push(arcs.len());
                push(&mut arcs, ArcKind::Target, s.vertex, s.target_vertex, last, last, w, lo, hi);
            }
            groups.push(g);
        }
        let nv = self.vertices.len();
        let ne = self.energies.len();
        let nb = nv * ne * t_len * ns;
        let mut in_index = vec![Vec::new(); nb];
        let mut out_index = vec![Vec::new(); nb];
        for (ai, a) in arcs.iter().enumerate() {
            let (tin, tout) = match a.kind {
                ArcKind::Carry => (a.t_end, a.t),
                _ => (a.t, a.t),
            };
            out_index[((a.from * ne + a.energy) * t_len + tout) * ns + a.scenario].push(ai);
            in_index[((a.to * ne + a.energy) * t_len + tin) * ns + a.scenario].push(ai);
        }
        let mut group_of = vec![0; arcs.len()];
        for (gi, g) in groups.iter().enumerate() {
            for &a in g {
                group_of[a] = gi;
            }
        }
        self.arcs = arcs;
        self.in_index = in_index;
        self.out_index = out_index;
        self.groups = groups;
        self.group_of = group_of;
    }

    fn bucket(&self, v: usize, e: usize, t: usize, w: usize) -> usize {
        ((v * self.energies.len() + e) * self.horizon + t) * self.probabilities.len() + w
    }

    /// Arcs entering `v` with energy `e` in period `t` of scenario `w`.
    pub fn arcs_in(&self, v: usize, e: usize, t: usize, w: usize) -> &[usize] {
        &self.in_index[self.bucket(v, e, t, w)]
    }

    pub fn arcs_out(&self, v: usize, e: usize, t: usize, w: usize) -> &[usize] {
        &self.out_index[self.bucket(v, e, t, w)]
    }

    /// The same arc in every scenario.
    pub fn siblings(&self, a: usize) -> &[usize] {
        &self.groups[self.group_of[a]]
    }

    pub fn num_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn vertex_id(&self, id: &str) -> Option<usize> {
        self.vertex_index.get(id).copied()
    }

    pub fn energy_id(&self, name: &str) -> Option<usize> {
        self.energies.iter().position(|e| e == name)
    }

    pub fn weighted_cost(&self, a: usize) -> f64 {
        let arc = &self.arcs[a];
        self.probabilities[arc.scenario] * arc.unit_cost
    }

    pub fn arc_name(&self, a: usize) -> String {
        let arc = &self.arcs[a];
        format!(
            "x__{}__{}__{}__{}__{}__{}",
            self.vertices[arc.from].id,
            self.vertices[arc.to].id,
            self.energies[arc.energy],
            arc.t,
            arc.t_end,
            arc.scenario
        )
    }

    pub fn storage_of(&self, v: usize) -> Option<&StorageData> {
        self.storages.iter().find(|s| s.vertex == v)
    }

    pub fn unit_of(&self, v: usize) -> Option<&UnitData> {
        self.units.iter().find(|u| u.vertex == v)
    }

    /// Energies flowing into and out of a vertex.
    pub fn vertex_energies(&self, v: usize) -> (Vec<usize>, Vec<usize>) {
        let mut ins: Vec<usize> = self.inflow.keys().filter(|k| k.0 == v).map(|k| k.1).collect();
        let mut outs: Vec<usize> = self.outflow.keys().filter(|k| k.0 == v).map(|k| k.1).collect();
        ins.sort_unstable();
        outs.sort_unstable();
        (ins, outs)
    }

    /// Flow arcs that carry first-stage decisions: arcs leaving first-stage
    /// units within the first-stage periods.
    pub fn is_first_stage_arc(&self, a: usize) -> bool {
        let arc = &self.arcs[a];
        arc.kind == ArcKind::Flow && arc.t < self.first_stage && self.vertices[arc.from].first_stage
    }
}

fn vertex_energies(v: &VertexSpec) -> (Vec<String>, Vec<String>) {
    match v.kind() {
        VertexKind::Unit => (v.inflow.keys().cloned().collect(), v.outflow.keys().cloned().collect()),
        VertexKind::Source => (vec![], v.energy.iter().cloned().collect()),
        VertexKind::Demand => (v.energy.iter().cloned().collect(), vec![]),
        VertexKind::Storage | VertexKind::Interconnection => {
            let e: Vec<String> = v.energy.iter().cloned().collect();
            (e.clone(), e)
        }
    }
}

fn storage_limits(v: &VertexSpec, res: &Resolver) -> FlowLimits {
    let s = res.scenarios.len();
    FlowLimits {
        lower: Grid::constant(res.horizon, s, 0.0),
        upper: Grid::constant(res.horizon, s, v.max_flow.unwrap_or(f64::INFINITY)),
    }
}
