#![allow(dead_code)]

use std::collections::BTreeMap;

use heatflow::config::{MarketSide, SystemSpec};
use heatflow::model::price_order;
use heatflow::network::{ArcKind, FlowNetwork};
use heatflow::scenario::{Scenario, ScenarioSet};
use heatflow::schedule::Schedule;
use heatflow::series::{parse_timestamp, Bundle, SeriesStore, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Knobs of the toy system: a gas CHP with commitment, a gas boiler, a heat
/// demand, a day-ahead selling market and optionally a heat tank and an
/// electric boiler buying from a second market.
#[derive(Debug, Clone)]
pub struct Toy {
    pub gas_cost: f64,
    pub chp_lo: f64,
    pub chp_hi: f64,
    pub start_cost: f64,
    pub min_up: usize,
    pub min_down: usize,
    pub boiler_cost: f64,
    pub boiler_hi: f64,
    pub storage: bool,
    pub buying: bool,
    pub penalty_vertices: bool,
}

impl Default for Toy {
    fn default() -> Self {
        Toy {
            gas_cost: 20.0,
            chp_lo: 2.0,
            chp_hi: 6.0,
            start_cost: 30.0,
            min_up: 1,
            min_down: 0,
            boiler_cost: 2.0,
            boiler_hi: 8.0,
            storage: false,
            buying: false,
            penalty_vertices: true,
        }
    }
}

impl Toy {
    pub fn random(rng: &mut ChaCha8Rng) -> Toy {
        let chp_lo = rng.random_range(0.5..3.0);
        Toy {
            gas_cost: rng.random_range(10.0..40.0),
            chp_lo,
            chp_hi: chp_lo + rng.random_range(1.0..5.0),
            start_cost: rng.random_range(0.0..200.0),
            min_up: rng.random_range(0..3),
            min_down: rng.random_range(0..2),
            boiler_cost: rng.random_range(0.0..20.0),
            boiler_hi: rng.random_range(4.0..10.0),
            ..Toy::default()
        }
    }

    pub fn toml(&self) -> String {
        let Toy { gas_cost, chp_lo, chp_hi, start_cost, min_up, min_down, boiler_cost, boiler_hi, .. } = self;
        let mut s = format!(
            r#"
name = "toy"
energy_types = ["NG", "H", "EL"]

[defaults]
penalty_vertices = {pv}

[uncertainty]
price = ["price"]
heat_flow = ["heat"]

[[vertices]]
id = "gas"
kind = "source"
energy = "NG"
cost_out.NG = {gas_cost:?}

[[vertices]]
id = "chp"
kind = "unit"
commitment = true
first_stage = true
start_cost = {start_cost:?}
min_up = {min_up}
min_down = {min_down}
inflow.NG = {{ upper = 100.0 }}
outflow.H = {{ lower = {chp_lo:?}, upper = {chp_hi:?} }}
outflow.EL = {{ upper = 100.0 }}
conversion = [{{ from = "NG", to = "H", factor = 0.5 }}, {{ from = "NG", to = "EL", factor = 0.4 }}]

[[vertices]]
id = "boiler"
kind = "unit"
inflow.NG = {{ upper = 100.0 }}
outflow.H = {{ upper = {boiler_hi:?} }}
conversion = [{{ from = "NG", to = "H", factor = 0.9 }}]
cost_out.H = {boiler_cost:?}

[[vertices]]
id = "town"
kind = "demand"
energy = "H"
inflow.H = {{ lower = {{ series = "heat" }}, upper = {{ series = "heat" }} }}

[[markets]]
id = "da"
side = "selling"
energy = "EL"
price = {{ series = "price" }}

[[connections]]
from = "gas"
to = "chp"
energy = "NG"

[[connections]]
from = "gas"
to = "boiler"
energy = "NG"

[[connections]]
from = "chp"
to = "town"
energy = "H"

[[connections]]
from = "boiler"
to = "town"
energy = "H"

[[connections]]
from = "chp"
to = "da"
energy = "EL"
"#,
            pv = self.penalty_vertices
        );
        if self.storage {
            s.push_str(
                r#"
[[vertices]]
id = "tank"
kind = "storage"
energy = "H"
capacity = 6.0
loss = 0.01
max_flow = 5.0
initial_level = 1.0
target_level = 1.0

[[connections]]
from = "chp"
to = "tank"
energy = "H"

[[connections]]
from = "boiler"
to = "tank"
energy = "H"

[[connections]]
from = "tank"
to = "town"
energy = "H"
"#,
            );
        }
        if self.buying {
            s.push_str(
                r#"
[[vertices]]
id = "eboiler"
kind = "unit"
first_stage = true
inflow.EL = { upper = 3.0 }
outflow.H = { upper = 2.97 }
conversion = [{ from = "EL", to = "H", factor = 0.99 }]

[[markets]]
id = "grid"
side = "buying"
energy = "EL"
price = { series = "buy_price" }

[[connections]]
from = "grid"
to = "eboiler"
energy = "EL"

[[connections]]
from = "eboiler"
to = "town"
energy = "H"
"#,
            );
        }
        s
    }

    pub fn spec(&self) -> SystemSpec {
        SystemSpec::from_toml_str(&self.toml()).unwrap()
    }
}

pub fn toy_spec(chp_lo: f64, chp_hi: f64, start_cost: f64, with_storage: bool) -> SystemSpec {
    Toy { chp_lo, chp_hi, start_cost, storage: with_storage, ..Toy::default() }.spec()
}

pub fn start() -> chrono::NaiveDateTime {
    parse_timestamp("2021-01-25T00:00:00").unwrap()
}

/// Scenarios with random prices and heat demands. With `ties`, prices are
/// drawn from a small set so equal prices across scenarios are common.
pub fn random_scenarios_with(seed: u64, n: usize, len: usize, ties: bool) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    let price = |rng: &mut ChaCha8Rng| {
        if ties {
            [15.0, 40.0, 90.0][rng.random_range(0..3)]
        } else {
            rng.random_range(10.0..120.0)
        }
    };
    let scenarios = (0..n)
        .map(|w| {
            let mut data = Bundle::new();
            data.insert("price".into(), (0..len).map(|_| price(&mut rng)).collect());
            data.insert("buy_price".into(), (0..len).map(|_| price(&mut rng)).collect());
            data.insert("heat".into(), (0..len).map(|_| rng.random_range(2.0..9.0)).collect());
            Scenario { label: format!("s{w}"), probability: weights[w] / total, data }
        })
        .collect();
    let set = ScenarioSet { start: start(), len, scenarios };
    set.check().unwrap();
    set
}

pub fn random_scenarios(seed: u64, n: usize, len: usize) -> ScenarioSet {
    random_scenarios_with(seed, n, len, false)
}

fn sum(s: &Schedule, arcs: &[usize]) -> f64 {
    arcs.iter().map(|&a| s.flows[a]).sum()
}

/// Largest residual of the unit conversions and interconnection losses,
/// recomputed from arc flows.
pub fn conversion_residual(net: &FlowNetwork, s: &Schedule) -> f64 {
    let mut worst: f64 = 0.0;
    for w in 0..net.num_scenarios() {
        for t in 0..net.horizon {
            for u in &net.units {
                for &(fin, fout, factor) in &u.conversions {
                    let r = sum(s, net.arcs_out(u.vertex, fout, t, w)) - factor * sum(s, net.arcs_in(u.vertex, fin, t, w));
                    worst = worst.max(r.abs());
                }
            }
            for (&v, &loss) in &net.interconnection_loss {
                for e in 0..net.energies.len() {
                    let r = sum(s, net.arcs_out(v, e, t, w)) - (1.0 - loss) * sum(s, net.arcs_in(v, e, t, w));
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

/// Largest deviation from `level[t] = (1 - loss) * level[t-1] + in[t] - out[t]`
/// with `level[-1]` the initial level.
pub fn storage_residual(net: &FlowNetwork, s: &Schedule) -> f64 {
    let mut worst: f64 = 0.0;
    for (si, st) in net.storages.iter().enumerate() {
        for w in 0..net.num_scenarios() {
            let mut prev = st.initial;
            for t in 0..net.horizon {
                let flow = |arcs: &[usize]| -> f64 {
                    arcs.iter().filter(|&&a| net.arcs[a].kind == ArcKind::Flow).map(|&a| s.flows[a]).sum()
                };
                let inflow = flow(net.arcs_in(st.vertex, st.energy, t, w));
                let outflow = flow(net.arcs_out(st.vertex, st.energy, t, w));
                let level = s.storage_level(net, si, t, w);
                worst = worst.max((level - ((1.0 - st.loss) * prev + inflow - outflow)).abs());
                prev = level;
            }
        }
    }
    worst
}

/// Largest spread of first-stage flows across scenarios and the number of
/// first-stage status mismatches.
pub fn nonanticipativity_violation(net: &FlowNetwork, s: &Schedule) -> (f64, usize) {
    let mut spread: f64 = 0.0;
    let mut groups: BTreeMap<(usize, usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for (a, arc) in net.arcs.iter().enumerate() {
        if arc.kind == ArcKind::Flow && arc.t < net.first_stage && net.vertices[arc.from].first_stage {
            groups.entry((arc.from, arc.to, arc.energy, arc.t)).or_default().push(s.flows[a]);
        }
    }
    for g in groups.values() {
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
    }
    let mut mismatches = 0;
    for (ui, u) in net.units.iter().enumerate() {
        if u.commitment && net.vertices[u.vertex].first_stage {
            for t in 0..net.first_stage {
                for w in 1..net.num_scenarios() {
                    if s.on[ui][w][t] != s.on[ui][0][t] {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    (spread, mismatches)
}

/// Checks extracted curves (exact monotonicity) and raw positions at equal
/// prices (within 1e-6). Returns the number of curves checked.
pub fn check_curves(net: &FlowNetwork, s: &Schedule) -> Result<usize, String> {
    let mut n = 0;
    for (mi, m) in net.markets.iter().enumerate() {
        for t in 0..net.first_stage {
            let c = s.bid_curve(net, mi, t).map_err(|e| e.to_string())?;
            for pair in c.steps.windows(2) {
                let ok = match m.side {
                    MarketSide::Selling => pair[1].1 >= pair[0].1,
                    MarketSide::Buying => pair[1].1 <= pair[0].1,
                };
                if !ok || pair[1].0 <= pair[0].0 {
                    return Err(format!("{} period {t}: {:?}", m.id, c.steps));
                }
            }
            let order = price_order(m, t, net.num_scenarios());
            for pair in order.windows(2) {
                if m.price.get(t, pair[0]) == m.price.get(t, pair[1]) {
                    let d = (s.position(net, mi, t, pair[0]) - s.position(net, mi, t, pair[1])).abs();
                    if d > 1e-6 {
                        return Err(format!("{} period {t}: equal prices, positions differ by {d}", m.id));
                    }
                }
            }
            n += 1;
        }
    }
    Ok(n)
}

/// Hourly synthetic history: a daily price shape with weekday premium and a
/// heat demand following a slow temperature swing, both with noise.
pub fn synthetic_store(from: chrono::NaiveDateTime, days: usize, seed: u64) -> SeriesStore {
    use chrono::{Datelike, Timelike};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = days * 24;
    let mut price = Vec::with_capacity(n);
    let mut buy = Vec::with_capacity(n);
    let mut heat = Vec::with_capacity(n);
    let mut heat_b = Vec::with_capacity(n);
    for k in 0..n {
        let t = from + chrono::Duration::hours(k as i64);
        let h = t.hour() as f64;
        let weekday = t.weekday().num_days_from_monday() < 5;
        let shape = 40.0 + 25.0 * (std::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0) + if weekday { 10.0 } else { 0.0 };
        let p = (shape + rng.random_range(-15.0..15.0)).max(1.0);
        price.push(p);
        buy.push(p + 8.0);
        let season = 5.5 + 1.5 * (k as f64 / (24.0 * 9.0)).sin();
        heat.push((season + 0.8 * (h / 24.0 * std::f64::consts::TAU).cos() + rng.random_range(-0.7..0.7)).max(2.0));
        heat_b.push((0.5 * season + rng.random_range(-0.4..0.4)).max(1.0));
    }
    let mut series = BTreeMap::new();
    for (name, values) in [("price", price), ("buy_price", buy), ("heat", heat), ("heat_b", heat_b)] {
        series.insert(name.to_string(), TimeSeries { start: from, values });
    }
    SeriesStore { series }
}

/// Two demand sites joined by a lossy pipe: a wood-chip boiler and a gas CHP
/// with commitment, two gas boilers, an electric boiler buying power, and a
/// heat tank at the first site.
pub const MINI_TOML: &str = r#"
name = "mini"
energy_types = ["WC", "NG", "H", "EL"]

[defaults]
horizon = 24
first_stage = 24

[uncertainty]
price = ["price"]
heat_flow = ["heat", "heat_b"]

[[vertices]]
id = "chips"
kind = "source"
energy = "WC"
cost_out.WC = 12.0

[[vertices]]
id = "gas"
kind = "source"
energy = "NG"
cost_out.NG = 28.0

[[vertices]]
id = "wcb"
kind = "unit"
commitment = true
first_stage = true
start_cost = 400.0
min_up = 4
min_down = 3
initial_status = true
initial_periods = 2
initial_production.H = 4.0
ramp_up.H = 3.0
ramp_down.H = 3.0
inflow.WC = { upper = 20.0 }
outflow.H = { lower = 2.0, upper = 8.0 }
conversion = [{ from = "WC", to = "H", factor = 1.05 }]

[[vertices]]
id = "chp"
kind = "unit"
commitment = true
first_stage = true
start_cost = 150.0
min_up = 3
min_down = 2
inflow.NG = { upper = 30.0 }
outflow.H = { lower = 1.5, upper = 5.0 }
outflow.EL = { upper = 30.0 }
conversion = [{ from = "NG", to = "H", factor = 0.45 }, { from = "NG", to = "EL", factor = 0.4 }]

[[vertices]]
id = "gb_a"
kind = "unit"
inflow.NG = { upper = 30.0 }
outflow.H = { upper = 10.0 }
cost_out.H = 1.0
conversion = [{ from = "NG", to = "H", factor = 0.95 }]

[[vertices]]
id = "gb_b"
kind = "unit"
inflow.NG = { upper = 30.0 }
outflow.H = { upper = 5.0 }
cost_out.H = 1.5
conversion = [{ from = "NG", to = "H", factor = 0.92 }]

[[vertices]]
id = "eb"
kind = "unit"
inflow.EL = { upper = 3.0 }
outflow.H = { upper = 2.97 }
conversion = [{ from = "EL", to = "H", factor = 0.99 }]

[[vertices]]
id = "tank"
kind = "storage"
energy = "H"
capacity = 15.0
loss = 0.005
max_flow = 6.0
initial_level = 5.0
target_level = 5.0

[[vertices]]
id = "pipe"
kind = "interconnection"
energy = "H"
loss = 0.04
inflow.H = { upper = 4.0 }

[[vertices]]
id = "site_a"
kind = "demand"
energy = "H"
inflow.H = { lower = { series = "heat" }, upper = { series = "heat" } }

[[vertices]]
id = "site_b"
kind = "demand"
energy = "H"
inflow.H = { lower = { series = "heat_b" }, upper = { series = "heat_b" } }

[[markets]]
id = "da"
side = "selling"
energy = "EL"
price = { series = "price" }

[[markets]]
id = "grid"
side = "buying"
energy = "EL"
price = { series = "buy_price" }

[[connections]]
from = "chips"
to = "wcb"
energy = "WC"

[[connections]]
from = "gas"
to = "chp"
energy = "NG"

[[connections]]
from = "gas"
to = "gb_a"
energy = "NG"

[[connections]]
from = "gas"
to = "gb_b"
energy = "NG"

[[connections]]
from = "wcb"
to = "site_a"
energy = "H"

[[connections]]
from = "chp"
to = "site_a"
energy = "H"

[[connections]]
from = "gb_a"
to = "site_a"
energy = "H"

[[connections]]
from = "wcb"
to = "tank"
energy = "H"

[[connections]]
from = "chp"
to = "tank"
energy = "H"

[[connections]]
from = "tank"
to = "site_a"
energy = "H"

[[connections]]
from = "wcb"
to = "pipe"
energy = "H"

[[connections]]
from = "tank"
to = "pipe"
energy = "H"

[[connections]]
from = "pipe"
to = "site_b"
energy = "H"

[[connections]]
from = "gb_b"
to = "site_b"
energy = "H"

[[connections]]
from = "eb"
to = "site_b"
energy = "H"

[[connections]]
from = "grid"
to = "eb"
energy = "EL"

[[connections]]
from = "chp"
to = "da"
energy = "EL"
"#;

pub fn mini_spec() -> SystemSpec {
    SystemSpec::from_toml_str(MINI_TOML).unwrap()
}
