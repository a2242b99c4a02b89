//! TOML system description.
//!
//! A config file declares energy types, vertices, connections and markets.
//! Any numeric parameter may be a scalar or a reference to a named time
//! series (`{ series = "demand", scale = 1.0 }`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Value(f64),
    Series {
        series: String,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Param {
    pub fn series_name(&self) -> Option<&str> {
        match self {
            Param::Value(_) => None,
            Param::Series { series, .. } => Some(series),
        }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Value(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(default)]
    pub lower: Option<Param>,
    #[serde(default)]
    pub upper: Option<Param>,
}

impl BoundSpec {
    pub fn new(lower: impl Into<Param>, upper: impl Into<Param>) -> Self {
        BoundSpec { lower: Some(lower.into()), upper: Some(upper.into()) }
    }

    pub fn upper(upper: impl Into<Param>) -> Self {
        BoundSpec { lower: None, upper: Some(upper.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Source,
    Demand,
    Unit,
    Storage,
    Interconnection,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Source => "source",
            VertexKind::Demand => "demand",
            VertexKind::Unit => "unit",
            VertexKind::Storage => "storage",
            VertexKind::Interconnection => "interconnection",
        }
    }
}

/// Output of `to` per unit of input `from`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conversion {
    pub from: String,
    pub to: String,
    pub factor: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub id: String,
    pub kind: Option<VertexKind>,
    /// Energy of single-energy vertices (sources, demands, storages, interconnections).
    #[serde(default)]
    pub energy: Option<String>,
    #[serde(default)]
    pub inflow: BTreeMap<String, BoundSpec>,
    #[serde(default)]
    pub outflow: BTreeMap<String, BoundSpec>,
    #[serde(default)]
    pub conversion: Vec<Conversion>,
    /// Cost per unit of energy entering the vertex.
    #[serde(default)]
    pub cost_in: BTreeMap<String, Param>,
    /// Cost per unit of energy leaving the vertex.
    #[serde(default)]
    pub cost_out: BTreeMap<String, Param>,

    #[serde(default)]
    pub commitment: bool,
    #[serde(default)]
    pub ramp_up: BTreeMap<String, f64>,
    #[serde(default)]
    pub ramp_down: BTreeMap<String, f64>,
    #[serde(default)]
    pub start_cost: f64,
    #[serde(default)]
    pub min_up: usize,
    #[serde(default)]
    pub min_down: usize,
    #[serde(default)]
    pub initial_status: bool,
    /// Periods at the start of the horizon during which the status is frozen.
    #[serde(default)]
    pub initial_periods: usize,
    #[serde(default)]
    pub initial_production: BTreeMap<String, f64>,
    #[serde(default)]
    pub excludes: Vec<String>,
    #[serde(default)]
    pub depends_on: Vec<String>,
    #[serde(default)]
    pub first_stage: bool,
    #[serde(default)]
    pub res: bool,

    #[serde(default)]
    pub capacity: Option<Param>,
    #[serde(default)]
    pub loss: Option<f64>,
    #[serde(default)]
    pub max_flow: Option<f64>,
    #[serde(default)]
    pub initial_level: Option<f64>,
    #[serde(default)]
    pub target_level: Option<f64>,
}

impl VertexSpec {
    pub fn kind(&self) -> VertexKind {
        self.kind.unwrap_or(VertexKind::Unit)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub from: String,
    pub to: String,
    pub energy: String,
    #[serde(default)]
    pub capacity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketSide {
    Selling,
    Buying,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    /// Also the id of the day-ahead vertex.
    pub id: String,
    pub side: MarketSide,
    pub energy: String,
    pub price: Param,
    #[serde(default)]
    pub penalty: Option<f64>,
    #[serde(default)]
    pub bidding: Option<bool>,
}

impl MarketSpec {
    pub fn bmb_id(&self) -> String {
        format!("{}_bmb", self.id)
    }

    pub fn bms_id(&self) -> String {
        format!("{}_bms", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub heat_energy: String,
    pub imbalance_penalty: f64,
    pub missing_heat_penalty: f64,
    pub excess_heat_penalty: f64,
    pub penalty_vertices: bool,
    pub horizon: usize,
    pub first_stage: usize,
    pub window: usize,
    pub step: usize,
    pub gap: f64,
    pub time_limit: f64,
    pub seed: u64,
    pub samples: usize,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            heat_energy: "H".into(),
            imbalance_penalty: 600.0,
            missing_heat_penalty: 10_000.0,
            excess_heat_penalty: 0.0,
            penalty_vertices: true,
            horizon: 168,
            first_stage: 24,
            window: 168,
            step: 24,
            gap: 1e-4,
            time_limit: 600.0,
            seed: 1,
            samples: 30,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    /// Directory of the series files, relative to the config file.
    pub dir: Option<PathBuf>,
    /// Series name to CSV file name.
    pub series: BTreeMap<String, String>,
    /// First period of the planning horizon, `YYYY-MM-DDTHH:MM:SS`.
    pub start: Option<String>,
}

/// Which series are uncertain and how they are grouped for scenario building.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintySpec {
    pub price: Vec<String>,
    pub heat_flow: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub name: String,
    pub energy_types: Vec<String>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub uncertainty: UncertaintySpec,
    #[serde(default)]
    pub vertices: Vec<VertexSpec>,
    #[serde(default)]
    pub connections: Vec<ConnectionSpec>,
    #[serde(default)]
    pub markets: Vec<MarketSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Validation(self.errors))
        }
    }
}

impl SystemSpec {
    pub fn from_toml_str(text: &str) -> Result<SystemSpec> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SystemSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = SystemSpec::from_toml_str(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    pub fn data_dir(&self) -> PathBuf {
        match &self.data.dir {
            Some(d) if d.is_absolute() => d.clone(),
            Some(d) => self.base_dir.join(d),
            None => self.base_dir.clone(),
        }
    }

    pub fn vertex(&self, id: &str) -> Option<&VertexSpec> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn market(&self, id: &str) -> Option<&MarketSpec> {
        self.markets.iter().find(|m| m.id == id)
    }

    /// Every series name referenced by a parameter.
    pub fn referenced_series(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut add = |p: &Param| {
            if let Some(s) = p.series_name() {
                out.insert(s.to_string());
            }
        };
        for v in &self.vertices {
            for b in v.inflow.values().chain(v.outflow.values()) {
                b.lower.iter().chain(b.upper.iter()).for_each(&mut add);
            }
            v.cost_in.values().chain(v.cost_out.values()).for_each(&mut add);
            v.capacity.iter().for_each(&mut add);
        }
        for m in &self.markets {
            add(&m.price);
        }
        out
    }

    /// Structural checks that do not need any data.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let energies: BTreeSet<&str> = self.energy_types.iter().map(String::as_str).collect();
        if energies.len() != self.energy_types.len() {
            r.errors.push("duplicate energy type".into());
        }
        let mut ids = BTreeSet::new();
        for id in self
            .vertices
            .iter()
            .map(|v| v.id.clone())
            .chain(self.markets.iter().flat_map(|m| [m.id.clone(), m.bmb_id(), m.bms_id()]))
        {
            if id.is_empty() || id.contains(char::is_whitespace) || id.contains("__") || id.starts_with('$') {
                r.errors.push(format!("invalid vertex id '{id}'"));
            }
            if !ids.insert(id.clone()) {
                r.errors.push(format!("duplicate vertex id '{id}'"));
            }
        }
        let check_energy = |r: &mut ValidationReport, e: &str, ctx: &str| {
            if !energies.contains(e) {
                r.errors.push(format!("{ctx}: unknown energy type '{e}'"));
            }
        };
        for v in &self.vertices {
            let ctx = format!("vertex '{}'", v.id);
            let kind = v.kind();
            match kind {
                VertexKind::Unit => {
                    if v.energy.is_some() {
                        r.errors.push(format!("{ctx}: units declare energies through inflow/outflow"));
                    }
                    if v.outflow.is_empty() {
                        r.errors.push(format!("{ctx}: unit without outflow energy"));
                    }
                }
                _ => match &v.energy {
                    None => r.errors.push(format!("{ctx}: {} needs an energy", kind.as_str())),
                    Some(e) => {
                        check_energy(&mut r, e, &ctx);
                        let stray = v.inflow.keys().chain(v.outflow.keys()).any(|k| k != e);
                        if stray {
                            r.errors.push(format!("{ctx}: bounds for an energy other than '{e}'"));
                        }
                    }
                },
            }
            for e in v.inflow.keys().chain(v.outflow.keys()).chain(v.cost_in.keys()).chain(v.cost_out.keys()) {
                check_energy(&mut r, e, &ctx);
            }
            if kind == VertexKind::Source && !v.inflow.is_empty() {
                r.errors.push(format!("{ctx}: sources have no inflow"));
            }
            if kind == VertexKind::Demand && !v.outflow.is_empty() {
                r.errors.push(format!("{ctx}: demands have no outflow"));
            }
            for (e, b) in v.inflow.iter().chain(v.outflow.iter()) {
                if let (Some(Param::Value(lo)), Some(Param::Value(hi))) = (&b.lower, &b.upper) {
                    if lo > hi {
                        r.errors.push(format!("{ctx}: lower bound above upper bound for '{e}'"));
                    }
                }
                for p in b.lower.iter().chain(b.upper.iter()) {
                    if let Param::Value(x) = p {
                        if x.is_nan() {
                            r.errors.push(format!("{ctx}: NaN bound"));
                        }
                    }
                }
            }
            for c in &v.conversion {
                if kind != VertexKind::Unit {
                    r.errors.push(format!("{ctx}: conversions are only allowed on units"));
                }
                if !v.inflow.contains_key(&c.from) {
                    r.errors.push(format!("{ctx}: conversion input '{}' is not an inflow energy", c.from));
                }
                if !v.outflow.contains_key(&c.to) {
                    r.errors.push(format!("{ctx}: conversion output '{}' is not an outflow energy", c.to));
                }
                if !(c.factor.is_finite() && c.factor > 0.0) {
                    r.errors.push(format!("{ctx}: conversion factor must be positive"));
                }
            }
            if kind == VertexKind::Unit && !v.inflow.is_empty() {
                for e in v.outflow.keys() {
                    if !v.conversion.iter().any(|c| &c.to == e) {
                        r.warnings.push(format!("{ctx}: output '{e}' is not tied to any input"));
                    }
                }
            }
            let unit_only = v.commitment
                || !v.ramp_up.is_empty()
                || !v.ramp_down.is_empty()
                || v.start_cost != 0.0
                || v.min_up > 0
                || v.min_down > 0
                || !v.excludes.is_empty()
                || !v.depends_on.is_empty()
                || v.first_stage;
            if unit_only && kind != VertexKind::Unit {
                r.errors.push(format!("{ctx}: unit attributes on a {}", kind.as_str()));
            }
            let needs_commitment = v.start_cost != 0.0
                || v.min_up > 0
                || v.min_down > 0
                || !v.excludes.is_empty()
                || !v.depends_on.is_empty()
                || v.initial_periods > 0;
            if needs_commitment && !v.commitment {
                r.errors.push(format!("{ctx}: start cost, min up/down times, exclusions and dependencies need commitment = true"));
            }
            if v.commitment {
                for (e, b) in v.inflow.iter().chain(v.outflow.iter()) {
                    if let Some(Param::Value(x)) = &b.upper {
                        if !x.is_finite() {
                            r.errors.push(format!("{ctx}: committed unit needs a finite upper bound for '{e}'"));
                        }
                    }
                    if b.upper.is_none() {
                        r.errors.push(format!("{ctx}: committed unit needs an upper bound for '{e}'"));
                    }
                }
            }
            for e in v.ramp_up.keys().chain(v.ramp_down.keys()).chain(v.initial_production.keys()) {
                if !v.outflow.contains_key(e) {
                    r.errors.push(format!("{ctx}: ramp or initial production for non-output '{e}'"));
                }
            }
            for other in v.excludes.iter().chain(v.depends_on.iter()) {
                match self.vertex(other) {
                    Some(o) if o.kind() == VertexKind::Unit && o.commitment => {}
                    Some(_) => r.errors.push(format!("{ctx}: '{other}' is not a unit with commitment")),
                    None => r.errors.push(format!("{ctx}: unknown unit '{other}'")),
                }
            }
            let storage_only = v.capacity.is_some()
                || v.max_flow.is_some()
                || v.initial_level.is_some()
                || v.target_level.is_some();
            if storage_only && kind != VertexKind::Storage {
                r.errors.push(format!("{ctx}: storage attributes on a {}", kind.as_str()));
            }
            if v.loss.is_some() && !matches!(kind, VertexKind::Storage | VertexKind::Interconnection) {
                r.errors.push(format!("{ctx}: loss is only allowed on storages and interconnections"));
            }
            if let Some(l) = v.loss {
                if !(0.0..1.0).contains(&l) {
                    r.errors.push(format!("{ctx}: loss must be in [0, 1)"));
                }
            }
            if kind == VertexKind::Storage {
                if v.capacity.is_none() {
                    r.errors.push(format!("{ctx}: storage needs a capacity"));
                }
                if let (Some(Param::Value(cap)), Some(init)) = (&v.capacity, v.initial_level) {
                    if init < 0.0 || init > *cap {
                        r.errors.push(format!("{ctx}: initial level outside [0, capacity]"));
                    }
                }
                if v.target_level.is_some_and(|t| t < 0.0) {
                    r.errors.push(format!("{ctx}: negative target level"));
                }
            }
        }
        for m in &self.markets {
            check_energy(&mut r, &m.energy, &format!("market '{}'", m.id));
            if m.penalty.is_some_and(|p| !p.is_finite() || p < 0.0) {
                r.errors.push(format!("market '{}': penalty must be finite and non-negative", m.id));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &self.connections {
            let ctx = format!("connection {} -> {}", c.from, c.to);
            check_energy(&mut r, &c.energy, &ctx);
            if !seen.insert((c.from.clone(), c.to.clone(), c.energy.clone())) {
                r.errors.push(format!("{ctx}: duplicate connection"));
            }
            if c.capacity.is_some_and(|x| x.is_nan() || x < 0.0) {
                r.errors.push(format!("{ctx}: negative capacity"));
            }
            if c.from == c.to {
                r.errors.push(format!("{ctx}: self loop"));
                continue;
            }
            let from = self.endpoint(&c.from);
            let to = self.endpoint(&c.to);
            let (Some(from), Some(to)) = (from, to) else {
                r.errors.push(format!("{ctx}: unknown endpoint"));
                continue;
            };
            use VertexKind::*;
            let allowed = matches!(
                (from.kind, to.kind),
                (Source, Unit | Storage | Demand | Interconnection)
                    | (Unit, Storage | Demand | Unit | Interconnection)
                    | (Storage, Demand | Interconnection)
                    | (Interconnection, Storage | Demand | Interconnection)
            );
            if !allowed {
                r.errors.push(format!("{ctx}: {} -> {} is not an allowed connection", from.kind.as_str(), to.kind.as_str()));
            }
            if !from.emits(&c.energy) {
                r.errors.push(format!("{ctx}: '{}' does not emit '{}'", c.from, c.energy));
            }
            if !to.accepts(&c.energy) {
                r.errors.push(format!("{ctx}: '{}' does not accept '{}'", c.to, c.energy));
            }
        }
        r
    }

    fn endpoint(&self, id: &str) -> Option<Endpoint> {
        if let Some(v) = self.vertex(id) {
            let kind = v.kind();
            let (emit, accept): (Vec<String>, Vec<String>) = match kind {
                VertexKind::Unit => (v.outflow.keys().cloned().collect(), v.inflow.keys().cloned().collect()),
                _ => {
                    let e: Vec<String> = v.energy.iter().cloned().collect();
                    (e.clone(), e)
                }
            };
            return Some(Endpoint { kind, emit, accept });
        }
        let m = self.market(id)?;
        let kind = match m.side {
            MarketSide::Selling => VertexKind::Demand,
            MarketSide::Buying => VertexKind::Source,
        };
        Some(Endpoint { kind, emit: vec![m.energy.clone()], accept: vec![m.energy.clone()] })
    }
}

struct Endpoint {
    kind: VertexKind,
    emit: Vec<String>,
    accept: Vec<String>,
}

impl Endpoint {
    fn emits(&self, e: &str) -> bool {
        self.kind != VertexKind::Demand && self.emit.iter().any(|x| x == e)
    }

    fn accepts(&self, e: &str) -> bool {
        self.kind != VertexKind::Source && self.accept.iter().any(|x| x == e)
    }
}
