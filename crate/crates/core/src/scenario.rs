//! Scenario sets for the stochastic model and synthetic samples for
//! out-of-sample testing.

use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDateTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Triangular};

use crate::error::{Error, Result};
use crate::parallel::{self, Parallelism};
use crate::series::{Bundle, SeriesStore};

/// Weights of the three historical weeks, most recent first.
pub const HISTORY_WEIGHTS: [f64; 3] = [0.5, 0.33, 0.17];
pub const WEEK_HOURS: usize = 168;
const PROBABILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub probability: f64,
    pub data: Bundle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub start: NaiveDateTime,
    pub len: usize,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn deterministic(start: NaiveDateTime, data: Bundle) -> Result<ScenarioSet> {
        let len = data.values().next().map_or(0, Vec::len);
        let set = ScenarioSet { start, len, scenarios: vec![Scenario { label: "det".into(), probability: 1.0, data }] };
        set.check()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Adds series that are known in advance to every scenario.
    pub fn with_fixed(mut self, fixed: &Bundle) -> Result<ScenarioSet> {
        for s in &mut self.scenarios {
            for (k, v) in fixed {
                s.data.entry(k.clone()).or_insert_with(|| v.clone());
            }
        }
        self.check()?;
        Ok(self)
    }

    pub fn value(&self, scenario: usize, name: &str, t: usize) -> Option<f64> {
        self.scenarios.get(scenario)?.data.get(name)?.get(t).copied()
    }

    pub fn check(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Data("empty scenario set".into()));
        }
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL || self.scenarios.iter().any(|s| !(s.probability > 0.0)) {
            return Err(Error::Data(format!("scenario probabilities must be positive and sum to 1 (got {total})")));
        }
        let keys: BTreeSet<&String> = self.scenarios[0].data.keys().collect();
        for s in &self.scenarios {
            if s.data.keys().collect::<BTreeSet<_>>() != keys {
                return Err(Error::Data(format!("scenario '{}' has different series", s.label)));
            }
            if let Some((k, _)) = s.data.iter().find(|(_, v)| v.len() < self.len) {
                return Err(Error::Data(format!("series '{k}' of scenario '{}' is shorter than {}", s.label, self.len)));
            }
        }
        Ok(())
    }

    /// Probability-weighted mean as a single scenario.
    pub fn expected(&self) -> ScenarioSet {
        let mut data = Bundle::new();
        for key in self.scenarios[0].data.keys() {
            let mut mean = vec![0.0; self.len];
            for s in &self.scenarios {
                for (m, v) in mean.iter_mut().zip(&s.data[key]) {
                    *m += s.probability * v;
                }
            }
            data.insert(key.clone(), mean);
        }
        ScenarioSet {
            start: self.start,
            len: self.len,
            scenarios: vec![Scenario { label: "expected".into(), probability: 1.0, data }],
        }
    }

    /// The single scenario `w` with probability one.
    pub fn single(&self, w: usize) -> ScenarioSet {
        let mut s = self.scenarios[w].clone();
        s.probability = 1.0;
        ScenarioSet { start: self.start, len: self.len, scenarios: vec![s] }
    }

    /// Keeps the first `len` periods.
    pub fn truncated(&self, len: usize) -> ScenarioSet {
        let mut out = self.clone();
        out.len = len.min(self.len);
        for s in &mut out.scenarios {
            for v in s.data.values_mut() {
                v.truncate(out.len);
            }
        }
        out
    }
}

/// Cartesian combination of historical weeks.
///
/// `weeks[k]` holds every uncertain series for the k-th most recent week.
/// Price series follow one week and heat-flow series another; the scenario
/// index is `price_week * n + heat_week` and its probability is the product
/// of the week weights. A group with no series collapses to a single week.
pub fn weighted_history_scenarios(
    weeks: &[Bundle],
    price: &[String],
    heat: &[String],
    weights: &[f64],
    start: NaiveDateTime,
) -> Result<ScenarioSet> {
    if weeks.is_empty() || weeks.len() != weights.len() {
        return Err(Error::Data("need one weight per historical week".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Data("week weights must be positive".into()));
    }
    let len = weeks[0].values().next().map_or(0, Vec::len);
    for (k, week) in weeks.iter().enumerate() {
        for key in price.iter().chain(heat) {
            match week.get(key) {
                Some(v) if v.len() == len => {}
                Some(_) => return Err(Error::Data(format!("week {k}: series '{key}' has the wrong length"))),
                None => return Err(Error::Data(format!("week {k}: missing series '{key}'"))),
            }
        }
    }
    let n = weeks.len();
    let price_weeks: Vec<usize> = if price.is_empty() { vec![0] } else { (0..n).collect() };
    let heat_weeks: Vec<usize> = if heat.is_empty() { vec![0] } else { (0..n).collect() };
    let weight = |group_empty: bool, k: usize| if group_empty { 1.0 } else { weights[k] };
    let mut scenarios = Vec::new();
    for &p in &price_weeks {
        for &h in &heat_weeks {
            let mut data = Bundle::new();
            for key in price {
                data.insert(key.clone(), weeks[p][key].clone());
            }
            for key in heat {
                data.insert(key.clone(), weeks[h][key].clone());
            }
            scenarios.push(Scenario {
                label: format!("p{p}h{h}"),
                probability: weight(price.is_empty(), p) * weight(heat.is_empty(), h),
                data,
            });
        }
    }
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    for s in &mut scenarios {
        s.probability /= total;
    }
    let set = ScenarioSet { start, len, scenarios };
    set.check()?;
    Ok(set)
}

/// The `n` weeks before `start`, most recent first, each `len` hours long.
pub fn history_weeks(
    store: &SeriesStore,
    keys: &[String],
    start: NaiveDateTime,
    len: usize,
    n: usize,
) -> Result<Vec<Bundle>> {
    if len > WEEK_HOURS {
        return Err(Error::Data(format!("historical weeks cover at most {WEEK_HOURS} periods, not {len}")));
    }
    (1..=n)
        .map(|k| store.bundle(keys, start - Duration::hours((k * WEEK_HOURS) as i64), len))
        .collect()
}

/// Scenario set for a horizon starting at `start`: uncertain series from the
/// weighted history, every other referenced series from the realized data.
pub fn planning_scenarios(
    store: &SeriesStore,
    price: &[String],
    heat: &[String],
    known: &[String],
    start: NaiveDateTime,
    len: usize,
) -> Result<ScenarioSet> {
    let uncertain: Vec<String> = price.iter().chain(heat).cloned().collect();
    let weeks = history_weeks(store, &uncertain, start, len, HISTORY_WEIGHTS.len())?;
    let set = weighted_history_scenarios(&weeks, price, heat, &HISTORY_WEIGHTS, start)?;
    let fixed = store.bundle(known, start, len)?;
    set.with_fixed(&fixed)
}

fn rng_for(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ i as u64)
}

/// Independent triangular draws per series and hour.
///
/// For each hour the historical values give the mode (median) and the
/// support, widened by 5% of the magnitude of the extremes. Series listed in
/// `nonnegative` are clamped at zero. Sample `i` only depends on `seed ^ i`.
pub fn sample_triangular(
    weeks: &[Bundle],
    keys: &[String],
    nonnegative: &BTreeSet<String>,
    count: usize,
    seed: u64,
    par: Parallelism,
) -> Result<Vec<Bundle>> {
    if weeks.is_empty() {
        return Err(Error::Data("no history to sample from".into()));
    }
    let mut dists: Vec<(String, Vec<Triangular<f64>>)> = Vec::new();
    for key in keys {
        let cols: Vec<&Vec<f64>> = weeks
            .iter()
            .map(|w| w.get(key).ok_or_else(|| Error::Data(format!("missing series '{key}'"))))
            .collect::<Result<_>>()?;
        let len = cols[0].len();
        if cols.iter().any(|c| c.len() != len) {
            return Err(Error::Data(format!("series '{key}' differs in length between weeks")));
        }
        let per_hour = (0..len)
            .map(|h| {
                let mut vals: Vec<f64> = cols.iter().map(|c| c[h]).collect();
                vals.sort_by(f64::total_cmp);
                let (lo, hi) = triangular_support(&vals);
                let mode = median(&vals).clamp(lo, hi);
                Triangular::new(lo, hi, mode).map_err(|e| Error::Data(format!("series '{key}' hour {h}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        dists.push((key.clone(), per_hour));
    }
    Ok(parallel::map_range(count, par, |i| {
        let mut rng = rng_for(seed, i);
        let mut out = Bundle::new();
        for (key, per_hour) in &dists {
            let clamp = nonnegative.contains(key);
            let vals = per_hour
                .iter()
                .map(|d| {
                    let v = d.sample(&mut rng);
                    if clamp { v.max(0.0) } else { v }
                })
                .collect();
            out.insert(key.clone(), vals);
        }
        out
    }))
}

/// `[min - 5%|min|, max + 5%|max|]` of sorted values.
pub fn triangular_support(sorted: &[f64]) -> (f64, f64) {
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    (min - 0.05 * min.abs(), max + 0.05 * max.abs())
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) }
}

pub fn is_weekend(t: NaiveDateTime) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub block_hours: usize,
    pub days: usize,
    pub count: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { block_hours: 4, days: 7, count: 30, seed: 1 }
    }
}

/// Block bootstrap over whole days of history.
///
/// The history is split into an early and a late half; the first
/// `ceil(count / 2)` samples draw from the early half, the rest from the
/// late half. For each output day and block slot a historical day of the
/// same kind (weekday or weekend) is drawn and the block is copied for all
/// series at once, so cross-series correlation within a block is kept.
pub fn block_bootstrap(
    history: &Bundle,
    history_start: NaiveDateTime,
    out_start: NaiveDateTime,
    cfg: &BootstrapConfig,
    par: Parallelism,
) -> Result<Vec<Bundle>> {
    if cfg.block_hours == 0 || 24 % cfg.block_hours != 0 {
        return Err(Error::Data("block length must divide 24 hours".into()));
    }
    let len = history.values().next().map_or(0, Vec::len);
    if history.values().any(|v| v.len() != len) {
        return Err(Error::Data("history series differ in length".into()));
    }
    if len % 24 != 0 || len < 48 {
        return Err(Error::Data("history must hold at least two whole days".into()));
    }
    let days = len / 24;
    let half = days / 2;
    let groups = [(0..half).collect::<Vec<_>>(), (half..days).collect::<Vec<_>>()];
    let day_weekend = |d: usize| is_weekend(history_start + Duration::days(d as i64));
    let candidates: Vec<[Vec<usize>; 2]> = groups
        .iter()
        .map(|g| {
            let wk: Vec<usize> = g.iter().copied().filter(|&d| !day_weekend(d)).collect();
            let we: Vec<usize> = g.iter().copied().filter(|&d| day_weekend(d)).collect();
            [wk, we]
        })
        .collect();
    for d in 0..cfg.days {
        let weekend = is_weekend(out_start + Duration::days(d as i64));
        for (gi, c) in candidates.iter().enumerate() {
            let needed = if gi == 0 { cfg.count > 0 } else { cfg.count > 1 };
            if needed && c[weekend as usize].is_empty() {
                let kind = if weekend { "weekend" } else { "weekday" };
                return Err(Error::Data(format!("history half {gi} has no {kind} to draw from")));
            }
        }
    }
    let first_group = cfg.count.div_ceil(2);
    let slots = 24 / cfg.block_hours;
    Ok(parallel::map_range(cfg.count, par, |i| {
        let mut rng = rng_for(cfg.seed, i);
        let group = &candidates[usize::from(i >= first_group)];
        let mut out: Bundle = history.keys().map(|k| (k.clone(), Vec::with_capacity(cfg.days * 24))).collect();
        for d in 0..cfg.days {
            let pool = &group[is_weekend(out_start + Duration::days(d as i64)) as usize];
            for b in 0..slots {
                let src = pool[rng.random_range(0..pool.len())];
                let from = src * 24 + b * cfg.block_hours;
                for (k, v) in history {
                    out.get_mut(k).unwrap().extend_from_slice(&v[from..from + cfg.block_hours]);
                }
            }
        }
        out
    }))
}
