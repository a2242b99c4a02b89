//! Best-bound branch-and-bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::problem::MilpProblem;
use crate::simplex::{BasisSnapshot, LpOptions, LpSolver, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub gap_tol: f64,
    pub integrality_tol: f64,
    pub feasibility_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Ignores the time limit so that repeated runs explore the same tree.
    pub deterministic: bool,
    /// Emit a progress line every this many nodes; zero disables it.
    pub log_every: usize,
    /// Record one [`NodeRecord`] per processed node.
    pub record_nodes: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            gap_tol: 1e-4,
            integrality_tol: 1e-6,
            feasibility_tol: 1e-7,
            time_limit: Some(Duration::from_secs(600)),
            node_limit: None,
            deterministic: false,
            log_every: 1000,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MilpStatus {
    Optimal,
    /// A limit was hit with an incumbent available.
    FeasibleWithGap,
    Infeasible,
    Unbounded,
    /// Node limit hit before any incumbent was found.
    NodeLimit,
    /// Time limit hit before any incumbent was found.
    TimeLimit,
    NumericalFailure,
}

impl MilpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::FeasibleWithGap => "feasible-with-gap",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
            MilpStatus::NodeLimit => "node-limit",
            MilpStatus::TimeLimit => "time-limit",
            MilpStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// Progress after one processed node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub node: usize,
    pub depth: usize,
    /// Relaxation objective of this node, infinite if infeasible.
    pub lp_objective: f64,
    pub incumbent: f64,
    pub best_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub x: Option<Vec<f64>>,
    /// Incumbent objective, `+inf` without one.
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub trace: Vec<NodeRecord>,
}

impl MilpOutcome {
    pub fn has_incumbent(&self) -> bool {
        self.x.is_some()
    }
}

/// Relative gap between an incumbent and a lower bound.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    if !bound.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1e-10)).max(0.0)
}

const ABS_GAP: f64 = 1e-9;

fn gap_closed(incumbent: f64, bound: f64, tol: f64) -> bool {
    incumbent - bound <= ABS_GAP || relative_gap(incumbent, bound) <= tol
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    changes: Vec<(usize, f64, f64)>,
    basis: Option<Arc<BasisSnapshot>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest element: lowest bound, then deepest, then
    // lowest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// Solves `problem` to within the configured relative gap.
pub fn solve_milp(problem: &MilpProblem, params: &SolveParams) -> MilpOutcome {
    let started = Instant::now();
    let lp_opts = LpOptions {
        feasibility_tol: params.feasibility_tol,
        ..LpOptions::default()
    };
    let mut lp = LpSolver::new(problem, lp_opts);
    let integer: Vec<usize> = problem
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind.is_integral())
        .map(|(j, _)| j)
        .collect();
    let root_bounds: Vec<(f64, f64)> = (0..problem.num_vars()).map(|j| lp.bounds(j)).collect();
    for &j in &integer {
        let (lo, hi) = root_bounds[j];
        lp.set_bounds(j, lo.ceil(), hi.floor());
    }
    let tightened: Vec<(f64, f64)> = (0..problem.num_vars()).map(|j| lp.bounds(j)).collect();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        changes: Vec::new(),
        basis: None,
    });
    let mut next_id = 1;
    let mut incumbent = f64::INFINITY;
    let mut best_x: Option<Vec<f64>> = None;
    let mut nodes = 0usize;
    let mut applied: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut limit: Option<MilpStatus> = None;
    let mut failure: Option<MilpStatus> = None;
    let mut last_bound = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if best_x.is_some() && gap_closed(incumbent, node.bound, params.gap_tol) {
            heap.push(node);
            break;
        }
        if let Some(max) = params.node_limit {
            if nodes >= max {
                heap.push(node);
                limit = Some(MilpStatus::NodeLimit);
                break;
            }
        }
        if !params.deterministic {
            if let Some(t) = params.time_limit {
                if started.elapsed() >= t {
                    heap.push(node);
                    limit = Some(MilpStatus::TimeLimit);
                    break;
                }
            }
        }

        for &j in &applied {
            lp.set_bounds(j, tightened[j].0, tightened[j].1);
        }
        applied.clear();
        for &(j, lo, hi) in &node.changes {
            let (cur_lo, cur_hi) = lp.bounds(j);
            lp.set_bounds(j, cur_lo.max(lo), cur_hi.min(hi));
            applied.push(j);
        }
        if let Some(b) = &node.basis {
            lp.load_snapshot(b);
        }
        let sol = lp.solve();
        nodes += 1;

        let mut lp_obj = f64::INFINITY;
        match sol.status {
            LpStatus::Optimal => lp_obj = sol.objective,
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                if node.id == 0 {
                    failure = Some(MilpStatus::Unbounded);
                    break;
                }
            }
            LpStatus::IterationLimit | LpStatus::NumericalFailure => {
                log::warn!("node {} relaxation failed: {:?}", node.id, sol.status);
                if node.id == 0 {
                    failure = Some(MilpStatus::NumericalFailure);
                    break;
                }
            }
        }

        if lp_obj.is_finite() && !(best_x.is_some() && gap_closed(incumbent, lp_obj, params.gap_tol)) {
            let branch = most_fractional(&sol.x, &integer, params.integrality_tol);
            match branch {
                None => {
                    if lp_obj < incumbent {
                        let mut x = sol.x.clone();
                        for &j in &integer {
                            x[j] = x[j].round();
                        }
                        incumbent = problem.objective_value(&x);
                        best_x = Some(x);
                    }
                }
                Some(j) => {
                    if node.id == 0 {
                        if let Some((obj, x)) = round_root(&lp, &sol.x, &integer, problem) {
                            if obj < incumbent {
                                incumbent = obj;
                                best_x = Some(x);
                            }
                        }
                    }
                    let snap = Arc::new(lp.snapshot());
                    let v = sol.x[j];
                    let (lo, hi) = lp.bounds(j);
                    let mut down = node.changes.clone();
                    down.push((j, lo, v.floor()));
                    let mut up = node.changes;
                    up.push((j, v.ceil(), hi));
                    for changes in [down, up] {
                        heap.push(Node {
                            id: next_id,
                            depth: node.depth + 1,
                            bound: lp_obj,
                            changes,
                            basis: Some(Arc::clone(&snap)),
                        });
                        next_id += 1;
                    }
                }
            }
        }

        let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
        let best_bound = open.min(incumbent).max(last_bound);
        last_bound = best_bound;
        if params.record_nodes {
            trace.push(NodeRecord {
                node: node.id,
                depth: node.depth,
                lp_objective: lp_obj,
                incumbent,
                best_bound,
            });
        }
        if params.log_every > 0 && nodes % params.log_every == 0 {
            log::info!(
                "node {}, depth {}, incumbent {:.6}, bound {:.6}, gap {:.6}",
                nodes,
                node.depth,
                incumbent,
                best_bound,
                relative_gap(incumbent, best_bound)
            );
        }
    }

    let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
    let best_bound = match failure {
        Some(_) => f64::NEG_INFINITY,
        None => open.min(incumbent).max(last_bound.min(incumbent)),
    };
    let status = match (failure, limit, best_x.is_some()) {
        (Some(s), _, _) => s,
        (None, Some(_), true) => {
            if gap_closed(incumbent, best_bound, params.gap_tol) {
                MilpStatus::Optimal
            } else {
                MilpStatus::FeasibleWithGap
            }
        }
        (None, Some(l), false) => l,
        (None, None, true) => MilpStatus::Optimal,
        (None, None, false) => MilpStatus::Infeasible,
    };
    let gap = if best_x.is_some() {
        relative_gap(incumbent, best_bound)
    } else {
        f64::INFINITY
    };
    if params.log_every > 0 {
        log::info!(
            "finished: {} after {} nodes, incumbent {:.6}, bound {:.6}, gap {:.6}",
            status.as_str(),
            nodes,
            incumbent,
            best_bound,
            gap
        );
    }
    MilpOutcome {
        status,
        x: best_x,
        objective: incumbent,
        best_bound,
        gap,
        nodes,
        lp_iterations: lp.iterations(),
        wall_time: started.elapsed(),
        trace,
    }
}

/// Integer variable farthest from integrality; ties go to the lowest index.
fn most_fractional(x: &[f64], integer: &[usize], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in integer {
        let frac = (x[j] - x[j].round()).abs();
        if frac > tol && best.is_none_or(|(_, f)| frac > f) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// Rounds the root relaxation, fixes the integers and re-solves for the
/// continuous part.
fn round_root(lp: &LpSolver, x: &[f64], integer: &[usize], problem: &MilpProblem) -> Option<(f64, Vec<f64>)> {
    let mut fixed = lp.clone();
    for &j in integer {
        let (lo, hi) = fixed.bounds(j);
        let v = x[j].round().clamp(lo, hi);
        fixed.set_bounds(j, v, v);
    }
    let sol = fixed.solve();
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let mut xr = sol.x;
    for &j in integer {
        xr[j] = xr[j].round();
    }
    Some((problem.objective_value(&xr), xr))
}
