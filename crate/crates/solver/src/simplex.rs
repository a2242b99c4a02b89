//! Bounded-variable revised simplex.
//!
//! Each row `i` gets a logical variable `r_i = a_i x` whose bounds are the
//! row bounds, so the working system is `[A | -I] (x, r) = 0` with only
//! simple bounds on every column. The primal method minimizes the sum of
//! infeasibilities before the true objective. The dual method is used to
//! reoptimize after bound changes when the current basis stays dual
//! feasible, which is the common case inside branch-and-bound.

use crate::lu::BasisFactor;
use crate::problem::MilpProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The factorization or the iterates broke down and could not be
    /// recovered.
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// `None` selects a limit proportional to the problem size.
    pub max_iterations: Option<usize>,
    pub refactor_interval: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            max_iterations: None,
            refactor_interval: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the structural variables.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with reduced costs `c - A^T y`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Statuses of all structural and logical variables, used to warm start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSnapshot {
    status: Vec<VarStatus>,
}

impl BasisSnapshot {
    pub fn statuses(&self) -> &[VarStatus] {
        &self.status
    }
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 50;

enum DualOutcome {
    Done(LpStatus),
    LostDualFeasibility,
}

/// Solves the continuous relaxation of `problem`.
pub fn solve_lp(problem: &MilpProblem, options: LpOptions) -> LpSolution {
    LpSolver::new(problem, options).solve()
}

#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_start: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    x: Vec<f64>,
    factor: BasisFactor,
    factor_valid: bool,
    primal_valid: bool,
    opts: LpOptions,
    iterations: usize,
    scratch: Vec<f64>,
    // Dual steepest-edge weights by basis position.
    dse: Vec<f64>,
}

impl LpSolver {
    pub fn new(problem: &MilpProblem, opts: LpOptions) -> Self {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut row_start = Vec::with_capacity(m + 1);
        let mut row_col = Vec::new();
        let mut row_val = Vec::new();
        row_start.push(0);
        for (i, c) in problem.constraints().iter().enumerate() {
            for &(v, a) in &c.coeffs {
                per_col[v.0].push((i, a));
                row_col.push(v.0);
                row_val.push(a);
            }
            row_start.push(row_col.len());
        }
        let mut col_start = Vec::with_capacity(n + 1);
        let mut col_row = Vec::new();
        let mut col_val = Vec::new();
        col_start.push(0);
        for col in &per_col {
            for &(i, a) in col {
                col_row.push(i);
                col_val.push(a);
            }
            col_start.push(col_row.len());
        }

        let mut cost = Vec::with_capacity(n + m);
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in problem.variables() {
            cost.push(v.objective);
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for c in problem.constraints() {
            cost.push(0.0);
            lower.push(c.bounds.lower());
            upper.push(c.bounds.upper());
        }

        let mut s = LpSolver {
            n,
            m,
            col_start,
            col_row,
            col_val,
            row_start,
            row_col,
            row_val,
            cost,
            lower,
            upper,
            status: vec![VarStatus::AtLower; n + m],
            basis: (n..n + m).collect(),
            x: vec![0.0; n + m],
            factor: BasisFactor::default(),
            factor_valid: false,
            primal_valid: false,
            opts,
            iterations: 0,
            scratch: Vec::new(),
            dse: vec![1.0; m],
        };
        for j in 0..n {
            s.status[j] = s.default_status(j);
            s.x[j] = s.nonbasic_value(j);
        }
        for j in n..n + m {
            s.status[j] = VarStatus::Basic;
        }
        s
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural variable `j`, keeping the basis.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            let keep_upper = self.status[j] == VarStatus::AtUpper && upper.is_finite();
            self.status[j] = if keep_upper { VarStatus::AtUpper } else { self.default_status(j) };
            let v = self.nonbasic_value(j);
            if v != self.x[j] {
                self.x[j] = v;
                self.primal_valid = false;
            }
        }
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            status: self.status.clone(),
        }
    }

    /// Installs a previously saved basis. Snapshots of a different shape are
    /// ignored.
    pub fn load_snapshot(&mut self, snap: &BasisSnapshot) {
        if snap.status.len() != self.n + self.m {
            return;
        }
        let basic: Vec<usize> = (0..self.n + self.m)
            .filter(|&j| snap.status[j] == VarStatus::Basic)
            .collect();
        if basic.len() != self.m {
            return;
        }
        self.status.clone_from(&snap.status);
        self.basis = basic;
        self.dse.iter_mut().for_each(|w| *w = 1.0);
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                let st = self.status[j];
                let ok = match st {
                    VarStatus::AtLower => self.lower[j].is_finite(),
                    VarStatus::AtUpper => self.upper[j].is_finite(),
                    _ => !self.lower[j].is_finite() && !self.upper[j].is_finite(),
                };
                if !ok {
                    self.status[j] = self.default_status(j);
                }
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.factor_valid = false;
        self.primal_valid = false;
    }

    fn default_status(&self, j: usize) -> VarStatus {
        if self.lower[j].is_finite() {
            VarStatus::AtLower
        } else if self.upper[j].is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j],
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Free | VarStatus::Basic => 0.0,
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            ColumnIter::Structural(self.col_row[r.clone()].iter().zip(self.col_val[r].iter()))
        } else {
            ColumnIter::Logical(Some(j - self.n))
        }
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for e in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[e] * y[self.col_row[e]];
            }
            s
        } else {
            -y[j - self.n]
        }
    }

    fn refactor(&mut self) -> bool {
        for _ in 0..4 {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j).collect()).collect();
            match BasisFactor::factorize(self.m, &cols) {
                Ok(f) => {
                    self.factor = f;
                    self.factor_valid = true;
                    return true;
                }
                Err(sing) => {
                    log::debug!("singular basis, replacing {} columns", sing.positions.len());
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.basis[pos];
                        let logical = self.n + row;
                        if self.status[logical] == VarStatus::Basic {
                            continue;
                        }
                        self.status[out] = self.default_status(out);
                        if self.status[out] == VarStatus::AtLower
                            && self.upper[out].is_finite()
                            && (self.x[out] - self.upper[out]).abs() < (self.x[out] - self.lower[out]).abs()
                        {
                            self.status[out] = VarStatus::AtUpper;
                        }
                        self.x[out] = self.nonbasic_value(out);
                        self.basis[pos] = logical;
                        self.status[logical] = VarStatus::Basic;
                        self.dse[pos] = 1.0;
                    }
                    self.primal_valid = false;
                }
            }
        }
        self.factor_valid = false;
        false
    }

    fn recompute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for (i, a) in self.column(j) {
                    rhs[i] -= a * v;
                }
            }
        }
        self.factor.ftran(&mut rhs, &mut self.scratch);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[pos];
        }
        self.primal_valid = true;
    }

    fn ensure_ready(&mut self) -> bool {
        if !self.factor_valid && !self.refactor() {
            return false;
        }
        if !self.primal_valid {
            self.recompute_primal();
        }
        true
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - self.opts.feasibility_tol {
            self.lower[j] - v
        } else if v > self.upper[j] + self.opts.feasibility_tol {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) > 0.0)
    }

    fn row_duals(&mut self, cb: Vec<f64>) -> Vec<f64> {
        let mut y = cb;
        self.factor.btran(&mut y, &mut self.scratch);
        y
    }

    fn phase2_duals(&mut self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.row_duals(cb)
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.dot_column(j, y)
    }

    fn ftran_column(&mut self, q: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        for (i, v) in self.column(q) {
            a[i] += v;
        }
        self.factor.ftran(&mut a, &mut self.scratch);
        a
    }

    fn iteration_cap(&self) -> usize {
        self.opts
            .max_iterations
            .unwrap_or(20_000 + 50 * (self.n + self.m))
    }

    fn maybe_refactor(&mut self) -> bool {
        let grown = self.factor.eta_nnz() > 4 * self.factor.lu_nnz() + 10 * self.m;
        if self.factor.num_updates() >= self.opts.refactor_interval || grown {
            if !self.refactor() {
                return false;
            }
            self.recompute_primal();
        }
        true
    }

    fn replace_basic(&mut self, pos: usize, entering: usize, leave_status: VarStatus, alpha: &[f64]) {
        let leaving = self.basis[pos];
        self.status[leaving] = if self.lower[leaving] == self.upper[leaving] {
            VarStatus::AtLower
        } else {
            leave_status
        };
        if !self.lower[leaving].is_finite() && !self.upper[leaving].is_finite() {
            self.status[leaving] = VarStatus::Free;
        }
        self.x[leaving] = self.nonbasic_value(leaving);
        self.basis[pos] = entering;
        self.status[entering] = VarStatus::Basic;
        self.factor.update(pos, alpha);
    }

    /// Primal simplex with a composite phase 1.
    fn primal(&mut self) -> LpStatus {
        let tol_d = self.opts.optimality_tol;
        let tol_p = self.opts.feasibility_tol;
        let cap = self.iteration_cap();
        let mut degenerate_streak = 0usize;
        let mut fresh = false;
        loop {
            if self.iterations >= cap {
                return LpStatus::IterationLimit;
            }
            if !self.maybe_refactor() {
                return LpStatus::NumericalFailure;
            }

            let mut cb = vec![0.0; self.m];
            let mut phase1 = false;
            for (pos, &j) in self.basis.iter().enumerate() {
                if self.x[j] < self.lower[j] - tol_p {
                    cb[pos] = -1.0;
                    phase1 = true;
                } else if self.x[j] > self.upper[j] + tol_p {
                    cb[pos] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for (pos, &j) in self.basis.iter().enumerate() {
                    cb[pos] = self.cost[j];
                }
            }
            let y = self.row_duals(cb);

            let bland = degenerate_streak > BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_column(j, &y);
                let dir = match st {
                    VarStatus::AtLower if d < -tol_d => 1.0,
                    VarStatus::AtUpper if d > tol_d => -1.0,
                    VarStatus::Free if d.abs() > tol_d => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                if !fresh && self.factor.num_updates() > 0 {
                    if !self.refactor() {
                        return LpStatus::NumericalFailure;
                    }
                    self.recompute_primal();
                    fresh = true;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            fresh = false;

            let alpha = self.ftran_column(q);

            // Two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            let mut rows: Vec<(usize, f64, VarStatus)> = Vec::new();
            for (pos, &a) in alpha.iter().enumerate() {
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[pos];
                let rate = -dir * a;
                let xb = self.x[j];
                let (dist, to) = if rate > 0.0 {
                    if phase1 && xb < self.lower[j] - tol_p {
                        (self.lower[j] - xb, VarStatus::AtLower)
                    } else if self.upper[j].is_finite() && xb <= self.upper[j] + tol_p {
                        (self.upper[j] - xb, VarStatus::AtUpper)
                    } else {
                        continue;
                    }
                } else if phase1 && xb > self.upper[j] + tol_p {
                    (xb - self.upper[j], VarStatus::AtUpper)
                } else if self.lower[j].is_finite() && xb >= self.lower[j] - tol_p {
                    (xb - self.lower[j], VarStatus::AtLower)
                } else {
                    continue;
                };
                let relaxed = if bland { dist } else { dist + tol_p };
                theta_max = theta_max.min(relaxed.max(0.0) / rate.abs());
                rows.push((pos, dist.max(0.0) / rate.abs(), to));
            }
            let span = self.upper[q] - self.lower[q];

            let mut leave: Option<(usize, f64, VarStatus)> = None;
            if span > theta_max || !span.is_finite() {
                let mut best_alpha = -1.0;
                let mut best_index = usize::MAX;
                for &(pos, ratio, to) in &rows {
                    if ratio > theta_max * (1.0 + 1e-12) + 1e-15 {
                        continue;
                    }
                    if bland {
                        let j = self.basis[pos];
                        if j < best_index {
                            best_index = j;
                            leave = Some((pos, ratio, to));
                        }
                    } else if alpha[pos].abs() > best_alpha {
                        best_alpha = alpha[pos].abs();
                        leave = Some((pos, ratio, to));
                    }
                }
            }

            let theta = match leave {
                Some((_, ratio, _)) => ratio,
                None if span.is_finite() => span,
                None => {
                    if phase1 {
                        return LpStatus::NumericalFailure;
                    }
                    return LpStatus::Unbounded;
                }
            };

            if theta <= DEGENERATE_STEP {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            let delta = dir * theta;
            self.x[q] += delta;
            for (pos, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.basis[pos];
                    self.x[j] -= delta * a;
                }
            }
            match leave {
                Some((pos, _, to)) => {
                    self.replace_basic(pos, q, to, &alpha);
                }
                None => {
                    self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = self.nonbasic_value(q);
                }
            }
            self.iterations += 1;
        }
    }

    /// Flips boxed nonbasic variables whose reduced cost has the wrong sign.
    /// Returns false when some unboxed variable remains dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let tol_d = self.opts.optimality_tol;
        let y = self.phase2_duals();
        let mut flipped = false;
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            match st {
                VarStatus::AtLower if d < -tol_d => {
                    if !self.upper[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::AtUpper;
                }
                VarStatus::AtUpper if d > tol_d => {
                    if !self.lower[j].is_finite() {
                        return false;
                    }
                    self.status[j] = VarStatus::AtLower;
                }
                VarStatus::Free if d.abs() > tol_d => return false,
                _ => continue,
            }
            self.x[j] = self.nonbasic_value(j);
            flipped = true;
        }
        if flipped {
            self.recompute_primal();
        }
        true
    }

    /// Dual simplex with steepest-edge pricing and reduced costs updated
    /// along the pivot row.
    fn dual(&mut self) -> DualOutcome {
        let tol_d = self.opts.optimality_tol;
        let cap = self.iteration_cap();
        let mut degenerate_streak = 0usize;
        let mut alpha_row = vec![0.0; self.n + self.m];
        let mut d = vec![0.0; self.n + self.m];
        let mut d_valid = false;
        loop {
            if self.iterations >= cap {
                return DualOutcome::Done(LpStatus::IterationLimit);
            }
            if !self.maybe_refactor() {
                return DualOutcome::Done(LpStatus::NumericalFailure);
            }
            if !d_valid || self.factor.num_updates() == 0 {
                let y = self.phase2_duals();
                for j in 0..self.n + self.m {
                    d[j] = if self.status[j] == VarStatus::Basic { 0.0 } else { self.reduced_cost(j, &y) };
                }
                d_valid = true;
            }
            let bland = degenerate_streak > BLAND_AFTER;

            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for (pos, &j) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                if bland {
                    if leave.is_none_or(|(p, _)| j < self.basis[p]) {
                        leave = Some((pos, inf));
                    }
                } else {
                    let score = inf * inf / self.dse[pos];
                    if score > worst {
                        worst = score;
                        leave = Some((pos, inf));
                    }
                }
            }
            let Some((p, _)) = leave else {
                return DualOutcome::Done(LpStatus::Optimal);
            };
            let b = self.basis[p];
            let below = self.x[b] < self.lower[b];
            let target = if below { self.lower[b] } else { self.upper[b] };

            let mut rho = vec![0.0; self.m];
            rho[p] = 1.0;
            self.factor.btran(&mut rho, &mut self.scratch);
            alpha_row.iter_mut().for_each(|v| *v = 0.0);
            for (i, &r) in rho.iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                for e in self.row_start[i]..self.row_start[i + 1] {
                    alpha_row[self.row_col[e]] += r * self.row_val[e];
                }
                alpha_row[self.n + i] = -r;
            }

            let mut theta_max = f64::INFINITY;
            let mut cands: Vec<(usize, f64)> = Vec::new();
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = alpha_row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match st {
                    VarStatus::AtLower => (a < 0.0) == below,
                    VarStatus::AtUpper => (a > 0.0) == below,
                    VarStatus::Free => true,
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let dj = d[j];
                let dist = match st {
                    VarStatus::AtLower => dj.max(0.0),
                    VarStatus::AtUpper => (-dj).max(0.0),
                    _ => dj.abs(),
                };
                if st == VarStatus::AtLower && dj < -tol_d || st == VarStatus::AtUpper && dj > tol_d {
                    // the updated reduced costs may have drifted; confirm before giving up
                    if self.factor.num_updates() > 0 {
                        d_valid = false;
                        break;
                    }
                    return DualOutcome::LostDualFeasibility;
                }
                let relaxed = if bland { dist } else { dist + tol_d };
                theta_max = theta_max.min(relaxed / a.abs());
                cands.push((j, dist / a.abs()));
            }
            if !d_valid {
                if !self.refactor() {
                    return DualOutcome::Done(LpStatus::NumericalFailure);
                }
                self.recompute_primal();
                continue;
            }
            let mut entering: Option<(usize, f64)> = None;
            let mut best_alpha = -1.0;
            for &(j, ratio) in &cands {
                if ratio > theta_max * (1.0 + 1e-12) + 1e-15 {
                    continue;
                }
                if bland {
                    if entering.is_none_or(|(q, _)| j < q) {
                        entering = Some((j, ratio));
                    }
                } else if alpha_row[j].abs() > best_alpha {
                    best_alpha = alpha_row[j].abs();
                    entering = Some((j, ratio));
                }
            }
            let Some((q, ratio)) = entering else {
                if self.factor.num_updates() > 0 {
                    if !self.refactor() {
                        return DualOutcome::Done(LpStatus::NumericalFailure);
                    }
                    self.recompute_primal();
                    continue;
                }
                return DualOutcome::Done(LpStatus::Infeasible);
            };
            if ratio <= DEGENERATE_STEP {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }

            let alpha = self.ftran_column(q);
            let pivot = alpha[p];
            if (pivot - alpha_row[q]).abs() > 1e-7 * (1.0 + pivot.abs()) || pivot.abs() <= PIVOT_TOL {
                if self.factor.num_updates() == 0 {
                    return DualOutcome::Done(LpStatus::NumericalFailure);
                }
                if !self.refactor() {
                    return DualOutcome::Done(LpStatus::NumericalFailure);
                }
                self.recompute_primal();
                continue;
            }

            let rho_norm: f64 = rho.iter().map(|r| r * r).sum();
            let mut tau = rho;
            self.factor.ftran(&mut tau, &mut self.scratch);
            for (i, &a) in alpha.iter().enumerate() {
                if i == p || a == 0.0 {
                    continue;
                }
                let r = a / pivot;
                self.dse[i] = (self.dse[i] - 2.0 * r * tau[i] + r * r * rho_norm).max(1e-4);
            }
            self.dse[p] = (rho_norm / (pivot * pivot)).max(1e-4);

            let theta_d = d[q] / alpha_row[q];
            for j in 0..self.n + self.m {
                if self.status[j] != VarStatus::Basic && alpha_row[j] != 0.0 {
                    d[j] -= theta_d * alpha_row[j];
                }
            }
            d[q] = 0.0;
            d[b] = -theta_d;

            let step = (self.x[b] - target) / pivot;
            self.x[q] += step;
            for (pos, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.basis[pos];
                    self.x[j] -= step * a;
                }
            }
            let to = if below { VarStatus::AtLower } else { VarStatus::AtUpper };
            self.replace_basic(p, q, to, &alpha);
            self.iterations += 1;
        }
    }

    fn dual_infeasible(&mut self) -> bool {
        let tol_d = self.opts.optimality_tol;
        let y = self.phase2_duals();
        (0..self.n + self.m).any(|j| {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                return false;
            }
            let d = self.reduced_cost(j, &y);
            match st {
                VarStatus::AtLower => d < -tol_d,
                VarStatus::AtUpper => d > tol_d,
                _ => d.abs() > tol_d,
            }
        })
    }

    pub fn solve(&mut self) -> LpSolution {
        let start = self.iterations;
        let status = self.solve_status();
        self.solution(status, self.iterations - start)
    }

    fn solve_status(&mut self) -> LpStatus {
        for j in 0..self.n + self.m {
            if self.lower[j] > self.upper[j] + self.opts.feasibility_tol {
                return LpStatus::Infeasible;
            }
        }
        if !self.ensure_ready() {
            return LpStatus::NumericalFailure;
        }
        let mut status = LpStatus::NumericalFailure;
        for attempt in 0..4 {
            status = if self.primal_infeasible() && attempt == 0 && self.make_dual_feasible() {
                match self.dual() {
                    DualOutcome::Done(s) => s,
                    DualOutcome::LostDualFeasibility => self.primal(),
                }
            } else {
                self.primal()
            };
            if status != LpStatus::Optimal {
                if status == LpStatus::NumericalFailure && attempt < 3 {
                    self.reset_to_slack_basis();
                    if !self.ensure_ready() {
                        return LpStatus::NumericalFailure;
                    }
                    continue;
                }
                return status;
            }
            if !self.refactor() {
                return LpStatus::NumericalFailure;
            }
            self.recompute_primal();
            if !self.primal_infeasible() && !self.dual_infeasible() {
                return LpStatus::Optimal;
            }
            log::debug!("simplex verification failed, resuming (attempt {attempt})");
        }
        status
    }

    fn reset_to_slack_basis(&mut self) {
        for j in 0..self.n {
            self.status[j] = self.default_status(j);
            self.x[j] = self.nonbasic_value(j);
        }
        for j in self.n..self.n + self.m {
            self.status[j] = VarStatus::Basic;
        }
        self.basis = (self.n..self.n + self.m).collect();
        self.dse.iter_mut().for_each(|w| *w = 1.0);
        self.factor_valid = false;
        self.primal_valid = false;
    }

    fn solution(&mut self, status: LpStatus, iterations: usize) -> LpSolution {
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        let (duals, reduced_costs) = if status == LpStatus::Optimal && self.factor_valid {
            let y = self.phase2_duals();
            let d = (0..self.n).map(|j| self.reduced_cost(j, &y)).collect();
            (y, d)
        } else {
            (vec![0.0; self.m], vec![0.0; self.n])
        };
        LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs,
            iterations,
        }
    }
}

enum ColumnIter<'a> {
    Structural(std::iter::Zip<std::slice::Iter<'a, usize>, std::slice::Iter<'a, f64>>),
    Logical(Option<usize>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Structural(it) => it.next().map(|(&i, &v)| (i, v)),
            ColumnIter::Logical(slot) => slot.take().map(|i| (i, -1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::RowBounds;

    #[test]
    fn small_lp() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3
        let mut p = MilpProblem::new("lp");
        let x = p.add_continuous("x", 0.0, 3.0, -3.0);
        let y = p.add_continuous("y", 0.0, f64::INFINITY, -2.0);
        p.add_constraint("c1", "t", [(x, 1.0), (y, 1.0)], RowBounds::Le(4.0));
        p.add_constraint("c2", "t", [(x, 1.0), (y, 3.0)], RowBounds::Le(7.0));
        let s = solve_lp(&p, LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 11.0).abs() < 1e-9);
        assert!((s.x[0] - 3.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
        assert!((s.duals[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = MilpProblem::new("inf");
        let x = p.add_continuous("x", 0.0, 1.0, 1.0);
        p.add_constraint("c", "t", [(x, 1.0)], RowBounds::Ge(2.0));
        assert_eq!(solve_lp(&p, LpOptions::default()).status, LpStatus::Infeasible);

        let mut q = MilpProblem::new("unb");
        let x = q.add_continuous("x", 0.0, f64::INFINITY, -1.0);
        let y = q.add_continuous("y", 0.0, f64::INFINITY, 0.0);
        q.add_constraint("c", "t", [(x, 1.0), (y, -1.0)], RowBounds::Le(1.0));
        assert_eq!(solve_lp(&q, LpOptions::default()).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y, x - y = 1, x + y >= 3, x, y free
        let mut p = MilpProblem::new("free");
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        p.add_constraint("e", "t", [(x, 1.0), (y, -1.0)], RowBounds::Eq(1.0));
        p.add_constraint("g", "t", [(x, 1.0), (y, 1.0)], RowBounds::Ge(3.0));
        let s = solve_lp(&p, LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut p = MilpProblem::new("ws");
        let x = p.add_continuous("x", 0.0, 10.0, -1.0);
        let y = p.add_continuous("y", 0.0, 10.0, -1.0);
        p.add_constraint("c", "t", [(x, 2.0), (y, 1.0)], RowBounds::Le(12.0));
        let mut s = LpSolver::new(&p, LpOptions::default());
        let first = s.solve();
        assert!((first.objective + 11.0).abs() < 1e-9);
        s.set_bounds(1, 0.0, 4.0);
        let second = s.solve();
        assert_eq!(second.status, LpStatus::Optimal);
        assert!((second.objective + 8.0).abs() < 1e-9);
    }
}
