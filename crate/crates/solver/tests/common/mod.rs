#![allow(dead_code)]

use heatflow_solver::{MilpProblem, RowBounds, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves a dense square system by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is (numerically) singular.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(k: usize, n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, k: usize, n: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == n {
            f(cur);
            return;
        }
        for i in start..k {
            if k - i < n - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, k, n, cur, f);
            cur.pop();
        }
    }
    rec(0, k, n, &mut Vec::new(), f);
}

/// Minimum of a bounded LP (all variable bounds finite) by enumerating every
/// basic solution. `None` means infeasible.
pub fn vertex_enumeration(p: &MilpProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.num_vars();
    if n == 0 {
        let ok = p.constraints().iter().all(|c| c.bounds.lower() <= 1e-9 && c.bounds.upper() >= -1e-9);
        return ok.then(|| (0.0, Vec::new()));
    }
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (j, v) in p.variables().iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs a bounded box");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), v.lower));
        if v.upper != v.lower {
            planes.push((e, v.upper));
        }
    }
    for c in p.constraints() {
        let mut a = vec![0.0; n];
        for &(v, x) in &c.coeffs {
            a[v.0] += x;
        }
        for rhs in [c.bounds.lower(), c.bounds.upper()] {
            if rhs.is_finite() {
                planes.push((a.clone(), rhs));
            }
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if p.max_violation(&x) <= 1e-7 {
                let obj = p.objective_value(&x);
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

/// Brute-force MILP oracle: every assignment of the binaries, with the
/// continuous remainder solved by vertex enumeration after substituting the
/// fixed binaries out.
pub fn brute_force_milp(p: &MilpProblem) -> Option<f64> {
    let bins: Vec<usize> = p
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let conts: Vec<usize> = (0..p.num_vars()).filter(|j| !bins.contains(j)).collect();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let mut fixed = vec![0.0; p.num_vars()];
        for (k, &j) in bins.iter().enumerate() {
            fixed[j] = f64::from((mask >> k) & 1);
        }
        let constant: f64 = bins.iter().map(|&j| p.variables()[j].objective * fixed[j]).sum();
        let mut q = MilpProblem::new("sub");
        let mut map = vec![None; p.num_vars()];
        for &j in &conts {
            let v = &p.variables()[j];
            map[j] = Some(q.add_continuous(v.name.clone(), v.lower, v.upper, v.objective));
        }
        for c in p.constraints() {
            let shift: f64 = c.coeffs.iter().filter(|(v, _)| map[v.0].is_none()).map(|&(v, a)| a * fixed[v.0]).sum();
            let coeffs: Vec<_> = c.coeffs.iter().filter_map(|&(v, a)| map[v.0].map(|w| (w, a))).collect();
            let bounds = RowBounds::from_interval(c.bounds.lower() - shift, c.bounds.upper() - shift);
            q.add_constraint(c.name.clone(), "sub", coeffs, bounds);
        }
        if let Some((obj, _)) = vertex_enumeration(&q) {
            let total = obj + constant;
            if best.is_none_or(|b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}

/// Random bounded LP or MILP with `nb` binaries and `nc` continuous
/// variables.
pub fn random_problem(seed: u64, nb: usize, nc: usize, rows: usize) -> MilpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MilpProblem::new(format!("rand{seed}"));
    let mut vars = Vec::new();
    for b in 0..nb {
        vars.push(p.add_binary(format!("b{b}"), rng.random_range(-10.0..10.0f64).round()));
    }
    for c in 0..nc {
        let lo = if rng.random_bool(0.3) { -rng.random_range(0.0..3.0f64).round() } else { 0.0 };
        let hi = lo + rng.random_range(1.0..8.0f64).round();
        vars.push(p.add_continuous(format!("x{c}"), lo, hi, rng.random_range(-5.0..5.0f64)));
    }
    for r in 0..rows {
        let mut coeffs = Vec::new();
        for &v in &vars {
            if rng.random_bool(0.6) {
                coeffs.push((v, rng.random_range(-4.0..4.0f64).round()));
            }
        }
        let rhs = rng.random_range(-2.0..8.0f64).round();
        let bounds = match rng.random_range(0..10) {
            0 => RowBounds::Eq(rhs),
            1 | 2 => RowBounds::Ge(rhs - 6.0),
            3 => RowBounds::Range { lower: rhs - 3.0, upper: rhs + 2.0 },
            _ => RowBounds::Le(rhs),
        };
        p.add_constraint(format!("r{r}"), "random", coeffs, bounds);
    }
    p
}
