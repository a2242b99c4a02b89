//! Sparse LU factorization of simplex basis matrices.
//!
//! The factorization eliminates column singletons and row singletons first
//! (typical bases are mostly triangular) and falls back to a Markowitz
//! search with threshold pivoting on the remaining nucleus. Basis changes
//! between refactorizations are appended as product-form eta columns.

/// Columns that could not be pivoted, paired with rows left without a pivot.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

const DROP_TOL: f64 = 1e-14;
const ABS_PIVOT_TOL: f64 = 1e-11;
const REL_PIVOT_TOL: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    m: usize,
    // Pivot k eliminated row `pivot_row[k]` using basis position `pivot_pos[k]`.
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    diag: Vec<f64>,
    // Row multipliers of pivot k: b[i] -= l * b[pivot_row[k]].
    l_start: Vec<usize>,
    l_index: Vec<usize>,
    l_value: Vec<f64>,
    // Off-diagonal part of U row k, indexed by basis position.
    u_start: Vec<usize>,
    u_index: Vec<usize>,
    u_value: Vec<f64>,
    // Product-form updates.
    eta_pos: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_index: Vec<usize>,
    eta_value: Vec<f64>,
}

impl BasisFactor {
    pub fn num_updates(&self) -> usize {
        self.eta_pos.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_index.len()
    }

    pub fn lu_nnz(&self) -> usize {
        self.l_index.len() + self.u_index.len() + self.m
    }

    /// Factorizes the square matrix whose column `p` is `columns[p]`, given
    /// as `(row, value)` pairs.
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<BasisFactor, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut f = BasisFactor {
            m,
            l_start: vec![0],
            u_start: vec![0],
            eta_start: vec![0],
            ..Default::default()
        };

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (p, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v.abs() > DROP_TOL {
                    rows[i].push((p, v));
                    col_rows[p].push(i);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];

        let mut col_singletons: Vec<usize> = (0..m).filter(|&p| col_count[p] == 1).collect();
        let mut row_singletons: Vec<usize> = (0..m).filter(|&i| rows[i].len() == 1).collect();

        let mut work = vec![0.0; m];
        let mut mark = vec![usize::MAX; m];
        let mut remaining = m;

        while remaining > 0 {
            let mut choice: Option<(usize, usize)> = None;

            while let Some(p) = col_singletons.pop() {
                if col_done[p] || col_count[p] != 1 {
                    continue;
                }
                let r = col_rows[p]
                    .iter()
                    .copied()
                    .find(|&i| !row_done[i] && rows[i].iter().any(|&(q, _)| q == p));
                if let Some(r) = r {
                    let v = entry(&rows[r], p);
                    if v.abs() > ABS_PIVOT_TOL {
                        choice = Some((r, p));
                        break;
                    }
                }
            }

            if choice.is_none() {
                while let Some(r) = row_singletons.pop() {
                    if row_done[r] || rows[r].len() != 1 {
                        continue;
                    }
                    let (p, v) = rows[r][0];
                    let col_max = col_max_abs(&col_rows[p], &rows, &row_done, p);
                    if v.abs() > ABS_PIVOT_TOL && v.abs() >= REL_PIVOT_TOL * col_max {
                        choice = Some((r, p));
                        break;
                    }
                }
            }

            if choice.is_none() {
                choice = markowitz(&rows, &col_rows, &col_count, &row_done, &col_done);
            }

            let Some((r, p)) = choice else {
                let positions = (0..m).filter(|&p| !col_done[p]).collect();
                let rows_left = (0..m).filter(|&i| !row_done[i]).collect();
                return Err(Singular {
                    positions,
                    rows: rows_left,
                });
            };

            // Eliminate column p from all other active rows.
            let pivot_row = std::mem::take(&mut rows[r]);
            let d = entry(&pivot_row, p);
            f.pivot_row.push(r);
            f.pivot_pos.push(p);
            f.diag.push(d);
            for &(q, v) in &pivot_row {
                if q != p {
                    f.u_index.push(q);
                    f.u_value.push(v);
                }
            }
            f.u_start.push(f.u_index.len());

            let mut targets = std::mem::take(&mut col_rows[p]);
            targets.sort_unstable();
            targets.dedup();
            for &i in &targets {
                if i == r || row_done[i] {
                    continue;
                }
                let a = entry(&rows[i], p);
                if a == 0.0 {
                    continue;
                }
                let l = a / d;
                f.l_index.push(i);
                f.l_value.push(l);

                // row_i -= l * pivot_row, dropping column p.
                let stamp = i;
                for &(q, v) in &rows[i] {
                    work[q] = v;
                    mark[q] = stamp;
                }
                let mut fill = Vec::new();
                for &(q, v) in &pivot_row {
                    if q == p {
                        continue;
                    }
                    if mark[q] == stamp {
                        work[q] -= l * v;
                    } else {
                        mark[q] = stamp;
                        work[q] = -l * v;
                        fill.push(q);
                    }
                }
                let old = std::mem::take(&mut rows[i]);
                let mut new_row = Vec::with_capacity(old.len() + fill.len());
                for &(q, _) in &old {
                    if q == p {
                        continue;
                    }
                    let v = work[q];
                    if v.abs() > DROP_TOL {
                        new_row.push((q, v));
                    } else {
                        col_count[q] -= 1;
                        if col_count[q] == 1 {
                            col_singletons.push(q);
                        }
                    }
                }
                for &q in &fill {
                    let v = work[q];
                    if v.abs() > DROP_TOL {
                        new_row.push((q, v));
                        col_rows[q].push(i);
                        col_count[q] += 1;
                    }
                }
                for &(q, _) in &old {
                    mark[q] = usize::MAX;
                }
                for &q in &fill {
                    mark[q] = usize::MAX;
                }
                if new_row.len() == 1 {
                    row_singletons.push(i);
                }
                rows[i] = new_row;
            }
            f.l_start.push(f.l_index.len());

            row_done[r] = true;
            col_done[p] = true;
            col_count[p] = 0;
            for &(q, _) in &pivot_row {
                if q != p {
                    col_count[q] -= 1;
                    if col_count[q] == 1 {
                        col_singletons.push(q);
                    }
                }
            }
            remaining -= 1;
        }
        Ok(f)
    }

    /// Solves `B x = b` in place. On entry `b` is indexed by row, on exit by
    /// basis position.
    pub fn ftran(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        for k in 0..self.pivot_row.len() {
            let br = b[self.pivot_row[k]];
            if br != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_index[e]] -= self.l_value[e] * br;
                }
            }
        }
        scratch.clear();
        scratch.resize(m, 0.0);
        let x = scratch;
        for k in (0..self.pivot_row.len()).rev() {
            let mut v = b[self.pivot_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                v -= self.u_value[e] * x[self.u_index[e]];
            }
            x[self.pivot_pos[k]] = v / self.diag[k];
        }
        for k in 0..self.eta_pos.len() {
            let p = self.eta_pos[k];
            let xp = x[p] / self.eta_pivot[k];
            x[p] = xp;
            if xp != 0.0 {
                for e in self.eta_start[k]..self.eta_start[k + 1] {
                    x[self.eta_index[e]] -= self.eta_value[e] * xp;
                }
            }
        }
        b.copy_from_slice(x);
    }

    /// Solves `B^T y = c` in place. On entry `c` is indexed by basis
    /// position, on exit by row.
    pub fn btran(&self, c: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        for k in (0..self.eta_pos.len()).rev() {
            let p = self.eta_pos[k];
            let mut v = c[p];
            for e in self.eta_start[k]..self.eta_start[k + 1] {
                v -= self.eta_value[e] * c[self.eta_index[e]];
            }
            c[p] = v / self.eta_pivot[k];
        }
        scratch.clear();
        scratch.resize(m, 0.0);
        let y = scratch;
        for k in 0..self.pivot_row.len() {
            let w = c[self.pivot_pos[k]] / self.diag[k];
            y[self.pivot_row[k]] = w;
            if w != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_index[e]] -= self.u_value[e] * w;
                }
            }
        }
        for k in (0..self.pivot_row.len()).rev() {
            let mut v = y[self.pivot_row[k]];
            for e in self.l_start[k]..self.l_start[k + 1] {
                v -= self.l_value[e] * y[self.l_index[e]];
            }
            y[self.pivot_row[k]] = v;
        }
        c.copy_from_slice(y);
    }

    /// Records that the column at basis position `pos` was replaced by a
    /// column whose FTRAN image is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        self.eta_pos.push(pos);
        self.eta_pivot.push(alpha[pos]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                self.eta_index.push(i);
                self.eta_value.push(a);
            }
        }
        self.eta_start.push(self.eta_index.len());
    }
}

fn entry(row: &[(usize, f64)], p: usize) -> f64 {
    row.iter().find(|&&(q, _)| q == p).map_or(0.0, |&(_, v)| v)
}

fn col_max_abs(col: &[usize], rows: &[Vec<(usize, f64)>], row_done: &[bool], p: usize) -> f64 {
    col.iter()
        .filter(|&&i| !row_done[i])
        .map(|&i| entry(&rows[i], p).abs())
        .fold(0.0, f64::max)
}

/// Picks a pivot among the sparsest remaining columns, minimizing the
/// Markowitz count subject to a relative threshold.
fn markowitz(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_count: &[usize],
    row_done: &[bool],
    col_done: &[bool],
) -> Option<(usize, usize)> {
    const SEARCH_COLS: usize = 4;
    let mut cols: Vec<usize> = (0..col_count.len())
        .filter(|&p| !col_done[p] && col_count[p] > 0)
        .collect();
    if cols.is_empty() {
        return None;
    }
    let shortlist = (2 * SEARCH_COLS).min(cols.len());
    if shortlist < cols.len() {
        let mut short = cols.clone();
        short.select_nth_unstable_by_key(shortlist, |&p| (col_count[p], p));
        short.truncate(shortlist);
        short.sort_by_key(|&p| (col_count[p], p));
        if let Some(found) = markowitz_over(&short, rows, col_rows, col_count, row_done, SEARCH_COLS) {
            return Some(found);
        }
    }
    cols.sort_by_key(|&p| (col_count[p], p));
    markowitz_over(&cols, rows, col_rows, col_count, row_done, SEARCH_COLS)
}

fn markowitz_over(
    cols: &[usize],
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_count: &[usize],
    row_done: &[bool],
    search: usize,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize, f64)> = None;
    let mut examined = 0;
    for &p in cols {
        let cmax = col_max_abs(&col_rows[p], rows, row_done, p);
        if cmax <= ABS_PIVOT_TOL {
            continue;
        }
        examined += 1;
        for &i in &col_rows[p] {
            if row_done[i] {
                continue;
            }
            let v = entry(&rows[i], p).abs();
            if v < REL_PIVOT_TOL * cmax || v <= ABS_PIVOT_TOL {
                continue;
            }
            let cost = (rows[i].len() - 1) * (col_count[p] - 1);
            let better = match best {
                None => true,
                Some((bc, _, _, bv)) => cost < bc || (cost == bc && v > bv),
            };
            if better {
                best = Some((cost, i, p, v));
            }
        }
        if examined >= search && best.is_some() {
            break;
        }
    }
    best.map(|(_, i, p, _)| (i, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(m: usize, cols: &[Vec<(usize, f64)>], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (p, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[p];
            }
        }
        out
    }

    fn dense_mul_t(cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        cols.iter()
            .map(|col| col.iter().map(|&(i, v)| v * y[i]).sum())
            .collect()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn random_matrix(m: usize, seed: &mut u64) -> Vec<Vec<(usize, f64)>> {
        (0..m)
            .map(|p| {
                let mut col = vec![(p, 1.0 + lcg(seed))];
                for i in 0..m {
                    if i != p && lcg(seed) < 0.2 {
                        col.push((i, lcg(seed) * 2.0 - 1.0));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn solves_random_systems() {
        let mut seed = 7;
        for m in [1, 2, 5, 20, 60] {
            let cols = random_matrix(m, &mut seed);
            let f = BasisFactor::factorize(m, &cols).expect("nonsingular");
            let b: Vec<f64> = (0..m).map(|_| lcg(&mut seed)).collect();
            let mut x = b.clone();
            let mut s = Vec::new();
            f.ftran(&mut x, &mut s);
            let r = dense_mul(m, &cols, &x);
            for i in 0..m {
                assert!((r[i] - b[i]).abs() < 1e-9, "ftran residual m={m}");
            }
            let mut y = b.clone();
            f.btran(&mut y, &mut s);
            let r = dense_mul_t(&cols, &y);
            for i in 0..m {
                assert!((r[i] - b[i]).abs() < 1e-9, "btran residual m={m}");
            }
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut seed = 11;
        let m = 15;
        let mut cols = random_matrix(m, &mut seed);
        let mut f = BasisFactor::factorize(m, &cols).unwrap();
        let mut s = Vec::new();
        for step in 0..5 {
            let pos = (step * 4) % m;
            let mut new_col = vec![(pos, 3.0)];
            for i in 0..m {
                if lcg(&mut seed) < 0.3 {
                    new_col.push((i, lcg(&mut seed) - 0.5));
                }
            }
            let mut alpha = vec![0.0; m];
            for &(i, v) in &new_col {
                alpha[i] += v;
            }
            f.ftran(&mut alpha, &mut s);
            f.update(pos, &alpha);
            let mut merged = vec![0.0; m];
            for &(i, v) in &new_col {
                merged[i] += v;
            }
            cols[pos] = merged.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| (i, v)).collect();
        }
        let b: Vec<f64> = (0..m).map(|_| lcg(&mut seed)).collect();
        let mut x = b.clone();
        f.ftran(&mut x, &mut s);
        let r = dense_mul(m, &cols, &x);
        for i in 0..m {
            assert!((r[i] - b[i]).abs() < 1e-8);
        }
        let mut y = b.clone();
        f.btran(&mut y, &mut s);
        let r = dense_mul_t(&cols, &y);
        for i in 0..m {
            assert!((r[i] - b[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn reports_singular_columns() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]];
        let err = BasisFactor::factorize(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
