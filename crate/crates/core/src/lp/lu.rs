//! Sparse LU factorization of simplex bases with a product-form eta file.
//!
//! The basis is given column by column. Elimination is right-looking with a
//! Markowitz pivot rule (singletons first, then a limited search over the
//! sparsest columns) and threshold partial pivoting. Updates after a basis
//! change are appended as eta columns until the next refactorization.

/// Relative threshold for accepting a pivot against the largest entry of its column.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude are never used as pivots.
const PIVOT_ABS_TOL: f64 = 1e-11;
/// Eta entries below this magnitude are dropped.
const DROP_TOL: f64 = 1e-14;

/// Basis positions and rows that could not be pivoted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    // L: one elimination step per pivot, applied in order.
    l_pivot_row: Vec<usize>,
    l_start: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    // U: one row per pivot, entries indexed by basis position.
    u_row: Vec<usize>,
    u_pos: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

impl LuFactors {
    /// Factorizes the `m x m` matrix whose k-th column is `columns[k]`
    /// (row index, value pairs; duplicates are not allowed).
    pub(crate) fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (k, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((k, v));
                    cols[k].push(i);
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut col_single: Vec<usize> = (0..m).filter(|&k| cols[k].len() == 1).collect();
        let mut row_single: Vec<usize> = (0..m).filter(|&i| rows[i].len() == 1).collect();

        let mut f = LuFactors {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        // scatter map: basis position -> index within the row being updated
        let mut where_in_row = vec![usize::MAX; m];

        for _step in 0..m {
            let pivot = Self::pick_singleton_col(&mut col_single, &cols, &rows, &col_active)
                .or_else(|| Self::pick_singleton_row(&mut row_single, &rows, &cols, &row_active))
                .or_else(|| Self::markowitz(&rows, &cols, &col_active));
            let Some((r, k)) = pivot else {
                return Err(Singular {
                    positions: (0..m).filter(|&k| col_active[k]).collect(),
                    rows: (0..m).filter(|&i| row_active[i]).collect(),
                });
            };
            let piv = value_at(&rows[r], k).expect("pivot entry present");

            // U row r.
            f.u_row.push(r);
            f.u_pos.push(k);
            f.u_diag.push(piv);
            for &(j, v) in &rows[r] {
                if j != k {
                    f.u_idx.push(j);
                    f.u_val.push(v);
                }
            }
            f.u_start.push(f.u_idx.len());

            // Remove row r from the column patterns.
            let pivot_row = std::mem::take(&mut rows[r]);
            row_active[r] = false;
            for &(j, _) in &pivot_row {
                remove_item(&mut cols[j], r);
            }

            // Eliminate column k from the remaining rows.
            let targets = std::mem::take(&mut cols[k]);
            col_active[k] = false;
            f.l_pivot_row.push(r);
            for &i in &targets {
                let row = &mut rows[i];
                let pos = row
                    .iter()
                    .position(|&(j, _)| j == k)
                    .expect("pattern in sync");
                let (_, aik) = row.swap_remove(pos);
                let l = aik / piv;
                f.l_row.push(i);
                f.l_val.push(l);
                for (idx, &(j, _)) in row.iter().enumerate() {
                    where_in_row[j] = idx;
                }
                for &(j, v) in &pivot_row {
                    if j == k {
                        continue;
                    }
                    let w = where_in_row[j];
                    if w != usize::MAX && w < row.len() && row[w].0 == j {
                        row[w].1 -= l * v;
                    } else {
                        row.push((j, -l * v));
                        cols[j].push(i);
                    }
                }
                for &(j, _) in row.iter() {
                    where_in_row[j] = usize::MAX;
                }
                if row.len() == 1 {
                    row_single.push(i);
                }
            }
            f.l_start.push(f.l_row.len());
            for &(j, _) in &pivot_row {
                if j != k && col_active[j] && cols[j].len() == 1 {
                    col_single.push(j);
                }
            }
        }
        Ok(f)
    }

    fn pick_singleton_col(
        stack: &mut Vec<usize>,
        cols: &[Vec<usize>],
        rows: &[Vec<(usize, f64)>],
        col_active: &[bool],
    ) -> Option<(usize, usize)> {
        while let Some(k) = stack.pop() {
            if !col_active[k] || cols[k].len() != 1 {
                continue;
            }
            let r = cols[k][0];
            let v = value_at(&rows[r], k)?;
            if v.abs() > PIVOT_ABS_TOL {
                return Some((r, k));
            }
        }
        None
    }

    fn pick_singleton_row(
        stack: &mut Vec<usize>,
        rows: &[Vec<(usize, f64)>],
        cols: &[Vec<usize>],
        row_active: &[bool],
    ) -> Option<(usize, usize)> {
        while let Some(r) = stack.pop() {
            if !row_active[r] || rows[r].len() != 1 {
                continue;
            }
            let (k, v) = rows[r][0];
            if v.abs() <= PIVOT_ABS_TOL {
                continue;
            }
            let colmax = cols[k]
                .iter()
                .filter_map(|&i| value_at(&rows[i], k))
                .fold(0.0f64, |a, b| a.max(b.abs()));
            if v.abs() >= PIVOT_THRESHOLD * colmax {
                return Some((r, k));
            }
        }
        None
    }

    /// Limited Markowitz search over the sparsest active columns.
    fn markowitz(
        rows: &[Vec<(usize, f64)>],
        cols: &[Vec<usize>],
        col_active: &[bool],
    ) -> Option<(usize, usize)> {
        let mut counts: Vec<(usize, usize)> = (0..cols.len())
            .filter(|&k| col_active[k] && !cols[k].is_empty())
            .map(|k| (cols[k].len(), k))
            .collect();
        if counts.is_empty() {
            return None;
        }
        counts.sort_unstable();
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for &(ccount, k) in counts.iter().take(8) {
            let entries: Vec<(usize, f64)> = cols[k]
                .iter()
                .filter_map(|&i| value_at(&rows[i], k).map(|v| (i, v)))
                .collect();
            let colmax = entries.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if colmax <= PIVOT_ABS_TOL {
                continue;
            }
            for (i, v) in entries {
                if v.abs() < PIVOT_THRESHOLD * colmax || v.abs() <= PIVOT_ABS_TOL {
                    continue;
                }
                let cost = (rows[i].len() - 1) * (ccount - 1);
                let better = match best {
                    None => true,
                    Some((bc, _, _, bv)) => cost < bc || (cost == bc && v.abs() > bv),
                };
                if better {
                    best = Some((cost, i, k, v.abs()));
                }
            }
        }
        best.map(|(_, i, k, _)| (i, k))
    }

    /// Solves `B x = b` with `b` in row space; returns `x` in basis-position space.
    pub(crate) fn ftran(&self, b: &[f64]) -> Vec<f64> {
        let mut w = b.to_vec();
        for p in 0..self.l_pivot_row.len() {
            let wr = w[self.l_pivot_row[p]];
            if wr != 0.0 {
                for e in self.l_start[p]..self.l_start[p + 1] {
                    w[self.l_row[e]] -= self.l_val[e] * wr;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for p in (0..self.u_row.len()).rev() {
            let mut s = w[self.u_row[p]];
            for e in self.u_start[p]..self.u_start[p + 1] {
                s -= self.u_val[e] * x[self.u_idx[e]];
            }
            x[self.u_pos[p]] = s / self.u_diag[p];
        }
        x
    }

    /// Solves `B^T y = c` with `c` in basis-position space; returns `y` in row space.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        let mut z = vec![0.0; self.m];
        for q in 0..self.u_row.len() {
            let zr = c[self.u_pos[q]] / self.u_diag[q];
            z[self.u_row[q]] = zr;
            if zr != 0.0 {
                for e in self.u_start[q]..self.u_start[q + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * zr;
                }
            }
        }
        for p in (0..self.l_pivot_row.len()).rev() {
            let mut s = 0.0;
            for e in self.l_start[p]..self.l_start[p + 1] {
                s += self.l_val[e] * z[self.l_row[e]];
            }
            z[self.l_pivot_row[p]] -= s;
        }
        z
    }
}

fn value_at(row: &[(usize, f64)], col: usize) -> Option<f64> {
    row.iter().find(|&&(j, _)| j == col).map(|&(_, v)| v)
}

fn remove_item(v: &mut Vec<usize>, item: usize) {
    if let Some(p) = v.iter().position(|&x| x == item) {
        v.swap_remove(p);
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

/// LU factors plus the eta file accumulated since the last refactorization.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
}

impl BasisFactor {
    pub(crate) fn new(lu: LuFactors) -> Self {
        Self {
            lu,
            etas: Vec::new(),
        }
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub(crate) fn ftran(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.lu.ftran(b);
        for eta in &self.etas {
            let xr = x[eta.pos] / eta.pivot;
            x[eta.pos] = xr;
            if xr != 0.0 {
                for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                    x[i] -= a * xr;
                }
            }
        }
        x
    }

    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for (&i, &a) in eta.idx.iter().zip(&eta.val) {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        self.lu.btran(&c)
    }

    /// Records the replacement of the basis column at `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub(crate) fn update(&mut self, pos: usize, alpha: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a.abs() > DROP_TOL {
                idx.push(i);
                val.push(a);
            }
        }
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            idx,
            val,
        });
    }
}
