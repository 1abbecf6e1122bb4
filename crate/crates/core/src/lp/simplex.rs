//! Bounded revised primal simplex.
//!
//! Every row `a_i x (<=|>=|=) b_i` gets a logical `z_i` with `A x - z = 0`
//! and the row sense moved into the bounds of `z_i`. The slack basis is then
//! always `-I`, and all right-hand-side information lives in bounds, so warm
//! starts after bound or rhs changes only need phase 1 to repair primal
//! infeasibility. Phase 1 minimizes the sum of bound violations of the basic
//! variables directly (no artificial columns).
//!
//! When the starting basis is dual feasible (typical after a bound change,
//! an rhs change or appended rows) a dual simplex phase restores primal
//! feasibility first; the primal loop then only certifies optimality.

use super::lu::{BasisFactor, LuFactors};
use super::{
    Basis, LinearProgram, LpSolution, LpStatus, RowSense, VarStatus, FEASIBILITY_TOL,
    OPTIMALITY_TOL,
};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_INTERVAL: usize = 80;
const BLAND_AFTER_DEGENERATE: usize = 60;
/// Degenerate dual pivots before switching to smallest-index rules, and
/// before handing over to the primal loop.
const DUAL_BLAND_AFTER: usize = 30;
const DUAL_DEGENERATE_LIMIT: usize = 2000;
/// Smallest row entry accepted as a dual pivot; tiny pivots breed singular bases.
const DUAL_PIVOT_TOL: f64 = 1e-7;
/// Reduced-cost drift left alone on columns that cannot switch bounds; the
/// primal loop removes it.
const DUAL_DRIFT_FACTOR: f64 = 1e3;
/// Relative size of the cost shifts used during the dual phase.
const COST_PERTURBATION: f64 = 1e-6;

#[derive(Debug, Clone, Default)]
pub struct SimplexOptions {
    /// Pivot limit; `None` uses `20 (n + m) + 10_000`.
    pub max_iterations: Option<usize>,
}

/// Solves `lp`, optionally warm-started from `basis`.
pub fn solve_lp_with(
    lp: &LinearProgram,
    basis: Option<&Basis>,
    opts: &SimplexOptions,
) -> LpSolution {
    let n = lp.num_vars();
    let m = lp.num_rows();
    if lp.validate().is_err() {
        return LpSolution::failed(LpStatus::NumericalFailure, n, m, 0);
    }
    let mut s = Simplex::new(lp);
    s.install_basis(basis);
    let limit = opts.max_iterations.unwrap_or(20 * (n + m) + 10_000);
    let status = s.run(limit);
    s.into_solution(lp, status)
}

struct Simplex {
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    factor: BasisFactor,
    iterations: usize,
    primal_tol: Vec<f64>,
    dual_tol: f64,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = v;
                    fill[j] += 1;
                }
            }
        }
        // merge duplicate (row, col) entries so LU never sees them
        let mut merged_start = vec![0usize; n + 1];
        let mut mr = Vec::with_capacity(nnz);
        let mut mv = Vec::with_capacity(nnz);
        for j in 0..n {
            let mut entries: Vec<(usize, f64)> = (col_start[j]..col_start[j + 1])
                .map(|e| (col_row[e], col_val[e]))
                .collect();
            entries.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < entries.len() {
                let (r, mut v) = entries[k];
                k += 1;
                while k < entries.len() && entries[k].0 == r {
                    v += entries[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    mr.push(r);
                    mv.push(v);
                }
            }
            merged_start[j + 1] = mr.len();
        }

        let mut cost = lp.objective.clone();
        cost.extend(std::iter::repeat_n(0.0, m));
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        for row in &lp.rows {
            let (l, u) = match row.sense {
                RowSense::Le => (f64::NEG_INFINITY, row.rhs),
                RowSense::Ge => (row.rhs, f64::INFINITY),
                RowSense::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            up.push(u);
        }
        let primal_tol = (0..n + m)
            .map(|j| {
                let scale = [lo[j], up[j]]
                    .iter()
                    .filter(|b| b.is_finite())
                    .fold(1.0f64, |a, b| a.max(b.abs()));
                0.1 * FEASIBILITY_TOL * scale
            })
            .collect();
        let cmax = lp.objective.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        Simplex {
            n,
            m,
            col_start: merged_start,
            col_row: mr,
            col_val: mv,
            cost,
            lo,
            up,
            x: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::with_capacity(m),
            factor: BasisFactor::default(),
            iterations: 0,
            primal_tol,
            dual_tol: 1e-2 * OPTIMALITY_TOL * cmax,
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| (self.col_row[e], self.col_val[e]))
                .collect()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.m];
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                d[self.col_row[e]] = self.col_val[e];
            }
        } else {
            d[j - self.n] = -1.0;
        }
        d
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|e| self.col_val[e] * y[self.col_row[e]])
                .sum()
        } else {
            -y[j - self.n]
        }
    }

    fn nonbasic_status_for(&self, j: usize, preferred: VarStatus) -> VarStatus {
        let (l, u) = (self.lo[j], self.up[j]);
        match preferred {
            VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
            _ if l.is_finite() => VarStatus::AtLower,
            _ if u.is_finite() => VarStatus::AtUpper,
            _ => VarStatus::Free,
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.up[j],
            VarStatus::Free => 0.0,
            VarStatus::Basic => self.x[j],
        }
    }

    fn install_basis(&mut self, basis: Option<&Basis>) {
        let (n, m) = (self.n, self.m);
        let usable = basis.filter(|b| {
            b.num_vars == n
                && b.statuses.len() == n + m
                && b.statuses
                    .iter()
                    .filter(|&&s| s == VarStatus::Basic)
                    .count()
                    == m
        });
        match usable {
            Some(b) => {
                self.status = b.statuses.clone();
            }
            None => {
                self.status = vec![VarStatus::AtLower; n + m];
                for i in 0..m {
                    self.status[n + i] = VarStatus::Basic;
                }
            }
        }
        for j in 0..n + m {
            if self.status[j] != VarStatus::Basic {
                self.status[j] = self.nonbasic_status_for(j, self.status[j]);
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.head = (0..n + m)
            .filter(|&j| self.status[j] == VarStatus::Basic)
            .collect();
        self.refactor();
    }

    /// Factorizes the current basis, swapping in logicals for dependent columns.
    fn refactor(&mut self) {
        for _attempt in 0..4 {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factorize(self.m, &cols) {
                Ok(lu) => {
                    self.factor = BasisFactor::new(lu);
                    self.recompute_basics();
                    return;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.positions.iter().zip(&sing.rows) {
                        let out = self.head[pos];
                        let logical = self.n + row;
                        let preferred = if self.x[out] >= self.up[out] {
                            VarStatus::AtUpper
                        } else {
                            VarStatus::AtLower
                        };
                        self.status[out] = self.nonbasic_status_for(out, preferred);
                        self.x[out] = self.nonbasic_value(out);
                        if self.status[logical] != VarStatus::Basic {
                            self.status[logical] = VarStatus::Basic;
                            self.head[pos] = logical;
                        } else {
                            // logical already basic elsewhere; fall back to a slack basis
                            self.reset_to_slack_basis();
                            break;
                        }
                    }
                }
            }
        }
        self.reset_to_slack_basis();
        let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
        let lu = LuFactors::factorize(self.m, &cols).expect("slack basis is nonsingular");
        self.factor = BasisFactor::new(lu);
        self.recompute_basics();
    }

    fn reset_to_slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            if self.status[j] == VarStatus::Basic {
                self.status[j] = self.nonbasic_status_for(j, VarStatus::AtLower);
            }
            self.x[j] = self.nonbasic_value(j);
        }
        for i in 0..m {
            self.status[n + i] = VarStatus::Basic;
        }
        self.head = (n..n + m).collect();
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                let v = self.x[j];
                if v != 0.0 {
                    if j < self.n {
                        for e in self.col_start[j]..self.col_start[j + 1] {
                            rhs[self.col_row[e]] -= self.col_val[e] * v;
                        }
                    } else {
                        rhs[j - self.n] += v;
                    }
                }
            }
        }
        let xb = self.factor.ftran(&rhs);
        for (pos, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[pos];
        }
    }

    /// Phase-1 costs (or `None` when primal feasible).
    fn phase_one_costs(&self) -> Option<Vec<f64>> {
        let mut any = false;
        let c: Vec<f64> = self
            .head
            .iter()
            .map(|&j| {
                let v = self.x[j];
                if v < self.lo[j] - self.primal_tol[j] {
                    any = true;
                    -1.0
                } else if v > self.up[j] + self.primal_tol[j] {
                    any = true;
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        any.then_some(c)
    }

    /// Phase-2 reduced costs; zero for basic variables.
    fn reduced_costs(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let y = self.factor.btran(&cb);
        (0..self.n + self.m)
            .map(|j| {
                if self.status[j] == VarStatus::Basic {
                    0.0
                } else {
                    self.cost[j] - self.dot_column(j, &y)
                }
            })
            .collect()
    }

    /// Moves boxed nonbasics to the bound their reduced cost prefers. Returns
    /// false (changing nothing) when some other nonbasic is dual infeasible.
    fn make_dual_feasible(&mut self, d: &[f64]) -> bool {
        let mut moves = Vec::new();
        for j in 0..self.n + self.m {
            let st = self.status[j];
            if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let want = if d[j] < -self.dual_tol {
                VarStatus::AtUpper
            } else if d[j] > self.dual_tol {
                VarStatus::AtLower
            } else {
                continue;
            };
            if st == want {
                continue;
            }
            let reachable = match want {
                VarStatus::AtUpper => self.up[j].is_finite(),
                _ => self.lo[j].is_finite(),
            };
            if !reachable {
                if d[j].abs() <= DUAL_DRIFT_FACTOR * self.dual_tol {
                    continue;
                }
                return false;
            }
            moves.push((j, want));
        }
        if !moves.is_empty() {
            for (j, want) in moves {
                self.status[j] = want;
                self.x[j] = self.nonbasic_value(j);
            }
            self.recompute_basics();
        }
        true
    }

    /// Dual simplex from a dual feasible basis. Returns `Some(Infeasible)`
    /// when primal infeasibility is proven and `None` to continue with the
    /// primal loop (primal feasible, not dual feasible, or numerical trouble).
    fn dual_phase(&mut self, limit: usize) -> Option<LpStatus> {
        let mut verified = false;
        let mut degenerate = 0usize;
        // the dual phase only accelerates; past this budget the primal loop takes over
        let budget = limit.min(self.iterations + 2 * (self.n + self.m) + 100);
        loop {
            if self.iterations >= budget || degenerate > DUAL_DEGENERATE_LIMIT {
                return None;
            }
            if self.factor.num_updates() >= REFACTOR_INTERVAL {
                self.refactor();
            }
            let d = self.reduced_costs();
            if !self.make_dual_feasible(&d) {
                return None;
            }
            let bland = degenerate > DUAL_BLAND_AFTER;
            // leaving row: largest bound violation (smallest index in Bland mode); s = 1 when below the lower bound
            let mut leave: Option<(usize, f64, f64)> = None;
            for (pos, &j) in self.head.iter().enumerate() {
                let (v, tol) = (self.x[j], self.primal_tol[j]);
                let (violation, s) = if v < self.lo[j] - tol {
                    (self.lo[j] - v, 1.0)
                } else if v > self.up[j] + tol {
                    (v - self.up[j], -1.0)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((bp, _, _)) if bland => j < self.head[bp],
                    Some((_, b, _)) => violation > b,
                };
                if better {
                    leave = Some((pos, violation, s));
                }
            }
            let (r, _, s) = leave?;
            let mut unit = vec![0.0; self.m];
            unit[r] = 1.0;
            let rho = self.factor.btran(&unit);

            // Harris ratio test on the reduced costs
            let mut relaxed_min = f64::INFINITY;
            let mut candidates: Vec<(usize, f64, f64)> = Vec::new(); // (var, alpha_r, ratio)
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = self.dot_column(j, &rho);
                if a.abs() <= DUAL_PIVOT_TOL {
                    continue;
                }
                let eligible = match st {
                    VarStatus::AtLower => s * a < 0.0,
                    VarStatus::AtUpper => s * a > 0.0,
                    _ => true,
                };
                if !eligible {
                    continue;
                }
                let dj = match st {
                    VarStatus::AtLower => d[j].max(0.0),
                    VarStatus::AtUpper => (-d[j]).max(0.0),
                    _ => d[j].abs(),
                };
                relaxed_min = relaxed_min.min((dj + self.dual_tol) / a.abs());
                candidates.push((j, a, dj / a.abs()));
            }
            let mut entering: Option<(usize, f64, f64)> = None;
            if bland {
                // exact minimum ratio, smallest index on ties
                let min = candidates.iter().fold(f64::INFINITY, |m, c| m.min(c.2));
                entering = candidates.iter().copied().find(|c| c.2 <= min);
            } else {
                for &(j, a, ratio) in &candidates {
                    if ratio <= relaxed_min && entering.is_none_or(|(_, ba, _)| a.abs() > ba.abs())
                    {
                        entering = Some((j, a, ratio));
                    }
                }
            }
            let Some((q, a_row, ratio)) = entering else {
                if !verified && self.factor.num_updates() > 0 {
                    self.refactor();
                    verified = true;
                    continue;
                }
                return Some(LpStatus::Infeasible);
            };
            verified = false;

            let alpha = self.factor.ftran(&self.dense_column(q));
            let arq = alpha[r];
            if (arq - a_row).abs() > 1e-7 * (1.0 + a_row.abs()) && self.factor.num_updates() > 0 {
                // row and column disagree on the pivot: the updated factors drifted
                self.refactor();
                continue;
            }
            if arq.abs() < 1e-9 {
                self.refactor();
                return None;
            }
            let p = self.head[r];
            let bound = if s > 0.0 { self.lo[p] } else { self.up[p] };
            let step = (self.x[p] - bound) / arq;
            for (pos, &j) in self.head.iter().enumerate() {
                if alpha[pos] != 0.0 {
                    self.x[j] -= step * alpha[pos];
                }
            }
            self.x[q] += step;
            self.status[p] = if s > 0.0 || self.lo[p] == self.up[p] {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.x[p] = self.nonbasic_value(p);
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            self.iterations += 1;
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            if arq.abs() < 1e-7 {
                self.refactor();
            } else {
                self.factor.update(r, &alpha);
            }
        }
    }

    /// Shifts each structural cost by a small deterministic amount toward
    /// its current dual-feasible side, breaking dual degeneracy.
    fn perturb_costs(&mut self) -> Vec<f64> {
        let original = self.cost.clone();
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        for j in 0..self.n {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            if self.lo[j] == self.up[j] {
                continue;
            }
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let eps = COST_PERTURBATION * (1.0 + self.cost[j].abs()) * (1.0 + u);
            match self.status[j] {
                VarStatus::AtUpper => self.cost[j] -= eps,
                VarStatus::AtLower => self.cost[j] += eps,
                _ => {}
            }
        }
        original
    }

    fn run(&mut self, limit: usize) -> LpStatus {
        let original = self.perturb_costs();
        let dual = self.dual_phase(limit);
        self.cost = original;
        if let Some(status) = dual {
            return status;
        }
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut verified = false;
        loop {
            if self.iterations >= limit {
                return LpStatus::NumericalFailure;
            }
            if self.factor.num_updates() >= REFACTOR_INTERVAL {
                self.refactor();
            }
            let phase_one = self.phase_one_costs();
            let (cb, nonbasic_cost): (Vec<f64>, bool) = match &phase_one {
                Some(c) => (c.clone(), false),
                None => (self.head.iter().map(|&j| self.cost[j]).collect(), true),
            };
            let dual_tol = if phase_one.is_some() {
                1e-9
            } else {
                self.dual_tol
            };
            let y = self.factor.btran(&cb);

            // pricing
            let mut entering: Option<(usize, f64, f64)> = None; // (var, d, direction)
            for j in 0..self.n + self.m {
                let st = self.status[j];
                if st == VarStatus::Basic {
                    continue;
                }
                if self.lo[j] == self.up[j] {
                    continue;
                }
                let cj = if nonbasic_cost { self.cost[j] } else { 0.0 };
                let d = cj - self.dot_column(j, &y);
                let dir = if d < -dual_tol && (st == VarStatus::AtLower || st == VarStatus::Free) {
                    1.0
                } else if d > dual_tol && (st == VarStatus::AtUpper || st == VarStatus::Free) {
                    -1.0
                } else {
                    continue;
                };
                let better = match entering {
                    None => true,
                    Some((_, bd, _)) => !bland && d.abs() > bd.abs(),
                };
                if better {
                    entering = Some((j, d, dir));
                }
                if bland {
                    break;
                }
            }

            let Some((q, _, dir)) = entering else {
                if !verified && self.factor.num_updates() > 0 {
                    self.refactor();
                    verified = true;
                    continue;
                }
                return if phase_one.is_some() {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            verified = false;

            let alpha = self.factor.ftran(&self.dense_column(q));
            let in_phase_one = phase_one.is_some();

            // Harris ratio test
            let mut relaxed_min = f64::INFINITY;
            let mut candidates: Vec<(usize, f64, bool)> = Vec::new(); // (pos, exact ratio, to_upper)
            for (pos, &j) in self.head.iter().enumerate() {
                let a = alpha[pos];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let v = self.x[j];
                let tol = self.primal_tol[j];
                let (bound, to_upper) = if rate < 0.0 {
                    if in_phase_one && v > self.up[j] + tol {
                        (self.up[j], true)
                    } else if in_phase_one && v < self.lo[j] - tol {
                        continue;
                    } else if self.lo[j].is_finite() {
                        (self.lo[j], false)
                    } else {
                        continue;
                    }
                } else if in_phase_one && v < self.lo[j] - tol {
                    (self.lo[j], false)
                } else if in_phase_one && v > self.up[j] + tol {
                    continue;
                } else if self.up[j].is_finite() {
                    (self.up[j], true)
                } else {
                    continue;
                };
                let exact = ((v - bound) / -rate).max(0.0);
                let relaxed = ((v - bound) + if rate < 0.0 { tol } else { -tol }) / -rate;
                relaxed_min = relaxed_min.min(relaxed.max(0.0));
                candidates.push((pos, exact, to_upper));
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            for &(pos, exact, to_upper) in &candidates {
                if exact <= relaxed_min {
                    let better = match leave {
                        None => true,
                        Some((bp, _, _)) => {
                            if bland {
                                self.head[pos] < self.head[bp]
                            } else {
                                alpha[pos].abs() > alpha[bp].abs()
                            }
                        }
                    };
                    if better {
                        leave = Some((pos, exact, to_upper));
                    }
                }
            }
            let flip = if self.lo[q].is_finite() && self.up[q].is_finite() {
                Some(self.up[q] - self.lo[q])
            } else {
                None
            };

            self.iterations += 1;
            let step = match (leave, flip) {
                (None, None) => {
                    if in_phase_one {
                        return LpStatus::NumericalFailure;
                    }
                    return LpStatus::Unbounded;
                }
                (None, Some(f)) => f,
                (Some((_, t, _)), Some(f)) if f <= t => f,
                (Some((_, t, _)), _) => t,
            };
            let is_flip = match (leave, flip) {
                (None, Some(_)) => true,
                (Some((_, t, _)), Some(f)) => f <= t,
                _ => false,
            };

            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > BLAND_AFTER_DEGENERATE {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            if step > 0.0 {
                for (pos, &j) in self.head.iter().enumerate() {
                    if alpha[pos] != 0.0 {
                        self.x[j] -= dir * step * alpha[pos];
                    }
                }
            }
            if is_flip {
                self.status[q] = if dir > 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[q] = self.nonbasic_value(q);
                continue;
            }
            let (r, _, to_upper) = leave.expect("leaving variable");
            let out = self.head[r];
            self.x[q] = self.nonbasic_value(q) + dir * step;
            self.status[out] = if to_upper {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            if self.lo[out] == self.up[out] {
                self.status[out] = VarStatus::AtLower;
            }
            self.x[out] = self.nonbasic_value(out);
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            if alpha[r].abs() < 1e-7 {
                // poorly conditioned pivot: rebuild the factors from scratch
                self.refactor();
            } else {
                self.factor.update(r, &alpha);
            }
        }
    }

    fn into_solution(mut self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let (n, m) = (self.n, self.m);
        if status != LpStatus::Optimal {
            let mut sol = LpSolution::failed(status, n, m, self.iterations);
            if status == LpStatus::Infeasible || status == LpStatus::Unbounded {
                sol.basis = Some(Basis {
                    num_vars: n,
                    statuses: self.status.clone(),
                });
            }
            return sol;
        }
        if self.factor.num_updates() > 0 {
            self.refactor();
        }
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let y = self.factor.btran(&cb);
        let reduced_costs: Vec<f64> = (0..n)
            .map(|j| self.cost[j] - self.dot_column(j, &y))
            .collect();
        let mut x: Vec<f64> = self.x[..n].to_vec();
        // snap basics that drifted within tolerance back onto their bounds
        for j in 0..n {
            if x[j] < lp.lower[j] {
                x[j] = lp.lower[j];
            } else if x[j] > lp.upper[j] {
                x[j] = lp.upper[j];
            }
        }
        let row_activity = lp.activities(&x);
        LpSolution {
            status,
            objective: lp.objective_value(&x),
            x,
            row_activity,
            duals: y,
            reduced_costs,
            basis: Some(Basis {
                num_vars: n,
                statuses: self.status,
            }),
            iterations: self.iterations,
        }
    }
}
