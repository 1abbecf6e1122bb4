//! Embedded linear programming kernel.
//!
//! [`solve_lp`] runs a bounded revised primal simplex (sparse LU basis
//! factorization, Dantzig pricing with a Bland fallback after long degenerate
//! stalls) and returns primal values, one dual multiplier per row and reduced
//! costs. [`solve_mbp`] adds best-first branch-and-bound for binary variables.
//!
//! Problems are always minimized. Row duals follow the sensitivity
//! convention `d objective / d rhs`, so a binding `>=` row has a non-negative
//! dual and a binding `<=` row a non-positive one.

mod lpfile;
mod lu;
mod mbp;
mod simplex;

use serde::{Deserialize, Serialize};

pub use lpfile::write_lp_format;
pub use mbp::{solve_mbp, solve_mbp_with, MbpOptions};
pub use simplex::{solve_lp_with, SimplexOptions};

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-7;
/// Distance from 0/1 under which a binary is considered integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `min c^T x + offset` subject to row constraints and variable bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    CrossedBounds { var: usize, lower: f64, upper: f64 },
    #[error("row {row} references variable {var} but the program has {num_vars} variables")]
    ColumnOutOfRange {
        row: usize,
        var: usize,
        num_vars: usize,
    },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BadBinary(usize),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(Constraint { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::NonFinite("bound vectors of wrong length".into()));
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(LpError::NonFinite(format!("objective coefficient {j}")));
            }
            if self.lower[j].is_nan()
                || self.upper[j].is_nan()
                || self.lower[j] == f64::INFINITY
                || self.upper[j] == f64::NEG_INFINITY
            {
                return Err(LpError::NonFinite(format!("bounds of variable {j}")));
            }
            if self.lower[j] > self.upper[j] {
                return Err(LpError::CrossedBounds {
                    var: j,
                    lower: self.lower[j],
                    upper: self.upper[j],
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("right-hand side of row {i}")));
            }
            for &(j, v) in &row.coeffs {
                if j >= n {
                    return Err(LpError::ColumnOutOfRange {
                        row: i,
                        var: j,
                        num_vars: n,
                    });
                }
                if !v.is_finite() {
                    return Err(LpError::NonFinite(format!("coefficient ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Largest bound or row violation of `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for (row, act) in self.rows.iter().zip(self.activities(x)) {
            let v = match row.sense {
                RowSense::Le => act - row.rhs,
                RowSense::Ge => row.rhs - act,
                RowSense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot limit reached or the basis could not be repaired.
    NumericalFailure,
    /// Branch-and-bound node limit reached; the best incumbent (if any) is attached.
    NodeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

/// Simplex basis over structural variables followed by one logical per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub num_vars: usize,
    pub statuses: Vec<VarStatus>,
}

impl Basis {
    pub fn num_rows(&self) -> usize {
        self.statuses.len() - self.num_vars
    }

    /// Basis for the same program with `count` rows appended; the new rows' logicals are basic.
    pub fn with_rows_appended(&self, count: usize) -> Basis {
        let mut statuses = self.statuses.clone();
        statuses.extend(std::iter::repeat_n(VarStatus::Basic, count));
        Basis {
            num_vars: self.num_vars,
            statuses,
        }
    }

    /// Drops the given rows. Returns `None` when a dropped row's logical is
    /// nonbasic (the remaining statuses would not form a basis).
    pub fn without_rows(&self, rows: &[usize]) -> Option<Basis> {
        let mut drop = vec![false; self.num_rows()];
        for &r in rows {
            if self.statuses[self.num_vars + r] != VarStatus::Basic {
                return None;
            }
            drop[r] = true;
        }
        let mut statuses = self.statuses[..self.num_vars].to_vec();
        statuses.extend(
            self.statuses[self.num_vars..]
                .iter()
                .zip(&drop)
                .filter(|(_, &d)| !d)
                .map(|(s, _)| *s),
        );
        Some(Basis {
            num_vars: self.num_vars,
            statuses,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: vec![f64::NAN; n],
            row_activity: vec![f64::NAN; m],
            duals: vec![f64::NAN; m],
            reduced_costs: vec![f64::NAN; n],
            basis: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` from a slack basis.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    solve_lp_with(lp, None, &SimplexOptions::default())
}

/// Solves `lp` starting from `basis` when it fits the program.
pub fn solve_lp_warm(lp: &LinearProgram, basis: Option<&Basis>) -> LpSolution {
    solve_lp_with(lp, basis, &SimplexOptions::default())
}
