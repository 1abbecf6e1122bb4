//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    solve_lp_with, Basis, LinearProgram, LpError, LpSolution, LpStatus, SimplexOptions,
    INTEGRALITY_TOL,
};

/// Nodes whose relaxation bound is within this of the incumbent are pruned.
pub const BOUND_PRUNE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MbpOptions {
    pub node_limit: usize,
    pub simplex: SimplexOptions,
}

impl Default for MbpOptions {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            simplex: SimplexOptions::default(),
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64)>,
    basis: Option<Basis>,
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
    // BinaryHeap is a max-heap: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves `lp` with the variables in `binaries` restricted to {0, 1}.
pub fn solve_mbp(lp: &LinearProgram, binaries: &[usize]) -> Result<LpSolution, LpError> {
    solve_mbp_with(lp, binaries, None, &MbpOptions::default())
}

/// As [`solve_mbp`], with a warm-start basis for the root relaxation.
///
/// On success the returned solution comes from a final LP with all binaries
/// fixed at their incumbent values, so duals and reduced costs are those of
/// the continuous problem around the chosen integer point.
pub fn solve_mbp_with(
    lp: &LinearProgram,
    binaries: &[usize],
    root_basis: Option<&Basis>,
    opts: &MbpOptions,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    for &j in binaries {
        if j >= lp.num_vars() || lp.lower[j] < 0.0 || lp.upper[j] > 1.0 {
            return Err(LpError::BadBinary(j));
        }
    }
    let mut work = lp.clone();
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        fixings: Vec::new(),
        basis: root_basis.cloned(),
    });
    let mut seq = 1;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut total_iterations = 0usize;
    let mut root_unbounded = false;

    while let Some(node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - BOUND_PRUNE_TOL {
                continue;
            }
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            break;
        }
        nodes += 1;
        work.lower.clone_from(&lp.lower);
        work.upper.clone_from(&lp.upper);
        for &(j, v) in &node.fixings {
            work.lower[j] = v;
            work.upper[j] = v;
        }
        let sol = solve_lp_with(&work, node.basis.as_ref(), &opts.simplex);
        total_iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                if node.fixings.is_empty() {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
            _ => {
                let mut failed =
                    LpSolution::failed(sol.status, lp.num_vars(), lp.num_rows(), total_iterations);
                if let Some((obj, x)) = incumbent {
                    failed.objective = obj;
                    failed.x = x;
                }
                return Ok(failed);
            }
        }
        if let Some((best, _)) = &incumbent {
            if sol.objective >= best - BOUND_PRUNE_TOL {
                continue;
            }
        }
        // most fractional binary, lowest index on ties
        let mut branch: Option<(usize, f64)> = None;
        for &j in binaries {
            let v = sol.x[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let mut x = sol.x.clone();
                for &j in binaries {
                    x[j] = x[j].round();
                }
                incumbent = Some((sol.objective, x));
            }
            Some((j, _)) => {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound: sol.objective,
                        seq,
                        fixings,
                        basis: sol.basis.clone(),
                    });
                    seq += 1;
                }
            }
        }
    }

    if root_unbounded {
        return Ok(LpSolution::failed(
            LpStatus::Unbounded,
            lp.num_vars(),
            lp.num_rows(),
            total_iterations,
        ));
    }
    let hit_limit = !heap.is_empty()
        && incumbent
            .as_ref()
            .is_none_or(|(best, _)| heap.iter().any(|n| n.bound < best - BOUND_PRUNE_TOL));
    let Some((_, x)) = incumbent else {
        let status = if hit_limit {
            LpStatus::NodeLimit
        } else {
            LpStatus::Infeasible
        };
        return Ok(LpSolution::failed(
            status,
            lp.num_vars(),
            lp.num_rows(),
            total_iterations,
        ));
    };

    work.lower.clone_from(&lp.lower);
    work.upper.clone_from(&lp.upper);
    for &j in binaries {
        work.lower[j] = x[j];
        work.upper[j] = x[j];
    }
    let mut fin = solve_lp_with(&work, None, &opts.simplex);
    fin.iterations += total_iterations;
    if !fin.is_optimal() {
        let mut failed = LpSolution::failed(
            LpStatus::NumericalFailure,
            lp.num_vars(),
            lp.num_rows(),
            fin.iterations,
        );
        failed.x = x;
        return Ok(failed);
    }
    if hit_limit {
        fin.status = LpStatus::NodeLimit;
    }
    Ok(fin)
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn knapsack_style_rounding() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, 1.0);
        let y = lp.add_var(-1.0, 0.0, 1.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], RowSense::Le, 1.5);
        let sol = solve_mbp(&lp, &[x, y]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn integral_relaxation_matches_lp() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-2.0, 0.0, 1.0);
        let y = lp.add_var(1.0, 0.0, 4.0);
        lp.add_row(vec![(x, 1.0), (y, -1.0)], RowSense::Le, 0.0);
        let a = solve_lp(&lp);
        let b = solve_mbp(&lp, &[x]).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-12);
        assert_eq!(b.x[x], 1.0);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let mut lp = LinearProgram::new();
        let vars: Vec<usize> = (0..10)
            .map(|i| lp.add_var(-(1.0 + 0.1 * i as f64), 0.0, 1.0))
            .collect();
        lp.add_row(
            vars.iter().map(|&j| (j, 1.0 + 0.37 * j as f64)).collect(),
            RowSense::Le,
            7.3,
        );
        let opts = MbpOptions {
            node_limit: 3,
            ..Default::default()
        };
        let sol = solve_mbp_with(&lp, &vars, None, &opts).unwrap();
        assert_eq!(sol.status, LpStatus::NodeLimit);
    }

    #[test]
    fn rejects_non_binary_bounds() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 2.0);
        assert_eq!(solve_mbp(&lp, &[x]).unwrap_err(), LpError::BadBinary(x));
    }
}
