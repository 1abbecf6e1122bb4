//! L-shaped decomposition with cut aggregation, cut consolidation and an
//! optional trust region.
//!
//! The master is `min c^T x + sum_k p_k theta_k` where each `theta_k`
//! approximates the conditional expected recourse of scenario group `k` from
//! below by optimality cuts. Groups are contiguous: scenario `s` of `N` goes
//! to group `s * K / N`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lp::{
    solve_lp_warm, solve_mbp_with, Basis, LinearProgram, LpStatus, MbpOptions, RowSense,
};
use crate::sp::{FiniteProgram, SpError, SubproblemResult};

/// Affine minorant `theta_group >= intercept + coefficients . x` (internal sense).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub group: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Consecutive master solves at which the cut was not binding.
    pub age: usize,
}

impl Cut {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(g, v)| g * v)
                .sum::<f64>()
    }
}

/// Cut from a subproblem solved at `x_hat`; tight there by construction.
pub fn optimality_cut(x_hat: &[f64], result: &SubproblemResult, group: usize) -> Cut {
    let gx: f64 = result.gradient.iter().zip(x_hat).map(|(g, v)| g * v).sum();
    Cut {
        group,
        coefficients: result.gradient.clone(),
        intercept: result.value - gx,
        age: 0,
    }
}

/// Group of scenario `s` when `n` scenarios are split into `k` groups.
pub fn group_of(s: usize, n: usize, k: usize) -> usize {
    s * k / n
}

/// Combines one cut per scenario into `k` group cuts, each the
/// conditional-probability-weighted average of its members. Groups whose
/// total probability is zero are skipped.
pub fn aggregate(cuts: &[Cut], probabilities: &[f64], k: usize) -> Vec<Cut> {
    let n = cuts.len();
    let Some(first) = cuts.first() else {
        return Vec::new();
    };
    let dim = first.coefficients.len();
    let mut weight = vec![0.0; k];
    for s in 0..n {
        weight[group_of(s, n, k)] += probabilities[s];
    }
    let mut out: Vec<Cut> = (0..k)
        .map(|g| Cut {
            group: g,
            coefficients: vec![0.0; dim],
            intercept: 0.0,
            age: 0,
        })
        .collect();
    for (s, cut) in cuts.iter().enumerate() {
        let g = group_of(s, n, k);
        if weight[g] <= 0.0 {
            continue;
        }
        let w = probabilities[s] / weight[g];
        if k == n {
            out[g] = Cut {
                group: g,
                ..cut.clone()
            };
            continue;
        }
        out[g].intercept += w * cut.intercept;
        for (a, b) in out[g].coefficients.iter_mut().zip(&cut.coefficients) {
            *a += w * b;
        }
    }
    (0..k)
        .filter(|&g| weight[g] > 0.0)
        .map(|g| out[g].clone())
        .collect()
}

/// Iterations, in multiples of the current age limit, after which the age
/// limit doubles.
const RELAX_FACTOR: usize = 10;

/// Removes cuts whose inactivity age reached `age_limit`; returns the
/// removed positions (ascending). `None` never removes anything.
pub fn consolidate(pool: &mut Vec<Cut>, age_limit: Option<usize>) -> Vec<usize> {
    let Some(limit) = age_limit else {
        return Vec::new();
    };
    let removed: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].age >= limit).collect();
    let mut i = 0;
    pool.retain(|_| {
        let keep = removed.binary_search(&i).is_err();
        i += 1;
        keep
    });
    removed
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionParams {
    /// Minimum actual/predicted ratio for a serious step.
    pub accept_ratio: f64,
    pub expand: f64,
    pub shrink: f64,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            accept_ratio: 0.1,
            expand: 2.0,
            shrink: 0.5,
        }
    }
}

/// Ratio above which an accepted step enlarges the region.
pub const STRONG_STEP_RATIO: f64 = 0.75;

/// Trust-region update: returns whether the candidate is accepted and the new radius.
pub fn trust_region_step(
    predicted_decrease: f64,
    actual_decrease: f64,
    delta: f64,
    delta_max: f64,
    params: &TrustRegionParams,
) -> (bool, f64) {
    if !(predicted_decrease > 0.0) {
        return (false, params.shrink * delta);
    }
    let ratio = actual_decrease / predicted_decrease;
    if ratio >= STRONG_STEP_RATIO {
        (true, (params.expand * delta).min(delta_max))
    } else if ratio >= params.accept_ratio {
        (true, delta)
    } else {
        (false, params.shrink * delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "groups")]
pub enum Formulation {
    /// One `theta` per scenario.
    Multi,
    /// A single `theta` for the whole expectation.
    Single,
    /// `K` scenario groups.
    Partial(usize),
}

impl Formulation {
    pub fn groups(self, scenarios: usize) -> usize {
        match self {
            Formulation::Multi => scenarios,
            Formulation::Single => 1,
            Formulation::Partial(k) => k.clamp(1, scenarios),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Consolidation {
    /// 5 for masters with binaries, never for LP masters.
    Default,
    Never,
    After(usize),
}

impl Consolidation {
    pub fn age_limit(self, binary_master: bool) -> Option<usize> {
        match self {
            Consolidation::Default => binary_master.then_some(5),
            Consolidation::Never => None,
            Consolidation::After(k) => Some(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrustRegionConfig {
    pub enabled: bool,
    /// Initial radius; `None` is 10% of the first-stage bound range.
    pub initial: Option<f64>,
    /// Largest radius; `None` is the full bound range.
    pub max: Option<f64>,
    pub params: TrustRegionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LShapedConfig {
    pub formulation: Formulation,
    pub consolidation: Consolidation,
    pub trust_region: TrustRegionConfig,
    pub max_iterations: usize,
    /// Stop when `upper - lower <= gap_tolerance * (1 + |upper|)`.
    pub gap_tolerance: f64,
    pub parallel: bool,
    /// Points evaluated (and cut at) before the first master solve.
    #[serde(default)]
    pub initial_points: Vec<Vec<f64>>,
}

impl Default for LShapedConfig {
    fn default() -> Self {
        Self {
            formulation: Formulation::Multi,
            consolidation: Consolidation::Default,
            trust_region: TrustRegionConfig::default(),
            max_iterations: 1000,
            gap_tolerance: 1e-8,
            parallel: true,
            initial_points: Vec::new(),
        }
    }
}

impl LShapedConfig {
    pub fn validate(&self) -> Result<(), SpError> {
        let p = &self.trust_region.params;
        if !(0.0 < p.accept_ratio && p.accept_ratio < 1.0 && p.expand > 1.0) {
            return Err(SpError::Argument(
                "trust region needs 0 < accept_ratio < 1 < expand".into(),
            ));
        }
        if !(0.0 < p.shrink && p.shrink < 1.0) {
            return Err(SpError::Argument(
                "trust region needs 0 < shrink < 1".into(),
            ));
        }
        if let Formulation::Partial(0) = self.formulation {
            return Err(SpError::Argument(
                "partial aggregation needs at least one group".into(),
            ));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(SpError::Argument(
                "gap tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Master objective in user sense (boxed when the trust region is active).
    pub master_obj: f64,
    /// Expected recourse at the evaluated point, user sense.
    pub expected_recourse: f64,
    /// Relative gap between incumbent and best lower bound.
    pub gap: f64,
    pub delta: Option<f64>,
    pub cuts_added: usize,
    pub cuts_removed: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct LShapedResult {
    pub x: Vec<f64>,
    /// Expected objective of `x`, user sense.
    pub objective: f64,
    /// Best master bound, user sense (an upper bound for maximization).
    pub bound: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final cut pool (internal sense, `theta_group >= ...`).
    pub cuts: Vec<Cut>,
    /// Probability mass of each group.
    pub group_probabilities: Vec<f64>,
    pub log: Vec<IterationRecord>,
}

impl LShapedResult {
    /// Gap between incumbent and bound relative to `1 + |objective|`.
    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.bound).abs() / (1.0 + self.objective.abs())
    }
}

pub fn write_iteration_log<W: Write>(
    out: W,
    log: &[IterationRecord],
    with_timing: bool,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record([
        "iteration",
        "master_obj",
        "expected_recourse",
        "gap",
        "delta",
        "cuts_added",
        "cuts_removed",
        "wall_time_ms",
    ])
    .map_err(err)?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            format!("{}", r.master_obj),
            format!("{}", r.expected_recourse),
            format!("{}", r.gap),
            r.delta.map(|d| format!("{d}")).unwrap_or_default(),
            r.cuts_added.to_string(),
            r.cuts_removed.to_string(),
            if with_timing {
                format!("{:.3}", r.wall_time_ms)
            } else {
                String::new()
            },
        ])
        .map_err(err)?;
    }
    w.flush()
}

struct Evaluation {
    value: f64,
    recourse: f64,
    cuts: Vec<Cut>,
}

struct Master<'a> {
    fp: &'a FiniteProgram,
    groups: usize,
    group_prob: Vec<f64>,
    pool: Vec<Cut>,
    basis: Option<Basis>,
    /// Whether the previous master carried a Hamming row (last row).
    had_hamming: bool,
}

struct MasterSolution {
    x: Vec<f64>,
    theta: Vec<f64>,
    objective: f64,
    /// Row activity slack of every pool cut.
    cut_slack: Vec<f64>,
}

impl<'a> Master<'a> {
    fn build(&self, center: Option<(&[f64], f64)>) -> (LinearProgram, bool) {
        let prog = &self.fp.program;
        let n = prog.num_first_stage();
        let mut lp = prog.first_stage().clone();
        for k in 0..self.groups {
            lp.add_var(self.group_prob[k], f64::NEG_INFINITY, f64::INFINITY);
        }
        for cut in &self.pool {
            let mut coeffs: Vec<(usize, f64)> = vec![(n + cut.group, 1.0)];
            coeffs.extend(
                cut.coefficients
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| **g != 0.0)
                    .map(|(j, &g)| (j, -g)),
            );
            lp.add_row(coeffs, RowSense::Ge, cut.intercept);
        }
        let mut hamming = false;
        if let Some((xc, delta)) = center {
            let bins = prog.binaries();
            let mut is_bin = vec![false; n];
            for &j in bins {
                is_bin[j] = true;
            }
            for j in 0..n {
                if !is_bin[j] {
                    lp.lower[j] = lp.lower[j].max(xc[j] - delta);
                    lp.upper[j] = lp.upper[j].min(xc[j] + delta);
                    if lp.lower[j] > lp.upper[j] {
                        // center sits a hair outside its own bounds after rounding
                        let mid =
                            xc[j].clamp(prog.first_stage().lower[j], prog.first_stage().upper[j]);
                        lp.lower[j] = mid;
                        lp.upper[j] = mid;
                    }
                }
            }
            if !bins.is_empty() && (delta.floor() as usize) < bins.len() {
                let mut coeffs = Vec::with_capacity(bins.len());
                let mut ones = 0.0;
                for &j in bins {
                    if xc[j] > 0.5 {
                        coeffs.push((j, -1.0));
                        ones += 1.0;
                    } else {
                        coeffs.push((j, 1.0));
                    }
                }
                lp.add_row(coeffs, RowSense::Le, delta.floor() - ones);
                hamming = true;
            }
        }
        (lp, hamming)
    }

    fn warm_basis(&self, lp: &LinearProgram, hamming: bool) -> Option<Basis> {
        let b = self.basis.as_ref()?;
        let mut b = if self.had_hamming {
            b.without_rows(&[b.num_rows() - 1])?
        } else {
            b.clone()
        };
        let have = b.num_rows();
        let want = lp.num_rows() - usize::from(hamming);
        if have > want {
            return None;
        }
        b = b.with_rows_appended(want - have + usize::from(hamming));
        (b.statuses.len() == lp.num_vars() + lp.num_rows()).then_some(b)
    }

    fn solve(&mut self, center: Option<(&[f64], f64)>) -> Result<MasterSolution, SpError> {
        let (lp, hamming) = self.build(center);
        let warm = self.warm_basis(&lp, hamming);
        let bins = self.fp.program.binaries();
        let sol = if bins.is_empty() {
            let s = solve_lp_warm(&lp, warm.as_ref());
            if s.status == LpStatus::NumericalFailure && warm.is_some() {
                solve_lp_warm(&lp, None)
            } else {
                s
            }
        } else {
            solve_mbp_with(&lp, bins, warm.as_ref(), &MbpOptions::default())
                .map_err(|e| SpError::Structural(e.to_string()))?
        };
        if !sol.is_optimal() {
            return Err(SpError::Solver {
                context: "master problem".into(),
                status: sol.status,
            });
        }
        self.basis = sol.basis.clone();
        self.had_hamming = hamming;
        let n = self.fp.program.num_first_stage();
        let first_rows = self.fp.program.first_stage().num_rows();
        let cut_slack = (0..self.pool.len())
            .map(|i| sol.row_activity[first_rows + i] - lp.rows[first_rows + i].rhs)
            .collect();
        Ok(MasterSolution {
            x: sol.x[..n].to_vec(),
            theta: sol.x[n..n + self.groups].to_vec(),
            objective: sol.objective,
            cut_slack,
        })
    }

    /// Updates ages from the latest master solution and drops stale cuts.
    fn age_and_consolidate(&mut self, ms: &MasterSolution, limit: Option<usize>) -> usize {
        for (cut, &slack) in self.pool.iter_mut().zip(&ms.cut_slack) {
            let scale = 1.0 + cut.intercept.abs();
            if slack <= 1e-7 * scale {
                cut.age = 0;
            } else {
                cut.age += 1;
            }
        }
        let removed = consolidate(&mut self.pool, limit);
        if !removed.is_empty() {
            let first_rows = self.fp.program.first_stage().num_rows();
            let rows: Vec<usize> = removed.iter().map(|&i| first_rows + i).collect();
            self.basis = self.basis.as_ref().and_then(|b| {
                let b = if self.had_hamming {
                    b.without_rows(&[b.num_rows() - 1])?
                } else {
                    b.clone()
                };
                b.without_rows(&rows)
            });
            if self.basis.is_some() {
                self.had_hamming = false;
            }
        }
        removed.len()
    }

    /// Adds cuts that are violated at `(x, theta)` (all of them when `theta` is unknown).
    fn add_cuts(&mut self, cuts: Vec<Cut>, x: &[f64], theta: Option<&[f64]>) -> usize {
        let mut added = 0;
        for cut in cuts {
            let v = cut.value(x);
            let violated = match theta {
                None => true,
                Some(t) => v > t[cut.group] + 1e-10 * (1.0 + v.abs()),
            };
            let has_cut = self.pool.iter().any(|c| c.group == cut.group);
            if !violated && has_cut {
                continue;
            }
            let duplicate = self.pool.iter().any(|c| {
                c.group == cut.group
                    && (c.intercept - cut.intercept).abs() <= 1e-12 * (1.0 + c.intercept.abs())
                    && c.coefficients
                        .iter()
                        .zip(&cut.coefficients)
                        .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            });
            if !duplicate {
                self.pool.push(cut);
                added += 1;
            }
        }
        added
    }
}

fn evaluate(
    fp: &FiniteProgram,
    x: &[f64],
    groups: usize,
    warm: &mut [Option<Basis>],
    parallel: bool,
) -> Result<Evaluation, SpError> {
    let results: Vec<SubproblemResult> = if parallel {
        fp.solve_subproblems(x, Some(warm))?
    } else {
        (0..fp.num_scenarios())
            .map(|s| fp.subproblem(s).solve(x, warm[s].as_ref(), s))
            .collect::<Result<_, _>>()?
    };
    let probs = fp.probabilities();
    let n = fp.num_scenarios();
    let mut recourse = 0.0;
    let mut cuts = Vec::with_capacity(n);
    for (s, r) in results.iter().enumerate() {
        recourse += probs[s] * r.value;
        cuts.push(optimality_cut(x, r, group_of(s, n, groups)));
    }
    for (w, r) in warm.iter_mut().zip(results) {
        *w = r.solution.basis;
    }
    let cuts = aggregate(&cuts, &probs, groups);
    Ok(Evaluation {
        value: fp.program.first_stage_cost(x) + recourse,
        recourse,
        cuts,
    })
}

fn bound_range(fp: &FiniteProgram) -> (f64, f64) {
    let prog = &fp.program;
    let fs = prog.first_stage();
    let bins = prog.binaries();
    let mut range = 0.0f64;
    let mut unbounded = false;
    for j in 0..fs.num_vars() {
        if bins.contains(&j) {
            continue;
        }
        let r = fs.upper[j] - fs.lower[j];
        if r.is_finite() {
            range = range.max(r);
        } else {
            unbounded = true;
        }
    }
    if !bins.is_empty() {
        range = range.max(bins.len() as f64);
    }
    if range <= 0.0 {
        range = 1.0;
    }
    (range, if unbounded { f64::INFINITY } else { range })
}

/// Runs the L-shaped method on `fp`.
pub fn solve(fp: &FiniteProgram, config: &LShapedConfig) -> Result<LShapedResult, SpError> {
    config.validate()?;
    let start = Instant::now();
    let prog = &fp.program;
    let sense = prog.sense;
    let n_scen = fp.num_scenarios();
    let groups = config.formulation.groups(n_scen);
    let probs = fp.probabilities();
    let mut group_prob = vec![0.0; groups];
    for s in 0..n_scen {
        group_prob[group_of(s, n_scen, groups)] += probs[s];
    }
    let mut age_limit = config.consolidation.age_limit(!prog.binaries().is_empty());

    let mut master = Master {
        fp,
        groups,
        group_prob: group_prob.clone(),
        pool: Vec::new(),
        basis: None,
        had_hamming: false,
    };
    let mut warm: Vec<Option<Basis>> = vec![None; n_scen];
    let mut log = Vec::new();
    let tol = config.gap_tolerance;

    // starting points
    let mut starts = config.initial_points.clone();
    for x in &starts {
        fp.check_decision(x)?;
    }
    if starts.is_empty() {
        let fs = prog.first_stage();
        let sol = if prog.binaries().is_empty() {
            solve_lp_warm(fs, None)
        } else {
            solve_mbp_with(fs, prog.binaries(), None, &MbpOptions::default())
                .map_err(|e| SpError::Structural(e.to_string()))?
        };
        if !sol.is_optimal() {
            return Err(SpError::Solver {
                context: "first-stage problem".into(),
                status: sol.status,
            });
        }
        starts.push(sol.x);
    }
    let mut best_x = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    for x in &starts {
        let ev = evaluate(fp, x, groups, &mut warm, config.parallel)?;
        let added = master.add_cuts(ev.cuts, x, None);
        if ev.value < best_val {
            best_val = ev.value;
            best_x = x.clone();
        }
        log.push(IterationRecord {
            iteration: log.len(),
            master_obj: f64::NAN,
            expected_recourse: sense.to_user(ev.recourse),
            gap: f64::INFINITY,
            delta: None,
            cuts_added: added,
            cuts_removed: 0,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let tr = config.trust_region.enabled;
    let (range, range_max) = bound_range(fp);
    let delta_max = config.trust_region.max.unwrap_or(range_max);
    let mut delta = config
        .trust_region
        .initial
        .unwrap_or(0.1 * range)
        .min(delta_max);
    let mut center = best_x.clone();
    let mut center_val = best_val;
    let converged_at = |ub: f64, lb: f64| ub - lb <= tol * (1.0 + ub.abs());
    // dropping cuts can make the method chase its tail, so the age limit
    // doubles on a geometric schedule and removal thins out on long runs
    let mut since_relaxed = 0usize;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let mut step_delta = None;
        let (ms, predicted) = if tr {
            let boxed = master.solve(Some((&center, delta)))?;
            let predicted = center_val - boxed.objective;
            if predicted <= tol * (1.0 + center_val.abs()) {
                // no progress possible inside the region: check globally
                let global = master.solve(None)?;
                lower = lower.max(global.objective);
                if converged_at(best_val, lower) {
                    converged = true;
                    let removed = master.age_and_consolidate(&global, age_limit);
                    push_record(
                        &mut log,
                        sense,
                        &global,
                        f64::NAN,
                        best_val,
                        lower,
                        None,
                        0,
                        removed,
                        start,
                    );
                    break;
                }
                delta = delta_max;
                let predicted = center_val - global.objective;
                (global, predicted)
            } else {
                step_delta = Some(delta);
                (boxed, predicted)
            }
        } else {
            let ms = master.solve(None)?;
            lower = lower.max(ms.objective);
            (ms, 0.0)
        };
        if !tr && converged_at(best_val, lower) {
            converged = true;
            let removed = master.age_and_consolidate(&ms, age_limit);
            push_record(
                &mut log,
                sense,
                &ms,
                f64::NAN,
                best_val,
                lower,
                None,
                0,
                removed,
                start,
            );
            break;
        }
        let removed = master.age_and_consolidate(&ms, age_limit);
        let x = ms.x.clone();
        let ev = evaluate(fp, &x, groups, &mut warm, config.parallel)?;
        let added = master.add_cuts(ev.cuts, &x, Some(&ms.theta));
        if ev.value < best_val {
            best_val = ev.value;
            best_x = x.clone();
        }
        if tr {
            let actual = center_val - ev.value;
            let (accept, new_delta) = trust_region_step(
                predicted,
                actual,
                delta,
                delta_max,
                &config.trust_region.params,
            );
            if accept {
                center = x;
                center_val = ev.value;
            }
            delta = new_delta;
        }
        push_record(
            &mut log,
            sense,
            &ms,
            ev.recourse,
            best_val,
            lower,
            if tr {
                Some(step_delta.unwrap_or(delta))
            } else {
                None
            },
            added,
            removed,
            start,
        );
        if !tr && converged_at(best_val, lower) {
            converged = true;
            break;
        }
        if let Some(limit) = age_limit {
            since_relaxed += 1;
            if since_relaxed >= RELAX_FACTOR * limit {
                age_limit = Some(2 * limit);
                since_relaxed = 0;
            }
        }
        if added == 0 && !tr {
            // every cut is already satisfied: the master bound is as tight as
            // this pool allows and further iterations cannot move it
            converged = converged_at(best_val, lower);
            break;
        }
    }

    Ok(LShapedResult {
        x: best_x,
        objective: sense.to_user(best_val),
        bound: sense.to_user(lower),
        converged,
        iterations,
        cuts: master.pool,
        group_probabilities: group_prob,
        log,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_record(
    log: &mut Vec<IterationRecord>,
    sense: crate::sp::Sense,
    ms: &MasterSolution,
    recourse: f64,
    best: f64,
    lower: f64,
    delta: Option<f64>,
    added: usize,
    removed: usize,
    start: Instant,
) {
    log.push(IterationRecord {
        iteration: log.len(),
        master_obj: sense.to_user(ms.objective),
        expected_recourse: sense.to_user(recourse),
        gap: ((best - lower) / (1.0 + best.abs())).max(0.0),
        delta,
        cuts_added: added,
        cuts_removed: removed,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut(group: usize, g: f64, a: f64) -> Cut {
        Cut {
            group,
            coefficients: vec![g],
            intercept: a,
            age: 0,
        }
    }

    #[test]
    fn single_cut_averages_members() {
        let cuts = [cut(0, -1.0, 1.0), cut(1, 1.0, -1.0)];
        let agg = aggregate(&cuts, &[0.5, 0.5], 1);
        assert_eq!(agg, vec![cut(0, 0.0, 0.0)]);
    }

    #[test]
    fn multi_cut_is_identity() {
        let cuts = [cut(0, -1.0, 1.0), cut(1, 2.0, 3.0), cut(2, 0.5, 0.0)];
        assert_eq!(aggregate(&cuts, &[0.2, 0.3, 0.5], 3), cuts.to_vec());
    }

    #[test]
    fn zero_weight_group_is_skipped() {
        let cuts = [cut(0, -1.0, 1.0), cut(1, 2.0, 3.0)];
        let agg = aggregate(&cuts, &[1.0, 0.0], 2);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].group, 0);
    }

    #[test]
    fn consolidation_drops_stale_cuts_only() {
        let mut pool = vec![cut(0, 1.0, 0.0), cut(0, 2.0, 0.0)];
        assert!(consolidate(&mut pool, None).is_empty());
        for iteration in 1..=3 {
            pool[0].age += 1; // never binding
            pool[1].age = 0;
            let removed = consolidate(&mut pool, Some(3));
            if iteration < 3 {
                assert!(removed.is_empty());
            } else {
                assert_eq!(removed, vec![0]);
            }
        }
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].coefficients, vec![2.0]);
    }

    #[test]
    fn trust_region_rules() {
        let p = TrustRegionParams::default();
        assert_eq!(trust_region_step(1.0, 1.0, 2.0, 10.0, &p), (true, 4.0));
        assert_eq!(trust_region_step(1.0, 1.0, 8.0, 10.0, &p), (true, 10.0));
        assert_eq!(trust_region_step(1.0, 0.0, 2.0, 10.0, &p), (false, 1.0));
        assert_eq!(trust_region_step(1.0, 0.5, 2.0, 10.0, &p), (true, 2.0));
        assert_eq!(trust_region_step(0.0, 0.5, 2.0, 10.0, &p), (false, 1.0));
    }

    #[test]
    fn group_map_is_contiguous() {
        let g: Vec<usize> = (0..10).map(|s| group_of(s, 10, 3)).collect();
        assert_eq!(g, vec![0, 0, 0, 0, 1, 1, 1, 2, 2, 2]);
    }
}
