//! Sample average approximation: statistical bounds on the optimal value,
//! expected-value-decision intervals and the value of the stochastic solution.
//!
//! All randomness is derived from one seed: every solved instance and every
//! evaluation batch gets a child seed from [`child_seed`], so reports are
//! reproducible and independent of thread scheduling.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::lshaped::{self, LShapedConfig};
use crate::sp::{
    build_deterministic_equivalent, FiniteProgram, ScenarioSampler, Sense, SpError, TwoStageProgram,
};

/// Seed streams, so that instances and batches never share draws.
pub mod stream {
    pub const LOWER_BOUND: u64 = 1;
    pub const CANDIDATE: u64 = 2;
    pub const EVALUATION: u64 = 3;
    pub const EEV_MEAN: u64 = 4;
    pub const EEV_EVALUATION: u64 = 5;
    pub const REFINE: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for item `index` of `stream` under `seed`.
pub fn child_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)).wrapping_add(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    /// `U_T`: value of a fixed decision.
    Upper,
    /// `L_{N,M}`: mean of sampled optimal values.
    Lower,
    Vrp,
    Eev,
    Vss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub kind: EstimateKind,
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
}

impl ConfidenceReport {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Width relative to `|estimate|` (infinite for a zero estimate with positive width).
    pub fn relative_width(&self) -> f64 {
        let w = self.width();
        if w == 0.0 {
            0.0
        } else {
            w / self.estimate.abs()
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), SpError> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(SpError::Argument(format!(
            "significance level {alpha} must lie in (0, 0.5)"
        )))
    }
}

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of freedom, `t >= 0`.
fn t_upper_tail(t: f64, df: f64) -> f64 {
    0.5 * beta_reg(0.5 * df, 0.5, df / (df + t * t))
}

/// Critical value `t` with `P(T > t) = alpha_half`, by bisection on the
/// regularized incomplete beta function.
pub fn t_quantile(alpha_half: f64, df: f64) -> Result<f64, SpError> {
    if !(df >= 1.0) {
        return Err(SpError::Argument(format!(
            "t quantile needs df >= 1, got {df}"
        )));
    }
    if !(alpha_half > 0.0 && alpha_half < 0.5) {
        return Err(SpError::Argument(format!(
            "tail probability {alpha_half} must lie in (0, 0.5)"
        )));
    }
    let mut hi = 1.0;
    while t_upper_tail(hi, df) > alpha_half {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if t_upper_tail(mid, df) > alpha_half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard normal critical value `z` with `P(Z > z) = alpha_half`.
pub fn z_quantile(alpha_half: f64) -> Result<f64, SpError> {
    if !(alpha_half > 0.0 && alpha_half < 0.5) {
        return Err(SpError::Argument(format!(
            "tail probability {alpha_half} must lie in (0, 0.5)"
        )));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - alpha_half))
}

/// Sample mean and sample standard deviation (divisor `n - 1`).
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and t half-width `t_{alpha/2, k-1} sigma / sqrt(k)` of `k >= 2` replicate values.
pub fn t_interval(values: &[f64], alpha: f64) -> Result<(f64, f64), SpError> {
    check_alpha(alpha)?;
    if values.len() < 2 {
        return Err(SpError::Argument(
            "at least two replicates are needed for a variance".into(),
        ));
    }
    let (mean, sd) = mean_and_std(values);
    let k = values.len() as f64;
    Ok((mean, t_quantile(alpha / 2.0, k - 1.0)? * sd / k.sqrt()))
}

/// `U_T` interval from batch values.
pub fn upper_report_from_values(
    values: &[f64],
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceReport, SpError> {
    let (mean, hw) = t_interval(values, alpha)?;
    Ok(ConfidenceReport {
        kind: EstimateKind::Upper,
        lo: mean - hw,
        hi: mean + hw,
        estimate: mean,
        n,
        m: None,
        t: Some(values.len()),
        alpha,
        seed,
        significant: None,
    })
}

/// `L_{N,M}` interval from sampled optimal values.
pub fn lower_report_from_values(
    values: &[f64],
    n: usize,
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceReport, SpError> {
    let (mean, hw) = t_interval(values, alpha)?;
    Ok(ConfidenceReport {
        kind: EstimateKind::Lower,
        lo: mean - hw,
        hi: mean + hw,
        estimate: mean,
        n,
        m: Some(values.len()),
        t: None,
        alpha,
        seed,
        significant: None,
    })
}

/// EEV interval `mean +- z sigma / sqrt(N)` from per-scenario values `c^T x + Q(x, xi_i)`.
pub fn eev_report_from_values(
    values: &[f64],
    alpha: f64,
    seed: u64,
) -> Result<ConfidenceReport, SpError> {
    check_alpha(alpha)?;
    if values.len() < 2 {
        return Err(SpError::Argument(
            "EEV interval needs at least two evaluation scenarios".into(),
        ));
    }
    let (mean, sd) = mean_and_std(values);
    let hw = z_quantile(alpha / 2.0)? * sd / (values.len() as f64).sqrt();
    Ok(ConfidenceReport {
        kind: EstimateKind::Eev,
        lo: mean - hw,
        hi: mean + hw,
        estimate: mean,
        n: values.len(),
        m: None,
        t: None,
        alpha,
        seed,
        significant: None,
    })
}

/// Combines the two one-sided estimates into the VRP interval. For
/// minimization this is `[L - hw_M, U + hw_T]`, mirrored for maximization.
pub fn combine_vrp(
    sense: Sense,
    lower: &ConfidenceReport,
    upper: &ConfidenceReport,
    seed: u64,
) -> ConfidenceReport {
    let (a, b) = match sense {
        Sense::Minimize => (lower.lo, upper.hi),
        Sense::Maximize => (upper.lo, lower.hi),
    };
    ConfidenceReport {
        kind: EstimateKind::Vrp,
        lo: a.min(b),
        hi: a.max(b),
        estimate: 0.5 * (lower.estimate + upper.estimate),
        n: lower.n,
        m: lower.m,
        t: upper.t,
        alpha: lower.alpha,
        seed,
        significant: None,
    }
}

/// `[L_VRP - U_EEV, U_VRP - L_EEV]`, significant iff the two intervals are disjoint.
pub fn vss_interval(
    vrp: &ConfidenceReport,
    eev: &ConfidenceReport,
) -> Result<ConfidenceReport, SpError> {
    if vrp.alpha != eev.alpha {
        return Err(SpError::Argument(format!(
            "VRP and EEV intervals use different significance levels ({} vs {})",
            vrp.alpha, eev.alpha
        )));
    }
    let disjoint = vrp.lo > eev.hi || eev.lo > vrp.hi;
    Ok(ConfidenceReport {
        kind: EstimateKind::Vss,
        lo: vrp.lo - eev.hi,
        hi: vrp.hi - eev.lo,
        estimate: vrp.estimate - eev.estimate,
        n: vrp.n,
        m: vrp.m,
        t: vrp.t,
        alpha: vrp.alpha,
        seed: vrp.seed,
        significant: Some(disjoint),
    })
}

/// Solves a finite instance, returning the first-stage decision and its
/// objective in user sense.
pub trait InstanceSolver: Send + Sync {
    fn solve(&self, fp: &FiniteProgram) -> Result<(Vec<f64>, f64), SpError>;
}

/// Solves instances with the L-shaped method; non-convergence is an error.
#[derive(Debug, Clone, Default)]
pub struct LShapedSolver(pub LShapedConfig);

impl InstanceSolver for LShapedSolver {
    fn solve(&self, fp: &FiniteProgram) -> Result<(Vec<f64>, f64), SpError> {
        let res = lshaped::solve(fp, &self.0)?;
        if !res.converged {
            return Err(SpError::Solver {
                context: format!("L-shaped did not converge in {} iterations", res.iterations),
                status: crate::lp::LpStatus::NumericalFailure,
            });
        }
        Ok((res.x, res.objective))
    }
}

/// Solves instances through their deterministic equivalent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtensiveFormSolver;

impl InstanceSolver for ExtensiveFormSolver {
    fn solve(&self, fp: &FiniteProgram) -> Result<(Vec<f64>, f64), SpError> {
        let sol = build_deterministic_equivalent(fp).solve()?;
        Ok((sol.x, sol.objective))
    }
}

/// A two-stage program together with the distribution of its scenarios.
#[derive(Clone)]
pub struct SampledProgram {
    pub program: TwoStageProgram,
    pub sampler: Arc<dyn ScenarioSampler>,
}

/// Error for a failed instance, tagged with the seed that reproduces it.
fn with_seed(seed: u64) -> impl Fn(SpError) -> SpError {
    move |e| SpError::Solver {
        context: format!("instance with seed {seed}: {e}"),
        status: match &e {
            SpError::Solver { status, .. } => *status,
            _ => crate::lp::LpStatus::NumericalFailure,
        },
    }
}

impl SampledProgram {
    pub fn instance(&self, seed: u64, n: usize) -> Result<FiniteProgram, SpError> {
        if n == 0 {
            return Err(SpError::Argument("sample size must be positive".into()));
        }
        FiniteProgram::uniform(self.program.clone(), self.sampler.sample(seed, n))
    }

    /// `U_T`: mean of `T` batch estimates of the value of `x` over `N` fresh scenarios each.
    pub fn decision_value_interval(
        &self,
        x: &[f64],
        n: usize,
        t: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<ConfidenceReport, SpError> {
        check_alpha(alpha)?;
        if t < 2 {
            return Err(SpError::Argument(
                "decision value interval needs T >= 2 batches".into(),
            ));
        }
        let values = (0..t)
            .map(|i| {
                let s = child_seed(seed, stream::EVALUATION, i as u64);
                self.instance(s, n)?.evaluate_decision(x)
            })
            .collect::<Result<Vec<_>, _>>()?;
        upper_report_from_values(&values, n, alpha, seed)
    }

    /// `L_{N,M}`: mean of `M` sampled optimal values (an optimistic bound
    /// for maximization, a pessimistic one for minimization).
    pub fn optimal_value_bound(
        &self,
        solver: &dyn InstanceSolver,
        n: usize,
        m: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<ConfidenceReport, SpError> {
        check_alpha(alpha)?;
        if m < 2 {
            return Err(SpError::Argument(
                "optimal value bound needs M >= 2 instances".into(),
            ));
        }
        let values = (0..m)
            .into_par_iter()
            .map(|i| {
                let s = child_seed(seed, stream::LOWER_BOUND, i as u64);
                let fp = self.instance(s, n)?;
                solver.solve(&fp).map(|r| r.1).map_err(with_seed(s))
            })
            .collect::<Result<Vec<_>, _>>()?;
        lower_report_from_values(&values, n, alpha, seed)
    }

    /// VRP interval from `M` sampled optima and `T` evaluation batches of
    /// the candidate solved on a fresh instance of size `N`.
    pub fn vrp_interval(
        &self,
        solver: &dyn InstanceSolver,
        n: usize,
        m: usize,
        t: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<VrpEstimate, SpError> {
        let lower = self.optimal_value_bound(solver, n, m, alpha, seed)?;
        let cs = child_seed(seed, stream::CANDIDATE, 0);
        let candidate = solver
            .solve(&self.instance(cs, n)?)
            .map_err(with_seed(cs))?
            .0;
        let upper = self.decision_value_interval(&candidate, n, t, alpha, seed)?;
        let report = combine_vrp(self.program.sense, &lower, &upper, seed);
        Ok(VrpEstimate {
            report,
            lower,
            upper,
            candidate,
        })
    }

    /// Grows `N` along `schedule` until the VRP interval's relative width is at most `rel_tol`.
    #[allow(clippy::too_many_arguments)]
    pub fn saa_refine(
        &self,
        solver: &dyn InstanceSolver,
        alpha: f64,
        rel_tol: f64,
        schedule: &[usize],
        m: usize,
        t: usize,
        seed: u64,
    ) -> Result<(VrpEstimate, Vec<ConfidenceReport>), SpError> {
        if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SpError::Argument(
                "schedule must be a non-empty increasing sequence".into(),
            ));
        }
        let mut history = Vec::new();
        for (i, &n) in schedule.iter().enumerate() {
            let est = self.vrp_interval(
                solver,
                n,
                m,
                t,
                alpha,
                child_seed(seed, stream::REFINE, i as u64),
            )?;
            history.push(est.report.clone());
            if est.report.relative_width() <= rel_tol || i + 1 == schedule.len() {
                return Ok((est, history));
            }
        }
        unreachable!("loop returns on the last schedule entry")
    }

    /// Expected-value decision from the mean of `n` sampled scenarios.
    pub fn expected_value_decision(&self, n: usize, seed: u64) -> Result<Vec<f64>, SpError> {
        let fp = self.instance(child_seed(seed, stream::EEV_MEAN, 0), n)?;
        crate::sp::solve_expected_value_problem(&fp)
    }

    /// EEV interval of `x_bar` over `n_bar` fresh scenarios.
    pub fn eev_interval(
        &self,
        x_bar: &[f64],
        n_bar: usize,
        alpha: f64,
        seed: u64,
    ) -> Result<ConfidenceReport, SpError> {
        check_alpha(alpha)?;
        if n_bar < 2 {
            return Err(SpError::Argument(
                "EEV interval needs at least two evaluation scenarios".into(),
            ));
        }
        let fp = self.instance(child_seed(seed, stream::EEV_EVALUATION, 0), n_bar)?;
        let (_, q) = fp.evaluate_internal(x_bar)?;
        let sense = self.program.sense;
        let c = self.program.first_stage_cost(x_bar);
        let values: Vec<f64> = q.iter().map(|v| sense.to_user(c + v)).collect();
        eev_report_from_values(&values, alpha, seed)
    }
}

#[derive(Debug, Clone)]
pub struct VrpEstimate {
    pub report: ConfidenceReport,
    pub lower: ConfidenceReport,
    pub upper: ConfidenceReport,
    /// First-stage candidate whose value gives the `U` side.
    pub candidate: Vec<f64>,
}
