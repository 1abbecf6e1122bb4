//! Two-stage stochastic programs over finite scenario sets.
//!
//! A program is `opt c^T x + E[Q(x, w)]` with first-stage rows on `x`, and
//! `Q(x, w) = opt q_w^T y` subject to `T_w x + W y (sense) h_w` and bounds on
//! `y`. Everything is stored in minimization form; maximization programs are
//! negated on construction and converted back by [`Sense::to_user`].

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lp::{
    solve_lp, solve_lp_warm, solve_mbp, Basis, LinearProgram, LpSolution, LpStatus, RowSense,
    FEASIBILITY_TOL, INTEGRALITY_TOL,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("second stage of scenario {scenario} is infeasible")]
    InfeasibleSubproblem { scenario: usize },
    #[error("second stage of scenario {scenario} is unbounded")]
    UnboundedSubproblem { scenario: usize },
    #[error("first-stage decision violates its constraints by {0:e}")]
    InfeasibleDecision(f64),
    #[error("{context}: solver returned {status:?}")]
    Solver { context: String, status: LpStatus },
    #[error("scenario file: {0}")]
    ScenarioFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Converts between user and internal (minimization) objective units.
    /// The map is its own inverse.
    pub fn to_user(self, v: f64) -> f64 {
        match self {
            Sense::Minimize => v,
            Sense::Maximize => -v,
        }
    }

    pub fn to_internal(self, v: f64) -> f64 {
        self.to_user(v)
    }
}

/// One realization of the uncertain data with its probability weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    pub probability: f64,
    /// Price per period (Eur/MWh).
    pub price: Vec<f64>,
    /// Local inflow per plant and period (m3/s).
    pub inflow: Vec<Vec<f64>>,
}

impl ScenarioSample {
    pub fn num_periods(&self) -> usize {
        self.price.len()
    }
}

/// Source of IID scenarios. Implementations must be deterministic in `seed`.
pub trait ScenarioSampler: Send + Sync {
    fn sample(&self, seed: u64, count: usize) -> Vec<ScenarioSample>;
}

/// A constraint of the second stage: `technology . x + recourse . y (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseRow {
    pub technology: Vec<(usize, f64)>,
    pub recourse: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// Second-stage data `(q, T, W, h, bounds)` of one scenario, in user sense.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SecondStage {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<RecourseRow>,
}

impl SecondStage {
    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    pub fn add_row(
        &mut self,
        technology: Vec<(usize, f64)>,
        recourse: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.rows.push(RecourseRow {
            technology,
            recourse,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }
}

/// Generates the second stage for a scenario. The number of recourse
/// variables and the recourse matrix must not depend on the scenario.
pub trait RecourseTemplate: Send + Sync {
    fn num_recourse(&self) -> usize;
    fn second_stage(&self, scenario: &ScenarioSample) -> SecondStage;
}

/// First stage plus a scenario-parameterized second stage.
#[derive(Clone)]
pub struct TwoStageProgram {
    pub sense: Sense,
    /// First-stage problem in minimization form.
    first_stage: LinearProgram,
    binaries: Vec<usize>,
    template: Arc<dyn RecourseTemplate>,
}

impl std::fmt::Debug for TwoStageProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoStageProgram")
            .field("sense", &self.sense)
            .field("first_stage_vars", &self.first_stage.num_vars())
            .field("first_stage_rows", &self.first_stage.num_rows())
            .field("binaries", &self.binaries.len())
            .field("recourse_vars", &self.template.num_recourse())
            .finish()
    }
}

impl TwoStageProgram {
    /// `first_stage` carries the user-sense objective `c`.
    pub fn new(
        sense: Sense,
        mut first_stage: LinearProgram,
        binaries: Vec<usize>,
        template: Arc<dyn RecourseTemplate>,
    ) -> Result<Self, SpError> {
        first_stage
            .validate()
            .map_err(|e| SpError::Structural(e.to_string()))?;
        for &j in &binaries {
            if j >= first_stage.num_vars()
                || first_stage.lower[j] < 0.0
                || first_stage.upper[j] > 1.0
            {
                return Err(SpError::Structural(format!(
                    "binary variable {j} needs bounds within [0, 1]"
                )));
            }
        }
        if sense == Sense::Maximize {
            for c in &mut first_stage.objective {
                *c = -*c;
            }
            first_stage.objective_offset = -first_stage.objective_offset;
        }
        Ok(Self {
            sense,
            first_stage,
            binaries,
            template,
        })
    }

    pub fn num_first_stage(&self) -> usize {
        self.first_stage.num_vars()
    }

    pub fn num_recourse(&self) -> usize {
        self.template.num_recourse()
    }

    /// First-stage LP in minimization form.
    pub fn first_stage(&self) -> &LinearProgram {
        &self.first_stage
    }

    pub fn binaries(&self) -> &[usize] {
        &self.binaries
    }

    pub fn template(&self) -> &Arc<dyn RecourseTemplate> {
        &self.template
    }

    /// Internal (minimization) first-stage cost `c^T x`.
    pub fn first_stage_cost(&self, x: &[f64]) -> f64 {
        self.first_stage.objective_value(x)
    }

    /// Largest violation of first-stage rows, bounds and integrality at `x`.
    pub fn first_stage_violation(&self, x: &[f64]) -> f64 {
        let mut v = self.first_stage.max_violation(x);
        for &j in &self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac > INTEGRALITY_TOL {
                v = v.max(frac);
            }
        }
        v
    }

    /// Builds the internal (minimization) subproblem data for one scenario.
    pub fn subproblem(&self, scenario: &ScenarioSample) -> Result<Subproblem, SpError> {
        let stage = self.template.second_stage(scenario);
        Subproblem::new(
            stage,
            self.sense,
            self.num_first_stage(),
            self.num_recourse(),
        )
    }
}

/// Internal-form second stage of one scenario, ready to be solved at any `x`.
#[derive(Debug, Clone)]
pub struct Subproblem {
    lp: LinearProgram,
    rhs: Vec<f64>,
    technology: Vec<Vec<(usize, f64)>>,
}

impl Subproblem {
    fn new(stage: SecondStage, sense: Sense, n: usize, m: usize) -> Result<Self, SpError> {
        if stage.cost.len() != m || stage.lower.len() != m || stage.upper.len() != m {
            return Err(SpError::Structural(format!(
                "second stage has {} variables, template declares {m}",
                stage.cost.len()
            )));
        }
        let mut lp = LinearProgram::new();
        for j in 0..m {
            lp.add_var(
                sense.to_internal(stage.cost[j]),
                stage.lower[j],
                stage.upper[j],
            );
        }
        let mut rhs = Vec::with_capacity(stage.rows.len());
        let mut technology = Vec::with_capacity(stage.rows.len());
        for row in stage.rows {
            if let Some(&(j, _)) = row.technology.iter().find(|&&(j, _)| j >= n) {
                return Err(SpError::Structural(format!(
                    "technology matrix references first-stage column {j} but there are {n}"
                )));
            }
            lp.add_row(row.recourse, row.sense, row.rhs);
            rhs.push(row.rhs);
            technology.push(row.technology);
        }
        lp.validate()
            .map_err(|e| SpError::Structural(e.to_string()))?;
        Ok(Self {
            lp,
            rhs,
            technology,
        })
    }

    pub fn lp(&self) -> &LinearProgram {
        &self.lp
    }

    pub fn technology(&self) -> &[Vec<(usize, f64)>] {
        &self.technology
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// The LP `min q^T y s.t. W y (sense) h - T x` at `x`.
    pub fn at(&self, x: &[f64]) -> LinearProgram {
        let mut lp = self.lp.clone();
        for (i, row) in lp.rows.iter_mut().enumerate() {
            row.rhs = self.rhs[i]
                - self.technology[i]
                    .iter()
                    .map(|&(j, t)| t * x[j])
                    .sum::<f64>();
        }
        lp
    }

    /// Solves at `x` and returns the value with a subgradient in `x`.
    pub fn solve(
        &self,
        x: &[f64],
        warm: Option<&Basis>,
        scenario: usize,
    ) -> Result<SubproblemResult, SpError> {
        let lp = self.at(x);
        let sol = solve_lp_warm(&lp, warm);
        let sol = match sol.status {
            LpStatus::Optimal => sol,
            // a stale warm basis can occasionally stall; retry cold before giving up
            LpStatus::NumericalFailure if warm.is_some() => solve_lp(&lp),
            _ => sol,
        };
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(SpError::InfeasibleSubproblem { scenario }),
            LpStatus::Unbounded => return Err(SpError::UnboundedSubproblem { scenario }),
            status => {
                return Err(SpError::Solver {
                    context: format!("second stage of scenario {scenario}"),
                    status,
                })
            }
        }
        let mut gradient = vec![0.0; x.len()];
        for (i, tech) in self.technology.iter().enumerate() {
            let d = sol.duals[i];
            if d != 0.0 {
                for &(j, t) in tech {
                    gradient[j] -= t * d;
                }
            }
        }
        Ok(SubproblemResult {
            value: sol.objective,
            gradient,
            solution: sol,
        })
    }
}

/// Internal-sense recourse value `Q(x)` with a subgradient `-T^T pi`.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub solution: LpSolution,
}

/// A two-stage program with an explicit scenario set.
#[derive(Debug, Clone)]
pub struct FiniteProgram {
    pub program: TwoStageProgram,
    pub scenarios: Vec<ScenarioSample>,
    subproblems: Vec<Arc<Subproblem>>,
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

impl FiniteProgram {
    pub fn new(program: TwoStageProgram, scenarios: Vec<ScenarioSample>) -> Result<Self, SpError> {
        if scenarios.is_empty() {
            return Err(SpError::Argument(
                "at least one scenario is required".into(),
            ));
        }
        if scenarios
            .iter()
            .any(|s| !(s.probability >= 0.0) || !s.probability.is_finite())
        {
            return Err(SpError::Argument(
                "scenario probabilities must be non-negative".into(),
            ));
        }
        let total = neumaier_sum(scenarios.iter().map(|s| s.probability));
        if (total - 1.0).abs() > 1e-12 {
            return Err(SpError::Argument(format!(
                "scenario probabilities sum to {total}, not 1"
            )));
        }
        let subproblems = scenarios
            .par_iter()
            .map(|s| program.subproblem(s).map(Arc::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            program,
            scenarios,
            subproblems,
        })
    }

    /// Scenarios with equal weights `1/N`.
    pub fn uniform(
        program: TwoStageProgram,
        mut scenarios: Vec<ScenarioSample>,
    ) -> Result<Self, SpError> {
        let p = 1.0 / scenarios.len().max(1) as f64;
        for s in &mut scenarios {
            s.probability = p;
        }
        Self::new(program, scenarios)
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    pub fn subproblem(&self, s: usize) -> &Subproblem {
        &self.subproblems[s]
    }

    /// Solves every subproblem at `x` (in parallel), in scenario order.
    pub fn solve_subproblems(
        &self,
        x: &[f64],
        warm: Option<&[Option<Basis>]>,
    ) -> Result<Vec<SubproblemResult>, SpError> {
        (0..self.num_scenarios())
            .into_par_iter()
            .map(|s| {
                let basis = warm.and_then(|w| w[s].as_ref());
                self.subproblems[s].solve(x, basis, s)
            })
            .collect()
    }

    /// Expected objective `c^T x + sum_s pi_s Q(x, s)` in user sense.
    pub fn evaluate_decision(&self, x: &[f64]) -> Result<f64, SpError> {
        Ok(self.program.sense.to_user(self.evaluate_internal(x)?.0))
    }

    /// Internal-sense expected objective and the per-scenario recourse values.
    pub fn evaluate_internal(&self, x: &[f64]) -> Result<(f64, Vec<f64>), SpError> {
        self.check_decision(x)?;
        let results = self.solve_subproblems(x, None)?;
        let values: Vec<f64> = results.iter().map(|r| r.value).collect();
        let expected = neumaier_sum(
            self.scenarios
                .iter()
                .zip(&values)
                .map(|(s, v)| s.probability * v),
        );
        Ok((self.program.first_stage_cost(x) + expected, values))
    }

    pub fn check_decision(&self, x: &[f64]) -> Result<(), SpError> {
        if x.len() != self.program.num_first_stage() {
            return Err(SpError::Structural(format!(
                "decision has {} entries, first stage has {}",
                x.len(),
                self.program.num_first_stage()
            )));
        }
        let v = self.program.first_stage_violation(x);
        if v > FEASIBILITY_TOL {
            return Err(SpError::InfeasibleDecision(v));
        }
        Ok(())
    }
}

/// The extensive form: one LP/MBP over `x` and all `y_s`.
#[derive(Debug, Clone)]
pub struct DeterministicEquivalent {
    pub lp: LinearProgram,
    pub binaries: Vec<usize>,
    pub num_first_stage: usize,
    pub num_recourse: usize,
    pub sense: Sense,
}

impl DeterministicEquivalent {
    /// Column of recourse variable `j` of scenario `s`.
    pub fn recourse_column(&self, s: usize, j: usize) -> usize {
        self.num_first_stage + s * self.num_recourse + j
    }

    pub fn solve(&self) -> Result<DeSolution, SpError> {
        let sol = if self.binaries.is_empty() {
            solve_lp(&self.lp)
        } else {
            solve_mbp(&self.lp, &self.binaries).map_err(|e| SpError::Structural(e.to_string()))?
        };
        if !sol.is_optimal() {
            return Err(SpError::Solver {
                context: "deterministic equivalent".into(),
                status: sol.status,
            });
        }
        Ok(DeSolution {
            objective: self.sense.to_user(sol.objective),
            x: sol.x[..self.num_first_stage].to_vec(),
            solution: sol,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DeSolution {
    /// Objective in user sense.
    pub objective: f64,
    pub x: Vec<f64>,
    pub solution: LpSolution,
}

pub fn build_deterministic_equivalent(fp: &FiniteProgram) -> DeterministicEquivalent {
    let prog = &fp.program;
    let n = prog.num_first_stage();
    let m = prog.num_recourse();
    let mut lp = prog.first_stage().clone();
    for (s, sc) in fp.scenarios.iter().enumerate() {
        let sub = fp.subproblem(s);
        let base = lp.num_vars();
        for j in 0..m {
            lp.add_var(
                sc.probability * sub.lp.objective[j],
                sub.lp.lower[j],
                sub.lp.upper[j],
            );
        }
        for (i, row) in sub.lp.rows.iter().enumerate() {
            let mut coeffs = sub.technology[i].clone();
            coeffs.extend(row.coeffs.iter().map(|&(j, v)| (base + j, v)));
            lp.add_row(coeffs, row.sense, sub.rhs[i]);
        }
    }
    DeterministicEquivalent {
        lp,
        binaries: prog.binaries().to_vec(),
        num_first_stage: n,
        num_recourse: m,
        sense: prog.sense,
    }
}

/// Probability-weighted mean of prices and inflows (probability 1).
pub fn expected_scenario(scenarios: &[ScenarioSample]) -> Result<ScenarioSample, SpError> {
    let first = scenarios
        .first()
        .ok_or_else(|| SpError::Argument("empty scenario list".into()))?;
    let total: f64 = scenarios.iter().map(|s| s.probability).sum();
    if !(total > 0.0) {
        return Err(SpError::Argument(
            "scenario probabilities sum to zero".into(),
        ));
    }
    let mut price = vec![0.0; first.price.len()];
    let mut inflow: Vec<Vec<f64>> = first.inflow.iter().map(|v| vec![0.0; v.len()]).collect();
    for s in scenarios {
        if s.price.len() != price.len()
            || s.inflow.len() != inflow.len()
            || s.inflow
                .iter()
                .zip(&inflow)
                .any(|(a, b)| a.len() != b.len())
        {
            return Err(SpError::Argument("scenarios have different shapes".into()));
        }
        let w = s.probability / total;
        for (acc, p) in price.iter_mut().zip(&s.price) {
            *acc += w * p;
        }
        for (acc, v) in inflow.iter_mut().zip(&s.inflow) {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += w * b;
            }
        }
    }
    Ok(ScenarioSample {
        probability: 1.0,
        price,
        inflow,
    })
}

/// First-stage optimizer of the problem built on the expected scenario.
pub fn solve_expected_value_problem(fp: &FiniteProgram) -> Result<Vec<f64>, SpError> {
    let mean = expected_scenario(&fp.scenarios)?;
    let ev = FiniteProgram::new(fp.program.clone(), vec![mean])?;
    Ok(build_deterministic_equivalent(&ev).solve()?.x)
}

/// Writes scenarios as CSV: `scenario_id, period, probability, price, inflow_1..`.
/// The probability is filled on period-0 rows only.
pub fn write_scenarios_csv<W: Write>(out: W, scenarios: &[ScenarioSample]) -> Result<(), SpError> {
    let plants = scenarios.first().map_or(0, |s| s.inflow.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "scenario_id".to_string(),
        "period".into(),
        "probability".into(),
        "price".into(),
    ];
    header.extend((1..=plants).map(|h| format!("inflow_{h}")));
    let io = |e: csv::Error| SpError::ScenarioFile(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (s, sc) in scenarios.iter().enumerate() {
        for t in 0..sc.price.len() {
            let mut rec = vec![s.to_string(), t.to_string()];
            rec.push(if t == 0 {
                format!("{}", sc.probability)
            } else {
                String::new()
            });
            rec.push(format!("{}", sc.price[t]));
            for h in 0..plants {
                let v = sc.inflow[h]
                    .get(t)
                    .or(sc.inflow[h].last())
                    .copied()
                    .unwrap_or(0.0);
                rec.push(format!("{v}"));
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| SpError::ScenarioFile(e.to_string()))
}

pub fn read_scenarios_csv<R: Read>(input: R) -> Result<Vec<ScenarioSample>, SpError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(|e| SpError::ScenarioFile(e.to_string()))?
        .clone();
    let expected = ["scenario_id", "period", "probability", "price"];
    if header.len() < 4 || header.iter().take(4).ne(expected) {
        return Err(SpError::ScenarioFile(format!(
            "expected leading columns {expected:?}"
        )));
    }
    let plants = header.len() - 4;
    let mut out: Vec<ScenarioSample> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let line = line + 2;
        let rec = rec.map_err(|e| SpError::ScenarioFile(e.to_string()))?;
        let num = |k: usize| -> Result<f64, SpError> {
            rec[k].trim().parse::<f64>().map_err(|_| {
                SpError::ScenarioFile(format!("line {line}: bad number in column {}", &header[k]))
            })
        };
        let id: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| SpError::ScenarioFile(format!("line {line}: bad scenario_id")))?;
        let period: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| SpError::ScenarioFile(format!("line {line}: bad period")))?;
        if period == 0 {
            if id != out.len() {
                return Err(SpError::ScenarioFile(format!(
                    "line {line}: scenario ids must be consecutive from 0"
                )));
            }
            out.push(ScenarioSample {
                probability: num(2)?,
                price: Vec::new(),
                inflow: vec![Vec::new(); plants],
            });
        }
        let count = out.len();
        let sc = out.last_mut().filter(|_| id + 1 == count).ok_or_else(|| {
            SpError::ScenarioFile(format!(
                "line {line}: scenario {id} does not start at period 0"
            ))
        })?;
        if period != sc.price.len() {
            return Err(SpError::ScenarioFile(format!(
                "line {line}: periods must be consecutive"
            )));
        }
        sc.price.push(num(3)?);
        for h in 0..plants {
            sc.inflow[h].push(num(4 + h)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sense_round_trip() {
        assert_eq!(
            Sense::Maximize.to_user(Sense::Maximize.to_internal(3.5)),
            3.5
        );
        assert_eq!(Sense::Minimize.to_user(-2.0), -2.0);
    }

    #[test]
    fn weighted_expected_scenario() {
        let a = ScenarioSample {
            probability: 0.25,
            price: vec![0.0; 3],
            inflow: vec![vec![4.0]],
        };
        let b = ScenarioSample {
            probability: 0.75,
            price: vec![40.0; 3],
            inflow: vec![vec![0.0]],
        };
        let m = expected_scenario(&[a, b]).unwrap();
        assert_eq!(m.price, vec![30.0; 3]);
        assert_eq!(m.inflow, vec![vec![1.0]]);
        assert!(expected_scenario(&[]).is_err());
    }

    #[test]
    fn compensated_sum_of_uniform_weights() {
        let n = 2000;
        assert!((neumaier_sum(std::iter::repeat_n(1.0 / n as f64, n)) - 1.0).abs() <= 1e-15);
    }
}
