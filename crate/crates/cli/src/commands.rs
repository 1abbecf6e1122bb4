//! The four commands. Each builds everything from the configuration and
//! seed alone and writes its artifacts into the output directory.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use hydrosp::lshaped::{self, write_iteration_log, LShapedResult};
use hydrosp::saa::{
    child_seed, vss_interval, ConfidenceReport, ExtensiveFormSolver, InstanceSolver, LShapedSolver,
    SampledProgram,
};
use hydrosp::sp::{FiniteProgram, ScenarioSample, ScenarioSampler, TwoStageProgram};
use hydrosp_models::capacity::{build_capacity, CapacityModel};
use hydrosp_models::dayahead::{build_day_ahead, DayAheadModel};
use hydrosp_models::hydro::{load_river_file, Resolution, RiverNetwork};
use hydrosp_models::maintenance::{build_maintenance, MaintenanceModel};
use hydrosp_models::scenarios::{
    price_levels, uniform_blocks, CapacitySampler, HourlySampler, PriceLevels,
};
use hydrosp_models::strategy::{
    read_decisions_csv, write_decisions_csv, write_production_csv, DecisionRecord,
    ProductionSchedule,
};
use hydrosp_models::water_value::{compute_water_value, WaterValueCuts};
use hydrosp_models::ModelError;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, InstanceSolverKind, ModelKind};
use crate::error::CliError;

/// Seed stream for the price sample that places the bid levels.
const LEVEL_STREAM: u64 = 101;

pub fn load_network(config: &ExperimentConfig) -> Result<RiverNetwork, CliError> {
    let mut net = match config.river.strip_prefix("builtin:") {
        Some("skelleftealven") => RiverNetwork::skelleftealven(),
        Some("toy") => RiverNetwork::toy(),
        Some(other) => return Err(CliError::Config(format!("unknown builtin river `{other}`"))),
        None => load_river_file(Path::new(&config.river))?,
    };
    if config.plants > 0 {
        net = net.truncated(config.plants)?;
    }
    if let Some(f) = config.initial_fill {
        let volumes = net.plants().iter().map(|p| f * p.max_volume).collect();
        net.set_initial_volume(volumes)?;
    }
    Ok(net)
}

fn max_discharge(net: &RiverNetwork) -> Vec<f64> {
    net.plants().iter().map(|p| p.max_discharge).collect()
}

/// Bid levels from an independent price sample of the configured size.
pub fn bid_levels(config: &ExperimentConfig, net: &RiverNetwork) -> Result<PriceLevels, CliError> {
    let sampler = HourlySampler::new(config.sampler.clone(), max_discharge(net), config.hours)?;
    let prices: Vec<Vec<f64>> = sampler
        .sample(
            child_seed(config.seed, LEVEL_STREAM, 0),
            config.day_ahead.level_samples,
        )
        .into_iter()
        .map(|s| s.price)
        .collect();
    Ok(price_levels(&prices, config.day_ahead.level_count)?)
}

/// A built model of any family.
pub enum Model {
    DayAhead(DayAheadModel),
    Maintenance(MaintenanceModel),
    Capacity(CapacityModel),
}

impl Model {
    pub fn program(&self) -> &TwoStageProgram {
        match self {
            Model::DayAhead(m) => &m.program,
            Model::Maintenance(m) => &m.program,
            Model::Capacity(m) => &m.program,
        }
    }

    pub fn periods(&self) -> usize {
        match self {
            Model::DayAhead(m) => m.layout.hours,
            Model::Maintenance(m) => m.bids.hours,
            Model::Capacity(m) => m.periods,
        }
    }

    pub fn records(&self, x: &[f64]) -> Vec<DecisionRecord> {
        match self {
            Model::DayAhead(m) => m.records(x),
            Model::Maintenance(m) => m.records(x),
            Model::Capacity(m) => m.records(x),
        }
    }

    pub fn decision(&self, records: &[DecisionRecord]) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::DayAhead(m) => m.decision(records),
            Model::Maintenance(m) => m.decision(records),
            Model::Capacity(m) => m.decision(records),
        }
    }

    pub fn schedule(&self, y: &[f64]) -> ProductionSchedule {
        match self {
            Model::DayAhead(m) => m.layout.schedule(y),
            Model::Maintenance(m) => m.bids.schedule(y),
            Model::Capacity(m) => m.schedule(y),
        }
    }
}

/// Model, river and scenario distribution described by a configuration.
pub struct Experiment {
    pub network: RiverNetwork,
    pub model: Model,
    pub sampler: Arc<dyn ScenarioSampler>,
}

impl Experiment {
    pub fn build(config: &ExperimentConfig) -> Result<Self, CliError> {
        let net = load_network(config)?;
        let q = max_discharge(&net);
        let (model, sampler): (Model, Arc<dyn ScenarioSampler>) = match config.model {
            ModelKind::DayAhead => {
                let levels = bid_levels(config, &net)?;
                let blocks = match config.day_ahead.block_hours {
                    0 => vec![],
                    len => uniform_blocks(config.hours, len),
                };
                let cuts = match &config.day_ahead.cuts {
                    Some(p) => Some(WaterValueCuts::read_csv(open(p)?)?),
                    None => None,
                };
                let m = build_day_ahead(&net, &levels, &blocks, cuts.as_ref(), &config.penalties)?;
                (
                    Model::DayAhead(m),
                    Arc::new(HourlySampler::new(config.sampler.clone(), q, config.hours)?),
                )
            }
            ModelKind::Maintenance => {
                let levels = bid_levels(config, &net)?;
                let durations = match &config.maintenance.durations {
                    Some(d) => d.clone(),
                    None => net.plants().iter().map(|p| p.maintenance_hours).collect(),
                };
                let m = build_maintenance(&net, &levels, &durations, &config.penalties)?;
                (
                    Model::Maintenance(m),
                    Arc::new(HourlySampler::new(config.sampler.clone(), q, config.hours)?),
                )
            }
            ModelKind::Capacity => {
                let res = Resolution::new(config.resolution)?;
                let m = build_capacity(&net, res, config.horizon_days, &config.capacity)?;
                let s = CapacitySampler::new(
                    config.sampler.clone(),
                    q,
                    config.horizon_days,
                    config.resolution,
                )?;
                (Model::Capacity(m), Arc::new(s))
            }
        };
        Ok(Self {
            network: net,
            model,
            sampler,
        })
    }

    /// The `N` scenarios used by `solve` and `evaluate` for this seed.
    pub fn scenarios(&self, config: &ExperimentConfig) -> Vec<ScenarioSample> {
        self.sampler.sample(config.seed, config.scenarios)
    }

    pub fn instance(&self, config: &ExperimentConfig) -> Result<FiniteProgram, CliError> {
        Ok(FiniteProgram::new(
            self.model.program().clone(),
            self.scenarios(config),
        )?)
    }

    fn schedules(
        &self,
        fp: &FiniteProgram,
        x: &[f64],
    ) -> Result<Vec<ProductionSchedule>, CliError> {
        let results = fp.solve_subproblems(x, None)?;
        Ok(results
            .iter()
            .map(|r| self.model.schedule(&r.solution.x))
            .collect())
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("cannot write {}: {e}", path.display()))
}

/// Collects artifacts in memory and writes them in one go.
struct Artifacts<'a> {
    dir: &'a Path,
    files: Vec<(&'static str, Vec<u8>)>,
}

impl<'a> Artifacts<'a> {
    fn new(dir: &'a Path) -> Self {
        Self {
            dir,
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    fn json<T: Serialize>(&mut self, name: &'static str, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("artifact structs serialize");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    fn with<F>(&mut self, name: &'static str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn write(self) -> Result<(), CliError> {
        std::fs::create_dir_all(self.dir).map_err(io_error(self.dir))?;
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(io_error(&path))?;
        }
        Ok(())
    }
}

fn iteration_log(res: &LShapedResult, timing: bool) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_iteration_log(&mut buf, &res.log, timing)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(buf)
}

fn decisions(records: &[DecisionRecord]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_decisions_csv(&mut buf, records)?;
    Ok(buf)
}

fn plant_ids(net: &RiverNetwork) -> Vec<String> {
    net.plants().iter().map(|p| p.id.clone()).collect()
}

fn model_artifacts(exp: &Experiment, x: &[f64], out: &mut Artifacts) -> Result<(), CliError> {
    let ids = plant_ids(&exp.network);
    match &exp.model {
        Model::Maintenance(m) => out.with("schedule.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["plant_id", "hour", "maintenance_flag"])
                .map_err(csv_error)?;
            for (h, row) in m.schedule(x).iter().enumerate() {
                for (t, flag) in row.iter().enumerate() {
                    w.write_record([ids[h].clone(), t.to_string(), flag.to_string()])
                        .map_err(csv_error)?;
                }
            }
            w.flush().map_err(|e| CliError::Numerical(e.to_string()))
        }),
        Model::Capacity(m) => out.with("expansion.csv", |buf| {
            let plan = m.plan(x);
            let mut w = csv::Writer::from_writer(buf);
            w.write_record([
                "plant_id",
                "name",
                "delta_power_mw",
                "delta_discharge_m3s",
                "cost_eur",
            ])
            .map_err(csv_error)?;
            for (h, p) in exp.network.plants().iter().enumerate() {
                let dp = plan.delta_power[h];
                w.write_record([
                    ids[h].clone(),
                    p.name.clone(),
                    dp.to_string(),
                    plan.delta_discharge[h].to_string(),
                    (dp * m.cost_per_mw).to_string(),
                ])
                .map_err(csv_error)?;
            }
            w.flush().map_err(|e| CliError::Numerical(e.to_string()))
        }),
        Model::DayAhead(_) => Ok(()),
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Numerical(format!("csv: {e}"))
}

#[derive(Debug, Serialize)]
struct SolveSummary<'a> {
    command: &'static str,
    model: &'static str,
    seed: u64,
    scenarios: usize,
    periods: usize,
    first_stage_variables: usize,
    objective_eur: f64,
    bound_eur: f64,
    relative_gap: f64,
    converged: bool,
    iterations: usize,
    river: &'a str,
}

/// Solves one sampled instance with the L-shaped method.
pub fn solve(config: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let exp = Experiment::build(config)?;
    let fp = exp.instance(config)?;
    let ls = config.solver.lshaped(config.scenarios);
    ls.validate()?;
    let res = lshaped::solve(&fp, &ls)?;
    let summary = SolveSummary {
        command: "solve",
        model: config.model.name(),
        seed: config.seed,
        scenarios: config.scenarios,
        periods: exp.model.periods(),
        first_stage_variables: exp.model.program().num_first_stage(),
        objective_eur: res.objective,
        bound_eur: res.bound,
        relative_gap: res.relative_gap(),
        converged: res.converged,
        iterations: res.iterations,
        river: &config.river,
    };
    let mut out = Artifacts::new(&config.output);
    out.add("iterations.csv", iteration_log(&res, config.solver.timing)?);
    out.json("objective.json", &summary);
    if !res.converged {
        out.write()?;
        return Err(CliError::NotConverged {
            iterations: res.iterations,
            gap: res.relative_gap(),
        });
    }
    out.add("strategy.csv", decisions(&exp.model.records(&res.x))?);
    model_artifacts(&exp, &res.x, &mut out)?;
    let schedules = exp.schedules(&fp, &res.x)?;
    out.with("production.csv", |buf| {
        Ok(write_production_csv(buf, &schedules)?)
    })?;
    out.write()?;
    Ok(serde_json::to_value(&summary).expect("summary serializes"))
}

fn interval_rows(reports: &[&ConfidenceReport]) -> Result<Vec<u8>, CliError> {
    #[derive(Serialize)]
    struct Row {
        #[serde(rename = "N")]
        n: usize,
        lo_eur: f64,
        hi_eur: f64,
        kind: hydrosp::saa::EstimateKind,
        estimate_eur: f64,
        alpha: f64,
    }
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in reports {
            w.serialize(Row {
                n: r.n,
                lo_eur: r.lo,
                hi_eur: r.hi,
                kind: r.kind,
                estimate_eur: r.estimate,
                alpha: r.alpha,
            })
            .map_err(csv_error)?;
        }
        w.flush().map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    Ok(buf)
}

/// Refines the VRP interval along the sample-size schedule, then adds the
/// EEV and VSS intervals.
pub fn saa(config: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let exp = Experiment::build(config)?;
    let s = &config.saa;
    let sp = SampledProgram {
        program: exp.model.program().clone(),
        sampler: exp.sampler.clone(),
    };
    let solver: Box<dyn InstanceSolver> = match s.solver {
        InstanceSolverKind::LShaped => {
            let mut ls = config.solver.lshaped(*s.schedule.last().unwrap_or(&1));
            if let hydrosp::lshaped::Formulation::Partial(_) = ls.formulation {
                // one group count cannot fit every sample size of the schedule
                ls.formulation = hydrosp::lshaped::Formulation::Multi;
            }
            ls.validate()?;
            Box::new(LShapedSolver(ls))
        }
        InstanceSolverKind::ExtensiveForm => Box::new(ExtensiveFormSolver),
    };
    let (est, history) = sp.saa_refine(
        solver.as_ref(),
        s.alpha,
        s.rel_tol,
        &s.schedule,
        s.m,
        s.t,
        config.seed,
    )?;
    let x_bar = sp.expected_value_decision(s.eev_scenarios, config.seed)?;
    let eev = sp.eev_interval(&x_bar, s.eev_scenarios, s.alpha, config.seed)?;
    let vss = vss_interval(&est.report, &eev)?;

    let mut rows: Vec<&ConfidenceReport> = history.iter().collect();
    rows.push(&eev);
    rows.push(&vss);
    let summary = json!({
        "command": "saa",
        "model": config.model.name(),
        "seed": config.seed,
        "vrp": est.report,
        "lower": est.lower,
        "upper": est.upper,
        "eev": eev,
        "vss": vss,
        "vss_significant": vss.significant.unwrap_or(false),
    });
    let mut out = Artifacts::new(&config.output);
    out.add("intervals.csv", interval_rows(&rows)?);
    out.add(
        "strategy.csv",
        decisions(&exp.model.records(&est.candidate))?,
    );
    out.json("objective.json", &summary);
    out.write()?;
    Ok(summary)
}

/// Evaluates a fixed first stage over the configured scenarios.
pub fn evaluate(config: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let path = config.evaluate.strategy.as_ref().ok_or_else(|| {
        CliError::Config("evaluate needs evaluate.strategy (--strategy PATH)".into())
    })?;
    let exp = Experiment::build(config)?;
    let records = read_decisions_csv(open(path)?)?;
    let x = exp
        .model
        .decision(&records)
        .map_err(|e| CliError::Config(format!("strategy {}: {e}", path.display())))?;
    let fp = exp.instance(config)?;
    let profit = fp.evaluate_decision(&x)?;
    let schedules = exp.schedules(&fp, &x)?;
    let mean = |f: &dyn Fn(&ProductionSchedule) -> f64| -> f64 {
        fp.scenarios
            .iter()
            .zip(&schedules)
            .map(|(sc, s)| sc.probability * f(s))
            .sum()
    };
    let shortage = mean(&|s| s.shortage.iter().sum());
    let surplus = mean(&|s| s.surplus.iter().sum());
    let summary = json!({
        "command": "evaluate",
        "model": config.model.name(),
        "seed": config.seed,
        "scenarios": config.scenarios,
        "mean_profit_eur": profit,
        "mean_shortage_mwh": shortage,
        "mean_surplus_mwh": surplus,
    });
    let mut out = Artifacts::new(&config.output);
    out.json("evaluation.json", &summary);
    out.write()?;
    Ok(summary)
}

/// Builds a water-value cut pool from the week-ahead problem.
pub fn water_value(config: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let net = load_network(config)?;
    let wv = &config.water_value;
    let sampler = HourlySampler::new(config.sampler.clone(), max_discharge(&net), wv.hours)?;
    let scenarios = sampler.sample(config.seed, wv.scenarios);
    let ls = config.solver.lshaped(wv.scenarios);
    ls.validate()?;
    let mut out = Artifacts::new(&config.output);
    let outcome = match compute_water_value(&net, scenarios, &wv.grid, &ls) {
        Ok(o) => o,
        Err(ModelError::NotConverged {
            iterations,
            gap,
            log,
        }) => {
            out.add("iterations.csv", log.into_bytes());
            out.write()?;
            return Err(CliError::NotConverged { iterations, gap });
        }
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "command": "water-value",
        "seed": config.seed,
        "scenarios": wv.scenarios,
        "hours": wv.hours,
        "objective_eur": outcome.result.objective,
        "bound_eur": outcome.result.bound,
        "iterations": outcome.result.iterations,
        "cuts": outcome.cuts.cuts.len(),
        "groups": outcome.cuts.groups,
    });
    out.add(
        "iterations.csv",
        iteration_log(&outcome.result, config.solver.timing)?,
    );
    out.with("cuts.csv", |buf| {
        Ok(outcome.cuts.write_csv(buf, &plant_ids(&net))?)
    })?;
    out.json("objective.json", &summary);
    out.write()?;
    Ok(summary)
}

/// Writes `value` as one JSON line.
pub fn print_summary<W: Write>(mut w: W, value: &serde_json::Value) -> std::io::Result<()> {
    writeln!(w, "{value}")
}
