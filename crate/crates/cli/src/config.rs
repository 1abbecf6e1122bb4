//! Experiment configuration: one TOML file plus dot-path overrides.

use std::path::{Path, PathBuf};

use hydrosp::lshaped::{Consolidation, Formulation, LShapedConfig, TrustRegionConfig};
use hydrosp_models::capacity::CostParams;
use hydrosp_models::dayahead::Penalties;
use hydrosp_models::scenarios::SamplerConfig;
use hydrosp_models::water_value::WaterValueConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DayAhead,
    Maintenance,
    Capacity,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DayAhead => "day-ahead",
            ModelKind::Maintenance => "maintenance",
            ModelKind::Capacity => "capacity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// River file, or `builtin:skelleftealven` / `builtin:toy`.
    pub river: String,
    /// Keep only the first plants of the river (0 keeps all).
    pub plants: usize,
    /// Initial reservoir fill as a fraction of each limit.
    pub initial_fill: Option<f64>,
    pub model: ModelKind,
    pub seed: u64,
    pub output: PathBuf,
    pub scenarios: usize,
    /// Day-ahead and maintenance horizon.
    pub hours: usize,
    /// Capacity horizon and resolution (hours per period).
    pub horizon_days: usize,
    pub resolution: usize,
    pub sampler: SamplerConfig,
    pub penalties: Penalties,
    pub day_ahead: DayAheadConfig,
    pub maintenance: MaintenanceConfig,
    pub capacity: CostParams,
    pub solver: SolverConfig,
    pub saa: SaaConfig,
    pub water_value: WaterValueConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            river: "builtin:skelleftealven".into(),
            plants: 0,
            initial_fill: None,
            model: ModelKind::DayAhead,
            seed: 1,
            output: PathBuf::from("out"),
            scenarios: 10,
            hours: 24,
            horizon_days: 365,
            resolution: 24,
            sampler: SamplerConfig::default(),
            penalties: Penalties::default(),
            day_ahead: DayAheadConfig::default(),
            maintenance: MaintenanceConfig::default(),
            capacity: CostParams::default(),
            solver: SolverConfig::default(),
            saa: SaaConfig::default(),
            water_value: WaterValueConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DayAheadConfig {
    /// Block order length in hours; 0 disables block orders.
    pub block_hours: usize,
    /// Price samples used to place the bid levels.
    pub level_samples: usize,
    pub level_count: usize,
    /// Water-value cut file; without one leftover water is worth nothing.
    pub cuts: Option<PathBuf>,
}

impl Default for DayAheadConfig {
    fn default() -> Self {
        Self {
            block_hours: 4,
            level_samples: 1000,
            level_count: 5,
            cuts: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaintenanceConfig {
    /// Hours per plant; defaults to the river file's maintenance column.
    pub durations: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulationKind {
    Multi,
    Single,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsolidationKind {
    Default,
    Never,
    After,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub formulation: FormulationKind,
    /// Scenario groups for the partial formulation; 0 means a quarter of the scenarios.
    pub groups: usize,
    pub consolidation: ConsolidationKind,
    pub consolidation_age: usize,
    pub trust_region: bool,
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    /// Record wall-clock times in iterations.csv (breaks byte-identical reruns).
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            formulation: FormulationKind::Multi,
            groups: 0,
            consolidation: ConsolidationKind::Default,
            consolidation_age: 5,
            trust_region: false,
            max_iterations: 1000,
            gap_tolerance: 1e-8,
            timing: false,
        }
    }
}

impl SolverConfig {
    pub fn lshaped(&self, scenarios: usize) -> LShapedConfig {
        let formulation = match self.formulation {
            FormulationKind::Multi => Formulation::Multi,
            FormulationKind::Single => Formulation::Single,
            FormulationKind::Partial if self.groups == 0 => {
                Formulation::Partial(scenarios.div_ceil(4).max(1))
            }
            FormulationKind::Partial => Formulation::Partial(self.groups),
        };
        let consolidation = match self.consolidation {
            ConsolidationKind::Default => Consolidation::Default,
            ConsolidationKind::Never => Consolidation::Never,
            ConsolidationKind::After => Consolidation::After(self.consolidation_age),
        };
        LShapedConfig {
            formulation,
            consolidation,
            trust_region: TrustRegionConfig {
                enabled: self.trust_region,
                ..TrustRegionConfig::default()
            },
            max_iterations: self.max_iterations,
            gap_tolerance: self.gap_tolerance,
            ..LShapedConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSolverKind {
    LShaped,
    ExtensiveForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaaConfig {
    /// Increasing sample sizes tried until the VRP interval is narrow enough.
    pub schedule: Vec<usize>,
    /// Instances solved for the optimal-value bound.
    pub m: usize,
    /// Evaluation batches for the candidate's value.
    pub t: usize,
    /// Scenarios for the expected-value problem and its evaluation.
    pub eev_scenarios: usize,
    pub alpha: f64,
    /// Stop once the VRP interval width relative to its estimate is at most this.
    pub rel_tol: f64,
    pub solver: InstanceSolverKind,
}

impl Default for SaaConfig {
    fn default() -> Self {
        Self {
            schedule: vec![10, 20, 50],
            m: 10,
            t: 10,
            eev_scenarios: 1000,
            alpha: 0.05,
            rel_tol: 0.0,
            solver: InstanceSolverKind::LShaped,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Decision CSV written by `solve`.
    pub strategy: Option<PathBuf>,
}

/// Splits `a.b.c=value` into a key path and a TOML value. Values that do
/// not parse as TOML are taken as strings.
fn parse_override(text: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = text.split_once('=').ok_or_else(|| {
        CliError::Config(format!("override `{text}` is not of the form key=value"))
    })?;
    let path: Vec<String> = key
        .trim()
        .split('.')
        .map(|k| k.trim().replace('-', "_"))
        .collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!(
            "override key `{key}` has an empty component"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(
    root: &mut toml::Table,
    path: &[String],
    value: toml::Value,
) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("override paths are non-empty");
    let mut table = root;
    for key in parents {
        let entry = table
            .entry(key.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override path {} crosses the non-table key `{key}`",
                path.join(".")
            ))
        })?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `key=value` overrides in order and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (key, value) = parse_override(o)?;
            apply_override(&mut root, &key, value)?;
        }
        let config: Self = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.scenarios == 0 {
            return bad("scenarios must be positive".into());
        }
        if !(self.saa.alpha > 0.0 && self.saa.alpha < 0.5) {
            return bad(format!("saa.alpha {} must lie in (0, 0.5)", self.saa.alpha));
        }
        if let Some(f) = self.initial_fill {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("initial_fill {f} outside [0, 1]"));
            }
        }
        if self.day_ahead.level_count.is_multiple_of(2) || self.day_ahead.level_samples < 2 {
            return bad("day_ahead needs an odd level_count and at least two level_samples".into());
        }
        if self.hours == 0 {
            return bad("hours must be positive".into());
        }
        for (name, file) in [
            ("day_ahead.cuts", &self.day_ahead.cuts),
            ("evaluate.strategy", &self.evaluate.strategy),
        ] {
            if let Some(p) = file {
                if !p.exists() {
                    return bad(format!("{name} file {} does not exist", p.display()));
                }
            }
        }
        if !self.river.starts_with("builtin:") && !Path::new(&self.river).exists() {
            return bad(format!("river file {} does not exist", self.river));
        }
        self.sampler.validate().map_err(CliError::from)?;
        self.penalties.validate().map_err(CliError::from)?;
        Ok(())
    }
}
