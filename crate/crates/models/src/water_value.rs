//! Water value of end-of-day reservoir contents, learned as cuts of a
//! week-ahead scheduling problem whose initial volumes are the first stage.

use std::io::{Read, Write};
use std::sync::Arc;

use hydrosp::lp::LinearProgram;
use hydrosp::lshaped::{self, write_iteration_log, LShapedConfig, LShapedResult};
use hydrosp::sp::{
    FiniteProgram, RecourseTemplate, ScenarioSample, SecondStage, Sense, TwoStageProgram,
};
use serde::{Deserialize, Serialize};

use crate::hydro::{RescaledNetwork, Resolution, RiverNetwork};
use crate::physics::{add_hydro, HydroBlock, Initial};
use crate::ModelError;

/// Upper bound `W_group <= intercept + slopes . M` (Eur, with `M` in HE).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterCut {
    pub group: usize,
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl WaterCut {
    pub fn value(&self, volumes: &[f64]) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .zip(volumes)
                .map(|(g, m)| g * m)
                .sum::<f64>()
    }
}

/// A concave polyhedral water value: the sum over groups of the lowest cut
/// of each group. Cuts are already weighted by their group's probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterValueCuts {
    pub plants: usize,
    pub groups: usize,
    pub cuts: Vec<WaterCut>,
}

impl WaterValueCuts {
    pub fn check(&self, plants: usize) -> Result<(), String> {
        if self.plants != plants {
            return Err(format!(
                "cuts cover {} plants, the river has {plants}",
                self.plants
            ));
        }
        if self.cuts.is_empty() {
            return Err("no cuts".into());
        }
        let mut seen = vec![false; self.groups];
        for c in &self.cuts {
            if c.slopes.len() != plants {
                return Err(format!(
                    "a cut has {} slopes for {plants} plants",
                    c.slopes.len()
                ));
            }
            if c.group >= self.groups {
                return Err(format!("cut group {} outside 0..{}", c.group, self.groups));
            }
            if !c.intercept.is_finite() || c.slopes.iter().any(|g| !g.is_finite()) {
                return Err("cut coefficients must be finite".into());
            }
            seen[c.group] = true;
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(format!("group {g} has no cut"));
        }
        Ok(())
    }

    /// Water value (Eur) of reservoir contents `volumes` (HE).
    pub fn evaluate(&self, volumes: &[f64]) -> f64 {
        let mut best = vec![f64::INFINITY; self.groups];
        for c in &self.cuts {
            best[c.group] = best[c.group].min(c.value(volumes));
        }
        best.iter().sum()
    }

    /// CSV with columns `cut_id, group, intercept, slope_<plant_id>...`.
    pub fn write_csv<W: Write>(&self, out: W, plant_ids: &[String]) -> Result<(), ModelError> {
        let io = |e: csv::Error| ModelError::Io {
            path: "cuts".into(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["cut_id".to_string(), "group".into(), "intercept_eur".into()];
        header.extend(plant_ids.iter().map(|id| format!("slope_{id}_eur_per_he")));
        w.write_record(&header).map_err(io)?;
        for (k, c) in self.cuts.iter().enumerate() {
            let mut row = vec![k.to_string(), c.group.to_string(), c.intercept.to_string()];
            row.extend(c.slopes.iter().map(f64::to_string));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| ModelError::Io {
            path: "cuts".into(),
            message: e.to_string(),
        })
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, ModelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = rdr
            .headers()
            .map_err(|e| ModelError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        if header.len() < 3 || &header[0] != "cut_id" || &header[1] != "group" {
            return Err(ModelError::Parse {
                line: 1,
                message: "expected columns cut_id, group, intercept, slopes".into(),
            });
        }
        let plants = header.len() - 3;
        let mut cuts = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ModelError::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let num = |k: usize| -> Result<f64, ModelError> {
                rec[k].parse().map_err(|_| ModelError::Parse {
                    line,
                    message: format!("not a number: {:?}", &rec[k]),
                })
            };
            let group = rec[1].parse::<usize>().map_err(|_| ModelError::Parse {
                line,
                message: format!("bad group {:?}", &rec[1]),
            })?;
            let slopes = (3..3 + plants).map(num).collect::<Result<Vec<_>, _>>()?;
            cuts.push(WaterCut {
                group,
                intercept: num(2)?,
                slopes,
            });
        }
        let groups = cuts.iter().map(|c| c.group + 1).max().unwrap_or(0);
        let out = Self {
            plants,
            groups,
            cuts,
        };
        out.check(plants)
            .map_err(|message| ModelError::Parse { line: 1, message })?;
        Ok(out)
    }
}

struct WeekAheadTemplate {
    net: RescaledNetwork,
    periods: usize,
}

impl RecourseTemplate for WeekAheadTemplate {
    fn num_recourse(&self) -> usize {
        HydroBlock::num_vars(self.net.len(), self.periods)
    }

    fn second_stage(&self, sc: &ScenarioSample) -> SecondStage {
        let mut st = SecondStage::default();
        let cols: Vec<usize> = (0..self.net.len()).collect();
        add_hydro(
            &mut st,
            &self.net,
            &sc.inflow,
            &sc.price,
            Initial::FirstStage(&cols),
            true,
        );
        st
    }
}

/// Week-ahead revenue maximization with the initial reservoir contents
/// (HE) as first-stage variables; the horizon is the scenarios' length in hours.
pub fn build_week_ahead(
    network: &RiverNetwork,
    hours: usize,
) -> Result<TwoStageProgram, ModelError> {
    if hours == 0 {
        return Err(ModelError::Argument(
            "week-ahead horizon must be at least one hour".into(),
        ));
    }
    let mut fs = LinearProgram::new();
    for p in network.plants() {
        fs.add_var(0.0, 0.0, p.max_volume);
    }
    let template = WeekAheadTemplate {
        net: network.rescale(Resolution::HOURLY)?,
        periods: hours,
    };
    Ok(TwoStageProgram::new(
        Sense::Maximize,
        fs,
        vec![],
        Arc::new(template),
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterValueConfig {
    pub scenarios: usize,
    pub hours: usize,
    /// Fractions of each reservoir limit evaluated before the first master solve.
    pub grid: Vec<f64>,
}

impl Default for WaterValueConfig {
    fn default() -> Self {
        Self {
            scenarios: 50,
            hours: 168,
            grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaterValueOutcome {
    pub cuts: WaterValueCuts,
    pub result: LShapedResult,
}

/// Runs the L-shaped method on the week-ahead problem and returns its cut
/// pool as a water-value function. `grid` holds fill fractions at which all
/// reservoirs are cut before the first master solve.
pub fn compute_water_value(
    network: &RiverNetwork,
    scenarios: Vec<ScenarioSample>,
    grid: &[f64],
    config: &LShapedConfig,
) -> Result<WaterValueOutcome, ModelError> {
    let hours = scenarios.first().map_or(0, |s| s.price.len());
    let program = build_week_ahead(network, hours)?;
    let fp = FiniteProgram::new(program, scenarios)?;
    let mut config = config.clone();
    for &f in grid {
        if !(0.0..=1.0).contains(&f) {
            return Err(ModelError::Config(format!(
                "water-value grid fraction {f} outside [0, 1]"
            )));
        }
        config
            .initial_points
            .push(network.plants().iter().map(|p| f * p.max_volume).collect());
    }
    let result = lshaped::solve(&fp, &config)?;
    if !result.converged {
        let mut log = Vec::new();
        write_iteration_log(&mut log, &result.log, false).map_err(|e| ModelError::Io {
            path: "iteration log".into(),
            message: e.to_string(),
        })?;
        return Err(ModelError::NotConverged {
            iterations: result.iterations,
            gap: result.relative_gap(),
            log: String::from_utf8_lossy(&log).into_owned(),
        });
    }
    let groups = result.group_probabilities.len();
    // internal cuts bound the minimized negative revenue of each group from below
    let cuts = result
        .cuts
        .iter()
        .map(|c| {
            let p = result.group_probabilities[c.group];
            WaterCut {
                group: c.group,
                intercept: -p * c.intercept,
                slopes: c.coefficients.iter().map(|g| -p * g).collect(),
            }
        })
        .collect();
    Ok(WaterValueOutcome {
        cuts: WaterValueCuts {
            plants: network.len(),
            groups,
            cuts,
        },
        result,
    })
}
