//! Capacity expansion: extra installed power per plant in the first stage,
//! long-horizon scheduling at a coarse time resolution in the second.

use std::sync::Arc;

use hydrosp::lp::{LinearProgram, RowSense};
use hydrosp::sp::{RecourseTemplate, ScenarioSample, SecondStage, Sense, TwoStageProgram};
use serde::{Deserialize, Serialize};

use crate::hydro::{
    production_segments, RescaledNetwork, Resolution, RiverNetwork, FIRST_SEGMENT_SHARE,
};
use crate::physics::{add_hydro, HydroBlock, Initial};
use crate::strategy::{assemble, DecisionKind, DecisionRecord, ProductionSchedule};
use crate::ModelError;

const EUR_PER_MEUR: f64 = 1e6;

/// Investment parameters. Costs are in MEur per MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Yearly interest rate.
    pub rate: f64,
    pub unit_cost: f64,
    pub payback_years: f64,
    /// Limit on the total added capacity (MW).
    pub max_total: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            rate: 0.05,
            unit_cost: 0.79,
            payback_years: 40.0,
            max_total: 1000.0,
        }
    }
}

/// Cost per MW (MEur) charged for a horizon of `days` days: the annuity that
/// repays `unit_cost` over `payback_years` in payments every `days` days at
/// the equivalent interest rate `(1 + rate)^(days / 365) - 1`.
pub fn equivalent_cost(days: f64, rate: f64, unit_cost: f64, payback_years: f64) -> f64 {
    let r = (1.0 + rate).powf(days / 365.0) - 1.0;
    if r == 0.0 {
        return unit_cost * days / (365.0 * payback_years);
    }
    unit_cost * r / (1.0 - (1.0 + r).powf(-payback_years * 365.0 / days))
}

/// Added power and the discharge capacity that comes with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    /// MW per plant.
    pub delta_power: Vec<f64>,
    /// m3/s per plant.
    pub delta_discharge: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CapacityModel {
    pub program: TwoStageProgram,
    pub periods: usize,
    pub resolution: Resolution,
    pub plants: usize,
    /// Discharge added per MW (m3/s per MW) for each plant.
    pub discharge_per_mw: Vec<f64>,
    /// Charged cost per MW over the horizon (Eur).
    pub cost_per_mw: f64,
}

impl CapacityModel {
    pub fn plan(&self, x: &[f64]) -> ExpansionPlan {
        ExpansionPlan {
            delta_power: x.to_vec(),
            delta_discharge: x
                .iter()
                .zip(&self.discharge_per_mw)
                .map(|(p, r)| p * r)
                .collect(),
        }
    }

    pub fn schedule(&self, y: &[f64]) -> ProductionSchedule {
        let hv = HydroBlock {
            base: 0,
            plants: self.plants,
            periods: self.periods,
        }
        .values(y);
        ProductionSchedule {
            hours_per_period: self.resolution.hours_per_period(),
            production: hv.production,
            discharge: hv.discharge,
            spill: hv.spill,
            volume: hv.volume,
            dispatch: vec![],
            block_dispatch: vec![],
            shortage: vec![],
            surplus: vec![],
            water_value: vec![],
        }
    }

    pub fn records(&self, x: &[f64]) -> Vec<DecisionRecord> {
        x.iter()
            .enumerate()
            .map(|(h, &v)| DecisionRecord {
                kind: DecisionKind::ExpansionMw,
                period: None,
                level: None,
                plant: Some(h),
                price: None,
                value: v,
            })
            .collect()
    }

    pub fn decision(&self, records: &[DecisionRecord]) -> Result<Vec<f64>, ModelError> {
        assemble(self.plants, records, |r| match r.kind {
            DecisionKind::ExpansionMw => r.plant.filter(|&h| h < self.plants),
            _ => None,
        })
    }
}

struct CapacityTemplate {
    net: RescaledNetwork,
    periods: usize,
    discharge_per_mw: Vec<f64>,
}

impl RecourseTemplate for CapacityTemplate {
    fn num_recourse(&self) -> usize {
        HydroBlock::num_vars(self.net.len(), self.periods)
    }

    fn second_stage(&self, sc: &ScenarioSample) -> SecondStage {
        let mut st = SecondStage::default();
        let hydro = add_hydro(
            &mut st,
            &self.net,
            &sc.inflow,
            &sc.price,
            Initial::Fixed,
            false,
        );
        let shares = [FIRST_SEGMENT_SHARE, 1.0 - FIRST_SEGMENT_SHARE];
        for (h, p) in self.net.plants.iter().enumerate() {
            for (s, share) in shares.iter().enumerate() {
                for t in 0..self.periods {
                    // Q_{h,s,t} <= share (Qbar + dQ), dQ = (Qbar / Pbar) dP
                    st.add_row(
                        vec![(h, -share * self.discharge_per_mw[h])],
                        vec![(hydro.discharge(h, s, t), 1.0)],
                        RowSense::Le,
                        p.max_discharge[s],
                    );
                }
            }
        }
        st
    }
}

/// Builds the expansion program over `horizon_days` days split into periods
/// of `resolution` hours.
pub fn build_capacity(
    network: &RiverNetwork,
    resolution: Resolution,
    horizon_days: usize,
    cost: &CostParams,
) -> Result<CapacityModel, ModelError> {
    let hpp = resolution.hours_per_period();
    if horizon_days == 0 || !(horizon_days * 24).is_multiple_of(hpp) {
        return Err(ModelError::Config(format!(
            "{hpp} hours per period does not divide a {horizon_days}-day horizon"
        )));
    }
    if !(cost.max_total >= 0.0)
        || !(cost.unit_cost >= 0.0)
        || !(cost.rate > -1.0)
        || !(cost.payback_years > 0.0)
    {
        return Err(ModelError::Config(
            "capacity cost parameters out of range".into(),
        ));
    }
    let periods = horizon_days * 24 / hpp;
    let cost_per_mw = equivalent_cost(
        horizon_days as f64,
        cost.rate,
        cost.unit_cost,
        cost.payback_years,
    ) * EUR_PER_MEUR;
    let discharge_per_mw = network
        .plants()
        .iter()
        .map(|p| production_segments(p).map(|_| p.max_discharge / p.capacity))
        .collect::<Result<Vec<_>, _>>()?;
    let mut fs = LinearProgram::new();
    for _ in network.plants() {
        if cost_per_mw.is_finite() {
            fs.add_var(-cost_per_mw, 0.0, cost.max_total);
        } else {
            fs.add_var(0.0, 0.0, 0.0);
        }
    }
    fs.add_row(
        (0..network.len()).map(|h| (h, 1.0)).collect(),
        RowSense::Le,
        cost.max_total,
    );
    let template = CapacityTemplate {
        net: network.rescale(resolution)?,
        periods,
        discharge_per_mw: discharge_per_mw.clone(),
    };
    let program = TwoStageProgram::new(Sense::Maximize, fs, vec![], Arc::new(template))?;
    Ok(CapacityModel {
        program,
        periods,
        resolution,
        plants: network.len(),
        discharge_per_mw,
        cost_per_mw,
    })
}
