//! Maintenance scheduling: hourly bids plus a binary plan of consecutive
//! maintenance hours per plant, during which the plant cannot discharge.

use std::sync::Arc;

use hydrosp::lp::{LinearProgram, RowSense};
use hydrosp::sp::{RecourseTemplate, ScenarioSample, SecondStage, Sense, TwoStageProgram};

use crate::dayahead::{
    add_bid_rows, bid_index, bid_records, DayAheadLayout, DayAheadTemplate, Penalties,
    OFFER_CAP_FACTOR,
};
use crate::hydro::RiverNetwork;
use crate::scenarios::PriceLevels;
use crate::strategy::{assemble, DecisionKind, DecisionRecord};
use crate::ModelError;

/// Bids use the day-ahead layout without blocks or water value; the
/// maintenance flags `s_{h,t}` follow at `bids.num_first_stage() + h T + t`.
#[derive(Debug, Clone)]
pub struct MaintenanceModel {
    pub program: TwoStageProgram,
    pub bids: DayAheadLayout,
    pub levels: PriceLevels,
    pub durations: Vec<usize>,
    pub offer_cap: f64,
}

impl MaintenanceModel {
    pub fn flag(&self, h: usize, t: usize) -> usize {
        flag_index(&self.bids, h, t)
    }

    pub fn num_first_stage(&self) -> usize {
        self.flag(self.bids.plants, 0)
    }

    /// `schedule[h][t]`, rounded to 0/1.
    pub fn schedule(&self, x: &[f64]) -> Vec<Vec<u8>> {
        (0..self.bids.plants)
            .map(|h| {
                (0..self.bids.hours)
                    .map(|t| u8::from(x[self.flag(h, t)] > 0.5))
                    .collect()
            })
            .collect()
    }

    pub fn records(&self, x: &[f64]) -> Vec<DecisionRecord> {
        let mut out = bid_records(&self.bids, &self.levels, &[], x);
        for h in 0..self.bids.plants {
            for t in 0..self.bids.hours {
                out.push(DecisionRecord {
                    kind: DecisionKind::MaintenanceFlag,
                    period: Some(t),
                    level: None,
                    plant: Some(h),
                    price: None,
                    value: x[self.flag(h, t)],
                });
            }
        }
        out
    }

    pub fn decision(&self, records: &[DecisionRecord]) -> Result<Vec<f64>, ModelError> {
        let l = self.bids;
        assemble(self.num_first_stage(), records, |r| match r.kind {
            DecisionKind::MaintenanceFlag => match (r.plant, r.period) {
                (Some(h), Some(t)) if h < l.plants && t < l.hours => Some(flag_index(&l, h, t)),
                _ => None,
            },
            _ => bid_index(&l, r),
        })
    }
}

fn flag_index(l: &DayAheadLayout, h: usize, t: usize) -> usize {
    l.num_first_stage() + h * l.hours + t
}

/// True when every plant is maintained for exactly its duration in one consecutive run.
pub fn is_valid_schedule(schedule: &[Vec<u8>], durations: &[usize]) -> bool {
    schedule.iter().zip(durations).all(|(row, &d)| {
        let total: usize = row.iter().map(|&s| s as usize).sum();
        let starts = (0..row.len())
            .filter(|&t| row[t] == 1 && (t == 0 || row[t - 1] == 0))
            .count();
        total == d && (d == 0 || starts == 1)
    })
}

struct MaintenanceTemplate {
    inner: DayAheadTemplate,
}

impl RecourseTemplate for MaintenanceTemplate {
    fn num_recourse(&self) -> usize {
        self.inner.num_recourse()
    }

    fn second_stage(&self, sc: &ScenarioSample) -> SecondStage {
        let mut st = self.inner.second_stage(sc);
        let l = self.inner.layout;
        let hydro = l.hydro();
        for (h, p) in self.inner.net.plants.iter().enumerate() {
            for s in 0..2 {
                for t in 0..l.hours {
                    // Q_{h,s,t} <= (1 - s_{h,t}) Qbar_{h,s}
                    let cap = p.max_discharge[s];
                    st.add_row(
                        vec![(flag_index(&l, h, t), cap)],
                        vec![(hydro.discharge(h, s, t), 1.0)],
                        RowSense::Le,
                        cap,
                    );
                }
            }
        }
        st
    }
}

/// Builds the maintenance program over `levels.hours()` hours with
/// maintenance durations `durations[h]` (hours).
pub fn build_maintenance(
    network: &RiverNetwork,
    levels: &PriceLevels,
    durations: &[usize],
    penalties: &Penalties,
) -> Result<MaintenanceModel, ModelError> {
    let inner = DayAheadTemplate::new(network, levels, &[], None, penalties)?;
    let bids = inner.layout;
    let hours = bids.hours;
    if durations.len() != network.len() {
        return Err(ModelError::Config(format!(
            "{} maintenance durations for {} plants",
            durations.len(),
            network.len()
        )));
    }
    if let Some(h) = durations.iter().position(|&d| d > hours) {
        return Err(ModelError::Config(format!(
            "maintenance of plant {} takes {} hours, longer than the {hours}-hour horizon",
            network.plants()[h].name,
            durations[h]
        )));
    }
    let offer_cap = OFFER_CAP_FACTOR * network.total_capacity();
    let mut fs = LinearProgram::new();
    for _ in 0..bids.num_first_stage() {
        fs.add_var(0.0, 0.0, offer_cap);
    }
    let mut binaries = Vec::new();
    for _ in 0..network.len() * hours {
        binaries.push(fs.add_var(0.0, 0.0, 1.0));
    }
    add_bid_rows(&mut fs, &bids, &[], offer_cap);
    for (h, &d) in durations.iter().enumerate() {
        let s = |t: usize| flag_index(&bids, h, t);
        fs.add_row(
            (0..hours).map(|t| (s(t), 1.0)).collect(),
            RowSense::Eq,
            d as f64,
        );
        if d <= 1 {
            // a single hour is always consecutive
            continue;
        }
        for t in 0..hours {
            // a run starting at t must still be on at t + d - 1, inside the horizon
            let mut row = vec![(s(t), 1.0)];
            if t > 0 {
                row.push((s(t - 1), -1.0));
            }
            if t + d <= hours {
                row.push((s(t + d - 1), -1.0));
            }
            fs.add_row(row, RowSense::Le, 0.0);
        }
    }
    let template = MaintenanceTemplate { inner };
    let program = TwoStageProgram::new(Sense::Maximize, fs, binaries, Arc::new(template))?;
    Ok(MaintenanceModel {
        program,
        bids,
        levels: levels.clone(),
        durations: durations.to_vec(),
        offer_cap,
    })
}
