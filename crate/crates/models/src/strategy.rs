//! First-stage decisions and second-stage schedules in plain form, with
//! their CSV representation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ModelError;

/// What a first-stage value means; the suffix is its unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    IndependentMwh,
    DependentMwh,
    BlockMwh,
    MaintenanceFlag,
    ExpansionMw,
}

/// One first-stage value. `period` is the hour (or block index for block
/// orders), `level` the bid level and `plant` the plant index where relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub kind: DecisionKind,
    pub period: Option<usize>,
    pub level: Option<usize>,
    pub plant: Option<usize>,
    #[serde(rename = "price_eur_per_mwh")]
    pub price: Option<f64>,
    pub value: f64,
}

pub fn write_decisions_csv<W: Write>(out: W, records: &[DecisionRecord]) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        // adding zero turns -0.0 into 0.0
        let r = DecisionRecord {
            value: r.value + 0.0,
            ..r.clone()
        };
        w.serialize(&r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| ModelError::Io {
        path: "strategy".into(),
        message: e.to_string(),
    })
}

pub fn read_decisions_csv<R: Read>(input: R) -> Result<Vec<DecisionRecord>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec.map_err(csv_error)?);
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> ModelError {
    ModelError::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

/// Places records into a decision vector of length `n`. Every entry must be
/// given exactly once.
pub(crate) fn assemble(
    n: usize,
    records: &[DecisionRecord],
    index_of: impl Fn(&DecisionRecord) -> Option<usize>,
) -> Result<Vec<f64>, ModelError> {
    let mut x = vec![f64::NAN; n];
    for (k, r) in records.iter().enumerate() {
        let j = index_of(r).ok_or_else(|| {
            ModelError::Argument(format!(
                "decision record {} ({:?}) does not fit the model dimensions",
                k + 1,
                r.kind
            ))
        })?;
        if !x[j].is_nan() {
            return Err(ModelError::Argument(format!(
                "decision record {} repeats an earlier entry",
                k + 1
            )));
        }
        x[j] = r.value;
    }
    let missing = x.iter().filter(|v| v.is_nan()).count();
    if missing > 0 {
        return Err(ModelError::Argument(format!(
            "decision has {} of {n} entries; the model expects all of them",
            n - missing
        )));
    }
    Ok(x)
}

/// Bids of the day-ahead and maintenance models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAheadStrategy {
    /// `x^I_t` (MWh per hour).
    pub independent: Vec<f64>,
    /// `x^D_{i,t}` as `dependent[i][t]`.
    pub dependent: Vec<Vec<f64>>,
    /// `x^B_{i,b}` as `blocks[i][b]`.
    pub blocks: Vec<Vec<f64>>,
}

impl DayAheadStrategy {
    /// Largest violation of non-negativity, bid-curve monotonicity and the
    /// per-hour offer cap. `block_hours[b]` lists the hours block `b` covers.
    pub fn max_violation(&self, cap: f64, block_hours: &[std::ops::Range<usize>]) -> f64 {
        let mut v = 0.0f64;
        let levels = self.dependent.len();
        for t in 0..self.independent.len() {
            v = v.max(-self.independent[t]);
            for i in 0..levels {
                v = v.max(-self.dependent[i][t]);
                if i + 1 < levels {
                    v = v.max(self.dependent[i][t] - self.dependent[i + 1][t]);
                }
            }
            let mut offered = self.independent[t] + self.dependent.last().map_or(0.0, |d| d[t]);
            for (b, hours) in block_hours.iter().enumerate() {
                if hours.contains(&t) {
                    offered += self.blocks.iter().map(|row| row[b]).sum::<f64>();
                }
            }
            v = v.max(offered - cap);
        }
        for row in &self.blocks {
            for &x in row {
                v = v.max(-x);
            }
        }
        v
    }
}

/// A solved second stage in model units: volumes in period equivalents
/// (HE divided by the hours per period), flows in m3/s, energy in MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionSchedule {
    pub hours_per_period: usize,
    pub production: Vec<f64>,
    /// `discharge[h][segment][t]`.
    pub discharge: Vec<[Vec<f64>; 2]>,
    pub spill: Vec<Vec<f64>>,
    pub volume: Vec<Vec<f64>>,
    pub dispatch: Vec<f64>,
    pub block_dispatch: Vec<f64>,
    pub shortage: Vec<f64>,
    pub surplus: Vec<f64>,
    pub water_value: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ProductionRow {
    scenario: usize,
    period: usize,
    plant: usize,
    discharge_1_m3s: f64,
    discharge_2_m3s: f64,
    spill_m3s: f64,
    volume_he: f64,
}

/// Writes plant-level rows of several scenario schedules.
pub fn write_production_csv<W: Write>(
    out: W,
    schedules: &[ProductionSchedule],
) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(out);
    for (s, sched) in schedules.iter().enumerate() {
        let he = sched.hours_per_period as f64;
        for t in 0..sched.production.len() {
            for h in 0..sched.volume.len() {
                w.serialize(ProductionRow {
                    scenario: s,
                    period: t,
                    plant: h,
                    discharge_1_m3s: sched.discharge[h][0][t],
                    discharge_2_m3s: sched.discharge[h][1][t],
                    spill_m3s: sched.spill[h][t],
                    volume_he: sched.volume[h][t] * he,
                })
                .map_err(csv_error)?;
            }
        }
    }
    w.flush().map_err(|e| ModelError::Io {
        path: "production".into(),
        message: e.to_string(),
    })
}
