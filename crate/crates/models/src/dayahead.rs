//! Day-ahead bidding: price-independent, price-dependent and block orders
//! in the first stage, hydro scheduling and balancing in the second.

use std::sync::Arc;

use hydrosp::lp::{LinearProgram, RowSense};
use hydrosp::sp::{RecourseTemplate, ScenarioSample, SecondStage, Sense, TwoStageProgram};
use serde::{Deserialize, Serialize};

use crate::dispatch::dispatch_weights;
use crate::hydro::{RescaledNetwork, Resolution, RiverNetwork};
use crate::physics::{add_hydro, HydroBlock, Initial};
use crate::scenarios::{block_price_levels, check_blocks, Block, PriceLevels};
use crate::strategy::{
    assemble, DayAheadStrategy, DecisionKind, DecisionRecord, ProductionSchedule,
};
use crate::water_value::WaterValueCuts;
use crate::ModelError;

/// Total offered volume per hour may not exceed this multiple of the installed capacity.
pub const OFFER_CAP_FACTOR: f64 = 2.0;

/// Balancing-market price factors: shortage is bought at `shortage * price`,
/// surplus sold at `surplus * price`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Penalties {
    /// Peak hours are `peak_start .. peak_end` on the clock.
    pub peak_start: usize,
    pub peak_end: usize,
    pub peak_shortage: f64,
    pub peak_surplus: f64,
    pub offpeak_shortage: f64,
    pub offpeak_surplus: f64,
    /// Clock hour of the first model hour.
    pub first_hour: usize,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            peak_start: 8,
            peak_end: 20,
            peak_shortage: 1.15,
            peak_surplus: 0.85,
            offpeak_shortage: 1.10,
            offpeak_surplus: 0.90,
            first_hour: 0,
        }
    }
}

impl Penalties {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (s, u) in [
            (self.peak_shortage, self.peak_surplus),
            (self.offpeak_shortage, self.offpeak_surplus),
        ] {
            if !(u < 1.0 && 1.0 < s) || !(u >= 0.0) {
                return Err(ModelError::Config(format!(
                    "penalties need 0 <= surplus factor < 1 < shortage factor, got {u} and {s}"
                )));
            }
        }
        Ok(())
    }

    fn is_peak(&self, t: usize) -> bool {
        (self.peak_start..self.peak_end).contains(&((self.first_hour + t) % 24))
    }

    pub fn shortage(&self, t: usize) -> f64 {
        if self.is_peak(t) {
            self.peak_shortage
        } else {
            self.offpeak_shortage
        }
    }

    pub fn surplus(&self, t: usize) -> f64 {
        if self.is_peak(t) {
            self.peak_surplus
        } else {
            self.offpeak_surplus
        }
    }
}

/// Column positions of the day-ahead program.
///
/// First stage: `T + P T + P |B|` columns (`x^I`, `x^D`, `x^B`) and
/// `(P - 1) T + T` rows (monotone bid curves, offer cap).
/// Second stage: `4T + |B| + T(1 + 4H) + G` columns (`y`, `y_b`, `y+`, `y-`,
/// hydro, water value) and `2T + |B| + T(1 + H) + C` rows (dispatch, block
/// dispatch, load balance, production, flow conservation, water-value cuts),
/// where `G` is the number of cut groups and `C` the number of cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayAheadLayout {
    pub hours: usize,
    pub levels: usize,
    pub blocks: usize,
    pub plants: usize,
    pub groups: usize,
    pub cuts: usize,
}

impl DayAheadLayout {
    pub fn independent(&self, t: usize) -> usize {
        t
    }

    pub fn dependent(&self, i: usize, t: usize) -> usize {
        self.hours + i * self.hours + t
    }

    pub fn block(&self, i: usize, b: usize) -> usize {
        self.hours * (1 + self.levels) + i * self.blocks + b
    }

    pub fn num_first_stage(&self) -> usize {
        self.hours * (1 + self.levels) + self.levels * self.blocks
    }

    pub fn num_first_stage_rows(&self) -> usize {
        self.levels.saturating_sub(1) * self.hours + self.hours
    }

    pub fn dispatch(&self, t: usize) -> usize {
        t
    }

    pub fn block_dispatch(&self, b: usize) -> usize {
        self.hours + b
    }

    pub fn shortage(&self, t: usize) -> usize {
        self.hours + self.blocks + t
    }

    pub fn surplus(&self, t: usize) -> usize {
        2 * self.hours + self.blocks + t
    }

    pub(crate) fn hydro(&self) -> HydroBlock {
        HydroBlock {
            base: 3 * self.hours + self.blocks,
            plants: self.plants,
            periods: self.hours,
        }
    }

    pub fn water_value(&self, g: usize) -> usize {
        3 * self.hours + self.blocks + HydroBlock::num_vars(self.plants, self.hours) + g
    }

    pub fn num_recourse(&self) -> usize {
        self.water_value(self.groups)
    }

    pub fn num_recourse_rows(&self) -> usize {
        2 * self.hours + self.blocks + HydroBlock::num_rows(self.plants, self.hours) + self.cuts
    }
}

/// A built day-ahead program with the data needed to interpret its solutions.
#[derive(Debug, Clone)]
pub struct DayAheadModel {
    pub program: TwoStageProgram,
    pub layout: DayAheadLayout,
    pub levels: PriceLevels,
    pub blocks: Vec<Block>,
    pub block_levels: Vec<Vec<f64>>,
    /// Per-hour offer cap (MWh).
    pub offer_cap: f64,
}

pub(crate) struct DayAheadTemplate {
    pub(crate) net: RescaledNetwork,
    pub(crate) layout: DayAheadLayout,
    levels: PriceLevels,
    blocks: Vec<Block>,
    block_levels: Vec<Vec<f64>>,
    penalties: Penalties,
    cuts: Option<WaterValueCuts>,
}

impl RecourseTemplate for DayAheadTemplate {
    fn num_recourse(&self) -> usize {
        self.layout.num_recourse()
    }

    fn second_stage(&self, sc: &ScenarioSample) -> SecondStage {
        let l = &self.layout;
        let mut st = SecondStage::default();
        for t in 0..l.hours {
            st.add_var(sc.price[t], 0.0, f64::INFINITY);
        }
        for b in &self.blocks {
            st.add_var(b.len as f64 * b.mean(&sc.price), 0.0, f64::INFINITY);
        }
        for t in 0..l.hours {
            st.add_var(
                -self.penalties.shortage(t) * sc.price[t],
                0.0,
                f64::INFINITY,
            );
        }
        for t in 0..l.hours {
            st.add_var(self.penalties.surplus(t) * sc.price[t], 0.0, f64::INFINITY);
        }
        let hydro = add_hydro(
            &mut st,
            &self.net,
            &sc.inflow,
            &vec![0.0; l.hours],
            Initial::Fixed,
            true,
        );
        debug_assert_eq!(hydro, l.hydro());
        for _ in 0..l.groups {
            st.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        for t in 0..l.hours {
            let weights = dispatch_weights(sc.price[t], self.levels.at(t))
                .expect("levels are sorted on construction");
            let mut tech = vec![(l.independent(t), -1.0)];
            tech.extend(
                weights
                    .iter()
                    .filter(|w| w.1 != 0.0)
                    .map(|&(i, w)| (l.dependent(i, t), -w)),
            );
            st.add_row(tech, vec![(l.dispatch(t), 1.0)], RowSense::Eq, 0.0);
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let mean = block.mean(&sc.price);
            let tech = (0..l.levels)
                .filter(|&i| self.block_levels[b][i] <= mean)
                .map(|i| (l.block(i, b), -1.0))
                .collect();
            st.add_row(tech, vec![(l.block_dispatch(b), 1.0)], RowSense::Eq, 0.0);
        }
        for t in 0..l.hours {
            // y_t + sum_b y_b - P_t = y+ - y-
            let mut row = vec![
                (l.dispatch(t), 1.0),
                (hydro.production(t), -1.0),
                (l.shortage(t), -1.0),
                (l.surplus(t), 1.0),
            ];
            for (b, block) in self.blocks.iter().enumerate() {
                if block.contains(t) {
                    row.push((l.block_dispatch(b), 1.0));
                }
            }
            st.add_row(vec![], row, RowSense::Eq, 0.0);
        }
        if let Some(cuts) = &self.cuts {
            let end = l.hours - 1;
            for cut in &cuts.cuts {
                // W_g <= w + slope . M_end
                let mut row = vec![(l.water_value(cut.group), 1.0)];
                row.extend(
                    cut.slopes
                        .iter()
                        .enumerate()
                        .map(|(h, &g)| (hydro.volume(h, end), -g)),
                );
                st.add_row(vec![], row, RowSense::Le, cut.intercept);
            }
        }
        st
    }
}

/// Builds the day-ahead program over `levels.hours()` hours. Without cuts
/// the value of the water left at the end of the day is taken as zero.
pub fn build_day_ahead(
    network: &RiverNetwork,
    levels: &PriceLevels,
    blocks: &[Block],
    cuts: Option<&WaterValueCuts>,
    penalties: &Penalties,
) -> Result<DayAheadModel, ModelError> {
    let template = DayAheadTemplate::new(network, levels, blocks, cuts, penalties)?;
    let layout = template.layout;
    let offer_cap = OFFER_CAP_FACTOR * network.total_capacity();
    let mut fs = LinearProgram::new();
    for _ in 0..layout.num_first_stage() {
        fs.add_var(0.0, 0.0, offer_cap);
    }
    add_bid_rows(&mut fs, &layout, blocks, offer_cap);
    let block_levels = template.block_levels.clone();
    let program = TwoStageProgram::new(Sense::Maximize, fs, vec![], Arc::new(template))?;
    Ok(DayAheadModel {
        program,
        layout,
        levels: levels.clone(),
        blocks: blocks.to_vec(),
        block_levels,
        offer_cap,
    })
}

impl DayAheadTemplate {
    pub(crate) fn new(
        network: &RiverNetwork,
        levels: &PriceLevels,
        blocks: &[Block],
        cuts: Option<&WaterValueCuts>,
        penalties: &Penalties,
    ) -> Result<Self, ModelError> {
        penalties.validate()?;
        let hours = levels.hours();
        if hours == 0 || levels.count() == 0 {
            return Err(ModelError::Argument("price levels are empty".into()));
        }
        for t in 0..hours {
            if levels.at(t).len() != levels.count() {
                return Err(ModelError::Argument(format!(
                    "hour {t} has a different number of price levels"
                )));
            }
            dispatch_weights(0.0, levels.at(t))?;
        }
        check_blocks(blocks, hours)?;
        if let Some(c) = cuts {
            c.check(network.len())
                .map_err(|e| ModelError::Config(format!("water-value cuts: {e}")))?;
        }
        let layout = DayAheadLayout {
            hours,
            levels: levels.count(),
            blocks: blocks.len(),
            plants: network.len(),
            groups: cuts.map_or(0, |c| c.groups),
            cuts: cuts.map_or(0, |c| c.cuts.len()),
        };
        Ok(Self {
            net: network.rescale(Resolution::HOURLY)?,
            layout,
            levels: levels.clone(),
            blocks: blocks.to_vec(),
            block_levels: block_price_levels(levels, blocks)?,
            penalties: penalties.clone(),
            cuts: cuts.cloned(),
        })
    }
}

/// Monotone bid curves and the per-hour offer cap, counting only blocks that cover the hour.
pub(crate) fn add_bid_rows(
    fs: &mut LinearProgram,
    l: &DayAheadLayout,
    blocks: &[Block],
    offer_cap: f64,
) {
    for t in 0..l.hours {
        for i in 0..l.levels.saturating_sub(1) {
            fs.add_row(
                vec![(l.dependent(i, t), 1.0), (l.dependent(i + 1, t), -1.0)],
                RowSense::Le,
                0.0,
            );
        }
    }
    for t in 0..l.hours {
        let mut row = vec![(l.independent(t), 1.0), (l.dependent(l.levels - 1, t), 1.0)];
        for (b, block) in blocks.iter().enumerate() {
            if block.contains(t) {
                row.extend((0..l.levels).map(|i| (l.block(i, b), 1.0)));
            }
        }
        fs.add_row(row, RowSense::Le, offer_cap);
    }
}

impl DayAheadLayout {
    pub fn strategy(&self, x: &[f64]) -> DayAheadStrategy {
        DayAheadStrategy {
            independent: (0..self.hours).map(|t| x[self.independent(t)]).collect(),
            dependent: (0..self.levels)
                .map(|i| (0..self.hours).map(|t| x[self.dependent(i, t)]).collect())
                .collect(),
            blocks: (0..self.levels)
                .map(|i| (0..self.blocks).map(|b| x[self.block(i, b)]).collect())
                .collect(),
        }
    }

    pub fn schedule(&self, y: &[f64]) -> ProductionSchedule {
        let hv = self.hydro().values(y);
        ProductionSchedule {
            hours_per_period: 1,
            production: hv.production,
            discharge: hv.discharge,
            spill: hv.spill,
            volume: hv.volume,
            dispatch: (0..self.hours).map(|t| y[self.dispatch(t)]).collect(),
            block_dispatch: (0..self.blocks)
                .map(|b| y[self.block_dispatch(b)])
                .collect(),
            shortage: (0..self.hours).map(|t| y[self.shortage(t)]).collect(),
            surplus: (0..self.hours).map(|t| y[self.surplus(t)]).collect(),
            water_value: (0..self.groups).map(|g| y[self.water_value(g)]).collect(),
        }
    }
}

impl DayAheadModel {
    pub fn records(&self, x: &[f64]) -> Vec<DecisionRecord> {
        bid_records(&self.layout, &self.levels, &self.block_levels, x)
    }

    pub fn decision(&self, records: &[DecisionRecord]) -> Result<Vec<f64>, ModelError> {
        let l = self.layout;
        assemble(l.num_first_stage(), records, |r| bid_index(&l, r))
    }

    pub fn block_hours(&self) -> Vec<std::ops::Range<usize>> {
        self.blocks.iter().map(|b| b.hours()).collect()
    }
}

pub(crate) fn bid_records(
    l: &DayAheadLayout,
    levels: &PriceLevels,
    block_levels: &[Vec<f64>],
    x: &[f64],
) -> Vec<DecisionRecord> {
    let mut out = Vec::new();
    let rec = |kind, period, level: Option<usize>, price, value| DecisionRecord {
        kind,
        period: Some(period),
        level,
        plant: None,
        price,
        value,
    };
    for t in 0..l.hours {
        out.push(rec(
            DecisionKind::IndependentMwh,
            t,
            None,
            None,
            x[l.independent(t)],
        ));
        for i in 0..l.levels {
            out.push(rec(
                DecisionKind::DependentMwh,
                t,
                Some(i),
                Some(levels.levels[t][i]),
                x[l.dependent(i, t)],
            ));
        }
    }
    for b in 0..l.blocks {
        for i in 0..l.levels {
            out.push(rec(
                DecisionKind::BlockMwh,
                b,
                Some(i),
                Some(block_levels[b][i]),
                x[l.block(i, b)],
            ));
        }
    }
    out
}

pub(crate) fn bid_index(l: &DayAheadLayout, r: &DecisionRecord) -> Option<usize> {
    let t = r.period?;
    match r.kind {
        DecisionKind::IndependentMwh if t < l.hours && r.level.is_none() => Some(l.independent(t)),
        DecisionKind::DependentMwh if t < l.hours => {
            r.level.filter(|&i| i < l.levels).map(|i| l.dependent(i, t))
        }
        DecisionKind::BlockMwh if t < l.blocks => {
            r.level.filter(|&i| i < l.levels).map(|i| l.block(i, t))
        }
        _ => None,
    }
}
