//! Reservoir, discharge and production variables shared by all models.

use hydrosp::lp::RowSense;
use hydrosp::sp::SecondStage;

use crate::hydro::RescaledNetwork;

/// Where the reservoir contents before the first period come from.
pub(crate) enum Initial<'a> {
    /// The network's configured initial volumes.
    Fixed,
    /// First-stage columns, one per plant.
    FirstStage(&'a [usize]),
}

/// Column layout of the hydro variables inside a second stage:
/// `P_t`, then per plant `Q_1`, `Q_2`, `S` and `M` over all periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct HydroBlock {
    pub base: usize,
    pub plants: usize,
    pub periods: usize,
}

impl HydroBlock {
    pub fn num_vars(plants: usize, periods: usize) -> usize {
        periods * (1 + 4 * plants)
    }

    /// One production row per period and one flow-conservation row per plant and period.
    pub fn num_rows(plants: usize, periods: usize) -> usize {
        periods * (1 + plants)
    }

    pub fn production(&self, t: usize) -> usize {
        self.base + t
    }

    pub fn discharge(&self, h: usize, s: usize, t: usize) -> usize {
        self.base + self.periods * (1 + 4 * h + s) + t
    }

    pub fn spill(&self, h: usize, t: usize) -> usize {
        self.base + self.periods * (3 + 4 * h) + t
    }

    pub fn volume(&self, h: usize, t: usize) -> usize {
        self.base + self.periods * (4 + 4 * h) + t
    }
}

/// Adds production and flow-conservation rows. Discharge is bounded by the
/// segment limits when `bounded_discharge`, otherwise only by extra rows the
/// caller adds. `revenue[t]` is the objective coefficient of `P_t`.
pub(crate) fn add_hydro(
    stage: &mut SecondStage,
    net: &RescaledNetwork,
    inflow: &[Vec<f64>],
    revenue: &[f64],
    initial: Initial<'_>,
    bounded_discharge: bool,
) -> HydroBlock {
    let periods = revenue.len();
    let block = HydroBlock {
        base: stage.cost.len(),
        plants: net.len(),
        periods,
    };
    for &r in revenue {
        stage.add_var(r, 0.0, f64::INFINITY);
    }
    for p in &net.plants {
        for s in 0..2 {
            let ub = if bounded_discharge {
                p.max_discharge[s]
            } else {
                f64::INFINITY
            };
            for _ in 0..periods {
                stage.add_var(0.0, 0.0, ub);
            }
        }
        for _ in 0..periods {
            stage.add_var(0.0, 0.0, f64::INFINITY);
        }
        for _ in 0..periods {
            stage.add_var(0.0, 0.0, p.max_volume);
        }
    }
    for t in 0..periods {
        let mut row = vec![(block.production(t), 1.0)];
        for (h, p) in net.plants.iter().enumerate() {
            for s in 0..2 {
                row.push((block.discharge(h, s, t), -p.mu[s]));
            }
        }
        stage.add_row(vec![], row, RowSense::Eq, 0.0);
    }
    for (h, p) in net.plants.iter().enumerate() {
        for t in 0..periods {
            // M_t - M_{t-1} + Q_1 + Q_2 + S - upstream releases = V
            let mut row = vec![
                (block.volume(h, t), 1.0),
                (block.discharge(h, 0, t), 1.0),
                (block.discharge(h, 1, t), 1.0),
                (block.spill(h, t), 1.0),
            ];
            for &i in &net.upstream[h] {
                let up = &net.plants[i];
                if let Some(tq) = t.checked_sub(up.delay_discharge) {
                    row.push((block.discharge(i, 0, tq), -1.0));
                    row.push((block.discharge(i, 1, tq), -1.0));
                }
                if let Some(ts) = t.checked_sub(up.delay_spill) {
                    row.push((block.spill(i, ts), -1.0));
                }
            }
            let mut rhs = inflow[h][t];
            let mut technology = vec![];
            if t > 0 {
                row.push((block.volume(h, t - 1), -1.0));
            } else {
                match initial {
                    Initial::Fixed => rhs += p.initial_volume,
                    Initial::FirstStage(cols) => technology.push((cols[h], -1.0)),
                }
            }
            stage.add_row(technology, row, RowSense::Eq, rhs);
        }
    }
    block
}

/// Hydro part of a solved second stage.
pub(crate) struct HydroValues {
    pub production: Vec<f64>,
    pub discharge: Vec<[Vec<f64>; 2]>,
    pub spill: Vec<Vec<f64>>,
    pub volume: Vec<Vec<f64>>,
}

impl HydroBlock {
    pub fn values(&self, y: &[f64]) -> HydroValues {
        let range =
            |f: &dyn Fn(usize) -> usize| (0..self.periods).map(|t| y[f(t)]).collect::<Vec<f64>>();
        HydroValues {
            production: range(&|t| self.production(t)),
            discharge: (0..self.plants)
                .map(|h| {
                    [
                        range(&|t| self.discharge(h, 0, t)),
                        range(&|t| self.discharge(h, 1, t)),
                    ]
                })
                .collect(),
            spill: (0..self.plants)
                .map(|h| range(&|t| self.spill(h, t)))
                .collect(),
            volume: (0..self.plants)
                .map(|h| range(&|t| self.volume(h, t)))
                .collect(),
        }
    }
}
