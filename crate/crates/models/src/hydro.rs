//! River-system data, topology, production curves and time resolution.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Discharge share of the first (efficient) turbine segment.
pub const FIRST_SEGMENT_SHARE: f64 = 0.75;
/// Efficiency of the second segment relative to the first.
pub const SECOND_SEGMENT_EFFICIENCY: f64 = 0.95;
/// Initial reservoir fill used when none is configured.
pub const DEFAULT_INITIAL_FILL: f64 = 0.5;

/// The Skellefteälven river system shipped with the crate.
pub const SKELLEFTEALVEN_CSV: &str = include_str!("../data/skelleftealven.csv");
/// A three-plant chain for fast experiments and tests.
pub const TOY_RIVER_CSV: &str = include_str!("../data/toy_river.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantData {
    pub id: String,
    pub name: String,
    /// Installed capacity (MW).
    pub capacity: f64,
    /// Maximum discharge (m3/s).
    pub max_discharge: f64,
    /// Maximum reservoir content (HE).
    pub max_volume: f64,
    /// Travel time of discharged water to the downstream plant (minutes).
    pub flow_time_discharge: Option<f64>,
    /// Travel time of spilled water to the downstream plant (minutes).
    pub flow_time_spill: Option<f64>,
    /// Preventive maintenance duration (hours).
    pub maintenance_hours: usize,
}

/// Marginal production equivalents and discharge limits of the two turbine segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segments {
    /// MW per m3/s.
    pub mu: [f64; 2],
    /// m3/s.
    pub max_discharge: [f64; 2],
}

/// Splits the generation curve into two linear segments so that full
/// discharge produces exactly the installed capacity.
pub fn production_segments(plant: &PlantData) -> Result<Segments, ModelError> {
    if !(plant.max_discharge > 0.0) || !(plant.capacity > 0.0) {
        return Err(ModelError::Argument(format!(
            "plant {} needs positive capacity and discharge",
            plant.name
        )));
    }
    let share2 = 1.0 - FIRST_SEGMENT_SHARE;
    let mu1 = plant.capacity
        / (plant.max_discharge * (FIRST_SEGMENT_SHARE + SECOND_SEGMENT_EFFICIENCY * share2));
    Ok(Segments {
        mu: [mu1, SECOND_SEGMENT_EFFICIENCY * mu1],
        max_discharge: [
            FIRST_SEGMENT_SHARE * plant.max_discharge,
            share2 * plant.max_discharge,
        ],
    })
}

/// Plants connected by downstream edges. Discharge and spillage of a plant
/// both reach its downstream neighbour, so the two upstream sets coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct RiverNetwork {
    plants: Vec<PlantData>,
    downstream: Vec<Option<usize>>,
    upstream: Vec<Vec<usize>>,
    initial_volume: Vec<f64>,
}

impl RiverNetwork {
    /// Validates parameters and topology. `downstream[h]` indexes `plants`.
    pub fn new(plants: Vec<PlantData>, downstream: Vec<Option<usize>>) -> Result<Self, ModelError> {
        if plants.is_empty() {
            return Err(ModelError::Argument("river has no plants".into()));
        }
        if downstream.len() != plants.len() {
            return Err(ModelError::Argument(
                "downstream list length differs from plant count".into(),
            ));
        }
        for (h, p) in plants.iter().enumerate() {
            check_plant(p).map_err(ModelError::Argument)?;
            match downstream[h] {
                Some(d) if d >= plants.len() => {
                    return Err(ModelError::Argument(format!(
                        "plant {} flows into unknown index {d}",
                        p.name
                    )))
                }
                Some(_) if p.flow_time_discharge.is_none() || p.flow_time_spill.is_none() => {
                    return Err(ModelError::Argument(format!(
                        "plant {} has a downstream plant but no flow time",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        if let Some(h) = find_cycle(&downstream) {
            return Err(ModelError::Argument(format!(
                "cycle through plant {}",
                plants[h].name
            )));
        }
        let mut upstream = vec![Vec::new(); plants.len()];
        for (h, d) in downstream.iter().enumerate() {
            if let Some(d) = *d {
                upstream[d].push(h);
            }
        }
        let initial_volume = plants
            .iter()
            .map(|p| DEFAULT_INITIAL_FILL * p.max_volume)
            .collect();
        Ok(Self {
            plants,
            downstream,
            upstream,
            initial_volume,
        })
    }

    pub fn skelleftealven() -> Self {
        load_river(SKELLEFTEALVEN_CSV.as_bytes()).expect("shipped river file is valid")
    }

    pub fn toy() -> Self {
        load_river(TOY_RIVER_CSV.as_bytes()).expect("shipped river file is valid")
    }

    pub fn plants(&self) -> &[PlantData] {
        &self.plants
    }

    pub fn len(&self) -> usize {
        self.plants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plants.is_empty()
    }

    pub fn downstream(&self, h: usize) -> Option<usize> {
        self.downstream[h]
    }

    /// Plants whose discharge and spillage reach `h`.
    pub fn upstream(&self, h: usize) -> &[usize] {
        &self.upstream[h]
    }

    /// Initial reservoir contents (HE).
    pub fn initial_volume(&self) -> &[f64] {
        &self.initial_volume
    }

    pub fn set_initial_volume(&mut self, volumes: Vec<f64>) -> Result<(), ModelError> {
        if volumes.len() != self.plants.len() {
            return Err(ModelError::Argument(format!(
                "{} initial volumes for {} plants",
                volumes.len(),
                self.plants.len()
            )));
        }
        for (v, p) in volumes.iter().zip(&self.plants) {
            if !(*v >= 0.0 && *v <= p.max_volume) {
                return Err(ModelError::Argument(format!(
                    "initial volume {v} of {} outside [0, {}]",
                    p.name, p.max_volume
                )));
            }
        }
        self.initial_volume = volumes;
        Ok(())
    }

    /// Sum of installed capacities (MW).
    pub fn total_capacity(&self) -> f64 {
        self.plants.iter().map(|p| p.capacity).sum()
    }

    /// The sub-river made of the first `count` plants in file order; edges
    /// leaving the subset are dropped.
    pub fn truncated(&self, count: usize) -> Result<Self, ModelError> {
        if count == 0 || count > self.len() {
            return Err(ModelError::Argument(format!(
                "cannot keep {count} of {} plants",
                self.len()
            )));
        }
        let downstream = self.downstream[..count]
            .iter()
            .map(|d| d.filter(|&d| d < count))
            .collect();
        let mut net = Self::new(self.plants[..count].to_vec(), downstream)?;
        net.initial_volume = self.initial_volume[..count].to_vec();
        Ok(net)
    }

    /// Rescaled view at `resolution`.
    pub fn rescale(&self, resolution: Resolution) -> Result<RescaledNetwork, ModelError> {
        let hours = resolution.hours_per_period() as f64;
        let plants = self
            .plants
            .iter()
            .zip(&self.initial_volume)
            .map(|(p, &m0)| {
                let seg = production_segments(p)?;
                Ok(PlantView {
                    mu: [seg.mu[0] * hours, seg.mu[1] * hours],
                    max_discharge: seg.max_discharge,
                    max_volume: p.max_volume / hours,
                    initial_volume: m0 / hours,
                    delay_discharge: resolution
                        .periods_for_minutes(p.flow_time_discharge.unwrap_or(0.0)),
                    delay_spill: resolution.periods_for_minutes(p.flow_time_spill.unwrap_or(0.0)),
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(RescaledNetwork {
            resolution,
            plants,
            upstream: self.upstream.clone(),
        })
    }
}

fn check_plant(p: &PlantData) -> Result<(), String> {
    let fields = [
        ("capacity_mw", Some(p.capacity)),
        ("max_discharge_m3s", Some(p.max_discharge)),
        ("max_volume_he", Some(p.max_volume)),
        ("flow_time_discharge_min", p.flow_time_discharge),
        ("flow_time_spill_min", p.flow_time_spill),
    ];
    for (name, v) in fields {
        if let Some(v) = v {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!(
                    "{name} of plant {} must be a non-negative number, got {v}",
                    p.name
                ));
            }
        }
    }
    if p.maintenance_hours > 24 {
        return Err(format!("maintenance of plant {} exceeds 24 hours", p.name));
    }
    Ok(())
}

/// Returns a plant on a cycle of the downstream map, if any.
fn find_cycle(downstream: &[Option<usize>]) -> Option<usize> {
    for start in 0..downstream.len() {
        let mut h = start;
        for _ in 0..downstream.len() {
            match downstream[h] {
                Some(d) => h = d,
                None => break,
            }
            if h == start {
                return Some(start);
            }
        }
    }
    None
}

/// Reads a river CSV; errors carry the offending line number.
pub fn load_river<R: Read>(input: R) -> Result<RiverNetwork, ModelError> {
    const COLUMNS: [&str; 9] = [
        "plant_id",
        "name",
        "capacity_mw",
        "max_discharge_m3s",
        "max_volume_he",
        "downstream_id",
        "flow_time_discharge_min",
        "flow_time_spill_min",
        "maintenance_hours",
    ];
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
    let mut col = [0usize; 9];
    for (k, name) in COLUMNS.iter().enumerate() {
        col[k] = header
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| ModelError::Parse {
                line: 1,
                message: format!("missing column {name}"),
            })?;
    }
    let mut plants = Vec::new();
    let mut downstream_ids = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ModelError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| ModelError::Parse { line, message };
        let field = |k: usize| rec.get(col[k]).unwrap_or("");
        let number = |k: usize| -> Result<f64, ModelError> {
            field(k)
                .parse::<f64>()
                .map_err(|_| err(format!("{} is not a number: {:?}", COLUMNS[k], field(k))))
        };
        let optional = |k: usize| -> Result<Option<f64>, ModelError> {
            match field(k) {
                "" | "-" => Ok(None),
                _ => number(k).map(Some),
            }
        };
        let maintenance = field(8).parse::<usize>().map_err(|_| {
            err(format!(
                "maintenance_hours is not a non-negative integer: {:?}",
                field(8)
            ))
        })?;
        let plant = PlantData {
            id: field(0).to_string(),
            name: field(1).to_string(),
            capacity: number(2)?,
            max_discharge: number(3)?,
            max_volume: number(4)?,
            flow_time_discharge: optional(6)?,
            flow_time_spill: optional(7)?,
            maintenance_hours: maintenance,
        };
        if plant.id.is_empty() {
            return Err(err("empty plant_id".into()));
        }
        if plants.iter().any(|p: &PlantData| p.id == plant.id) {
            return Err(err(format!("duplicate plant_id {}", plant.id)));
        }
        check_plant(&plant).map_err(err)?;
        let down = match field(5) {
            "" | "-" => None,
            d => Some(d.to_string()),
        };
        if down.is_some()
            && (plant.flow_time_discharge.is_none() || plant.flow_time_spill.is_none())
        {
            return Err(err(format!(
                "plant {} has a downstream plant but no flow time",
                plant.id
            )));
        }
        plants.push(plant);
        downstream_ids.push(down);
        lines.push(line);
    }
    let mut downstream = Vec::with_capacity(plants.len());
    for (h, d) in downstream_ids.iter().enumerate() {
        downstream.push(match d {
            None => None,
            Some(id) => {
                Some(
                    plants
                        .iter()
                        .position(|p| &p.id == id)
                        .ok_or_else(|| ModelError::Parse {
                            line: lines[h],
                            message: format!("downstream plant {id} is not defined"),
                        })?,
                )
            }
        });
    }
    if let Some(h) = find_cycle(&downstream) {
        return Err(ModelError::Parse {
            line: lines[h],
            message: format!("cycle detected through plant {}", plants[h].id),
        });
    }
    if plants.is_empty() {
        return Err(ModelError::Parse {
            line: 1,
            message: "river file has no plants".into(),
        });
    }
    RiverNetwork::new(plants, downstream)
}

pub fn load_river_file(path: &Path) -> Result<RiverNetwork, ModelError> {
    let file = std::fs::File::open(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_river(file)
}

/// Length of a model period in hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution(usize);

impl Resolution {
    pub const HOURLY: Resolution = Resolution(1);

    pub fn new(hours_per_period: usize) -> Result<Self, ModelError> {
        if hours_per_period == 0 {
            return Err(ModelError::Argument(
                "hours per period must be at least 1".into(),
            ));
        }
        Ok(Self(hours_per_period))
    }

    pub fn hours_per_period(self) -> usize {
        self.0
    }

    /// Whole periods closest to `minutes`, rounding ties toward zero.
    pub fn periods_for_minutes(self, minutes: f64) -> usize {
        let exact = minutes / (60.0 * self.0 as f64);
        let lower = exact.floor();
        if exact - lower > 0.5 {
            lower as usize + 1
        } else {
            lower as usize
        }
    }
}

/// Plant parameters expressed per model period.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantView {
    /// MWh per period per m3/s of discharge.
    pub mu: [f64; 2],
    /// m3/s.
    pub max_discharge: [f64; 2],
    /// Reservoir limit in period equivalents (HE / hours per period).
    pub max_volume: f64,
    pub initial_volume: f64,
    /// Travel time to the downstream plant in periods.
    pub delay_discharge: usize,
    pub delay_spill: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescaledNetwork {
    pub resolution: Resolution,
    pub plants: Vec<PlantView>,
    pub upstream: Vec<Vec<usize>>,
}

impl RescaledNetwork {
    pub fn len(&self) -> usize {
        self.plants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plants.is_empty()
    }

    /// Converts a volume in period equivalents back to HE.
    pub fn to_he(&self, volume: f64) -> f64 {
        volume * self.resolution.hours_per_period() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(capacity: f64, discharge: f64) -> PlantData {
        PlantData {
            id: "x".into(),
            name: "x".into(),
            capacity,
            max_discharge: discharge,
            max_volume: 100.0,
            flow_time_discharge: None,
            flow_time_spill: None,
            maintenance_hours: 1,
        }
    }

    #[test]
    fn normalized_plant_has_unit_equivalent() {
        let s = production_segments(&plant(0.9875, 1.0)).unwrap();
        assert_eq!(s.mu[0], 1.0);
        assert!(production_segments(&plant(10.0, 0.0)).is_err());
    }

    #[test]
    fn rounding_ties_go_toward_zero() {
        let r = Resolution::new(1).unwrap();
        assert_eq!(r.periods_for_minutes(30.0), 0);
        assert_eq!(r.periods_for_minutes(31.0), 1);
        assert_eq!(r.periods_for_minutes(90.0), 1);
        assert_eq!(r.periods_for_minutes(150.0), 2);
        assert_eq!(r.periods_for_minutes(2880.0), 48);
        let day = Resolution::new(24).unwrap();
        assert_eq!(day.periods_for_minutes(60.0), 0);
        assert_eq!(day.periods_for_minutes(2880.0), 2);
    }

    #[test]
    fn cycles_are_rejected() {
        let csv = "plant_id,name,capacity_mw,max_discharge_m3s,max_volume_he,downstream_id,flow_time_discharge_min,flow_time_spill_min,maintenance_hours\n\
                   a,A,1,1,1,b,60,60,1\n\
                   b,B,1,1,1,a,60,60,1\n";
        match load_river(csv.as_bytes()) {
            Err(ModelError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("cycle"));
            }
            other => panic!("{other:?}"),
        }
    }
}
