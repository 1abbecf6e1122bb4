//! Synthetic seasonal price and inflow scenarios, bid price levels and
//! long-horizon price growth.

use std::f64::consts::PI;

use hydrosp::saa::child_seed;
use hydrosp::sp::{ScenarioSample, ScenarioSampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ModelError;

const DAYS_PER_YEAR: usize = 365;
/// Inflow noise is redrawn once per week on long horizons.
const INFLOW_BLOCK_DAYS: usize = 7;
/// Stream used to derive per-scenario generators from an instance seed.
const SCENARIO_STREAM: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Off-peak price level (Eur/MWh).
    pub price_base: f64,
    /// Height of the morning peak above the base (Eur/MWh); the evening peak is 90% of it.
    pub price_peak: f64,
    /// Relative winter price premium.
    pub price_seasonal_amplitude: f64,
    pub ar_coefficient: f64,
    /// Standard deviation of the hourly price innovation (Eur/MWh).
    pub noise_scale: f64,
    /// Mean local inflow as a fraction of the plant's maximum discharge.
    pub inflow_fraction: f64,
    /// Relative spring-flood inflow increase.
    pub inflow_seasonal_amplitude: f64,
    /// Log-scale standard deviation of inflows.
    pub inflow_sigma: f64,
    /// Day of year (0 = 1 January) of the first sampled day.
    pub start_day: usize,
    /// Upper end of the uniform yearly price growth rate.
    pub rate_cap: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            price_base: 25.0,
            price_peak: 12.0,
            price_seasonal_amplitude: 0.15,
            ar_coefficient: 0.8,
            noise_scale: 2.0,
            inflow_fraction: 0.1,
            inflow_seasonal_amplitude: 0.6,
            inflow_sigma: 0.25,
            start_day: 120,
            rate_cap: 0.04,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(format!("sampler: {m}")));
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return bad("ar_coefficient must lie in [0, 1)");
        }
        if !(self.rate_cap >= 0.0) {
            return bad("rate_cap must be non-negative");
        }
        if !(self.noise_scale >= 0.0) || !(self.inflow_sigma >= 0.0) {
            return bad("noise scales must be non-negative");
        }
        if !(self.price_base >= 0.0) || !(self.price_peak >= 0.0) || !(self.inflow_fraction >= 0.0)
        {
            return bad("price and inflow levels must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.price_seasonal_amplitude)
            || !(0.0..=1.0).contains(&self.inflow_seasonal_amplitude)
        {
            return bad("seasonal amplitudes must lie in [0, 1]");
        }
        if self.start_day >= DAYS_PER_YEAR {
            return bad("start_day must be below 365");
        }
        Ok(())
    }

    fn day_of_year(&self, day: usize) -> f64 {
        ((self.start_day + day) % DAYS_PER_YEAR) as f64
    }

    /// Expected price in hour `hour` (0..24) of sampled day `day`.
    pub fn price_mean(&self, day: usize, hour: usize) -> f64 {
        let h = (hour % 24) as f64;
        let bump = |centre: f64, width: f64| (-(h - centre).powi(2) / (2.0 * width * width)).exp();
        let diurnal = self.price_base + self.price_peak * (bump(8.5, 2.0) + 0.9 * bump(18.5, 2.5));
        let season = 1.0
            + self.price_seasonal_amplitude
                * (2.0 * PI * self.day_of_year(day) / DAYS_PER_YEAR as f64).cos();
        diurnal * season
    }

    /// Expected local inflow (m3/s) of a plant with maximum discharge `max_discharge`.
    pub fn inflow_mean(&self, day: usize, max_discharge: f64) -> f64 {
        // flood peaks around day 150 (early June)
        let phase = 2.0 * PI * (self.day_of_year(day) - 150.0) / DAYS_PER_YEAR as f64;
        self.inflow_fraction * max_discharge * (1.0 + self.inflow_seasonal_amplitude * phase.cos())
    }

    fn stationary_sd(&self) -> f64 {
        self.noise_scale / (1.0 - self.ar_coefficient * self.ar_coefficient).sqrt()
    }

    /// Mean-one log-normal factor.
    fn inflow_factor(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (self.inflow_sigma * z - 0.5 * self.inflow_sigma * self.inflow_sigma).exp()
    }
}

/// Hourly prices from the AR(1) model, continuing from `state`.
fn price_path(
    config: &SamplerConfig,
    first_hour: usize,
    hours: usize,
    state: &mut f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    (first_hour..first_hour + hours)
        .map(|k| {
            let z: f64 = StandardNormal.sample(rng);
            *state = config.ar_coefficient * *state + config.noise_scale * z;
            (config.price_mean(k / 24, k % 24) + *state).max(0.0)
        })
        .collect()
}

fn initial_state(config: &SamplerConfig, rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    // stationary draw, so every hour has the same marginal distribution
    config.stationary_sd() * z
}

/// One hourly scenario over `hours` hours: AR(1) prices around the
/// seasonal mean curve and log-normal inflows constant over the horizon.
fn draw_hourly(
    config: &SamplerConfig,
    max_discharge: &[f64],
    hours: usize,
    rng: &mut ChaCha8Rng,
) -> ScenarioSample {
    let mut state = initial_state(config, rng);
    let price = price_path(config, 0, hours, &mut state, rng);
    let inflow = max_discharge
        .iter()
        .map(|&q| vec![config.inflow_mean(0, q) * config.inflow_factor(rng); hours])
        .collect();
    ScenarioSample {
        probability: 1.0,
        price,
        inflow,
    }
}

fn scenario_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, SCENARIO_STREAM, index as u64))
}

/// A single day-ahead scenario of 24 hours from `config.seed`.
pub fn sample_day_ahead(config: &SamplerConfig, max_discharge: &[f64]) -> ScenarioSample {
    draw_hourly(config, max_discharge, 24, &mut scenario_rng(config.seed, 0))
}

/// Samples hourly scenarios for the day-ahead, maintenance and week-ahead models.
#[derive(Debug, Clone)]
pub struct HourlySampler {
    pub config: SamplerConfig,
    pub max_discharge: Vec<f64>,
    pub hours: usize,
}

impl HourlySampler {
    pub fn new(
        config: SamplerConfig,
        max_discharge: Vec<f64>,
        hours: usize,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if hours == 0 {
            return Err(ModelError::Argument(
                "horizon must have at least one hour".into(),
            ));
        }
        Ok(Self {
            config,
            max_discharge,
            hours,
        })
    }
}

impl ScenarioSampler for HourlySampler {
    fn sample(&self, seed: u64, count: usize) -> Vec<ScenarioSample> {
        (0..count)
            .map(|i| {
                let mut s = draw_hourly(
                    &self.config,
                    &self.max_discharge,
                    self.hours,
                    &mut scenario_rng(seed, i),
                );
                s.probability = 1.0 / count as f64;
                s
            })
            .collect()
    }
}

fn periods_in(horizon_days: usize, hours_per_period: usize) -> Result<usize, ModelError> {
    if horizon_days == 0 {
        return Err(ModelError::Argument(
            "horizon must be at least one day".into(),
        ));
    }
    if hours_per_period == 0 || !(horizon_days * 24).is_multiple_of(hours_per_period) {
        return Err(ModelError::Argument(format!(
            "{} hours per period does not divide a {horizon_days}-day horizon",
            hours_per_period
        )));
    }
    Ok(horizon_days * 24 / hours_per_period)
}

fn period_means(hourly: &[f64], hours_per_period: usize) -> Vec<f64> {
    hourly
        .chunks(hours_per_period)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Long-horizon scenario with a fixed yearly price growth `rate`.
pub(crate) fn capacity_horizon_with_rate(
    config: &SamplerConfig,
    max_discharge: &[f64],
    horizon_days: usize,
    hours_per_period: usize,
    rng: &mut ChaCha8Rng,
    rate: f64,
) -> Result<ScenarioSample, ModelError> {
    periods_in(horizon_days, hours_per_period)?;
    let hours = horizon_days * 24;
    let mut state = initial_state(config, rng);
    let mut price = price_path(config, 0, hours, &mut state, rng);
    for (k, p) in price.iter_mut().enumerate() {
        let years = (k / 24 / DAYS_PER_YEAR) as i32;
        *p *= (1.0 + rate).powi(years);
    }
    let blocks = horizon_days.div_ceil(INFLOW_BLOCK_DAYS);
    let inflow = max_discharge
        .iter()
        .map(|&q| {
            let factors: Vec<f64> = (0..blocks).map(|_| config.inflow_factor(rng)).collect();
            let hourly: Vec<f64> = (0..hours)
                .map(|k| config.inflow_mean(k / 24, q) * factors[k / 24 / INFLOW_BLOCK_DAYS])
                .collect();
            period_means(&hourly, hours_per_period)
        })
        .collect();
    Ok(ScenarioSample {
        probability: 1.0,
        price: period_means(&price, hours_per_period),
        inflow,
    })
}

/// One capacity-expansion scenario: daily curves chained over the horizon,
/// prices growing by a uniformly drawn yearly rate, averaged per period.
pub fn sample_capacity_horizon(
    config: &SamplerConfig,
    max_discharge: &[f64],
    horizon_days: usize,
    hours_per_period: usize,
    seed: u64,
) -> Result<ScenarioSample, ModelError> {
    let mut rng = scenario_rng(seed, 0);
    let rate = config.rate_cap * rng.random::<f64>();
    capacity_horizon_with_rate(
        config,
        max_discharge,
        horizon_days,
        hours_per_period,
        &mut rng,
        rate,
    )
}

#[derive(Debug, Clone)]
pub struct CapacitySampler {
    pub config: SamplerConfig,
    pub max_discharge: Vec<f64>,
    pub horizon_days: usize,
    pub hours_per_period: usize,
}

impl CapacitySampler {
    pub fn new(
        config: SamplerConfig,
        max_discharge: Vec<f64>,
        horizon_days: usize,
        hours_per_period: usize,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        periods_in(horizon_days, hours_per_period)?;
        Ok(Self {
            config,
            max_discharge,
            horizon_days,
            hours_per_period,
        })
    }

    pub fn periods(&self) -> usize {
        self.horizon_days * 24 / self.hours_per_period
    }
}

impl ScenarioSampler for CapacitySampler {
    fn sample(&self, seed: u64, count: usize) -> Vec<ScenarioSample> {
        (0..count)
            .map(|i| {
                let mut rng = scenario_rng(seed, i);
                let rate = self.config.rate_cap * rng.random::<f64>();
                let mut s = capacity_horizon_with_rate(
                    &self.config,
                    &self.max_discharge,
                    self.horizon_days,
                    self.hours_per_period,
                    &mut rng,
                    rate,
                )
                .expect("horizon validated on construction");
                s.probability = 1.0 / count as f64;
                s
            })
            .collect()
    }
}

/// Bid price levels per hour, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLevels {
    /// `levels[t][i]`.
    pub levels: Vec<Vec<f64>>,
    /// Some hour has zero spread, so its levels coincide.
    pub degenerate: bool,
}

impl PriceLevels {
    pub fn hours(&self) -> usize {
        self.levels.len()
    }

    pub fn count(&self) -> usize {
        self.levels.first().map_or(0, Vec::len)
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.levels[t]
    }
}

/// Levels `mean + k sd` for `k` in `-(count-1)/2 ..= (count-1)/2`, per hour,
/// from price curves of equal length.
pub fn price_levels(samples: &[Vec<f64>], count: usize) -> Result<PriceLevels, ModelError> {
    if samples.len() < 2 {
        return Err(ModelError::Argument(
            "price levels need at least two samples".into(),
        ));
    }
    if count.is_multiple_of(2) {
        return Err(ModelError::Argument(format!(
            "level count must be odd, got {count}"
        )));
    }
    let hours = samples[0].len();
    if samples.iter().any(|s| s.len() != hours) {
        return Err(ModelError::Argument(
            "price samples have different lengths".into(),
        ));
    }
    let n = samples.len() as f64;
    let half = (count / 2) as i64;
    let mut degenerate = false;
    let levels = (0..hours)
        .map(|t| {
            let mean = samples.iter().map(|s| s[t]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[t] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if sd == 0.0 {
                degenerate = true;
            }
            (-half..=half).map(|k| mean + k as f64 * sd).collect()
        })
        .collect();
    Ok(PriceLevels { levels, degenerate })
}

/// Consecutive hours `start .. start + len` traded as one block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn hours(self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    pub fn contains(self, t: usize) -> bool {
        self.hours().contains(&t)
    }

    /// Mean of `values` over the block's hours.
    pub fn mean(self, values: &[f64]) -> f64 {
        values[self.hours()].iter().sum::<f64>() / self.len as f64
    }
}

/// Contiguous blocks of `len` hours covering `hours` hours.
pub fn uniform_blocks(hours: usize, len: usize) -> Vec<Block> {
    (0..hours / len.max(1))
        .map(|k| Block {
            start: k * len,
            len,
        })
        .collect()
}

pub(crate) fn check_blocks(blocks: &[Block], hours: usize) -> Result<(), ModelError> {
    for b in blocks {
        if b.len == 0 {
            return Err(ModelError::Argument(format!(
                "block starting at hour {} is empty",
                b.start
            )));
        }
        if b.start + b.len > hours {
            return Err(ModelError::Argument(format!(
                "block {}..{} exceeds the {hours}-hour horizon",
                b.start,
                b.start + b.len
            )));
        }
    }
    Ok(())
}

/// Block levels `block_levels[b][i]`: the mean of level `i` over the block's hours.
pub fn block_price_levels(
    levels: &PriceLevels,
    blocks: &[Block],
) -> Result<Vec<Vec<f64>>, ModelError> {
    check_blocks(blocks, levels.hours())?;
    Ok(blocks
        .iter()
        .map(|b| {
            (0..levels.count())
                .map(|i| b.hours().map(|t| levels.levels[t][i]).sum::<f64>() / b.len as f64)
                .collect()
        })
        .collect())
}
