use hydrosp::sp::ScenarioSampler;
use hydrosp_models::dispatch::{accepted_block_volume, block_dispatch, hourly_dispatch};
use hydrosp_models::hydro::{load_river, production_segments, Resolution, RiverNetwork};
use hydrosp_models::scenarios::{
    block_price_levels, price_levels, sample_capacity_horizon, sample_day_ahead, Block,
    CapacitySampler, HourlySampler, SamplerConfig,
};
use hydrosp_models::ModelError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name, capacity (MW), discharge (m3/s), reservoir (HE), flow times (min), maintenance (h).
type PlantRow = (&'static str, f64, f64, f64, Option<(f64, f64)>, usize);

const PLANTS: [PlantRow; 15] = [
    ("Rebnis", 64.0, 80.0, 205560.0, Some((2880.0, 2880.0)), 8),
    ("Sadva", 31.0, 70.0, 168000.0, Some((2880.0, 2880.0)), 6),
    ("Bergnas", 8.0, 160.0, 425280.0, Some((60.0, 60.0)), 8),
    ("Slagnas", 7.0, 160.0, 768.0, Some((240.0, 240.0)), 8),
    ("Bastusel", 100.0, 170.0, 8208.0, Some((60.0, 150.0)), 4),
    ("Grytfors", 31.0, 165.0, 1248.0, Some((15.0, 15.0)), 4),
    ("Gallejaur", 214.0, 310.0, 3600.0, Some((30.0, 150.0)), 3),
    ("Vargfors", 131.0, 320.0, 4008.0, Some((180.0, 180.0)), 3),
    ("Rengard", 36.0, 220.0, 1400.0, Some((180.0, 180.0)), 2),
    ("Batfors", 42.0, 280.0, 1330.0, Some((180.0, 180.0)), 2),
    ("Finnfors", 54.0, 300.0, 300.0, Some((180.0, 180.0)), 2),
    ("Granfors", 40.0, 240.0, 280.0, Some((180.0, 180.0)), 2),
    ("Krangfors", 62.0, 240.0, 330.0, Some((180.0, 180.0)), 2),
    ("Selsfors", 61.0, 300.0, 500.0, Some((180.0, 180.0)), 1),
    ("Kvistforsen", 130.0, 300.0, 1120.0, None, 1),
];

const HEADER: &str = "plant_id,name,capacity_mw,max_discharge_m3s,max_volume_he,downstream_id,flow_time_discharge_min,flow_time_spill_min,maintenance_hours\n";

#[test]
fn shipped_river_reproduces_the_plant_table() {
    let net = RiverNetwork::skelleftealven();
    assert_eq!(net.len(), 15);
    for (p, row) in net.plants().iter().zip(PLANTS) {
        assert_eq!(p.name, row.0);
        assert_eq!(
            (p.capacity, p.max_discharge, p.max_volume),
            (row.1, row.2, row.3)
        );
        assert_eq!(p.flow_time_discharge.zip(p.flow_time_spill), row.4);
        assert_eq!(p.maintenance_hours, row.5);
    }
    assert_eq!(net.downstream(14), None);
    assert_eq!(net.upstream(2), &[0, 1]);
    // upstream sets invert the downstream map
    for h in 0..15 {
        for &u in net.upstream(h) {
            assert_eq!(net.downstream(u), Some(h));
        }
        if let Some(d) = net.downstream(h) {
            assert!(net.upstream(d).contains(&h));
        }
    }
}

#[test]
fn full_discharge_produces_installed_capacity() {
    for p in RiverNetwork::skelleftealven().plants() {
        let s = production_segments(p).unwrap();
        let full = s.mu[0] * s.max_discharge[0] + s.mu[1] * s.max_discharge[1];
        assert!(
            (full - p.capacity).abs() <= 1e-12 * p.capacity,
            "{}",
            p.name
        );
    }
    let net = RiverNetwork::skelleftealven();
    let gallejaur = production_segments(&net.plants()[6]).unwrap();
    assert!((gallejaur.mu[0] - 214.0 / (310.0 * 0.9875)).abs() < 1e-15);
    // direct evaluation gives 0.6990608; the often quoted 0.699056 is a slip in the last digits
    assert!((gallejaur.mu[0] - 0.6990608).abs() < 1e-7);
    assert_eq!(gallejaur.max_discharge, [232.5, 77.5]);
    let rebnis = production_segments(&net.plants()[0]).unwrap();
    assert!((rebnis.mu[0] - 64.0 / 79.0).abs() < 1e-15);
}

#[test]
fn rescaling_converts_volumes_equivalents_and_delays() {
    let net = RiverNetwork::skelleftealven();
    let hourly = net.rescale(Resolution::HOURLY).unwrap();
    for (v, p) in hourly.plants.iter().zip(net.plants()) {
        assert_eq!(v.max_volume, p.max_volume);
        // half-hour flow times round toward zero
        assert_eq!(
            v.delay_discharge as f64,
            (p.flow_time_discharge.unwrap_or(0.0) / 60.0 - 0.5).ceil()
        );
    }
    for hours in [24, 120] {
        let r = net.rescale(Resolution::new(hours).unwrap()).unwrap();
        for (v, p) in r.plants.iter().zip(net.plants()) {
            let seg = production_segments(p).unwrap();
            assert!((r.to_he(v.max_volume) - p.max_volume).abs() <= 1e-9 * p.max_volume);
            assert!((v.mu[0] / hours as f64 - seg.mu[0]).abs() <= 1e-15);
        }
    }
    let daily = net.rescale(Resolution::new(24).unwrap()).unwrap();
    assert_eq!(daily.plants[2].max_volume, 17720.0);
    assert_eq!(daily.plants[2].delay_discharge, 0);
    assert!(Resolution::new(0).is_err());
}

#[test]
fn river_file_errors_name_the_problem() {
    let single = format!("{HEADER}1,Solo,10,20,30,,,,1\n");
    let net = load_river(single.as_bytes()).unwrap();
    assert!(net.upstream(0).is_empty());

    let unknown = format!("{HEADER}1,A,10,20,30,9,60,60,1\n");
    match load_river(unknown.as_bytes()) {
        Err(ModelError::Parse { line: 2, message }) => assert!(message.contains('9'), "{message}"),
        other => panic!("{other:?}"),
    }
    let negative = format!("{HEADER}1,A,10,20,30,,,,1\n2,B,10,-5,30,,,,1\n");
    match load_river(negative.as_bytes()) {
        Err(ModelError::Parse { line: 3, message }) => {
            assert!(message.contains("max_discharge"), "{message}")
        }
        other => panic!("{other:?}"),
    }
}

fn plants() -> Vec<f64> {
    vec![80.0, 170.0]
}

#[test]
fn noiseless_sampler_returns_the_mean_curve() {
    let config = SamplerConfig {
        noise_scale: 0.0,
        ..SamplerConfig::default()
    };
    let s = sample_day_ahead(&config, &plants());
    for t in 0..24 {
        assert_eq!(s.price[t], config.price_mean(0, t));
    }
    assert_eq!(s, sample_day_ahead(&config, &plants()));
    let sampler = HourlySampler::new(SamplerConfig::default(), plants(), 24).unwrap();
    assert_eq!(sampler.sample(5, 3), sampler.sample(5, 3));
    assert_ne!(sampler.sample(5, 3), sampler.sample(6, 3));
}

#[test]
fn hourly_means_match_the_configured_curve() {
    let config = SamplerConfig::default();
    let sampler = HourlySampler::new(config.clone(), plants(), 24).unwrap();
    let samples = sampler.sample(9, 1000);
    for t in 0..24 {
        let values: Vec<f64> = samples.iter().map(|s| s.price[t]).collect();
        let (mean, sd) = hydrosp::saa::mean_and_std(&values);
        let se = sd / (values.len() as f64).sqrt();
        assert!(
            (mean - config.price_mean(0, t)).abs() <= 3.0 * se,
            "hour {t}: {mean}"
        );
        assert!(values.iter().all(|&p| p >= 0.0));
    }
    let inflows: Vec<f64> = samples.iter().map(|s| s.inflow[1][0]).collect();
    let (mean, sd) = hydrosp::saa::mean_and_std(&inflows);
    assert!((mean - config.inflow_mean(0, 170.0)).abs() <= 3.0 * sd / (1000f64).sqrt());
}

#[test]
fn capacity_horizon_has_the_requested_periods() {
    let config = SamplerConfig::default();
    let s = sample_capacity_horizon(&config, &plants(), 365, 120, 3).unwrap();
    assert_eq!(s.price.len(), 365 * 24 / 120);
    assert_eq!(s.inflow[0].len(), 73);
    let flat = SamplerConfig {
        price_peak: 0.0,
        price_seasonal_amplitude: 0.0,
        noise_scale: 0.0,
        rate_cap: 0.0,
        ..config
    };
    let s = sample_capacity_horizon(&flat, &plants(), 10, 24, 3).unwrap();
    assert!(s.price.iter().all(|&p| p == flat.price_base));
    let no_growth = CapacitySampler::new(
        SamplerConfig {
            rate_cap: 0.0,
            noise_scale: 0.0,
            ..SamplerConfig::default()
        },
        plants(),
        730,
        24,
    )
    .unwrap();
    let s = &no_growth.sample(1, 1)[0];
    let (y1, y2): (f64, f64) = (s.price[..365].iter().sum(), s.price[365..].iter().sum());
    assert!((y1 - y2).abs() <= 1e-9 * y1);
}

#[test]
fn price_levels_follow_mean_and_spread() {
    let levels = price_levels(&[vec![10.0], vec![30.0]], 5).unwrap();
    let sd = 200f64.sqrt();
    let expected = [20.0 - 2.0 * sd, 20.0 - sd, 20.0, 20.0 + sd, 20.0 + 2.0 * sd];
    for (a, b) in levels.at(0).iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((levels.at(0)[0] + 8.2843).abs() < 1e-4 && (levels.at(0)[4] - 48.2843).abs() < 1e-4);
    assert!(!levels.degenerate);
    let constant = price_levels(&[vec![7.0, 7.0], vec![7.0, 7.0], vec![7.0, 7.0]], 5).unwrap();
    assert!(constant.degenerate);
    assert!(constant.levels.iter().flatten().all(|&p| p == 7.0));
    assert!(price_levels(&[vec![1.0]], 5).is_err());
    assert!(price_levels(&[vec![1.0], vec![2.0]], 4).is_err());

    let sampler = HourlySampler::new(SamplerConfig::default(), plants(), 24).unwrap();
    let prices: Vec<Vec<f64>> = sampler.sample(2, 50).into_iter().map(|s| s.price).collect();
    let levels = price_levels(&prices, 5).unwrap();
    assert!(levels
        .levels
        .iter()
        .all(|l| l.windows(2).all(|w| w[0] < w[1])));

    let single = block_price_levels(&levels, &[Block { start: 3, len: 1 }]).unwrap();
    assert_eq!(single[0], levels.at(3));
    let day = block_price_levels(&levels, &[Block { start: 0, len: 24 }]).unwrap();
    for i in 0..5 {
        let mean = (0..24).map(|t| levels.at(t)[i]).sum::<f64>() / 24.0;
        assert!((day[0][i] - mean).abs() < 1e-12);
    }
    let two = price_levels(&[vec![20.0, 30.0], vec![20.0, 30.0]], 5).unwrap();
    assert_eq!(
        block_price_levels(&two, &[Block { start: 0, len: 2 }]).unwrap()[0][2],
        25.0
    );
    assert!(block_price_levels(&levels, &[Block { start: 0, len: 0 }]).is_err());
}

#[test]
fn trading_outcome_of_the_example_bid_curve() {
    let levels = [26.39458610153198, 29.14509907050426];
    let volumes = [636.7057290307187, 680.0388233393326];
    let y = hourly_dispatch(28.0, &levels, 0.0, &volumes).unwrap();
    assert!((y - 661.998).abs() < 1e-2, "{y}");
    let mid = hourly_dispatch((levels[0] + levels[1]) / 2.0, &levels, 3.0, &volumes).unwrap();
    assert!((mid - 3.0 - (volumes[0] + volumes[1]) / 2.0).abs() < 1e-9);
}

#[test]
fn block_dispatch_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let mut levels: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..40.0)).collect();
        levels.sort_by(f64::total_cmp);
        let volumes: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
        let rho = rng.random_range(5.0..45.0);
        // the accepted set is the unique subset with every member at or below the price and every other level above it
        let mut oracle = None;
        for mask in 0u32..(1 << n) {
            let consistent = (0..n).all(|i| ((mask >> i) & 1 == 1) == (levels[i] <= rho));
            if consistent {
                assert!(oracle.is_none());
                oracle = Some(
                    (0..n)
                        .filter(|i| (mask >> i) & 1 == 1)
                        .map(|i| volumes[i])
                        .sum::<f64>(),
                );
            }
        }
        assert_eq!(
            accepted_block_volume(rho, &levels, &volumes),
            oracle.unwrap()
        );
    }
    let prices = vec![20.0, 30.0, 40.0, 50.0];
    let blocks = [Block { start: 0, len: 2 }, Block { start: 2, len: 2 }];
    let block_levels = vec![vec![20.0, 25.0, 30.0], vec![20.0, 25.0, 30.0]];
    let volumes = vec![vec![5.0, 5.0], vec![7.0, 7.0], vec![11.0, 11.0]];
    assert_eq!(
        block_dispatch(&prices, &blocks, &block_levels, &volumes),
        vec![12.0, 23.0]
    );
}
