use hydrosp::lshaped::{self, LShapedConfig};
use hydrosp::sp::{build_deterministic_equivalent, FiniteProgram, ScenarioSampler};
use hydrosp_models::dayahead::{build_day_ahead, DayAheadModel, Penalties};
use hydrosp_models::hydro::{production_segments, RiverNetwork};
use hydrosp_models::scenarios::{
    price_levels, uniform_blocks, HourlySampler, PriceLevels, SamplerConfig,
};

fn levels_for(net: &RiverNetwork, hours: usize, seed: u64) -> PriceLevels {
    let sampler = HourlySampler::new(SamplerConfig::default(), max_discharge(net), hours).unwrap();
    let prices: Vec<Vec<f64>> = sampler
        .sample(seed, 200)
        .into_iter()
        .map(|s| s.price)
        .collect();
    price_levels(&prices, 5).unwrap()
}

fn max_discharge(net: &RiverNetwork) -> Vec<f64> {
    net.plants().iter().map(|p| p.max_discharge).collect()
}

fn toy_instance(
    hours: usize,
    scenarios: usize,
    seed: u64,
) -> (DayAheadModel, FiniteProgram, RiverNetwork) {
    let net = RiverNetwork::toy();
    let levels = levels_for(&net, hours, seed + 1000);
    let model = build_day_ahead(
        &net,
        &levels,
        &uniform_blocks(hours, 4),
        None,
        &Penalties::default(),
    )
    .unwrap();
    let sampler = HourlySampler::new(SamplerConfig::default(), max_discharge(&net), hours).unwrap();
    let fp = FiniteProgram::new(model.program.clone(), sampler.sample(seed, scenarios)).unwrap();
    (model, fp, net)
}

#[test]
fn default_first_stage_has_174_columns() {
    let net = RiverNetwork::skelleftealven();
    let levels = levels_for(&net, 24, 3);
    let model = build_day_ahead(
        &net,
        &levels,
        &uniform_blocks(24, 4),
        None,
        &Penalties::default(),
    )
    .unwrap();
    assert_eq!(model.program.num_first_stage(), 24 + 5 * 24 + 5 * 6);
    assert_eq!(model.program.num_first_stage(), 174);
}

#[test]
fn deterministic_equivalent_size_matches_count_formula() {
    let (model, fp, net) = toy_instance(24, 5, 11);
    let de = build_deterministic_equivalent(&fp);
    let (t, p, b, h, n) = (24, 5, 6, net.len(), 5);
    let first = t + p * t + p * b;
    let first_rows = (p - 1) * t + t;
    // y, y_b, y+, y-, production, two discharge segments, spill, volume
    let recourse = t + b + 2 * t + t + h * t * 4;
    let recourse_rows = t + b + t + t + h * t;
    assert_eq!(de.lp.num_vars(), first + n * recourse);
    assert_eq!(de.lp.num_rows(), first_rows + n * recourse_rows);
    assert_eq!(model.layout.num_recourse(), recourse);
    assert_eq!(model.layout.num_recourse_rows(), recourse_rows);
}

#[test]
fn no_water_means_no_profit() {
    let mut net = RiverNetwork::toy().truncated(1).unwrap();
    net.set_initial_volume(vec![0.0]).unwrap();
    let levels = levels_for(&net, 24, 5);
    let model = build_day_ahead(
        &net,
        &levels,
        &uniform_blocks(24, 4),
        None,
        &Penalties::default(),
    )
    .unwrap();
    let config = SamplerConfig {
        inflow_fraction: 0.0,
        ..SamplerConfig::default()
    };
    let sampler = HourlySampler::new(config, max_discharge(&net), 24).unwrap();
    let fp = FiniteProgram::new(model.program.clone(), sampler.sample(9, 1)).unwrap();
    let de = build_deterministic_equivalent(&fp).solve().unwrap();
    assert!(de.objective.abs() < 1e-6, "{}", de.objective);
    assert!(de.x.iter().all(|v| v.abs() < 1e-6));
    let ls = lshaped::solve(&fp, &LShapedConfig::default()).unwrap();
    assert!(ls.objective.abs() < 1e-6);
}

#[test]
fn decomposition_matches_extensive_form() {
    let (_, fp, _) = toy_instance(24, 5, 21);
    let de = build_deterministic_equivalent(&fp).solve().unwrap();
    let ls = lshaped::solve(&fp, &LShapedConfig::default()).unwrap();
    assert!(ls.converged);
    assert!(
        (ls.objective - de.objective).abs() <= 1e-6 * de.objective.abs().max(1.0),
        "{} vs {}",
        ls.objective,
        de.objective
    );
    assert!(
        (fp.evaluate_decision(&ls.x).unwrap() - ls.objective).abs() <= 1e-6 * ls.objective.abs()
    );
}

#[test]
fn solutions_satisfy_physics_and_bid_rules() {
    let (model, fp, net) = toy_instance(24, 4, 31);
    let de_model = build_deterministic_equivalent(&fp);
    let de = de_model.solve().unwrap();
    let strategy = model.layout.strategy(&de.x);
    assert!(strategy.max_violation(model.offer_cap, &model.block_hours()) <= 1e-9);
    let seg: Vec<_> = net
        .plants()
        .iter()
        .map(|p| production_segments(p).unwrap())
        .collect();
    for (s, sc) in fp.scenarios.iter().enumerate() {
        let y: Vec<f64> = (0..model.layout.num_recourse())
            .map(|j| de.solution.x[de_model.recourse_column(s, j)])
            .collect();
        let sched = model.layout.schedule(&y);
        for t in 0..24 {
            let produced: f64 = (0..net.len())
                .map(|h| {
                    seg[h].mu[0] * sched.discharge[h][0][t]
                        + seg[h].mu[1] * sched.discharge[h][1][t]
                })
                .sum();
            assert!((produced - sched.production[t]).abs() <= 1e-9 * produced.abs().max(1.0));
            let blocks: f64 = model
                .blocks
                .iter()
                .enumerate()
                .filter(|(_, b)| b.contains(t))
                .map(|(b, _)| sched.block_dispatch[b])
                .sum();
            let imbalance = sched.dispatch[t] + blocks
                - sched.production[t]
                - (sched.shortage[t] - sched.surplus[t]);
            assert!(
                imbalance.abs() <= 1e-9 * sched.production[t].abs().max(1.0),
                "load balance {imbalance}"
            );
            let expected = hydrosp_models::dispatch::hourly_dispatch(
                sc.price[t],
                model.levels.at(t),
                strategy.independent[t],
                &strategy.dependent.iter().map(|d| d[t]).collect::<Vec<_>>(),
            )
            .unwrap();
            assert!((expected - sched.dispatch[t]).abs() <= 1e-7 * expected.max(1.0));
        }
        // the toy river is a chain: 1 -> 2 (1 h), 2 -> 3 (2 h)
        let delays = [None, Some((0usize, 1usize)), Some((1, 2))];
        for h in 0..net.len() {
            for t in 0..24 {
                let prev = if t == 0 {
                    net.initial_volume()[h]
                } else {
                    sched.volume[h][t - 1]
                };
                let mut arrivals = 0.0;
                if let Some((up, d)) = delays[h] {
                    if t >= d {
                        arrivals += sched.discharge[up][0][t - d]
                            + sched.discharge[up][1][t - d]
                            + sched.spill[up][t - d];
                    }
                }
                let out = sched.discharge[h][0][t] + sched.discharge[h][1][t] + sched.spill[h][t];
                let residual = sched.volume[h][t] - prev - sc.inflow[h][t] - arrivals + out;
                assert!(
                    residual.abs() <= 1e-8,
                    "mass balance {residual} at plant {h} hour {t}"
                );
            }
        }
    }
}
