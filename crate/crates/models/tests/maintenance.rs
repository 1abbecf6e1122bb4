use hydrosp::lp::solve_lp;
use hydrosp::lshaped::{self, LShapedConfig};
use hydrosp::sp::{build_deterministic_equivalent, FiniteProgram, ScenarioSampler};
use hydrosp_models::dayahead::{build_day_ahead, Penalties};
use hydrosp_models::hydro::RiverNetwork;
use hydrosp_models::maintenance::{build_maintenance, is_valid_schedule, MaintenanceModel};
use hydrosp_models::scenarios::{price_levels, HourlySampler, SamplerConfig};

fn setup(
    plants: usize,
    hours: usize,
    durations: &[usize],
    scenarios: usize,
    seed: u64,
) -> (MaintenanceModel, FiniteProgram) {
    let net = RiverNetwork::toy().truncated(plants).unwrap();
    let q: Vec<f64> = net.plants().iter().map(|p| p.max_discharge).collect();
    let sampler = HourlySampler::new(SamplerConfig::default(), q, hours).unwrap();
    let prices: Vec<Vec<f64>> = sampler
        .sample(seed + 500, 100)
        .into_iter()
        .map(|s| s.price)
        .collect();
    let levels = price_levels(&prices, 5).unwrap();
    let model = build_maintenance(&net, &levels, durations, &Penalties::default()).unwrap();
    let fp = FiniteProgram::new(model.program.clone(), sampler.sample(seed, scenarios)).unwrap();
    (model, fp)
}

/// All single consecutive runs of `d` hours within `hours`.
fn windows(hours: usize, d: usize) -> Vec<Vec<u8>> {
    if d == 0 {
        return vec![vec![0; hours]];
    }
    (0..=hours - d)
        .map(|start| {
            (0..hours)
                .map(|t| u8::from(t >= start && t < start + d))
                .collect()
        })
        .collect()
}

#[test]
fn optimum_matches_schedule_enumeration() {
    let (model, fp) = setup(2, 6, &[2, 1], 3, 7);
    let de = build_deterministic_equivalent(&fp);
    let mut best = f64::NEG_INFINITY;
    let mut pairs = 0;
    for a in windows(6, 2) {
        for b in windows(6, 1) {
            pairs += 1;
            let mut lp = de.lp.clone();
            for (h, sched) in [&a, &b].iter().enumerate() {
                for t in 0..6 {
                    let j = model.flag(h, t);
                    lp.lower[j] = sched[t] as f64;
                    lp.upper[j] = sched[t] as f64;
                }
            }
            let sol = solve_lp(&lp);
            assert!(sol.is_optimal());
            best = best.max(-sol.objective);
        }
    }
    assert_eq!(pairs, 30);
    let exact = de.solve().unwrap();
    assert!(
        (exact.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
        "{} vs {best}",
        exact.objective
    );
    let ls = lshaped::solve(&fp, &LShapedConfig::default()).unwrap();
    assert!(ls.converged);
    assert!(
        (ls.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
        "{} vs {best}",
        ls.objective
    );
    assert!(is_valid_schedule(&model.schedule(&ls.x), &model.durations));
}

#[test]
fn zero_durations_reduce_to_plain_bidding() {
    let (model, fp) = setup(2, 8, &[0, 0], 3, 13);
    let maint = build_deterministic_equivalent(&fp)
        .solve()
        .unwrap()
        .objective;
    let net = RiverNetwork::toy().truncated(2).unwrap();
    let plain = build_day_ahead(&net, &model.levels, &[], None, &Penalties::default()).unwrap();
    let fp2 = FiniteProgram::new(plain.program.clone(), fp.scenarios.clone()).unwrap();
    let bidding = build_deterministic_equivalent(&fp2)
        .solve()
        .unwrap()
        .objective;
    assert!(
        (maint - bidding).abs() <= 1e-8 * bidding.abs().max(1.0),
        "{maint} vs {bidding}"
    );
}

#[test]
fn maintained_plants_do_not_discharge() {
    let (model, fp) = setup(3, 8, &[3, 2, 1], 2, 17);
    let de = build_deterministic_equivalent(&fp);
    let sol = de.solve().unwrap();
    let schedule = model.schedule(&sol.x);
    assert!(is_valid_schedule(&schedule, &model.durations));
    for s in 0..fp.num_scenarios() {
        let y: Vec<f64> = (0..model.bids.num_recourse())
            .map(|j| sol.solution.x[de.recourse_column(s, j)])
            .collect();
        let sched = model.bids.schedule(&y);
        for h in 0..3 {
            for t in 0..8 {
                if schedule[h][t] == 1 {
                    assert!(
                        sched.discharge[h][0][t].abs() <= 1e-9
                            && sched.discharge[h][1][t].abs() <= 1e-9
                    );
                }
            }
            let imbalance: f64 = (0..8)
                .map(|t| {
                    sched.dispatch[t] - sched.production[t] - sched.shortage[t] + sched.surplus[t]
                })
                .map(f64::abs)
                .fold(0.0, f64::max);
            assert!(imbalance <= 1e-9 * 1e3);
        }
    }
}

#[test]
fn constraints_admit_exactly_the_consecutive_runs() {
    // enumerate all 0/1 flag vectors of one plant and check the first-stage rows
    for d in 1..=4 {
        let (model, _) = setup(1, 5, &[d], 2, 1);
        let fs = model.program.first_stage();
        let windows = windows(5, d);
        for mask in 0u32..32 {
            let flags: Vec<u8> = (0..5).map(|t| ((mask >> t) & 1) as u8).collect();
            let mut x = vec![0.0; model.num_first_stage()];
            for t in 0..5 {
                x[model.flag(0, t)] = flags[t] as f64;
            }
            let feasible = fs.max_violation(&x) <= 1e-12;
            assert_eq!(
                feasible,
                windows.contains(&flags),
                "d = {d}, flags {flags:?}"
            );
        }
    }
}

#[test]
fn durations_longer_than_the_horizon_are_rejected() {
    let net = RiverNetwork::toy().truncated(1).unwrap();
    let levels = price_levels(&[vec![1.0, 2.0], vec![3.0, 1.0]], 3).unwrap();
    assert!(build_maintenance(&net, &levels, &[3], &Penalties::default()).is_err());
}
