use std::path::Path;
use std::process::{Command, Output};

use hydrosp::lshaped;
use hydrosp::sp::{build_deterministic_equivalent, FiniteProgram, ScenarioSampler};
use hydrosp_cli::commands::{bid_levels, load_network, Experiment};
use hydrosp_cli::ExperimentConfig;
use hydrosp_models::dayahead::build_day_ahead;
use hydrosp_models::scenarios::{uniform_blocks, HourlySampler};
use hydrosp_models::water_value::{compute_water_value, WaterValueCuts};
use serde_json::Value;

fn hydrosp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrosp"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs a command that must succeed and returns its JSON summary.
fn run_ok(args: &[&str]) -> Value {
    let out = hydrosp(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

/// Runs a command that must fail and returns its exit code and error object.
fn run_err(args: &[&str]) -> (i32, Value) {
    let out = hydrosp(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err: Value = serde_json::from_slice(&out.stderr).expect("error is JSON");
    (out.status.code().unwrap(), err["error"].clone())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn config(overrides: &[&str]) -> ExperimentConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(None, &o).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

const TOY: [&str; 2] = ["--river", "builtin:toy"];

fn with<'a>(base: &[&'a str], dir: &'a Path, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = base.to_vec();
    v.extend(TOY);
    v.extend(["--output", dir.to_str().unwrap()]);
    v.extend(rest);
    v
}

#[test]
fn solve_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = [
        "solve",
        "--model",
        "day-ahead",
        "--scenarios",
        "5",
        "--seed",
        "7",
    ];
    let sa = run_ok(&with(&args, &a, &[]));
    let sb = run_ok(&with(&args, &b, &[]));
    assert_eq!(sa, sb);
    assert_eq!(sa["converged"], true);
    for name in [
        "objective.json",
        "strategy.csv",
        "iterations.csv",
        "production.csv",
    ] {
        let (x, y) = (
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
        );
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn missing_river_file_is_a_config_error_naming_it() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run_err(&[
        "solve",
        "--river",
        "no/such/river.csv",
        "--output",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert_eq!(err["kind"], "config");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("no/such/river.csv"));
}

#[test]
fn bad_settings_are_config_errors() {
    let (code, err) = run_err(&[
        "solve",
        "--river",
        "builtin:toy",
        "--solver.no_such_key",
        "1",
    ]);
    assert_eq!((code, err["kind"].as_str()), (2, Some("config")));
    let (code, _) = run_err(&["saa", "--river", "builtin:toy", "--saa.alpha", "0.7"]);
    assert_eq!(code, 2);
    let (code, _) = run_err(&["solve", "--nonsense"]);
    assert_eq!(code, 2);
}

#[test]
fn iteration_limit_exits_with_non_convergence() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run_err(&with(
        &["solve", "--scenarios", "3"],
        tmp.path(),
        &["--solver.max_iterations", "1"],
    ));
    assert_eq!(code, 1);
    assert_eq!(err["kind"], "not_converged");
    assert_eq!(err["iterations"], 1);
    assert!(tmp.path().join("iterations.csv").exists());
}

#[test]
fn capacity_year_has_one_period_per_day() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_ok(&with(
        &[
            "solve",
            "--model",
            "capacity",
            "--horizon-days",
            "365",
            "--resolution",
            "24",
            "--scenarios",
            "2",
        ],
        tmp.path(),
        &[],
    ));
    assert_eq!(summary["periods"], 365);
    assert_eq!(
        read_json(&tmp.path().join("objective.json"))["periods"],
        365
    );
    let production = std::fs::read_to_string(tmp.path().join("production.csv")).unwrap();
    // scenarios x plants x periods rows plus the header
    assert_eq!(production.lines().count(), 2 * 3 * 365 + 1);
    let expansion = std::fs::read_to_string(tmp.path().join("expansion.csv")).unwrap();
    assert!(expansion.starts_with("plant_id,name,delta_power_mw,delta_discharge_m3s,cost_eur"));
}

#[test]
fn maintenance_solve_writes_a_valid_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&with(
        &[
            "solve",
            "--model",
            "maintenance",
            "--scenarios",
            "2",
            "--hours",
            "8",
        ],
        tmp.path(),
        &[],
    ));
    let text = std::fs::read_to_string(tmp.path().join("schedule.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("plant_id,hour,maintenance_flag"));
    let mut per_plant = std::collections::BTreeMap::<String, Vec<u8>>::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        per_plant
            .entry(f[0].to_string())
            .or_default()
            .push(f[2].parse().unwrap());
    }
    let durations: Vec<usize> = hydrosp_models::hydro::RiverNetwork::toy()
        .plants()
        .iter()
        .map(|p| p.maintenance_hours)
        .collect();
    assert_eq!(per_plant.len(), durations.len());
    for (flags, &d) in per_plant.values().zip(&durations) {
        assert_eq!(flags.len(), 8);
        let on: Vec<usize> = (0..8).filter(|&t| flags[t] == 1).collect();
        assert_eq!(on.len(), d);
        assert!(on.windows(2).all(|w| w[1] == w[0] + 1));
    }
}

#[test]
fn saa_writes_one_interval_per_sample_size_plus_eev_and_vss() {
    let tmp = tempfile::tempdir().unwrap();
    let summary = run_ok(&with(
        &["saa", "--scenarios", "4", "--hours", "8"],
        tmp.path(),
        &[
            "--saa.schedule",
            "[4, 6, 8]",
            "--saa.m",
            "3",
            "--saa.t",
            "3",
            "--saa.eev_scenarios",
            "30",
        ],
    ));
    let text = std::fs::read_to_string(tmp.path().join("intervals.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "N,lo_eur,hi_eur,kind,estimate_eur,alpha");
    assert_eq!(rows.len() - 1, 3 + 2);
    assert!(rows[4].contains(",eev,") && rows[5].contains(",vss,"));
    assert!(summary["vss"]["significant"].is_boolean());
    assert!(tmp.path().join("strategy.csv").exists());
}

#[test]
fn deterministic_sampler_gives_exact_zero_width_intervals() {
    let tmp = tempfile::tempdir().unwrap();
    let flat = ["sampler.noise_scale=0", "sampler.inflow_sigma=0"];
    let summary = run_ok(&with(
        &["saa", "--scenarios", "3", "--hours", "8"],
        tmp.path(),
        &[
            "--set",
            flat[0],
            "--set",
            flat[1],
            "--saa.schedule",
            "[3]",
            "--saa.m",
            "3",
            "--saa.t",
            "3",
        ]
        .into_iter()
        .chain(["--saa.eev_scenarios", "5"])
        .collect::<Vec<_>>(),
    ));
    // every scenario is the mean scenario, so the exact optimal value is one LP
    let cfg = config(&[
        "river=builtin:toy",
        "hours=8",
        "scenarios=1",
        flat[0],
        flat[1],
    ]);
    let exp = Experiment::build(&cfg).unwrap();
    let exact = build_deterministic_equivalent(&exp.instance(&cfg).unwrap())
        .solve()
        .unwrap()
        .objective;
    for key in ["vrp", "eev"] {
        let r = &summary[key];
        let (lo, hi) = (r["lo"].as_f64().unwrap(), r["hi"].as_f64().unwrap());
        assert!(hi - lo <= 1e-9 * exact.abs(), "{key}: [{lo}, {hi}]");
        assert!(
            rel_close(lo, exact, 1e-8) && rel_close(hi, exact, 1e-8),
            "{key}: [{lo}, {hi}] vs {exact}"
        );
    }
    assert!(summary["vss"]["estimate"].as_f64().unwrap().abs() <= 1e-8 * exact.abs());
    assert_eq!(summary["vss"]["significant"], false);
}

#[test]
fn evaluating_the_solved_strategy_reproduces_its_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let solve_dir = tmp.path().join("solve");
    let solved = run_ok(&with(
        &["solve", "--scenarios", "4", "--seed", "3"],
        &solve_dir,
        &[],
    ));
    let strategy = solve_dir.join("strategy.csv");
    let eval = run_ok(&with(
        &[
            "evaluate",
            "--scenarios",
            "4",
            "--seed",
            "3",
            "--strategy",
            strategy.to_str().unwrap(),
        ],
        &tmp.path().join("eval"),
        &[],
    ));
    let (a, b) = (
        solved["objective_eur"].as_f64().unwrap(),
        eval["mean_profit_eur"].as_f64().unwrap(),
    );
    assert!(rel_close(a, b, 1e-8), "{a} vs {b}");
    assert_eq!(read_json(&tmp.path().join("eval/evaluation.json")), eval);
    assert!(eval["mean_shortage_mwh"].as_f64().unwrap() >= 0.0);
    assert!(eval["mean_surplus_mwh"].as_f64().unwrap() >= 0.0);
}

/// Rewrites the value column of a strategy file.
fn rewrite_strategy(src: &Path, dst: &Path, keep: impl Fn(&[&str]) -> bool, value: &str) {
    let text = std::fs::read_to_string(src).unwrap();
    let mut lines = text.lines();
    let mut out = vec![lines.next().unwrap().to_string()];
    for line in lines {
        let mut f: Vec<&str> = line.split(',').collect();
        if keep(&f) {
            let last = f.len() - 1;
            f[last] = value;
            out.push(f.join(","));
        }
    }
    std::fs::write(dst, out.join("\n") + "\n").unwrap();
}

#[test]
fn zero_strategy_matches_the_direct_lp() {
    let tmp = tempfile::tempdir().unwrap();
    let solve_dir = tmp.path().join("solve");
    run_ok(&with(
        &["solve", "--scenarios", "3", "--hours", "8"],
        &solve_dir,
        &[],
    ));
    let zero = tmp.path().join("zero.csv");
    rewrite_strategy(&solve_dir.join("strategy.csv"), &zero, |_| true, "0");
    let eval = run_ok(&with(
        &[
            "evaluate",
            "--scenarios",
            "3",
            "--hours",
            "8",
            "--strategy",
            zero.to_str().unwrap(),
        ],
        &tmp.path().join("eval"),
        &[],
    ));
    // without bids all production is settled as imbalance; solve that as one LP
    let cfg = config(&["river=builtin:toy", "hours=8", "scenarios=3"]);
    let exp = Experiment::build(&cfg).unwrap();
    let de = build_deterministic_equivalent(&exp.instance(&cfg).unwrap());
    let mut lp = de.lp.clone();
    for j in 0..exp.model.program().num_first_stage() {
        lp.lower[j] = 0.0;
        lp.upper[j] = 0.0;
    }
    let sol = hydrosp::lp::solve_lp(&lp);
    assert!(sol.is_optimal());
    let direct = -sol.objective;
    let profit = eval["mean_profit_eur"].as_f64().unwrap();
    assert!(rel_close(profit, direct, 1e-8), "{profit} vs {direct}");
    assert_eq!(eval["mean_shortage_mwh"].as_f64().unwrap(), 0.0);
}

#[test]
fn strategy_with_a_missing_hour_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let solve_dir = tmp.path().join("solve");
    run_ok(&with(&["solve", "--scenarios", "2"], &solve_dir, &[]));
    let short = tmp.path().join("short.csv");
    // drop every hourly record of the last hour, leaving 23 hours
    rewrite_strategy(
        &solve_dir.join("strategy.csv"),
        &short,
        |f| !(f[0] != "block_mwh" && f[1] == "23"),
        "0",
    );
    let (code, err) = run_err(&with(
        &[
            "evaluate",
            "--scenarios",
            "2",
            "--strategy",
            short.to_str().unwrap(),
        ],
        &tmp.path().join("eval"),
        &[],
    ));
    assert_eq!(code, 2);
    assert!(err["message"].as_str().unwrap().contains("short.csv"));
}

#[test]
fn water_value_reruns_give_identical_cut_files() {
    let tmp = tempfile::tempdir().unwrap();
    let rest = ["--water_value.hours", "24", "--water_value.scenarios", "3"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&with(&["water-value"], &a, &rest));
    run_ok(&with(&["water-value"], &b, &rest));
    let cuts = std::fs::read(a.join("cuts.csv")).unwrap();
    assert_eq!(cuts, std::fs::read(b.join("cuts.csv")).unwrap());
    let header = String::from_utf8(cuts)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(header.starts_with("cut_id,group,intercept_eur,slope_"));
}

#[test]
fn zero_prices_give_all_zero_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&with(
        &["water-value"],
        tmp.path(),
        &[
            "--water_value.hours",
            "24",
            "--water_value.scenarios",
            "3",
            "--sampler.price_base",
            "0",
            "--sampler.price_peak",
            "0",
            "--sampler.noise_scale",
            "0",
        ],
    ));
    let cuts = WaterValueCuts::read_csv(std::fs::File::open(tmp.path().join("cuts.csv")).unwrap())
        .unwrap();
    assert!(!cuts.cuts.is_empty());
    for c in &cuts.cuts {
        assert!(c.slopes.iter().all(|&g| g == 0.0), "{:?}", c.slopes);
    }
}

#[test]
fn solve_with_a_cut_file_matches_the_in_memory_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let wv = ["--water_value.hours", "24", "--water_value.scenarios", "3"];
    run_ok(&with(&["water-value"], &tmp.path().join("wv"), &wv));
    let cut_file = tmp.path().join("wv/cuts.csv");
    let solved = run_ok(&with(
        &["solve", "--scenarios", "3"],
        &tmp.path().join("solve"),
        &["--day_ahead.cuts", cut_file.to_str().unwrap()],
    ));

    let cfg = config(&[
        "river=builtin:toy",
        "scenarios=3",
        "water_value.hours=24",
        "water_value.scenarios=3",
    ]);
    let net = load_network(&cfg).unwrap();
    let q: Vec<f64> = net.plants().iter().map(|p| p.max_discharge).collect();
    let week = HourlySampler::new(cfg.sampler.clone(), q.clone(), 24).unwrap();
    let cuts = compute_water_value(
        &net,
        week.sample(cfg.seed, 3),
        &cfg.water_value.grid,
        &cfg.solver.lshaped(3),
    )
    .unwrap()
    .cuts;
    let model = build_day_ahead(
        &net,
        &bid_levels(&cfg, &net).unwrap(),
        &uniform_blocks(24, cfg.day_ahead.block_hours),
        Some(&cuts),
        &cfg.penalties,
    )
    .unwrap();
    let day = HourlySampler::new(cfg.sampler.clone(), q, 24).unwrap();
    let fp = FiniteProgram::new(model.program, day.sample(cfg.seed, 3)).unwrap();
    let in_memory = lshaped::solve(&fp, &cfg.solver.lshaped(3))
        .unwrap()
        .objective;
    let from_file = solved["objective_eur"].as_f64().unwrap();
    assert!(
        rel_close(from_file, in_memory, 1e-9),
        "{from_file} vs {in_memory}"
    );
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("exp.toml");
    std::fs::write(
        &file,
        "river = \"builtin:toy\"\nscenarios = 2\nhours = 8\n\n[solver]\nformulation = \"single\"\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let summary = run_ok(&[
        "solve",
        "--config",
        file.to_str().unwrap(),
        "--scenarios",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(summary["scenarios"], 3);
    assert_eq!(summary["periods"], 8);
    assert_eq!(summary["converged"], true);
}
