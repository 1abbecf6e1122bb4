use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hydrosp_cli::commands;
use hydrosp_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "hydrosp",
    about = "Stochastic hydropower planning experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one sampled instance with the L-shaped method.
    Solve(Common),
    /// Confidence intervals for the optimal value, EEV and VSS.
    Saa(Common),
    /// Evaluate a fixed strategy file over the configured scenarios.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Compute a water-value cut pool from the week-ahead problem.
    WaterValue(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    river: Option<String>,
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Day-ahead and maintenance horizon in hours.
    #[arg(long)]
    hours: Option<usize>,
    /// Hours per period (capacity model).
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    horizon_days: Option<usize>,
    /// Dot-path override `key=value`; `--a.b value` is shorthand for `--set a.b=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl Common {
    fn load(&self, strategy: Option<&PathBuf>) -> Result<ExperimentConfig, CliError> {
        let mut o = Vec::new();
        if let Some(v) = &self.model {
            o.push(format!("model={}", quoted(v)));
        }
        if let Some(v) = &self.river {
            o.push(format!("river={}", quoted(v)));
        }
        if let Some(v) = self.scenarios {
            o.push(format!("scenarios={v}"));
        }
        if let Some(v) = self.seed {
            o.push(format!("seed={v}"));
        }
        if let Some(v) = &self.output {
            o.push(format!("output={}", quoted(&v.to_string_lossy())));
        }
        if let Some(v) = self.hours {
            o.push(format!("hours={v}"));
        }
        if let Some(v) = self.resolution {
            o.push(format!("resolution={v}"));
        }
        if let Some(v) = self.horizon_days {
            o.push(format!("horizon_days={v}"));
        }
        if let Some(v) = strategy {
            o.push(format!(
                "evaluate.strategy={}",
                quoted(&v.to_string_lossy())
            ));
        }
        // explicit flags win over generic overrides
        let mut all = self.overrides.clone();
        all.extend(o);
        ExperimentConfig::load(self.config.as_deref(), &all)
    }
}

/// Rewrites `--a.b value` and `--a.b=value` into `--set a.b=value`.
fn expand_dot_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(flag) if flag.split('=').next().is_some_and(|k| k.contains('.')) => {
                out.push("--set".into());
                if flag.contains('=') {
                    out.push(flag.to_string());
                } else {
                    let value = it.next().unwrap_or_default();
                    out.push(format!("{flag}={value}"));
                }
            }
            _ => out.push(arg),
        }
    }
    out
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Solve(c) => commands::solve(&c.load(None)?),
        Command::Saa(c) => commands::saa(&c.load(None)?),
        Command::Evaluate { common, strategy } => {
            commands::evaluate(&common.load(strategy.as_ref())?)
        }
        Command::WaterValue(c) => commands::water_value(&c.load(None)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(expand_dot_flags(std::env::args())) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                CliError::Config(e.to_string().trim().to_string()).to_json()
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            let _ = commands::print_summary(std::io::stdout().lock(), &summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
