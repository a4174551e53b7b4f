// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rinorm::harness::{
    load_csv, run_ablation, run_benchmark_with, run_case_study, CaseStudyConfig, ExperimentConfig, ScenarioKind,
    ScenarioParams, ScenarioSpec, OUTPUT_DIR_ENV,
};
use rinorm::{profile, recommend, select_strategy, Error, Execution, ProfileConfig, Result, RuleKind, SelectionRule};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rinorm", version, about = "Diagnostics and benchmarks for instance normalization in forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the data portrait of a CSV series.
    Profile {
        csv: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Print the recommended normalization for a CSV series.
    Recommend {
        csv: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        /// CPR threshold for the adaptive rules.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
    },
    /// Run the benchmark described by a TOML (or .json) config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Outlier-injection case study.
    Casestudy {
        /// Optional TOML with case-study settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Outlier height in window standard deviations.
        #[arg(long)]
        magnitude: Option<f64>,
        /// Lookback position to overwrite.
        #[arg(long)]
        position: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare RevIN, R2IN and both adaptive rules on a config's datasets.
    Ablate {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Write a synthetic scenario to CSV.
    Gen {
        /// outlier_noise, structural_break, skewed or heavy_tailed
        scenario: ScenarioKind,
        #[arg(long, default_value_t = 6000)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// Scenario parameter override, e.g. `--param spike_rate=0.01`.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct WindowArgs {
    /// Profiling window length.
    #[arg(long, default_value_t = 336)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

impl WindowArgs {
    fn profile_config(&self) -> ProfileConfig {
        ProfileConfig { window_length: self.window, stride: self.stride, ..ProfileConfig::default() }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory; falls back to the config, then the environment.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl OutputArgs {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        match cfg {
            Some(c) => c.resolved_output_dir(),
            None => std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results")),
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn parse_params(pairs: &[String]) -> Result<ScenarioParams> {
    let mut table = String::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got `{p}`")))?;
        table.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    ScenarioParams::from_toml(&table)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Profile { csv, window } => {
            let series = load_csv(&csv)?;
            let portrait = profile(&series, &window.profile_config())?;
            print_json(&serde_json::to_value(&portrait)?)
        }
        Command::Recommend { csv, window, tau } => {
            let series = load_csv(&csv)?;
            let portrait = profile(&series, &window.profile_config())?;
            let original = select_strategy(&portrait, &SelectionRule::new(RuleKind::AinOriginal, tau)?);
            let reversed = select_strategy(&portrait, &SelectionRule::new(RuleKind::AinReversed, tau)?);
            print_json(&json!({
                "portrait": portrait,
                "recommendation": recommend(Some(&portrait)),
                "ain_original": original,
                "ain_reversed": reversed,
            }))
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_benchmark_with(&cfg, out.execution())?;
            let dir = out.dir(Some(&cfg));
            report.write(&dir)?;
            for f in &report.failures {
                eprintln!("cell failed: {} / {} / H={}: {}", f.dataset, f.strategy, f.horizon, f.error);
            }
            for r in &report.ranks {
                println!("{:<12} average rank {:.3}", r.strategy, r.average_rank);
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Casestudy { config, seed, magnitude, position, epochs, out } => {
            let mut cfg = match config {
                Some(p) => CaseStudyConfig::load(&p)?,
                None => CaseStudyConfig::default(),
            };
            if let Some(s) = seed {
                cfg.scenario.seed = s;
                cfg.train.seed = s;
            }
            if let Some(m) = magnitude {
                cfg.magnitude = m;
            }
            if position.is_some() {
                cfg.position = position;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let report = run_case_study(&cfg)?;
            let dir = out.dir(None);
            report.write(&dir)?;
            for r in &report.responses {
                println!(
                    "{:<10} location shift {:+.4} scale x{:.3} mse {:.4} -> {:.4}",
                    r.strategy, r.location_shift, r.scale_ratio, r.mse_clean, r.mse_injected
                );
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Ablate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ablation = run_ablation(&cfg, out.execution())?;
            let dir = out.dir(Some(&cfg));
            ablation.report.write(&dir)?;
            std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&ablation)? + "\n")?;
            for r in &ablation.report.rows {
                println!("{:<10} H={:<4} {:<14} ({:<9}) mse {:.4} mae {:.4}", r.dataset, r.horizon, r.strategy, r.resolved.to_string(), r.mse, r.mae);
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Gen { scenario, length, seed, channels, params, out } => {
            let spec = ScenarioSpec { kind: scenario, length, seed, channels, params: parse_params(&params)? };
            write_series(&spec, &out)
        }
    }
}

fn write_series(spec: &ScenarioSpec, out: &Path) -> Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    spec.generate()?.write_csv(out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
