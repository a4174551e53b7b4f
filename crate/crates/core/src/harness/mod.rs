// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data loading, synthetic scenarios, the benchmark runner and the case
//! study / ablation experiments built on top of it.

mod ablation;
mod casestudy;
mod config;
mod data;
mod eval;
mod pipeline;
mod synth;

pub use ablation::{ablation_arms, run_ablation, AblationReport};
pub use casestudy::{run_case_study, CaseStudyConfig, CaseStudyReport, StrategyResponse};
pub use config::{DatasetConfig, ExperimentConfig, ProfileSection, OUTPUT_DIR_ENV};
pub use data::{load_csv, windowize, Instance, SeriesMatrix, SplitFractions, Timestamp};
pub use eval::{average_rank, evaluate, mean_ranks, EvalRow, Metrics, RankEntry};
pub use pipeline::{run_benchmark, run_benchmark_with, run_grid, CellLog, Arm, ArmKind, CellFailure, DatasetSummary, EvalReport, ForecastTrace, PreparedDataset};
pub use synth::{generate_contradiction_scenario, inject_outlier, ScenarioKind, ScenarioParams, ScenarioSpec};
