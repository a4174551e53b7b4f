// SPDX-License-Identifier: MIT OR Apache-2.0

//! The benchmark grid: datasets × normalization arms × horizons.
//!
//! Phase one profiles every dataset's training split. Phase two resolves
//! adaptive arms and trains/evaluates every cell with the configured
//! [`Execution`]. Cells are merged in grid order, so the report does not
//! depend on thread scheduling.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DataPortrait, ProfileConfig, Recommendation, RuleKind, SelectionRule};
use crate::error::{Error, Result};
use crate::harness::{
    average_rank, evaluate, load_csv, windowize, DatasetConfig, EvalRow, ExperimentConfig, Instance, RankEntry,
    SeriesMatrix,
};
use crate::model::{self, TrainingLog};
use crate::normalize::StrategyKind;
use crate::par::Execution;

/// How an arm picks its normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmKind {
    Static(StrategyKind),
    /// Resolved per dataset from its portrait.
    Adaptive(SelectionRule),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub kind: ArmKind,
}

impl Arm {
    /// A configured strategy; `ain` becomes an adaptive arm using `rule`.
    pub fn from_strategy(kind: StrategyKind, rule: SelectionRule) -> Self {
        let arm = match kind {
            StrategyKind::AIN => ArmKind::Adaptive(rule),
            k => ArmKind::Static(k),
        };
        Self { label: kind.as_str().to_string(), kind: arm }
    }

    pub fn adaptive(rule: SelectionRule) -> Self {
        Self { label: rule.kind.to_string(), kind: ArmKind::Adaptive(rule) }
    }

    fn resolve(&self, portrait: Option<&DataPortrait>) -> Result<StrategyKind> {
        match self.kind {
            ArmKind::Static(k) => Ok(k),
            ArmKind::Adaptive(rule) => portrait.map(|p| diagnostics::select_strategy(p, &rule)).ok_or(Error::StrategyUnresolved),
        }
    }
}

/// A loaded dataset with its chronological split and portrait.
#[derive(Clone, Debug)]
pub struct PreparedDataset {
    pub name: String,
    pub series: SeriesMatrix,
    pub ranges: (Range<usize>, Range<usize>, Range<usize>),
    pub portrait: Option<DataPortrait>,
    pub profile_error: Option<String>,
}

impl PreparedDataset {
    pub fn load(cfg: &DatasetConfig, experiment: &ExperimentConfig, exec: Execution) -> Result<Self> {
        let series = match (&cfg.path, &cfg.scenario) {
            (Some(p), None) => load_csv(p)?,
            (None, Some(s)) => s.generate()?,
            _ => return Err(Error::Config(format!("dataset `{}` needs exactly one of `path` or `scenario`", cfg.name))),
        };
        let ranges = experiment.split.ranges(series.len());
        let profile_cfg = ProfileConfig {
            window_length: experiment.profile_window(),
            stride: experiment.profile.stride,
            pelt: experiment.pelt.clone(),
            mad_floor: experiment.normalization.mad_floor,
            execution: exec,
        };
        let (portrait, profile_error) = match diagnostics::profile(&series.slice_rows(ranges.0.clone()), &profile_cfg) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Self { name: cfg.name.clone(), series, ranges, portrait, profile_error })
    }

    fn windows(&self, range: &Range<usize>, lookback: usize, horizon: usize, stride: usize) -> Result<Vec<Instance>> {
        let mut out = windowize(&self.series.slice_rows(range.clone()), lookback, horizon, stride)?;
        for inst in &mut out {
            inst.dataset_id = self.name.clone();
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub length: usize,
    pub channels: usize,
    pub portrait: Option<DataPortrait>,
    pub profile_error: Option<String>,
    pub recommendation: Recommendation,
    pub ain_original: Option<StrategyKind>,
    pub ain_reversed: Option<StrategyKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub dataset: String,
    pub strategy: String,
    pub horizon: usize,
    pub error: String,
}

/// Channel-0 forecast on the first test window of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastTrace {
    pub dataset: String,
    pub strategy: String,
    pub horizon: usize,
    pub lookback: Vec<f64>,
    pub target: Vec<f64>,
    pub forecast: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellLog {
    pub dataset: String,
    pub strategy: String,
    pub horizon: usize,
    pub log: TrainingLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub datasets: Vec<DatasetSummary>,
    pub rows: Vec<EvalRow>,
    /// Empty when the grid is incomplete; see `rank_error`.
    pub ranks: Vec<RankEntry>,
    pub rank_error: Option<String>,
    pub failures: Vec<CellFailure>,
    pub traces: Vec<ForecastTrace>,
    #[serde(skip)]
    pub logs: Vec<CellLog>,
}

impl EvalReport {
    pub fn row(&self, dataset: &str, strategy: &str, horizon: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.strategy == strategy && r.horizon == horizon)
    }

    /// Writes `report.json`, `results.csv`, `ranks.csv`, `datasets.csv`,
    /// per-cell training logs and plot data under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("plot_data"))?;
        fs::create_dir_all(dir.join("logs"))?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;

        let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
        w.write_record(["dataset", "strategy", "resolved", "horizon", "mse", "mae"])?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.strategy.clone(),
                r.resolved.to_string(),
                r.horizon.to_string(),
                r.mse.to_string(),
                r.mae.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("ranks.csv"))?;
        w.write_record(["strategy", "average_rank", "mse_rank", "mae_rank"])?;
        for r in &self.ranks {
            w.write_record([r.strategy.clone(), r.average_rank.to_string(), r.mse_rank.to_string(), r.mae_rank.to_string()])?;
        }
        w.flush()?;

        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut w = csv::Writer::from_path(dir.join("datasets.csv"))?;
        w.write_record(["dataset", "length", "channels", "avg_k_emp", "avg_skewness", "avg_kurtosis", "cpr", "ain_original", "ain_reversed"])?;
        for d in &self.datasets {
            let p = d.portrait.as_ref();
            w.write_record([
                d.name.clone(),
                d.length.to_string(),
                d.channels.to_string(),
                opt(p.map(|p| p.avg_k_emp)),
                opt(p.and_then(|p| p.avg_skewness)),
                opt(p.and_then(|p| p.avg_kurtosis)),
                opt(p.map(|p| p.cpr_rate)),
                d.ain_original.map_or(String::new(), |s| s.to_string()),
                d.ain_reversed.map_or(String::new(), |s| s.to_string()),
            ])?;
        }
        w.flush()?;

        for t in &self.traces {
            let file = dir.join("plot_data").join(format!("forecast_{}_{}_{}.csv", t.dataset, t.strategy, t.horizon));
            let mut w = csv::Writer::from_path(file)?;
            w.write_record(["step", "lookback", "target", "forecast"])?;
            let l = t.lookback.len();
            for (i, v) in t.lookback.iter().enumerate() {
                w.write_record([i.to_string(), v.to_string(), String::new(), String::new()])?;
            }
            for (i, (y, f)) in t.target.iter().zip(&t.forecast).enumerate() {
                w.write_record([(l + i).to_string(), String::new(), y.to_string(), f.to_string()])?;
            }
            w.flush()?;
        }
        for c in &self.logs {
            let file = fs::File::create(dir.join("logs").join(format!("{}_{}_{}.jsonl", c.dataset, c.strategy, c.horizon)))?;
            c.log.write_jsonl(std::io::BufWriter::new(file))?;
        }
        Ok(())
    }
}

struct CellOutcome {
    row: EvalRow,
    trace: Option<ForecastTrace>,
    log: TrainingLog,
}

fn run_cell(ds: &PreparedDataset, arm: &Arm, horizon: usize, cfg: &ExperimentConfig) -> Result<CellOutcome> {
    let resolved = arm.resolve(ds.portrait.as_ref())?;
    let l = cfg.lookback;
    let (train_r, val_r, test_r) = &ds.ranges;
    let train = ds.windows(train_r, l, horizon, cfg.train_stride)?;
    // a validation split shorter than one window just disables early stopping
    let val = match ds.windows(val_r, l, horizon, cfg.train_stride) {
        Ok(v) => v,
        Err(Error::InputTooShort { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let test = ds.windows(test_r, l, horizon, cfg.eval_stride)?;
    let (model, log) = model::train(&train, &val, resolved, &cfg.normalization, &cfg.model, &cfg.train_config())?;
    let metrics = evaluate(&model, resolved, &test, &cfg.normalization)?;
    let trace = test.first().map(|inst| -> Result<ForecastTrace> {
        let f = model::predict(&model, resolved, inst.lookback.view(), &cfg.normalization)?;
        Ok(ForecastTrace {
            dataset: ds.name.clone(),
            strategy: arm.label.clone(),
            horizon,
            lookback: inst.lookback.column(0).to_vec(),
            target: inst.target.as_ref().map(|t| t.column(0).to_vec()).unwrap_or_default(),
            forecast: f.column(0).to_vec(),
        })
    });
    Ok(CellOutcome {
        row: EvalRow {
            dataset: ds.name.clone(),
            strategy: arm.label.clone(),
            resolved,
            horizon,
            mse: metrics.mse,
            mae: metrics.mae,
        },
        trace: trace.transpose()?,
        log,
    })
}

fn summarize(ds: &PreparedDataset, tau: f64) -> DatasetSummary {
    let choose = |kind| ds.portrait.as_ref().map(|p| diagnostics::select_strategy(p, &SelectionRule { kind, tau }));
    DatasetSummary {
        name: ds.name.clone(),
        length: ds.series.len(),
        channels: ds.series.channels(),
        portrait: ds.portrait.clone(),
        profile_error: ds.profile_error.clone(),
        recommendation: diagnostics::recommend(ds.portrait.as_ref()),
        ain_original: choose(RuleKind::AinOriginal),
        ain_reversed: choose(RuleKind::AinReversed),
    }
}

/// Runs `arms` over every dataset and horizon of `cfg`. Failing cells are
/// recorded in the report and skipped; dataset loading errors are fatal.
pub fn run_grid(cfg: &ExperimentConfig, arms: &[Arm], exec: Execution) -> Result<EvalReport> {
    cfg.validate()?;
    let datasets = cfg
        .datasets
        .iter()
        .map(|d| PreparedDataset::load(d, cfg, exec))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(usize, usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..arms.len()).flat_map(move |a| cfg.horizons.iter().map(move |&h| (d, a, h))))
        .collect();
    let outcomes = exec.map(cells.len(), |i| {
        let (d, a, h) = cells[i];
        run_cell(&datasets[d], &arms[a], h, cfg)
    });

    let mut report = EvalReport {
        name: cfg.name.clone(),
        datasets: datasets.iter().map(|d| summarize(d, cfg.selection.tau)).collect(),
        rows: Vec::new(),
        ranks: Vec::new(),
        rank_error: None,
        failures: Vec::new(),
        traces: Vec::new(),
        logs: Vec::new(),
    };
    for (&(d, a, h), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(c) => {
                report.logs.push(CellLog {
                    dataset: c.row.dataset.clone(),
                    strategy: c.row.strategy.clone(),
                    horizon: h,
                    log: c.log,
                });
                report.rows.push(c.row);
                report.traces.extend(c.trace);
            }
            Err(e) => report.failures.push(CellFailure {
                dataset: datasets[d].name.clone(),
                strategy: arms[a].label.clone(),
                horizon: h,
                error: e.in_cell(format!("{} / {} / H={h}", datasets[d].name, arms[a].label)).to_string(),
            }),
        }
    }
    if report.failures.is_empty() {
        match average_rank(&report.rows) {
            Ok(r) => report.ranks = r,
            Err(e) => report.rank_error = Some(e.to_string()),
        }
    } else {
        report.rank_error = Some(format!("{} cell(s) failed; ranks need the full grid", report.failures.len()));
    }
    Ok(report)
}

/// The benchmark over the configured strategies.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<EvalReport> {
    run_benchmark_with(cfg, Execution::default())
}

pub fn run_benchmark_with(cfg: &ExperimentConfig, exec: Execution) -> Result<EvalReport> {
    let arms: Vec<Arm> = cfg.strategies.iter().map(|&s| Arm::from_strategy(s, cfg.selection)).collect();
    run_grid(cfg, &arms, exec)
}
