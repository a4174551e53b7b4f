// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-point outlier injection: how each strategy's statistics and
//! forecast respond when one lookback value is replaced by an extreme one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{inject_outlier, windowize, ScenarioKind, ScenarioSpec, SplitFractions};
use crate::model::{self, ModelConfig, TrainConfig};
use crate::normalize::{self, NormConfig, NormStats, StrategyKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseStudyConfig {
    pub scenario: ScenarioSpec,
    pub lookback: usize,
    pub horizon: usize,
    pub strategies: Vec<StrategyKind>,
    /// Index into the test windows.
    pub test_window: usize,
    /// Lookback position to overwrite; defaults to the middle.
    pub position: Option<usize>,
    /// Outlier height in window standard deviations above the window mean.
    pub magnitude: f64,
    pub split: SplitFractions,
    pub train_stride: usize,
    pub normalization: NormConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        let mut scenario = ScenarioSpec::new(ScenarioKind::OutlierNoise, 6000, 11);
        // a clean, always-active seasonal load
        scenario.params.spike_rate = 0.0;
        scenario.params.idle_threshold = -2.0;
        scenario.params.outage_every = 0;
        Self {
            scenario,
            lookback: 336,
            horizon: 96,
            strategies: vec![StrategyKind::RevIN, StrategyKind::R2IN],
            test_window: 0,
            position: None,
            magnitude: 50.0,
            split: SplitFractions::default(),
            train_stride: 1,
            normalization: NormConfig::default(),
            train: TrainConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl CaseStudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyResponse {
    pub strategy: StrategyKind,
    pub stats_clean: NormStats,
    pub stats_injected: NormStats,
    /// Channel-0 location change, in units of the clean scale.
    pub location_shift: f64,
    /// Channel-0 injected scale over clean scale.
    pub scale_ratio: f64,
    pub forecast_clean: Vec<f64>,
    pub forecast_injected: Vec<f64>,
    pub mse_clean: f64,
    pub mse_injected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub position: usize,
    pub magnitude: f64,
    pub original_value: f64,
    pub injected_value: f64,
    pub lookback_clean: Vec<f64>,
    pub lookback_injected: Vec<f64>,
    pub target: Vec<f64>,
    pub responses: Vec<StrategyResponse>,
}

impl CaseStudyReport {
    pub fn response(&self, strategy: StrategyKind) -> Option<&StrategyResponse> {
        self.responses.iter().find(|r| r.strategy == strategy)
    }

    /// `case_study.json` and `plot_data/case_study.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("plot_data"))?;
        fs::write(dir.join("case_study.json"), serde_json::to_string_pretty(self)? + "\n")?;
        let mut w = csv::Writer::from_path(dir.join("plot_data").join("case_study.csv"))?;
        let mut header = vec!["step".to_string(), "lookback_clean".into(), "lookback_injected".into(), "target".into()];
        for r in &self.responses {
            header.push(format!("{}_clean", r.strategy));
            header.push(format!("{}_injected", r.strategy));
        }
        w.write_record(&header)?;
        let l = self.lookback_clean.len();
        for i in 0..l + self.target.len() {
            let mut rec = vec![i.to_string()];
            if i < l {
                rec.extend([self.lookback_clean[i].to_string(), self.lookback_injected[i].to_string(), String::new()]);
                rec.extend(std::iter::repeat_n(String::new(), 2 * self.responses.len()));
            } else {
                let k = i - l;
                rec.extend([String::new(), String::new(), self.target[k].to_string()]);
                for r in &self.responses {
                    rec.push(r.forecast_clean[k].to_string());
                    rec.push(r.forecast_injected[k].to_string());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Trains one model per strategy on the clean training split, then
/// forecasts a test window before and after injection.
pub fn run_case_study(cfg: &CaseStudyConfig) -> Result<CaseStudyReport> {
    cfg.split.validate()?;
    if cfg.strategies.contains(&StrategyKind::AIN) {
        return Err(Error::StrategyUnresolved);
    }
    let series = cfg.scenario.generate()?;
    let (train_r, val_r, test_r) = cfg.split.ranges(series.len());
    let (l, h) = (cfg.lookback, cfg.horizon);
    let train = windowize(&series.slice_rows(train_r), l, h, cfg.train_stride)?;
    let val = windowize(&series.slice_rows(val_r), l, h, cfg.train_stride).unwrap_or_default();
    let test = windowize(&series.slice_rows(test_r), l, h, 1)?;
    let clean = test.get(cfg.test_window).ok_or(Error::IndexOutOfRange {
        start: cfg.test_window,
        end: cfg.test_window + 1,
        len: test.len(),
    })?;
    let position = cfg.position.unwrap_or(l / 2);
    let hit = inject_outlier(clean, position, cfg.magnitude, None)?;
    let target = clean.target.as_ref().map(|t| t.column(0).to_vec()).unwrap_or_default();

    let responses = cfg
        .strategies
        .iter()
        .map(|&s| {
            let (m, _) = model::train(&train, &val, s, &cfg.normalization, &cfg.model, &cfg.train)?;
            let stats_clean = normalize::fit(s, clean.lookback.view(), &cfg.normalization)?;
            let stats_injected = normalize::fit(s, hit.lookback.view(), &cfg.normalization)?;
            let fc = model::predict(&m, s, clean.lookback.view(), &cfg.normalization)?.column(0).to_vec();
            let fi = model::predict(&m, s, hit.lookback.view(), &cfg.normalization)?.column(0).to_vec();
            Ok(StrategyResponse {
                strategy: s,
                location_shift: (stats_injected.location[0] - stats_clean.location[0]) / stats_clean.scale[0],
                scale_ratio: stats_injected.scale[0] / stats_clean.scale[0],
                stats_clean,
                stats_injected,
                mse_clean: mse(&fc, &target),
                mse_injected: mse(&fi, &target),
                forecast_clean: fc,
                forecast_injected: fi,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CaseStudyReport {
        position,
        magnitude: cfg.magnitude,
        original_value: clean.lookback[[position, 0]],
        injected_value: hit.lookback[[position, 0]],
        lookback_clean: clean.lookback.column(0).to_vec(),
        lookback_injected: hit.lookback.column(0).to_vec(),
        target,
        responses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_strategy_barely_moves() {
        let mut cfg = CaseStudyConfig { lookback: 96, horizon: 24, train_stride: 4, ..CaseStudyConfig::default() };
        cfg.scenario.length = 1500;
        cfg.train.epochs = 3;
        let r = run_case_study(&cfg).unwrap();
        let revin = r.response(StrategyKind::RevIN).unwrap();
        let r2in = r.response(StrategyKind::R2IN).unwrap();
        assert!(r2in.location_shift.abs() < 0.05, "{}", r2in.location_shift);
        assert!((r2in.scale_ratio - 1.0).abs() < 0.05, "{}", r2in.scale_ratio);
        assert!(revin.scale_ratio > 2.0);
        let dir = tempfile::tempdir().unwrap();
        r.write(dir.path()).unwrap();
        assert!(dir.path().join("plot_data/case_study.csv").exists());
    }

    #[test]
    fn bad_position_is_reported() {
        let mut cfg = CaseStudyConfig { lookback: 48, horizon: 12, train_stride: 8, position: Some(48), ..CaseStudyConfig::default() };
        cfg.scenario.length = 600;
        cfg.train.epochs = 1;
        assert!(matches!(run_case_study(&cfg), Err(Error::IndexOutOfRange { .. })));
    }
}
