// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::changepoint::PeltConfig;
use crate::diagnostics::SelectionRule;
use crate::error::{Error, Result};
use crate::harness::{SplitFractions, ScenarioSpec};
use crate::model::{ModelConfig, TrainConfig};
use crate::normalize::{NormConfig, StrategyKind};

/// Environment variable consulted when a config leaves `output_dir` unset.
pub const OUTPUT_DIR_ENV: &str = "RINORM_OUTPUT_DIR";

/// A dataset is either a CSV file or a generated scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// Defaults to the lookback length.
    pub window_length: Option<usize>,
    pub stride: usize,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self { window_length: None, stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub datasets: Vec<DatasetConfig>,
    pub lookback: usize,
    pub horizons: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    pub split: SplitFractions,
    /// Stride between training and validation windows.
    pub train_stride: usize,
    /// Stride between test windows.
    pub eval_stride: usize,
    /// Overrides `train.seed` when set.
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub normalization: NormConfig,
    pub pelt: PeltConfig,
    pub profile: ProfileSection,
    pub selection: SelectionRule,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            datasets: Vec::new(),
            lookback: 336,
            horizons: vec![96, 192, 336, 720],
            strategies: StrategyKind::ALL.to_vec(),
            split: SplitFractions::default(),
            train_stride: 1,
            eval_stride: 1,
            seed: None,
            output_dir: None,
            normalization: NormConfig::default(),
            pelt: PeltConfig::default(),
            profile: ProfileSection::default(),
            selection: SelectionRule::default(),
            train: TrainConfig::default(),
            model: ModelConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads TOML, or JSON when the extension is `.json`. Relative dataset
    /// paths are resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str::<Self>(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            Self::from_toml(&text)?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    d.path = Some(base.join(p));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("at least one dataset is required".into());
        }
        for d in &self.datasets {
            if d.path.is_some() == d.scenario.is_some() {
                return bad(format!("dataset `{}` needs exactly one of `path` or `scenario`", d.name));
            }
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique".into());
        }
        if self.lookback == 0 || self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("lookback and every horizon must be >= 1".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.train_stride == 0 || self.eval_stride == 0 || self.profile.stride == 0 {
            return bad("strides must be >= 1".into());
        }
        if self.profile.window_length == Some(0) {
            return bad("profile.window_length must be >= 1".into());
        }
        let wrap = |e: Error| Error::Config(e.to_string());
        self.split.validate().map_err(wrap)?;
        self.normalization.validate().map_err(wrap)?;
        self.pelt.validate().map_err(wrap)?;
        self.selection.validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        if self.model.kernel_size == 0 {
            return bad("model.kernel_size must be >= 1".into());
        }
        Ok(())
    }

    /// Training settings with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(seed) = self.seed {
            t.seed = seed;
        }
        t
    }

    /// `output_dir`, else the environment variable, else `results`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn profile_window(&self) -> usize {
        self.profile.window_length.unwrap_or(self.lookback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::RuleKind;
    use crate::harness::ScenarioKind;

    const EXAMPLE: &str = r#"
name = "demo"
lookback = 96
horizons = [24, 48]
strategies = ["revin", "r2in", "ain"]
seed = 3

[selection]
kind = "ain_reversed"
tau = 0.5

[train]
epochs = 2

[[datasets]]
name = "outliers"
[datasets.scenario]
kind = "outlier_noise"
length = 2000
seed = 1
spike_rate = 0.01

[[datasets]]
name = "file"
path = "data/x.csv"
"#;

    #[test]
    fn parses_example() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.lookback, 96);
        assert_eq!(cfg.strategies, vec![StrategyKind::RevIN, StrategyKind::R2IN, StrategyKind::AIN]);
        assert_eq!(cfg.selection.kind, RuleKind::AinReversed);
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.train_config().seed, 3);
        let s = cfg.datasets[0].scenario.as_ref().unwrap();
        assert_eq!(s.kind, ScenarioKind::OutlierNoise);
        assert_eq!(s.params.spike_rate, 0.01);
        assert_eq!(s.params.period, 24);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(ExperimentConfig::from_toml("lookbak = 3"), Err(Error::Config(_))));
        let bogus = EXAMPLE.replace("spike_rate = 0.01", "spike_rate = 0.01\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml(&bogus), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.datasets[1].scenario = cfg.datasets[0].scenario.clone();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.split.train = 0.95;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.horizons.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        std::fs::write(&path, EXAMPLE).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.datasets[1].path.as_deref(), Some(dir.path().join("data/x.csv").as_path()));
        let json = dir.path().join("exp.json");
        std::fs::write(&json, serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::load(&json).unwrap().lookback, 96);
        assert!(matches!(ExperimentConfig::load(&dir.path().join("none.toml")), Err(Error::FileNotFound(_))));
    }
}
