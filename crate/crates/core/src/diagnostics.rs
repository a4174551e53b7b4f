// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dataset profiling and strategy selection.
//!
//! [`profile`] summarises a dataset into a [`DataPortrait`]. Two selectors
//! consume it: [`select_strategy`], the statically configured A-IN rule
//! (plus its reversed ablation variant), and [`recommend`], the practical
//! decision guide. The two are deliberately kept separate; they disagree on
//! high-CPR data.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::changepoint::{self, PeltConfig};
use crate::error::{Error, Result};
use crate::harness::SeriesMatrix;
use crate::normalize::StrategyKind;
use crate::par::Execution;
use crate::stats;

/// Average empirical k-factor above which outliers count as extreme.
pub const EXTREME_K_EMP: f64 = 1000.0;
/// CPR at or above which a dataset counts as structurally unstable.
pub const HIGH_CPR: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPortrait {
    pub avg_k_emp: f64,
    /// `None` when every profiled window had zero variance.
    pub avg_skewness: Option<f64>,
    pub avg_kurtosis: Option<f64>,
    pub cpr_rate: f64,
    pub windows_profiled: usize,
    pub degenerate_windows: usize,
}

impl DataPortrait {
    /// A portrait built from already-known summary values.
    pub fn from_summary(avg_k_emp: f64, avg_skewness: Option<f64>, avg_kurtosis: Option<f64>, cpr_rate: f64) -> Self {
        Self {
            avg_k_emp,
            avg_skewness,
            avg_kurtosis,
            cpr_rate,
            windows_profiled: 0,
            degenerate_windows: 0,
        }
    }

    fn is_complete(&self) -> bool {
        self.avg_k_emp.is_finite() && self.avg_k_emp >= 0.0 && (0.0..=1.0).contains(&self.cpr_rate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub window_length: usize,
    pub stride: usize,
    pub pelt: PeltConfig,
    pub mad_floor: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            window_length: 336,
            stride: 1,
            pelt: PeltConfig::default(),
            mad_floor: stats::DEFAULT_MAD_FLOOR,
            execution: Execution::default(),
        }
    }
}

struct WindowSummary {
    k_emp: f64,
    skewness: Option<f64>,
    kurtosis: Option<f64>,
    cpr: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize_window(series: &SeriesMatrix, start: usize, cfg: &ProfileConfig) -> Result<WindowSummary> {
    let len = cfg.window_length;
    let mut k = Vec::with_capacity(series.channels());
    let mut skew = Vec::new();
    let mut kurt = Vec::new();
    let mut flags = 0usize;
    for c in 0..series.channels() {
        let col = series.column(c);
        let window = &col[start..start + len];
        k.push(stats::empirical_k(window, cfg.mad_floor)?);
        match (stats::skewness(window), stats::kurtosis_excess(window)) {
            (Ok(s), Ok(q)) => {
                skew.push(s);
                kurt.push(q);
            }
            (Err(Error::DegenerateDistribution | Error::InputTooShort { .. }), _) => {}
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
        let seg = changepoint::pelt(window, &cfg.pelt)?;
        if changepoint::flags_last_quartile(&seg.breakpoints, len) {
            flags += 1;
        }
    }
    let channels = series.channels() as f64;
    Ok(WindowSummary {
        k_emp: k.iter().sum::<f64>() / channels,
        skewness: mean_of(skew.into_iter()),
        kurtosis: mean_of(kurt.into_iter()),
        cpr: flags as f64 / channels,
    })
}

/// Profiles a dataset over sliding windows.
///
/// Each metric is computed per window and channel, averaged over channels,
/// then over windows. Windows where no channel has a computable skewness are
/// counted as degenerate and left out of the moment averages.
pub fn profile(series: &SeriesMatrix, cfg: &ProfileConfig) -> Result<DataPortrait> {
    cfg.pelt.validate()?;
    if cfg.stride == 0 {
        return Err(Error::InvalidParams("profile stride must be >= 1".into()));
    }
    if !(cfg.mad_floor > 0.0) {
        return Err(Error::InvalidParams("mad_floor must be > 0".into()));
    }
    let t = series.len();
    if cfg.window_length == 0 || t < cfg.window_length {
        return Err(Error::InputTooShort { needed: cfg.window_length.max(1), got: t });
    }
    let count = (t - cfg.window_length) / cfg.stride + 1;
    let summaries: Vec<WindowSummary> = cfg
        .execution
        .map(count, |w| summarize_window(series, w * cfg.stride, cfg))
        .into_iter()
        .collect::<Result<_>>()?;

    // fixed-order reduction
    let n = summaries.len() as f64;
    let avg_k_emp = summaries.iter().map(|s| s.k_emp).sum::<f64>() / n;
    let cpr_rate = summaries.iter().map(|s| s.cpr).sum::<f64>() / n;
    let degenerate_windows = summaries.iter().filter(|s| s.skewness.is_none()).count();
    Ok(DataPortrait {
        avg_k_emp,
        avg_skewness: mean_of(summaries.iter().filter_map(|s| s.skewness)),
        avg_kurtosis: mean_of(summaries.iter().filter_map(|s| s.kurtosis)),
        cpr_rate,
        windows_profiled: summaries.len(),
        degenerate_windows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Low CPR → R2INPlus, high CPR → RevIN.
    AinOriginal,
    /// High CPR → R2INPlus, low CPR → RevIN.
    AinReversed,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::AinOriginal => "ain_original",
            RuleKind::AinReversed => "ain_reversed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionRule {
    pub kind: RuleKind,
    pub tau: f64,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self { kind: RuleKind::AinOriginal, tau: 0.5 }
    }
}

impl SelectionRule {
    pub fn new(kind: RuleKind, tau: f64) -> Result<Self> {
        let rule = Self { kind, tau };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

/// Static A-IN choice for a whole dataset. `cpr_rate == tau` counts as high risk.
pub fn select_strategy(portrait: &DataPortrait, rule: &SelectionRule) -> StrategyKind {
    let high_risk = portrait.cpr_rate >= rule.tau;
    match (rule.kind, high_risk) {
        (RuleKind::AinOriginal, false) | (RuleKind::AinReversed, true) => StrategyKind::R2INPlus,
        (RuleKind::AinOriginal, true) | (RuleKind::AinReversed, false) => StrategyKind::RevIN,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleCode {
    VeryHighOutliers,
    HighStructuralInstability,
    WellBehaved,
    NoDiagnostics,
}

impl RationaleCode {
    pub fn describe(&self) -> &'static str {
        match self {
            RationaleCode::VeryHighOutliers => "very high outliers: prefer a robust method",
            RationaleCode::HighStructuralInstability => "high structural instability: R2IN is the cautious choice",
            RationaleCode::WellBehaved => "well-behaved data: evaluate both RevIN and R2IN",
            RationaleCode::NoDiagnostics => "no diagnostics available: default to R2IN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub strategies: Vec<StrategyKind>,
    pub code: RationaleCode,
    pub rationale: String,
}

impl Recommendation {
    fn new(code: RationaleCode, strategies: Vec<StrategyKind>) -> Self {
        Self { strategies, code, rationale: code.describe().to_string() }
    }
}

/// The practical decision guide. `None` or an incomplete portrait falls back to R2IN.
pub fn recommend(portrait: Option<&DataPortrait>) -> Recommendation {
    use StrategyKind::*;
    match portrait {
        Some(p) if p.is_complete() => {
            if p.avg_k_emp > EXTREME_K_EMP {
                Recommendation::new(RationaleCode::VeryHighOutliers, vec![R2IN, R2INPlus])
            } else if p.cpr_rate >= HIGH_CPR {
                Recommendation::new(RationaleCode::HighStructuralInstability, vec![R2IN])
            } else {
                Recommendation::new(RationaleCode::WellBehaved, vec![RevIN, R2IN])
            }
        }
        _ => Recommendation::new(RationaleCode::NoDiagnostics, vec![R2IN]),
    }
}
