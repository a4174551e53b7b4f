// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reversible instance normalization.
//!
//! Statistics are fitted per channel on the lookback window only. Every
//! strategy reduces to a `(location, scale)` pair per channel, so a single
//! normalize / denormalize path serves all of them:
//!
//! | strategy   | location | scale                         |
//! |------------|----------|-------------------------------|
//! | Identity   | 0        | 1                             |
//! | RevIN      | mean     | `sqrt(var + epsilon)`         |
//! | R2IN       | median   | `max(1.4826 · MAD, floor)`    |
//! | R2INPlus   | median   | `max(k_emp · MAD, floor)`     |
//!
//! A-IN is a per-dataset choice between RevIN and R2INPlus and must be
//! resolved by [`crate::diagnostics::select_strategy`] before fitting.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, NORMAL_CONSISTENCY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "revin")]
    RevIN,
    #[serde(rename = "r2in")]
    R2IN,
    #[serde(rename = "r2in_plus")]
    R2INPlus,
    #[serde(rename = "ain")]
    AIN,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Identity,
        StrategyKind::RevIN,
        StrategyKind::R2IN,
        StrategyKind::R2INPlus,
        StrategyKind::AIN,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Identity => "identity",
            StrategyKind::RevIN => "revin",
            StrategyKind::R2IN => "r2in",
            StrategyKind::R2INPlus => "r2in_plus",
            StrategyKind::AIN => "ain",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" | "none" => Ok(StrategyKind::Identity),
            "revin" => Ok(StrategyKind::RevIN),
            "r2in" => Ok(StrategyKind::R2IN),
            "r2in_plus" | "r2inplus" | "r2in+" => Ok(StrategyKind::R2INPlus),
            "ain" | "a_in" => Ok(StrategyKind::AIN),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// A strategy choice; `ain_tau` is set exactly when `kind` is A-IN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub ain_tau: Option<f64>,
}

impl Strategy {
    pub const DEFAULT_TAU: f64 = 0.5;

    pub fn new(kind: StrategyKind) -> Self {
        let ain_tau = (kind == StrategyKind::AIN).then_some(Self::DEFAULT_TAU);
        Self { kind, ain_tau }
    }

    pub fn ain(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self { kind: StrategyKind::AIN, ain_tau: Some(tau) })
    }
}

impl From<StrategyKind> for Strategy {
    fn from(kind: StrategyKind) -> Self {
        Strategy::new(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    /// Added to the variance inside the square root (RevIN).
    pub epsilon: f64,
    /// Floor on MAD when forming the empirical k-factor.
    pub mad_floor: f64,
    /// Floor on the robust scales.
    pub scale_floor: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            mad_floor: stats::DEFAULT_MAD_FLOOR,
            scale_floor: 1e-8,
        }
    }
}

impl NormConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.mad_floor > 0.0 && self.scale_floor > 0.0) {
            return Err(Error::InvalidParams(
                "epsilon, mad_floor and scale_floor must all be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-channel statistics of one lookback window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
    /// Factor applied to MAD: 1.4826 for R2IN, the window's k_emp for
    /// R2INPlus, and 1 for strategies that do not use MAD.
    pub k_used: Vec<f64>,
    pub strategy: StrategyKind,
}

impl NormStats {
    pub fn identity(channels: usize) -> Self {
        Self {
            location: vec![0.0; channels],
            scale: vec![1.0; channels],
            k_used: vec![1.0; channels],
            strategy: StrategyKind::Identity,
        }
    }

    pub fn channels(&self) -> usize {
        self.location.len()
    }

    fn check_channels(&self, got: usize) -> Result<()> {
        if got != self.channels() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} channels", self.channels()),
                got: format!("{got} channels"),
            });
        }
        Ok(())
    }
}

/// Fits statistics on an `L × C` lookback.
pub fn fit(strategy: StrategyKind, lookback: ArrayView2<'_, f64>, cfg: &NormConfig) -> Result<NormStats> {
    if strategy == StrategyKind::AIN {
        return Err(Error::StrategyUnresolved);
    }
    cfg.validate()?;
    let (rows, channels) = lookback.dim();
    if rows == 0 || channels == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = lookback.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    if strategy == StrategyKind::Identity {
        return Ok(NormStats::identity(channels));
    }

    let mut location = Vec::with_capacity(channels);
    let mut scale = Vec::with_capacity(channels);
    let mut k_used = Vec::with_capacity(channels);
    let mut column = Vec::with_capacity(rows);
    for col in lookback.axis_iter(Axis(1)) {
        column.clear();
        column.extend(col.iter().copied());
        let (loc, sc, k) = match strategy {
            StrategyKind::RevIN => (stats::mean(&column)?, stats::std_population(&column, cfg.epsilon)?, 1.0),
            StrategyKind::R2IN => {
                let (med, mad) = stats::median_and_mad(&column);
                (med, (NORMAL_CONSISTENCY * mad).max(cfg.scale_floor), NORMAL_CONSISTENCY)
            }
            StrategyKind::R2INPlus => {
                let (med, mad) = stats::median_and_mad(&column);
                let k = stats::empirical_k(&column, cfg.mad_floor)?;
                (med, (k * mad).max(cfg.scale_floor), k)
            }
            StrategyKind::Identity | StrategyKind::AIN => unreachable!(),
        };
        location.push(loc);
        scale.push(sc);
        k_used.push(k);
    }
    Ok(NormStats { location, scale, k_used, strategy })
}

/// `(x − location) / scale`, per channel.
pub fn normalize(x: ArrayView2<'_, f64>, stats: &NormStats) -> Result<Array2<f64>> {
    stats.check_channels(x.ncols())?;
    let mut out = x.to_owned();
    for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let (loc, sc) = (stats.location[c], stats.scale[c]);
        col.mapv_inplace(|v| (v - loc) / sc);
    }
    Ok(out)
}

/// `ŷ' · scale + location`, per channel.
pub fn denormalize(y: ArrayView2<'_, f64>, stats: &NormStats) -> Result<Array2<f64>> {
    stats.check_channels(y.ncols())?;
    let mut out = y.to_owned();
    for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let (loc, sc) = (stats.location[c], stats.scale[c]);
        col.mapv_inplace(|v| v * sc + loc);
    }
    Ok(out)
}
