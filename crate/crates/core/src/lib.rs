// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reversible instance normalization for time-series forecasting.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats`]: scalar statistics (mean, population std, median, MAD,
//!   moments, empirical k-factor).
//! - [`changepoint`]: PELT segmentation with an L2 mean-shift cost and the
//!   Change Point Risk metric.
//! - [`normalize`]: RevIN, R²-IN, R²-IN+ and identity fit / normalize /
//!   denormalize.
//! - [`diagnostics`]: data portraits, the static A-IN selector and the
//!   practical recommendation rules.
//! - [`model`]: DLinear decomposition, forward pass and a deterministic
//!   trainer.
//! - [`harness`]: CSV ingestion, windowing, evaluation, ranking, synthetic
//!   scenarios and the end-to-end benchmark.

#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod normalize;
pub mod par;
pub mod stats;

pub use changepoint::{change_point_risk, pelt, Penalty, PeltConfig, Segmentation};
pub use diagnostics::{
    profile, recommend, select_strategy, DataPortrait, ProfileConfig, Recommendation, RuleKind,
    SelectionRule,
};
pub use error::{Error, Result};
pub use harness::{Instance, SeriesMatrix};
pub use model::{ChannelMode, LinearForecaster, Optimizer, TrainConfig};
pub use normalize::{NormConfig, NormStats, Strategy, StrategyKind};
pub use par::Execution;
