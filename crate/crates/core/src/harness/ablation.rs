// SPDX-License-Identifier: MIT OR Apache-2.0

//! Four-arm ablation of the adaptive selection rule: RevIN, the original
//! rule, R2IN and the reversed rule, on every dataset and horizon.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{RuleKind, SelectionRule};
use crate::error::Result;
use crate::harness::pipeline::run_grid;
use crate::harness::{Arm, EvalReport, ExperimentConfig};
use crate::normalize::StrategyKind;
use crate::par::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub tau: f64,
    pub report: EvalReport,
}

impl AblationReport {
    /// Test MSE of one arm on one cell.
    pub fn mse(&self, dataset: &str, arm: &str, horizon: usize) -> Option<f64> {
        self.report.row(dataset, arm, horizon).map(|r| r.mse)
    }
}

pub fn ablation_arms(tau: f64) -> Vec<Arm> {
    vec![
        Arm::from_strategy(StrategyKind::RevIN, SelectionRule::default()),
        Arm::adaptive(SelectionRule { kind: RuleKind::AinOriginal, tau }),
        Arm::from_strategy(StrategyKind::R2IN, SelectionRule::default()),
        Arm::adaptive(SelectionRule { kind: RuleKind::AinReversed, tau }),
    ]
}

/// Runs the four arms with the config's datasets, horizons and `selection.tau`.
/// `strategies` and `selection.kind` are ignored.
pub fn run_ablation(cfg: &ExperimentConfig, exec: Execution) -> Result<AblationReport> {
    let tau = cfg.selection.tau;
    Ok(AblationReport { tau, report: run_grid(cfg, &ablation_arms(tau), exec)? })
}
