// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Instance;
use crate::model::{self, LinearForecaster};
use crate::normalize::{NormConfig, StrategyKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Original-scale MSE and MAE over every element of every test instance.
pub fn evaluate(model: &LinearForecaster, strategy: StrategyKind, test: &[Instance], norm: &NormConfig) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
    for inst in test {
        let (s, a, k) = model::error_sums(model, strategy, inst, norm)?;
        sq += s;
        abs += a;
        n += k;
    }
    Ok(Metrics { mse: sq / n as f64, mae: abs / n as f64 })
}

/// One (dataset, strategy, horizon) result row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub dataset: String,
    /// Report label, e.g. `revin` or `ain`.
    pub strategy: String,
    /// Concrete strategy actually fitted.
    pub resolved: StrategyKind,
    pub horizon: usize,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub strategy: String,
    /// Mean over every (dataset, horizon, metric) cell.
    pub average_rank: f64,
    pub mse_rank: f64,
    pub mae_rank: f64,
}

/// Ranks `values` ascending; tied values share the mean of their ranks.
pub fn mean_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Average rank per strategy over all (dataset, horizon, metric) cells.
pub fn average_rank(rows: &[EvalRow]) -> Result<Vec<RankEntry>> {
    let mut strategies: Vec<&str> = Vec::new();
    let mut cells: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        if !strategies.contains(&r.strategy.as_str()) {
            strategies.push(&r.strategy);
        }
        if !cells.contains(&(r.dataset.as_str(), r.horizon)) {
            cells.push((&r.dataset, r.horizon));
        }
    }
    if strategies.is_empty() {
        return Err(Error::IncompleteGrid("no rows".into()));
    }
    let k = strategies.len();
    let mut mse_sum = vec![0.0; k];
    let mut mae_sum = vec![0.0; k];
    for &(dataset, horizon) in &cells {
        let mut mse = Vec::with_capacity(k);
        let mut mae = Vec::with_capacity(k);
        for s in &strategies {
            let mut found = rows.iter().filter(|r| r.dataset == dataset && r.horizon == horizon && r.strategy == *s);
            let row = found.next().ok_or_else(|| {
                Error::IncompleteGrid(format!("missing strategy `{s}` for dataset `{dataset}`, horizon {horizon}"))
            })?;
            if found.next().is_some() {
                return Err(Error::IncompleteGrid(format!("duplicate strategy `{s}` for dataset `{dataset}`, horizon {horizon}")));
            }
            mse.push(row.mse);
            mae.push(row.mae);
        }
        for (acc, r) in mse_sum.iter_mut().zip(mean_ranks(&mse)) {
            *acc += r;
        }
        for (acc, r) in mae_sum.iter_mut().zip(mean_ranks(&mae)) {
            *acc += r;
        }
    }
    let n = cells.len() as f64;
    Ok(strategies
        .iter()
        .enumerate()
        .map(|(i, s)| RankEntry {
            strategy: s.to_string(),
            average_rank: (mse_sum[i] + mae_sum[i]) / (2.0 * n),
            mse_rank: mse_sum[i] / n,
            mae_rank: mae_sum[i] / n,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn row(dataset: &str, strategy: &str, horizon: usize, mse: f64, mae: f64) -> EvalRow {
        EvalRow { dataset: dataset.into(), strategy: strategy.into(), resolved: StrategyKind::Identity, horizon, mse, mae }
    }

    #[test]
    fn mean_ranks_ties() {
        assert_eq!(mean_ranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(mean_ranks(&[1.0, 1.0]), vec![1.5, 1.5]);
        assert_eq!(mean_ranks(&[2.0, 1.0, 2.0, 0.5]), vec![3.5, 2.0, 3.5, 1.0]);
    }

    #[test]
    fn best_everywhere_ranks_first() {
        let rows = vec![row("a", "x", 96, 1.0, 1.0), row("a", "y", 96, 2.0, 2.0), row("b", "x", 96, 0.1, 0.1), row("b", "y", 96, 0.2, 0.3)];
        let ranks = average_rank(&rows).unwrap();
        assert_eq!(ranks[0].average_rank, 1.0);
        assert_eq!(ranks[1].average_rank, 2.0);
    }

    #[test]
    fn exact_ties_share_rank() {
        let rows = vec![row("a", "x", 96, 1.0, 1.0), row("a", "y", 96, 1.0, 1.0)];
        let ranks = average_rank(&rows).unwrap();
        assert!(ranks.iter().all(|r| r.average_rank == 1.5));
    }

    #[test]
    fn three_strategies_two_cells() {
        // cell 1 mse order: x<y<z, mae: y<x<z; cell 2 mse: z<x=y, mae: x<y<z
        let rows = vec![
            row("a", "x", 96, 1.0, 2.0),
            row("a", "y", 96, 2.0, 1.0),
            row("a", "z", 96, 3.0, 3.0),
            row("a", "x", 192, 5.0, 1.0),
            row("a", "y", 192, 5.0, 2.0),
            row("a", "z", 192, 4.0, 3.0),
        ];
        let r = average_rank(&rows).unwrap();
        // x: mse 1, 2.5; mae 2, 1 -> 6.5 / 4
        assert_eq!(r[0].average_rank, 6.5 / 4.0);
        // y: mse 2, 2.5; mae 1, 2 -> 7.5 / 4
        assert_eq!(r[1].average_rank, 7.5 / 4.0);
        // z: mse 3, 1; mae 3, 3 -> 10 / 4
        assert_eq!(r[2].average_rank, 10.0 / 4.0);
        assert_eq!(r[0].mse_rank, 1.75);
    }

    #[test]
    fn incomplete_grid_is_rejected() {
        let rows = vec![row("a", "x", 96, 1.0, 1.0), row("a", "y", 96, 2.0, 2.0), row("b", "x", 96, 1.0, 1.0)];
        assert!(matches!(average_rank(&rows), Err(Error::IncompleteGrid(_))));
        assert!(average_rank(&[]).is_err());
    }

    fn constant_instance(value: f64, target: f64) -> Instance {
        Instance::new(Array2::from_elem((4, 1), value), Some(Array2::from_elem((2, 1), target)))
    }

    #[test]
    fn evaluate_examples() {
        let cfg = ModelConfig { kernel_size: 3, ..ModelConfig::default() };
        let zero = LinearForecaster::zeros(4, 2, 1, &cfg).unwrap();
        let norm = NormConfig::default();
        let m = evaluate(&zero, StrategyKind::Identity, &[constant_instance(0.0, 1.0)], &norm).unwrap();
        assert_eq!((m.mse, m.mae), (1.0, 1.0));

        // RevIN on a constant window forecasts the location exactly
        let m = evaluate(&zero, StrategyKind::RevIN, &[constant_instance(3.0, 3.0)], &norm).unwrap();
        assert_eq!((m.mse, m.mae), (0.0, 0.0));

        // two instances by hand: forecasts are 0, errors {1,1} and {2,-3}
        let a = constant_instance(0.0, 1.0);
        let b = Instance::new(Array2::zeros((4, 1)), Some(Array2::from_shape_vec((2, 1), vec![2.0, -3.0]).unwrap()));
        let m = evaluate(&zero, StrategyKind::Identity, &[a, b], &norm).unwrap();
        assert_eq!(m.mse, (1.0 + 1.0 + 4.0 + 9.0) / 4.0);
        assert_eq!(m.mae, (1.0 + 1.0 + 2.0 + 3.0) / 4.0);

        assert!(matches!(evaluate(&zero, StrategyKind::Identity, &[], &norm), Err(Error::EmptyDataset)));
    }

    proptest! {
        #[test]
        fn rank_sums_per_cell(values in prop::collection::vec(0u8..5, 1..8)) {
            let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
            let k = v.len() as f64;
            let total: f64 = mean_ranks(&v).iter().sum();
            prop_assert_eq!(total, k * (k + 1.0) / 2.0);
        }
    }
}
