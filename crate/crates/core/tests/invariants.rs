// SPDX-License-Identifier: MIT OR Apache-2.0

use rinorm::harness::{
    evaluate, run_benchmark, windowize, DatasetConfig, ExperimentConfig, ProfileSection, ScenarioKind, ScenarioSpec,
    SeriesMatrix, SplitFractions,
};
use rinorm::model::{self, predict, ModelConfig};
use rinorm::{NormConfig, StrategyKind, TrainConfig};

fn config(strategies: Vec<StrategyKind>) -> ExperimentConfig {
    let mut outlier = ScenarioSpec::new(ScenarioKind::OutlierNoise, 1500, 4);
    outlier.channels = 2;
    ExperimentConfig {
        datasets: vec![
            DatasetConfig { name: "outlier".into(), path: None, scenario: Some(outlier) },
            DatasetConfig {
                name: "skewed".into(),
                path: None,
                scenario: Some(ScenarioSpec::new(ScenarioKind::Skewed, 1500, 5)),
            },
        ],
        lookback: 96,
        horizons: vec![24, 48],
        strategies,
        train_stride: 4,
        eval_stride: 4,
        seed: Some(9),
        profile: ProfileSection { window_length: None, stride: 8 },
        ..ExperimentConfig::default()
    }
}

#[test]
fn identity_is_the_raw_model() {
    let series = ScenarioSpec::new(ScenarioKind::HeavyTailed, 800, 2).generate().unwrap();
    let (train, _, test) = SplitFractions::default().ranges(series.len());
    let train = windowize(&series.slice_rows(train), 48, 12, 2).unwrap();
    let test = windowize(&series.slice_rows(test), 48, 12, 2).unwrap();
    let norm = NormConfig::default();
    let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let (m, _) = model::train(&train, &[], StrategyKind::Identity, &norm, &ModelConfig::default(), &cfg).unwrap();

    let (mut sq, mut n) = (0.0, 0usize);
    for inst in &test {
        let raw = m.forward(inst.lookback.view()).unwrap();
        let piped = predict(&m, StrategyKind::Identity, inst.lookback.view(), &norm).unwrap();
        assert_eq!(raw, piped);
        let diff = &raw - inst.target.as_ref().unwrap();
        sq += diff.iter().map(|d| d * d).sum::<f64>();
        n += diff.len();
    }
    let metrics = evaluate(&m, StrategyKind::Identity, &test, &norm).unwrap();
    assert_eq!(metrics.mse, sq / n as f64);
}

#[test]
fn ain_matches_its_static_choice() {
    let report = run_benchmark(&config(vec![StrategyKind::RevIN, StrategyKind::R2INPlus, StrategyKind::AIN])).unwrap();
    assert!(report.failures.is_empty());
    for row in report.rows.iter().filter(|r| r.strategy == "ain") {
        let twin = report.row(&row.dataset, row.resolved.as_str(), row.horizon).unwrap();
        assert_eq!((row.mse, row.mae), (twin.mse, twin.mae), "{row:?}");
    }
}

#[test]
fn splits_never_share_rows() {
    // the value at each row is its own index
    let n = 997;
    let series = SeriesMatrix::from_columns(vec!["t".into()], vec![(0..n).map(|i| i as f64).collect()]).unwrap();
    let (train, val, test) = SplitFractions::default().ranges(n);
    assert_eq!((train.start, train.end == val.start, val.end == test.start, test.end), (0, true, true, n));
    let bounds = |r: std::ops::Range<usize>| {
        let windows = windowize(&series.slice_rows(r.clone()), 24, 8, 1).unwrap();
        for w in &windows {
            let all = w.lookback.iter().chain(w.target.as_ref().unwrap().iter());
            assert!(all.clone().all(|&v| v >= r.start as f64 && v < r.end as f64));
        }
        windows.len()
    };
    assert!(bounds(train) > 0 && bounds(val) > 0 && bounds(test) > 0);
}

#[test]
fn three_strategy_grid_is_complete() {
    let strategies = vec![StrategyKind::Identity, StrategyKind::RevIN, StrategyKind::R2IN];
    let report = run_benchmark(&config(strategies)).unwrap();
    assert_eq!(report.rows.len(), 2 * 2 * 3);
    assert!(report.rows.iter().all(|r| r.mse.is_finite() && r.mae.is_finite()));
    let ranks: f64 = report.ranks.iter().map(|r| r.average_rank).sum();
    assert!((ranks - 6.0).abs() < 1e-12, "{:?}", report.ranks);
}

#[test]
fn robust_beats_revin_on_outliers() {
    let mut spec = ScenarioSpec::new(ScenarioKind::OutlierNoise, 6000, 7);
    spec.channels = 8;
    let cfg = ExperimentConfig {
        datasets: vec![DatasetConfig { name: "o".into(), path: None, scenario: Some(spec) }],
        lookback: 336,
        horizons: vec![96],
        strategies: vec![StrategyKind::RevIN, StrategyKind::R2IN],
        train_stride: 2,
        seed: Some(7),
        profile: ProfileSection { window_length: None, stride: 24 },
        ..ExperimentConfig::default()
    };
    let report = run_benchmark(&cfg).unwrap();
    let mse = |s| report.row("o", s, 96).unwrap().mse;
    assert!(mse("r2in") < mse("revin"), "{:?}", report.rows);
}

#[test]
fn shipped_config_is_valid() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.datasets.len(), 4);
    assert_eq!(cfg.strategies, StrategyKind::ALL.to_vec());
}
