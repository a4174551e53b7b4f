// SPDX-License-Identifier: MIT OR Apache-2.0

//! DLinear: a moving-average decomposition followed by two linear maps from
//! the lookback to the horizon, trained with mini-batch gradient descent on
//! MSE in the normalized space.

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Instance;
use crate::normalize::{self, NormConfig, StrategyKind};

/// Splits a window into a replicate-padded moving-average trend and the remainder.
pub fn decompose(window: &[f64], kernel_size: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = window.len();
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    if kernel_size.is_multiple_of(2) || kernel_size > 2 * len - 1 {
        return Err(Error::InvalidKernel { kernel: kernel_size, len });
    }
    let half = (kernel_size / 2) as isize;
    let k = kernel_size as f64;
    let last = len as isize - 1;
    let mut trend = Vec::with_capacity(len);
    for t in 0..len as isize {
        let mut acc = 0.0;
        for j in t - half..=t + half {
            acc += window[j.clamp(0, last) as usize];
        }
        trend.push(acc / k);
    }
    let remainder = window.iter().zip(&trend).map(|(x, tr)| x - tr).collect();
    Ok((trend, remainder))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// One map applied to every channel independently.
    #[default]
    SharedAcrossChannels,
    /// A separate map per channel.
    PerChannel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            early_stop_patience: 3,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParams(
                "learning_rate, epochs and batch_size must be positive".into(),
            ));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::InvalidParams("Adam requires beta in [0, 1) and eps > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kernel_size: usize,
    pub channel_mode: ChannelMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kernel_size: 25, channel_mode: ChannelMode::SharedAcrossChannels }
    }
}

/// Trend and remainder maps for one channel group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub w_trend: Array2<f64>,
    pub b_trend: Array1<f64>,
    pub w_remainder: Array2<f64>,
    pub b_remainder: Array1<f64>,
}

impl LinearHead {
    fn zeros(horizon: usize, lookback: usize) -> Self {
        Self {
            w_trend: Array2::zeros((horizon, lookback)),
            b_trend: Array1::zeros(horizon),
            w_remainder: Array2::zeros((horizon, lookback)),
            b_remainder: Array1::zeros(horizon),
        }
    }

    fn tensors(&self) -> [&[f64]; 4] {
        [
            self.w_trend.as_slice().expect("standard layout"),
            self.b_trend.as_slice().expect("standard layout"),
            self.w_remainder.as_slice().expect("standard layout"),
            self.b_remainder.as_slice().expect("standard layout"),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w_trend.as_slice_mut().expect("standard layout"),
            self.b_trend.as_slice_mut().expect("standard layout"),
            self.w_remainder.as_slice_mut().expect("standard layout"),
            self.b_remainder.as_slice_mut().expect("standard layout"),
        ]
    }

    fn predict(&self, trend: ArrayView1<'_, f64>, remainder: ArrayView1<'_, f64>) -> Array1<f64> {
        self.w_trend.dot(&trend) + &self.b_trend + self.w_remainder.dot(&remainder) + &self.b_remainder
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearForecaster {
    pub lookback: usize,
    pub horizon: usize,
    pub channels: usize,
    pub kernel_size: usize,
    pub channel_mode: ChannelMode,
    /// One head when shared, otherwise one per channel.
    pub heads: Vec<LinearHead>,
}

/// Gradient of the loss, shaped like the model's heads.
pub type Gradient = Vec<LinearHead>;

const CHECKPOINT_FORMAT: &str = "rinorm-dlinear-v1";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    model: LinearForecaster,
}

impl LinearForecaster {
    /// Zero-initialised model.
    pub fn zeros(lookback: usize, horizon: usize, channels: usize, cfg: &ModelConfig) -> Result<Self> {
        if lookback == 0 || horizon == 0 || channels == 0 {
            return Err(Error::InvalidParams("lookback, horizon and channels must be >= 1".into()));
        }
        if cfg.kernel_size.is_multiple_of(2) || cfg.kernel_size > 2 * lookback - 1 {
            return Err(Error::InvalidKernel { kernel: cfg.kernel_size, len: lookback });
        }
        let n_heads = match cfg.channel_mode {
            ChannelMode::SharedAcrossChannels => 1,
            ChannelMode::PerChannel => channels,
        };
        Ok(Self {
            lookback,
            horizon,
            channels,
            kernel_size: cfg.kernel_size,
            channel_mode: cfg.channel_mode,
            heads: vec![LinearHead::zeros(horizon, lookback); n_heads],
        })
    }

    /// Weights uniform in `[-1/L, 1/L]`, biases zero.
    pub fn init<R: Rng>(lookback: usize, horizon: usize, channels: usize, cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(lookback, horizon, channels, cfg)?;
        let bound = 1.0 / lookback as f64;
        for head in &mut model.heads {
            head.w_trend.mapv_inplace(|_| rng.random_range(-bound..=bound));
            head.w_remainder.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(model)
    }

    fn head_for(&self, channel: usize) -> usize {
        match self.channel_mode {
            ChannelMode::SharedAcrossChannels => 0,
            ChannelMode::PerChannel => channel,
        }
    }

    /// Maps a normalized `L × C` lookback to an `H × C` normalized forecast.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.dim() != (self.lookback, self.channels) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.lookback, self.channels),
                got: format!("{}x{}", x.nrows(), x.ncols()),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        let mut out = Array2::zeros((self.horizon, self.channels));
        let mut column = Vec::with_capacity(self.lookback);
        for c in 0..self.channels {
            column.clear();
            column.extend(x.column(c).iter().copied());
            let (trend, remainder) = decompose(&column, self.kernel_size)?;
            let y = self.heads[self.head_for(c)].predict(ArrayView1::from(&trend), ArrayView1::from(&remainder));
            out.column_mut(c).assign(&y);
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.heads.len() * 2 * self.horizon * (self.lookback + 1)
    }

    /// All parameters flattened head by head (w_trend, b_trend, w_remainder, b_remainder).
    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.heads)
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.parameter_count()),
                got: format!("{} parameters", values.len()),
            });
        }
        let mut offset = 0;
        for head in &mut self.heads {
            for t in head.tensors_mut() {
                t.copy_from_slice(&values[offset..offset + t.len()]);
                offset += t.len();
            }
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.heads.iter().all(|h| h.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())))
    }

    /// Mean squared error and its gradient over already-normalized pairs.
    pub fn loss_and_gradient(&self, pairs: &[(Array2<f64>, Array2<f64>)]) -> Result<(f64, Gradient)> {
        let prepared = Prepared::from_normalized(self, pairs.iter().map(|(x, y)| (x.view(), y.view())))?;
        let all: Vec<usize> = (0..prepared.instances).collect();
        Ok(prepared.loss_and_gradient(self, &all, true))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let ck = Checkpoint { format: CHECKPOINT_FORMAT.to_string(), model: self.clone() };
        serde_json::to_writer(std::io::BufWriter::new(file), &ck)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|_| Error::FileNotFound(path.to_path_buf()))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Config(format!("unsupported checkpoint format `{}`", ck.format)));
        }
        Ok(ck.model)
    }
}

fn flatten(heads: &[LinearHead]) -> Vec<f64> {
    heads.iter().flat_map(|h| h.tensors().into_iter().flatten().copied().collect::<Vec<_>>()).collect()
}

pub fn flatten_gradient(grad: &Gradient) -> Vec<f64> {
    flatten(grad)
}

/// Decomposed, normalized design matrices, one block per head.
struct Prepared {
    instances: usize,
    /// Per head: rows of (trend, remainder, target), each row tagged by instance.
    trend: Vec<Array2<f64>>,
    remainder: Vec<Array2<f64>>,
    target: Vec<Array2<f64>>,
    /// Per head, per instance: row indices owned by that instance.
    rows: Vec<Vec<Vec<usize>>>,
}

impl Prepared {
    fn from_normalized<'a, I>(model: &LinearForecaster, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ArrayView2<'a, f64>, ArrayView2<'a, f64>)>,
    {
        let n_heads = model.heads.len();
        let (l, h) = (model.lookback, model.horizon);
        let mut trend: Vec<Vec<f64>> = vec![Vec::new(); n_heads];
        let mut remainder: Vec<Vec<f64>> = vec![Vec::new(); n_heads];
        let mut target: Vec<Vec<f64>> = vec![Vec::new(); n_heads];
        let mut rows: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n_heads];
        let mut counts = vec![0usize; n_heads];
        let mut instances = 0;
        let mut column = Vec::with_capacity(l);
        for (x, y) in pairs {
            if x.dim() != (l, model.channels) || y.dim() != (h, model.channels) {
                return Err(Error::ShapeMismatch {
                    expected: format!("lookback {l}x{c}, target {h}x{c}", c = model.channels),
                    got: format!("lookback {}x{}, target {}x{}", x.nrows(), x.ncols(), y.nrows(), y.ncols()),
                });
            }
            for per_head in rows.iter_mut() {
                per_head.push(Vec::new());
            }
            for c in 0..model.channels {
                let hd = model.head_for(c);
                column.clear();
                column.extend(x.column(c).iter().copied());
                let (tr, rem) = decompose(&column, model.kernel_size)?;
                trend[hd].extend_from_slice(&tr);
                remainder[hd].extend_from_slice(&rem);
                target[hd].extend(y.column(c).iter().copied());
                rows[hd][instances].push(counts[hd]);
                counts[hd] += 1;
            }
            instances += 1;
        }
        if instances == 0 {
            return Err(Error::EmptyDataset);
        }
        let to_matrix = |v: Vec<f64>, n: usize, w: usize| Array2::from_shape_vec((n, w), v).expect("row-major block");
        Ok(Self {
            instances,
            trend: trend.into_iter().zip(&counts).map(|(v, &n)| to_matrix(v, n, l)).collect(),
            remainder: remainder.into_iter().zip(&counts).map(|(v, &n)| to_matrix(v, n, l)).collect(),
            target: target.into_iter().zip(&counts).map(|(v, &n)| to_matrix(v, n, h)).collect(),
            rows,
        })
    }

    fn batch_rows(&self, head: usize, batch: &[usize]) -> Vec<usize> {
        batch.iter().flat_map(|&i| self.rows[head][i].iter().copied()).collect()
    }

    /// Batch MSE; the gradient is only formed when `with_grad`.
    fn loss_and_gradient(&self, model: &LinearForecaster, batch: &[usize], with_grad: bool) -> (f64, Gradient) {
        let mut blocks = Vec::with_capacity(model.heads.len());
        let mut elements = 0usize;
        let mut sq = 0.0;
        for (hd, head) in model.heads.iter().enumerate() {
            let idx = self.batch_rows(hd, batch);
            if idx.is_empty() {
                blocks.push(None);
                continue;
            }
            let tr = self.trend[hd].select(Axis(0), &idx);
            let rem = self.remainder[hd].select(Axis(0), &idx);
            let mut err = tr.dot(&head.w_trend.t()) + &head.b_trend + rem.dot(&head.w_remainder.t()) + &head.b_remainder;
            err -= &self.target[hd].select(Axis(0), &idx);
            sq += err.iter().map(|e| e * e).sum::<f64>();
            elements += err.len();
            blocks.push(Some((tr, rem, err)));
        }
        let loss = sq / elements as f64;
        let mut grad = Vec::with_capacity(model.heads.len());
        if with_grad {
            let scale = 2.0 / elements as f64;
            for block in blocks {
                let mut g = LinearHead::zeros(model.horizon, model.lookback);
                if let Some((tr, rem, mut err)) = block {
                    err *= scale;
                    g.w_trend = err.t().dot(&tr);
                    g.w_remainder = err.t().dot(&rem);
                    g.b_trend = err.sum_axis(Axis(0));
                    g.b_remainder = g.b_trend.clone();
                }
                grad.push(g);
            }
        }
        (loss, grad)
    }

    fn full_loss(&self, model: &LinearForecaster) -> f64 {
        let all: Vec<usize> = (0..self.instances).collect();
        // chunked to bound memory on large sets
        let mut sq = 0.0;
        let mut elements = 0usize;
        for chunk in all.chunks(256) {
            let (loss, _) = self.loss_and_gradient(model, chunk, false);
            let n: usize = (0..model.heads.len()).map(|h| self.batch_rows(h, chunk).len()).sum::<usize>() * model.horizon;
            sq += loss * n as f64;
            elements += n;
        }
        sq / elements as f64
    }
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        let (m, v) = match kind {
            Optimizer::Sgd => (Vec::new(), Vec::new()),
            Optimizer::Adam { .. } => (vec![0.0; n], vec![0.0; n]),
        };
        Self { kind, lr, step: 0, m, v }
    }

    fn apply(&mut self, model: &mut LinearForecaster, grad: &Gradient) {
        self.step += 1;
        let mut offset = 0;
        for (head, g) in model.heads.iter_mut().zip(grad) {
            for (p, gt) in head.tensors_mut().into_iter().zip(g.tensors()) {
                match self.kind {
                    Optimizer::Sgd => {
                        for (w, d) in p.iter_mut().zip(gt) {
                            *w -= self.lr * d;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, eps } => {
                        let c1 = 1.0 - beta1.powi(self.step);
                        let c2 = 1.0 - beta2.powi(self.step);
                        let m = &mut self.m[offset..offset + p.len()];
                        let v = &mut self.v[offset..offset + p.len()];
                        for (((w, d), mi), vi) in p.iter_mut().zip(gt).zip(m).zip(v) {
                            *mi = beta1 * *mi + (1.0 - beta1) * d;
                            *vi = beta2 * *vi + (1.0 - beta2) * d * d;
                            *w -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                        }
                    }
                }
                offset += p.len();
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full-pass training loss after the epoch's updates.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// One JSON object per epoch.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.epochs {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Normalizes each instance with statistics fitted on its own lookback and
/// applies the same statistics to its target.
fn normalized_pairs(instances: &[Instance], strategy: StrategyKind, norm: &NormConfig) -> Result<Vec<(Array2<f64>, Array2<f64>)>> {
    instances
        .iter()
        .map(|inst| {
            let target = inst.target.as_ref().ok_or_else(|| {
                Error::InvalidParams("training instances need a target".into())
            })?;
            let stats = normalize::fit(strategy, inst.lookback.view(), norm)?;
            Ok((normalize::normalize(inst.lookback.view(), &stats)?, normalize::normalize(target.view(), &stats)?))
        })
        .collect()
}

/// Trains a forecaster. `validation` drives early stopping; the parameters of
/// the best validation epoch are returned.
pub fn train(
    instances: &[Instance],
    validation: &[Instance],
    strategy: StrategyKind,
    norm: &NormConfig,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(LinearForecaster, TrainingLog)> {
    cfg.validate()?;
    if strategy == StrategyKind::AIN {
        return Err(Error::StrategyUnresolved);
    }
    let first = instances.first().ok_or(Error::EmptyDataset)?;
    let (lookback, channels) = first.lookback.dim();
    let horizon = first.horizon();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = LinearForecaster::init(lookback, horizon, channels, model_cfg, &mut rng)?;

    let pairs = normalized_pairs(instances, strategy, norm)?;
    let train_set = Prepared::from_normalized(&model, pairs.iter().map(|(x, y)| (x.view(), y.view())))?;
    drop(pairs);
    let val_set = if validation.is_empty() {
        None
    } else {
        let pairs = normalized_pairs(validation, strategy, norm)?;
        Some(Prepared::from_normalized(&model, pairs.iter().map(|(x, y)| (x.view(), y.view())))?)
    };

    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, model.parameter_count());
    let mut order: Vec<usize> = (0..train_set.instances).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, LinearForecaster)> = None;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = train_set.loss_and_gradient(&model, batch, true);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_index });
            }
            opt.apply(&mut model, &grad);
            if !model.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_index });
            }
        }
        let train_loss = train_set.full_loss(&model);
        let val_loss = val_set.as_ref().map(|v| v.full_loss(&model));
        log.epochs.push(EpochRecord { epoch, train_loss, val_loss });

        if let Some(vl) = val_loss {
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: 0 });
            }
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, model.clone()));
                log.best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience {
                    log.stopped_early = true;
                    break;
                }
            }
        } else {
            log.best_epoch = epoch;
        }
    }
    let model = best.map(|(_, m)| m).unwrap_or(model);
    Ok((model, log))
}

/// Full pipeline forecast for one lookback in the original scale.
pub fn predict(model: &LinearForecaster, strategy: StrategyKind, lookback: ArrayView2<'_, f64>, norm: &NormConfig) -> Result<Array2<f64>> {
    let stats = normalize::fit(strategy, lookback, norm)?;
    let z = normalize::normalize(lookback, &stats)?;
    let y = model.forward(z.view())?;
    normalize::denormalize(y.view(), &stats)
}

/// Squared and absolute error sums of the full pipeline against a target.
pub(crate) fn error_sums(model: &LinearForecaster, strategy: StrategyKind, inst: &Instance, norm: &NormConfig) -> Result<(f64, f64, usize)> {
    let target = inst.target.as_ref().ok_or(Error::EmptyDataset)?;
    let pred = predict(model, strategy, inst.lookback.view(), norm)?;
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", pred.dim()),
            got: format!("{:?}", target.dim()),
        });
    }
    let diff = &pred - target;
    Ok((diff.iter().map(|d| d * d).sum(), diff.iter().map(|d| d.abs()).sum(), diff.len()))
}

/// Window slice helper for tests and the case study.
pub fn window_of(values: ArrayView2<'_, f64>, start: usize, len: usize) -> Array2<f64> {
    values.slice(s![start..start + len, ..]).to_owned()
}
