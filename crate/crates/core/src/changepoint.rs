// SPDX-License-Identifier: MIT OR Apache-2.0

//! Optimal penalized segmentation (PELT) under an L2 mean-shift cost, and the
//! Change Point Risk metric built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::stats::{self, NORMAL_CONSISTENCY};

/// Smallest penalty the robust default may produce.
const MIN_PENALTY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    #[default]
    L2MeanShift,
}

/// Per-breakpoint penalty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `2 σ² log(n)` with σ estimated from the MAD of first differences.
    #[default]
    RobustBic,
    Fixed(f64),
}

impl Penalty {
    /// Resolves the penalty for a concrete series.
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Penalty::Fixed(v) => v,
            Penalty::RobustBic => {
                let n = x.len();
                if n < 3 {
                    return MIN_PENALTY;
                }
                let diffs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
                let (_, m) = stats::median_and_mad(&diffs);
                // differencing doubles the noise variance
                let sigma = NORMAL_CONSISTENCY * m / std::f64::consts::SQRT_2;
                (2.0 * sigma * sigma * (n as f64).ln()).max(MIN_PENALTY)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeltConfig {
    pub penalty: Penalty,
    pub min_segment_length: usize,
    pub cost_kind: CostKind,
}

impl Default for PeltConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::RobustBic,
            min_segment_length: 2,
            cost_kind: CostKind::L2MeanShift,
        }
    }
}

impl PeltConfig {
    pub fn with_penalty(penalty: f64) -> Self {
        Self {
            penalty: Penalty::Fixed(penalty),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_segment_length < 1 {
            return Err(Error::InvalidParams("min_segment_length must be >= 1".into()));
        }
        if let Penalty::Fixed(p) = self.penalty {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidParams(format!("penalty must be finite and >= 0, got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// First index of each new segment, strictly increasing.
    pub breakpoints: Vec<usize>,
    /// Sum of segment costs plus one penalty per breakpoint.
    pub total_cost: f64,
}

/// O(1) L2 segment cost from prefix sums of the centered series.
#[derive(Clone, Debug)]
pub struct L2Cost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl L2Cost {
    pub fn new(x: &[f64]) -> Self {
        let center = if x.is_empty() { 0.0 } else { x.iter().sum::<f64>() / x.len() as f64 };
        let mut sum = Vec::with_capacity(x.len() + 1);
        let mut sum_sq = Vec::with_capacity(x.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for v in x {
            let c = v - center;
            s += c;
            q += c * c;
            sum.push(s);
            sum_sq.push(q);
        }
        Self { sum, sum_sq }
    }

    pub fn len(&self) -> usize {
        self.sum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cost of `x[start..end]`; caller guarantees `start < end <= len`.
    #[inline]
    pub fn cost(&self, start: usize, end: usize) -> f64 {
        let n = (end - start) as f64;
        let s = self.sum[end] - self.sum[start];
        let q = self.sum_sq[end] - self.sum_sq[start];
        (q - s * s / n).max(0.0)
    }
}

/// `Σ (x_t − mean)²` over `x[start..end]`.
pub fn segment_cost_l2(x: &[f64], start: usize, end: usize) -> Result<f64> {
    if start >= end || end > x.len() {
        return Err(Error::IndexOutOfRange { start, end, len: x.len() });
    }
    Ok(L2Cost::new(x).cost(start, end))
}

/// Exact penalized segmentation by PELT.
///
/// Series too short to hold two segments yield an empty segmentation.
pub fn pelt(x: &[f64], config: &PeltConfig) -> Result<Segmentation> {
    config.validate()?;
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    let n = x.len();
    let m = config.min_segment_length;
    let cost = L2Cost::new(x);
    if n < 2 * m {
        let total_cost = if n == 0 { 0.0 } else { cost.cost(0, n) };
        return Ok(Segmentation { breakpoints: Vec::new(), total_cost });
    }
    let beta = config.penalty.value(x);

    // best[t]: optimal penalized cost of x[..t], minus one penalty
    let mut best = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    best[0] = -beta;
    // (candidate, time from which it is pruned)
    let mut candidates: Vec<(usize, usize)> = vec![(0, usize::MAX)];

    for t in m..=n {
        if t >= 2 * m {
            candidates.push((t - m, usize::MAX));
        }
        candidates.retain(|&(_, pruned_at)| pruned_at > t);

        let mut best_value = f64::INFINITY;
        let mut best_start = 0;
        for &(s, _) in &candidates {
            let v = best[s] + cost.cost(s, t) + beta;
            if v < best_value {
                best_value = v;
                best_start = s;
            }
        }
        best[t] = best_value;
        last[t] = best_start;

        // s can only lose to t once a segment starting at t is admissible
        for (s, pruned_at) in candidates.iter_mut() {
            if *pruned_at == usize::MAX && best[*s] + cost.cost(*s, t) > best_value {
                *pruned_at = t + m;
            }
        }
    }

    let mut breakpoints = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        if s > 0 {
            breakpoints.push(s);
        }
        t = s;
    }
    breakpoints.reverse();
    Ok(Segmentation { breakpoints, total_cost: best[n] })
}

/// Recomputes the penalized cost of a given segmentation.
pub fn segmentation_cost(x: &[f64], breakpoints: &[usize], penalty: f64) -> f64 {
    let cost = L2Cost::new(x);
    let mut bounds = Vec::with_capacity(breakpoints.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(breakpoints);
    bounds.push(x.len());
    bounds.windows(2).map(|w| cost.cost(w[0], w[1])).sum::<f64>() + penalty * breakpoints.len() as f64
}

/// Whether any breakpoint falls in the final quartile `[ceil(3L/4), L)`.
pub fn flags_last_quartile(breakpoints: &[usize], window_length: usize) -> bool {
    let start = (3 * window_length).div_ceil(4);
    breakpoints.iter().any(|&b| b >= start && b < window_length)
}

/// Fraction of sliding windows whose last quartile holds a change point.
pub fn change_point_risk(
    series: &[f64],
    window_length: usize,
    stride: usize,
    config: &PeltConfig,
) -> Result<f64> {
    change_point_risk_with(Execution::default(), series, window_length, stride, config)
}

pub fn change_point_risk_with(
    exec: Execution,
    series: &[f64],
    window_length: usize,
    stride: usize,
    config: &PeltConfig,
) -> Result<f64> {
    let flags = window_flags(exec, series, window_length, stride, config)?;
    let flagged = flags.iter().filter(|&&f| f).count();
    Ok(flagged as f64 / flags.len() as f64)
}

/// Per-window last-quartile flags, in window order.
pub fn window_flags(
    exec: Execution,
    series: &[f64],
    window_length: usize,
    stride: usize,
    config: &PeltConfig,
) -> Result<Vec<bool>> {
    config.validate()?;
    if stride == 0 {
        return Err(Error::InvalidParams("stride must be >= 1".into()));
    }
    if window_length == 0 || series.len() < window_length {
        return Err(Error::InputTooShort { needed: window_length.max(1), got: series.len() });
    }
    let count = (series.len() - window_length) / stride + 1;
    exec.map(count, |w| {
        let start = w * stride;
        let window = &series[start..start + window_length];
        pelt(window, config).map(|seg| flags_last_quartile(&seg.breakpoints, window_length))
    })
    .into_iter()
    .collect()
}
