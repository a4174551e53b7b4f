// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic scenarios, one per failure mode of instance normalization, and
//! single-point outlier injection.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Instance, SeriesMatrix};
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Seasonal load that idles at exactly zero, with sparse spikes and
    /// occasional multi-day outages.
    OutlierNoise,
    /// Level and variance shift at a controlled index.
    StructuralBreak,
    /// Log-normal innovations around a fixed level.
    Skewed,
    /// Student-t innovations with few degrees of freedom.
    HeavyTailed,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::OutlierNoise => "outlier_noise",
            ScenarioKind::StructuralBreak => "structural_break",
            ScenarioKind::Skewed => "skewed",
            ScenarioKind::HeavyTailed => "heavy_tailed",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "outlier_noise" | "outlier" | "outliers" => Ok(ScenarioKind::OutlierNoise),
            "structural_break" | "break" => Ok(ScenarioKind::StructuralBreak),
            "skewed" | "skew" => Ok(ScenarioKind::Skewed),
            "heavy_tailed" | "heavy" => Ok(ScenarioKind::HeavyTailed),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Scenario knobs. Each kind reads only the fields relevant to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Seasonal period in steps (outlier_noise).
    pub period: usize,
    /// Seasonal amplitude (outlier_noise).
    pub amplitude: f64,
    /// Gaussian noise on the active phase (outlier_noise), or innovation
    /// scale (structural_break, heavy_tailed).
    pub noise_std: f64,
    /// Seasonal values below this threshold idle at exactly zero
    /// (outlier_noise); below -1.3 the load never idles.
    pub idle_threshold: f64,
    /// Per-step spike probability (outlier_noise).
    pub spike_rate: f64,
    /// Spike height as a multiple of `amplitude` (outlier_noise).
    pub spike_magnitude: f64,
    /// Mean spacing between outage starts; 0 disables outages (outlier_noise).
    pub outage_every: usize,
    /// Steps an outage lasts; the load reads exactly zero (outlier_noise).
    pub outage_length: usize,
    /// Break position as a fraction of the length (structural_break).
    pub break_fraction: f64,
    /// Level added after the break (structural_break).
    pub level_shift: f64,
    /// Noise scale multiplier after the break (structural_break).
    pub scale_factor: f64,
    /// Log-scale sigma of the innovations (skewed).
    pub lognormal_sigma: f64,
    /// Student-t degrees of freedom (heavy_tailed).
    pub degrees_of_freedom: f64,
    /// Baseline level (structural_break, skewed, heavy_tailed).
    pub level: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            period: 24,
            amplitude: 5.0,
            noise_std: 0.3,
            idle_threshold: 0.3,
            spike_rate: 0.002,
            spike_magnitude: 5.0,
            outage_every: 1000,
            outage_length: 450,
            break_fraction: 0.5,
            level_shift: 5.0,
            scale_factor: 2.0,
            lognormal_sigma: 0.75,
            degrees_of_freedom: 3.0,
            level: 10.0,
        }
    }
}

impl ScenarioParams {
    /// Defaults overridden by the keys of a TOML table.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self, kind: ScenarioKind) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(format!("{kind}: {msg}")));
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be >= 0");
        }
        match kind {
            ScenarioKind::OutlierNoise => {
                if self.period < 2 {
                    return bad("period must be >= 2");
                }
                if !(0.0..=1.0).contains(&self.spike_rate) {
                    return bad("spike_rate must lie in [0, 1]");
                }
                if self.outage_every > 0 && self.outage_length >= self.outage_every {
                    return bad("outage_length must be shorter than outage_every");
                }
                if !(self.amplitude > 0.0) || !(self.spike_magnitude >= 0.0) {
                    return bad("amplitude must be > 0 and spike_magnitude >= 0");
                }
            }
            ScenarioKind::StructuralBreak => {
                if !(self.break_fraction > 0.0 && self.break_fraction < 1.0) || !(self.scale_factor > 0.0) {
                    return bad("break_fraction must lie in (0, 1) and scale_factor must be > 0");
                }
            }
            ScenarioKind::Skewed => {
                if !(self.lognormal_sigma > 0.0) {
                    return bad("lognormal_sigma must be > 0");
                }
            }
            ScenarioKind::HeavyTailed => {
                if !(self.degrees_of_freedom > 0.0) {
                    return bad("degrees_of_freedom must be > 0");
                }
            }
        }
        Ok(())
    }
}

/// A fully specified synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub length: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub channels: usize,
    #[serde(default, flatten)]
    pub params: ScenarioParams,
}

fn one() -> usize {
    1
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, length: usize, seed: u64) -> Self {
        Self { kind, length, seed, channels: 1, params: ScenarioParams::default() }
    }

    pub fn generate(&self) -> Result<SeriesMatrix> {
        generate_contradiction_scenario(self.kind, self.seed, self.length, self.channels, &self.params)
    }

    /// Row at which the structural break starts.
    pub fn break_index(&self) -> usize {
        (self.params.break_fraction * self.length as f64).round() as usize
    }
}

fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel as u64);
    rng
}

fn outlier_noise(rng: &mut ChaCha8Rng, t_len: usize, channel: usize, p: &ScenarioParams) -> Vec<f64> {
    let phase = channel as f64 * 0.7;
    let period = p.period as f64;
    // renewal process: gaps between outages are uniform with mean `outage_every`
    let mut outage_starts = Vec::new();
    if p.outage_every > 0 {
        let spare = p.outage_every - p.outage_length;
        let mut t = rng.random_range(0..p.outage_every);
        while t < t_len {
            outage_starts.push(t);
            t += p.outage_length + rng.random_range(0..=2 * spare);
        }
    }
    let mut outage_left = 0usize;
    (0..t_len)
        .map(|t| {
            if outage_starts.contains(&t) {
                outage_left = p.outage_length;
            }
            let t = t as f64;
            let season = (TAU * t / period + phase).sin() * (1.0 + 0.3 * (TAU * t / (7.0 * period)).sin());
            let noise: f64 = rng.sample(StandardNormal);
            let mut v = if season > p.idle_threshold {
                p.amplitude * (season - p.idle_threshold) + p.noise_std * noise
            } else {
                0.0
            };
            if rng.random::<f64>() < p.spike_rate {
                v += p.spike_magnitude * p.amplitude * (1.0 + rng.random::<f64>());
            }
            if outage_left > 0 {
                outage_left -= 1;
                v = 0.0;
            }
            v
        })
        .collect()
}

/// Generates one of the four contradiction scenarios.
pub fn generate_contradiction_scenario(
    kind: ScenarioKind,
    seed: u64,
    length: usize,
    channels: usize,
    params: &ScenarioParams,
) -> Result<SeriesMatrix> {
    if length < 2 || channels == 0 {
        return Err(Error::InvalidParams(format!("{kind}: need length >= 2 and channels >= 1")));
    }
    params.validate(kind)?;
    let p = params;
    let columns = (0..channels)
        .map(|c| {
            let mut rng = channel_rng(seed, c);
            match kind {
                ScenarioKind::OutlierNoise => Ok(outlier_noise(&mut rng, length, c, p)),
                ScenarioKind::StructuralBreak => {
                    let at = (p.break_fraction * length as f64).round() as usize;
                    Ok((0..length)
                        .map(|t| {
                            let z: f64 = rng.sample(StandardNormal);
                            if t < at {
                                p.level + p.noise_std * z
                            } else {
                                p.level + p.level_shift + p.noise_std * p.scale_factor * z
                            }
                        })
                        .collect())
                }
                ScenarioKind::Skewed => {
                    let dist = LogNormal::new(0.0, p.lognormal_sigma).map_err(|e| Error::InvalidParams(e.to_string()))?;
                    Ok((0..length).map(|_| p.level + dist.sample(&mut rng)).collect())
                }
                ScenarioKind::HeavyTailed => {
                    let dist = StudentT::new(p.degrees_of_freedom).map_err(|e| Error::InvalidParams(e.to_string()))?;
                    Ok((0..length).map(|_| p.level + p.noise_std * dist.sample(&mut rng)).collect())
                }
            }
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let names = (0..channels).map(|c| format!("{kind}_{c}")).collect();
    SeriesMatrix::from_columns(names, columns)
}

/// Replaces `lookback[position]` with `mean + magnitude · std` of the
/// window, on the given channels (all when `None`). The target is untouched.
pub fn inject_outlier(instance: &Instance, position: usize, magnitude: f64, channels: Option<&[usize]>) -> Result<Instance> {
    let (len, n_channels) = instance.lookback.dim();
    if position >= len {
        return Err(Error::IndexOutOfRange { start: position, end: position + 1, len });
    }
    let all: Vec<usize> = (0..n_channels).collect();
    let chosen = channels.unwrap_or(&all);
    let mut out = instance.clone();
    for &c in chosen {
        if c >= n_channels {
            return Err(Error::IndexOutOfRange { start: c, end: c + 1, len: n_channels });
        }
        let column = instance.lookback.column(c).to_vec();
        let mu = stats::mean(&column)?;
        let sd = stats::std_population(&column, 0.0)?;
        out.lookback[[position, c]] = mu + magnitude * sd;
    }
    Ok(out)
}
