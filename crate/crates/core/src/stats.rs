// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar statistics over a single channel.
//!
//! All moments use the population (1/n) divisor. `mad` is unscaled; the
//! 1.4826 normal-consistency factor is applied by the normalization layer.

use crate::error::{Error, Result};

/// Normal-consistency factor relating MAD to the standard deviation.
pub const NORMAL_CONSISTENCY: f64 = 1.4826;

/// Default floor applied to MAD before dividing by it.
pub const DEFAULT_MAD_FLOOR: f64 = 1e-8;

/// Relative variance threshold under which a sample counts as constant.
const DEGENERATE_REL: f64 = 1e-14;

fn check(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteInput { index }),
        None => Ok(()),
    }
}

pub fn mean(x: &[f64]) -> Result<f64> {
    check(x)?;
    Ok(mean_unchecked(x))
}

fn mean_unchecked(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn central_moment(x: &[f64], mu: f64, order: i32) -> f64 {
    x.iter().map(|v| (v - mu).powi(order)).sum::<f64>() / x.len() as f64
}

/// `sqrt(var + epsilon)` with population variance; epsilon sits inside the root.
pub fn std_population(x: &[f64], epsilon: f64) -> Result<f64> {
    check(x)?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let mu = mean_unchecked(x);
    Ok((central_moment(x, mu, 2) + epsilon).sqrt())
}

pub fn median(x: &[f64]) -> Result<f64> {
    check(x)?;
    let mut buf = x.to_vec();
    Ok(median_in_place(&mut buf))
}

/// Median by selection; reorders `buf`.
fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (lower, upper_mid, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_mid + upper_mid)
    }
}

/// Median absolute deviation from the median, unscaled.
pub fn mad(x: &[f64]) -> Result<f64> {
    check(x)?;
    Ok(median_and_mad(x).1)
}

/// Median and MAD in one pass over a scratch buffer.
pub fn median_and_mad(x: &[f64]) -> (f64, f64) {
    let mut buf = x.to_vec();
    let med = median_in_place(&mut buf);
    for v in buf.iter_mut() {
        *v = (*v - med).abs();
    }
    (med, median_in_place(&mut buf))
}

fn standardized_moment(x: &[f64], order: i32) -> Result<f64> {
    check(x)?;
    if x.len() < 2 {
        return Err(Error::InputTooShort { needed: 2, got: x.len() });
    }
    let mu = mean_unchecked(x);
    let m2 = central_moment(x, mu, 2);
    let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m2 <= (DEGENERATE_REL * scale).powi(2) {
        return Err(Error::DegenerateDistribution);
    }
    Ok(central_moment(x, mu, order) / m2.powf(order as f64 / 2.0))
}

/// Fisher-Pearson skewness `m3 / m2^1.5`, no bias correction.
pub fn skewness(x: &[f64]) -> Result<f64> {
    standardized_moment(x, 3)
}

/// Excess kurtosis `m4 / m2^2 - 3`, population moments.
pub fn kurtosis_excess(x: &[f64]) -> Result<f64> {
    Ok(standardized_moment(x, 4)? - 3.0)
}

/// `std(x) / max(MAD(x), mad_floor)`.
pub fn empirical_k(x: &[f64], mad_floor: f64) -> Result<f64> {
    check(x)?;
    if !(mad_floor > 0.0) {
        return Err(Error::InvalidParams(format!("mad_floor must be > 0, got {mad_floor}")));
    }
    let sd = std_population(x, 0.0)?;
    let (_, m) = median_and_mad(x);
    Ok(sd / m.max(mad_floor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(mean(&[5.0]).unwrap(), 5.0);
        // 0.1 + 0.2 + 0.3 + 0.4 = 1.0 by hand
        assert!(close(mean(&[0.1, 0.2, 0.3, 0.4]).unwrap(), 0.25, 1e-15));
        assert!(matches!(mean(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            mean(&[1.0, f64::NAN]),
            Err(Error::NonFiniteInput { index: 1 })
        ));
    }

    #[test]
    fn std_examples() {
        assert!(close(std_population(&[1.0, 1.0, 1.0], 1e-10).unwrap(), 1e-5, 1e-12));
        assert_eq!(std_population(&[0.0, 2.0], 0.0).unwrap(), 1.0);
        assert!(close(
            std_population(&[1.0, 2.0, 3.0], 0.0).unwrap(),
            (2.0_f64 / 3.0).sqrt(),
            1e-15
        ));
        assert!(matches!(std_population(&[], 0.0), Err(Error::EmptyInput)));
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[1.0, 2.0, 100.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[7.0, 1.0, 9.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(median(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn mad_examples() {
        assert_eq!(mad(&[1.0, 2.0, 100.0]).unwrap(), 1.0);
        assert_eq!(mad(&[4.2, 4.2, 4.2]).unwrap(), 0.0);
        assert_eq!(mad(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn skewness_examples() {
        assert!(skewness(&[-1.0, 0.0, 1.0]).unwrap().abs() < 1e-15);
        // m2 = 75/4, m3 = 375/4 by hand
        let expected = (375.0 / 4.0) / (75.0_f64 / 4.0).powf(1.5);
        assert!(close(skewness(&[0.0, 0.0, 0.0, 10.0]).unwrap(), expected, 1e-12));
        assert!(close(expected, 1.1547, 1e-4));
        assert!(matches!(skewness(&[5.0, 5.0, 5.0]), Err(Error::DegenerateDistribution)));
        assert!(matches!(skewness(&[0.1, 0.1, 0.1]), Err(Error::DegenerateDistribution)));
        assert!(matches!(skewness(&[1.0]), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn kurtosis_examples() {
        assert!(close(kurtosis_excess(&[-1.0, 1.0]).unwrap(), -2.0, 1e-15));
        assert!(matches!(kurtosis_excess(&[2.0; 8]), Err(Error::DegenerateDistribution)));
        let x = normal_sample(100_000, 7);
        assert!(kurtosis_excess(&x).unwrap().abs() < 0.1);
    }

    #[test]
    fn empirical_k_examples() {
        let x = normal_sample(100_000, 11);
        let k = empirical_k(&x, DEFAULT_MAD_FLOOR).unwrap();
        assert!((k - NORMAL_CONSISTENCY).abs() < 0.02, "k = {k}");
        assert_eq!(empirical_k(&[3.0; 10], 1e-8).unwrap(), 0.0);

        let mut spiky = vec![0.0; 99];
        spiky.push(1000.0);
        // std = sqrt(10000 - 100) = 99.4987..., MAD = 0 -> floor
        let expected = (10000.0_f64 - 100.0).sqrt() / 1e-8;
        assert!(close(empirical_k(&spiky, 1e-8).unwrap(), expected, 1e-12));
        assert!(close(expected, 9.95e9, 1e-3));
        assert!(matches!(empirical_k(&[1.0], 0.0), Err(Error::InvalidParams(_))));
    }

    fn finite_vec(min_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3_f64, min_len..64)
    }

    proptest! {
        #[test]
        fn median_and_mad_permutation_invariant(x in finite_vec(1), seed in any::<u64>()) {
            let mut y = x.clone();
            y.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(median(&x).unwrap(), median(&y).unwrap());
            prop_assert_eq!(mad(&x).unwrap(), mad(&y).unwrap());
        }

        #[test]
        fn median_breakdown(mut x in finite_vec(3), idx in any::<prop::sample::Index>(), big in 1e6..1e12_f64) {
            if x.len() % 2 == 0 { x.pop(); }
            let before = median(&x).unwrap();
            let i = idx.index(x.len());
            let mut y = x.clone();
            y[i] = big;
            let after = median(&y).unwrap();
            // the median moves at most to a neighbouring order statistic
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            let m = sorted.len() / 2;
            prop_assert!(after >= sorted[m.saturating_sub(1)] && after <= sorted[(m + 1).min(sorted.len() - 1)]);
            prop_assert!(before.is_finite() && after < 1e5);
        }

        #[test]
        fn epsilon_sits_inside_root(x in finite_vec(1), eps in 0.0..10.0_f64) {
            let a = std_population(&x, 0.0).unwrap();
            let b = std_population(&x, eps).unwrap();
            prop_assert!(close(a * a + eps, b * b, 1e-12));
        }

        #[test]
        fn affine_equivariance(x in finite_vec(2), a in -50.0..50.0_f64, b in -1e3..1e3_f64) {
            prop_assume!(a.abs() > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let sx = std_population(&x, 0.0).unwrap();
            prop_assert!((mean(&y).unwrap() - (a * mean(&x).unwrap() + b)).abs() <= 1e-9 * (1.0 + (a * mean(&x).unwrap()).abs() + b.abs()));
            prop_assert!((std_population(&y, 0.0).unwrap() - a.abs() * sx).abs() <= 1e-9 * (1.0 + (b.abs() + a.abs() * 1e3)) );
        }

        #[test]
        fn empirical_k_scale_invariant(x in finite_vec(4), a in -50.0..50.0_f64, b in -1e3..1e3_f64) {
            prop_assume!(a.abs() > 1e-2);
            let floor = DEFAULT_MAD_FLOOR;
            prop_assume!(mad(&x).unwrap() > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let kx = empirical_k(&x, floor).unwrap();
            let ky = empirical_k(&y, floor).unwrap();
            prop_assert!(close(kx, ky, 1e-6), "{} vs {}", kx, ky);
        }

        #[test]
        fn symmetric_sample_has_zero_skew(half in prop::collection::vec(0.1..1e3_f64, 1..32), c in -1e3..1e3_f64) {
            let mut x: Vec<f64> = half.iter().map(|v| c + v).collect();
            x.extend(half.iter().map(|v| c - v));
            let s = skewness(&x).unwrap();
            prop_assert!(s.abs() < 1e-12 * (1.0 + c.abs()), "skew = {}", s);
        }
    }
}
