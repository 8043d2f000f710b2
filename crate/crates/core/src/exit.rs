//! Mutual-information tools for extrinsic transfer measurements.
//!
//! Bits are polarized (`+1` for bit 0), matching the LLR sign convention.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub const DEFAULT_MI_BINS: usize = 100;
const SIGMA_MAX: f64 = 200.0;
const SIGMA_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ExitError {
    #[error("a-priori information must lie in [0, 1), got {0}")]
    TargetOutOfRange(f64),
    #[error("{llrs} LLRs for {bits} bits")]
    Length { llrs: usize, bits: usize },
}

/// `log2(1 + e^-l)` without overflow.
fn log2_one_plus_exp_neg(l: f64) -> f64 {
    let v = if l > 0.0 { (-l).exp().ln_1p() } else { -l + l.exp().ln_1p() };
    v / std::f64::consts::LN_2
}

/// Mutual information between a bit and a consistent Gaussian LLR
/// `N(sigma^2/2 * b, sigma^2)`, by Simpson integration.
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let mean = sigma * sigma / 2.0;
    let (lo, hi) = (mean - 12.0 * sigma, mean + 12.0 * sigma);
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |l: f64| {
        let z = (l - mean) / sigma;
        norm * (-0.5 * z * z).exp() * log2_one_plus_exp_neg(l)
    };
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    (1.0 - acc * h / 3.0).clamp(0.0, 1.0)
}

/// `sigma` with `J(sigma) = target`, by bisection.
pub fn inverse_j(target: f64) -> Result<f64, ExitError> {
    if !(0.0..1.0).contains(&target) {
        return Err(ExitError::TargetOutOfRange(target));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, SIGMA_MAX);
    while hi - lo > SIGMA_TOL {
        let mid = 0.5 * (lo + hi);
        if j_function(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A-priori LLRs `sigma^2/2 * b + sigma * z` carrying `target` bits of
/// information each.
pub fn gen_apriori<R: Rng + ?Sized>(
    target: f64,
    polarized_bits: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>, ExitError> {
    let sigma = inverse_j(target)?;
    Ok(polarized_bits
        .iter()
        .map(|&b| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * sigma / 2.0 * b + sigma * z
        })
        .collect())
}

/// Histogram estimate of `I(b; L)` for equiprobable bits.
pub fn measure_mi(llrs: &[f64], polarized_bits: &[f64]) -> Result<f64, ExitError> {
    measure_mi_with_bins(llrs, polarized_bits, DEFAULT_MI_BINS)
}

pub fn measure_mi_with_bins(llrs: &[f64], polarized_bits: &[f64], bins: usize) -> Result<f64, ExitError> {
    if llrs.len() != polarized_bits.len() {
        return Err(ExitError::Length { llrs: llrs.len(), bits: polarized_bits.len() });
    }
    let (lo, hi) = llrs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    if llrs.is_empty() || !(hi > lo) || bins == 0 {
        return Ok(0.0);
    }
    let mut counts = [vec![0usize; bins], vec![0usize; bins]];
    for (&l, &b) in llrs.iter().zip(polarized_bits) {
        let bin = (((l - lo) / (hi - lo)) * bins as f64).floor().min((bins - 1) as f64) as usize;
        counts[usize::from(b < 0.0)][bin] += 1;
    }
    let totals = [counts[0].iter().sum::<usize>(), counts[1].iter().sum::<usize>()];
    if totals.contains(&0) {
        return Ok(0.0);
    }
    let mut info = 0.0;
    for bin in 0..bins {
        let p = [counts[0][bin] as f64 / totals[0] as f64, counts[1][bin] as f64 / totals[1] as f64];
        let mean = 0.5 * (p[0] + p[1]);
        for &pb in &p {
            if pb > 0.0 {
                info += 0.5 * pb * (pb / mean).log2();
            }
        }
    }
    Ok(info.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    #[test]
    fn j_function_shape() {
        assert_eq!(j_function(0.0), 0.0);
        let mut prev = 0.0;
        for s in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let j = j_function(s);
            assert!(j > prev);
            prev = j;
        }
        assert!(j_function(20.0) > 0.9999);
        let s = inverse_j(0.5).unwrap();
        assert!((j_function(s) - 0.5).abs() < 1e-5);
        assert!(inverse_j(1.0).is_err());
        assert!(inverse_j(-0.1).is_err());
    }

    #[test]
    fn apriori_zero_and_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = bits(1000, &mut rng);
        assert!(gen_apriori(0.0, &b, &mut rng).unwrap().iter().all(|&l| l == 0.0));
        let l = gen_apriori(0.3, &b, &mut rng).unwrap();
        let mean: f64 = l.iter().zip(&b).map(|(l, b)| l * b).sum::<f64>() / 1000.0;
        assert!(mean > 0.0);
        assert_eq!(gen_apriori(1.0, &b, &mut rng), Err(ExitError::TargetOutOfRange(1.0)));
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = bits(100_000, &mut rng);
        for target in [0.1, 0.5, 0.9] {
            let l = gen_apriori(target, &b, &mut rng).unwrap();
            let mi = measure_mi(&l, &b).unwrap();
            assert!((mi - target).abs() < 0.02, "target {target} measured {mi}");
        }
    }

    #[test]
    fn degenerate_inputs() {
        let b = vec![1.0, -1.0, 1.0, -1.0];
        assert_eq!(measure_mi(&[0.0; 4], &b).unwrap(), 0.0);
        let perfect: Vec<f64> = b.iter().map(|&v| 8.0 * v).collect();
        assert!(measure_mi(&perfect, &b).unwrap() >= 0.99);
        assert!(measure_mi(&[1.0], &b).is_err());
        assert_eq!(measure_mi(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
    }
}
