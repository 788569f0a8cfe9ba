use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Paired bootstrap of `d_i = a_i − b_i`. Returns the observed mean
/// difference and the fraction of resampled means that are `≤ 0`.
pub fn bootstrap_diff(acc_a: &[f64], acc_b: &[f64], iters: usize, seed: u64) -> Result<(f64, f64)> {
    let d = differences(acc_a, acc_b)?;
    if iters == 0 {
        return Err(Error::InvalidArgument("iters must be at least 1".into()));
    }
    let n = d.len();
    let mut r = rng::stream(seed, &[0x626f_6f74]);
    let mut at_most_zero = 0usize;
    for _ in 0..iters {
        let s: f64 = (0..n).map(|_| d[r.gen_range(0..n)]).sum();
        if s <= 0.0 {
            at_most_zero += 1;
        }
    }
    Ok((d.iter().sum::<f64>() / n as f64, at_most_zero as f64 / iters as f64))
}

/// Exact one-sided p-value by enumerating all `n^n` ordered resamples.
/// Only practical for `n ≤ 8`.
pub fn exact_bootstrap_p(acc_a: &[f64], acc_b: &[f64]) -> Result<f64> {
    let d = differences(acc_a, acc_b)?;
    let n = d.len();
    if n > 8 {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration of {n}^{n} resamples"
        )));
    }
    let total = n.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut at_most_zero = 0usize;
    for _ in 0..total {
        if idx.iter().map(|&i| d[i]).sum::<f64>() <= 0.0 {
            at_most_zero += 1;
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < n {
                break;
            }
            *slot = 0;
        }
    }
    Ok(at_most_zero as f64 / total as f64)
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least two paired values".into(),
        ));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs() {
        let a = [0.7, 0.8, 0.9];
        assert_eq!(bootstrap_diff(&a, &a, 1000, 1).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn all_positive() {
        let (m, p) = bootstrap_diff(&[0.9, 0.8, 0.7], &[0.5, 0.6, 0.65], 1000, 1).unwrap();
        assert!(m > 0.0);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn enumeration_matches_binomial() {
        // One regression among eight: a resample mean is ≤ 0 iff it draws
        // the negative entry at least four times, X ~ Binomial(8, 1/8).
        let a = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0];
        let b = [0.0; 8];
        let binom = |k: u32| -> f64 {
            let c = (0..k).fold(1.0, |acc, i| acc * (8 - i) as f64 / (i + 1) as f64);
            c * (1.0f64 / 8.0).powi(k as i32) * (7.0f64 / 8.0).powi(8 - k as i32)
        };
        let expected: f64 = (4..=8).map(binom).sum();
        assert!((exact_bootstrap_p(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            bootstrap_diff(&[1.0, 2.0], &[1.0], 10, 0),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(bootstrap_diff(&[1.0], &[1.0], 10, 0).is_err());
    }
}
