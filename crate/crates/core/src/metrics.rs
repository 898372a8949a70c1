//! Mean error and mean squared error of a predictor.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};

/// Error statistics of `target − prediction` over a test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub n: usize,
    pub me: f64,
    pub mse: f64,
    /// Standard error of the MSE: sample SD of squared errors over `√n`.
    pub se_mse: f64,
    /// Standard error of the ME: sample SD of errors over `√n`.
    pub se_me: f64,
}

/// Mean and sample SD with Welford updates.
fn mean_sd(values: impl Iterator<Item = f64>) -> (usize, f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let sd = if n > 1 { (m2 / (n - 1) as f64).max(0.0).sqrt() } else { 0.0 };
    (n, mean, sd)
}

pub fn evaluate_me_mse(predictions: &[f64], targets: &[f64]) -> Result<ErrorStats> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape { expected: targets.len(), actual: predictions.len() });
    }
    if targets.is_empty() {
        return Err(domain("evaluate_me_mse needs at least one pair"));
    }
    let err = || targets.iter().zip(predictions).map(|(y, p)| y - p);
    let (n, me, sd) = mean_sd(err());
    let (_, mse, sd_sq) = mean_sd(err().map(|e| e * e));
    let root = (n as f64).sqrt();
    Ok(ErrorStats { n, me, mse, se_mse: sd_sq / root, se_me: sd / root })
}

/// Paired comparison of two predictors on the same targets:
/// mean and standard error of `e_b² − e_a²`.
pub fn paired_mse_difference(a: &[f64], b: &[f64], targets: &[f64]) -> Result<(f64, f64)> {
    if a.len() != targets.len() || b.len() != targets.len() {
        return Err(Error::Shape { expected: targets.len(), actual: a.len().min(b.len()) });
    }
    if targets.is_empty() {
        return Err(domain("paired difference needs at least one target"));
    }
    let (n, mean, sd) = mean_sd(
        targets.iter().zip(a.iter().zip(b)).map(|(y, (pa, pb))| (y - pb).powi(2) - (y - pa).powi(2)),
    );
    Ok((mean, sd / (n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn perfect_predictions() {
        let s = evaluate_me_mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.me, s.mse, s.se_mse), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_shift() {
        let p = [0.5, -1.0, 2.0, 7.0];
        let t: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        let s = evaluate_me_mse(&p, &t).unwrap();
        assert!((s.me - 1.0).abs() < 1e-15);
        assert!((s.mse - 1.0).abs() < 1e-15);
        assert!(s.se_mse.abs() < 1e-15);
    }

    #[test]
    fn empty_or_mismatched() {
        assert!(evaluate_me_mse(&[], &[]).is_err());
        assert!(evaluate_me_mse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
