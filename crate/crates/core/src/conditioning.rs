//! Conditioning of multivariate Gaussians.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky_with_jitter, dot, Cholesky, Matrix};

/// Relative tolerance below which a negative conditional variance is treated
/// as rounding and clamped to zero: `ε = 1e-10 · Σ₁₁`.
pub const VARIANCE_CLAMP_REL: f64 = 1e-10;

/// Conditional law of one coordinate given others:
/// `E[X₁ | X₂ = x] = offset + weight · x`, `Var[X₁ | X₂] = variance`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub weight: Vec<f64>,
    pub offset: f64,
    pub variance: f64,
}

impl GaussianConditional {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weight.len() {
            return Err(Error::Shape { expected: self.weight.len(), actual: x.len() });
        }
        Ok(self.offset + dot(&self.weight, x))
    }

    pub fn std_dev(&self) -> f64 {
        num_traits::Float::sqrt(self.variance)
    }
}

fn check_indices(n: usize, targets: &[usize], observed: &[usize]) -> Result<()> {
    for &i in targets.iter().chain(observed) {
        if i >= n {
            return Err(Error::Shape { expected: n, actual: i });
        }
    }
    if targets.iter().any(|t| observed.contains(t)) {
        return Err(domain("target index is also observed"));
    }
    Ok(())
}

fn factor_observed(cov: &Matrix, observed: &[usize]) -> Result<Cholesky> {
    let s22 = cov.select(observed);
    cholesky_with_jitter(&s22).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::Conditioning { observation: pivot },
        other => other,
    })
}

/// Condition coordinate `target` on `observed` coordinates.
///
/// The weight `Σ₁₂Σ₂₂⁻¹` is obtained from a Cholesky solve of `Σ₂₂`. A
/// singular `Σ₂₂` reports the position of the first redundant observation.
pub fn gaussian_condition(
    mean: &[f64],
    cov: &Matrix,
    target: usize,
    observed: &[usize],
) -> Result<GaussianConditional> {
    let n = mean.len();
    if cov.rows() != n || cov.cols() != n {
        return Err(Error::Shape { expected: n, actual: cov.rows() });
    }
    check_indices(n, &[target], observed)?;
    let s11 = cov[(target, target)];
    if observed.is_empty() {
        return Ok(GaussianConditional { weight: Vec::new(), offset: mean[target], variance: s11.max(0.0) });
    }
    let chol = factor_observed(cov, observed)?;
    let s12: Vec<f64> = observed.iter().map(|&j| cov[(target, j)]).collect();
    let weight = chol.solve(&s12)?;
    let mu2: Vec<f64> = observed.iter().map(|&j| mean[j]).collect();
    let offset = mean[target] - dot(&weight, &mu2);

    // Σ₁₁ − Σ₁₂Σ₂₂⁻¹Σ₂₁ = Σ₁₁ − |L⁻¹Σ₂₁|²
    let mut y = s12;
    chol.solve_lower_in_place(&mut y);
    let raw = s11 - dot(&y, &y);
    let eps = VARIANCE_CLAMP_REL * s11.abs();
    let variance = if raw < 0.0 && raw >= -eps { 0.0 } else { raw.max(0.0) };
    Ok(GaussianConditional { weight, offset, variance })
}

/// Conditional law of a block of coordinates given others.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockConditional {
    /// `|targets| × |observed|` regression matrix `Σ₁₂Σ₂₂⁻¹`.
    pub weights: Matrix,
    pub offset: Vec<f64>,
    pub covariance: Matrix,
}

impl BlockConditional {
    pub fn mean_given(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut m = self.weights.mul_vec(x)?;
        for (mi, o) in m.iter_mut().zip(&self.offset) {
            *mi += o;
        }
        Ok(m)
    }
}

/// Condition several `targets` jointly on `observed`.
pub fn condition_block(
    mean: &[f64],
    cov: &Matrix,
    targets: &[usize],
    observed: &[usize],
) -> Result<BlockConditional> {
    let n = mean.len();
    if cov.rows() != n || cov.cols() != n {
        return Err(Error::Shape { expected: n, actual: cov.rows() });
    }
    check_indices(n, targets, observed)?;
    let r = targets.len();
    let p = observed.len();
    let mut weights = Matrix::zeros(r, p);
    let mut offset: Vec<f64> = targets.iter().map(|&t| mean[t]).collect();
    let mut covariance = cov.select(targets);
    if p > 0 {
        let chol = factor_observed(cov, observed)?;
        let mu2: Vec<f64> = observed.iter().map(|&j| mean[j]).collect();
        // whitened cross-covariances L⁻¹Σ₂₁ per target
        let mut whitened = Vec::with_capacity(r);
        for (a, &t) in targets.iter().enumerate() {
            let s12: Vec<f64> = observed.iter().map(|&j| cov[(t, j)]).collect();
            let w = chol.solve(&s12)?;
            offset[a] -= dot(&w, &mu2);
            weights.row_mut(a).copy_from_slice(&w);
            let mut y = s12;
            chol.solve_lower_in_place(&mut y);
            whitened.push(y);
        }
        for a in 0..r {
            for b in 0..r {
                covariance[(a, b)] -= dot(&whitened[a], &whitened[b]);
            }
        }
        covariance.symmetrize();
    }
    Ok(BlockConditional { weights, offset, covariance })
}
