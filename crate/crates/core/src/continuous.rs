//! Predictors from a continuously observed past.
//!
//! `E[B_T | B_u, u ≤ s] = B_s + ∫_0^s Ψ(s,T,v) dB_v` with
//! `Ψ(s,T,v) = sin((H−½)π)/π · v^{½−H} (s−v)^{½−H} ∫_s^T z^{H−½}(z−s)^{H−½}/(z−v) dz`.
//! The fOU weight carries an extra exponential factor. The stochastic integral
//! is evaluated as a Riemann–Stieltjes sum against a finely sampled path.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::{HurstIndex, LinearRecursion, TimeGrid};
use crate::error::{domain, Error, Result};
use crate::exact::sine_factor;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterRule {
    /// Weight evaluated at the midpoint of each increment.
    Midpoint,
    /// Weight evaluated at the left end of each increment.
    LeftPoint,
}

/// Placement of the exponential factor in the fOU weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FouKernelVariant {
    /// `e^{−a(T−v)}`, constant in the integration variable.
    AsWritten,
    /// `e^{−a(T−z)}` inside the integral over `z`.
    ZArgument,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPredictorConfig {
    pub s: f64,
    pub horizon: f64,
    pub hurst: HurstIndex,
    pub inner_nodes: usize,
    pub outer_rule: OuterRule,
    pub fou_kernel_variant: FouKernelVariant,
    /// fOU mean reversion `a`.
    pub decay: f64,
    /// fOU level `k`.
    pub level: f64,
    /// fOU volatility `σ`.
    pub volatility: f64,
}

impl ContinuousPredictorConfig {
    /// Defaults: 64 nodes, midpoint rule, `e^{−a(T−z)}` kernel, `a = ½`,
    /// `k = 0`, `σ = 1`.
    pub fn new(s: f64, horizon: f64, hurst: HurstIndex) -> Result<Self> {
        let c = Self {
            s,
            horizon,
            hurst,
            inner_nodes: 64,
            outer_rule: OuterRule::Midpoint,
            fou_kernel_variant: FouKernelVariant::ZArgument,
            decay: 0.5,
            level: 0.0,
            volatility: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.s && self.s < self.horizon && self.horizon.is_finite()) {
            return Err(domain("need 0 < s < T"));
        }
        if self.inner_nodes < 8 {
            return Err(domain("inner_nodes must be at least 8"));
        }
        if !(self.decay.is_finite() && self.level.is_finite() && self.volatility.is_finite()) {
            return Err(domain("fOU coefficients must be finite"));
        }
        Ok(())
    }
}

/// Factor multiplying the inner integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Damping {
    None,
    Outside(f64),
    Inside(f64),
}

/// Ψ weight for fixed `(s, T, H)` with a reusable quadrature rule.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    rule: GaussLegendre,
    s: f64,
    horizon: f64,
    hurst: HurstIndex,
    damping: Damping,
}

/// Panels in ξ grow geometrically by this ratio away from 0.
const PANEL_RATIO: f64 = 4.0;
/// Panels below the first scale, toward `ξ = 0`.
const ZERO_PANELS: i32 = 6;

impl PsiKernel {
    pub fn fbm(s: f64, horizon: f64, hurst: HurstIndex, inner_nodes: usize) -> Result<Self> {
        Self::build(s, horizon, hurst, inner_nodes, Damping::None)
    }

    pub fn fou(
        s: f64,
        horizon: f64,
        hurst: HurstIndex,
        variant: FouKernelVariant,
        decay: f64,
        inner_nodes: usize,
    ) -> Result<Self> {
        let damping = match variant {
            FouKernelVariant::AsWritten => Damping::Outside(decay),
            FouKernelVariant::ZArgument => Damping::Inside(decay),
        };
        Self::build(s, horizon, hurst, inner_nodes, damping)
    }

    fn build(s: f64, horizon: f64, hurst: HurstIndex, inner_nodes: usize, damping: Damping) -> Result<Self> {
        if !(0.0 < s && s < horizon && horizon.is_finite()) {
            return Err(domain("need 0 < s < T"));
        }
        if inner_nodes < 8 {
            return Err(domain("inner_nodes must be at least 8"));
        }
        Ok(Self { rule: GaussLegendre::new(inner_nodes)?, s, horizon, hurst, damping })
    }

    /// `Ψ(s, T, v)`; zero at `v ∈ {0, s}` and for `H = ½`.
    pub fn eval(&self, v: f64) -> Result<f64> {
        let (s, t) = (self.s, self.horizon);
        if !(0.0..=s).contains(&v) {
            return Err(domain("v must lie in [0, s]"));
        }
        let h = self.hurst.value();
        let c = sine_factor(self.hurst);
        if v == 0.0 || v == s || c == 0.0 {
            return Ok(0.0);
        }
        // z = s + (T−s) ξ^q with q = 1/(H+½): (z−s)^{H−½} dz = (T−s)^{H+½} q dξ
        let q = 1.0 / (h + 0.5);
        let span = t - s;
        let integrand = |xi: f64| {
            let z = s + span * xi.powf(q);
            let mut f = z.powf(h - 0.5) / (z - v);
            if let Damping::Inside(a) = self.damping {
                f *= (-a * (t - z)).exp();
            }
            f
        };
        // 1/(z−v) varies on the scale ξ ≈ ((s−v)/(T−s))^{H+½}; ξ^q is not
        // smooth at 0, so panels are graded toward 0 as well
        let scale = ((s - v) / span).powf(h + 0.5).min(1.0);
        let mut lo = 0.0;
        let mut hi = scale * PANEL_RATIO.powi(-ZERO_PANELS);
        let mut inner = 0.0;
        loop {
            inner += self.rule.integrate(lo, hi, integrand);
            if hi >= 1.0 {
                break;
            }
            lo = hi;
            hi = (hi * PANEL_RATIO).min(1.0);
        }
        inner *= span.powf(h + 0.5) * q;
        let mut psi = c * v.powf(0.5 - h) * (s - v).powf(0.5 - h) * inner;
        if let Damping::Outside(a) = self.damping {
            psi *= (-a * (t - v)).exp();
        }
        Ok(psi)
    }
}

/// Gripenberg–Norros weight `Ψ^H(s, T, v)`.
pub fn psi_fbm(s: f64, horizon: f64, v: f64, hurst: HurstIndex, inner_nodes: usize) -> Result<f64> {
    PsiKernel::fbm(s, horizon, hurst, inner_nodes)?.eval(v)
}

/// fOU weight `Ψ_c^H(s, T, v)` with mean reversion `½`.
pub fn psi_fou(
    s: f64,
    horizon: f64,
    v: f64,
    hurst: HurstIndex,
    variant: FouKernelVariant,
    inner_nodes: usize,
) -> Result<f64> {
    PsiKernel::fou(s, horizon, hurst, variant, 0.5, inner_nodes)?.eval(v)
}

/// Which process the continuous predictor targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuousTarget {
    Fbm,
    Fou,
}

/// Continuous predictor bound to a fine observation grid on `[0, s]`; the
/// weights at the outer nodes are computed once and reused for every path.
#[derive(Debug, Clone)]
pub struct ContinuousPredictor {
    config: ContinuousPredictorConfig,
    target: ContinuousTarget,
    /// Number of grid points used (up to and including `s`).
    len: usize,
    weights: Vec<f64>,
    recursion: Option<LinearRecursion>,
}

/// Minimum number of path points on `[0, s]`.
pub const MIN_PATH_POINTS: usize = 16;

impl ContinuousPredictor {
    pub fn new(target: ContinuousTarget, grid: &TimeGrid, config: &ContinuousPredictorConfig) -> Result<Self> {
        config.validate()?;
        if !grid.origin_included() {
            return Err(domain("path grid must start at 0"));
        }
        let end = grid.index_of(config.s)?;
        let len = end + 1;
        if len < MIN_PATH_POINTS {
            return Err(domain("path grid needs at least 16 points on [0, s]"));
        }
        let u = &grid.points()[..len];
        let kernel = match target {
            ContinuousTarget::Fbm => PsiKernel::fbm(config.s, config.horizon, config.hurst, config.inner_nodes)?,
            ContinuousTarget::Fou => PsiKernel::fou(
                config.s,
                config.horizon,
                config.hurst,
                config.fou_kernel_variant,
                config.decay,
                config.inner_nodes,
            )?,
        };
        let scale = match target {
            ContinuousTarget::Fbm => 1.0,
            ContinuousTarget::Fou => config.volatility,
        };
        let weights = u
            .windows(2)
            .map(|w| {
                let v = match config.outer_rule {
                    OuterRule::Midpoint => 0.5 * (w[0] + w[1]),
                    OuterRule::LeftPoint => w[0],
                };
                kernel.eval(v).map(|p| p * scale)
            })
            .collect::<Result<Vec<_>>>()?;
        let recursion = match target {
            ContinuousTarget::Fbm => None,
            ContinuousTarget::Fou => {
                if config.volatility == 0.0 {
                    return Err(domain("fOU volatility must be nonzero to recover the driving noise"));
                }
                Some(LinearRecursion::fou_exact(u, config.level, config.decay, config.volatility, 0.0))
            }
        };
        Ok(Self { config: config.clone(), target, len, weights, recursion })
    }

    /// Weights `Ψ` at the outer nodes, one per increment.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Prediction from a path sampled on the grid (extra points past `s` are
    /// ignored).
    pub fn predict(&self, path: &[f64]) -> Result<f64> {
        if path.len() < self.len {
            return Err(Error::Shape { expected: self.len, actual: path.len() });
        }
        let path = &path[..self.len];
        let last = path[self.len - 1];
        match self.target {
            ContinuousTarget::Fbm => {
                let integral: f64 =
                    self.weights.iter().zip(path.windows(2)).map(|(w, p)| w * (p[1] - p[0])).sum();
                Ok(last + integral)
            }
            ContinuousTarget::Fou => {
                let rec = self.recursion.as_ref().expect("fOU predictor carries its recursion");
                let increments = rec.increments_from_path(path)?;
                let integral: f64 = self.weights.iter().zip(&increments).map(|(w, d)| w * d).sum();
                let c = &self.config;
                let gap = c.horizon - c.s;
                let growth = if c.decay == 0.0 { gap } else { -(-c.decay * gap).exp_m1() / c.decay };
                Ok(last * (-c.decay * gap).exp() + c.level * growth + integral)
            }
        }
    }
}

/// `B_s + Σ_k Ψ(s,T,m_k) ΔB_k` for an fBm path on `grid`.
pub fn predict_fbm_continuous(grid: &TimeGrid, path: &[f64], config: &ContinuousPredictorConfig) -> Result<f64> {
    ContinuousPredictor::new(ContinuousTarget::Fbm, grid, config)?.predict(path)
}

/// `A_s e^{−a(T−s)} + k(1 − e^{−a(T−s)})/a + Σ_k σ Ψ_c(s,T,m_k) ΔB_k`, the
/// increments being recovered from the fOU path by inverting its recursion.
pub fn predict_fou_continuous(grid: &TimeGrid, path: &[f64], config: &ContinuousPredictorConfig) -> Result<f64> {
    ContinuousPredictor::new(ContinuousTarget::Fou, grid, config)?.predict(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn oracle_values() {
        assert!(rel(psi_fbm(5.0, 10.0, 2.5, h(0.7), 64).unwrap(), 0.229_983_329_048_897_6) < 1e-9);
        assert!(rel(psi_fbm(5.0, 10.0, 2.5, h(0.3), 64).unwrap(), -0.197_428_777_191_370_2) < 1e-9);
        assert!(rel(psi_fbm(5.0, 10.0, 4.999, h(0.7), 64).unwrap(), 4.282_890_071_802_617_6) < 1e-9);
        let z = psi_fou(5.0, 10.0, 2.5, h(0.7), FouKernelVariant::ZArgument, 64).unwrap();
        assert!(rel(z, 0.078_898_068_178_483_95) < 1e-9);
    }

    #[test]
    fn endpoints_and_brownian_case() {
        for v in [0.0, 5.0] {
            assert_eq!(psi_fbm(5.0, 10.0, v, h(0.7), 64).unwrap(), 0.0);
        }
        assert_eq!(psi_fbm(5.0, 10.0, 2.0, h(0.5), 64).unwrap(), 0.0);
        for variant in [FouKernelVariant::AsWritten, FouKernelVariant::ZArgument] {
            assert_eq!(psi_fou(5.0, 10.0, 2.0, h(0.5), variant, 64).unwrap(), 0.0);
        }
        assert!(psi_fbm(5.0, 10.0, 5.5, h(0.7), 64).is_err());
        assert!(psi_fbm(5.0, 10.0, -0.1, h(0.7), 64).is_err());
    }

    #[test]
    fn as_written_factorizes() {
        for v in [0.3, 2.5, 4.9] {
            let a = psi_fou(5.0, 10.0, v, h(0.7), FouKernelVariant::AsWritten, 64).unwrap();
            let b = psi_fbm(5.0, 10.0, v, h(0.7), 64).unwrap() * (-(10.0 - v) / 2.0).exp();
            assert!(rel(a, b) < 1e-12);
        }
    }

    #[test]
    fn zero_path_and_brownian_prediction() {
        let grid = TimeGrid::uniform(5.0, 32).unwrap();
        let c7 = ContinuousPredictorConfig::new(5.0, 10.0, h(0.7)).unwrap();
        let zeros = vec![0.0; 33];
        assert_eq!(predict_fbm_continuous(&grid, &zeros, &c7).unwrap(), 0.0);
        assert_eq!(predict_fou_continuous(&grid, &zeros, &c7).unwrap(), 0.0);
        let c5 = ContinuousPredictorConfig::new(5.0, 10.0, h(0.5)).unwrap();
        let path: Vec<f64> = (0..33).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(predict_fbm_continuous(&grid, &path, &c5).unwrap(), path[32]);
        let fou = predict_fou_continuous(&grid, &path, &c5).unwrap();
        assert!((fou - path[32] * (-2.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn short_grid_rejected() {
        let grid = TimeGrid::uniform(5.0, 8).unwrap();
        let c = ContinuousPredictorConfig::new(5.0, 10.0, h(0.7)).unwrap();
        assert!(predict_fbm_continuous(&grid, &[0.0; 9], &c).is_err());
        let wrong_end = TimeGrid::uniform(4.0, 32).unwrap();
        assert!(predict_fbm_continuous(&wrong_end, &[0.0; 33], &c).is_err());
    }
}
