//! Covariance models on time grids.
//!
//! Every process in the crate is a linear functional of fBm increments on a
//! simulation grid `0 = u_0 < u_1 < … < u_M`:
//!
//! ```text
//! X_{n+1} = φ_n X_n + d_n + ψ_n (B_{u_{n+1}} − B_{u_n}),   X_0 = x_0
//! ```
//!
//! [`LinearRecursion`] holds `(φ, ψ, d, x_0)`. The sampler pushes simulated
//! increments through it, and [`LinearRecursion::covariance`] pushes the exact
//! increment covariance through it, so samples and exact predictors share one
//! discretization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

/// Hurst index in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(domain(format!("Hurst index {value} not in (0, 1)")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `2H`, the exponent of the variance function.
    pub fn twice(self) -> f64 {
        2.0 * self.0
    }
}

impl fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Strictly increasing, non-negative time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

/// Relative tolerance used when looking up a time on a grid.
const GRID_MATCH_TOL: f64 = 1e-9;

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(domain("time grid is empty"));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(domain("time grid points must be finite and non-negative"));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(domain(format!("time grid not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { points })
    }

    /// `n + 1` points `0, end/n, …, end`; point `i` is `end · i / n`.
    pub fn uniform(end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(end > 0.0) {
            return Err(domain("uniform grid needs n >= 1 and end > 0"));
        }
        let mut points: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).collect();
        points[n] = end;
        Ok(Self { points })
    }

    /// `n` points `end/n, 2·end/n, …, end` (observation times without the origin).
    pub fn uniform_without_origin(end: f64, n: usize) -> Result<Self> {
        let g = Self::uniform(end, n)?;
        Ok(Self { points: g.points[1..].to_vec() })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn origin_included(&self) -> bool {
        self.points[0] == 0.0
    }

    /// Step of a uniform grid, or `None` when spacing varies by more than a
    /// few rounding units.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.points.len() < 2 {
            return None;
        }
        let n = self.points.len() - 1;
        let step = (self.last() - self.first()) / n as f64;
        let tol = 1e-9 * step;
        self.points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= tol)
            .then_some(step)
    }

    /// Index of `t` on the grid, matching to a relative tolerance of 1e-9.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = GRID_MATCH_TOL * t.abs().max(1.0);
        let pos = self.points.partition_point(|p| *p < t - tol);
        match self.points.get(pos) {
            Some(p) if (p - t).abs() <= tol => Ok(pos),
            _ => Err(Error::NotOnGrid { time: t }),
        }
    }

    pub fn indices_of(&self, times: &[f64]) -> Result<Vec<usize>> {
        times.iter().map(|t| self.index_of(*t)).collect()
    }

    /// Sub-grid on the given (increasing) indices.
    pub fn subgrid(&self, idx: &[usize]) -> Result<Self> {
        Self::new(idx.iter().map(|&i| self.points[i]).collect())
    }
}

/// Covariance of fBm: `½(t^{2H} + s^{2H} − |t−s|^{2H})`.
pub fn fbm_cov(t: f64, s: f64, hurst: HurstIndex) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(domain(format!("fbm_cov needs non-negative times, got ({t}, {s})")));
    }
    Ok(fbm_cov_unchecked(t, s, hurst.twice()))
}

#[inline]
pub(crate) fn fbm_cov_unchecked(t: f64, s: f64, two_h: f64) -> f64 {
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of fractional Gaussian noise with step `dt` at integer `lag`.
pub fn fgn_autocov(lag: usize, hurst: HurstIndex, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(domain("fgn_autocov needs dt > 0"));
    }
    Ok(fgn_autocov_unchecked(lag, hurst.twice(), dt))
}

pub(crate) fn fgn_autocov_unchecked(lag: usize, two_h: f64, dt: f64) -> f64 {
    let k = lag as f64;
    let scale = dt.powf(two_h);
    if lag == 0 {
        return scale;
    }
    0.5 * scale * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

/// Autocovariance of increments of length `step` starting `gap` apart.
fn increment_cov(gap: f64, step: f64, two_h: f64) -> f64 {
    0.5 * ((gap + step).abs().powf(two_h) - 2.0 * gap.abs().powf(two_h)
        + (gap - step).abs().powf(two_h))
}

/// Deterministic coefficient of a process.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// Values at the points of the simulation grid.
    Tabulated(Vec<f64>),
}

impl Coefficient {
    pub fn tabulate(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::Tabulated(grid.points().iter().map(|&t| f(t)).collect())
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(c) => Some(*c),
            Self::Tabulated(_) => None,
        }
    }

    /// Value at grid index `i`.
    pub fn at(&self, i: usize) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Tabulated(v) => v[i],
        }
    }

    fn check(&self, grid: &TimeGrid, name: &str) -> Result<()> {
        match self {
            Self::Constant(c) if !c.is_finite() => Err(domain(format!("{name} is not finite"))),
            Self::Tabulated(v) if v.len() != grid.len() => {
                Err(Error::Shape { expected: grid.len(), actual: v.len() })
            }
            Self::Tabulated(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(domain(format!("{name} is not bounded on the grid")))
            }
            _ => Ok(()),
        }
    }

    pub fn scaled_sum(&self, alpha: f64, other: &Coefficient, beta: f64, len: usize) -> Self {
        match (self, other) {
            (Self::Constant(a), Self::Constant(b)) => Self::Constant(alpha * a + beta * b),
            _ => Self::Tabulated((0..len).map(|i| alpha * self.at(i) + beta * other.at(i)).collect()),
        }
    }
}

/// Joint Gaussian law of a process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceModel {
    Fbm { hurst: HurstIndex },
    /// Increments `B_{t+step} − B_t` indexed by their start time `t`.
    FgnIncrements { hurst: HurstIndex, step: f64 },
    /// `Z_t = ∫_0^t f(u) dB^H_u`.
    IntegralProcess { hurst: HurstIndex, integrand: Coefficient },
    /// `dA = (k(t) − a(t) A) dt + σ(t) dB^H`, `A_0 = a0`.
    Fou {
        hurst: HurstIndex,
        level: Coefficient,
        decay: Coefficient,
        volatility: Coefficient,
        initial: f64,
    },
    /// Latent fOU of the fCIR process: `dA = −(λ/2) A dt + dB^H`.
    FcirLatent { hurst: HurstIndex, lambda: f64, initial: f64 },
}

impl CovarianceModel {
    pub fn hurst(&self) -> HurstIndex {
        match self {
            Self::Fbm { hurst }
            | Self::FgnIncrements { hurst, .. }
            | Self::IntegralProcess { hurst, .. }
            | Self::Fou { hurst, .. }
            | Self::FcirLatent { hurst, .. } => *hurst,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fbm { .. } => "fbm",
            Self::FgnIncrements { .. } => "fgn",
            Self::IntegralProcess { .. } => "integral",
            Self::Fou { .. } => "fou",
            Self::FcirLatent { .. } => "fcir-latent",
        }
    }

    /// Recursion that generates this process from fBm increments on `grid`.
    /// `grid` must start at 0. Not defined for increment models.
    pub fn recursion(&self, grid: &TimeGrid) -> Result<LinearRecursion> {
        if !grid.origin_included() {
            return Err(domain("simulation grid must start at t = 0"));
        }
        let m = grid.len() - 1;
        let u = grid.points();
        match self {
            Self::Fbm { .. } => Ok(LinearRecursion::fbm(m)),
            Self::FgnIncrements { .. } => {
                Err(Error::Unsupported("increment model has no path recursion".into()))
            }
            Self::IntegralProcess { integrand, .. } => {
                integrand.check(grid, "integrand")?;
                let psi = (0..m).map(|n| integrand.at(n)).collect();
                Ok(LinearRecursion { phi: vec![1.0; m], psi, drift: vec![0.0; m], initial: 0.0 })
            }
            Self::Fou { level, decay, volatility, initial, .. } => {
                level.check(grid, "level")?;
                decay.check(grid, "decay")?;
                volatility.check(grid, "volatility")?;
                if !initial.is_finite() {
                    return Err(domain("initial value is not finite"));
                }
                match (level.as_constant(), decay.as_constant(), volatility.as_constant()) {
                    (Some(k), Some(a), Some(s)) => Ok(LinearRecursion::fou_exact(u, k, a, s, *initial)),
                    _ => Ok(LinearRecursion::fou_euler(u, level, decay, volatility, *initial)),
                }
            }
            Self::FcirLatent { lambda, initial, .. } => {
                if !(*lambda > 0.0) {
                    return Err(domain("lambda must be positive"));
                }
                Ok(LinearRecursion::fou_exact(u, 0.0, 0.5 * lambda, 1.0, *initial))
            }
        }
    }

    /// Mean of the process at every grid point.
    pub fn mean(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        match self {
            Self::Fbm { .. } | Self::FgnIncrements { .. } => Ok(vec![0.0; grid.len()]),
            _ => Ok(self.recursion(grid)?.mean()),
        }
    }

    /// Covariance of the process values at grid points `idx` (any order).
    pub fn covariance_at(&self, grid: &TimeGrid, idx: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= grid.len()) {
            return Err(Error::Shape { expected: grid.len(), actual: bad });
        }
        let u = grid.points();
        match self {
            Self::Fbm { hurst } => {
                let two_h = hurst.twice();
                Ok(Matrix::from_fn(idx.len(), idx.len(), |i, j| {
                    fbm_cov_unchecked(u[idx[i]], u[idx[j]], two_h)
                }))
            }
            Self::FgnIncrements { hurst, step } => {
                if !(*step > 0.0) {
                    return Err(domain("increment step must be positive"));
                }
                let two_h = hurst.twice();
                Ok(Matrix::from_fn(idx.len(), idx.len(), |i, j| {
                    increment_cov(u[idx[i]] - u[idx[j]], *step, two_h)
                }))
            }
            _ => self.recursion(grid)?.covariance(grid, self.hurst(), idx),
        }
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fbm { hurst } => write!(f, "fbm(H={hurst})"),
            Self::FgnIncrements { hurst, step } => write!(f, "fgn(H={hurst},dt={step})"),
            Self::IntegralProcess { hurst, integrand } => match integrand {
                Coefficient::Constant(c) => write!(f, "integral(H={hurst},f={c})"),
                Coefficient::Tabulated(_) => write!(f, "integral(H={hurst},f=tabulated)"),
            },
            Self::Fou { hurst, level, decay, volatility, initial } => {
                let show = |c: &Coefficient| match c {
                    Coefficient::Constant(v) => format!("{v}"),
                    Coefficient::Tabulated(_) => "tabulated".into(),
                };
                write!(
                    f,
                    "fou(H={hurst},k={},a={},sigma={},a0={initial})",
                    show(level),
                    show(decay),
                    show(volatility)
                )
            }
            Self::FcirLatent { hurst, lambda, initial } => {
                write!(f, "fcir-latent(H={hurst},lambda={lambda},a0={initial})")
            }
        }
    }
}

/// `build_cov_matrix`: covariance of the model at every point of `grid`.
pub fn build_cov_matrix(model: &CovarianceModel, grid: &TimeGrid) -> Result<Matrix> {
    let idx: Vec<usize> = (0..grid.len()).collect();
    let mut c = model.covariance_at(grid, &idx)?;
    c.symmetrize();
    Ok(c)
}

/// First-order linear recursion driven by fBm increments.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRecursion {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub drift: Vec<f64>,
    pub initial: f64,
}

impl LinearRecursion {
    pub fn fbm(steps: usize) -> Self {
        Self { phi: vec![1.0; steps], psi: vec![1.0; steps], drift: vec![0.0; steps], initial: 0.0 }
    }

    /// Exact exponential kernel for constant coefficients, with the noise
    /// integrand evaluated at the left end of each step:
    /// `X_{n+1} = e^{−aΔ} X_n + k(1 − e^{−aΔ})/a + σ e^{−aΔ} ΔB_n`.
    pub fn fou_exact(u: &[f64], level: f64, decay: f64, vol: f64, initial: f64) -> Self {
        let m = u.len() - 1;
        let mut phi = Vec::with_capacity(m);
        let mut psi = Vec::with_capacity(m);
        let mut drift = Vec::with_capacity(m);
        for w in u.windows(2) {
            let dt = w[1] - w[0];
            let e = (-decay * dt).exp();
            phi.push(e);
            psi.push(vol * e);
            let growth = if decay == 0.0 { dt } else { -(-decay * dt).exp_m1() / decay };
            drift.push(level * growth);
        }
        Self { phi, psi, drift, initial }
    }

    /// Euler–Maruyama: `X_{n+1} = X_n + (k_n − a_n X_n)Δ + σ_n ΔB_n`.
    pub fn fou_euler(
        u: &[f64],
        level: &Coefficient,
        decay: &Coefficient,
        vol: &Coefficient,
        initial: f64,
    ) -> Self {
        let m = u.len() - 1;
        let mut phi = Vec::with_capacity(m);
        let mut psi = Vec::with_capacity(m);
        let mut drift = Vec::with_capacity(m);
        for n in 0..m {
            let dt = u[n + 1] - u[n];
            phi.push(1.0 - decay.at(n) * dt);
            psi.push(vol.at(n));
            drift.push(level.at(n) * dt);
        }
        Self { phi, psi, drift, initial }
    }

    pub fn steps(&self) -> usize {
        self.phi.len()
    }

    /// Deterministic part of the process (the mean), length `steps + 1`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        let mut x = self.initial;
        out.push(x);
        for n in 0..self.steps() {
            x = self.phi[n] * x + self.drift[n];
            out.push(x);
        }
        out
    }

    /// Run the recursion on increments, writing `steps + 1` values.
    pub fn apply(&self, increments: &[f64], out: &mut [f64]) {
        let mut x = self.initial;
        out[0] = x;
        for n in 0..self.steps() {
            x = self.phi[n] * x + self.drift[n] + self.psi[n] * increments[n];
            out[n + 1] = x;
        }
    }

    /// Invert the recursion: recover the increments from a path.
    pub fn increments_from_path(&self, path: &[f64]) -> Result<Vec<f64>> {
        if path.len() != self.steps() + 1 {
            return Err(Error::Shape { expected: self.steps() + 1, actual: path.len() });
        }
        (0..self.steps())
            .map(|n| {
                if self.psi[n] == 0.0 {
                    return Err(domain("recursion has zero noise loading; increments not identifiable"));
                }
                Ok((path[n + 1] - self.phi[n] * path[n] - self.drift[n]) / self.psi[n])
            })
            .collect()
    }

    /// Covariance of the process values at grid indices `idx`.
    ///
    /// With `C` the increment covariance, first `G[j][c] = Cov(ΔB_j, X_{idx_c})`
    /// is built by running the recursion along each row of `C`, then
    /// `Cov(X_n, X_{idx_c})` by running it once more along `G`. Cost is
    /// `O(K²)` time and `O(K·|idx|)` memory for `K = max(idx)`.
    pub fn covariance(&self, grid: &TimeGrid, hurst: HurstIndex, idx: &[usize]) -> Result<Matrix> {
        if grid.len() != self.steps() + 1 {
            return Err(Error::Shape { expected: self.steps() + 1, actual: grid.len() });
        }
        let r = idx.len();
        let k_max = idx.iter().copied().max().unwrap_or(0);
        if r == 0 || k_max == 0 {
            return Ok(Matrix::zeros(r, r));
        }
        // columns requested at each grid index (several entries may repeat)
        let mut wanted: Vec<Vec<usize>> = vec![Vec::new(); k_max + 1];
        for (c, &i) in idx.iter().enumerate() {
            wanted[i].push(c);
        }
        let two_h = hurst.twice();
        let u = grid.points();
        let lag_cov: Option<Vec<f64>> = grid.uniform_step().map(|dt| {
            (0..k_max).map(|lag| fgn_autocov_unchecked(lag, two_h, dt)).collect()
        });
        let inc_cov = |j: usize, n: usize| -> f64 {
            match &lag_cov {
                Some(lc) => lc[j.abs_diff(n)],
                None => {
                    let (a0, a1, b0, b1) = (u[j], u[j + 1], u[n], u[n + 1]);
                    fbm_cov_unchecked(a1, b1, two_h) - fbm_cov_unchecked(a1, b0, two_h)
                        - fbm_cov_unchecked(a0, b1, two_h)
                        + fbm_cov_unchecked(a0, b0, two_h)
                }
            }
        };

        let mut g = Matrix::zeros(k_max, r);
        let mut row = vec![0.0; k_max];
        for j in 0..k_max {
            for (n, v) in row.iter_mut().enumerate() {
                *v = inc_cov(j, n);
            }
            let mut h = 0.0;
            let gj = g.row_mut(j);
            for n in 0..k_max {
                h = self.phi[n] * h + self.psi[n] * row[n];
                for &c in &wanted[n + 1] {
                    gj[c] = h;
                }
            }
        }

        let mut out = Matrix::zeros(r, r);
        let mut v = vec![0.0; r];
        for n in 0..k_max {
            let gn = g.row(n);
            for c in 0..r {
                v[c] = self.phi[n] * v[c] + self.psi[n] * gn[c];
            }
            for &a in &wanted[n + 1] {
                out.row_mut(a).copy_from_slice(&v);
            }
        }
        out.symmetrize();
        Ok(out)
    }
}
