//! Seeded Monte-Carlo paths of fBm and of processes driven by it.
//!
//! Path `i` of a batch with seed `s` is always drawn from stream `(s, i)`, so
//! a batch can be generated in any order or split without changing values.

mod sampler;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::{Coefficient, CovarianceModel, HurstIndex, LinearRecursion, TimeGrid};
use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

pub use sampler::{FbmSampler, SamplerMethod, Scratch, EIGEN_FLOOR};

/// `f(x) = sgn(x) σ² x² / 4`, mapping the latent fOU to the fCIR process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedSquare {
    pub sigma: f64,
}

impl SignedSquare {
    pub fn apply(self, x: f64) -> f64 {
        let s = self.sigma;
        if x == 0.0 {
            return 0.0;
        }
        x.signum() * s * s * x * x / 4.0
    }

    /// `f⁻¹(r) = sgn(r) √(4|r|/σ²)`.
    pub fn inverse(self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        r.signum() * (4.0 * r.abs()).sqrt() / self.sigma
    }
}

/// Simulated paths on a shared grid (row = path).
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub values: Matrix,
    pub model: CovarianceModel,
    /// Pointwise map applied to the Gaussian process (fCIR), if any.
    pub output_map: Option<SignedSquare>,
    pub seed: u64,
}

impl PathBatch {
    pub fn n_paths(&self) -> usize {
        self.values.rows()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }
}

/// Observed values `V_{t_1}, …, V_{t_N}` per path, with `t_N = s < horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub times: TimeGrid,
    pub values: Matrix,
    pub horizon: f64,
}

/// A model bound to a grid: sampler plus recursion, reusable across batches.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    grid: TimeGrid,
    model: CovarianceModel,
    sampler: FbmSampler,
    recursion: LinearRecursion,
    output_map: Option<SignedSquare>,
}

impl PathSimulator {
    pub fn new(model: CovarianceModel, grid: TimeGrid) -> Result<Self> {
        let sampler = FbmSampler::new(model.hurst(), &grid)?;
        Self::with_sampler(model, grid, sampler)
    }

    pub fn with_sampler(model: CovarianceModel, grid: TimeGrid, sampler: FbmSampler) -> Result<Self> {
        let recursion = model.recursion(&grid)?;
        if sampler.steps() != recursion.steps() {
            return Err(Error::Shape { expected: recursion.steps(), actual: sampler.steps() });
        }
        Ok(Self { grid, model, sampler, recursion, output_map: None })
    }

    /// fCIR: latent fOU with `k = 0`, `a = λ/2`, `σ = 1`, started at `f⁻¹(r0)`.
    pub fn fcir(lambda: f64, sigma: f64, r0: f64, hurst: HurstIndex, grid: TimeGrid) -> Result<Self> {
        check_fcir(lambda, sigma, r0, hurst)?;
        let map = SignedSquare { sigma };
        let model = CovarianceModel::FcirLatent { hurst, lambda, initial: map.inverse(r0) };
        let mut sim = Self::new(model, grid)?;
        sim.output_map = Some(map);
        Ok(sim)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn sampler(&self) -> &FbmSampler {
        &self.sampler
    }

    pub fn recursion(&self) -> &LinearRecursion {
        &self.recursion
    }

    pub fn output_map(&self) -> Option<SignedSquare> {
        self.output_map
    }

    pub fn scratch(&self) -> PathScratch {
        PathScratch { inner: self.sampler.scratch(), increments: vec![0.0; self.recursion.steps()] }
    }

    /// Latent (Gaussian) path `index` of the batch keyed by `seed`.
    pub fn latent_path(&self, seed: u64, index: u64, scratch: &mut PathScratch, out: &mut [f64]) {
        self.sampler.path_increments(seed, index, &mut scratch.inner, &mut scratch.increments);
        self.recursion.apply(&scratch.increments, out);
    }

    /// Observed path `index` (latent path passed through the output map).
    pub fn path(&self, seed: u64, index: u64, scratch: &mut PathScratch, out: &mut [f64]) {
        self.latent_path(seed, index, scratch, out);
        if let Some(map) = self.output_map {
            for v in out.iter_mut() {
                *v = map.apply(*v);
            }
        }
    }

    /// Paths `range` of the batch keyed by `seed`, as rows of a matrix.
    pub fn sample_range(&self, seed: u64, range: Range<u64>) -> Matrix {
        let n = (range.end - range.start) as usize;
        let mut values = Matrix::zeros(n, self.grid.len());
        let mut scratch = self.scratch();
        for (r, index) in range.enumerate() {
            self.path(seed, index, &mut scratch, values.row_mut(r));
        }
        values
    }

    pub fn sample(&self, n_paths: usize, seed: u64) -> Result<PathBatch> {
        if n_paths == 0 {
            return Err(domain("n_paths must be at least 1"));
        }
        Ok(self.batch_from_values(self.sample_range(seed, 0..n_paths as u64), seed))
    }

    /// Wrap externally generated rows (e.g. sampled in parallel) as a batch.
    pub fn batch_from_values(&self, values: Matrix, seed: u64) -> PathBatch {
        PathBatch {
            grid: self.grid.clone(),
            values,
            model: self.model.clone(),
            output_map: self.output_map,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathScratch {
    inner: Scratch,
    increments: Vec<f64>,
}

fn check_fcir(lambda: f64, sigma: f64, r0: f64, hurst: HurstIndex) -> Result<()> {
    if hurst.value() <= 0.5 {
        return Err(Error::Unsupported(format!("fCIR needs H > 1/2, got {hurst}")));
    }
    if !(lambda > 0.0 && sigma > 0.0 && r0 > 0.0) {
        return Err(domain("fCIR needs lambda, sigma and r0 all positive"));
    }
    Ok(())
}

/// fBm paths on an equally spaced grid starting at 0.
pub fn sample_fbm(hurst: HurstIndex, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch> {
    if grid.uniform_step().is_none() || !grid.origin_included() {
        return Err(domain("sample_fbm needs an equally spaced grid starting at 0"));
    }
    PathSimulator::new(CovarianceModel::Fbm { hurst }, grid.clone())?.sample(n_paths, seed)
}

/// `Z_t = ∫_0^t f dB^H` by left-point Riemann–Stieltjes sums on the grid.
pub fn sample_integral_process(
    integrand: Coefficient,
    hurst: HurstIndex,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    PathSimulator::new(CovarianceModel::IntegralProcess { hurst, integrand }, grid.clone())?
        .sample(n_paths, seed)
}

/// fOU paths: exact exponential kernel for constant coefficients, otherwise
/// Euler–Maruyama.
#[allow(clippy::too_many_arguments)]
pub fn sample_fou(
    level: Coefficient,
    decay: Coefficient,
    volatility: Coefficient,
    initial: f64,
    hurst: HurstIndex,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    let model = CovarianceModel::Fou { hurst, level, decay, volatility, initial };
    PathSimulator::new(model, grid.clone())?.sample(n_paths, seed)
}

/// fCIR paths `R = f(A)`; returns `(R, A)` with the latent batch retained.
pub fn sample_fcir_with_latent(
    lambda: f64,
    sigma: f64,
    r0: f64,
    hurst: HurstIndex,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<(PathBatch, PathBatch)> {
    let sim = PathSimulator::fcir(lambda, sigma, r0, hurst, grid.clone())?;
    if n_paths == 0 {
        return Err(domain("n_paths must be at least 1"));
    }
    let map = SignedSquare { sigma };
    let mut latent = Matrix::zeros(n_paths, grid.len());
    let mut scratch = sim.scratch();
    for i in 0..n_paths {
        sim.latent_path(seed, i as u64, &mut scratch, latent.row_mut(i));
    }
    let mut observed = latent.clone();
    for i in 0..n_paths {
        for v in observed.row_mut(i) {
            *v = map.apply(*v);
        }
    }
    // the initial value goes through f(f⁻¹(r0)); pin it to r0 exactly
    if grid.origin_included() {
        for i in 0..n_paths {
            observed[(i, 0)] = r0;
        }
    }
    let r = PathBatch {
        grid: grid.clone(),
        values: observed,
        model: sim.model().clone(),
        output_map: Some(map),
        seed,
    };
    let a = PathBatch { output_map: None, values: latent, ..r.clone() };
    Ok((r, a))
}

pub fn sample_fcir(
    lambda: f64,
    sigma: f64,
    r0: f64,
    hurst: HurstIndex,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch> {
    sample_fcir_with_latent(lambda, sigma, r0, hurst, grid, n_paths, seed).map(|(r, _)| r)
}

/// Split a batch into observations at `observation_times` and targets at
/// `horizon`. Times must be grid points; nothing is interpolated.
pub fn subsample(
    batch: &PathBatch,
    observation_times: &TimeGrid,
    horizon: f64,
) -> Result<(ObservationSet, Vec<f64>)> {
    if !(observation_times.last() < horizon) {
        return Err(domain("last observation time must precede the horizon"));
    }
    let idx = batch.grid.indices_of(observation_times.points())?;
    let target = batch.grid.index_of(horizon)?;
    let n = batch.n_paths();
    let mut values = Matrix::zeros(n, idx.len());
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row = batch.path(i);
        for (o, &j) in values.row_mut(i).iter_mut().zip(&idx) {
            *o = row[j];
        }
        y.push(row[target]);
    }
    Ok((ObservationSet { times: observation_times.clone(), values, horizon }, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn fbm_starts_at_zero_and_is_deterministic() {
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let a = sample_fbm(h(0.3), &grid, 5, 11).unwrap();
        let b = sample_fbm(h(0.3), &grid, 5, 11).unwrap();
        assert_eq!(a, b);
        for i in 0..5 {
            assert_eq!(a.path(i)[0], 0.0);
            assert!(a.path(i).iter().all(|v| v.is_finite()));
        }
        let c = sample_fbm(h(0.3), &grid, 5, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn sample_fbm_rejects_nonuniform_grid() {
        let grid = TimeGrid::new(vec![0.0, 0.1, 0.5]).unwrap();
        assert!(sample_fbm(h(0.3), &grid, 2, 1).is_err());
    }

    #[test]
    fn path_independent_of_batch_split() {
        let grid = TimeGrid::uniform(2.0, 20).unwrap();
        let sim = PathSimulator::new(CovarianceModel::Fbm { hurst: h(0.7) }, grid).unwrap();
        let all = sim.sample_range(3, 0..10);
        let tail = sim.sample_range(3, 6..10);
        for r in 0..4 {
            assert_eq!(all.row(6 + r), tail.row(r));
        }
    }

    #[test]
    fn unit_integrand_is_fbm() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let b = sample_fbm(h(0.7), &grid, 4, 5).unwrap();
        let z = sample_integral_process(Coefficient::Constant(1.0), h(0.7), &grid, 4, 5).unwrap();
        assert_eq!(b.values, z.values);
        let zero = sample_integral_process(Coefficient::Constant(0.0), h(0.7), &grid, 4, 5).unwrap();
        assert!(zero.values.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn degenerate_fou_is_fbm() {
        let grid = TimeGrid::uniform(1.0, 32).unwrap();
        let b = sample_fbm(h(0.4), &grid, 3, 9).unwrap();
        let c = Coefficient::Constant;
        let a = sample_fou(c(0.0), c(0.0), c(1.0), 0.0, h(0.4), &grid, 3, 9).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn noise_free_fou_follows_ode() {
        let grid = TimeGrid::uniform(4.0, 40).unwrap();
        let c = Coefficient::Constant;
        let a = sample_fou(c(0.0), c(0.7), c(0.0), 3.0, h(0.6), &grid, 2, 1).unwrap();
        for (t, v) in grid.points().iter().zip(a.path(1)) {
            assert!((v - 3.0 * (-0.7 * t).exp()).abs() < 1e-13);
        }
        assert_eq!(a.path(0)[0], 3.0);
    }

    #[test]
    fn signed_square_examples() {
        let f = SignedSquare { sigma: 2.0 };
        assert_eq!(f.apply(2.0), 4.0);
        assert_eq!(f.apply(-1.0), -1.0);
        for sigma in [0.5, 1.0, 2.0, 3.0, 0.7] {
            let f = SignedSquare { sigma };
            for r0 in [0.25, 1.0, 9.0] {
                let back = f.apply(f.inverse(r0));
                assert!((back - r0).abs() <= r0 * f64::EPSILON, "sigma {sigma} r0 {r0} -> {back}");
            }
        }
    }

    #[test]
    fn fcir_checks_regime() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        assert!(matches!(
            sample_fcir(1.0, 1.0, 1.0, h(0.5), &grid, 1, 0),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(sample_fcir(1.0, 1.0, 0.0, h(0.7), &grid, 1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn fcir_is_pointwise_map_of_latent() {
        let grid = TimeGrid::uniform(2.0, 16).unwrap();
        let (r, a) = sample_fcir_with_latent(1.0, 2.0, 1.0, h(0.7), &grid, 6, 4).unwrap();
        let f = SignedSquare { sigma: 2.0 };
        for i in 0..6 {
            assert_eq!(r.path(i)[0], 1.0);
            for j in 1..grid.len() {
                assert_eq!(r.path(i)[j], f.apply(a.path(i)[j]));
            }
        }
    }

    #[test]
    fn subsample_examples() {
        let grid = TimeGrid::uniform(2.0, 8).unwrap();
        let batch = sample_fbm(h(0.6), &grid, 3, 2).unwrap();
        let obs = TimeGrid::new(grid.points()[1..8].to_vec()).unwrap();
        let (x, y) = subsample(&batch, &obs, 2.0).unwrap();
        assert_eq!(x.values.cols(), 7);
        for i in 0..3 {
            assert_eq!(y[i].to_bits(), batch.path(i)[8].to_bits());
            for j in 0..7 {
                assert_eq!(x.values[(i, j)].to_bits(), batch.path(i)[j + 1].to_bits());
            }
        }
        let single = TimeGrid::new(vec![1.0]).unwrap();
        let (x, _) = subsample(&batch, &single, 2.0).unwrap();
        assert_eq!(x.values.cols(), 1);
        let off = TimeGrid::new(vec![0.3]).unwrap();
        assert!(matches!(subsample(&batch, &off, 2.0), Err(Error::NotOnGrid { .. })));
    }
}
