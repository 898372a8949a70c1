use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::{fbm_cov_unchecked, fgn_autocov_unchecked, HurstIndex, TimeGrid};
use crate::error::{domain, Error, Result};
use crate::fft::FftPlan;
use crate::linalg::{cholesky_with_jitter, Cholesky, Matrix};
use crate::rng;

/// Eigenvalues of the circulant embedding below `−EIGEN_FLOOR · λ_max` make
/// the embedding fail; smaller negative values are rounded to zero.
pub const EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    CirculantEmbedding,
    Cholesky,
}

#[derive(Debug, Clone)]
enum Engine {
    Circulant { plan: FftPlan, scale: Vec<f64> },
    Cholesky(Cholesky),
}

/// Exact sampler of fBm increments on a grid starting at 0.
///
/// Uniform grids use the Davies–Harte circulant embedding of the fGn
/// autocovariance (one FFT of length `2·next_pow2(n)` per path); other grids,
/// or embeddings with a significantly negative eigenvalue, use the Cholesky
/// factor of the increment covariance.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: HurstIndex,
    steps: usize,
    engine: Engine,
}

impl FbmSampler {
    pub fn new(hurst: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        check_grid(grid)?;
        if let Some(dt) = grid.uniform_step() {
            match Self::circulant(hurst, grid.len() - 1, dt) {
                Ok(s) => return Ok(s),
                Err(Error::Simulation(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Self::cholesky(hurst, grid)
    }

    /// Cholesky sampler regardless of grid spacing.
    pub fn cholesky(hurst: HurstIndex, grid: &TimeGrid) -> Result<Self> {
        check_grid(grid)?;
        let u = grid.points();
        let m = u.len() - 1;
        let two_h = hurst.twice();
        let cov = Matrix::from_fn(m, m, |j, n| {
            fbm_cov_unchecked(u[j + 1], u[n + 1], two_h) - fbm_cov_unchecked(u[j + 1], u[n], two_h)
                - fbm_cov_unchecked(u[j], u[n + 1], two_h)
                + fbm_cov_unchecked(u[j], u[n], two_h)
        });
        let chol = cholesky_with_jitter(&cov)
            .map_err(|e| Error::Simulation(format!("increment covariance: {e}")))?;
        Ok(Self { hurst, steps: m, engine: Engine::Cholesky(chol) })
    }

    fn circulant(hurst: HurstIndex, steps: usize, dt: f64) -> Result<Self> {
        let half = steps.next_power_of_two();
        let size = 2 * half;
        let two_h = hurst.twice();
        let mut re = vec![0.0; size];
        let mut im = vec![0.0; size];
        for k in 0..=half {
            re[k] = fgn_autocov_unchecked(k, two_h, dt);
        }
        for k in 1..half {
            re[size - k] = re[k];
        }
        let plan = FftPlan::new(size)?;
        plan.forward(&mut re, &mut im)?;
        let max = re.iter().fold(f64::MIN, |m, v| m.max(*v));
        let min = re.iter().fold(f64::MAX, |m, v| m.min(*v));
        if min < -EIGEN_FLOOR * max {
            return Err(Error::Simulation(format!(
                "circulant embedding has negative eigenvalue {min:e}"
            )));
        }
        let scale = re.iter().map(|&l| (l.max(0.0) / size as f64).sqrt()).collect();
        Ok(Self { hurst, steps, engine: Engine::Circulant { plan, scale } })
    }

    pub fn method(&self) -> SamplerMethod {
        match self.engine {
            Engine::Circulant { .. } => SamplerMethod::CirculantEmbedding,
            Engine::Cholesky(_) => SamplerMethod::Cholesky,
        }
    }

    pub fn hurst(&self) -> HurstIndex {
        self.hurst
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn scratch(&self) -> Scratch {
        let n = match &self.engine {
            Engine::Circulant { plan, .. } => plan.len(),
            Engine::Cholesky(_) => self.steps,
        };
        Scratch { re: vec![0.0; n], im: vec![0.0; n] }
    }

    /// Draw one vector of increments from `rng` into `out` (length `steps`).
    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut Scratch, out: &mut [f64]) {
        match &self.engine {
            Engine::Circulant { plan, scale } => {
                for (k, s) in scale.iter().enumerate() {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    scratch.re[k] = s * a;
                    scratch.im[k] = s * b;
                }
                plan.forward(&mut scratch.re, &mut scratch.im)
                    .expect("scratch sized from the plan");
                out.copy_from_slice(&scratch.re[..self.steps]);
            }
            Engine::Cholesky(chol) => {
                for z in scratch.re.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                chol.mul_lower(&scratch.re, out);
            }
        }
    }

    /// Increments of path `index` in the batch keyed by `seed`.
    pub fn path_increments(&self, seed: u64, index: u64, scratch: &mut Scratch, out: &mut [f64]) {
        let mut r = rng::stream(seed, index);
        self.sample_increments(&mut r, scratch, out);
    }
}

fn check_grid(grid: &TimeGrid) -> Result<()> {
    if !grid.origin_included() || grid.len() < 2 {
        return Err(domain("sampler grid must start at 0 and have at least two points"));
    }
    Ok(())
}

/// Reusable buffers for [`FbmSampler::sample_increments`].
#[derive(Debug, Clone)]
pub struct Scratch {
    re: Vec<f64>,
    im: Vec<f64>,
}
