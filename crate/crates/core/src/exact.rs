//! Conditional-mean predictors from discrete observations.
//!
//! Each predictor conditions the joint Gaussian law of the observed values and
//! the value at the horizon `T`. For fBm the covariance is closed form; for the
//! integral process and fOU it comes from the linear-map construction on a
//! simulation grid, so the predictor is exact for the simulated process. The
//! fCIR predictor conditions the latent fOU and maps the Gaussian conditional
//! law through `f(x) = sgn(x) σ² x² / 4`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::conditioning::{condition_block, gaussian_condition, BlockConditional, GaussianConditional};
use crate::covariance::{Coefficient, CovarianceModel, HurstIndex, TimeGrid};
use crate::error::{domain, Error, Result};
use crate::linalg::{cholesky_with_jitter, Matrix};
use crate::quadrature::GaussLegendre;
use crate::rng;
use crate::simulation::SignedSquare;
use crate::truncnorm::truncated_normal_upper_second_moment;

/// Map from the Gaussian conditional law to the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputTransform {
    /// Prediction is the conditional mean.
    Identity,
    /// Prediction is `E[f(U)]`, `U` the latent conditional law.
    SignedSquare(SignedSquare),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactPredictor {
    pub conditional: GaussianConditional,
    pub observation_times: TimeGrid,
    pub horizon: f64,
    pub transform: OutputTransform,
}

impl ExactPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self.transform {
            OutputTransform::Identity => self.conditional.predict(x),
            OutputTransform::SignedSquare(map) => {
                let mut latent = Vec::with_capacity(x.len());
                for (i, &r) in x.iter().enumerate() {
                    if r == 0.0 {
                        return Err(Error::OrthantCaseRequired { index: i });
                    }
                    latent.push(map.inverse(r));
                }
                let mu = self.conditional.predict(&latent)?;
                Ok(signed_square_expectation(map, mu, self.conditional.std_dev()))
            }
        }
    }

    /// Predictions for every row of `observations`.
    pub fn predict_rows(&self, observations: &Matrix) -> Result<Vec<f64>> {
        (0..observations.rows()).map(|i| self.predict(observations.row(i))).collect()
    }

    /// `(t_i, weight_i)` pairs of the conditional-mean regression.
    pub fn weight_table(&self) -> Vec<(f64, f64)> {
        self.observation_times
            .points()
            .iter()
            .copied()
            .zip(self.conditional.weight.iter().copied())
            .collect()
    }
}

/// `E[f(U)]` for `U ~ N(μ, σ²)`:
/// `σ²/4 · (E[U²; U > 0] − E[U²; U < 0])`.
pub fn signed_square_expectation(map: SignedSquare, mu: f64, sd: f64) -> f64 {
    if !(sd > 0.0) {
        return map.apply(mu);
    }
    let pos = truncated_normal_upper_second_moment(mu, sd).unwrap_or(0.0);
    let neg = truncated_normal_upper_second_moment(-mu, sd).unwrap_or(0.0);
    map.sigma * map.sigma / 4.0 * (pos - neg)
}

/// Minimal attainable MSE of an identity-transform predictor.
pub fn theoretical_mse(predictor: &ExactPredictor) -> Result<f64> {
    match predictor.transform {
        OutputTransform::Identity => Ok(predictor.conditional.variance),
        OutputTransform::SignedSquare(_) => {
            Err(Error::Unsupported("the fCIR predictor MSE is only estimated empirically".into()))
        }
    }
}

fn check_times(observation_times: &TimeGrid, horizon: f64) -> Result<()> {
    if !(observation_times.first() > 0.0) {
        return Err(domain("observation times must be positive"));
    }
    if !(observation_times.last() < horizon) || !horizon.is_finite() {
        return Err(domain("last observation time must precede the horizon"));
    }
    Ok(())
}

/// Condition the value at `horizon` on the values at `observation_times`,
/// all of which must lie on `grid`.
fn condition_on(
    model: &CovarianceModel,
    grid: &TimeGrid,
    observation_times: &TimeGrid,
    horizon: f64,
) -> Result<GaussianConditional> {
    check_times(observation_times, horizon)?;
    let mut idx = grid.indices_of(observation_times.points())?;
    idx.push(grid.index_of(horizon)?);
    let n = idx.len() - 1;
    let full_mean = model.mean(grid)?;
    let mean: Vec<f64> = idx.iter().map(|&i| full_mean[i]).collect();
    let cov = model.covariance_at(grid, &idx)?;
    let observed: Vec<usize> = (0..n).collect();
    // observations carrying no randomness (zero integrand or volatility)
    if observed.iter().all(|&i| observed.iter().all(|&j| cov[(i, j)] == 0.0)) {
        return Ok(GaussianConditional {
            weight: vec![0.0; n],
            offset: mean[n],
            variance: cov[(n, n)].max(0.0),
        });
    }
    gaussian_condition(&mean, &cov, n, &observed)
}

fn identity(conditional: GaussianConditional, observation_times: &TimeGrid, horizon: f64) -> ExactPredictor {
    ExactPredictor {
        conditional,
        observation_times: observation_times.clone(),
        horizon,
        transform: OutputTransform::Identity,
    }
}

/// Optimal predictor of `B^H_T` from `B^H_{t_1}, …, B^H_{t_N}`.
pub fn build_fbm_predictor(hurst: HurstIndex, observation_times: &TimeGrid, horizon: f64) -> Result<ExactPredictor> {
    check_times(observation_times, horizon)?;
    let mut pts = observation_times.points().to_vec();
    pts.push(horizon);
    let grid = TimeGrid::new(pts)?;
    let c = condition_on(&CovarianceModel::Fbm { hurst }, &grid, observation_times, horizon)?;
    Ok(identity(c, observation_times, horizon))
}

/// Optimal predictor of `Z_T = ∫_0^T f dB^H` from observed `Z_{t_i}`.
pub fn build_integral_predictor(
    integrand: Coefficient,
    hurst: HurstIndex,
    observation_times: &TimeGrid,
    horizon: f64,
    sim_grid: &TimeGrid,
) -> Result<ExactPredictor> {
    let model = CovarianceModel::IntegralProcess { hurst, integrand };
    let c = condition_on(&model, sim_grid, observation_times, horizon)?;
    Ok(identity(c, observation_times, horizon))
}

/// Optimal predictor of the fOU value `A_T`. The offset carries the
/// deterministic part of the solution.
#[allow(clippy::too_many_arguments)]
pub fn build_fou_predictor(
    level: Coefficient,
    decay: Coefficient,
    volatility: Coefficient,
    initial: f64,
    hurst: HurstIndex,
    observation_times: &TimeGrid,
    horizon: f64,
    sim_grid: &TimeGrid,
) -> Result<ExactPredictor> {
    let model = CovarianceModel::Fou { hurst, level, decay, volatility, initial };
    let c = condition_on(&model, sim_grid, observation_times, horizon)?;
    Ok(identity(c, observation_times, horizon))
}

fn fcir_latent(lambda: f64, sigma: f64, r0: f64, hurst: HurstIndex) -> Result<(CovarianceModel, SignedSquare)> {
    if hurst.value() <= 0.5 {
        return Err(Error::Unsupported(format!("fCIR needs H > 1/2, got {hurst}")));
    }
    if !(lambda > 0.0 && sigma > 0.0 && r0 > 0.0) {
        return Err(domain("fCIR needs lambda, sigma and r0 all positive"));
    }
    let map = SignedSquare { sigma };
    Ok((CovarianceModel::FcirLatent { hurst, lambda, initial: map.inverse(r0) }, map))
}

/// Optimal predictor of the fCIR value `R_T` from nonzero observations.
///
/// Observations are mapped to latent values `a_i = f⁻¹(r_i)` (negative for
/// negative `r_i`); a zero observation yields
/// [`Error::OrthantCaseRequired`] at prediction time.
pub fn build_fcir_predictor(
    lambda: f64,
    sigma: f64,
    r0: f64,
    hurst: HurstIndex,
    observation_times: &TimeGrid,
    horizon: f64,
    sim_grid: &TimeGrid,
) -> Result<ExactPredictor> {
    let (model, map) = fcir_latent(lambda, sigma, r0, hurst)?;
    let c = condition_on(&model, sim_grid, observation_times, horizon)?;
    Ok(ExactPredictor {
        conditional: c,
        observation_times: observation_times.clone(),
        horizon,
        transform: OutputTransform::SignedSquare(map),
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantEstimate {
    pub value: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub proposals: u64,
}

/// Rejection-sampling controls for orthant-conditioned expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthantSampling {
    /// Accepted draws to collect.
    pub n_mc: u64,
    pub seed: u64,
    /// Hard cap on proposals before giving up.
    pub max_proposals: u64,
}

impl OrthantSampling {
    pub fn new(n_mc: u64, seed: u64) -> Self {
        Self { n_mc, seed, max_proposals: 1 << 32 }
    }
}

/// Proposals per RNG stream; chunk `c` draws from stream `(seed, c)`.
const ORTHANT_CHUNK: u64 = 4096;
const ORTHANT_MIN_RATE: f64 = 1e-6;
const ORTHANT_RATE_CHECK_AFTER: u64 = 1_000_000;

/// `E[g(U_target) | U_j ≤ 0 for j in constrained]` for `U` with the given
/// conditional law, by rejection sampling.
pub fn orthant_expectation(
    law: &BlockConditional,
    observed: &[f64],
    constrained: &[usize],
    target: usize,
    g: impl Fn(f64) -> f64,
    sampling: OrthantSampling,
) -> Result<OrthantEstimate> {
    let d = law.offset.len();
    if let Some(&bad) = constrained.iter().chain([&target]).find(|&&j| j >= d) {
        return Err(Error::Shape { expected: d, actual: bad });
    }
    if sampling.n_mc < 2 {
        return Err(domain("n_mc must be at least 2"));
    }
    let mean = law.mean_given(observed)?;
    let chol = cholesky_with_jitter(&law.covariance)?;
    let mut z = vec![0.0; d];
    let mut u = vec![0.0; d];
    let (mut acc, mut proposals) = (0u64, 0u64);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut chunk = 0u64;
    while acc < sampling.n_mc {
        let mut r = rng::stream(sampling.seed, chunk);
        chunk += 1;
        for _ in 0..ORTHANT_CHUNK {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut r);
            }
            chol.mul_lower(&z, &mut u);
            proposals += 1;
            if constrained.iter().all(|&j| mean[j] + u[j] <= 0.0) {
                let v = g(mean[target] + u[target]);
                acc += 1;
                sum += v;
                sum_sq += v * v;
                if acc == sampling.n_mc {
                    break;
                }
            }
        }
        let rate = acc as f64 / proposals as f64;
        let stalled = proposals >= ORTHANT_RATE_CHECK_AFTER && rate < ORTHANT_MIN_RATE;
        if acc < sampling.n_mc && (stalled || proposals >= sampling.max_proposals) {
            return Err(Error::InfeasibleOrthant { rate, proposals });
        }
    }
    let n = acc as f64;
    let value = sum / n;
    let var = ((sum_sq - n * value * value) / (n - 1.0)).max(0.0);
    Ok(OrthantEstimate { value, std_error: (var / n).sqrt(), accepted: acc, proposals })
}

/// fCIR prediction when some observations are zero: the latent value at each
/// zero observation is restricted to `A ≤ 0` and the expectation of `f(A_T)`
/// under the resulting law is estimated by rejection sampling.
#[allow(clippy::too_many_arguments)]
pub fn fcir_predict_orthant_mc(
    lambda: f64,
    sigma: f64,
    r0: f64,
    hurst: HurstIndex,
    observation_times: &TimeGrid,
    observed: &[f64],
    horizon: f64,
    sim_grid: &TimeGrid,
    sampling: OrthantSampling,
) -> Result<OrthantEstimate> {
    let (model, map) = fcir_latent(lambda, sigma, r0, hurst)?;
    check_times(observation_times, horizon)?;
    if observed.len() != observation_times.len() {
        return Err(Error::Shape { expected: observation_times.len(), actual: observed.len() });
    }
    let zeros: Vec<usize> = (0..observed.len()).filter(|&i| observed[i] == 0.0).collect();
    if zeros.is_empty() {
        return Err(domain("orthant estimator needs at least one zero observation"));
    }
    let nonzero: Vec<usize> = (0..observed.len()).filter(|&i| observed[i] != 0.0).collect();
    let mut idx = sim_grid.indices_of(observation_times.points())?;
    idx.push(sim_grid.index_of(horizon)?);
    let full_mean = model.mean(sim_grid)?;
    let mean: Vec<f64> = idx.iter().map(|&i| full_mean[i]).collect();
    let cov = model.covariance_at(sim_grid, &idx)?;
    let n = observed.len();
    let mut targets = zeros.clone();
    targets.push(n);
    let law = condition_block(&mean, &cov, &targets, &nonzero)?;
    let latent: Vec<f64> = nonzero.iter().map(|&i| map.inverse(observed[i])).collect();
    let constrained: Vec<usize> = (0..zeros.len()).collect();
    orthant_expectation(&law, &latent, &constrained, zeros.len(), |a| map.apply(a), sampling)
}

/// `κ_H = √(2H Γ(3/2 − H) / (Γ(H + 1/2) Γ(2 − 2H)))`, in log space.
pub fn kappa(hurst: HurstIndex) -> f64 {
    let h = hurst.value();
    let l = (2.0 * h).ln() + libm::lgamma(1.5 - h) - libm::lgamma(h + 0.5) - libm::lgamma(2.0 - 2.0 * h);
    (0.5 * l).exp()
}

/// Covariance of the unit-volatility, zero-level fOU started at 0,
/// `Cov(A_{t_i}, A_{t_j}) = ∫_0^{t_i∧t_j} Γ*g_i(s) Γ*g_j(s) ds`
/// with `g_i(u) = e^{−a(t_i−u)} 1_{[0,t_i]}(u)` and
/// `Γ*g(s) = (H−½) κ_H s^{½−H} ∫_s^T u^{H−½} (u−s)^{H−3/2} g(u) du`.
#[derive(Debug, Clone)]
pub struct GammaCovariance {
    rule: GaussLegendre,
    hurst: HurstIndex,
    decay: f64,
    horizon: f64,
    kappa: f64,
}

impl GammaCovariance {
    pub fn new(hurst: HurstIndex, decay: f64, horizon: f64, nodes: usize) -> Result<Self> {
        if hurst.value() <= 0.5 {
            return Err(Error::Unsupported(format!("the Gamma* covariance needs H > 1/2, got {hurst}")));
        }
        if !decay.is_finite() || !(horizon > 0.0) {
            return Err(domain("decay must be finite and horizon positive"));
        }
        Ok(Self { rule: GaussLegendre::new(nodes)?, hurst, decay, horizon, kappa: kappa(hurst) })
    }

    /// `Γ*g_t(s)` for `0 < s < t`. With `w = (u−s)^{H−½}` the factor
    /// `(H−½)(u−s)^{H−3/2} du` becomes `dw`.
    fn gamma_star(&self, s: f64, t: f64) -> f64 {
        let h = self.hurst.value();
        let p = 1.0 / (h - 0.5);
        let top = (t - s).powf(h - 0.5);
        let a = self.decay;
        let inner = self.rule.integrate(0.0, top, |w| {
            let u = s + w.powf(p);
            u.powf(h - 0.5) * (-a * (t - u)).exp()
        });
        self.kappa * s.powf(0.5 - h) * inner
    }

    pub fn cov(&self, ti: f64, tj: f64) -> Result<f64> {
        if !(ti >= 0.0 && tj >= 0.0 && ti <= self.horizon && tj <= self.horizon) {
            return Err(domain("times must lie in [0, T]"));
        }
        let m = ti.min(tj);
        if m == 0.0 {
            return Ok(0.0);
        }
        let h = self.hurst.value();
        let f = |s: f64| self.gamma_star(s, ti) * self.gamma_star(s, tj);
        // lower half: s = (m/2) y^p flattens s^{1−2H}; upper half:
        // m − s = (m/2) y^q flattens (m−s)^{H−½} (one factor) or (m−s)^{2H−1}
        let p = 1.0 / (2.0 - 2.0 * h);
        let q = if ti == tj { 1.0 / (2.0 * h) } else { 1.0 / (h + 0.5) };
        let half = 0.5 * m;
        let lower = self.rule.integrate(0.0, 1.0, |y| f(half * y.powf(p)) * half * p * y.powf(p - 1.0));
        let upper = self.rule.integrate(0.0, 1.0, |y| f(m - half * y.powf(q)) * half * q * y.powf(q - 1.0));
        Ok(lower + upper)
    }
}

/// One-shot [`GammaCovariance::cov`].
pub fn fou_gamma_cov(ti: f64, tj: f64, hurst: HurstIndex, decay: f64, horizon: f64, nodes: usize) -> Result<f64> {
    GammaCovariance::new(hurst, decay, horizon, nodes)?.cov(ti, tj)
}

/// `sin((H − ½)π) / π`, the prefactor of the continuous-observation weights.
pub(crate) fn sine_factor(hurst: HurstIndex) -> f64 {
    ((hurst.value() - 0.5) * PI).sin() / PI
}
