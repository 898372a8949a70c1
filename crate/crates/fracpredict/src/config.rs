//! Experiment configuration, read from TOML.
//!
//! ```toml
//! hurst = 0.7
//! s = 5.0
//! horizon = 10.0
//! n_obs = 32
//! seed = 7
//!
//! [process]
//! kind = "fou"        # fbm | integral | fou | fcir
//! decay = 0.5
//!
//! [train]
//! n_batches = 300
//! batch_size = 1024
//! ```
//!
//! Every key is optional; missing keys take the desk-scale defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use fracpredict_core::continuous::{ContinuousPredictorConfig, FouKernelVariant, OuterRule};
use fracpredict_core::nn::{Optimizer, TrainingConfig};
use fracpredict_core::{Coefficient, CovarianceModel, HurstIndex, TimeGrid};
use serde::Deserialize;

use crate::error::{Error, Result, Stage};

/// Run size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Scale {
    /// 300 batches of 1024 paths, N ∈ {16, 32, 64}.
    #[default]
    Desk,
    /// 3000 batches of 4096 paths, N ∈ {2⁹, …, 2¹⁶}. Long-running.
    Paper,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

/// Integrand `f` of `Z_t = ∫ f dB^H`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Integrand {
    /// `f(u) = value`.
    Constant { value: f64 },
    /// `f(u) = scale · u^exponent`.
    Power { scale: f64, exponent: f64 },
    /// `f(u) = scale · e^{rate·u}`.
    Exp { scale: f64, rate: f64 },
}

impl Integrand {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Integrand::Constant { value } => value,
            Integrand::Power { scale, exponent } => scale * u.powf(exponent),
            Integrand::Exp { scale, rate } => scale * (rate * u).exp(),
        }
    }

    pub fn coefficient(self, grid: &TimeGrid) -> Coefficient {
        match self {
            Integrand::Constant { value } => Coefficient::Constant(value),
            _ => Coefficient::tabulate(grid, |u| self.eval(u)),
        }
    }
}

impl fmt::Display for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::Constant { value } => write!(f, "{value}"),
            Integrand::Power { scale, exponent } => write!(f, "{scale}*u^{exponent}"),
            Integrand::Exp { scale, rate } => write!(f, "{scale}*exp({rate}*u)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProcessSpec {
    Fbm,
    Integral {
        integrand: Integrand,
    },
    /// `dA = (k − aA) dt + σ dB^H`, `A_0 = a0`.
    Fou {
        #[serde(default)]
        level: f64,
        #[serde(default = "half")]
        decay: f64,
        #[serde(default = "one")]
        volatility: f64,
        #[serde(default)]
        initial: f64,
    },
    /// `R = sgn(A) σ² A² / 4` with `dA = −(λ/2) A dt + dB^H`.
    Fcir {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "two")]
        sigma: f64,
        #[serde(default = "one")]
        r0: f64,
    },
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl ProcessSpec {
    /// fOU with `k = a0 = 0`, `a = ½`, `σ = 1`.
    pub fn standard_fou() -> Self {
        ProcessSpec::Fou { level: 0.0, decay: 0.5, volatility: 1.0, initial: 0.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessSpec::Fbm => "fbm",
            ProcessSpec::Integral { .. } => "integral",
            ProcessSpec::Fou { .. } => "fou",
            ProcessSpec::Fcir { .. } => "fcir",
        }
    }

    /// Gaussian model simulated on `grid` (the latent fOU for fCIR).
    pub fn model(&self, hurst: HurstIndex, grid: &TimeGrid) -> CovarianceModel {
        match *self {
            ProcessSpec::Fbm => CovarianceModel::Fbm { hurst },
            ProcessSpec::Integral { integrand } => {
                CovarianceModel::IntegralProcess { hurst, integrand: integrand.coefficient(grid) }
            }
            ProcessSpec::Fou { level, decay, volatility, initial } => CovarianceModel::Fou {
                hurst,
                level: Coefficient::Constant(level),
                decay: Coefficient::Constant(decay),
                volatility: Coefficient::Constant(volatility),
                initial,
            },
            ProcessSpec::Fcir { lambda, sigma, r0 } => CovarianceModel::FcirLatent {
                hurst,
                lambda,
                initial: fracpredict_core::simulation::SignedSquare { sigma }.inverse(r0),
            },
        }
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Fbm => f.write_str("fbm"),
            ProcessSpec::Integral { integrand } => write!(f, "integral(f={integrand})"),
            ProcessSpec::Fou { level, decay, volatility, initial } => {
                write!(f, "fou(k={level},a={decay},sigma={volatility},a0={initial})")
            }
            ProcessSpec::Fcir { lambda, sigma, r0 } => write!(f, "fcir(lambda={lambda},sigma={sigma},r0={r0})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub n_batches: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub truncation_c: f64,
    pub optimizer: OptimizerKind,
    pub bias_refit_batches: usize,
}

impl TrainSection {
    pub fn for_scale(scale: Scale) -> Self {
        let t = match scale {
            Scale::Desk => TrainingConfig::desk(),
            Scale::Paper => TrainingConfig::paper(),
        };
        Self {
            n_batches: t.n_batches,
            batch_size: t.batch_size,
            lr_initial: t.lr_initial,
            lr_decay: t.lr_decay,
            lr_decay_every: t.lr_decay_every,
            truncation_c: t.truncation_c,
            optimizer: OptimizerKind::Adam,
            bias_refit_batches: t.bias_refit_batches,
        }
    }

    pub fn training_config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            n_batches: self.n_batches,
            batch_size: self.batch_size,
            lr_initial: self.lr_initial,
            lr_decay: self.lr_decay,
            lr_decay_every: self.lr_decay_every,
            seed,
            truncation_c: self.truncation_c,
            optimizer: match self.optimizer {
                OptimizerKind::Adam => Optimizer::default(),
                OptimizerKind::Sgd => Optimizer::Sgd,
            },
            bias_refit_batches: self.bias_refit_batches,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self::for_scale(Scale::Desk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    AsWritten,
    ZArgument,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousSection {
    pub inner_nodes: usize,
    /// `"midpoint"` or `"left"`.
    pub outer_rule: String,
    pub fou_kernel_variant: KernelVariant,
}

impl Default for ContinuousSection {
    fn default() -> Self {
        Self { inner_nodes: 64, outer_rule: "midpoint".into(), fou_kernel_variant: KernelVariant::ZArgument }
    }
}

impl ContinuousSection {
    pub fn predictor_config(&self, process: &ProcessSpec, s: f64, horizon: f64, hurst: HurstIndex) -> Result<ContinuousPredictorConfig> {
        let mut c = ContinuousPredictorConfig::new(s, horizon, hurst).stage("continuous config")?;
        c.inner_nodes = self.inner_nodes;
        c.outer_rule = match self.outer_rule.as_str() {
            "midpoint" => OuterRule::Midpoint,
            "left" => OuterRule::LeftPoint,
            other => return Err(Error::Config(format!("unknown outer_rule {other:?}"))),
        };
        c.fou_kernel_variant = match self.fou_kernel_variant {
            KernelVariant::AsWritten => FouKernelVariant::AsWritten,
            KernelVariant::ZArgument => FouKernelVariant::ZArgument,
        };
        if let ProcessSpec::Fou { level, decay, volatility, .. } = *process {
            c.level = level;
            c.decay = decay;
            c.volatility = volatility;
        }
        c.validate().stage("continuous config")?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub hurst: f64,
    /// Last observation time.
    pub s: f64,
    /// Prediction horizon `T`.
    pub horizon: f64,
    /// Number of equally spaced observations on `(0, s]`.
    pub n_obs: usize,
    /// Simulation steps per observation interval.
    pub sim_refinement: usize,
    pub n_test: usize,
    /// Hidden layer widths; the input width is `n_obs` and the output 1.
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub train: TrainSection,
    pub continuous: ContinuousSection,
    /// Accepted draws per fCIR prediction that needs the orthant estimator.
    pub orthant_n_mc: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            process: ProcessSpec::Fbm,
            hurst: 0.7,
            s: 5.0,
            horizon: 10.0,
            n_obs: 32,
            sim_refinement: 1,
            n_test: 10_000,
            hidden: vec![64, 64, 64],
            seed: 0,
            train: TrainSection::default(),
            continuous: ContinuousSection::default(),
            orthant_n_mc: 10_000,
        }
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

impl ExperimentConfig {
    pub fn for_scale(scale: Scale) -> Self {
        Self { train: TrainSection::for_scale(scale), ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn hurst_index(&self) -> Result<HurstIndex> {
        HurstIndex::new(self.hurst).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        self.hurst_index()?;
        if self.n_obs == 0 {
            return bad("n_obs must be at least 1");
        }
        if !(self.s > 0.0 && self.s < self.horizon && self.horizon.is_finite()) {
            return bad("need 0 < s < horizon");
        }
        if self.n_test < 100 {
            return bad("n_test must be at least 100");
        }
        if self.sim_refinement == 0 {
            return bad("sim_refinement must be at least 1");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and positive");
        }
        if self.orthant_n_mc < 2 {
            return bad("orthant_n_mc must be at least 2");
        }
        self.train.training_config(self.seed).validate().map_err(|e| Error::Config(e.to_string()))?;
        if let ProcessSpec::Fcir { .. } = self.process {
            if self.hurst <= 0.5 {
                return bad("fcir needs hurst > 0.5");
            }
        }
        Ok(())
    }

    /// Network widths `(n_obs, hidden…, 1)`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.n_obs);
        w.extend(&self.hidden);
        w.push(1);
        w
    }

    /// One-line summary used in report headers.
    pub fn echo(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let t = &self.train;
        format!(
            "process={} H={} s={} T={} N={} sim_refinement={} n_test={} hidden={} batches={}x{} lr={} decay={}/{} c={} optimizer={:?} refit={} seed={}",
            self.process,
            self.hurst,
            self.s,
            self.horizon,
            self.n_obs,
            self.sim_refinement,
            self.n_test,
            hidden.join("x"),
            t.n_batches,
            t.batch_size,
            t.lr_initial,
            t.lr_decay,
            t.lr_decay_every,
            t.truncation_c,
            t.optimizer,
            t.bias_refit_batches,
            self.seed
        )
        .to_lowercase()
    }
}
