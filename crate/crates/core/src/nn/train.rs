use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::network::{BatchWorkspace, MlpNetwork, Normalization};
use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub n_batches: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    /// Learning rate is multiplied by this every `lr_decay_every` batches.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
    /// `β = truncation_c · ln(n_batches · batch_size)`.
    pub truncation_c: f64,
    pub optimizer: Optimizer,
    /// Further batches used after training to refit the output bias; 0 skips
    /// the refit.
    pub bias_refit_batches: usize,
}

impl TrainingConfig {
    /// 3000 batches of 4096 paths, rate 0.01 decaying by 0.95 every 10.
    pub fn paper() -> Self {
        Self {
            n_batches: 3000,
            batch_size: 4096,
            lr_initial: 0.01,
            lr_decay: 0.95,
            lr_decay_every: 10,
            seed: 0,
            truncation_c: 10.0,
            optimizer: Optimizer::default(),
            bias_refit_batches: 0,
        }
    }

    /// 300 batches of 1024 paths with the same rate schedule, then a bias
    /// refit on 128 batches. The schedule is cut off while the rate is still
    /// 0.01 · 0.95³⁰, and the refit removes the offset left by the last steps.
    pub fn desk() -> Self {
        Self { n_batches: 300, batch_size: 1024, bias_refit_batches: 128, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_initial > 0.0) {
            return Err(Error::Config("lr_initial must be positive".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must lie in (0, 1]".into()));
        }
        if self.n_batches == 0 || self.batch_size == 0 || self.lr_decay_every == 0 {
            return Err(Error::Config("batch counts must be at least 1".into()));
        }
        if !(self.truncation_c > 0.0) {
            return Err(Error::Config("truncation_c must be positive".into()));
        }
        Ok(())
    }

    pub fn learning_rate(&self, batch: usize) -> f64 {
        self.lr_initial * self.lr_decay.powi((batch / self.lr_decay_every) as i32)
    }

    pub fn truncation_beta(&self) -> f64 {
        self.truncation_c * ((self.n_batches * self.batch_size) as f64).ln()
    }
}

/// Per-batch training loss (MSE in target units) and learning rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub loss: Vec<f64>,
    pub lr: Vec<f64>,
}

/// Fit `net` by first-order steps on fresh batches from `generator`, which
/// receives the batch index and returns `(X, Y)` with one row per sample.
///
/// The normalization is estimated from the first batch unless the network
/// already carries one. After the last step the output bias is refitted on
/// batches `n_batches..n_batches + bias_refit_batches`, and the truncation
/// bound is set.
pub fn train<G>(mut net: MlpNetwork, config: &TrainingConfig, mut generator: G) -> Result<(MlpNetwork, LossTrace)>
where
    G: FnMut(usize) -> Result<(Matrix, Vec<f64>)>,
{
    config.validate()?;
    if net.output_dim() != 1 {
        return Err(Error::Config("network output width must be 1".into()));
    }
    let d = net.input_dim();
    let n_par = net.n_parameters();
    let mut params = net.parameters();
    let mut grad = vec![0.0; n_par];
    let (mut m1, mut m2) = (vec![0.0; n_par], vec![0.0; n_par]);
    let mut ws = BatchWorkspace::default();
    let mut trace = LossTrace::default();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for batch in 0..config.n_batches {
        let (x, y) = generator(batch)?;
        if x.cols() != d || x.rows() != y.len() || y.is_empty() {
            return Err(Error::Shape { expected: d, actual: x.cols() });
        }
        if net.normalization.is_none() {
            net.normalization = Some(Normalization::fit(&x, &y));
        }
        let norm = net.normalization.as_ref().expect("set above");
        xs.resize(x.rows() * d, 0.0);
        for i in 0..x.rows() {
            norm.apply_input(x.row(i), &mut xs[i * d..(i + 1) * d]);
        }
        ys.clear();
        ys.extend(y.iter().map(|v| (v - norm.output_mean) / norm.output_scale));
        let out_var = norm.output_scale * norm.output_scale;

        grad.iter_mut().for_each(|g| *g = 0.0);
        let mse = net.batch_gradient(&xs, &ys, &mut grad, &mut ws) * out_var;
        if !mse.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { batch });
        }
        let lr = config.learning_rate(batch);
        match config.optimizer {
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (batch + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for k in 0..n_par {
                    let g = grad[k];
                    m1[k] = beta1 * m1[k] + (1.0 - beta1) * g;
                    m2[k] = beta2 * m2[k] + (1.0 - beta2) * g * g;
                    params[k] -= lr * (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps);
                }
            }
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
        }
        net.set_parameters(&params)?;
        trace.loss.push(mse);
        trace.lr.push(lr);
    }
    if config.bias_refit_batches > 0 {
        refit_output_bias(&mut net, &mut params, config, &mut generator)?;
    }
    net.truncation_beta = Some(config.truncation_beta());
    Ok((net, trace))
}

/// Shift the output bias so the mean residual over the refit batches is zero,
/// the least-squares optimum in that one parameter with the others fixed.
fn refit_output_bias<G>(net: &mut MlpNetwork, params: &mut [f64], config: &TrainingConfig, generator: &mut G) -> Result<()>
where
    G: FnMut(usize) -> Result<(Matrix, Vec<f64>)>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for batch in config.n_batches..config.n_batches + config.bias_refit_batches {
        let (x, y) = generator(batch)?;
        if x.cols() != net.input_dim() || x.rows() != y.len() {
            return Err(Error::Shape { expected: net.input_dim(), actual: x.cols() });
        }
        for (i, target) in y.iter().enumerate() {
            sum += target - net.forward(x.row(i))?;
        }
        n += y.len();
    }
    let scale = net.normalization.as_ref().map_or(1.0, |z| z.output_scale);
    if let Some(bias) = params.last_mut() {
        *bias += sum / n.max(1) as f64 / scale;
    }
    net.set_parameters(params)
}

/// Mean of the first and last tenth of a loss trace.
pub fn loss_improvement(trace: &LossTrace) -> Result<(f64, f64)> {
    let n = trace.loss.len();
    if n < 10 {
        return Err(domain("trace shorter than 10 batches"));
    }
    let k = n / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok((mean(&trace.loss[..k]), mean(&trace.loss[n - k..])))
}
