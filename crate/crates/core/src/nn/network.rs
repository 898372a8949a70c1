use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng;

/// `T_β u = max(−β, min(β, u))`.
pub fn truncate(u: f64, beta: f64) -> f64 {
    u.clamp(-beta, beta)
}

/// Affine input and output standardization stored with the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub output_mean: f64,
    pub output_scale: f64,
}

impl Normalization {
    /// Per-coordinate mean and SD of `x` and `y`; zero SDs become 1.
    pub fn fit(x: &Matrix, y: &[f64]) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.iter().map(|s| positive_or_one((s / n).sqrt())).collect();
        let ym = y.iter().sum::<f64>() / n;
        let ys = (y.iter().map(|v| (v - ym) * (v - ym)).sum::<f64>() / n).sqrt();
        Self { input_mean: mean, input_scale: scale, output_mean: ym, output_scale: positive_or_one(ys) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { input_mean: vec![0.0; dim], input_scale: vec![1.0; dim], output_mean: 0.0, output_scale: 1.0 }
    }

    pub fn apply_input(&self, x: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(x).zip(&self.input_mean).zip(&self.input_scale) {
            *o = (v - m) / s;
        }
    }
}

fn positive_or_one(s: f64) -> f64 {
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// One affine map `x ↦ A x + b` with `A` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip((0..self.fan_out()).map(|r| self.weights.row(r)).zip(&self.bias)) {
            *o = dot(row, x) + b;
        }
    }
}

/// Fully connected ReLU network with an affine scalar output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    widths: Vec<usize>,
    layers: Vec<Layer>,
    pub truncation_beta: Option<f64>,
    pub normalization: Option<Normalization>,
}

impl MlpNetwork {
    /// Assemble a network from its layers; widths are read off the shapes.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].fan_in()];
        for (l, layer) in layers.iter().enumerate() {
            if layer.fan_in() != *widths.last().unwrap_or(&0) {
                return Err(Error::Shape { expected: widths[l], actual: layer.fan_in() });
            }
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Shape { expected: layer.fan_out(), actual: layer.bias.len() });
            }
            widths.push(layer.fan_out());
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        Ok(Self { widths, layers, truncation_beta: None, normalization: None })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("widths are non-empty")
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.fan_out() * (l.fan_in() + 1)).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            p.extend_from_slice(l.weights.as_slice());
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_parameters() {
            return Err(Error::Shape { expected: self.n_parameters(), actual: p.len() });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let (rows, cols) = (l.fan_out(), l.fan_in());
            l.weights = Matrix::from_row_major(rows, cols, p[k..k + rows * cols].to_vec())?;
            k += rows * cols;
            l.bias.copy_from_slice(&p[k..k + rows]);
            k += rows;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), actual: x.len() });
        }
        Ok(())
    }

    /// Hidden activations (post-ReLU) per layer and the raw network output,
    /// both in normalized units.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut a = x.to_vec();
        if let Some(n) = &self.normalization {
            n.apply_input(x, &mut a);
        }
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.fan_out()];
            layer.apply(&a, &mut z);
            acts.push(a);
            if l < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = z;
        }
        (acts, a)
    }

    fn denormalize(&self, g: f64) -> f64 {
        match &self.normalization {
            Some(n) => n.output_mean + n.output_scale * g,
            None => g,
        }
    }

    /// Network output before truncation (all output units).
    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let (_, out) = self.trace(x);
        Ok(out.into_iter().map(|g| self.denormalize(g)).collect())
    }

    /// Scalar output with `T_β` applied when a bound is set.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::Shape { expected: 1, actual: self.output_dim() });
        }
        let y = self.forward_raw(x)?[0];
        Ok(match self.truncation_beta {
            Some(beta) => truncate(y, beta),
            None => y,
        })
    }

    /// Outputs for every row of `x`.
    pub fn forward_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.forward(x.row(i))).collect()
    }

    /// Which hidden units are active (pre-activation > 0) at `x`.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<Vec<bool>> {
        self.check_input(x)?;
        let (acts, _) = self.trace(x);
        Ok(acts[1..].iter().flat_map(|a| a.iter().map(|v| *v > 0.0)).collect())
    }
}

/// `mlp_init`: He-normal weights `N(0, 2/fan_in)`, zero biases.
pub fn mlp_init(widths: &[usize], seed: u64) -> Result<MlpNetwork> {
    if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
        return Err(Error::Config("need at least two layer widths, all at least 1".into()));
    }
    if widths[widths.len() - 1] != 1 {
        return Err(Error::Config(format!("output width must be 1, got {}", widths[widths.len() - 1])));
    }
    let mut r = rng::stream(seed, rng::tag("mlp-init"));
    let layers = widths
        .windows(2)
        .map(|w| {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive scale");
            let weights = Matrix::from_fn(w[1], w[0], |_, _| normal.sample(&mut r));
            Layer { weights, bias: vec![0.0; w[1]] }
        })
        .collect();
    MlpNetwork::from_layers(layers)
}

/// Gradient with the parameter layout of [`MlpNetwork::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for l in &self.layers {
            p.extend_from_slice(l.weights.as_slice());
            p.extend_from_slice(&l.bias);
        }
        p
    }
}

/// Exact gradient of `½ (y^θ(x) − y)²` by reverse accumulation, with the
/// stored normalization included. Truncation counts as the identity inside
/// `(−β, β)` and as flat outside.
pub fn mlp_gradient(net: &MlpNetwork, x: &[f64], y: f64) -> Result<Gradient> {
    net.check_input(x)?;
    if net.output_dim() != 1 {
        return Err(Error::Shape { expected: 1, actual: net.output_dim() });
    }
    let (acts, out) = net.trace(x);
    let pred = net.denormalize(out[0]);
    let clipped = net.truncation_beta.is_some_and(|b| pred.abs() >= b);
    let out_scale = net.normalization.as_ref().map_or(1.0, |n| n.output_scale);
    let mut delta = vec![if clipped { 0.0 } else { (pred - y) * out_scale }];
    let mut grads: Vec<Layer> = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate().rev() {
        let a = &acts[l];
        let weights = Matrix::from_fn(layer.fan_out(), layer.fan_in(), |o, i| delta[o] * a[i]);
        grads.push(Layer { weights, bias: delta.clone() });
        if l > 0 {
            let mut prev = vec![0.0; layer.fan_in()];
            for (o, d) in delta.iter().enumerate() {
                for (p, w) in prev.iter_mut().zip(layer.weights.row(o)) {
                    *p += d * w;
                }
            }
            for (p, v) in prev.iter_mut().zip(a) {
                if *v <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
    grads.reverse();
    Ok(Gradient { layers: grads })
}

/// Buffers for batched forward and backward passes.
#[derive(Debug, Clone, Default)]
pub(crate) struct BatchWorkspace {
    /// Input of each layer (row per sample), in normalized units.
    acts: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

impl MlpNetwork {
    /// Mean of `½ e²` over a normalized batch and its gradient, added into
    /// `grad` (flattened layout). Returns the mean squared error.
    pub(crate) fn batch_gradient(
        &self,
        x: &[f64],
        y: &[f64],
        grad: &mut [f64],
        ws: &mut BatchWorkspace,
    ) -> f64 {
        let bsz = y.len();
        let nl = self.layers.len();
        ws.acts.resize(nl, Vec::new());
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        for l in 0..nl {
            let layer = &self.layers[l];
            let (fi, fo) = (layer.fan_in(), layer.fan_out());
            let mut z = if l + 1 < nl { core::mem::take(&mut ws.acts[l + 1]) } else { core::mem::take(&mut ws.out) };
            z.resize(bsz * fo, 0.0);
            {
                let a = &ws.acts[l];
                for b in 0..bsz {
                    let xb = &a[b * fi..(b + 1) * fi];
                    let zb = &mut z[b * fo..(b + 1) * fo];
                    for o in 0..fo {
                        let v = dot(layer.weights.row(o), xb) + layer.bias[o];
                        zb[o] = if l + 1 < nl { v.max(0.0) } else { v };
                    }
                }
            }
            if l + 1 < nl {
                ws.acts[l + 1] = z;
            } else {
                ws.out = z;
            }
        }

        let inv = 1.0 / bsz as f64;
        let mut sse = 0.0;
        ws.delta.clear();
        for b in 0..bsz {
            let e = ws.out[b] - y[b];
            sse += e * e;
            ws.delta.push(e * inv);
        }

        let mut offsets = Vec::with_capacity(nl);
        let mut k = 0;
        for layer in &self.layers {
            offsets.push(k);
            k += layer.fan_out() * (layer.fan_in() + 1);
        }
        for l in (0..nl).rev() {
            let layer = &self.layers[l];
            let (fi, fo) = (layer.fan_in(), layer.fan_out());
            let a = &ws.acts[l];
            let (gw, gb) = grad[offsets[l]..offsets[l] + fo * (fi + 1)].split_at_mut(fo * fi);
            for b in 0..bsz {
                let xb = &a[b * fi..(b + 1) * fi];
                let db = &ws.delta[b * fo..(b + 1) * fo];
                for o in 0..fo {
                    let d = db[o];
                    if d != 0.0 {
                        axpy(d, xb, &mut gw[o * fi..(o + 1) * fi]);
                        gb[o] += d;
                    }
                }
            }
            if l > 0 {
                ws.prev.clear();
                ws.prev.resize(bsz * fi, 0.0);
                for b in 0..bsz {
                    let db = &ws.delta[b * fo..(b + 1) * fo];
                    let pb = &mut ws.prev[b * fi..(b + 1) * fi];
                    for o in 0..fo {
                        if db[o] != 0.0 {
                            axpy(db[o], layer.weights.row(o), pb);
                        }
                    }
                    for (p, v) in pb.iter_mut().zip(&a[b * fi..(b + 1) * fi]) {
                        if *v <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
                core::mem::swap(&mut ws.delta, &mut ws.prev);
            }
        }
        sse * inv
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
