//! Hand-built ReLU networks: the squaring gate, the positivity product and
//! the threshold gate.

use alloc::vec;
use alloc::vec::Vec;

use super::network::{Layer, MlpNetwork};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Output weights turning the four gate units into `|m+n| − |m−n|`.
const GATE_OUT: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

/// `f_sq(m, n) = |m+n| − |m−n|` (`= 2 min(m, n)` for `m, n ≥ 0`), with
/// `|u| = ReLU(u) + ReLU(−u)`.
pub fn build_fsq() -> MlpNetwork {
    let hidden = Matrix::from_row_major(4, 2, vec![1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
        .expect("fixed shape");
    MlpNetwork::from_layers(vec![
        Layer { weights: hidden, bias: vec![0.0; 4] },
        Layer { weights: Matrix::from_row_major(1, 4, GATE_OUT.to_vec()).expect("fixed shape"), bias: vec![0.0] },
    ])
    .expect("consistent shapes")
}

/// Affine form `c · h + c0` over the units `h` of the previous layer.
#[derive(Clone)]
struct Affine {
    coef: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn combine(&self, other: &Affine, sign: f64) -> Affine {
        Affine {
            coef: self.coef.iter().zip(&other.coef).map(|(a, b)| a + sign * b).collect(),
            constant: self.constant + sign * other.constant,
        }
    }

    fn negated(&self) -> Affine {
        Affine { coef: self.coef.iter().map(|a| -a).collect(), constant: -self.constant }
    }
}

/// Binary tree of `f_sq` gates over `(x_1, …, x_d, 1, …, 1)` padded to `2^w`,
/// `w = ⌈log₂ d⌉`. For `x ∈ [0,1]^d` the output is positive when every
/// coordinate is and exactly 0 otherwise. `d = 1` is the single gate
/// `f_sq(x, 1)`.
///
/// Gate outputs are non-negative on `[0,1]^d`, so between tree levels they
/// pass through a one-unit-per-gate ReLU layer unchanged. Folding them into
/// the next gate's affine map instead would let rounding turn a zero gate
/// into a tiny nonzero value.
pub fn build_fmult(d: usize) -> Result<MlpNetwork> {
    if d == 0 {
        return Err(Error::Config("f_mult needs d at least 1".into()));
    }
    let leaves = d.next_power_of_two().max(2);
    let mut inputs: Vec<Affine> = (0..leaves)
        .map(|i| {
            let mut coef = vec![0.0; d];
            if i < d {
                coef[i] = 1.0;
                Affine { coef, constant: 0.0 }
            } else {
                Affine { coef, constant: 1.0 }
            }
        })
        .collect();
    let mut layers = Vec::new();
    loop {
        let n_gates = inputs.len() / 2;
        let fan_in = inputs[0].coef.len();
        let mut weights = Matrix::zeros(4 * n_gates, fan_in);
        let mut bias = Vec::with_capacity(4 * n_gates);
        for (g, pair) in inputs.chunks(2).enumerate() {
            let sum = pair[0].combine(&pair[1], 1.0);
            let diff = pair[0].combine(&pair[1], -1.0);
            for (k, unit) in [sum.clone(), sum.negated(), diff.clone(), diff.negated()].iter().enumerate() {
                weights.row_mut(4 * g + k).copy_from_slice(&unit.coef);
                bias.push(unit.constant);
            }
        }
        layers.push(Layer { weights, bias });
        let mut out = Matrix::zeros(n_gates, 4 * n_gates);
        for g in 0..n_gates {
            out.row_mut(g)[4 * g..4 * g + 4].copy_from_slice(&GATE_OUT);
        }
        layers.push(Layer { weights: out, bias: vec![0.0; n_gates] });
        if n_gates == 1 {
            break;
        }
        inputs = (0..n_gates)
            .map(|g| {
                let mut coef = vec![0.0; n_gates];
                coef[g] = 1.0;
                Affine { coef, constant: 0.0 }
            })
            .collect();
    }
    MlpNetwork::from_layers(layers)
}

/// `f_demo(x) = 1 − ReLU(1 − c₂ ReLU(x))`: exactly 1 for `x ≥ 1/c₂`, exactly
/// 0 for `x ≤ 0`, linear in between. Requires `c₂ ≥ c₅ ≥ 1` so the gate is
/// saturated above `1/c₅`.
pub fn build_fdemo(c2: f64, c5: f64) -> Result<MlpNetwork> {
    if !(c5 >= 1.0 && c2 >= c5 && c2.is_finite()) {
        return Err(Error::Config("f_demo needs c2 >= c5 >= 1".into()));
    }
    let scalar = |w: f64, b: f64| Layer { weights: Matrix::from_row_major(1, 1, vec![w]).expect("1x1"), bias: vec![b] };
    MlpNetwork::from_layers(vec![scalar(1.0, 0.0), scalar(-c2, 1.0), scalar(-1.0, 1.0)])
}
