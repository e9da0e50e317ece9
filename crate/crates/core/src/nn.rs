//! Layers and optimization built on the [`Tape`](crate::tensor::Tape).

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math::{cos, sqrt};
use crate::tensor::{Gradients, Matrix, ParamId, ParamStore, Tape, Var};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Silu,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Silu => tape.silu(x),
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// `x·W + b` with `W: in×out` and `b: 1×out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Uniform `±1/√in` initialization for weights and biases.
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / sqrt(in_dim as f64);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound)).collect() };
        let w = Matrix::from_vec(in_dim, out_dim, draw(in_dim * out_dim)).expect("sized");
        let b = Matrix::from_vec(1, out_dim, draw(out_dim)).expect("sized");
        Self::from_matrices(store, name, w, b)
    }

    pub fn from_matrices(store: &mut ParamStore, name: &str, weight: Matrix, bias: Matrix) -> Self {
        let (in_dim, out_dim) = weight.shape();
        debug_assert_eq!(bias.shape(), (1, out_dim));
        Self {
            weight: store.add(format!("{name}.weight"), weight),
            bias: store.add(format!("{name}.bias"), bias),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let cols = tape.value(x).cols();
        if cols != self.in_dim {
            return Err(Error::ShapeMismatch(format!("linear expects {} inputs, got {cols}", self.in_dim)));
        }
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(Linear, Activation)>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<(Linear, Activation)>) -> Self {
        Self { layers }
    }

    /// Linear → SiLU → Linear.
    pub fn two_layer(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let first = Linear::new(store, &format!("{name}.0"), in_dim, hidden, rng);
        let second = Linear::new(store, &format!("{name}.1"), hidden, out_dim, rng);
        Self { layers: alloc::vec![(first, Activation::Silu), (second, Activation::Identity)] }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        mlp_forward(tape, store, x, &self.layers)
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.0.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.0.out_dim)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|(l, _)| l.params()).collect()
    }
}

pub fn mlp_forward(tape: &mut Tape, store: &ParamStore, x: Var, layers: &[(Linear, Activation)]) -> Result<Var> {
    layers.iter().try_fold(x, |h, (linear, act)| {
        let z = linear.forward(tape, store, h)?;
        Ok(act.apply(tape, z))
    })
}

/// Learnable affine transform after row standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub shift: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add(format!("{name}.gain"), Matrix::filled(1, dim, 1.0)),
            shift: store.add(format!("{name}.shift"), Matrix::zeros(1, dim)),
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gain);
        let s = tape.param(store, self.shift);
        tape.layer_norm(x, g, s)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.gain, self.shift]
    }
}

/// Mini-batch mean squared error of a `B×1` prediction.
pub fn mse_loss(tape: &mut Tape, pred: Var, target: &[f64]) -> Result<Var> {
    tape.mse(pred, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update at learning rate `lr`; increments `store.step`.
pub fn adam_step(store: &mut ParamStore, grads: &Gradients, config: &AdamConfig, lr: f64) {
    store.step += 1;
    let t = store.step as i32;
    let c1 = 1.0 - libm::pow(config.beta1, t as f64);
    let c2 = 1.0 - libm::pow(config.beta2, t as f64);
    for (param, (_, g)) in store.iter_mut().zip(grads.iter()) {
        let value = param.value.data_mut();
        let m = param.first_moment.data_mut();
        let v = param.second_moment.data_mut();
        for k in 0..value.len() {
            let gk = g.data()[k];
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * gk;
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            value[k] -= lr * m_hat / (sqrt(v_hat) + config.eps);
        }
    }
}

/// Linear warm-up from `base` to `peak_factor·base`, then cosine decay to
/// `final_factor·base` at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneCycle {
    pub base_lr: f64,
    pub peak_factor: f64,
    pub warmup_fraction: f64,
    pub final_factor: f64,
    pub total_steps: usize,
}

impl OneCycle {
    /// Learning rate for a 0-based step index.
    pub fn lr_at(&self, step: usize) -> f64 {
        let total = self.total_steps.max(1) as f64;
        let peak = self.base_lr * self.peak_factor;
        let end = self.base_lr * self.final_factor;
        let warm = (self.warmup_fraction * total).max(1.0);
        let s = step as f64;
        if s < warm {
            self.base_lr + (peak - self.base_lr) * s / warm
        } else {
            let span = (total - warm).max(1.0);
            let p = ((s - warm) / span).min(1.0);
            end + (peak - end) * 0.5 * (1.0 + cos(PI * p))
        }
    }

    pub fn peak_step(&self) -> usize {
        (self.warmup_fraction * self.total_steps.max(1) as f64).max(1.0) as usize
    }
}
