//! Three-layer ReLU perceptron predicting the injected noise from a noisy
//! latent concatenated with its time embedding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub data_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
}

impl NetShape {
    pub fn new(data_dim: usize, time_dim: usize, hidden: usize) -> Result<Self> {
        if data_dim == 0 || hidden == 0 {
            return Err(Error::validation("network dimensions must be positive"));
        }
        if !time_dim.is_multiple_of(2) {
            return Err(Error::validation("time embedding dimension must be even"));
        }
        Ok(NetShape {
            data_dim,
            time_dim,
            hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.data_dim + self.time_dim
    }

    pub fn param_count(&self) -> usize {
        let (i, h, o) = (self.input_dim(), self.hidden, self.data_dim);
        h * i + h + h * h + h + o * h + o
    }

    /// Offsets of `(w1, b1, w2, b2, w3, b3)` in the flat parameter vector.
    fn offsets(&self) -> [usize; 6] {
        let (i, h, o) = (self.input_dim(), self.hidden, self.data_dim);
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        [w1, b1, w2, b2, w3, b3]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    shape: NetShape,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    input: Vec<f64>,
    h1_pre: Vec<f64>,
    h1: Vec<f64>,
    h2_pre: Vec<f64>,
    h2: Vec<f64>,
    pub output: Vec<f64>,
}

impl Activations {
    pub fn new(shape: &NetShape) -> Self {
        Activations {
            input: vec![0.0; shape.input_dim()],
            h1_pre: vec![0.0; shape.hidden],
            h1: vec![0.0; shape.hidden],
            h2_pre: vec![0.0; shape.hidden],
            h2: vec![0.0; shape.hidden],
            output: vec![0.0; shape.data_dim],
        }
    }

    pub fn input_mut(&mut self) -> &mut [f64] {
        &mut self.input
    }
}

/// Scratch space for the backward pass.
#[derive(Debug, Clone)]
pub struct BackwardScratch {
    g_h2: Vec<f64>,
    g_h1: Vec<f64>,
}

impl BackwardScratch {
    pub fn new(shape: &NetShape) -> Self {
        BackwardScratch {
            g_h2: vec![0.0; shape.hidden],
            g_h1: vec![0.0; shape.hidden],
        }
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * n_in..(r + 1) * n_in];
        *o = b[r] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    }
}

impl EpsilonNet {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization for every
    /// weight and bias.
    pub fn new_random<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Self {
        // First layer (w1, b1) has fan-in = input_dim; the rest see `hidden`.
        let first_layer_end = shape.offsets()[2];
        let mut params = vec![0.0; shape.param_count()];
        let bound_in = 1.0 / (shape.input_dim().max(1) as f64).sqrt();
        let bound_h = 1.0 / (shape.hidden as f64).sqrt();
        for (idx, p) in params.iter_mut().enumerate() {
            let bound = if idx < first_layer_end { bound_in } else { bound_h };
            *p = rng.random_range(-bound..bound);
        }
        EpsilonNet { shape, params }
    }

    pub fn zeros(shape: NetShape) -> Self {
        EpsilonNet {
            params: vec![0.0; shape.param_count()],
            shape,
        }
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.param_count() {
            return Err(Error::validation(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation("non-finite network parameter"));
        }
        Ok(EpsilonNet { shape, params })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Forward pass on `acts.input`, filling every activation buffer.
    pub fn forward(&self, acts: &mut Activations) {
        let [w1, b1, w2, b2, w3, b3] = self.shape.offsets();
        let p = &self.params;
        let h = self.shape.hidden;
        affine(&p[w1..b1], &p[b1..b1 + h], &acts.input, &mut acts.h1_pre);
        for (a, &z) in acts.h1.iter_mut().zip(&acts.h1_pre) {
            *a = z.max(0.0);
        }
        affine(&p[w2..b2], &p[b2..b2 + h], &acts.h1, &mut acts.h2_pre);
        for (a, &z) in acts.h2.iter_mut().zip(&acts.h2_pre) {
            *a = z.max(0.0);
        }
        affine(&p[w3..b3], &p[b3..], &acts.h2, &mut acts.output);
    }

    /// Accumulate `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(
        &self,
        acts: &Activations,
        g_out: &[f64],
        grad: &mut [f64],
        scratch: &mut BackwardScratch,
    ) {
        let [w1, b1, w2, b2, w3, b3] = self.shape.offsets();
        let p = &self.params;
        let (n_in, h) = (self.shape.input_dim(), self.shape.hidden);

        scratch.g_h2.iter_mut().for_each(|g| *g = 0.0);
        for (o, &go) in g_out.iter().enumerate() {
            grad[b3 + o] += go;
            let wrow = &p[w3 + o * h..w3 + (o + 1) * h];
            let grow = &mut grad[w3 + o * h..w3 + (o + 1) * h];
            for j in 0..h {
                grow[j] += go * acts.h2[j];
                scratch.g_h2[j] += wrow[j] * go;
            }
        }
        for j in 0..h {
            if acts.h2_pre[j] <= 0.0 {
                scratch.g_h2[j] = 0.0;
            }
        }

        scratch.g_h1.iter_mut().for_each(|g| *g = 0.0);
        for j in 0..h {
            let g = scratch.g_h2[j];
            if g == 0.0 {
                continue;
            }
            grad[b2 + j] += g;
            let wrow = &p[w2 + j * h..w2 + (j + 1) * h];
            let grow = &mut grad[w2 + j * h..w2 + (j + 1) * h];
            for k in 0..h {
                grow[k] += g * acts.h1[k];
                scratch.g_h1[k] += wrow[k] * g;
            }
        }
        for k in 0..h {
            if acts.h1_pre[k] <= 0.0 {
                scratch.g_h1[k] = 0.0;
            }
        }

        for j in 0..h {
            let g = scratch.g_h1[j];
            if g == 0.0 {
                continue;
            }
            grad[b1 + j] += g;
            let grow = &mut grad[w1 + j * n_in..w1 + (j + 1) * n_in];
            for (gi, &x) in grow.iter_mut().zip(&acts.input) {
                *gi += g * x;
            }
        }
    }

    /// Convenience single-input evaluation.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.shape.input_dim() {
            return Err(Error::validation(format!(
                "network input has length {}, expected {}",
                input.len(),
                self.shape.input_dim()
            )));
        }
        let mut acts = Activations::new(&self.shape);
        acts.input.copy_from_slice(input);
        self.forward(&mut acts);
        Ok(acts.output)
    }
}
