//! Row-major matrices and fully connected layers with explicit backward
//! passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = i * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in chunks * 4..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => crate::types::sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and output.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }
}

/// `out = act(W x + b)` with `W` of shape `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct FcParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Pre- and post-activation values kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct FcCache {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl FcParams {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        FcParams {
            weight: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    pub fn uniform(input: usize, output: usize, activation: Activation, scale: f64, rng: &mut impl Rng) -> Self {
        let weight = Matrix::uniform(output, input, scale, rng);
        let bias = (0..output).map(|_| rng.gen_range(-scale..=scale)).collect();
        FcParams {
            weight,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<FcCache> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("fully connected input", self.input_dim(), x.len()));
        }
        // Inputs here are mostly binary bags; skip the zero columns.
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        let dense = nz.len() * 2 > x.len();
        let pre: Vec<f64> = (0..self.output_dim())
            .map(|r| {
                let row = self.weight.row(r);
                let s = if dense {
                    dot(row, x)
                } else {
                    nz.iter().map(|&(j, v)| row[j] * v).sum()
                };
                s + self.bias[r]
            })
            .collect();
        let out = pre.iter().map(|&p| self.activation.apply(p)).collect();
        Ok(FcCache { pre, out })
    }

    /// Accumulate parameter gradients into `grad` given `d_out`, the loss
    /// gradient w.r.t. this layer's output. Returns the gradient w.r.t. `x`
    /// when `want_input_grad`.
    pub fn backward(
        &self,
        x: &[f64],
        cache: &FcCache,
        d_out: &[f64],
        grad: &mut FcParams,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let d_pre: Vec<f64> = d_out
            .iter()
            .zip(cache.pre.iter().zip(&cache.out))
            .map(|(d, (p, o))| d * self.activation.derivative(*p, *o))
            .collect();
        self.backward_pre(x, &d_pre, grad, want_input_grad)
    }

    /// As [`backward`](Self::backward) but starting from the gradient w.r.t.
    /// the pre-activation.
    pub fn backward_pre(&self, x: &[f64], d_pre: &[f64], grad: &mut FcParams, want_input_grad: bool) -> Option<Vec<f64>> {
        let nz: Vec<(usize, f64)> = x.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        for (r, &d) in d_pre.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[r] += d;
            let grow = grad.weight.row_mut(r);
            for &(j, v) in &nz {
                grow[j] += d * v;
            }
        }
        want_input_grad.then(|| {
            let mut dx = vec![0.0; x.len()];
            for (r, &d) in d_pre.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, self.weight.row(r), &mut dx);
                }
            }
            dx
        })
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 2] {
        [&self.weight.data, &self.bias]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weight.data, &mut self.bias]
    }
}
