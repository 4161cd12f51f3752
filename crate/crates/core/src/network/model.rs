use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::LstmParams;
use super::tensor::{Activation, FcParams};
use super::{Model, Parameters};
use crate::encoder::{EncodedCandidate, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::types::{bce, clamp_prob, logit, sigmoid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    /// Width of a character row.
    pub input_dim: usize,
    pub hidden: usize,
    pub global_dim: usize,
    /// Width of the global-feature layer.
    pub global_hidden: usize,
}

impl Default for NetworkDims {
    fn default() -> Self {
        NetworkDims {
            input_dim: FEATURE_DIM,
            hidden: 64,
            global_dim: crate::encoder::DEFAULT_GLOBAL_DIM,
            global_hidden: 32,
        }
    }
}

/// LSTM over the character rows, a ReLU layer over `g`, and a sigmoid head
/// over both.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub lstm: LstmParams,
    pub fc_global: FcParams,
    pub head: FcParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkScore {
    /// Clamped to `[1e-7, 1 - 1e-7]`.
    pub y_tilde: f64,
    /// `ln(y / (1 - y))` of the clamped probability.
    pub s_tilde: f64,
}

impl NetworkScore {
    pub fn from_probability(p: f64) -> Self {
        let y_tilde = clamp_prob(p);
        NetworkScore {
            y_tilde,
            s_tilde: logit(y_tilde),
        }
    }
}

struct ForwardPass {
    lstm: super::lstm::LstmCache,
    global: super::tensor::FcCache,
    head_input: Vec<f64>,
    logit: f64,
}

impl NetworkParams {
    pub fn zeros(dims: NetworkDims) -> Self {
        NetworkParams {
            lstm: LstmParams::zeros(dims.input_dim, dims.hidden),
            fc_global: FcParams::zeros(dims.global_dim, dims.global_hidden, Activation::Relu),
            head: FcParams::zeros(dims.hidden + dims.global_hidden, 1, Activation::Sigmoid),
        }
    }

    pub fn init(dims: NetworkDims, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetworkParams {
            lstm: LstmParams::init(dims.input_dim, dims.hidden, scale, &mut rng),
            fc_global: FcParams::uniform(dims.global_dim, dims.global_hidden, Activation::Relu, scale, &mut rng),
            head: FcParams::uniform(dims.hidden + dims.global_hidden, 1, Activation::Sigmoid, scale, &mut rng),
        }
    }

    pub fn dims(&self) -> NetworkDims {
        NetworkDims {
            input_dim: self.lstm.input_dim,
            hidden: self.lstm.hidden,
            global_dim: self.fc_global.input_dim(),
            global_hidden: self.fc_global.output_dim(),
        }
    }

    fn run(&self, enc: &EncodedCandidate) -> Result<ForwardPass> {
        let lstm = self.lstm.forward(&enc.sequence)?;
        let global = self.fc_global.forward(&enc.global)?;
        let mut head_input = lstm.final_hidden().to_vec();
        head_input.extend_from_slice(&global.out);
        let logit = self.head.bias[0] + super::tensor::dot(self.head.weight.row(0), &head_input);
        Ok(ForwardPass {
            lstm,
            global,
            head_input,
            logit,
        })
    }

    /// Score one candidate.
    pub fn forward(&self, enc: &EncodedCandidate) -> Result<NetworkScore> {
        Ok(NetworkScore::from_probability(sigmoid(self.run(enc)?.logit)))
    }

    /// Mean-BCE loss and gradients over `batch`.
    pub fn backward(&self, batch: &[EncodedCandidate]) -> Result<(f64, NetworkParams)> {
        if batch.iter().any(|e| e.label.is_none()) {
            return Err(Error::InvalidConfig("backward needs labeled examples".into()));
        }
        let refs: Vec<&EncodedCandidate> = batch.iter().collect();
        let (losses, grad) = super::batch_gradient(self, &refs)?;
        let mean = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        Ok((mean, grad))
    }
}

impl Parameters for NetworkParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(6);
        v.extend(self.lstm.tensors());
        v.extend(self.fc_global.tensors());
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(6);
        v.extend(self.lstm.tensors_mut());
        v.extend(self.fc_global.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Model for NetworkParams {
    type Example = EncodedCandidate;

    fn logit(&self, example: &EncodedCandidate) -> Result<f64> {
        Ok(self.run(example)?.logit)
    }

    fn accumulate_gradient(&self, example: &EncodedCandidate, y: f64, grad: &mut Self) -> Result<f64> {
        let pass = self.run(example)?;
        let p = sigmoid(pass.logit);
        // d bce / d logit for a sigmoid output
        let d_logit = p - y;
        let d_in = self
            .head
            .backward_pre(&pass.head_input, &[d_logit], &mut grad.head, true)
            .expect("input gradient requested");
        let h = self.lstm.hidden;
        self.fc_global
            .backward(&example.global, &pass.global, &d_in[h..], &mut grad.fc_global, false);
        self.lstm
            .backward(&example.sequence, &pass.lstm, &d_in[..h], &mut grad.lstm);
        Ok(bce(p, y))
    }
}
