//! Two-layer feed-forward scorer over bag-of-n-gram inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Activation, FcParams};
use super::{Labeled, Model, Parameters};
use crate::error::Result;
use crate::types::bce;

pub const BASELINE_HIDDEN: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineExample {
    pub candidate_id: String,
    pub input: Vec<f64>,
    pub label: Option<u8>,
}

impl Labeled for BaselineExample {
    fn label(&self) -> Option<u8> {
        self.label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParams {
    pub hidden: FcParams,
    pub head: FcParams,
}

impl BaselineParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        BaselineParams {
            hidden: FcParams::zeros(input_dim, hidden, Activation::Relu),
            head: FcParams::zeros(hidden, 1, Activation::Sigmoid),
        }
    }

    pub fn init(input_dim: usize, hidden: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BaselineParams {
            hidden: FcParams::uniform(input_dim, hidden, Activation::Relu, scale, &mut rng),
            head: FcParams::uniform(hidden, 1, Activation::Sigmoid, scale, &mut rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden.input_dim()
    }
}

impl Parameters for BaselineParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(4);
        v.extend(self.hidden.tensors());
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(4);
        v.extend(self.hidden.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Model for BaselineParams {
    type Example = BaselineExample;

    fn logit(&self, example: &BaselineExample) -> Result<f64> {
        let h = self.hidden.forward(&example.input)?;
        Ok(self.head.forward(&h.out)?.pre[0])
    }

    fn accumulate_gradient(&self, example: &BaselineExample, y: f64, grad: &mut Self) -> Result<f64> {
        let h = self.hidden.forward(&example.input)?;
        let out = self.head.forward(&h.out)?;
        let p = out.out[0];
        let d_h = self
            .head
            .backward_pre(&h.out, &[p - y], &mut grad.head, true)
            .expect("input gradient requested");
        self.hidden.backward(&example.input, &h, &d_h, &mut grad.hidden, false);
        Ok(bce(p, y))
    }
}
