//! Minibatch Adam with global-norm clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_gradient, mean_loss, Labeled, Model, Parameters};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub validation_fraction: f64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 5.0,
            validation_fraction: 0.1,
            init_scale: 0.08,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_examples: usize,
    pub validation_examples: usize,
    pub initial_train_loss: f64,
    pub initial_validation_loss: Option<f64>,
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_train_loss(&self) -> f64 {
        self.epochs.last().map_or(self.initial_train_loss, |e| e.train_loss)
    }

    pub fn final_validation_loss(&self) -> Option<f64> {
        self.epochs
            .last()
            .map_or(self.initial_validation_loss, |e| e.validation_loss)
    }
}

pub struct Adam<P: Parameters> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: P,
    v: P,
    t: i32,
}

impl<P: Parameters> Adam<P> {
    pub fn new(params: &P, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut P, grad: &P) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Fit `model` on `data` with minibatch Adam.
///
/// A seeded shuffle holds out `validation_fraction` of the examples, then
/// reshuffles the training part every epoch. The whole run is a function
/// of `cfg` and `data`.
pub fn train<M: Model>(model: &mut M, data: &[M::Example], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.iter().any(|e| e.label().is_none()) {
        return Err(Error::InvalidConfig("training example without a label".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((data.len() as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(data.len() - 1);
    let mut train_idx = order[..data.len() - n_val].to_vec();
    let mut val_idx = order[data.len() - n_val..].to_vec();
    val_idx.sort_unstable();
    let val: Vec<&M::Example> = val_idx.iter().map(|&i| &data[i]).collect();

    let mut sorted_train = train_idx.clone();
    sorted_train.sort_unstable();
    let train_refs: Vec<&M::Example> = sorted_train.iter().map(|&i| &data[i]).collect();

    let mut history = TrainHistory {
        train_examples: train_idx.len(),
        validation_examples: val.len(),
        initial_train_loss: mean_loss(model, &train_refs)?,
        initial_validation_loss: if val.is_empty() { None } else { Some(mean_loss(model, &val)?) },
        epochs: Vec::with_capacity(cfg.epochs),
    };

    let mut adam = Adam::new(model, cfg);
    let mut per_example = vec![0.0; data.len()];
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch: Vec<&M::Example> = chunk.iter().map(|&i| &data[i]).collect();
            let (losses, mut grad) = batch_gradient(model, &batch)?;
            // loss before this step's update
            for (&i, loss) in chunk.iter().zip(losses) {
                per_example[i] = loss;
            }
            let norm = grad.squared_norm().sqrt();
            if cfg.clip_norm > 0.0 && norm > cfg.clip_norm {
                grad.scale(cfg.clip_norm / norm);
            }
            adam.step(model, &grad);
        }
        // Summed in index order so the value does not depend on the shuffle.
        let train_loss = sorted_train.iter().map(|&i| per_example[i]).sum::<f64>() / sorted_train.len() as f64;
        let validation_loss = if val.is_empty() { None } else { Some(mean_loss(model, &val)?) };
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            train_loss,
            validation_loss,
        });
    }
    Ok(history)
}
