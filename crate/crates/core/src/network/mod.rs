//! Stage three, model side: the character-level recurrent scorer, the
//! n-gram feed-forward baseline, and the shared training loop.

mod baseline;
mod checkpoint;
mod lstm;
mod model;
mod tensor;
mod train;

pub use baseline::{BaselineExample, BaselineParams, BASELINE_HIDDEN};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use lstm::{LstmCache, LstmParams};
pub use model::{NetworkDims, NetworkParams, NetworkScore};
pub use tensor::{Activation, FcCache, FcParams, Matrix};
pub use train::{train, Adam, EpochStats, TrainConfig, TrainHistory};

use crate::error::Result;

/// A set of parameter tensors visited in a fixed order. Gradients use the
/// same type, so optimizer state lines up tensor by tensor.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }
}

/// Something that maps an example to a probability and can differentiate
/// binary cross-entropy through itself.
pub trait Model: Parameters {
    type Example: Labeled;

    /// Pre-sigmoid output.
    fn logit(&self, example: &Self::Example) -> Result<f64>;

    /// Add the gradient of `bce(sigmoid(logit), y)` into `grad` and return
    /// the (clamped) loss.
    fn accumulate_gradient(&self, example: &Self::Example, y: f64, grad: &mut Self) -> Result<f64>;

    fn predict(&self, example: &Self::Example) -> Result<f64> {
        Ok(crate::types::sigmoid(self.logit(example)?))
    }
}

pub trait Labeled {
    fn label(&self) -> Option<u8>;
}

impl Labeled for crate::encoder::EncodedCandidate {
    fn label(&self) -> Option<u8> {
        self.label
    }
}

/// Per-example losses and the mean gradient over a batch.
pub fn batch_gradient<M: Model>(model: &M, batch: &[&M::Example]) -> Result<(Vec<f64>, M)> {
    let mut grad = model.zeros_like();
    let mut losses = Vec::with_capacity(batch.len());
    for ex in batch {
        let y = ex.label().map(f64::from).unwrap_or(0.0);
        losses.push(model.accumulate_gradient(ex, y, &mut grad)?);
    }
    grad.scale(1.0 / batch.len().max(1) as f64);
    Ok((losses, grad))
}

/// Mean clamped BCE over labeled examples.
pub fn mean_loss<M: Model>(model: &M, examples: &[&M::Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let y = ex.label().map(f64::from).unwrap_or(0.0);
        total += crate::types::bce(model.predict(ex)?, y);
    }
    Ok(total / examples.len().max(1) as f64)
}
