use candle_core::{Tensor, D};

use crate::error::Result;
use crate::nn::{global_average, Builder, Linear};

/// Channel gating conditioned on the channel SNR.
///
/// The features are average-pooled per channel, the SNR in dB is appended,
/// and a two-layer perceptron with a sigmoid head yields one gate in `[0, 1]`
/// per channel that multiplies that channel.
#[derive(Debug, Clone)]
pub struct SnrAdapt {
    pub hidden: Linear,
    pub head: Linear,
}

impl SnrAdapt {
    pub fn new(b: &mut Builder, name: &str, channels: usize, hidden: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(SnrAdapt {
                hidden: Linear::new(b, "fc1", channels + 1, hidden)?,
                head: Linear::new(b, "fc2", hidden, channels)?,
            })
        })
    }

    /// Gates of shape `(B, channels)` for features `(B, channels, ...)` and
    /// `snr` of shape `(B, 1)`.
    pub fn gate(&self, features: &Tensor, snr: &Tensor) -> Result<Tensor> {
        let pooled = global_average(features)?;
        let input = Tensor::cat(&[&pooled, snr], D::Minus1)?;
        let h = self.hidden.forward(&input)?.relu()?;
        Ok(candle_nn::ops::sigmoid(&self.head.forward(&h)?)?)
    }

    /// Multiplies every channel by its gate.
    pub fn apply_gate(features: &Tensor, gate: &Tensor) -> Result<Tensor> {
        let mut shape = vec![1usize; features.rank()];
        shape[0] = gate.dim(0)?;
        shape[1] = gate.dim(1)?;
        Ok(features.broadcast_mul(&gate.reshape(shape)?)?)
    }

    pub fn forward(&self, features: &Tensor, snr: &Tensor) -> Result<Tensor> {
        let gate = self.gate(features, snr)?;
        Self::apply_gate(features, &gate)
    }
}
