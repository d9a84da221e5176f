use candle_core::{Tensor, D};
use ndarray::Array2;
use rand::Rng;

use super::choice::{PolicyChoice, PolicyMode};
use super::mask::ActivationMask;
use crate::codec::FeatureBlock;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{Builder, Linear};

/// Chooses how many concatenated maps to transmit.
///
/// Input per image: for each of the `2C` maps the mean of its `L/2` values
/// together with its normalized entropy, plus the SNR in dB. Output: `C + 1`
/// logits over the activation count.
#[derive(Debug, Clone)]
pub struct SelectionPolicy {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl SelectionPolicy {
    pub fn new(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let maps = cfg.feature_maps;
        Ok(SelectionPolicy {
            fc1: Linear::new(b, "fc1", maps + 1, cfg.policy_hidden)?,
            fc2: Linear::new(b, "fc2", cfg.policy_hidden, cfg.pairs() + 1)?,
        })
    }

    /// `z` is `(B, 2C, L/2)`, `h_norm` is `(B, 2C)` and `snr` is `(B, 1)`.
    /// Each map's row is extended by its normalized entropy and averaged.
    pub fn features(z: &Tensor, h_norm: &Tensor, snr: &Tensor) -> Result<Tensor> {
        let n = z.dim(D::Minus1)? as f64 + 1.0;
        let avg = ((z.sum(D::Minus1)? + h_norm)? / n)?;
        Ok(Tensor::cat(&[&avg, snr], D::Minus1)?)
    }

    pub fn logits(&self, input: &Tensor) -> Result<Tensor> {
        let h = self.fc1.forward(input)?.relu()?;
        self.fc2.forward(&h)
    }
}

/// Chooses one pruning ratio from the ratio table.
///
/// Input per image: the mean of each of the `C` concatenated rows after
/// masking (zero for maps that are not activated) plus the SNR. Output:
/// softmax probabilities over the `T` ratios.
#[derive(Debug, Clone)]
pub struct PruningPolicy {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl PruningPolicy {
    pub fn new(b: &mut Builder, cfg: &ModelConfig, options: usize) -> Result<Self> {
        Ok(PruningPolicy {
            fc1: Linear::new(b, "fc1", cfg.pairs() + 1, cfg.policy_hidden)?,
            fc2: Linear::new(b, "fc2", cfg.policy_hidden, options)?,
        })
    }

    /// `z1` is the masked `(B, C, L)` block, `snr` is `(B, 1)`.
    pub fn features(z1: &Tensor, snr: &Tensor) -> Result<Tensor> {
        Ok(Tensor::cat(&[&z1.mean(D::Minus1)?, snr], D::Minus1)?)
    }

    pub fn logits(&self, input: &Tensor) -> Result<Tensor> {
        let h = self.fc1.forward(input)?.relu()?;
        self.fc2.forward(&h)
    }

    pub fn probabilities(&self, input: &Tensor) -> Result<Tensor> {
        Ok(candle_nn::ops::softmax(&self.logits(input)?, D::Minus1)?)
    }
}

fn row_tensor(values: &[f64], like: &Tensor) -> Result<Tensor> {
    Ok(Tensor::from_slice(values, (1, values.len()), like.device())?.to_dtype(like.dtype())?)
}

fn first_row(t: &Tensor) -> Result<Vec<f64>> {
    Ok(t.to_dtype(candle_core::DType::F64)?.get(0)?.to_vec1::<f64>()?)
}

/// Runs the selection policy on one image and turns the chosen count into a
/// mask over the highest-entropy pairs.
pub fn p1_forward<R: Rng + ?Sized>(
    policy: &SelectionPolicy,
    block: &FeatureBlock,
    h_norm: &[f64],
    snr_db: f64,
    mode: PolicyMode,
    rng: &mut R,
) -> Result<(ActivationMask, PolicyChoice)> {
    if h_norm.len() != block.maps() {
        return Err(Error::domain(format!(
            "{} normalized entropies for {} maps",
            h_norm.len(),
            block.maps()
        )));
    }
    let like = policy.fc1.weight.as_tensor();
    let (maps, half) = block.z().dim();
    let z = Tensor::from_slice(block.z().as_slice().expect("standard layout"), (1, maps, half), like.device())?
        .to_dtype(like.dtype())?;
    let input = SelectionPolicy::features(&z, &row_tensor(h_norm, like)?, &row_tensor(&[snr_db], like)?)?;
    let logits = first_row(&policy.logits(&input)?)?;
    let choice = PolicyChoice::choose(logits, mode, rng)?;
    let pair_entropy = crate::entropy::pair_sums(h_norm);
    let mask = ActivationMask::top_entropy(choice.index(), &pair_entropy)?;
    Ok((mask, choice))
}

/// Runs the pruning policy on the masked concatenated block (`C x L`, zero
/// rows for maps that are not activated). The ratio with the highest
/// probability wins in both modes; training relies on a straight-through
/// estimator instead of sampling here. With nothing activated the policy is
/// skipped and the ratio is 0.
pub fn p2_forward(
    policy: &PruningPolicy,
    z1: &Array2<f64>,
    mask: &ActivationMask,
    snr_db: f64,
    ratios: &[f64],
) -> Result<(f64, Option<PolicyChoice>)> {
    if mask.c_hat() == 0 {
        return Ok((0.0, None));
    }
    if z1.nrows() != mask.len() {
        return Err(Error::domain("masked block must have one row per pair"));
    }
    let like = policy.fc1.weight.as_tensor();
    let (rows, cols) = z1.dim();
    let z = Tensor::from_slice(z1.as_standard_layout().as_slice().expect("standard layout"), (1, rows, cols), like.device())?
        .to_dtype(like.dtype())?;
    let input = PruningPolicy::features(&z, &row_tensor(&[snr_db], like)?)?;
    let probs = first_row(&policy.probabilities(&input)?)?;
    if probs.len() != ratios.len() {
        return Err(Error::domain("policy width differs from the ratio table"));
    }
    let choice = PolicyChoice::argmax(probs)?;
    Ok((ratios[choice.index()], Some(choice)))
}
