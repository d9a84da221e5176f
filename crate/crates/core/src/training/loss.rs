use candle_core::{DType, Tensor};

use crate::entropy::{mean_exp_entropy, mean_exp_entropy_tensor};
use crate::error::{Error, Result};
use crate::metrics;
use crate::pipeline::TrainPass;
use crate::rate::ActivationMask;

/// The three loss terms and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub mse: f64,
    /// `alpha * (L_hat / L) * C_hat`.
    pub rate_term: f64,
    /// `beta * mean(exp(H))` over the raw map entropies.
    pub entropy_term: f64,
    /// `mse + rate_term - entropy_term`.
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl LossBreakdown {
    fn new(mse: f64, rate_term: f64, entropy_term: f64, alpha: f64, beta: f64) -> Self {
        LossBreakdown {
            mse,
            rate_term,
            entropy_term,
            total: mse + rate_term - entropy_term,
            alpha,
            beta,
        }
    }

    /// Term-wise mean; the identity `total = mse + rate - entropy` carries
    /// over.
    pub fn mean(parts: &[LossBreakdown]) -> Self {
        if parts.is_empty() {
            return LossBreakdown::default();
        }
        let n = parts.len() as f64;
        let avg = |f: fn(&LossBreakdown) -> f64| parts.iter().map(f).sum::<f64>() / n;
        LossBreakdown::new(
            avg(|p| p.mse),
            avg(|p| p.rate_term),
            avg(|p| p.entropy_term),
            parts[0].alpha,
            parts[0].beta,
        )
    }
}

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0) || !(beta >= 0.0) {
        return Err(Error::Config(format!("alpha ({alpha}) and beta ({beta}) must be nonnegative")));
    }
    Ok(())
}

/// Loss of one image. `length` is `L`.
pub fn compute_loss(
    x: &[f64],
    x_hat: &[f64],
    mask: &ActivationMask,
    l_hat: usize,
    length: usize,
    raw_entropies: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown> {
    check_weights(alpha, beta)?;
    if length == 0 || l_hat > length {
        return Err(Error::domain("kept length must lie in 0..=L with L > 0"));
    }
    let mse = metrics::mse(x, x_hat)?;
    let rate = alpha * (l_hat as f64 / length as f64) * mask.c_hat() as f64;
    let entropy = beta * mean_exp_entropy(raw_entropies)?;
    Ok(LossBreakdown::new(mse, rate, entropy, alpha, beta))
}

/// Batch loss for backpropagation plus its host-side breakdown.
pub fn batch_loss(pass: &TrainPass, images: &Tensor, alpha: f64, beta: f64) -> Result<(Tensor, LossBreakdown)> {
    check_weights(alpha, beta)?;
    let mse = (images - &pass.x_hat)?.sqr()?.mean((1, 2, 3))?;
    let rate = ((&pass.length_fraction * &pass.mask_count)? * alpha)?;
    let entropy = (mean_exp_entropy_tensor(&pass.raw_entropy)? * beta)?;
    let total = ((&mse + &rate)? - &entropy)?.mean_all()?;
    let host = |t: &Tensor| -> Result<f64> { Ok(t.to_dtype(DType::F64)?.mean_all()?.to_scalar::<f64>()?) };
    let breakdown = LossBreakdown::new(host(&mse)?, host(&rate)?, host(&entropy)?, alpha, beta);
    Ok((total, breakdown))
}
