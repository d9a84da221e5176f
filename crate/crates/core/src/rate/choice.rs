use rand::Rng;

use crate::error::{Error, Result};

/// How a policy turns logits into a decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyMode {
    /// Gumbel-max draw at the given temperature.
    Sample { temperature: f64 },
    /// Largest logit, lowest index on ties.
    Argmax,
}

/// A categorical decision and the logits it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyChoice {
    pub logits: Vec<f64>,
    pub onehot: Vec<u8>,
    pub sampled: bool,
}

impl PolicyChoice {
    pub fn from_index(logits: Vec<f64>, index: usize, sampled: bool) -> Self {
        let mut onehot = vec![0u8; logits.len()];
        onehot[index] = 1;
        PolicyChoice {
            logits,
            onehot,
            sampled,
        }
    }

    /// Deterministic choice.
    pub fn argmax(logits: Vec<f64>) -> Result<Self> {
        let i = argmax_lowest(&logits)?;
        Ok(Self::from_index(logits, i, false))
    }

    /// Draws `argmax(logits + g)` with standard Gumbel noise `g`, which is the
    /// forward value of a hard Gumbel-Softmax sample at any temperature.
    pub fn sample<R: Rng + ?Sized>(logits: Vec<f64>, rng: &mut R) -> Result<Self> {
        let noise = gumbel_noise(rng, logits.len());
        let perturbed: Vec<f64> = logits.iter().zip(&noise).map(|(l, g)| l + g).collect();
        let i = argmax_lowest(&perturbed)?;
        Ok(Self::from_index(logits, i, true))
    }

    pub fn choose<R: Rng + ?Sized>(logits: Vec<f64>, mode: PolicyMode, rng: &mut R) -> Result<Self> {
        match mode {
            PolicyMode::Argmax => Self::argmax(logits),
            PolicyMode::Sample { temperature } => {
                if !(temperature > 0.0) {
                    return Err(Error::domain("Gumbel temperature must be positive"));
                }
                Self::sample(logits, rng)
            }
        }
    }

    pub fn index(&self) -> usize {
        self.onehot.iter().position(|&v| v == 1).expect("one-hot")
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_lowest(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::domain("no logits"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("NaN logit"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Standard Gumbel samples `-ln(-ln u)`, `u` uniform in `(0, 1)`.
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            -(-u.ln()).ln()
        })
        .collect()
}
