//! Differentiable entropy of feature maps.
//!
//! Each value of a map is softly assigned to `B` bins spread uniformly over
//! `[-r, r]`: the weight of value `v` on bin `b` is a softmax over bins of
//! `-(v - center_b)^2 / tau`. Bin probabilities are the mean assignment over
//! the map and the entropy is the Shannon entropy of that histogram, in bits.
//! Everything is smooth in the map values, so the entropy can sit inside a
//! training loss.
//!
//! Two implementations live here: a scalar one over `f64` slices with an
//! analytic gradient, and a tensor one used by the training graph.

use candle_core::{DType, Tensor, D};

use crate::config::EntropyConfig;
use crate::error::{Error, Result};

/// Bin probabilities are clamped to this floor before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Raw and softmax-normalized entropies of the `2C` encoder maps.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl EntropyVector {
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let normalized = normalize_entropies(&raw)?;
        Ok(EntropyVector { raw, normalized })
    }

    /// Estimates the entropy of every row of `maps`.
    pub fn estimate<R: AsRef<[f64]>>(maps: &[R], config: &EntropyConfig) -> Result<Self> {
        let raw = maps
            .iter()
            .map(|m| estimate_entropy(m.as_ref(), config))
            .collect::<Result<Vec<_>>>()?;
        Self::from_raw(raw)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Sum of the normalized entropies of maps `2i` and `2i + 1`, one value per
    /// concatenated pair.
    pub fn pairwise(&self) -> Vec<f64> {
        pair_sums(&self.normalized)
    }
}

pub(crate) fn pair_sums(values: &[f64]) -> Vec<f64> {
    values.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

fn check_inputs(values: &[f64], config: &EntropyConfig) -> Result<()> {
    if values.is_empty() {
        return Err(Error::domain("feature map is empty"));
    }
    if config.bins < 2 || !(config.temperature > 0.0) {
        return Err(Error::domain("entropy estimator needs bins >= 2 and temperature > 0"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("feature map contains non-finite values"));
    }
    Ok(())
}

/// Soft assignment of `v` to every bin, written into `out`.
fn soft_assign(v: f64, centers: &[f64], temperature: f64, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (o, c) in out.iter_mut().zip(centers) {
        let d = v - c;
        *o = -(d * d) / temperature;
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Soft histogram of a map: the mean soft assignment over its values.
pub fn soft_histogram(values: &[f64], config: &EntropyConfig) -> Result<Vec<f64>> {
    check_inputs(values, config)?;
    let centers = config.bin_centers();
    let mut p = vec![0.0; config.bins];
    let mut w = vec![0.0; config.bins];
    for &v in values {
        soft_assign(v, &centers, config.temperature, &mut w);
        for (pb, wb) in p.iter_mut().zip(&w) {
            *pb += wb;
        }
    }
    let n = values.len() as f64;
    p.iter_mut().for_each(|pb| *pb /= n);
    Ok(p)
}

fn shannon_bits(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .map(|&pb| {
            let q = pb.max(PROB_FLOOR);
            -q * q.log2()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of one feature map in bits, in `[0, log2 B]`.
pub fn estimate_entropy(values: &[f64], config: &EntropyConfig) -> Result<f64> {
    let p = soft_histogram(values, config)?;
    Ok(shannon_bits(&p).min((config.bins as f64).log2()))
}

/// Analytic gradient of [`estimate_entropy`] with respect to every value.
pub fn entropy_gradient(values: &[f64], config: &EntropyConfig) -> Result<Vec<f64>> {
    let p = soft_histogram(values, config)?;
    let centers = config.bin_centers();
    let tau = config.temperature;
    let n = values.len() as f64;
    // dH/dp_b; zero where the floor is active.
    let dh_dp: Vec<f64> = p
        .iter()
        .map(|&pb| {
            if pb > PROB_FLOOR {
                -(pb.log2() + std::f64::consts::LOG2_E)
            } else {
                0.0
            }
        })
        .collect();
    let mut w = vec![0.0; config.bins];
    let grad = values
        .iter()
        .map(|&v| {
            soft_assign(v, &centers, tau, &mut w);
            let dlogit: Vec<f64> = centers.iter().map(|c| -2.0 * (v - c) / tau).collect();
            let mean_dlogit: f64 = w.iter().zip(&dlogit).map(|(a, b)| a * b).sum();
            w.iter()
                .zip(&dlogit)
                .zip(&dh_dp)
                .map(|((wb, db), gb)| gb * wb * (db - mean_dlogit))
                .sum::<f64>()
                / n
        })
        .collect();
    Ok(grad)
}

/// Softmax of the raw entropies: `exp(h_i) / sum_j exp(h_j)`.
pub fn normalize_entropies(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|h| !h.is_finite()) {
        return Err(Error::domain("entropy values must be finite"));
    }
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|h| (h - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Mean of `exp(h_i)` over the raw (unnormalized) entropies.
pub fn mean_exp_entropy(raw: &[f64]) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::domain("no entropy values"));
    }
    if raw.iter().any(|h| !h.is_finite()) {
        return Err(Error::domain("entropy values must be finite"));
    }
    Ok(raw.iter().map(|h| h.exp()).sum::<f64>() / raw.len() as f64)
}

/// Tensor version of [`estimate_entropy`] over the last dimension of `maps`.
///
/// `maps` has shape `(..., n)`; the result has shape `(...)`.
pub fn soft_entropy_bits(maps: &Tensor, config: &EntropyConfig) -> Result<Tensor> {
    let dtype = maps.dtype();
    let device = maps.device();
    let centers = Tensor::new(config.bin_centers().as_slice(), device)?.to_dtype(dtype)?;
    let rank = maps.rank();
    let mut center_shape = vec![1usize; rank];
    center_shape.push(config.bins);
    let centers = centers.reshape(center_shape)?;
    let diff = maps.unsqueeze(rank)?.broadcast_sub(&centers)?;
    let logits = (diff.sqr()? * (-1.0 / config.temperature))?;
    let assign = candle_nn::ops::softmax(&logits, D::Minus1)?;
    let p = assign.mean(rank - 1)?;
    let p = p.clamp(PROB_FLOOR, 1.0)?;
    let h = (p.clone() * p.log()?)?.sum(D::Minus1)?;
    Ok((h * (-std::f64::consts::LOG2_E))?)
}

/// Tensor softmax over the last dimension.
pub fn normalize_entropies_tensor(raw: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::softmax(raw, D::Minus1)?)
}

/// Per-row mean of `exp(h)`, shape `(batch,)` for an input of `(batch, 2C)`.
pub fn mean_exp_entropy_tensor(raw: &Tensor) -> Result<Tensor> {
    Ok(raw.exp()?.mean(D::Minus1)?)
}

pub(crate) fn tensor_to_f64_rows(t: &Tensor) -> Result<Vec<Vec<f64>>> {
    Ok(t.to_dtype(DType::F64)?.to_vec2::<f64>()?)
}
