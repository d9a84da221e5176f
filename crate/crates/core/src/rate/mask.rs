use std::cmp::Ordering;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Binary selection over the `C` concatenated maps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationMask {
    bits: Vec<u8>,
}

impl ActivationMask {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::domain("mask entries must be 0 or 1"));
        }
        Ok(ActivationMask { bits })
    }

    pub fn none(pairs: usize) -> Self {
        ActivationMask {
            bits: vec![0; pairs],
        }
    }

    pub fn all(pairs: usize) -> Self {
        ActivationMask {
            bits: vec![1; pairs],
        }
    }

    /// Activates the `count` maps with the highest pairwise entropy; ties go
    /// to the lower index.
    pub fn top_entropy(count: usize, pair_entropy: &[f64]) -> Result<Self> {
        if count > pair_entropy.len() {
            return Err(Error::domain(format!(
                "cannot activate {count} of {} maps",
                pair_entropy.len()
            )));
        }
        let mut bits = vec![0u8; pair_entropy.len()];
        for &i in &rank_by_entropy(pair_entropy)[..count] {
            bits[i] = 1;
        }
        Ok(ActivationMask { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of activated maps, C-hat.
    pub fn c_hat(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.bits[i] == 1
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i] == 1).collect()
    }

    /// Rows of `z_prime` selected by the mask, in index order (`C-hat x L`).
    pub fn select(&self, z_prime: &Array2<f64>) -> Result<Array2<f64>> {
        if z_prime.nrows() != self.bits.len() {
            return Err(Error::domain("mask length differs from map count"));
        }
        let idx = self.active_indices();
        Ok(z_prime.select(ndarray::Axis(0), &idx))
    }
}

/// Indices ordered by descending value; equal values keep ascending index.
pub fn rank_by_entropy(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// All `C + 1` masks, one per activation count, as a row-major `(C+1) x C`
/// table.
pub fn mask_table(pair_entropy: &[f64]) -> Vec<f64> {
    let c = pair_entropy.len();
    let order = rank_by_entropy(pair_entropy);
    let mut table = vec![0.0; (c + 1) * c];
    for k in 1..=c {
        for &i in &order[..k] {
            table[k * c + i] = 1.0;
        }
    }
    table
}
