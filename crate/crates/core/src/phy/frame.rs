use num_complex::Complex64;

use super::qam;
use crate::error::{Error, Result};

/// Channel input for one image: pruned feature values packed into complex
/// symbols plus the 64-QAM symbols of the pruning index matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// One row per activated map, `ceil(L_hat / 2)` symbols each. The first
    /// half of a row's values is the real part, the second half the imaginary.
    pub feature_symbols: Vec<Vec<Complex64>>,
    /// One row per activated map, `ceil(L / 6)` symbols each; empty when
    /// nothing was pruned.
    pub index_symbols: Vec<Vec<Complex64>>,
    /// Scalar applied by [`power_normalize`]; 1 before normalization.
    pub norm_gain: f64,
}

/// Packs real values pairwise into complex symbols. An odd count leaves the
/// final imaginary part at zero.
pub fn pack_row(values: &[f64]) -> Vec<Complex64> {
    let n = values.len().div_ceil(2);
    (0..n)
        .map(|j| Complex64::new(values[j], values.get(n + j).copied().unwrap_or(0.0)))
        .collect()
}

/// Inverse of [`pack_row`] for a row of `len` real values.
pub fn unpack_row(symbols: &[Complex64], len: usize) -> Vec<f64> {
    let n = len.div_ceil(2);
    let mut out: Vec<f64> = symbols[..n].iter().map(|s| s.re).collect();
    out.extend(symbols[..len - n].iter().map(|s| s.im));
    out
}

impl SymbolFrame {
    /// Builds a frame from the kept feature values of each activated map and,
    /// when pruning happened, the matching index rows.
    pub fn pack(kept_rows: &[Vec<f64>], index_rows: Option<&[Vec<u8>]>) -> Result<Self> {
        let feature_symbols = kept_rows.iter().map(|r| pack_row(r)).collect();
        let index_symbols = match index_rows {
            Some(rows) => {
                if rows.len() != kept_rows.len() {
                    return Err(Error::domain("index rows must match activated maps"));
                }
                rows.iter()
                    .map(|r| qam::qam64_modulate(r))
                    .collect::<Result<Vec<_>>>()?
            }
            None => Vec::new(),
        };
        Ok(SymbolFrame {
            feature_symbols,
            index_symbols,
            norm_gain: 1.0,
        })
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols().count()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Complex64> {
        self.feature_symbols
            .iter()
            .chain(&self.index_symbols)
            .flat_map(|r| r.iter())
    }

    pub fn symbols_mut(&mut self) -> impl Iterator<Item = &mut Complex64> {
        self.feature_symbols
            .iter_mut()
            .chain(self.index_symbols.iter_mut())
            .flat_map(|r| r.iter_mut())
    }

    pub fn mean_power(&self) -> f64 {
        let n = self.symbol_count();
        if n == 0 {
            return 0.0;
        }
        self.symbols().map(|s| s.norm_sqr()).sum::<f64>() / n as f64
    }

    /// Receiver side: undoes the gain and unpacks each feature row into
    /// `kept_len` real values.
    pub fn received_features(&self, kept_len: usize) -> Vec<Vec<f64>> {
        let g = self.norm_gain;
        self.feature_symbols
            .iter()
            .map(|row| {
                let scaled: Vec<Complex64> = row.iter().map(|s| s / g).collect();
                unpack_row(&scaled, kept_len)
            })
            .collect()
    }

    /// Receiver side: undoes the gain and demodulates each index row into
    /// `length` bits.
    pub fn received_index(&self, length: usize) -> Result<Vec<Vec<u8>>> {
        let g = self.norm_gain;
        self.index_symbols
            .iter()
            .map(|row| {
                let scaled: Vec<Complex64> = row.iter().map(|s| s / g).collect();
                qam::qam64_demodulate(&scaled, length)
            })
            .collect()
    }
}

/// Scales every symbol by one gain so that the mean squared magnitude over the
/// whole frame is 1.
pub fn power_normalize(mut frame: SymbolFrame) -> Result<SymbolFrame> {
    if frame.symbol_count() == 0 {
        return Err(Error::Normalization("frame has no symbols".into()));
    }
    let p = frame.mean_power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Normalization(format!("frame mean power is {p}")));
    }
    let gain = p.sqrt().recip();
    frame.symbols_mut().for_each(|s| *s *= gain);
    frame.norm_gain *= gain;
    Ok(frame)
}
