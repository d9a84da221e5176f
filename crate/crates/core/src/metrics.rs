//! Reconstruction quality.

use crate::error::{Error, Result};

/// PSNR reported for a perfect reconstruction.
pub const PSNR_CAP_DB: f64 = 100.0;

pub fn mse(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(Error::domain(format!(
            "images differ in size: {} vs {}",
            x.len(),
            x_hat.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::domain("empty image"));
    }
    Ok(x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// PSNR from a mean squared error for images in `[0, 1]`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// `10 log10(1 / MSE)` for images in `[0, 1]`, capped at 100 dB.
pub fn psnr(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, x_hat)?))
}
