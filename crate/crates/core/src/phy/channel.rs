use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use super::frame::SymbolFrame;
use crate::error::{Error, Result};

/// AWGN channel settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub snr_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(snr_db: f64, seed: u64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::domain("snr_db must be finite"));
        }
        Ok(ChannelConfig { snr_db, seed })
    }
}

/// Per-symbol complex noise variance for a unit-power signal at `snr_db`.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Circularly symmetric complex Gaussian noise with total variance
/// `10^(-snr_db / 10)`, half on each component.
#[derive(Debug, Clone)]
pub struct ComplexAwgn {
    component: Normal<f64>,
}

impl ComplexAwgn {
    pub fn new(snr_db: f64) -> Self {
        let sigma = (noise_variance(snr_db) / 2.0).sqrt();
        ComplexAwgn {
            component: Normal::new(0.0, sigma).expect("finite sigma"),
        }
    }

    /// Standard deviation of each real component.
    pub fn component_sigma(&self) -> f64 {
        self.component.std_dev()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        Complex64::new(self.component.sample(rng), self.component.sample(rng))
    }

    pub fn add_noise<R: Rng + ?Sized>(&self, rng: &mut R, symbols: &mut [Complex64]) {
        for s in symbols {
            *s += self.sample(rng);
        }
    }
}

/// Passes a frame through the AWGN channel, drawing from a generator seeded
/// by `config.seed`.
pub fn awgn(mut frame: SymbolFrame, config: &ChannelConfig) -> SymbolFrame {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let noise = ComplexAwgn::new(config.snr_db);
    for s in frame.symbols_mut() {
        *s += noise.sample(&mut rng);
    }
    frame
}
