use candle_core::Tensor;

use super::encoder::ResBlock;
use super::snr_adapt::SnrAdapt;
use crate::config::{ModelConfig, IMAGE_CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::nn::{Builder, Conv2d, ConvTranspose2d, PRelu};

/// Mirror of the encoder: projection, gated residual blocks, two transposed
/// convolutions back to `32 x 32`, and a 3x3 convolution with a sigmoid.
#[derive(Debug, Clone)]
pub struct Decoder {
    proj: Conv2d,
    proj_act: PRelu,
    gate2: SnrAdapt,
    res2: ResBlock,
    gate1: SnrAdapt,
    res1: ResBlock,
    up3: ConvTranspose2d,
    act3: PRelu,
    up2: ConvTranspose2d,
    act2: PRelu,
    out: Conv2d,
    maps: usize,
}

impl Decoder {
    pub fn new(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let [c1, c2, c3] = cfg.s1_channels;
        Ok(Decoder {
            proj: Conv2d::new(b, "proj", cfg.feature_maps, c3, 1, 1, 0)?,
            proj_act: PRelu::new(b, "proj_act", c3)?,
            gate2: SnrAdapt::new(b, "gate2", c3, cfg.gate_hidden)?,
            res2: ResBlock::new(b, "res2", c3)?,
            gate1: SnrAdapt::new(b, "gate1", c3, cfg.gate_hidden)?,
            res1: ResBlock::new(b, "res1", c3)?,
            up3: ConvTranspose2d::upsample(b, "up3", c3, c2, 2)?,
            act3: PRelu::new(b, "act3", c2)?,
            up2: ConvTranspose2d::upsample(b, "up2", c2, c1, 2)?,
            act2: PRelu::new(b, "act2", c1)?,
            out: Conv2d::new(b, "out", c1, IMAGE_CHANNELS, 3, 1, 1)?,
            maps: cfg.feature_maps,
        })
    }

    /// `z_hat (B, 2C, L/2)` and `snr (B, 1)` to images `(B, 3, 32, 32)` in `[0, 1]`.
    pub fn forward(&self, z_hat: &Tensor, snr: &Tensor) -> Result<Tensor> {
        let side = IMAGE_SIDE / 4;
        let dims = z_hat.dims();
        if dims.len() != 3 || dims[1] != self.maps || dims[2] != side * side {
            return Err(Error::domain(format!(
                "expected received features of shape (B, {}, {}); got {dims:?}",
                self.maps,
                side * side
            )));
        }
        let h = z_hat.reshape((dims[0], self.maps, side, side))?;
        let h = self.proj_act.forward(&self.proj.forward(&h)?)?;
        let h = self.res2.forward(&self.gate2.forward(&h, snr)?)?;
        let h = self.res1.forward(&self.gate1.forward(&h, snr)?)?;
        let h = self.act3.forward(&self.up3.forward(&h)?)?;
        let h = self.act2.forward(&self.up2.forward(&h)?)?;
        Ok(candle_nn::ops::sigmoid(&self.out.forward(&h)?)?)
    }
}
