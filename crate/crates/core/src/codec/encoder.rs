use candle_core::Tensor;

use super::snr_adapt::SnrAdapt;
use crate::config::{ModelConfig, IMAGE_CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::nn::{Builder, Conv2d, PRelu};

/// `act(x + conv2(act(conv1(x))))` with 3x3 convolutions.
#[derive(Debug, Clone)]
pub struct ResBlock {
    conv1: Conv2d,
    act1: PRelu,
    conv2: Conv2d,
    act2: PRelu,
}

impl ResBlock {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(ResBlock {
                conv1: Conv2d::new(b, "conv1", channels, channels, 3, 1, 1)?,
                act1: PRelu::new(b, "act1", channels)?,
                conv2: Conv2d::new(b, "conv2", channels, channels, 3, 1, 1)?,
                act2: PRelu::new(b, "act2", channels)?,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.act1.forward(&self.conv1.forward(x)?)?;
        let h = self.conv2.forward(&h)?;
        self.act2.forward(&(x + h)?)
    }
}

/// Three convolutions taking `3 x 32 x 32` images to an `8 x 8` grid.
#[derive(Debug, Clone)]
pub struct FrontEncoder {
    layers: Vec<(Conv2d, PRelu)>,
}

impl FrontEncoder {
    pub fn new(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let [c1, c2, c3] = cfg.s1_channels;
        let spec = [(IMAGE_CHANNELS, c1, 1), (c1, c2, 2), (c2, c3, 2)];
        let layers = spec
            .iter()
            .enumerate()
            .map(|(i, &(cin, cout, stride))| {
                Ok((
                    Conv2d::new(b, &format!("conv{}", i + 1), cin, cout, 3, stride, 1)?,
                    PRelu::new(b, &format!("act{}", i + 1), cout)?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(FrontEncoder { layers })
    }

    /// `(B, 3, 32, 32) -> (B, channels, 8, 8)`.
    pub fn forward(&self, images: &Tensor) -> Result<Tensor> {
        let dims = images.dims();
        if dims.len() != 4 || dims[1..] != [IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE] {
            return Err(Error::domain(format!(
                "expected images of shape (B, 3, 32, 32); got {dims:?}"
            )));
        }
        let mut h = images.clone();
        for (conv, act) in &self.layers {
            h = act.forward(&conv.forward(&h)?)?;
        }
        Ok(h)
    }
}

/// Residual blocks with SNR gates, then a 1x1 projection to the `2C` maps.
#[derive(Debug, Clone)]
pub struct BackEncoder {
    res1: ResBlock,
    gate1: SnrAdapt,
    res2: ResBlock,
    gate2: SnrAdapt,
    proj: Conv2d,
}

impl BackEncoder {
    pub fn new(b: &mut Builder, cfg: &ModelConfig) -> Result<Self> {
        let c = cfg.s1_channels[2];
        Ok(BackEncoder {
            res1: ResBlock::new(b, "res1", c)?,
            gate1: SnrAdapt::new(b, "gate1", c, cfg.gate_hidden)?,
            res2: ResBlock::new(b, "res2", c)?,
            gate2: SnrAdapt::new(b, "gate2", c, cfg.gate_hidden)?,
            proj: Conv2d::new(b, "proj", c, cfg.feature_maps, 1, 1, 0)?,
        })
    }

    /// `(B, channels, 8, 8)` and `snr (B, 1)` to `z` of shape `(B, 2C, L/2)`.
    pub fn forward(&self, features: &Tensor, snr: &Tensor) -> Result<Tensor> {
        let h = self.gate1.forward(&self.res1.forward(features)?, snr)?;
        let h = self.gate2.forward(&self.res2.forward(&h)?, snr)?;
        let z = self.proj.forward(&h)?;
        let (b, maps, hh, ww) = z.dims4()?;
        Ok(z.reshape((b, maps, hh * ww))?)
    }
}
