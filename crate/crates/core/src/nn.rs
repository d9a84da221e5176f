//! Minimal layer set over candle variables.
//!
//! Parameters are created from a seeded host generator so initialization is
//! reproducible, and each one is tagged with the sub-network it belongs to so
//! training stages can freeze groups.

use std::fmt;

use candle_core::{DType, Device, Tensor, Var, D};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;

/// Sub-network a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    /// Front convolutions of the encoder.
    EncoderFront,
    /// Residual blocks, SNR gates and projection of the encoder.
    EncoderBack,
    Decoder,
    /// Map-selection policy.
    SelectionPolicy,
    /// Pruning-ratio policy.
    PruningPolicy,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 5] = [
        ParamGroup::EncoderFront,
        ParamGroup::EncoderBack,
        ParamGroup::Decoder,
        ParamGroup::SelectionPolicy,
        ParamGroup::PruningPolicy,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            ParamGroup::EncoderFront => "s1",
            ParamGroup::EncoderBack => "s2",
            ParamGroup::Decoder => "dec",
            ParamGroup::SelectionPolicy => "p1",
            ParamGroup::PruningPolicy => "p2",
        }
    }
}

impl fmt::Display for ParamGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub group: ParamGroup,
    pub var: Var,
}

/// How fresh parameters are filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±1/sqrt(fan_in)`, from a generator seeded with `seed`.
    Random { seed: u64 },
    /// Every weight and bias zero (activation slopes keep their defaults).
    Zeros,
}

#[derive(Debug, Clone)]
pub struct ParamStore {
    params: Vec<Param>,
    device: Device,
    dtype: DType,
}

impl ParamStore {
    pub fn new(device: Device, dtype: DType) -> Self {
        ParamStore {
            params: Vec::new(),
            device,
            dtype,
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn vars_in(&self, groups: &[ParamGroup]) -> Vec<Var> {
        self.params
            .iter()
            .filter(|p| groups.contains(&p.group))
            .map(|p| p.var.clone())
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.var.elem_count()).sum()
    }

    fn push(&mut self, name: String, group: ParamGroup, values: Vec<f64>, shape: &[usize]) -> Result<Var> {
        debug_assert!(self.get(&name).is_none(), "duplicate parameter {name}");
        let t = Tensor::from_vec(values, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        self.params.push(Param {
            name,
            group,
            var: var.clone(),
        });
        Ok(var)
    }
}

/// Creates parameters for one group under a name prefix.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: StdRng,
    zeros: bool,
    group: ParamGroup,
    prefix: String,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, group: ParamGroup, init: Init) -> Self {
        let (rng, zeros) = match init {
            // Each group gets its own stream so adding a layer to one group
            // leaves the others untouched.
            Init::Random { seed } => (
                StdRng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(group as u64 + 1))),
                false,
            ),
            Init::Zeros => (StdRng::seed_from_u64(0), true),
        };
        Builder {
            store,
            rng,
            zeros,
            group,
            prefix: group.prefix().to_string(),
        }
    }

    pub fn scoped<R>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let saved = self.prefix.clone();
        self.prefix = format!("{saved}.{name}");
        let out = f(self);
        self.prefix = saved;
        out
    }

    fn full_name(&self, name: &str) -> String {
        format!("{}.{name}", self.prefix)
    }

    pub fn uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Var> {
        self.uniform_bound(name, shape, 1.0 / (fan_in as f64).sqrt())
    }

    /// He-uniform for weights feeding a PReLU with the default slope.
    pub fn he_uniform(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Var> {
        let gain = (2.0 / (1.0 + PRELU_SLOPE * PRELU_SLOPE)).sqrt();
        self.uniform_bound(name, shape, gain * (3.0 / fan_in as f64).sqrt())
    }

    fn uniform_bound(&mut self, name: &str, shape: &[usize], bound: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        let values: Vec<f64> = if self.zeros {
            vec![0.0; n]
        } else {
            (0..n).map(|_| self.rng.random_range(-bound..bound)).collect()
        };
        let full = self.full_name(name);
        self.store.push(full, self.group, values, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        let full = self.full_name(name);
        self.store.push(full, self.group, vec![value; n], shape)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(b: &mut Builder, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(Linear {
                weight: b.uniform("weight", &[outputs, inputs], inputs)?,
                bias: b.uniform("bias", &[outputs], inputs)?,
            })
        })
    }

    /// `x` has shape `(batch, inputs)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(self.bias.as_tensor())?)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    pub fn new(
        b: &mut Builder,
        name: &str,
        inputs: usize,
        outputs: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let fan_in = inputs * kernel * kernel;
        b.scoped(name, |b| {
            Ok(Conv2d {
                weight: b.he_uniform("weight", &[outputs, inputs, kernel, kernel], fan_in)?,
                bias: b.uniform("bias", &[outputs], fan_in)?,
                stride,
                padding,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv2d(x, &self.weight, self.padding, self.stride)?;
        let c = self.bias.dim(0)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, c, 1, 1))?)?)
    }
}

/// `x.conv2d(w)` with dilation and groups of 1.
///
/// candle 0.9's tiled CPU kernel treats a contiguous `(B, C, H, W)` input as
/// channels-last whenever `C == H == W`, which silently corrupts the result.
/// Such inputs are split along the channels into two strided views, which the
/// kernel copies correctly.
pub fn conv2d(x: &Tensor, w: &Tensor, padding: usize, stride: usize) -> Result<Tensor> {
    let (_, c, h, wd) = x.dims4()?;
    if c > 1 && c == h && c == wd {
        let half = c / 2;
        let a = x.narrow(1, 0, half)?.conv2d(&w.narrow(1, 0, half)?, padding, stride, 1, 1)?;
        let b = x
            .narrow(1, half, c - half)?
            .conv2d(&w.narrow(1, half, c - half)?, padding, stride, 1, 1)?;
        return Ok((a + b)?);
    }
    Ok(x.conv2d(w, padding, stride, 1, 1)?)
}

/// Transposed convolution with `kernel = 2 * stride`, which exactly
/// multiplies the spatial size by `stride`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose2d {
    pub fn upsample(b: &mut Builder, name: &str, inputs: usize, outputs: usize, stride: usize) -> Result<Self> {
        let kernel = 2 * stride;
        let fan_in = outputs * kernel * kernel;
        b.scoped(name, |b| {
            Ok(ConvTranspose2d {
                weight: b.he_uniform("weight", &[inputs, outputs, kernel, kernel], fan_in)?,
                bias: b.uniform("bias", &[outputs], fan_in)?,
                stride,
                padding: stride / 2,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        // Unpadded then cropped, so the backward convolution never sees an
        // input whose channel count equals its side (see `conv2d`).
        let full = x.conv_transpose2d(&self.weight, 0, 0, self.stride, 1)?;
        let (h, w) = (x.dim(2)? * self.stride, x.dim(3)? * self.stride);
        let y = full.narrow(2, self.padding, h)?.narrow(3, self.padding, w)?;
        let c = self.bias.dim(0)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, c, 1, 1))?)?)
    }
}

pub const PRELU_SLOPE: f64 = 0.25;

/// Parametric ReLU with one slope per channel (dimension 1).
#[derive(Debug, Clone)]
pub struct PRelu {
    pub slope: Var,
}

impl PRelu {
    pub fn new(b: &mut Builder, name: &str, channels: usize) -> Result<Self> {
        b.scoped(name, |b| {
            Ok(PRelu {
                slope: b.constant("slope", &[channels], PRELU_SLOPE)?,
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let c = self.slope.dim(0)?;
        let mut shape = vec![1usize; x.rank()];
        shape[1] = c;
        let slope = self.slope.reshape(shape)?;
        let neg = x.neg()?.relu()?.broadcast_mul(&slope)?;
        Ok((x.relu()? - neg)?)
    }
}

/// Mean over every dimension after the first two: `(B, C, ...) -> (B, C)`.
pub fn global_average(x: &Tensor) -> Result<Tensor> {
    let (b, c) = (x.dim(0)?, x.dim(1)?);
    Ok(x.reshape((b, c, ()))?.mean(D::Minus1)?)
}
