//! The full transceiver: encoder halves, decoder and both policies over one
//! parameter store.

use candle_core::{DType, Device, Tensor};

use crate::codec::{BackEncoder, Decoder, FrontEncoder};
use crate::config::{Config, IMAGE_CHANNELS, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::nn::{Builder, Init, ParamGroup, ParamStore};
use crate::rate::{PruningPolicy, SelectionPolicy};

/// Values per image (`3 * 32 * 32`).
pub const IMAGE_LEN: usize = IMAGE_CHANNELS * IMAGE_SIDE * IMAGE_SIDE;

#[derive(Debug, Clone)]
pub struct JsccModel {
    pub config: Config,
    pub store: ParamStore,
    pub s1: FrontEncoder,
    pub s2: BackEncoder,
    pub decoder: Decoder,
    pub p1: SelectionPolicy,
    pub p2: PruningPolicy,
}

impl JsccModel {
    /// Fresh weights from `config.model.seed`.
    pub fn new(config: &Config, device: &Device, dtype: DType) -> Result<Self> {
        Self::with_init(config, device, dtype, Init::Random { seed: config.model.seed })
    }

    pub fn with_init(config: &Config, device: &Device, dtype: DType, init: Init) -> Result<Self> {
        config.validate()?;
        let m = &config.model;
        let mut store = ParamStore::new(device.clone(), dtype);
        let s1 = FrontEncoder::new(&mut Builder::new(&mut store, ParamGroup::EncoderFront, init), m)?;
        let s2 = BackEncoder::new(&mut Builder::new(&mut store, ParamGroup::EncoderBack, init), m)?;
        let decoder = Decoder::new(&mut Builder::new(&mut store, ParamGroup::Decoder, init), m)?;
        let p1 = SelectionPolicy::new(&mut Builder::new(&mut store, ParamGroup::SelectionPolicy, init), m)?;
        let p2 = PruningPolicy::new(
            &mut Builder::new(&mut store, ParamGroup::PruningPolicy, init),
            m,
            config.rate.prune_ratios.len(),
        )?;
        Ok(JsccModel {
            config: config.clone(),
            store,
            s1,
            s2,
            decoder,
            p1,
            p2,
        })
    }

    pub fn device(&self) -> &Device {
        self.store.device()
    }

    pub fn dtype(&self) -> DType {
        self.store.dtype()
    }

    /// Column of SNR values, `(B, 1)`.
    pub fn snr_tensor(&self, snr_db: &[f64]) -> Result<Tensor> {
        if snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("snr_db must be finite"));
        }
        Ok(Tensor::from_slice(snr_db, (snr_db.len(), 1), self.device())?.to_dtype(self.dtype())?)
    }

    /// Stacks flat `3 x 32 x 32` images into `(B, 3, 32, 32)`.
    pub fn image_tensor(&self, images: &[&[f32]]) -> Result<Tensor> {
        let mut flat = Vec::with_capacity(images.len() * IMAGE_LEN);
        for (i, img) in images.iter().enumerate() {
            if img.len() != IMAGE_LEN {
                return Err(Error::domain(format!(
                    "image {i} has {} values; expected {IMAGE_LEN}",
                    img.len()
                )));
            }
            flat.extend_from_slice(img);
        }
        Ok(Tensor::from_vec(flat, (images.len(), IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE), self.device())?
            .to_dtype(self.dtype())?)
    }

    fn warn_out_of_range(&self, snr_db: &[f64]) {
        let (lo, hi) = (self.config.train.snr_min, self.config.train.snr_max);
        if let Some(s) = snr_db.iter().find(|&&s| s < lo || s > hi) {
            log::warn!("SNR {s} dB is outside the training range [{lo}, {hi}] dB; extrapolating");
        }
    }

    pub fn encode_s1(&self, images: &Tensor) -> Result<Tensor> {
        self.s1.forward(images)
    }

    /// `(B, channels, 8, 8)` to `z` of shape `(B, 2C, L/2)`.
    pub fn encode_s2(&self, features: &Tensor, snr_db: &[f64]) -> Result<Tensor> {
        self.warn_out_of_range(snr_db);
        self.s2.forward(features, &self.snr_tensor(snr_db)?)
    }

    pub fn encode(&self, images: &Tensor, snr_db: &[f64]) -> Result<Tensor> {
        self.encode_s2(&self.encode_s1(images)?, snr_db)
    }

    pub fn decode(&self, z_hat: &Tensor, snr_db: &[f64]) -> Result<Tensor> {
        self.decoder.forward(z_hat, &self.snr_tensor(snr_db)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(init: Init) -> JsccModel {
        JsccModel::with_init(&Config::default(), &Device::Cpu, DType::F32, init).unwrap()
    }

    fn images(n: usize, seed: u32) -> Vec<Vec<f32>> {
        (0..n)
            .map(|k| {
                (0..IMAGE_LEN)
                    .map(|i| (((i as u32).wrapping_mul(2654435761) ^ (seed + k as u32)) % 256) as f32 / 255.0)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn shape_pipeline() {
        let m = model(Init::Random { seed: 1 });
        let imgs = images(2, 0);
        let refs: Vec<&[f32]> = imgs.iter().map(|v| v.as_slice()).collect();
        let x = m.image_tensor(&refs).unwrap();
        let f = m.encode_s1(&x).unwrap();
        assert_eq!(f.dims(), &[2, 64, 8, 8]);
        let z = m.encode_s2(&f, &[0.0, 15.0]).unwrap();
        assert_eq!(z.dims(), &[2, 16, 64]);
        assert_eq!(z.reshape((2, 8, 128)).unwrap().dims(), &[2, 8, 128]);
        let y = m.decode(&z, &[0.0, 15.0]).unwrap();
        assert_eq!(y.dims(), &[2, 3, 32, 32]);
        let v = y.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn zero_weights_zero_image_zero_features() {
        let m = model(Init::Zeros);
        let x = Tensor::zeros((1, 3, 32, 32), DType::F32, &Device::Cpu).unwrap();
        let f = m.encode_s1(&x).unwrap();
        assert_eq!(f.abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap(), 0.0);
    }

    #[test]
    fn deterministic_and_snr_conditioned() {
        let m = model(Init::Random { seed: 5 });
        let imgs = images(1, 3);
        let x = m.image_tensor(&[imgs[0].as_slice()]).unwrap();
        let a = m.encode(&x, &[0.0]).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = m.encode(&x, &[0.0]).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let c = m.encode(&x, &[15.0]).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_features_decode_cleanly() {
        let m = model(Init::Random { seed: 2 });
        let z = Tensor::zeros((1, 16, 64), DType::F32, &Device::Cpu).unwrap();
        let y = m.decode(&z, &[5.0]).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(y.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));
    }

    #[test]
    fn rejects_bad_shapes() {
        let m = model(Init::Random { seed: 2 });
        let x = Tensor::zeros((1, 3, 16, 16), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(m.encode_s1(&x), Err(Error::InputDomain(_))));
        let z = Tensor::zeros((1, 8, 128), DType::F32, &Device::Cpu).unwrap();
        assert!(matches!(m.decode(&z, &[1.0]), Err(Error::InputDomain(_))));
        assert!(m.image_tensor(&[&[0.0f32; 10]]).is_err());
    }
}
