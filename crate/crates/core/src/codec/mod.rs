//! Semantic encoder and decoder networks.

mod decoder;
mod encoder;
mod feature;
mod snr_adapt;

pub use decoder::Decoder;
pub use encoder::{BackEncoder, FrontEncoder, ResBlock};
pub use feature::FeatureBlock;
pub use snr_adapt::SnrAdapt;
