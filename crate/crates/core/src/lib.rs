pub mod checkpoint;
pub mod codec;
pub mod config;
pub mod entropy;
pub mod eval;
mod error;
pub mod nn;
pub mod phy;
pub mod rate;

pub use error::{Error, Result};
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod training;
