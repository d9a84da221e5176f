//! Physical layer: 64-QAM for the pruning index matrix, power normalization,
//! the AWGN channel and channel-usage accounting.

pub mod ber;
mod channel;
mod cpp;
mod frame;
pub mod qam;

pub use channel::{awgn, noise_variance, ChannelConfig, ComplexAwgn};
pub use cpp::{compute_cpp, index_overhead};
pub use frame::{pack_row, power_normalize, unpack_row, SymbolFrame};
pub use qam::{qam64_demodulate, qam64_modulate};
