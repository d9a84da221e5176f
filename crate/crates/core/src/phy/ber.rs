//! Bit error rate references and Monte-Carlo measurement for 64-QAM.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use statrs::function::erf::erfc;

use super::channel::ComplexAwgn;
use super::qam;

const M: f64 = 64.0;
const BITS: f64 = 6.0;

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Nearest-neighbour approximation of Gray-coded 64-QAM BER at a per-symbol
/// SNR of `snr_db` (unit symbol energy, noise variance `10^(-snr/10)`).
pub fn ber_nearest_neighbor(snr_db: f64) -> f64 {
    let ebn0 = 10f64.powf(snr_db / 10.0) / BITS;
    (4.0 / BITS) * (1.0 - 1.0 / M.sqrt()) * q_function((3.0 * BITS / (M - 1.0) * ebn0).sqrt())
}

/// Exact BER of Gray-coded square 64-QAM, summed over every decision
/// boundary of each bit position.
pub fn ber_exact(snr_db: f64) -> f64 {
    let side = M.sqrt() as usize;
    let levels_bits = (side as f64).log2() as u32;
    let ebn0 = 10f64.powf(snr_db / 10.0) / BITS;
    let arg = (3.0 * BITS * ebn0 / (2.0 * (M - 1.0))).sqrt();
    let mut total = 0.0;
    for k in 1..=levels_bits {
        let half = 1usize << (k - 1);
        let terms = ((1.0 - 2f64.powi(-(k as i32))) * side as f64) as usize;
        let mut pk = 0.0;
        for i in 0..terms {
            let t = (i * half) as f64 / side as f64;
            let sign = if (t.floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
            let weight = half as f64 - (t + 0.5).floor();
            pk += sign * weight * erfc((2 * i + 1) as f64 * arg);
        }
        total += pk / side as f64;
    }
    total / levels_bits as f64
}

/// One row of a Monte-Carlo sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub empirical_noise_power: f64,
}

/// Sends `symbols` random 64-QAM symbols through AWGN and counts bit errors.
pub fn simulate_ber(snr_db: f64, symbols: usize, seed: u64) -> BerPoint {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = ComplexAwgn::new(snr_db);
    let mut errors = 0u64;
    let mut noise_energy = 0.0;
    let mut bits = [0u8; 6];
    for _ in 0..symbols {
        for b in bits.iter_mut() {
            *b = rng.random_range(0..2u8);
        }
        let s = qam::qam64_modulate(&bits).expect("binary")[0];
        let n = noise.sample(&mut rng);
        noise_energy += n.norm_sqr();
        let decoded = qam::qam64_demodulate(&[s + n], 6).expect("finite");
        errors += bits.iter().zip(&decoded).filter(|(a, b)| a != b).count() as u64;
    }
    BerPoint {
        snr_db,
        ber: errors as f64 / (symbols as f64 * BITS),
        empirical_noise_power: if symbols == 0 {
            0.0
        } else {
            noise_energy / symbols as f64
        },
    }
}

/// `snr_db,ber,empirical_noise_power` rows.
pub fn sweep_to_csv(points: &[BerPoint]) -> String {
    let mut out = String::from("snr_db,ber,empirical_noise_power\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.snr_db, p.ber, p.empirical_noise_power));
    }
    out
}
