//! Gray-coded square 64-QAM.
//!
//! Six bits make one symbol: the first three select the in-phase level and the
//! last three the quadrature level, most significant bit first. Each axis uses
//! the eight levels `{-7, -5, ..., 7} / sqrt(42)`, which gives the
//! constellation unit average energy.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const BITS_PER_SYMBOL: usize = 6;
const BITS_PER_AXIS: usize = 3;

/// Gray code of each amplitude level, ordered from -7 to +7.
const LEVEL_GRAY: [u8; 8] = [0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];

fn scale() -> f64 {
    42f64.sqrt().recip()
}

/// Amplitude of level index `i` (0 => -7, 7 => +7), unnormalized.
fn level_amplitude(i: usize) -> f64 {
    2.0 * i as f64 - 7.0
}

fn gray_to_level(gray: u8) -> usize {
    LEVEL_GRAY
        .iter()
        .position(|&g| g == gray)
        .expect("every 3-bit value is a Gray code")
}

/// Number of symbols needed for `bit_len` bits.
pub fn symbols_for_bits(bit_len: usize) -> usize {
    bit_len.div_ceil(BITS_PER_SYMBOL)
}

/// Maps 3 bits to a normalized axis amplitude.
pub fn axis_amplitude(bits: [u8; 3]) -> f64 {
    let gray = (bits[0] << 2) | (bits[1] << 1) | bits[2];
    level_amplitude(gray_to_level(gray)) * scale()
}

/// Hard decision on one axis. Exact ties go to the smaller magnitude, then to
/// the smaller Gray code.
fn detect_axis(x: f64) -> u8 {
    let s = scale();
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for i in 0..8 {
        let a = level_amplitude(i);
        let d = (x - a * s).abs();
        let better = d < best_d
            || (d == best_d
                && (a.abs() < level_amplitude(best).abs()
                    || (a.abs() == level_amplitude(best).abs() && LEVEL_GRAY[i] < LEVEL_GRAY[best])));
        if better {
            best = i;
            best_d = d;
        }
    }
    LEVEL_GRAY[best]
}

/// Modulates a bit vector; the last group is zero-padded to six bits.
pub fn qam64_modulate(bits: &[u8]) -> Result<Vec<Complex64>> {
    if let Some(pos) = bits.iter().position(|&b| b > 1) {
        return Err(Error::domain(format!(
            "bit {pos} has value {}; expected 0 or 1",
            bits[pos]
        )));
    }
    Ok(bits
        .chunks(BITS_PER_SYMBOL)
        .map(|chunk| {
            let mut g = [0u8; BITS_PER_SYMBOL];
            g[..chunk.len()].copy_from_slice(chunk);
            Complex64::new(
                axis_amplitude([g[0], g[1], g[2]]),
                axis_amplitude([g[3], g[4], g[5]]),
            )
        })
        .collect())
}

/// Nearest-point detection followed by inverse Gray mapping. Returns exactly
/// `bit_len` bits, dropping the pad.
pub fn qam64_demodulate(symbols: &[Complex64], bit_len: usize) -> Result<Vec<u8>> {
    if symbols.len() * BITS_PER_SYMBOL < bit_len {
        return Err(Error::domain(format!(
            "{} symbols cannot carry {bit_len} bits",
            symbols.len()
        )));
    }
    if symbols.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(Error::domain("non-finite symbol"));
    }
    let mut bits = Vec::with_capacity(symbols.len() * BITS_PER_SYMBOL);
    for s in symbols {
        for gray in [detect_axis(s.re), detect_axis(s.im)] {
            for k in (0..BITS_PER_AXIS).rev() {
                bits.push((gray >> k) & 1);
            }
        }
    }
    bits.truncate(bit_len);
    Ok(bits)
}

/// All 64 constellation points indexed by their 6-bit pattern.
pub fn constellation() -> Vec<Complex64> {
    (0..64u8)
        .map(|v| {
            let bits: Vec<u8> = (0..6).rev().map(|k| (v >> k) & 1).collect();
            qam64_modulate(&bits).expect("binary input")[0]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(v: u8) -> Vec<u8> {
        (0..6).rev().map(|k| (v >> k) & 1).collect()
    }

    #[test]
    fn all_zero_group_is_corner_point() {
        let s = qam64_modulate(&[0; 6]).unwrap();
        let expect = Complex64::new(-7.0, -7.0) / 42f64.sqrt();
        assert!((s[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn gray_table_matches() {
        let table = [
            ([0, 0, 0], -7.0),
            ([0, 0, 1], -5.0),
            ([0, 1, 1], -3.0),
            ([0, 1, 0], -1.0),
            ([1, 1, 0], 1.0),
            ([1, 1, 1], 3.0),
            ([1, 0, 1], 5.0),
            ([1, 0, 0], 7.0),
        ];
        for (bits, level) in table {
            assert!((axis_amplitude(bits) - level / 42f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_average_energy() {
        let e: f64 = constellation().iter().map(|s| s.norm_sqr()).sum::<f64>() / 64.0;
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_round_trip_and_bijection() {
        let points = constellation();
        for v in 0..64u8 {
            let bits = pattern(v);
            let s = qam64_modulate(&bits).unwrap();
            assert_eq!(qam64_demodulate(&s, 6).unwrap(), bits);
            for w in 0..v {
                assert!((points[v as usize] - points[w as usize]).norm() > 0.1);
            }
        }
    }

    #[test]
    fn neighbours_differ_in_one_bit_per_axis() {
        for i in 0..7 {
            let d = LEVEL_GRAY[i] ^ LEVEL_GRAY[i + 1];
            assert_eq!(d.count_ones(), 1, "levels {i} and {}", i + 1);
        }
    }

    #[test]
    fn padded_frame_of_128_bits() {
        let bits: Vec<u8> = (0..128).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let s = qam64_modulate(&bits).unwrap();
        assert_eq!(s.len(), 22);
        assert_eq!(symbols_for_bits(128), 22);
        assert_eq!(qam64_demodulate(&s, 128).unwrap(), bits);
        // 4 pad bits sit in the low bits of the last quadrature group.
        let last = qam64_demodulate(&s[21..], 6).unwrap();
        assert_eq!(&last[2..], &[0, 0, 0, 0]);
    }

    #[test]
    fn small_perturbation_keeps_decision() {
        let s = qam64_modulate(&[0; 6]).unwrap()[0] + Complex64::new(1e-6, -1e-6);
        assert_eq!(qam64_demodulate(&[s], 6).unwrap(), vec![0; 6]);
    }

    #[test]
    fn exact_ties_follow_rule() {
        // Midway between -1 and +1: equal magnitude, smaller Gray code (010) wins.
        assert_eq!(detect_axis(0.0), 0b010);
        // Far outside the grid still maps to the corner.
        assert_eq!(detect_axis(100.0), 0b100);
        assert_eq!(detect_axis(-100.0), 0b000);
    }

    #[test]
    fn rejects_non_binary() {
        assert!(qam64_modulate(&[0, 1, 2]).is_err());
        assert!(qam64_demodulate(&[Complex64::new(f64::NAN, 0.0)], 6).is_err());
        assert!(qam64_demodulate(&[Complex64::new(0.0, 0.0)], 7).is_err());
    }
}
