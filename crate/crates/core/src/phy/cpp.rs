use super::qam;

/// Channel uses per pixel: `c_hat * (l_hat + l_prime) / (2 * h * w)`.
///
/// `c_hat` and `l_hat` are real so dataset averages can be passed directly.
pub fn compute_cpp(c_hat: f64, l_hat: f64, l_prime: f64, h: usize, w: usize) -> f64 {
    assert!(h > 0 && w > 0, "image dimensions must be positive");
    c_hat * (l_hat + l_prime) / (2.0 * h as f64 * w as f64)
}

/// Index symbols per activated map, `ceil(L / 6)`, or 0 when nothing was
/// pruned.
pub fn index_overhead(length: usize, pruned: bool) -> usize {
    if pruned {
        qam::symbols_for_bits(length)
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rate() {
        assert!((compute_cpp(8.0, 128.0, 0.0, 32, 32) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn overhead_of_128_bits_is_22() {
        assert_eq!(index_overhead(128, true), 22);
        assert_eq!(index_overhead(128, false), 0);
    }

    #[test]
    fn forced_five_maps_quarter_pruned() {
        let cpp = compute_cpp(5.0, 96.0, 22.0, 32, 32);
        assert!((cpp - 5.0 * 118.0 / 2048.0).abs() < 1e-15);
        assert!((cpp - 0.2881).abs() < 1e-4);
    }

    #[test]
    fn zero_maps_is_zero_rate() {
        assert_eq!(compute_cpp(0.0, 128.0, 22.0, 32, 32), 0.0);
    }
}
