use ndarray::{Array2, Axis};

use super::mask::ActivationMask;
use crate::codec::FeatureBlock;
use crate::error::{Error, Result};

/// Entries removed from a row of length `length` at ratio `ratio`.
pub fn pruned_count(length: usize, ratio: f64) -> usize {
    (ratio * length as f64).round() as usize
}

/// Flags the `count` entries with the smallest magnitude (lowest index first
/// among equals). Returns one flag per position, 1 = pruned.
pub fn l1_prune_flags(row: &[f64], count: usize) -> Vec<u8> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| {
        row[a]
            .abs()
            .partial_cmp(&row[b].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut flags = vec![0u8; row.len()];
    for &i in order.iter().take(count) {
        flags[i] = 1;
    }
    flags
}

/// Outcome of pruning the activated maps at one ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneRecord {
    /// Kept values, `C-hat x L-hat`, in original order.
    pub z2: Array2<f64>,
    pub ratio: f64,
    /// `C-hat x L`, 1 where a value was removed.
    pub index_matrix: Array2<u8>,
    /// L-hat.
    pub kept_length: usize,
}

impl PruneRecord {
    pub fn length(&self) -> usize {
        self.index_matrix.ncols()
    }

    pub fn pruned_per_row(&self) -> usize {
        self.length() - self.kept_length
    }

    pub fn is_pruned(&self) -> bool {
        self.kept_length < self.length()
    }

    pub fn kept_rows(&self) -> Vec<Vec<f64>> {
        self.z2.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    pub fn index_rows(&self) -> Vec<Vec<u8>> {
        self.index_matrix.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}

/// Removes `round(ratio * L)` smallest-magnitude entries from every row of the
/// activated maps `z1` (`C-hat x L`).
pub fn prune(z1: &Array2<f64>, ratio: f64) -> Result<PruneRecord> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::domain(format!("pruning ratio {ratio} outside [0, 1)")));
    }
    let (rows, length) = z1.dim();
    let count = pruned_count(length, ratio);
    let kept_length = length - count;
    let mut z2 = Array2::zeros((rows, kept_length));
    let mut index_matrix = Array2::zeros((rows, length));
    for (r, row) in z1.axis_iter(Axis(0)).enumerate() {
        let row = row.to_vec();
        let flags = l1_prune_flags(&row, count);
        let mut j = 0;
        for (p, (&v, &f)) in row.iter().zip(&flags).enumerate() {
            index_matrix[[r, p]] = f;
            if f == 0 {
                z2[[r, j]] = v;
                j += 1;
            }
        }
    }
    Ok(PruneRecord {
        z2,
        ratio,
        index_matrix,
        kept_length,
    })
}

fn check_shapes(
    z2_hat: &Array2<f64>,
    index_matrix: &Array2<u8>,
    mask: &ActivationMask,
    half_length: usize,
) -> Result<()> {
    let c_hat = mask.c_hat();
    if z2_hat.nrows() != c_hat || index_matrix.nrows() != c_hat {
        return Err(Error::domain(format!(
            "{c_hat} activated maps but {} received rows and {} index rows",
            z2_hat.nrows(),
            index_matrix.nrows()
        )));
    }
    if index_matrix.ncols() != 2 * half_length {
        return Err(Error::domain("index rows must have length L"));
    }
    if z2_hat.ncols() > index_matrix.ncols() {
        return Err(Error::domain("received rows longer than L"));
    }
    Ok(())
}

fn place(
    rows: impl Iterator<Item = Vec<f64>>,
    mask: &ActivationMask,
    half_length: usize,
) -> Result<FeatureBlock> {
    let length = 2 * half_length;
    let mut z_prime = Array2::zeros((mask.len(), length));
    for (slot, row) in mask.active_indices().into_iter().zip(rows) {
        for (p, v) in row.into_iter().enumerate() {
            z_prime[[slot, p]] = v;
        }
    }
    FeatureBlock::from_concatenated(z_prime)
}

/// Receiver: zero-fills flagged positions, places the maps at their mask
/// slots (others stay zero) and splits pairs back into `2C x L/2`.
pub fn restore(
    z2_hat: &Array2<f64>,
    index_matrix: &Array2<u8>,
    mask: &ActivationMask,
    half_length: usize,
) -> Result<FeatureBlock> {
    check_shapes(z2_hat, index_matrix, mask, half_length)?;
    let expected = index_matrix.ncols() - z2_hat.ncols();
    for (r, row) in index_matrix.axis_iter(Axis(0)).enumerate() {
        let ones = row.iter().filter(|&&b| b == 1).count();
        if ones != expected {
            return Err(Error::Framing(format!(
                "index row {r} flags {ones} positions; expected {expected}"
            )));
        }
    }
    restore_lossy(z2_hat, index_matrix, mask, half_length)
}

/// Like [`restore`], but accepts index rows with the wrong number of flags,
/// as happens after bit errors: received values fill the unflagged
/// positions in order, surplus values are dropped and unfilled positions stay
/// zero.
pub fn restore_lossy(
    z2_hat: &Array2<f64>,
    index_matrix: &Array2<u8>,
    mask: &ActivationMask,
    half_length: usize,
) -> Result<FeatureBlock> {
    check_shapes(z2_hat, index_matrix, mask, half_length)?;
    let rows = z2_hat
        .axis_iter(Axis(0))
        .zip(index_matrix.axis_iter(Axis(0)))
        .map(|(vals, flags)| {
            let mut out = vec![0.0; flags.len()];
            let mut it = vals.iter();
            for (p, &f) in flags.iter().enumerate() {
                if f == 0 {
                    match it.next() {
                        Some(&v) => out[p] = v,
                        None => break,
                    }
                }
            }
            out
        });
    place(rows, mask, half_length)
}

/// For each target position, the source position in the transmitted row
/// (`None` = zero). `sent` and `received` are index rows; transmitted values
/// come from the positions unflagged in `sent`.
pub fn lossy_gather_plan(sent: &[u8], received: &[u8]) -> Vec<Option<usize>> {
    let sources: Vec<usize> = (0..sent.len()).filter(|&p| sent[p] == 0).collect();
    let mut plan = vec![None; received.len()];
    let mut it = sources.into_iter();
    for (p, &f) in received.iter().enumerate() {
        if f == 0 {
            match it.next() {
                Some(s) => plan[p] = Some(s),
                None => break,
            }
        }
    }
    plan
}
