use ndarray::{s, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Encoder output for one image: `2C` maps of length `L/2`.
///
/// Rows `2i` and `2i + 1` together form concatenated map `i` of length `L`;
/// because the storage is row-major the concatenated view is a reshape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    z: Array2<f64>,
}

impl FeatureBlock {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        if z.nrows() == 0 || z.nrows() % 2 != 0 || z.ncols() == 0 {
            return Err(Error::domain(format!(
                "feature block must have an even, nonzero number of rows; got {:?}",
                z.dim()
            )));
        }
        Ok(FeatureBlock {
            z: z.as_standard_layout().into_owned(),
        })
    }

    pub fn zeros(maps: usize, half_length: usize) -> Self {
        FeatureBlock {
            z: Array2::zeros((maps, half_length)),
        }
    }

    /// Rebuilds the block from concatenated maps `C x L`.
    pub fn from_concatenated(z_prime: Array2<f64>) -> Result<Self> {
        let (c, l) = z_prime.dim();
        if l % 2 != 0 {
            return Err(Error::domain("concatenated length must be even"));
        }
        let z = z_prime
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((2 * c, l / 2))
            .map_err(|e| Error::domain(e.to_string()))?;
        Self::new(z)
    }

    pub fn z(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.z
    }

    /// Number of encoder maps, 2C.
    pub fn maps(&self) -> usize {
        self.z.nrows()
    }

    /// Number of concatenated maps, C.
    pub fn pairs(&self) -> usize {
        self.z.nrows() / 2
    }

    pub fn half_length(&self) -> usize {
        self.z.ncols()
    }

    /// Concatenated maps, `C x L`.
    pub fn concatenated(&self) -> Array2<f64> {
        self.z
            .clone()
            .into_shape_with_order((self.pairs(), 2 * self.half_length()))
            .expect("standard layout")
    }

    pub fn map(&self, i: usize) -> ArrayView1<'_, f64> {
        self.z.slice(s![i, ..])
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.z.rows().into_iter().map(|r| r.to_vec()).collect()
    }
}
