//! CIFAR-10 binary batches.
//!
//! Each record is 3073 bytes: a label byte followed by 1024 red, 1024 green
//! and 1024 blue values, rows top to bottom. Pixels are scaled to `[0, 1]`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::model::IMAGE_LEN;

pub const RECORD_LEN: usize = IMAGE_LEN + 1;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";
const LABELS: u8 = 10;

/// Images stored as flat `3 x 32 x 32` vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageSet {
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.images[i]
    }

    pub fn push(&mut self, image: Vec<f32>, label: u8) {
        self.images.push(image);
        self.labels.push(label);
    }

    pub fn extend(&mut self, other: ImageSet) {
        self.images.extend(other.images);
        self.labels.extend(other.labels);
    }

    /// `limit` images chosen by `seed`, kept in their original order. A limit
    /// at or above the size returns everything.
    pub fn subset(&self, limit: usize, seed: u64) -> ImageSet {
        if limit >= self.len() {
            return self.clone();
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, self.len(), limit).into_vec();
        idx.sort_unstable();
        self.select(&idx)
    }

    pub fn select(&self, indices: &[usize]) -> ImageSet {
        ImageSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn refs(&self, indices: &[usize]) -> Vec<&[f32]> {
        indices.iter().map(|&i| self.images[i].as_slice()).collect()
    }
}

/// Train and test splits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cifar {
    pub train: ImageSet,
    pub test: ImageSet,
}

fn ingest_err(path: &Path, offset: u64, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

/// Parses one batch file.
pub fn read_batch(path: impl AsRef<Path>) -> Result<ImageSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ingest_err(path, 0, e.to_string()))?;
    parse_batch(path, &bytes)
}

fn parse_batch(path: &Path, bytes: &[u8]) -> Result<ImageSet> {
    if bytes.is_empty() {
        return Err(ingest_err(path, 0, "file is empty"));
    }
    let whole = bytes.len() / RECORD_LEN * RECORD_LEN;
    if whole != bytes.len() {
        return Err(ingest_err(
            path,
            whole as u64,
            format!("truncated record: {} trailing bytes", bytes.len() - whole),
        ));
    }
    let mut set = ImageSet::default();
    for (r, rec) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let label = rec[0];
        if label >= LABELS {
            return Err(ingest_err(path, (r * RECORD_LEN) as u64, format!("label {label} is not in 0..10")));
        }
        set.push(rec[1..].iter().map(|&p| p as f32 / 255.0).collect(), label);
    }
    Ok(set)
}

/// Writes images in the binary batch layout; pixels are rounded to bytes.
pub fn write_batch(path: impl AsRef<Path>, set: &ImageSet) -> Result<()> {
    let mut out = Vec::with_capacity(set.len() * RECORD_LEN);
    for (img, &label) in set.images.iter().zip(&set.labels) {
        out.push(label);
        out.extend(img.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// The directory holding the batch files: `dir` itself or the
/// `cifar-10-batches-bin` folder inside it.
pub fn batch_dir(dir: impl AsRef<Path>) -> PathBuf {
    let dir = dir.as_ref();
    let nested = dir.join("cifar-10-batches-bin");
    if !dir.join(TEST_FILE).exists() && nested.join(TEST_FILE).exists() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// Reads all train batches and the test batch.
pub fn ingest_dataset(dir: impl AsRef<Path>) -> Result<Cifar> {
    let dir = batch_dir(dir);
    let mut train = ImageSet::default();
    for name in TRAIN_FILES {
        train.extend(read_batch(dir.join(name))?);
    }
    let test = read_batch(dir.join(TEST_FILE))?;
    Ok(Cifar { train, test })
}

/// Like [`ingest_dataset`], then keeps seeded subsets of each split.
pub fn ingest_subset(dir: impl AsRef<Path>, limit: Option<usize>, test_limit: Option<usize>, seed: u64) -> Result<Cifar> {
    let mut data = ingest_dataset(dir)?;
    if let Some(n) = limit {
        data.train = data.train.subset(n, seed);
    }
    if let Some(n) = test_limit {
        data.test = data.test.subset(n, seed ^ 0x5eed);
    }
    Ok(data)
}

/// One procedurally generated `32 x 32` RGB image. `kind` (0..10) picks the
/// family; the families range from flat colour to fine texture, so their
/// pixel entropy varies widely.
pub fn synthetic_image<R: Rng + ?Sized>(rng: &mut R, kind: u8) -> Vec<f32> {
    const S: usize = 32;
    let base: [f32; 3] = [rng.random(), rng.random(), rng.random()];
    let other: [f32; 3] = [rng.random(), rng.random(), rng.random()];
    let fx: f32 = rng.random_range(0.05..0.6);
    let fy: f32 = rng.random_range(0.05..0.6);
    let phase: f32 = rng.random_range(0.0..6.28);
    let cx: f32 = rng.random_range(6.0..26.0);
    let cy: f32 = rng.random_range(6.0..26.0);
    let radius: f32 = rng.random_range(4.0..12.0);
    let noise_amp: f32 = match kind {
        0..=2 => 0.0,
        3..=5 => 0.05,
        6..=7 => 0.15,
        _ => 0.35,
    };
    let mut img = vec![0f32; IMAGE_LEN];
    for y in 0..S {
        for x in 0..S {
            let (xf, yf) = (x as f32, y as f32);
            let t: f32 = match kind {
                0 => 0.0,
                1 => xf / (S - 1) as f32,
                2 | 3 => {
                    if ((xf - cx).powi(2) + (yf - cy).powi(2)).sqrt() < radius {
                        1.0
                    } else {
                        0.0
                    }
                }
                4 | 5 => 0.5 + 0.5 * (fx * xf + phase).sin(),
                6 => 0.5 + 0.5 * (fx * xf + fy * yf + phase).sin(),
                7 => {
                    let cell = 2 + (fx * 10.0) as usize;
                    (((x / cell) + (y / cell)) % 2) as f32
                }
                8 => 0.5 + 0.25 * ((fx * xf).sin() + (fy * yf * 1.7).cos()),
                _ => 0.5,
            };
            for ch in 0..3 {
                let mut v = base[ch] * (1.0 - t) + other[ch] * t;
                if noise_amp > 0.0 {
                    v += noise_amp * (rng.random::<f32>() - 0.5) * 2.0;
                }
                img[ch * S * S + y * S + x] = v.clamp(0.0, 1.0);
            }
        }
    }
    img
}

/// Writes a CIFAR-format directory of synthetic images: `train` images spread
/// over the five train batches and `test` images in the test batch.
pub fn write_synthetic_cifar(dir: impl AsRef<Path>, train: usize, test: usize, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut make = |n: usize| {
        let mut set = ImageSet::default();
        for _ in 0..n {
            let kind = rng.random_range(0..LABELS);
            set.push(synthetic_image(&mut rng, kind), kind);
        }
        set
    };
    let per = train.div_ceil(TRAIN_FILES.len());
    let mut left = train;
    for name in TRAIN_FILES {
        let n = per.min(left);
        left -= n;
        let set = make(n);
        if set.is_empty() {
            std::fs::write(dir.join(name), [])?;
        } else {
            write_batch(dir.join(name), &set)?;
        }
    }
    write_batch(dir.join(TEST_FILE), &make(test))?;
    Ok(())
}
