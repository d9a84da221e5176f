use crate::error::{Error, Result};
use crate::model::JsccModel;
use crate::pipeline::{ImageOutcome, PolicyDrive};

use super::dataset::ImageSet;
use super::report::run_images;

/// Shannon entropy in bits of the 256-bin histogram of grayscale intensities
/// (`0.299 R + 0.587 G + 0.114 B`, rounded to 8 bits).
pub fn image_entropy(image: &[f32]) -> f64 {
    let n = image.len() / 3;
    let mut hist = [0usize; 256];
    for i in 0..n {
        let g = 0.299 * image[i] + 0.587 * image[n + i] + 0.114 * image[2 * n + i];
        hist[(g.clamp(0.0, 1.0) * 255.0).round() as usize] += 1;
    }
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStats {
    pub n_images: usize,
    pub mean_image_entropy: f64,
    pub avg_maps: f64,
    /// Mean fraction of each activated map that was pruned.
    pub avg_pruned_fraction: f64,
    pub avg_cpp: f64,
    /// Mean total raw entropy of the activated maps, in bits.
    pub avg_active_entropy: f64,
}

impl BucketStats {
    fn from(entropies: &[f64], outcomes: &[ImageOutcome]) -> Self {
        let n = outcomes.len() as f64;
        let mean = |f: &dyn Fn(&ImageOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
        BucketStats {
            n_images: outcomes.len(),
            mean_image_entropy: entropies.iter().sum::<f64>() / n,
            avg_maps: mean(&|o| o.c_hat as f64),
            avg_pruned_fraction: mean(&|o| o.ratio),
            avg_cpp: mean(&|o| o.cpp),
            avg_active_entropy: mean(&|o| o.active_entropy),
        }
    }
}

/// Statistics of the lowest- and highest-entropy images.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketReport {
    pub snr_db: f64,
    pub low: BucketStats,
    pub high: BucketStats,
}

/// Ranks images by [`image_entropy`] (ties by index) and reports on the
/// `n_per_bucket` lowest and `n_per_bucket` highest.
pub fn entropy_buckets(
    model: &JsccModel,
    data: &ImageSet,
    n_per_bucket: usize,
    snr_db: f64,
    seed: u64,
    batch_size: usize,
) -> Result<BucketReport> {
    if n_per_bucket == 0 || data.len() < 2 * n_per_bucket {
        return Err(Error::EmptyDataset(format!(
            "need at least {} images for two buckets of {n_per_bucket}; have {}",
            2 * n_per_bucket,
            data.len()
        )));
    }
    let scores: Vec<f64> = data.images.iter().map(|im| image_entropy(im)).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let low_idx = &order[..n_per_bucket];
    let high_idx = &order[order.len() - n_per_bucket..];
    let run = |idx: &[usize]| -> Result<BucketStats> {
        let outcomes = run_images(model, &data.select(idx), snr_db, PolicyDrive::Argmax, seed, batch_size)?;
        let e: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        Ok(BucketStats::from(&e, &outcomes))
    };
    Ok(BucketReport {
        snr_db,
        low: run(low_idx)?,
        high: run(high_idx)?,
    })
}

/// One row per bucket.
pub fn buckets_to_csv(report: &BucketReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "bucket",
        "snr_db",
        "n_images",
        "mean_image_entropy",
        "avg_maps",
        "avg_pruned_fraction",
        "avg_cpp",
        "avg_active_entropy",
    ])?;
    for (name, b) in [("low", &report.low), ("high", &report.high)] {
        w.write_record([
            name.to_string(),
            report.snr_db.to_string(),
            b.n_images.to_string(),
            b.mean_image_entropy.to_string(),
            b.avg_maps.to_string(),
            b.avg_pruned_fraction.to_string(),
            b.avg_cpp.to_string(),
            b.avg_active_entropy.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}
