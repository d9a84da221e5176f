use std::io::Write;

use crate::config::IMAGE_SIDE;
use crate::error::{Error, Result};
use crate::model::JsccModel;
use crate::phy::{compute_cpp, index_overhead};
use crate::pipeline::{transmit_batch, ImageOutcome, PolicyDrive};

use super::dataset::ImageSet;

/// Version of the report CSV layout; bump when [`REPORT_HEADER`] changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const REPORT_HEADER: [&str; 7] = [
    "snr_db",
    "avg_maps",
    "avg_length_ratio",
    "cpp",
    "table_cpp",
    "psnr_db",
    "n_images",
];

/// Aggregate transmission strategy and quality at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub snr_db: f64,
    /// Mean activated map count.
    pub avg_maps: f64,
    /// Mean kept length `L_hat / L`, in percent.
    pub avg_length_ratio: f64,
    /// Mean of the per-image CPP.
    pub cpp: f64,
    /// CPP of the averaged strategy: the CPP formula applied to `avg_maps`
    /// and the mean kept length, with the index overhead counted whenever any
    /// image was pruned.
    pub table_cpp: f64,
    pub psnr_db: f64,
    pub n_images: usize,
}

impl RateReport {
    pub fn from_outcomes(snr_db: f64, outcomes: &[ImageOutcome], length: usize) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptyDataset("no images to aggregate".into()));
        }
        let n = outcomes.len() as f64;
        let avg_maps = outcomes.iter().map(|o| o.c_hat as f64).sum::<f64>() / n;
        let avg_fraction = outcomes.iter().map(|o| o.kept_length as f64 / length as f64).sum::<f64>() / n;
        let any_pruned = outcomes.iter().any(|o| o.index_symbols > 0);
        let table_cpp = compute_cpp(
            avg_maps,
            avg_fraction * length as f64,
            index_overhead(length, any_pruned) as f64,
            IMAGE_SIDE,
            IMAGE_SIDE,
        );
        Ok(RateReport {
            snr_db,
            avg_maps,
            avg_length_ratio: 100.0 * avg_fraction,
            cpp: outcomes.iter().map(|o| o.cpp).sum::<f64>() / n,
            table_cpp,
            psnr_db: outcomes.iter().map(|o| o.psnr_db).sum::<f64>() / n,
            n_images: outcomes.len(),
        })
    }

    fn fields(&self) -> [String; 7] {
        [
            self.snr_db.to_string(),
            self.avg_maps.to_string(),
            self.avg_length_ratio.to_string(),
            self.cpp.to_string(),
            self.table_cpp.to_string(),
            self.psnr_db.to_string(),
            self.n_images.to_string(),
        ]
    }
}

pub fn write_reports<W: Write>(out: W, reports: &[RateReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn reports_to_csv(reports: &[RateReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_reports(&mut buf, reports)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Per-image outcomes at one SNR.
pub fn run_images(
    model: &JsccModel,
    data: &ImageSet,
    snr_db: f64,
    drive: PolicyDrive,
    seed: u64,
    batch_size: usize,
) -> Result<Vec<ImageOutcome>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set is empty".into()));
    }
    let batch_size = batch_size.max(1);
    let mut out = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(batch_size) {
        let x = model.image_tensor(&data.refs(chunk))?;
        let batch = transmit_batch(model, &x, snr_db, drive, seed, chunk[0] as u64)?;
        out.extend(batch.images);
    }
    Ok(out)
}

/// One report per SNR, policies in argmax mode unless `drive` forces them.
pub fn evaluate(
    model: &JsccModel,
    data: &ImageSet,
    snr_list: &[f64],
    drive: PolicyDrive,
    seed: u64,
    batch_size: usize,
) -> Result<Vec<RateReport>> {
    let length = model.config.model.length();
    snr_list
        .iter()
        .map(|&snr| {
            let outcomes = run_images(model, data, snr, drive, seed, batch_size)?;
            RateReport::from_outcomes(snr, &outcomes, length)
        })
        .collect()
}
