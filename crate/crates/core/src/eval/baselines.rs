//! Published reference numbers, shipped as read-only data.
//!
//! `reference_v1.csv` holds the strategy rows (average map count, kept
//! length ratio, CPP and PSNR) together with the adaptive-rate baseline's
//! CPP and PSNR at the same SNR. `ablation_reference_v1.csv` holds the
//! with/without pruning pairs. The `source` column names the table each row
//! comes from.

use serde::Deserialize;

use crate::error::Result;

pub const REFERENCE_CSV: &str = include_str!("../../data/reference_v1.csv");
pub const ABLATION_REFERENCE_CSV: &str = include_str!("../../data/ablation_reference_v1.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub source: String,
    pub alpha: f64,
    pub snr_db: f64,
    pub avg_maps: f64,
    /// Percent.
    pub length_ratio: f64,
    pub cpp: f64,
    pub psnr_db: f64,
    pub baseline_cpp: f64,
    pub baseline_psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AblationReferenceRow {
    pub source: String,
    pub alpha: f64,
    pub with_p2: bool,
    pub cpp: f64,
    pub psnr_db: f64,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn reference_rows() -> Result<Vec<ReferenceRow>> {
    parse(REFERENCE_CSV)
}

pub fn ablation_reference_rows() -> Result<Vec<AblationReferenceRow>> {
    parse(ABLATION_REFERENCE_CSV)
}
