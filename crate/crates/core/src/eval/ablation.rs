use crate::error::Result;
use crate::model::JsccModel;
use crate::pipeline::PolicyDrive;

use super::dataset::ImageSet;
use super::report::{evaluate, RateReport};

/// One row of a with/without-pruning comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    pub report: RateReport,
}

/// Evaluates `with_p2` as is and `without_p2` with its pruning policy
/// disabled, one pair of rows per SNR.
pub fn ablation_run(
    with_p2: &JsccModel,
    without_p2: &JsccModel,
    data: &ImageSet,
    snr_list: &[f64],
    seed: u64,
    batch_size: usize,
) -> Result<Vec<AblationRow>> {
    let mut disabled = without_p2.clone();
    disabled.config.rate.disable_p2 = true;
    let a = evaluate(with_p2, data, snr_list, PolicyDrive::Argmax, seed, batch_size)?;
    let b = evaluate(&disabled, data, snr_list, PolicyDrive::Argmax, seed, batch_size)?;
    Ok(a.into_iter()
        .zip(b)
        .flat_map(|(a, b)| {
            [
                AblationRow {
                    variant: "with_p2",
                    report: a,
                },
                AblationRow {
                    variant: "without_p2",
                    report: b,
                },
            ]
        })
        .collect())
}

pub fn ablation_to_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "snr_db", "avg_maps", "avg_length_ratio", "cpp", "psnr_db"])?;
    for r in rows {
        w.write_record([
            r.variant.to_string(),
            r.report.snr_db.to_string(),
            r.report.avg_maps.to_string(),
            r.report.avg_length_ratio.to_string(),
            r.report.cpp.to_string(),
            r.report.psnr_db.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}

/// `snr_db,psnr_db,cpp` rows for plotting rate and quality against SNR.
pub fn curves_to_csv(reports: &[RateReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["snr_db", "psnr_db", "cpp"])?;
    for r in reports {
        w.write_record([r.snr_db.to_string(), r.psnr_db.to_string(), r.cpp.to_string()])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8"))
}
