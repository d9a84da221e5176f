//! Datasets, evaluation runs and reports.

mod ablation;
pub mod baselines;
mod buckets;
pub mod dataset;
mod report;

pub use crate::metrics::{mse, psnr, psnr_from_mse, PSNR_CAP_DB};
pub use ablation::{ablation_run, ablation_to_csv, curves_to_csv, AblationRow};
pub use buckets::{buckets_to_csv, entropy_buckets, image_entropy, BucketReport, BucketStats};
pub use dataset::{ingest_dataset, ingest_subset, Cifar, ImageSet};
pub use report::{
    evaluate, reports_to_csv, run_images, write_reports, RateReport, REPORT_HEADER, REPORT_SCHEMA_VERSION,
};
