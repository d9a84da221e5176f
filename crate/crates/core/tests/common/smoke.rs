//! Desk-scale training run shared by the acceptance suite.
//!
//! The run is cached under the cargo target directory, keyed by a hash of the
//! recipe, so repeated test runs reuse the trained weights and the log.

#![allow(dead_code)]

use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use candle_core::{DType, Device};
use jscc::checkpoint;
use jscc::config::Config;
use jscc::eval::dataset::{self, Cifar};
use jscc::model::JsccModel;
use jscc::training::{run_schedule, TrainOptions};

pub const TRAIN_IMAGES: usize = 5000;
pub const TEST_POOL: usize = 2000;
pub const SYNTHETIC_SEED: u64 = 2024;
const RECIPE_VERSION: u32 = 2;

/// Where the images come from.
#[derive(Debug, Clone)]
pub enum Source {
    /// A real CIFAR-10 binary directory from `JSCC_CIFAR_DIR`.
    Cifar(PathBuf),
    /// Procedural images written in the CIFAR binary layout.
    Synthetic(PathBuf),
}

impl Source {
    pub fn dir(&self) -> &Path {
        match self {
            Source::Cifar(p) | Source::Synthetic(p) => p,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Source::Cifar(p) => format!("CIFAR-10 at {}", p.display()),
            Source::Synthetic(p) => format!("synthetic CIFAR-format images at {} (CIFAR-10 not found; set JSCC_CIFAR_DIR)", p.display()),
        }
    }
}

pub fn target_dir() -> PathBuf {
    std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target"))
}

pub fn smoke_config() -> Config {
    let mut cfg = Config::default();
    cfg.train.stage_epochs = [10, 10, 5, 5];
    cfg.train.batch_size = 128;
    cfg.train.alpha = 2e-4;
    cfg.train.beta = 1e-5;
    cfg.data.limit = Some(TRAIN_IMAGES);
    cfg
}

pub fn source() -> jscc::Result<Source> {
    if let Some(dir) = std::env::var_os("JSCC_CIFAR_DIR") {
        let dir = PathBuf::from(dir);
        if dataset::batch_dir(&dir).join(dataset::TEST_FILE).exists() {
            return Ok(Source::Cifar(dir));
        }
    }
    let dir = target_dir().join("jscc-smoke").join("synthetic-cifar");
    if !dir.join(dataset::TEST_FILE).exists() {
        dataset::write_synthetic_cifar(&dir, TRAIN_IMAGES, TEST_POOL, SYNTHETIC_SEED)?;
    }
    Ok(Source::Synthetic(dir))
}

pub fn load_data(src: &Source, cfg: &Config) -> jscc::Result<Cifar> {
    dataset::ingest_subset(src.dir(), cfg.data.limit, None, cfg.train.seed)
}

fn cache_key(cfg: &Config, src: &Source) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    RECIPE_VERSION.hash(&mut h);
    cfg.to_text().hash(&mut h);
    match src {
        Source::Cifar(p) => ("cifar", p).hash(&mut h),
        Source::Synthetic(_) => ("synthetic", TRAIN_IMAGES, TEST_POOL, SYNTHETIC_SEED).hash(&mut h),
    }
    format!("{:016x}", h.finish())
}

pub struct SmokeRun {
    pub source: Source,
    pub data: Cifar,
    pub model: JsccModel,
    pub run_dir: PathBuf,
    /// Rows of the training log (header stripped).
    pub log: Vec<String>,
    pub cached: bool,
}

/// Trains (or reuses) the desk-scale model.
pub fn smoke_run() -> jscc::Result<SmokeRun> {
    let cfg = smoke_config();
    let source = source()?;
    let data = load_data(&source, &cfg)?;
    let run_dir = target_dir().join("jscc-smoke").join(cache_key(&cfg, &source));
    let final_ckpt = run_dir.join("stage4.safetensors");
    let cached = final_ckpt.exists();
    if !cached {
        let mut model = JsccModel::new(&cfg, &Device::Cpu, DType::F32)?;
        let opts = TrainOptions {
            out_dir: Some(run_dir.clone()),
            ..Default::default()
        };
        run_schedule(&mut model, &data.train, &opts, |e| eprintln!("smoke {}", e.csv_line()))?;
    }
    let (model, _) = checkpoint::load(&final_ckpt, &Device::Cpu, DType::F32)?;
    let text = std::fs::read_to_string(run_dir.join("train_log.csv"))?;
    let log = text.lines().skip(1).map(str::to_string).collect();
    Ok(SmokeRun {
        source,
        data,
        model,
        run_dir,
        log,
        cached,
    })
}
