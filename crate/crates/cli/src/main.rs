use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use candle_core::{DType, Device};
use clap::{Args, Parser, Subcommand};
use jscc::checkpoint;
use jscc::config::Config;
use jscc::eval::{
    ablation_run, ablation_to_csv, buckets_to_csv, curves_to_csv, entropy_buckets, evaluate, ingest_subset,
    reports_to_csv, ImageSet,
};
use jscc::model::JsccModel;
use jscc::phy::ber::{simulate_ber, sweep_to_csv};
use jscc::pipeline::PolicyDrive;
use jscc::training::{run_schedule, TrainOptions};

const EVAL_BATCH: usize = 100;

#[derive(Parser)]
#[command(name = "jscc", version, about = "Deep JSCC with entropy-aware adaptive rate control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged training schedule.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a list of SNRs.
    Eval(EvalArgs),
    /// Compare the lowest- and highest-entropy test images.
    EntropyAnalysis(BucketArgs),
    /// Paired reports for a model with and one without the pruning policy.
    Ablation(AblationArgs),
    /// `snr_db,psnr_db,cpp` rows for plotting.
    ExportCurves(EvalArgs),
    /// Monte-Carlo 64-QAM bit error rate over AWGN.
    PhySim(PhyArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file (flat `section.key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// CIFAR-10 binary directory.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Four comma-separated epoch counts.
    #[arg(long, value_delimiter = ',')]
    stage_epochs: Option<Vec<usize>>,
    /// Number of training images to use.
    #[arg(long)]
    limit: Option<usize>,
    /// Checkpoint to continue from; it must mark `start_stage` completed stages.
    #[arg(long, requires = "start_stage")]
    resume: Option<PathBuf>,
    /// First stage to run, 1 to 4.
    #[arg(long)]
    start_stage: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data_dir: PathBuf,
    /// Number of test images to use.
    #[arg(long)]
    limit: Option<usize>,
    /// Seed for the test subset and the channel noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15")]
    snr_list: Vec<f64>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct BucketArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Images per bucket.
    #[arg(long, default_value_t = 100)]
    buckets: usize,
    #[arg(long, default_value_t = 15.0)]
    snr: f64,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct AblationArgs {
    /// Model evaluated with its pruning policy.
    #[arg(long)]
    checkpoint_a: PathBuf,
    /// Model evaluated with pruning disabled.
    #[arg(long)]
    checkpoint_b: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15")]
    snr_list: Vec<f64>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct PhyArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,15")]
    snr_list: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    symbols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<JsccModel> {
    let (model, info) = checkpoint::load(path, &Device::Cpu, DType::F32)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    log::info!("loaded {} ({} completed stages)", path.display(), info.marker.completed_stages);
    Ok(model)
}

fn test_images(args: &DataArgs) -> Result<ImageSet> {
    let data = ingest_subset(&args.data_dir, Some(0), args.limit, args.seed)
        .with_context(|| format!("reading {}", args.data_dir.display()))?;
    Ok(data.test)
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => Config::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        cfg.train.alpha = alpha;
    }
    if let Some(beta) = args.beta {
        cfg.train.beta = beta;
    }
    if let Some(epochs) = &args.stage_epochs {
        cfg.train.stage_epochs = epochs
            .as_slice()
            .try_into()
            .map_err(|_| anyhow::anyhow!("--stage-epochs takes 4 values, got {}", epochs.len()))?;
    }
    if args.limit.is_some() {
        cfg.data.limit = args.limit;
    }
    cfg.validate()?;
    let start_stage = match args.start_stage {
        Some(0) => bail!("stages are numbered from 1"),
        Some(s) => s - 1,
        None => 0,
    };
    let data = ingest_subset(&args.data_dir, cfg.data.limit, Some(0), cfg.train.seed)
        .with_context(|| format!("reading {}", args.data_dir.display()))?;
    log::info!("training on {} images", data.train.len());
    let mut model = JsccModel::new(&cfg, &Device::Cpu, DType::F32)?;
    let opts = TrainOptions {
        out_dir: Some(args.out_dir.clone()),
        resume: args.resume.clone(),
        start_stage,
    };
    let report = run_schedule(&mut model, &data.train, &opts, |e| eprintln!("{}", e.csv_line()))?;
    fs::write(args.out_dir.join("config.toml"), cfg.to_text())?;
    for path in &report.checkpoints {
        println!("{}", path.display());
    }
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => train(args),
        Command::Eval(args) => {
            let model = load_model(&args.checkpoint)?;
            let data = test_images(&args.data)?;
            let reports = evaluate(&model, &data, &args.snr_list, PolicyDrive::Argmax, args.data.seed, EVAL_BATCH)?;
            emit(args.data.out.as_deref(), &reports_to_csv(&reports)?)
        }
        Command::ExportCurves(args) => {
            let model = load_model(&args.checkpoint)?;
            let data = test_images(&args.data)?;
            let reports = evaluate(&model, &data, &args.snr_list, PolicyDrive::Argmax, args.data.seed, EVAL_BATCH)?;
            emit(args.data.out.as_deref(), &curves_to_csv(&reports)?)
        }
        Command::EntropyAnalysis(args) => {
            let model = load_model(&args.checkpoint)?;
            let data = test_images(&args.data)?;
            let report = entropy_buckets(&model, &data, args.buckets, args.snr, args.data.seed, EVAL_BATCH)?;
            emit(args.data.out.as_deref(), &buckets_to_csv(&report)?)
        }
        Command::Ablation(args) => {
            let with_p2 = load_model(&args.checkpoint_a)?;
            let without_p2 = load_model(&args.checkpoint_b)?;
            let data = test_images(&args.data)?;
            let rows = ablation_run(&with_p2, &without_p2, &data, &args.snr_list, args.data.seed, EVAL_BATCH)?;
            emit(args.data.out.as_deref(), &ablation_to_csv(&rows)?)
        }
        Command::PhySim(args) => {
            let points: Vec<_> = args
                .snr_list
                .iter()
                .enumerate()
                .map(|(i, &snr)| simulate_ber(snr, args.symbols, args.seed.wrapping_add(i as u64)))
                .collect();
            emit(args.out.as_deref(), &sweep_to_csv(&points))
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
