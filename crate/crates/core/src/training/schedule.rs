use std::io::Write;
use std::path::{Path, PathBuf};

use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};

use super::loss::{batch_loss, LossBreakdown};
use crate::checkpoint::{self, StageMarker};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::eval::ImageSet;
use crate::model::JsccModel;
use crate::nn::ParamGroup;
use crate::pipeline::{draw_snrs, train_pass, PolicyDrive};

pub const LOG_HEADER: &str = "epoch,stage,loss_total,loss_mse,loss_rate,loss_entropy,avg_c_hat,avg_ratio";

/// One stage of the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePlan {
    pub epochs: usize,
    pub learning_rate: f64,
    pub frozen: Vec<ParamGroup>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub stages: Vec<StagePlan>,
    pub batch_size: usize,
    pub snr_range: (f64, f64),
}

impl TrainSchedule {
    /// Four stages: everything trains in the first two; the front encoder is
    /// frozen in the third; the back encoder and both policies are frozen in
    /// the fourth while the front encoder trains again.
    pub fn from_config(cfg: &TrainConfig) -> Self {
        let frozen = [
            vec![],
            vec![],
            vec![ParamGroup::EncoderFront],
            vec![
                ParamGroup::EncoderBack,
                ParamGroup::SelectionPolicy,
                ParamGroup::PruningPolicy,
            ],
        ];
        TrainSchedule {
            stages: frozen
                .into_iter()
                .enumerate()
                .map(|(i, frozen)| StagePlan {
                    epochs: cfg.stage_epochs[i],
                    learning_rate: cfg.learning_rates[i],
                    frozen,
                })
                .collect(),
            batch_size: cfg.batch_size,
            snr_range: (cfg.snr_min, cfg.snr_max),
        }
    }
}

/// Averages over one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based, counted across stages.
    pub epoch: usize,
    /// 1-based.
    pub stage: usize,
    pub loss: LossBreakdown,
    pub avg_c_hat: f64,
    pub avg_ratio: f64,
}

impl EpochLog {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.stage,
            self.loss.total,
            self.loss.mse,
            self.loss.rate_term,
            self.loss.entropy_term,
            self.avg_c_hat,
            self.avg_ratio
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where the log and checkpoints go; nothing is written when unset.
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to continue from. Its marker must say exactly
    /// `start_stage` stages are complete.
    pub resume: Option<PathBuf>,
    /// Index of the first stage to run (0-based).
    pub start_stage: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub checkpoints: Vec<PathBuf>,
}

fn trainable(model: &JsccModel, frozen: &[ParamGroup]) -> Vec<candle_core::Var> {
    let groups: Vec<ParamGroup> = ParamGroup::ALL.into_iter().filter(|g| !frozen.contains(g)).collect();
    model.store.vars_in(&groups)
}

fn save_checkpoint(
    model: &JsccModel,
    dir: &Path,
    name: String,
    marker: StageMarker,
    report: &mut TrainReport,
) -> Result<()> {
    let path = dir.join(name);
    checkpoint::save(model, &path, marker)?;
    report.checkpoints.push(path);
    Ok(())
}

/// Runs the schedule from `opts.start_stage` on, calling `on_epoch` after
/// every epoch.
pub fn run_schedule(
    model: &mut JsccModel,
    data: &ImageSet,
    opts: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport> {
    let cfg = model.config.train.clone();
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset("training set is empty".into()));
    }
    let schedule = TrainSchedule::from_config(&cfg);
    if opts.start_stage > schedule.stages.len() {
        return Err(Error::config("start stage beyond the schedule"));
    }
    if let Some(path) = &opts.resume {
        let info = checkpoint::load_into(model, path)?;
        if info.marker != StageMarker::at_boundary(opts.start_stage) {
            return Err(Error::Checkpoint(format!(
                "checkpoint marks {} completed stages (+{} epochs); resuming at stage {} needs {} completed",
                info.marker.completed_stages,
                info.marker.stage_epoch,
                opts.start_stage + 1,
                opts.start_stage
            )));
        }
    } else if opts.start_stage != 0 {
        return Err(Error::Checkpoint("a later start stage needs a checkpoint to resume from".into()));
    }

    let mut log = match &opts.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("train_log.csv"))?;
            writeln!(f, "{LOG_HEADER}")?;
            Some(f)
        }
        None => None,
    };

    let mut report = TrainReport::default();
    let mut epoch_counter: usize = schedule.stages[..opts.start_stage].iter().map(|s| s.epochs).sum();
    let (lo, hi) = schedule.snr_range;
    for (s, stage) in schedule.stages.iter().enumerate().skip(opts.start_stage) {
        let vars = trainable(model, &stage.frozen);
        let mut opt = AdamW::new(
            vars,
            ParamsAdamW {
                lr: stage.learning_rate,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
        )?;
        for e in 0..stage.epochs {
            epoch_counter += 1;
            let mut rng = StdRng::seed_from_u64(cfg.seed ^ (epoch_counter as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            let snrs = draw_snrs(&mut rng, data.len(), lo, hi);
            let mut parts = Vec::new();
            let mut weights = Vec::new();
            let (mut c_sum, mut a_sum) = (0.0, 0.0);
            for chunk in order.chunks(schedule.batch_size) {
                let x = model.image_tensor(&data.refs(chunk))?;
                let batch_snr: Vec<f64> = chunk.iter().map(|&i| snrs[i]).collect();
                let pass = train_pass(model, &x, &batch_snr, PolicyDrive::Sample, rng.next_u64())?;
                let (loss, parts_b) = batch_loss(&pass, &x, cfg.alpha, cfg.beta)?;
                opt.backward_step(&loss)?;
                c_sum += pass.c_hat.iter().sum::<usize>() as f64;
                a_sum += pass.ratios.iter().sum::<f64>();
                parts.push(parts_b);
                weights.push(chunk.len());
            }
            // Batches of unequal size are weighted by their image count.
            let expanded: Vec<LossBreakdown> = parts
                .iter()
                .zip(&weights)
                .flat_map(|(p, &w)| std::iter::repeat_n(*p, w))
                .collect();
            let entry = EpochLog {
                epoch: epoch_counter,
                stage: s + 1,
                loss: LossBreakdown::mean(&expanded),
                avg_c_hat: c_sum / data.len() as f64,
                avg_ratio: a_sum / data.len() as f64,
            };
            log::info!("{}", entry.csv_line());
            if let Some(f) = log.as_mut() {
                writeln!(f, "{}", entry.csv_line())?;
                f.flush()?;
            }
            on_epoch(&entry);
            report.epochs.push(entry);
            if let Some(dir) = &opts.out_dir {
                let last = e + 1 == stage.epochs;
                if cfg.checkpoint_every > 0 && epoch_counter % cfg.checkpoint_every == 0 && !last {
                    save_checkpoint(
                        model,
                        dir,
                        format!("epoch{epoch_counter:04}.safetensors"),
                        StageMarker {
                            completed_stages: s,
                            stage_epoch: e + 1,
                        },
                        &mut report,
                    )?;
                }
            }
        }
        if let Some(dir) = &opts.out_dir {
            save_checkpoint(
                model,
                dir,
                format!("stage{}.safetensors", s + 1),
                StageMarker::at_boundary(s + 1),
                &mut report,
            )?;
        }
    }
    Ok(report)
}
