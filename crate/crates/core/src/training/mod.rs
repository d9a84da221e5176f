//! Loss and the staged training schedule.

mod loss;
mod schedule;

pub use loss::{batch_loss, compute_loss, LossBreakdown};
pub use schedule::{run_schedule, EpochLog, StagePlan, TrainOptions, TrainReport, TrainSchedule, LOG_HEADER};
