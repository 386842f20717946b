//! Joint loss, optimizer, learning-rate schedule and the epoch loop.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::{AdamConfig, AdamState};
pub use loss::{joint_loss, LossTerms, LossWeights};
pub use schedule::{LrReading, OneCycleSchedule, ScheduleConfig};
pub use trainer::{evaluate, train, train_with_observer, EpochRecord, TrainConfig, TrainedRun};
