//! Training loop, K-fold cross-validation and checkpoints.

mod checkpoint;
mod config;
mod kfold;
mod sweep;
mod train;

pub use checkpoint::Checkpoint;
pub use config::TrainConfig;
pub use kfold::{kfold_partition, train_kfold, FoldEnsemble, KFoldOutcome};
pub use sweep::{head_sweep, pooling_ablation};
pub use train::{evaluate_model, train, train_observed, train_pooled, EpochRecord, StopReason, TrainOutcome};
