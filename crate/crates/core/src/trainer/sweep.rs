//! Configuration sweeps: head count and the video/audio pooling grid.

use crate::dataio::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::evaluator::PoolingRow;
use crate::model::pool_subjects;
use crate::pooling::PoolingConfig;

use super::config::TrainConfig;
use super::train::{evaluate_model, train};

fn labelled(records: &[SubjectRecord]) -> bool {
    !records.is_empty() && records.iter().all(|r| r.label.is_some())
}

/// Best validation MSE for each head count, other settings from `cfg`.
pub fn head_sweep(ds: &Dataset, cfg: &TrainConfig, head_counts: &[usize]) -> Result<Vec<(usize, f64)>> {
    if head_counts.is_empty() || head_counts.contains(&0) {
        return Err(Error::Config("head sweep needs positive head counts".into()));
    }
    if ds.val.is_empty() {
        return Err(Error::Data("head sweep needs a labelled val split".into()));
    }
    head_counts
        .iter()
        .map(|&h| {
            let cfg = TrainConfig { head_count: h, ..cfg.clone() };
            Ok((h, train(&ds.train, &ds.val, &ds.dims, &cfg)?.report.mean_mse))
        })
        .collect()
}

/// Trains the 2×2 {mean, max} × {video, audio} grid. Test MSE is filled in
/// when the test split is labelled.
pub fn pooling_ablation(ds: &Dataset, cfg: &TrainConfig) -> Result<Vec<PoolingRow>> {
    if ds.val.is_empty() {
        return Err(Error::Data("pooling sweep needs a labelled val split".into()));
    }
    PoolingConfig::grid()
        .into_iter()
        .map(|pooling| {
            let cfg = TrainConfig {
                video_pool: pooling.video,
                audio_pool: pooling.audio,
                ..cfg.clone()
            };
            let outcome = train(&ds.train, &ds.val, &ds.dims, &cfg)?;
            let test_mse = if labelled(&ds.test) {
                let test = pool_subjects(&ds.test, &pooling, &ds.dims)?;
                Some(evaluate_model(&outcome.checkpoint.model, &test, &cfg, "test")?.mean_mse)
            } else {
                None
            };
            Ok(PoolingRow {
                pooling,
                val_mse: outcome.report.mean_mse,
                test_mse,
            })
        })
        .collect()
}
