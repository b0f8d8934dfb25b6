use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::train::{train_pooled, TrainOutcome};
use crate::ensemble::{mean_scores, ScoreVector};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, RunReport};
use crate::model::{Model, PooledSubject};
use crate::numkernel::Rng;
use crate::pooling::ModalityDims;

const TAG_FOLDS: u64 = 0x4_0000;

/// Seeded partition of `0..n` into `k` disjoint folds whose sizes differ by
/// at most one. Each fold is sorted ascending.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k_folds = {k} but K-fold needs at least 2")));
    }
    if k > n {
        return Err(Error::Config(format!("k_folds = {k} exceeds the pool of {n} subjects")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).derive(&[TAG_FOLDS]).shuffle(&mut order);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (i, idx) in order.into_iter().enumerate() {
        folds[i % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Late ensemble of fold models: the mean of their subject predictions.
#[derive(Debug, Clone)]
pub struct FoldEnsemble {
    pub models: Vec<Model>,
    pub batch_size: usize,
    pub clamp: bool,
}

impl FoldEnsemble {
    pub fn from_checkpoints(checkpoints: &[Checkpoint], cfg: &TrainConfig) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(Error::Data("fold ensemble needs at least one model".into()));
        }
        Ok(FoldEnsemble {
            models: checkpoints.iter().map(|c| c.model.clone()).collect(),
            batch_size: cfg.batch_size,
            clamp: cfg.clamp_at_inference,
        })
    }

    /// Averages raw fold predictions, then clamps if configured.
    pub fn predict(&self, subjects: &[PooledSubject]) -> Result<Vec<ScoreVector>> {
        let per_model = self
            .models
            .iter()
            .map(|m| m.predict(subjects, self.batch_size, false))
            .collect::<Result<Vec<_>>>()?;
        (0..subjects.len())
            .map(|i| {
                let column: Vec<ScoreVector> = per_model.iter().map(|p| p[i]).collect();
                let m = mean_scores(&column)?;
                Ok(if self.clamp { m.clamped() } else { m })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KFoldOutcome {
    pub folds: Vec<TrainOutcome>,
    /// Subject ids held out by each fold.
    pub assignments: Vec<Vec<String>>,
    /// Each subject predicted by the model that did not train on it.
    pub out_of_fold: RunReport,
    pub ensemble: FoldEnsemble,
}

/// Trains one model per fold from the same initialisation, each validating
/// on its held-out fold.
pub fn train_kfold(pool: &[PooledSubject], dims: &ModalityDims, cfg: &TrainConfig) -> Result<KFoldOutcome> {
    cfg.validate_kfold()?;
    let parts = kfold_partition(pool.len(), cfg.k_folds, cfg.seed)?;
    let mut folds = Vec::with_capacity(parts.len());
    let mut oof_pred = vec![None; pool.len()];
    for held in &parts {
        let mut in_fold = vec![false; pool.len()];
        for &i in held {
            in_fold[i] = true;
        }
        let train: Vec<PooledSubject> = (0..pool.len()).filter(|&i| !in_fold[i]).map(|i| pool[i].clone()).collect();
        let val: Vec<PooledSubject> = held.iter().map(|&i| pool[i].clone()).collect();
        let outcome = train_pooled(&train, &val, dims, cfg)?;
        let preds = outcome.checkpoint.model.predict(&val, cfg.batch_size, cfg.clamp_at_inference)?;
        for (&i, p) in held.iter().zip(preds) {
            oof_pred[i] = Some(p);
        }
        folds.push(outcome);
    }
    let preds: Vec<ScoreVector> = oof_pred.into_iter().map(|p| p.expect("every subject held out once")).collect();
    let labels = pool
        .iter()
        .map(|s| s.label.ok_or_else(|| Error::Data(format!("subject {} has no label", s.subject_id))))
        .collect::<Result<Vec<_>>>()?;
    let assignments: Vec<Vec<String>> = parts
        .iter()
        .map(|f| f.iter().map(|&i| pool[i].subject_id.clone()).collect())
        .collect();
    let mut out_of_fold = evaluate(&preds, &labels, "out_of_fold")?;
    out_of_fold.seed = Some(cfg.seed);
    out_of_fold.config = Some(serde_json::to_value(cfg).expect("config serialises"));
    out_of_fold.folds = Some(assignments.clone());
    let checkpoints: Vec<Checkpoint> = folds.iter().map(|f| f.checkpoint.clone()).collect();
    let ensemble = FoldEnsemble::from_checkpoints(&checkpoints, cfg)?;
    Ok(KFoldOutcome {
        folds,
        assignments,
        out_of_fold,
        ensemble,
    })
}
