use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use crate::dataio::SubjectRecord;
use crate::ensemble::{ScoreVector, SCORE_DIMS};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, RunReport};
use crate::model::{pool_subjects, DropoutPlan, Model, PooledSubject};
use crate::numkernel::{mse_loss, AdamWState, Matrix, Parameterized, Rng};
use crate::pooling::ModalityDims;

const TAG_SHUFFLE: u64 = 0x3_0000;
const TAG_DROPOUT: u64 = 0x3_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss with dropout active; `None` for the initial evaluation.
    pub train_loss: Option<f64>,
    /// Inference-mode mean MSE on the training split.
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    TargetReached,
    /// The epoch observer asked to stop.
    Interrupted,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation model (final model when there is no validation split).
    pub checkpoint: Checkpoint,
    /// Evaluation of the selected model on the validation split, or on the
    /// training split when validation is empty.
    pub report: RunReport,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop: StopReason,
}

/// Pools both splits and trains.
pub fn train(train: &[SubjectRecord], val: &[SubjectRecord], dims: &ModalityDims, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let pooling = cfg.pooling();
    let train = pool_subjects(train, &pooling, dims)?;
    let val = pool_subjects(val, &pooling, dims)?;
    train_pooled(&train, &val, dims, cfg)
}

fn labels(subjects: &[PooledSubject]) -> Result<Vec<ScoreVector>> {
    subjects
        .iter()
        .map(|s| s.label.ok_or_else(|| Error::Data(format!("subject {} has no label", s.subject_id))))
        .collect()
}

fn score_matrix(v: &[ScoreVector]) -> Matrix {
    Matrix::from_fn(v.len(), SCORE_DIMS, |r, c| v[r][c])
}

/// Inference-mode evaluation of `model` on labelled subjects.
pub fn evaluate_model(model: &Model, subjects: &[PooledSubject], cfg: &TrainConfig, split: &str) -> Result<RunReport> {
    let preds = model.predict(subjects, cfg.batch_size, cfg.clamp_at_inference)?;
    evaluate(&preds, &labels(subjects)?, split)
}

/// Trains on pre-pooled subjects. Minibatches are subjects; the loss of a
/// subject compares its aggregated prediction with its label.
pub fn train_pooled(train: &[PooledSubject], val: &[PooledSubject], dims: &ModalityDims, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(train, val, dims, cfg, &mut |_| true)
}

/// [`train_pooled`] with `observer` called after every evaluation, epoch 0
/// included; returning `false` stops training as [`StopReason::Interrupted`].
pub fn train_observed(
    train: &[PooledSubject],
    val: &[PooledSubject],
    dims: &ModalityDims,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord) -> bool,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let train_labels = labels(train)?;
    labels(val)?;

    let mut model = Model::init(dims, cfg)?;
    let mut opt = AdamWState::new(cfg.adamw());
    let plan = DropoutPlan::from_config(cfg);
    let root = Rng::new(cfg.seed);

    let eval = |model: &Model| -> Result<(f64, Option<f64>)> {
        let t = evaluate_model(model, train, cfg, "train")?.mean_mse;
        let v = if val.is_empty() {
            None
        } else {
            Some(evaluate_model(model, val, cfg, "val")?.mean_mse)
        };
        Ok((t, v))
    };
    let selection = |rec: &EpochRecord| rec.val_mse.unwrap_or(rec.train_mse);

    let (t0, v0) = eval(&model)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        train_mse: t0,
        val_mse: v0,
    }];
    let mut best = (0usize, selection(&history[0]), model.clone());
    let mut stop = StopReason::MaxEpochs;
    let mut last_finite = f64::NAN;
    let go_on = observer(&history[0]);
    if cfg.target_train_mse.is_some_and(|t| t0 < t) {
        stop = StopReason::TargetReached;
    } else if !go_on {
        stop = StopReason::Interrupted;
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch = 0;
    while stop == StopReason::MaxEpochs && epoch < cfg.max_epochs {
        epoch += 1;
        order.sort_unstable();
        root.derive(&[TAG_SHUFFLE, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&PooledSubject> = chunk.iter().map(|&i| &train[i]).collect();
            let batch_labels: Vec<ScoreVector> = chunk.iter().map(|&i| train_labels[i]).collect();
            model.zero_grad();
            let rng = root.derive(&[TAG_DROPOUT, epoch as u64, step as u64]);
            let (preds, cache) = model.forward(&batch, &plan, &rng, true)?;
            let (loss, grad) = mse_loss(&score_matrix(&preds), &score_matrix(&batch_labels))?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    last_finite_loss: last_finite,
                });
            }
            last_finite = loss;
            let grads: Vec<ScoreVector> = (0..grad.rows())
                .map(|r| ScoreVector::from_slice(grad.row(r)))
                .collect::<Result<_>>()?;
            model.backward(&cache, &grads)?;
            opt.step(&mut model)?;
            loss_sum += loss;
            steps += 1;
        }
        let (t, v) = eval(&model).map_err(|e| match e {
            Error::Numeric(_) => Error::Divergence {
                epoch,
                last_finite_loss: last_finite,
            },
            other => other,
        })?;
        let rec = EpochRecord {
            epoch,
            train_loss: Some(loss_sum / steps as f64),
            train_mse: t,
            val_mse: v,
        };
        history.push(rec);
        if selection(&rec) < best.1 {
            best = (epoch, selection(&rec), model.clone());
        }
        let go_on = observer(&rec);
        if cfg.target_train_mse.is_some_and(|target| t < target) {
            stop = StopReason::TargetReached;
        } else if cfg.early_stop_patience > 0 && !val.is_empty() && epoch - best.0 >= cfg.early_stop_patience {
            stop = StopReason::EarlyStop;
        } else if !go_on {
            stop = StopReason::Interrupted;
        }
    }

    let (best_epoch, best_metric, best_model) = best;
    let mut report = if val.is_empty() {
        evaluate_model(&best_model, train, cfg, "train")?
    } else {
        evaluate_model(&best_model, val, cfg, "val")?
    };
    report.seed = Some(cfg.seed);
    report.config = Some(serde_json::to_value(cfg).expect("config serialises"));
    let checkpoint = Checkpoint {
        config: cfg.clone(),
        dims: *dims,
        model: best_model,
        rng_state: root.state(),
        epoch: best_epoch,
        best_val_mse: best_metric,
    };
    Ok(TrainOutcome {
        checkpoint,
        report,
        history,
        best_epoch,
        stop,
    })
}
