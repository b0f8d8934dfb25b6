//! The composed network: pooled response features → fusion → head ensemble →
//! two-level mean, batched over subjects.

use crate::dataio::SubjectRecord;
use crate::ensemble::{aggregate, ensemble_backward, ensemble_forward, EnsembleParams, HeadCache, ScoreVector, SCORE_DIMS};
use crate::error::{Error, Result};
use crate::mscmlp::{mscmlp_backward, mscmlp_forward, FusionDropout, FusionInput, MscMlpCache, MscMlpParams};
use crate::numkernel::{Matrix, Parameterized, Rng};
use crate::pooling::{pool_response, ModalityDims, PooledResponse, PoolingConfig};
use crate::trainer::TrainConfig;

const TAG_INIT_FUSION: u64 = 0x1_0000;
const TAG_INIT_HEADS: u64 = 0x1_0001;
const TAG_HEAD_DROPOUT: u64 = 0x2_0000;
const TAG_FUSION_DROPOUT: u64 = 0x2_0001;

/// A subject after pooling: one vector per modality per response.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSubject {
    pub subject_id: String,
    pub responses: Vec<PooledResponse>,
    pub label: Option<ScoreVector>,
}

pub fn pool_subject(record: &SubjectRecord, cfg: &PoolingConfig, dims: &ModalityDims) -> Result<PooledSubject> {
    if record.responses.is_empty() {
        return Err(Error::Data(format!("subject {} has no responses", record.subject_id)));
    }
    let responses = record
        .responses
        .iter()
        .map(|r| {
            let id = format!("{}/q{}", record.subject_id, r.question_index);
            pool_response(&id, &r.video, &r.audio, &r.text, cfg, dims)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PooledSubject {
        subject_id: record.subject_id.clone(),
        responses,
        label: record.label,
    })
}

pub fn pool_subjects(records: &[SubjectRecord], cfg: &PoolingConfig, dims: &ModalityDims) -> Result<Vec<PooledSubject>> {
    records.iter().map(|r| pool_subject(r, cfg, dims)).collect()
}

/// Dropout rates for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutPlan {
    pub fusion: FusionDropout,
    pub head: f64,
}

impl DropoutPlan {
    pub const NONE: DropoutPlan = DropoutPlan {
        fusion: FusionDropout::NONE,
        head: 0.0,
    };

    pub fn from_config(cfg: &TrainConfig) -> Self {
        DropoutPlan {
            fusion: cfg.fusion_dropout(),
            head: cfg.dropout_head,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub fusion: MscMlpParams,
    pub ensemble: EnsembleParams,
}

/// Intermediates of [`Model::forward`] needed by [`Model::backward`].
pub struct BatchCache {
    fused: Matrix,
    fusion: MscMlpCache,
    heads: Vec<HeadCache>,
    /// Number of responses of each subject, in batch order.
    response_counts: Vec<usize>,
}

impl Model {
    /// Fresh parameters; depends only on `dims` and the structural fields
    /// and seed of `cfg`.
    pub fn init(dims: &ModalityDims, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let root = Rng::new(cfg.seed);
        let fusion = MscMlpParams::init(dims, cfg.basis_count, cfg.shared_dim, &mut root.derive(&[TAG_INIT_FUSION]));
        let ensemble = EnsembleParams::init(cfg.head_count, fusion.fused_dim(), cfg.hidden_dim, &root.derive(&[TAG_INIT_HEADS]))?;
        Ok(Model { fusion, ensemble })
    }

    pub fn from_parts(fusion: MscMlpParams, ensemble: EnsembleParams) -> Result<Self> {
        fusion.validate()?;
        ensemble.validate()?;
        if ensemble.in_dim() != fusion.fused_dim() {
            return Err(Error::Data(format!(
                "heads expect {} inputs but fusion emits {}",
                ensemble.in_dim(),
                fusion.fused_dim()
            )));
        }
        Ok(Model { fusion, ensemble })
    }

    pub fn input_dims(&self) -> ModalityDims {
        self.fusion.input_dims()
    }

    /// Subject-level predictions (raw, unclamped) for a batch.
    pub fn forward(
        &self,
        subjects: &[&PooledSubject],
        drop: &DropoutPlan,
        rng: &Rng,
        training: bool,
    ) -> Result<(Vec<ScoreVector>, BatchCache)> {
        let dims = self.input_dims();
        let n: usize = subjects.iter().map(|s| s.responses.len()).sum();
        let mut audio = Matrix::zeros(n, dims.audio);
        let mut video = Matrix::zeros(n, dims.video);
        let mut text = Matrix::zeros(n, dims.text);
        let mut row = 0;
        let mut response_counts = Vec::with_capacity(subjects.len());
        for s in subjects {
            if s.responses.is_empty() {
                return Err(Error::Data(format!("subject {} has no responses", s.subject_id)));
            }
            for r in &s.responses {
                if r.audio.len() != dims.audio || r.video.len() != dims.video || r.text.len() != dims.text {
                    return Err(Error::Data(format!(
                        "subject {}: pooled dims {}/{}/{} do not match model {}/{}/{}",
                        s.subject_id,
                        r.video.len(),
                        r.audio.len(),
                        r.text.len(),
                        dims.video,
                        dims.audio,
                        dims.text
                    )));
                }
                audio.row_mut(row).copy_from_slice(&r.audio);
                video.row_mut(row).copy_from_slice(&r.video);
                text.row_mut(row).copy_from_slice(&r.text);
                row += 1;
            }
            response_counts.push(s.responses.len());
        }
        let (fused, fusion_cache) = mscmlp_forward(
            FusionInput {
                audio: &audio,
                video: &video,
                text: &text,
            },
            &self.fusion,
            &drop.fusion,
            &rng.derive(&[TAG_FUSION_DROPOUT]),
            training,
        )?;
        let (head_out, head_caches) = ensemble_forward(&fused, &self.ensemble, drop.head, &rng.derive(&[TAG_HEAD_DROPOUT]), training)?;

        let mut preds = Vec::with_capacity(subjects.len());
        let mut offset = 0;
        for &count in &response_counts {
            let block: Vec<Vec<ScoreVector>> = (offset..offset + count)
                .map(|r| {
                    head_out
                        .iter()
                        .map(|h| ScoreVector::from_slice(h.row(r)).expect("five outputs"))
                        .collect()
                })
                .collect();
            preds.push(aggregate(&block)?);
            offset += count;
        }
        Ok((
            preds,
            BatchCache {
                fused,
                fusion: fusion_cache,
                heads: head_caches,
                response_counts,
            },
        ))
    }

    /// Accumulates parameter gradients given `∂L/∂prediction` per subject.
    pub fn backward(&mut self, cache: &BatchCache, grad_preds: &[ScoreVector]) -> Result<()> {
        if grad_preds.len() != cache.response_counts.len() {
            return Err(Error::Data(format!(
                "{} prediction gradients for a batch of {}",
                grad_preds.len(),
                cache.response_counts.len()
            )));
        }
        let heads = self.ensemble.head_count() as f64;
        let mut g = Matrix::zeros(cache.fused.rows(), SCORE_DIMS);
        let mut row = 0;
        for (gp, &count) in grad_preds.iter().zip(&cache.response_counts) {
            let scale = 1.0 / (count as f64 * heads);
            for _ in 0..count {
                for (d, v) in g.row_mut(row).iter_mut().enumerate() {
                    *v = gp[d] * scale;
                }
                row += 1;
            }
        }
        let per_head = vec![g; self.ensemble.head_count()];
        let grad_fused = ensemble_backward(&cache.fused, &per_head, &cache.heads, &mut self.ensemble, true)?
            .expect("input grad requested");
        mscmlp_backward(&grad_fused, &cache.fusion, &mut self.fusion, false)?;
        Ok(())
    }

    /// Inference over any number of subjects, `batch` at a time; clamps to
    /// the score range when `clamp` is set.
    pub fn predict(&self, subjects: &[PooledSubject], batch: usize, clamp: bool) -> Result<Vec<ScoreVector>> {
        let mut out = Vec::with_capacity(subjects.len());
        let rng = Rng::new(0);
        for chunk in subjects.chunks(batch.max(1)) {
            let refs: Vec<&PooledSubject> = chunk.iter().collect();
            let (preds, _) = self.forward(&refs, &DropoutPlan::NONE, &rng, false)?;
            out.extend(preds.into_iter().map(|p| if clamp { p.clamped() } else { p }));
        }
        Ok(out)
    }
}

impl Parameterized for Model {
    fn visit_params(&mut self, f: &mut dyn FnMut(&mut [f64], &[f64])) {
        self.fusion.visit_params(f);
        self.ensemble.visit_params(f);
    }

    fn zero_grad(&mut self) {
        self.fusion.zero_grad();
        self.ensemble.zero_grad();
    }
}

/// Full inference pipeline for one subject: pool, fuse, score, aggregate.
pub fn predict_subject(record: &SubjectRecord, model: &Model, cfg: &TrainConfig) -> Result<ScoreVector> {
    let pooled = pool_subject(record, &cfg.pooling(), &model.input_dims())?;
    let preds = model.predict(std::slice::from_ref(&pooled), 1, cfg.clamp_at_inference)?;
    Ok(preds[0])
}
