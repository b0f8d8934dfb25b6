//! Multimodal interview assessment: pooled video/audio/text features are
//! fused by a shared-basis MLP, scored by an ensemble of regression heads and
//! averaged over heads and responses into five 1–5 scores per subject.

pub mod dataio;
pub mod ensemble;
pub mod error;
pub mod evaluator;
pub mod model;
pub mod mscmlp;
pub mod numkernel;
pub mod pooling;
pub mod trainer;

pub use ensemble::{ScoreVector, DIMENSION_NAMES, SCORE_DIMS};
pub use error::{Error, Result};
pub use evaluator::{evaluate, RunReport};
pub use model::{predict_subject, Model, PooledSubject};
pub use pooling::{Modality, ModalityDims, PoolMethod, PoolingConfig};
pub use trainer::{Checkpoint, TrainConfig};
