//! Temporal pooling of per-frame (video) and per-patch (audio) features into a
//! single vector per modality per response. Text arrives as a single vector
//! already (last-token embedding computed upstream) and passes through.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{exact_mean, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Audio,
    Text,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Video, Modality::Audio, Modality::Text];

    /// On-disk code used by the feature container header.
    pub fn code(self) -> u8 {
        match self {
            Modality::Video => 0,
            Modality::Audio => 1,
            Modality::Text => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Video),
            1 => Some(Modality::Audio),
            2 => Some(Modality::Text),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Video => "video",
            Modality::Audio => "audio",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Declared feature width of each modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalityDims {
    pub video: usize,
    pub audio: usize,
    pub text: usize,
}

impl Default for ModalityDims {
    fn default() -> Self {
        ModalityDims {
            video: 1152,
            audio: 768,
            text: 4096,
        }
    }
}

impl ModalityDims {
    pub fn of(&self, modality: Modality) -> usize {
        match modality {
            Modality::Video => self.video,
            Modality::Audio => self.audio,
            Modality::Text => self.text,
        }
    }

    pub fn total(&self) -> usize {
        self.video + self.audio + self.text
    }
}

/// Variable-length sequence of fixed-width feature vectors for one modality
/// of one response.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    modality: Modality,
    data: Matrix,
}

impl FeatureSequence {
    pub fn new(modality: Modality, data: Matrix) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::Data(format!("empty {modality} feature sequence")));
        }
        if data.cols() == 0 {
            return Err(Error::Data(format!("{modality} feature sequence has zero width")));
        }
        if modality == Modality::Text && data.rows() != 1 {
            return Err(Error::Data(format!(
                "text feature sequence must hold exactly one vector, got {}",
                data.rows()
            )));
        }
        if !data.is_finite() {
            return Err(Error::Data(format!("non-finite value in {modality} feature sequence")));
        }
        Ok(FeatureSequence { modality, data })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMethod {
    Max,
    Mean,
}

impl PoolMethod {
    pub fn label(self) -> &'static str {
        match self {
            PoolMethod::Max => "Max pooling",
            PoolMethod::Mean => "Mean pooling",
        }
    }
}

impl fmt::Display for PoolMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMethod::Max => "max",
            PoolMethod::Mean => "mean",
        })
    }
}

impl std::str::FromStr for PoolMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(PoolMethod::Max),
            "mean" => Ok(PoolMethod::Mean),
            other => Err(Error::Config(format!("unknown pooling method {other:?} (expected max or mean)"))),
        }
    }
}

/// Pooling choice for the two time-varying modalities. Defaults to max/max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolingConfig {
    pub video: PoolMethod,
    pub audio: PoolMethod,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig {
            video: PoolMethod::Max,
            audio: PoolMethod::Max,
        }
    }
}

impl PoolingConfig {
    /// The 2×2 ablation grid, in the row order of the reporting table.
    pub fn grid() -> [PoolingConfig; 4] {
        use PoolMethod::*;
        [
            PoolingConfig { video: Mean, audio: Mean },
            PoolingConfig { video: Mean, audio: Max },
            PoolingConfig { video: Max, audio: Mean },
            PoolingConfig { video: Max, audio: Max },
        ]
    }
}

/// Element-wise maximum over the sequence axis.
pub fn pool_max(rows: &Matrix) -> Result<Vec<f64>> {
    let mut it = rows.iter_rows();
    let first = it
        .next()
        .filter(|_| rows.rows() > 0)
        .ok_or_else(|| Error::Data("max-pooling an empty sequence".into()))?;
    let mut out = first.to_vec();
    for row in it {
        for (o, &v) in out.iter_mut().zip(row) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Element-wise mean over the sequence axis, correctly rounded per element.
pub fn pool_mean(rows: &Matrix) -> Result<Vec<f64>> {
    if rows.rows() == 0 {
        return Err(Error::Data("mean-pooling an empty sequence".into()));
    }
    let mut column = vec![0.0; rows.rows()];
    Ok((0..rows.cols())
        .map(|c| {
            for (r, slot) in column.iter_mut().enumerate() {
                *slot = rows.get(r, c);
            }
            exact_mean(&column).expect("non-empty column")
        })
        .collect())
}

pub fn pool(seq: &FeatureSequence, method: PoolMethod) -> Result<Vec<f64>> {
    match method {
        PoolMethod::Max => pool_max(seq.data()),
        PoolMethod::Mean => pool_mean(seq.data()),
    }
}

/// One response reduced to one vector per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledResponse {
    pub video: Vec<f64>,
    pub audio: Vec<f64>,
    pub text: Vec<f64>,
}

/// Pools video and audio per `cfg` and passes text through. `response_id`
/// only labels errors.
pub fn pool_response(
    response_id: &str,
    video: &FeatureSequence,
    audio: &FeatureSequence,
    text: &FeatureSequence,
    cfg: &PoolingConfig,
    dims: &ModalityDims,
) -> Result<PooledResponse> {
    for (slot, seq) in [(Modality::Video, video), (Modality::Audio, audio), (Modality::Text, text)] {
        if seq.modality() != slot {
            return Err(Error::Data(format!(
                "response {response_id}: {} sequence supplied for the {slot} slot",
                seq.modality()
            )));
        }
        if seq.dim() != dims.of(slot) {
            return Err(Error::Data(format!(
                "response {response_id}: {slot} features have dim {}, manifest declares {}",
                seq.dim(),
                dims.of(slot)
            )));
        }
    }
    Ok(PooledResponse {
        video: pool(video, cfg.video)?,
        audio: pool(audio, cfg.audio)?,
        text: text.data().row(0).to_vec(),
    })
}
