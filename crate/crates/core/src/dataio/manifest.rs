//! Dataset manifest (JSON) and validated loading into [`SubjectRecord`]s.
//!
//! ```json
//! {
//!   "dims": { "video": 1152, "audio": 768, "text": 4096 },
//!   "subjects": [
//!     {
//!       "subject_id": "s0001",
//!       "split": "train",
//!       "responses": [
//!         { "question_index": 1,
//!           "video_path": "features/s0001/q1_video.mmfc",
//!           "audio_path": "features/s0001/q1_audio.mmfc",
//!           "text_path":  "features/s0001/q1_text.mmfc" }
//!       ],
//!       "labels": [3.2, 3.0, 2.8, 3.4, 3.1]
//!     }
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. Each subject has
//! exactly six responses whose question indices are a permutation of 1..=6.
//! Labels are required for `train` and `val`, optional for `test`, and must
//! lie in [1, 5]. A response may carry `"warnings": [...]` (for example an
//! empty transcript upstream); these are surfaced by the loader.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::read_container;
use crate::ensemble::{ScoreVector, SCORE_MAX, SCORE_MIN};
use crate::error::{Error, Result};
use crate::pooling::{FeatureSequence, Modality, ModalityDims};

pub const RESPONSES_PER_SUBJECT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseEntry {
    pub question_index: u8,
    pub video_path: PathBuf,
    pub audio_path: PathBuf,
    pub text_path: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ResponseEntry {
    pub fn path(&self, modality: Modality) -> &Path {
        match modality {
            Modality::Video => &self.video_path,
            Modality::Audio => &self.audio_path,
            Modality::Text => &self.text_path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub split: Split,
    pub responses: Vec<ResponseEntry>,
    #[serde(default)]
    pub labels: Option<ScoreVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dims: ModalityDims,
    pub subjects: Vec<SubjectEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            offset: byte_offset(&text, e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::Data(format!("duplicate subject id {}", s.subject_id)));
            }
            if s.responses.len() != RESPONSES_PER_SUBJECT {
                return Err(Error::Data(format!(
                    "subject {} has {} responses, expected {RESPONSES_PER_SUBJECT}",
                    s.subject_id,
                    s.responses.len()
                )));
            }
            let mut idx: Vec<u8> = s.responses.iter().map(|r| r.question_index).collect();
            idx.sort_unstable();
            if idx != [1, 2, 3, 4, 5, 6] {
                return Err(Error::Data(format!(
                    "subject {} question indices {:?} are not a permutation of 1..=6",
                    s.subject_id, idx
                )));
            }
            match (&s.labels, s.split) {
                (None, Split::Train | Split::Val) => {
                    return Err(Error::Data(format!(
                        "subject {} in split {} has no labels",
                        s.subject_id, s.split
                    )))
                }
                (Some(l), _) => check_label(&s.subject_id, l)?,
                (None, Split::Test) => {}
            }
        }
        Ok(())
    }
}

fn check_label(subject_id: &str, label: &ScoreVector) -> Result<()> {
    for (d, &v) in label.0.iter().enumerate() {
        if !(SCORE_MIN..=SCORE_MAX).contains(&v) {
            return Err(Error::Data(format!(
                "subject {subject_id}: label {d} = {v} outside [{SCORE_MIN}, {SCORE_MAX}]"
            )));
        }
    }
    Ok(())
}

fn byte_offset(text: &str, line: usize, column: usize) -> u64 {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)) as u64
}

/// Three modality sequences of one response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFeatures {
    pub question_index: u8,
    pub video: FeatureSequence,
    pub audio: FeatureSequence,
    pub text: FeatureSequence,
}

/// One subject with responses in ascending question order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub split: Split,
    pub responses: Vec<ResponseFeatures>,
    pub label: Option<ScoreVector>,
}

impl SubjectRecord {
    /// Sorts responses by question index; the aggregation order depends on it.
    pub fn canonicalize(&mut self) {
        self.responses.sort_by_key(|r| r.question_index);
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub dims: ModalityDims,
    pub train: Vec<SubjectRecord>,
    pub val: Vec<SubjectRecord>,
    pub test: Vec<SubjectRecord>,
    /// Warnings carried over from the manifest, prefixed with subject/question.
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[SubjectRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

fn load_sequence(base: &Path, entry: &ResponseEntry, modality: Modality, dims: &ModalityDims, subject: &str) -> Result<FeatureSequence> {
    let path = base.join(entry.path(modality));
    let seq = read_container(&path)?;
    if seq.modality() != modality {
        return Err(Error::Data(format!(
            "subject {subject} q{}: {} holds {} features, expected {modality}",
            entry.question_index,
            path.display(),
            seq.modality()
        )));
    }
    if seq.dim() != dims.of(modality) {
        return Err(Error::Data(format!(
            "subject {subject} q{}: {modality} container {} has dim {}, manifest declares {}",
            entry.question_index,
            path.display(),
            seq.dim(),
            dims.of(modality)
        )));
    }
    Ok(seq)
}

/// Reads and validates every subject of a manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(manifest_path)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let dims = manifest.dims;
    let mut ds = Dataset {
        dims,
        ..Default::default()
    };
    for s in &manifest.subjects {
        let mut responses = Vec::with_capacity(RESPONSES_PER_SUBJECT);
        for r in &s.responses {
            for w in &r.warnings {
                ds.warnings.push(format!("{} q{}: {w}", s.subject_id, r.question_index));
            }
            responses.push(ResponseFeatures {
                question_index: r.question_index,
                video: load_sequence(base, r, Modality::Video, &dims, &s.subject_id)?,
                audio: load_sequence(base, r, Modality::Audio, &dims, &s.subject_id)?,
                text: load_sequence(base, r, Modality::Text, &dims, &s.subject_id)?,
            });
        }
        let mut record = SubjectRecord {
            subject_id: s.subject_id.clone(),
            split: s.split,
            responses,
            label: s.labels,
        };
        record.canonicalize();
        match s.split {
            Split::Train => ds.train.push(record),
            Split::Val => ds.val.push(record),
            Split::Test => ds.test.push(record),
        }
    }
    Ok(ds)
}
