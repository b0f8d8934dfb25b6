//! Synthetic datasets with a planted ground truth.
//!
//! Frames and patches are i.i.d. standard normal (rounded to f32, as stored).
//! Each response is pooled with the planted pooling config, the six pooled
//! vectors are averaged, and labels are
//!
//! ```text
//! y = clamp(b + W · mean_k z_k + σ·ε, 1, 5),   ε ~ N(0, I)
//! ```
//!
//! `W` and `b` are rescaled so the noiseless signal has mean 3 and standard
//! deviation `label_spread` across the generated subjects. The best any
//! predictor can do in expectation is therefore about σ² per entry, which is
//! stored as the oracle floor next to the empirical floor of the planted map.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::write_container;
use super::manifest::{Manifest, ResponseEntry, Split, SubjectEntry, SubjectRecord, RESPONSES_PER_SUBJECT};
use crate::ensemble::{ScoreVector, SCORE_DIMS, SCORE_MAX, SCORE_MIN};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Rng};
use crate::pooling::{pool, pool_response, FeatureSequence, Modality, ModalityDims, PoolingConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ORACLE_FILE: &str = "oracle.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub dims: ModalityDims,
    pub min_len: usize,
    pub max_len: usize,
    pub label_spread: f64,
    /// Relative train : val : test sizes.
    pub split_ratio: [u32; 3],
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_subjects: 64,
            seed: 0,
            noise_sigma: 0.3,
            dims: ModalityDims::default(),
            min_len: 4,
            max_len: 16,
            label_spread: 0.6,
            split_ratio: [450, 64, 130],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects < 3 {
            return Err(Error::Config("need at least 3 subjects (one per split)".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "sequence length range {}..={} is empty",
                self.min_len, self.max_len
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if self.split_ratio.iter().all(|&r| r == 0) {
            return Err(Error::Config("split ratio is all zero".into()));
        }
        if [self.dims.video, self.dims.audio, self.dims.text].contains(&0) {
            return Err(Error::Config("feature dims must be positive".into()));
        }
        Ok(())
    }

    /// Subjects per split, proportional to `split_ratio`, with at least one
    /// subject in train and val.
    pub fn split_counts(&self) -> [usize; 3] {
        let total: u32 = self.split_ratio.iter().sum();
        let n = self.n_subjects;
        let share = |r: u32| ((n as f64) * f64::from(r) / f64::from(total)).round() as usize;
        let train = share(self.split_ratio[0]).clamp(1, n - 2);
        let val = share(self.split_ratio[1]).clamp(1, n - train - 1);
        [train, val, n - train - val]
    }
}

/// Planted affine map from the response-averaged pooled features to scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedModel {
    pub pooling: PoolingConfig,
    pub dims: ModalityDims,
    /// `SCORE_DIMS` rows over features ordered video, audio, text.
    pub weights: Vec<Vec<f64>>,
    pub intercept: [f64; SCORE_DIMS],
}

impl PlantedModel {
    /// Noiseless planted prediction, clamped to the score range.
    pub fn predict_features(&self, mean_features: &[f64]) -> ScoreVector {
        let mut out = [0.0; SCORE_DIMS];
        for (d, o) in out.iter_mut().enumerate() {
            let dot: f64 = self.weights[d].iter().zip(mean_features).map(|(w, z)| w * z).sum();
            *o = (self.intercept[d] + dot).clamp(SCORE_MIN, SCORE_MAX);
        }
        ScoreVector(out)
    }

    pub fn predict(&self, record: &SubjectRecord) -> Result<ScoreVector> {
        let mut pooled = Vec::with_capacity(record.responses.len());
        for r in &record.responses {
            let id = format!("{}/q{}", record.subject_id, r.question_index);
            let p = pool_response(&id, &r.video, &r.audio, &r.text, &self.pooling, &self.dims)?;
            pooled.push([p.video, p.audio, p.text].concat());
        }
        Ok(self.predict_features(&mean_rows(&pooled)))
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / rows.len() as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFloors {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

/// Written next to the manifest as `oracle.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleMeta {
    pub spec: SynthSpec,
    pub planted: PlantedModel,
    /// Analytic floor σ².
    pub oracle_floor: f64,
    /// MSE of the noiseless planted map against the generated labels.
    pub empirical_floor: SplitFloors,
}

impl OracleMeta {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: e.to_string(),
        })
    }
}

const TAG_SEQ: u64 = 1;
const TAG_PLANT: u64 = 2;
const TAG_NOISE: u64 = 3;

fn random_sequence(modality: Modality, len: usize, dim: usize, rng: &mut Rng) -> Result<FeatureSequence> {
    let data = Matrix::from_fn(len, dim, |_, _| f64::from(rng.normal() as f32));
    FeatureSequence::new(modality, data)
}

fn rel_path(subject: &str, q: usize, modality: Modality) -> PathBuf {
    PathBuf::from("features").join(subject).join(format!("q{q}_{modality}.mmfc"))
}

/// Generates containers, `manifest.json` and `oracle.json` under `out_dir`.
pub fn gen_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<OracleMeta> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let root = Rng::new(spec.seed);
    let planting = PoolingConfig::default();
    let counts = spec.split_counts();
    let total_dim = spec.dims.total();

    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut mean_features = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let subject_id = format!("s{i:04}");
        let split = if i < counts[0] {
            Split::Train
        } else if i < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
        let mut responses = Vec::with_capacity(RESPONSES_PER_SUBJECT);
        let mut pooled = Vec::with_capacity(RESPONSES_PER_SUBJECT);
        for q in 1..=RESPONSES_PER_SUBJECT {
            let mut rng = root.derive(&[TAG_SEQ, i as u64, q as u64]);
            let span = spec.max_len - spec.min_len + 1;
            let video_len = spec.min_len + rng.below(span);
            let audio_len = spec.min_len + rng.below(span);
            let video = random_sequence(Modality::Video, video_len, spec.dims.video, &mut rng)?;
            let audio = random_sequence(Modality::Audio, audio_len, spec.dims.audio, &mut rng)?;
            let text = random_sequence(Modality::Text, 1, spec.dims.text, &mut rng)?;
            let entry = ResponseEntry {
                question_index: q as u8,
                video_path: rel_path(&subject_id, q, Modality::Video),
                audio_path: rel_path(&subject_id, q, Modality::Audio),
                text_path: rel_path(&subject_id, q, Modality::Text),
                warnings: vec![],
            };
            for (seq, modality) in [(&video, Modality::Video), (&audio, Modality::Audio), (&text, Modality::Text)] {
                write_container(&out_dir.join(entry.path(modality)), seq)?;
            }
            pooled.push(
                [
                    pool(&video, planting.video)?,
                    pool(&audio, planting.audio)?,
                    text.data().row(0).to_vec(),
                ]
                .concat(),
            );
            responses.push(entry);
        }
        mean_features.push(mean_rows(&pooled));
        subjects.push(SubjectEntry {
            subject_id,
            split,
            responses,
            labels: None,
        });
    }

    // Planted weights, standardised so the signal has mean 3 and the requested spread.
    let mut plant_rng = root.derive(&[TAG_PLANT]);
    let raw: Vec<Vec<f64>> = (0..SCORE_DIMS)
        .map(|_| (0..total_dim).map(|_| plant_rng.normal()).collect())
        .collect();
    let mut weights = raw.clone();
    let mut intercept = [0.0; SCORE_DIMS];
    for d in 0..SCORE_DIMS {
        let signal: Vec<f64> = mean_features
            .iter()
            .map(|z| raw[d].iter().zip(z).map(|(w, v)| w * v).sum())
            .collect();
        let n = signal.len() as f64;
        let mu = signal.iter().sum::<f64>() / n;
        let sd = (signal.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if sd > 0.0 { spec.label_spread / sd } else { 0.0 };
        weights[d].iter_mut().for_each(|w| *w *= scale);
        intercept[d] = 3.0 - mu * scale;
    }
    let planted = PlantedModel {
        pooling: planting,
        dims: spec.dims,
        weights,
        intercept,
    };

    let mut sq = [0.0f64; 3];
    for (i, subject) in subjects.iter_mut().enumerate() {
        let clean = planted.predict_features(&mean_features[i]);
        let mut noise_rng = root.derive(&[TAG_NOISE, i as u64]);
        let mut label = clean;
        for d in 0..SCORE_DIMS {
            label[d] = (clean[d] + spec.noise_sigma * noise_rng.normal()).clamp(SCORE_MIN, SCORE_MAX);
        }
        let slot = match subject.split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        };
        sq[slot] += (0..SCORE_DIMS).map(|d| (label[d] - clean[d]).powi(2)).sum::<f64>();
        subject.labels = Some(label);
    }
    let floor = |slot: usize| {
        if counts[slot] == 0 {
            0.0
        } else {
            sq[slot] / (counts[slot] * SCORE_DIMS) as f64
        }
    };
    let meta = OracleMeta {
        spec: spec.clone(),
        planted,
        oracle_floor: spec.noise_sigma * spec.noise_sigma,
        empirical_floor: SplitFloors {
            train: floor(0),
            val: floor(1),
            test: floor(2),
        },
    };

    let manifest = Manifest {
        dims: spec.dims,
        subjects,
    };
    manifest.validate()?;
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    let oracle_path = out_dir.join(ORACLE_FILE);
    let mut text = serde_json::to_string_pretty(&meta).expect("oracle serialises");
    text.push('\n');
    fs::write(&oracle_path, text).map_err(|e| Error::io(&oracle_path, e))?;
    Ok(meta)
}
