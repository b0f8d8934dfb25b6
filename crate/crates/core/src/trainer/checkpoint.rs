//! Checkpoint file.
//!
//! ```text
//! "MMCK" | version u16 = 1
//! config_len u32 | config JSON (UTF-8)
//! dims: video u32 | audio u32 | text u32
//! rng: seed u64 | stream u64 | word_pos u128
//! epoch u32 | best_val_mse f64
//! tensor_count u32
//! per tensor: name_len u16 | name | rows u32 | cols u32 | rows×cols f64
//! ```
//!
//! Integers and floats are little-endian. Tensors appear in a fixed order
//! (fusion keys audio/video/text, values, then each head) and every shape is
//! checked against the stored config on load.

use std::fs;
use std::path::Path;

use super::config::TrainConfig;
use crate::ensemble::{EnsembleParams, RegressionHead};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::mscmlp::MscMlpParams;
use crate::numkernel::{LinearParams, Matrix, RngState};
use crate::pooling::ModalityDims;

pub const MAGIC: &[u8; 4] = b"MMCK";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub dims: ModalityDims,
    pub model: Model,
    pub rng_state: RngState,
    pub epoch: usize,
    pub best_val_mse: f64,
}

fn linear_tensors<'a>(prefix: &str, p: &'a LinearParams, out: &mut Vec<(String, Matrix)>) {
    out.push((format!("{prefix}.weight"), p.weight.clone()));
    if let Some(b) = &p.bias {
        out.push((format!("{prefix}.bias"), Matrix::row_vector(b)));
    }
}

fn tensors(model: &Model) -> Vec<(String, Matrix)> {
    let mut out = Vec::new();
    let f = &model.fusion;
    linear_tensors("fusion.keys_audio", &f.keys_audio, &mut out);
    linear_tensors("fusion.keys_video", &f.keys_video, &mut out);
    linear_tensors("fusion.keys_text", &f.keys_text, &mut out);
    linear_tensors("fusion.values", &f.values, &mut out);
    for (i, h) in model.ensemble.heads.iter().enumerate() {
        linear_tensors(&format!("heads.{i}.hidden"), &h.hidden, &mut out);
        linear_tensors(&format!("heads.{i}.output"), &h.output, &mut out);
    }
    out
}

impl Checkpoint {
    /// Errors unless this checkpoint's architecture matches `cfg` and `dims`;
    /// the message names both values of the first differing field.
    pub fn ensure_compatible(&self, cfg: &TrainConfig, dims: &ModalityDims) -> Result<()> {
        let pairs = [
            ("basis_count", self.config.basis_count, cfg.basis_count),
            ("shared_dim", self.config.shared_dim, cfg.shared_dim),
            ("head_count", self.config.head_count, cfg.head_count),
            ("hidden_dim", self.config.hidden_dim, cfg.hidden_dim),
            ("video dim", self.dims.video, dims.video),
            ("audio dim", self.dims.audio, dims.audio),
            ("text dim", self.dims.text, dims.text),
        ];
        for (name, ours, theirs) in pairs {
            if ours != theirs {
                return Err(Error::Config(format!(
                    "checkpoint has {name} = {ours}, but {theirs} was requested"
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let cfg = serde_json::to_string(&self.config).expect("config serialises");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        for d in [self.dims.video, self.dims.audio, self.dims.text] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.rng_state.seed.to_le_bytes());
        out.extend_from_slice(&self.rng_state.stream.to_le_bytes());
        out.extend_from_slice(&self.rng_state.word_pos.to_le_bytes());
        out.extend_from_slice(&(self.epoch as u32).to_le_bytes());
        out.extend_from_slice(&self.best_val_mse.to_le_bytes());
        let ts = tensors(&self.model);
        out.extend_from_slice(&(ts.len() as u32).to_le_bytes());
        for (name, m) in ts {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(r.err_at(0, "bad magic, expected \"MMCK\""));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(r.err_at(4, format!("unsupported checkpoint version {version}, expected {VERSION}")));
        }
        let cfg_len = r.u32()? as usize;
        let cfg_at = r.pos;
        let cfg_text = std::str::from_utf8(r.take(cfg_len)?).map_err(|e| r.err_at(cfg_at, e.to_string()))?;
        let config: TrainConfig = serde_json::from_str(cfg_text).map_err(|e| r.err_at(cfg_at, format!("config: {e}")))?;
        let dims = ModalityDims {
            video: r.u32()? as usize,
            audio: r.u32()? as usize,
            text: r.u32()? as usize,
        };
        let rng_state = RngState {
            seed: r.u64()?,
            stream: r.u64()?,
            word_pos: u128::from_le_bytes(r.take(16)?.try_into().unwrap()),
        };
        let epoch = r.u32()? as usize;
        let best_val_mse = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let count_at = r.pos;
        let count = r.u32()? as usize;

        let c = config.basis_count;
        let s = config.shared_dim;
        let hd = config.hidden_dim;
        let mut expected: Vec<(String, usize, usize)> = vec![
            ("fusion.keys_audio.weight".into(), dims.audio, c),
            ("fusion.keys_audio.bias".into(), 1, c),
            ("fusion.keys_video.weight".into(), dims.video, c),
            ("fusion.keys_video.bias".into(), 1, c),
            ("fusion.keys_text.weight".into(), dims.text, c),
            ("fusion.keys_text.bias".into(), 1, c),
            ("fusion.values.weight".into(), c, s),
        ];
        for i in 0..config.head_count {
            expected.push((format!("heads.{i}.hidden.weight"), 3 * s, hd));
            expected.push((format!("heads.{i}.hidden.bias"), 1, hd));
            expected.push((format!("heads.{i}.output.weight"), hd, 5));
            expected.push((format!("heads.{i}.output.bias"), 1, 5));
        }
        if count != expected.len() {
            return Err(r.err_at(count_at, format!("{count} tensors, config implies {}", expected.len())));
        }
        let mut loaded = Vec::with_capacity(count);
        for (name, rows, cols) in expected {
            let at = r.pos;
            let len = r.u16()? as usize;
            let got = String::from_utf8_lossy(r.take(len)?).into_owned();
            if got != name {
                return Err(r.err_at(at, format!("expected tensor {name}, found {got}")));
            }
            let shape_at = r.pos;
            let (gr, gc) = (r.u32()? as usize, r.u32()? as usize);
            if (gr, gc) != (rows, cols) {
                return Err(r.err_at(shape_at, format!("tensor {name} is {gr}x{gc}, expected {rows}x{cols}")));
            }
            let data_at = r.pos;
            let raw = r.take(rows * cols * 8)?;
            let values: Vec<f64> = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
            let m = Matrix::new(rows, cols, values).map_err(|e| r.err_at(data_at, format!("tensor {name}: {e}")))?;
            loaded.push(m);
        }
        if r.pos != bytes.len() {
            return Err(r.err_at(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
        }

        let mut it = loaded.into_iter();
        let mut linear = |with_bias: bool| -> LinearParams {
            let w = it.next().expect("counted");
            let b = with_bias.then(|| it.next().expect("counted").into_vec());
            LinearParams::new(w, b).expect("shapes checked")
        };
        let keys_audio = linear(true);
        let keys_video = linear(true);
        let keys_text = linear(true);
        let values = linear(false);
        let heads: Vec<RegressionHead> = (0..config.head_count)
            .map(|_| RegressionHead {
                hidden: linear(true),
                output: linear(true),
            })
            .collect();
        let fusion = MscMlpParams::from_parts(keys_audio, keys_video, keys_text, values)?;
        let model = Model::from_parts(fusion, EnsembleParams::from_heads(heads)?)?;
        Ok(Checkpoint {
            config,
            dims,
            model,
            rng_state,
            epoch,
            best_val_mse,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            self.err_at(
                self.pos,
                format!("needs {n} bytes, only {} remain", self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
