//! Feature container: one modality of one response.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MMFC"
//! 4       2     version (u16 LE) = 1
//! 6       1     modality (u8): 0 video, 1 audio, 2 text
//! 7       4     length  (u32 LE) number of rows (frames / patches / 1)
//! 11      4     dim     (u32 LE) row width
//! 15      ...   payload: length × dim f32 LE, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkernel::Matrix;
use crate::pooling::{FeatureSequence, Modality};

pub const MAGIC: &[u8; 4] = b"MMFC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 15;

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

/// Serialises a sequence; values are narrowed to f32.
pub fn encode_container(seq: &FeatureSequence) -> Vec<u8> {
    let data = seq.data();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(seq.modality().code());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    for &v in data.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Parses container bytes; `path` only labels errors.
pub fn decode_container(bytes: &[u8], path: &Path) -> Result<FeatureSequence> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(
            path,
            bytes.len(),
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(parse_err(path, 0, format!("bad magic {:?}, expected \"MMFC\"", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(parse_err(path, 4, format!("unsupported version {version}, expected {VERSION}")));
    }
    let modality = Modality::from_code(bytes[6])
        .ok_or_else(|| parse_err(path, 6, format!("unknown modality code {}", bytes[6])))?;
    let length = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
    if length == 0 {
        return Err(parse_err(path, 7, "sequence length is zero"));
    }
    if dim == 0 {
        return Err(parse_err(path, 11, "feature dim is zero"));
    }
    let expected = length
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| parse_err(path, 7, "length × dim overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(parse_err(
            path,
            HEADER_LEN + payload.len().min(expected),
            format!(
                "payload for {length}x{dim} needs {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(length * dim);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(parse_err(path, HEADER_LEN + 4 * i, format!("non-finite value {v}")));
        }
        values.push(f64::from(v));
    }
    let data = Matrix::new(length, dim, values)?;
    FeatureSequence::new(modality, data).map_err(|e| parse_err(path, 7, e.to_string()))
}

pub fn read_container(path: &Path) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_container(&bytes, path)
}

pub fn write_container(path: &Path, seq: &FeatureSequence) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, encode_container(seq)).map_err(|e| Error::io(path, e))
}
