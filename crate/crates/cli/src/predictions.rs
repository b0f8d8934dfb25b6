//! Per-subject prediction CSV: `subject_id` followed by the five scores.

use std::path::Path;

use interview_core::evaluator::CSV_HEADER;
use interview_core::{Error, Result, ScoreVector, SCORE_DIMS};

fn header() -> Vec<&'static str> {
    std::iter::once("subject_id")
        .chain(CSV_HEADER.split(',').take(SCORE_DIMS))
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    Error::Parse {
        path: path.to_path_buf(),
        offset,
        message: e.to_string(),
    }
}

pub fn write(path: &Path, rows: &[(String, ScoreVector)]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header()).map_err(|e| csv_err(path, e))?;
    for (id, s) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(s.as_slice().iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read(path: &Path) -> Result<Vec<(String, ScoreVector)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let got: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_owned).collect();
    if got != header() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("header {:?}, expected {:?}", got.join(","), header().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let offset = rec.position().map_or(0, |p| p.byte());
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            offset,
            message,
        };
        if rec.len() != SCORE_DIMS + 1 {
            return Err(bad(format!("{} fields, expected {}", rec.len(), SCORE_DIMS + 1)));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let s = ScoreVector::from_slice(&values)?;
        if !s.is_finite() {
            return Err(bad("non-finite score".into()));
        }
        out.push((rec[0].to_string(), s));
    }
    Ok(out)
}
