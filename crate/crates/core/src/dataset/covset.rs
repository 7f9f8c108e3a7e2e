//! Reading and writing covset files.
//!
//! A covset is one JSON document:
//!
//! ```json
//! {"version": 1, "dim": 2,
//!  "subjects": [{"id": "S001", "metadata": {},
//!                "trials": [{"label": 1, "matrix": [2.0, 0.5, 1.0]}]}]}
//! ```
//!
//! `matrix` holds the lower triangle row by row (`a00, a10, a11, a20, ...`). A full
//! row-major `dim²` list is also accepted on read; it must be symmetric to
//! [`SYMMETRY_TOL`]. Paths ending in `.gz` are gzip-compressed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::SubjectData;
use crate::error::{Error, Result};
use crate::spd::{relative_asymmetry, symmetrize, Label, SpdMatrix, Trial, SYMMETRY_TOL};

pub const COVSET_VERSION: u32 = 1;

#[derive(Deserialize)]
struct RawCovset {
    version: u32,
    dim: usize,
    subjects: Vec<RawSubject>,
}

#[derive(Deserialize)]
struct RawSubject {
    id: String,
    #[serde(default)]
    metadata: Map<String, Value>,
    trials: Vec<RawTrial>,
}

#[derive(Serialize, Deserialize)]
struct RawTrial {
    label: Label,
    matrix: Vec<f64>,
}

#[derive(Serialize)]
struct CovsetOut<'a> {
    version: u32,
    dim: usize,
    subjects: Vec<SubjectOut<'a>>,
}

#[derive(Serialize)]
struct SubjectOut<'a> {
    id: &'a str,
    metadata: &'a Map<String, Value>,
    trials: Vec<RawTrial>,
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn parse_error(e: serde_json::Error) -> Error {
    if e.is_io() {
        return Error::Io(e.into());
    }
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads and validates a covset file.
pub fn covset_read(path: impl AsRef<Path>) -> Result<Vec<SubjectData>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut text = String::new();
    if is_gzip(path) {
        GzDecoder::new(BufReader::new(file)).read_to_string(&mut text)?;
    } else {
        BufReader::new(file).read_to_string(&mut text)?;
    }
    covset_from_str(&text)
}

/// Parses and validates covset JSON text.
pub fn covset_from_str(text: &str) -> Result<Vec<SubjectData>> {
    let raw: RawCovset = serde_json::from_str(text).map_err(parse_error)?;
    if raw.version != COVSET_VERSION {
        return Err(Error::input(format!(
            "unsupported covset version {} (expected {COVSET_VERSION})",
            raw.version
        )));
    }
    let dim = raw.dim;
    raw.subjects
        .into_iter()
        .map(|s| {
            let trials = s
                .trials
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    let cov = decode_matrix(&t.matrix, dim).map_err(|reason| Error::Validation {
                        subject: s.id.clone(),
                        trial: i,
                        reason,
                    })?;
                    Ok(Trial::new(cov, t.label))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SubjectData {
                id: s.id,
                trials,
                metadata: s.metadata,
            })
        })
        .collect()
}

fn decode_matrix(values: &[f64], dim: usize) -> std::result::Result<SpdMatrix, String> {
    if dim == 0 {
        return Err("covset dim is 0 but trials are present".into());
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(format!("non-finite entry {v}"));
    }
    let tri = dim * (dim + 1) / 2;
    let mat = if values.len() == tri {
        let mut m = DMatrix::zeros(dim, dim);
        let mut k = 0;
        for i in 0..dim {
            for j in 0..=i {
                m[(i, j)] = values[k];
                m[(j, i)] = values[k];
                k += 1;
            }
        }
        m
    } else if values.len() == dim * dim {
        let m = DMatrix::from_row_slice(dim, dim, values);
        let asym = relative_asymmetry(&m);
        if asym > SYMMETRY_TOL {
            return Err(format!("matrix is not symmetric (relative asymmetry {asym:.3e})"));
        }
        symmetrize(&m)
    } else {
        return Err(format!(
            "matrix has {} entries, expected {tri} (lower triangle) or {} (full) for dim {dim}",
            values.len(),
            dim * dim
        ));
    };
    SpdMatrix::new(mat).map_err(|e| e.to_string())
}

fn lower_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Serializes subjects as covset JSON (compact, newline-terminated).
pub fn covset_to_string(subjects: &[SubjectData]) -> Result<String> {
    let dim = subjects.iter().find_map(SubjectData::dim).unwrap_or(0);
    let mut out_subjects = Vec::with_capacity(subjects.len());
    for s in subjects {
        if let Some((i, t)) = s.trials.iter().enumerate().find(|(_, t)| t.cov.dim() != dim) {
            return Err(Error::Validation {
                subject: s.id.clone(),
                trial: i,
                reason: format!("dimension {} differs from the dataset dimension {dim}", t.cov.dim()),
            });
        }
        out_subjects.push(SubjectOut {
            id: &s.id,
            metadata: &s.metadata,
            trials: s
                .trials
                .iter()
                .map(|t| RawTrial {
                    label: t.label,
                    matrix: lower_triangle(t.cov.matrix()),
                })
                .collect(),
        });
    }
    let doc = CovsetOut {
        version: COVSET_VERSION,
        dim,
        subjects: out_subjects,
    };
    let mut text = serde_json::to_string(&doc).map_err(parse_error)?;
    text.push('\n');
    Ok(text)
}

/// Writes a covset file, gzip-compressed when the path ends in `.gz`.
pub fn covset_write(path: impl AsRef<Path>, subjects: &[SubjectData]) -> Result<()> {
    let path = path.as_ref();
    let text = covset_to_string(subjects)?;
    let file = BufWriter::new(File::create(path)?);
    if is_gzip(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(text.as_bytes())?;
        file.flush()?;
    }
    Ok(())
}
