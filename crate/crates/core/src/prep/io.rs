//! Dataset manifest and timeseries matrix files.
//!
//! Matrices come in two encodings, told apart by their first bytes:
//! * CSV: no header, one row per timestep, comma-separated values.
//! * Binary: `STGM`, `u16` version, `u32` rows, `u32` cols (all little-endian),
//!   then row-major little-endian `f32` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Label, SubjectRecord};
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"STGM";
pub const MATRIX_VERSION: u16 = 1;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub n_nodes: usize,
    pub subjects: Vec<ManifestSubject>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSubject {
    pub id: String,
    pub label: u8,
    /// Paths relative to the manifest's directory (or absolute).
    pub sessions: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Binary => "stgm",
        }
    }
}

fn format_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

pub fn encode_matrix(m: &DMatrix<f64>, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Binary => {
            let mut out = Vec::with_capacity(14 + m.len() * 4);
            out.extend_from_slice(MATRIX_MAGIC);
            out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
            out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    out.extend_from_slice(&(m[(r, c)] as f32).to_le_bytes());
                }
            }
            out
        }
        MatrixFormat::Csv => {
            let mut s = String::new();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if c > 0 {
                        s.push(',');
                    }
                    s.push_str(&(m[(r, c)] as f32).to_string());
                }
                s.push('\n');
            }
            s.into_bytes()
        }
    }
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    if bytes.starts_with(MATRIX_MAGIC) {
        decode_binary(bytes, path)
    } else {
        decode_csv(bytes, path)
    }
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    if bytes.len() < 14 {
        return Err(format_err(path, "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MATRIX_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let body = &bytes[14..];
    if body.len() != rows * cols * 4 {
        return Err(format_err(
            path,
            format!("{rows}x{cols} needs {} bytes of data, found {}", rows * cols * 4, body.len()),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn decode_csv(bytes: &[u8], path: &Path) -> Result<DMatrix<f64>> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            // values are stored at single precision in either format
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("line {}: bad number {field:?}", lineno + 1)))?;
            values.push(v as f64);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(format_err(
                    path,
                    format!("line {}: {width} columns, expected {c}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| format_err(path, "empty matrix"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes, path)
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>, format: MatrixFormat) -> Result<()> {
    write_atomic(path, &encode_matrix(m, format))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(format_err(path, format!("unsupported manifest version {}", manifest.version)));
    }
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Loads every subject listed in a manifest.
pub fn load_records(manifest_path: &Path) -> Result<Vec<SubjectRecord>> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .subjects
        .iter()
        .map(|s| {
            let label = Label::from_u8(s.label)
                .ok_or_else(|| format_err(manifest_path, format!("subject {}: label {}", s.id, s.label)))?;
            let sessions = s
                .sessions
                .iter()
                .map(|p| {
                    let m = read_matrix(&base.join(p))?;
                    if m.ncols() != manifest.n_nodes {
                        return Err(format_err(
                            &base.join(p),
                            format!("{} columns, manifest says {} nodes", m.ncols(), manifest.n_nodes),
                        ));
                    }
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SubjectRecord {
                subject_id: s.id.clone(),
                label,
                sessions,
            })
        })
        .collect()
}
