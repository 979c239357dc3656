//! Manifest-driven loading and saving.
//!
//! Two matrix encodings are supported:
//! - `csv`: UTF-8, one sample per line, comma separated, `.` decimal point.
//! - `f32le`: a 16-byte header of two little-endian `u64` (rows, cols)
//!   followed by `rows * cols` little-endian `f32` values in row-major order.
//!
//! Labels are 0-based integers, one per line.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{MultiViewDataset, ViewMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Csv,
    F32le,
}

impl MatrixFormat {
    fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::F32le => "f32",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDescriptor {
    pub name: String,
    pub path: String,
    pub format: MatrixFormat,
    pub dim: usize,
}

/// On-disk description of a dataset. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub views: Vec<ViewDescriptor>,
    #[serde(default)]
    pub labels: Option<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.views.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: "no views declared".into(),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut views = Vec::with_capacity(manifest.views.len());
    for desc in &manifest.views {
        let file = base.join(&desc.path);
        let data = match desc.format {
            MatrixFormat::Csv => read_matrix_csv(&file)?,
            MatrixFormat::F32le => read_f32le(&file)?,
        };
        if data.nrows() != manifest.n {
            return Err(Error::Shape(format!(
                "view `{}` ({}) has {} rows but the manifest declares n = {}",
                desc.name,
                file.display(),
                data.nrows(),
                manifest.n
            )));
        }
        if data.ncols() != desc.dim {
            return Err(Error::Shape(format!(
                "view `{}` ({}) has {} columns but the manifest declares dim = {}",
                desc.name,
                file.display(),
                data.ncols(),
                desc.dim
            )));
        }
        views.push(ViewMatrix::new(desc.name.clone(), data)?);
    }

    let labels = match &manifest.labels {
        Some(p) => {
            let labels = read_labels(base.join(p))?;
            if labels.len() != manifest.n {
                return Err(Error::Shape(format!(
                    "label file has {} entries but the manifest declares n = {}",
                    labels.len(),
                    manifest.n
                )));
            }
            Some(labels)
        }
        None => None,
    };
    MultiViewDataset::new(views, labels)
}

/// Write every view plus labels into `dir` and return the manifest path.
pub fn write_dataset(ds: &MultiViewDataset, dir: impl AsRef<Path>, format: MatrixFormat) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut descriptors = Vec::with_capacity(ds.num_views());
    for (v, view) in ds.views().iter().enumerate() {
        let file = format!("view{}_{}.{}", v + 1, sanitize(view.name()), format.extension());
        let full = dir.join(&file);
        match format {
            MatrixFormat::Csv => write_matrix_csv(&full, view.data())?,
            MatrixFormat::F32le => write_f32le(&full, view.data())?,
        }
        descriptors.push(ViewDescriptor {
            name: view.name().to_string(),
            path: file,
            format,
            dim: view.dim(),
        });
    }
    let labels = match ds.labels() {
        Some(l) => {
            write_labels(dir.join("labels.csv"), l)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        n: ds.n(),
        views: descriptors,
        labels,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line + 1,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line + 1,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line + 1,
                message: format!("not a number: `{field}`"),
            })?;
            values.push(x);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row lengths checked"))
}

/// Shortest round-trip decimal representation, so reloading is value exact.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for row in m.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    w.write_all(b",")?;
                }
                first = false;
                write!(w, "{x}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn read_f32le(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    if bytes.len() < 16 {
        return Err(parse_err("file shorter than the 16-byte header".into()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| parse_err(format!("header {rows}x{cols} overflows")))?;
    if bytes.len() - 16 != expected {
        return Err(parse_err(format!(
            "header declares {rows}x{cols} but payload has {} bytes",
            bytes.len() - 16
        )));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("size checked"))
}

/// Values are narrowed to `f32`.
pub fn write_f32le(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = m.dim();
    let mut bytes = Vec::with_capacity(16 + rows * cols * 4);
    bytes.extend_from_slice(&(rows as u64).to_le_bytes());
    bytes.extend_from_slice(&(cols as u64).to_le_bytes());
    for x in m.iter() {
        bytes.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("not a 0-based label: `{}`", l.trim()),
            })
        })
        .collect()
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
