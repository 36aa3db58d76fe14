use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BinaryPattern;

use super::{BinaryDataset, GrayscaleMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    /// Big-endian IDX with unsigned-byte payload (`0x0000_08xx`).
    Idx,
    /// One sample per line, comma-separated.
    Csv,
    /// A JSON array of arrays.
    Json,
}

impl FileFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        if name.ends_with(".csv") {
            Some(FileFormat::Csv)
        } else if name.ends_with(".json") {
            Some(FileFormat::Json)
        } else if name.contains("idx") || name.ends_with("-ubyte") {
            Some(FileFormat::Idx)
        } else {
            None
        }
    }
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idx" => Ok(FileFormat::Idx),
            "csv" => Ok(FileFormat::Csv),
            "json" | "raw-json" => Ok(FileFormat::Json),
            other => Err(Error::invalid("file format", format!("unknown format {other:?}"))),
        }
    }
}

/// A loaded matrix: binary when every entry is 0 or 1, grayscale otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedMatrix {
    Binary(BinaryDataset),
    Grayscale(GrayscaleMatrix),
}

fn parse_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

struct RawMatrix {
    rows: usize,
    cols: usize,
    /// Row-major values.
    values: Vec<f64>,
    /// Divisor mapping integer intensities into `[0, 1]`.
    scale: f64,
}

fn read_idx(path: &Path, bytes: &[u8]) -> Result<RawMatrix> {
    if bytes.len() < 4 {
        return Err(parse_err(path, bytes.len() as u64, "truncated IDX magic number"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(parse_err(
            path,
            0,
            format!(
                "bad IDX magic number 0x{:02x}{:02x}{:02x}{:02x}",
                bytes[0], bytes[1], bytes[2], bytes[3]
            ),
        ));
    }
    if bytes[2] != 0x08 {
        return Err(parse_err(
            path,
            2,
            format!("unsupported IDX element type 0x{:02x} (only unsigned byte)", bytes[2]),
        ));
    }
    let ndims = bytes[3] as usize;
    if ndims == 0 {
        return Err(parse_err(path, 3, "IDX file declares zero dimensions"));
    }
    let mut cur = Cursor::new(&bytes[4..]);
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        let offset = 4 + 4 * k as u64;
        let d = cur
            .read_u32::<BigEndian>()
            .map_err(|_| parse_err(path, offset, "truncated IDX dimension field"))?;
        dims.push(d as usize);
    }
    let header = 4 + 4 * ndims;
    let rows = dims[0];
    let cols: usize = dims[1..].iter().product();
    let expected = rows * cols;
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(parse_err(
            path,
            (header + payload.len().min(expected)) as u64,
            format!(
                "IDX payload has {} bytes, dimensions {:?} need {}",
                payload.len(),
                dims,
                expected
            ),
        ));
    }
    let values = payload.iter().map(|&b| b as f64).collect();
    Ok(RawMatrix {
        rows,
        cols,
        values,
        scale: 255.0,
    })
}

fn finish_rows(path: &Path, rows: Vec<Vec<f64>>, declared: Option<usize>) -> Result<RawMatrix> {
    let cols = match (rows.first(), declared) {
        (Some(r), Some(m)) if r.len() != m => {
            return Err(Error::DimensionMismatch {
                what: "declared dimension",
                expected: m,
                got: r.len(),
            })
        }
        (Some(r), _) => r.len(),
        (None, Some(m)) => m,
        (None, None) => {
            return Err(Error::invalid(
                "dataset dimension",
                format!("{} is empty and no dimension was declared", path.display()),
            ))
        }
    };
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::DimensionMismatch {
                what: if i == 0 { "row length" } else { "row length (after first row)" },
                expected: cols,
                got: r.len(),
            });
        }
    }
    Ok(RawMatrix {
        rows: rows.len(),
        cols,
        values: rows.into_iter().flatten().collect(),
        scale: 1.0,
    })
}

fn read_csv(path: &Path, text: &str, declared: Option<usize>) -> Result<RawMatrix> {
    let mut rows = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let row = trimmed
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|e| {
                        parse_err(path, offset, format!("bad CSV cell {:?}: {e}", cell.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        offset += line.len() as u64;
    }
    finish_rows(path, rows, declared)
}

fn read_json(path: &Path, text: &str, declared: Option<usize>) -> Result<RawMatrix> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| {
        let offset = text
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(|l| l.len())
            .sum::<usize>()
            + e.column().saturating_sub(1);
        parse_err(path, offset as u64, e.to_string())
    })?;
    finish_rows(path, rows, declared)
}

fn classify(path: &Path, raw: RawMatrix) -> Result<LoadedMatrix> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    if raw.values.iter().all(|&x| x == 0.0 || x == 1.0) {
        let patterns = raw
            .values
            .chunks(raw.cols.max(1))
            .take(raw.rows)
            .map(|r| BinaryPattern::new(r.iter().map(|&x| x as u8).collect()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(LoadedMatrix::Binary(BinaryDataset::new(name, raw.cols, patterns)?));
    }
    let data = raw.values.iter().map(|&x| x / raw.scale).collect();
    Ok(LoadedMatrix::Grayscale(GrayscaleMatrix::new(raw.rows, raw.cols, data)?))
}

/// Loads a row-per-sample matrix. `declared_dim` fixes the row length (and
/// is the only source of it for an empty file). IDX byte intensities are
/// divided by 255 unless every byte is 0 or 1.
pub fn load_binary_matrix(
    path: impl AsRef<Path>,
    format: FileFormat,
    declared_dim: Option<usize>,
) -> Result<LoadedMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let raw = match format {
        FileFormat::Idx => {
            let raw = read_idx(path, &bytes)?;
            if let Some(m) = declared_dim {
                if m != raw.cols {
                    return Err(Error::DimensionMismatch {
                        what: "declared dimension",
                        expected: m,
                        got: raw.cols,
                    });
                }
            }
            raw
        }
        FileFormat::Csv | FileFormat::Json => {
            let text = String::from_utf8(bytes)
                .map_err(|e| parse_err(path, e.utf8_error().valid_up_to() as u64, "invalid UTF-8"))?;
            if format == FileFormat::Csv {
                read_csv(path, &text, declared_dim)?
            } else {
                read_json(path, &text, declared_dim)?
            }
        }
    };
    classify(path, raw)
}

/// Like [`load_binary_matrix`] but rejects non-binary content.
pub fn load_binary_dataset(
    path: impl AsRef<Path>,
    format: FileFormat,
    declared_dim: Option<usize>,
) -> Result<BinaryDataset> {
    match load_binary_matrix(path.as_ref(), format, declared_dim)? {
        LoadedMatrix::Binary(d) => Ok(d),
        LoadedMatrix::Grayscale(_) => Err(Error::invalid(
            "binary dataset",
            format!("{} contains values other than 0 and 1", path.as_ref().display()),
        )),
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Encodes an unsigned-byte IDX file with the given dimensions.
pub fn write_idx(path: impl AsRef<Path>, dims: &[usize], data: &[u8]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if dims.is_empty() || dims.len() > 255 || expected != data.len() {
        return Err(Error::invalid(
            "IDX dimensions",
            format!("{dims:?} do not describe {} bytes", data.len()),
        ));
    }
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&[0, 0, 0x08, dims.len() as u8]);
    for &d in dims {
        out.write_u32::<BigEndian>(d as u32).expect("write to vec");
    }
    out.extend_from_slice(data);
    write_atomic(path, &out)
}

pub const MANIFEST_FORMAT: &str = "dcrbm-dataset-manifest";

/// Sidecar describing a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub name: String,
    pub dim: usize,
    pub rows: usize,
    pub file_format: FileFormat,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

pub fn manifest_path(data_path: &Path) -> PathBuf {
    let mut s = data_path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn read_manifest(data_path: &Path) -> Result<DatasetManifest> {
    let path = manifest_path(data_path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a binary dataset in `format` plus its manifest sidecar. Output is
/// a pure function of the inputs.
pub fn write_dataset(
    dataset: &BinaryDataset,
    path: impl AsRef<Path>,
    format: FileFormat,
    generator: Option<serde_json::Value>,
) -> Result<DatasetManifest> {
    let path = path.as_ref();
    match format {
        FileFormat::Csv => {
            let mut text = String::new();
            for p in dataset.patterns() {
                let cells: Vec<&str> = p
                    .as_slice()
                    .iter()
                    .map(|&b| if b == 1 { "1" } else { "0" })
                    .collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write_atomic(path, text.as_bytes())?;
        }
        FileFormat::Json => {
            let rows: Vec<&[u8]> = dataset.patterns().iter().map(|p| p.as_slice()).collect();
            write_atomic(path, serde_json::to_string(&rows)?.as_bytes())?;
        }
        FileFormat::Idx => {
            let data: Vec<u8> = dataset
                .patterns()
                .iter()
                .flat_map(|p| p.as_slice().iter().copied())
                .collect();
            write_idx(path, &[dataset.len(), dataset.dim()], &data)?;
        }
    }
    let manifest = DatasetManifest {
        format: MANIFEST_FORMAT.to_string(),
        version: 1,
        name: dataset.name().to_string(),
        dim: dataset.dim(),
        rows: dataset.len(),
        file_format: format,
        file: path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        generator,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(manifest_path(path), text.as_bytes())?;
    Ok(manifest)
}
