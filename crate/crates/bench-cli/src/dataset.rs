//! Dataset sources shared by `train`, `evaluate` and `generate`.

use std::path::{Path, PathBuf};

use dcrbm::data::{
    binarize_statistical, gen_bars_stripes, gen_shifting_bar, load_binary_matrix, FileFormat,
    LoadedMatrix,
};
use dcrbm::BinaryDataset;
use serde::{Deserialize, Serialize};

use crate::failure::{CliResult, Failure};

/// Where a dataset comes from. In spec files this is either
/// `{"generator": "shifting-bar", "n": 9, "b": 1}`,
/// `{"generator": "bars-stripes", "d": 3}` or
/// `{"file": "train.idx", "format": "idx", "limit": 1000, "binarize_seed": 7}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Generator(GeneratorSpec),
    File(FileSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorSpec {
    ShiftingBar { n: usize, b: usize },
    BarsStripes { d: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    pub file: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<FileFormat>,
    /// Keep only the first `limit` rows.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Seed for binarizing grayscale input (default 0).
    #[serde(default)]
    pub binarize_seed: Option<u64>,
    #[serde(default)]
    pub dim: Option<usize>,
}

impl GeneratorSpec {
    pub fn build(&self) -> CliResult<BinaryDataset> {
        Ok(match *self {
            GeneratorSpec::ShiftingBar { n, b } => gen_shifting_bar(n, b)?,
            GeneratorSpec::BarsStripes { d } => gen_bars_stripes(d)?,
        })
    }
}

impl DataSource {
    /// Resolves relative file paths against `base`.
    pub fn rebased(&self, base: &Path) -> DataSource {
        match self {
            DataSource::File(f) if f.file.is_relative() => DataSource::File(FileSpec {
                file: base.join(&f.file),
                ..f.clone()
            }),
            other => other.clone(),
        }
    }

    pub fn load(&self) -> CliResult<BinaryDataset> {
        match self {
            DataSource::Generator(g) => g.build(),
            DataSource::File(f) => load_file(f),
        }
    }

    /// Cheap checks that can run before any work starts.
    pub fn problems(&self, what: &str) -> Vec<String> {
        match self {
            DataSource::Generator(g) => match g.build() {
                Ok(_) => vec![],
                Err(e) => vec![format!("{what}: {e}")],
            },
            DataSource::File(f) => {
                let mut out = vec![];
                if !f.file.is_file() {
                    out.push(format!("{what}: file {} does not exist", f.file.display()));
                } else if f.format.is_none() && FileFormat::from_extension(&f.file).is_none() {
                    out.push(format!(
                        "{what}: cannot infer the format of {}; set \"format\"",
                        f.file.display()
                    ));
                }
                if f.limit == Some(0) {
                    out.push(format!("{what}: limit must be >= 1"));
                }
                out
            }
        }
    }
}

/// Parses `shifting-bar:9,1`, `bars-stripes:3` or a file path.
pub fn parse_source_arg(arg: &str) -> CliResult<DataSource> {
    let nums = |rest: &str| -> CliResult<Vec<usize>> {
        rest.split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Failure::validation(format!("bad generator argument '{arg}'")))
            })
            .collect()
    };
    if let Some(rest) = arg.strip_prefix("shifting-bar:") {
        match nums(rest)?[..] {
            [n, b] => return Ok(DataSource::Generator(GeneratorSpec::ShiftingBar { n, b })),
            _ => return Err(Failure::validation("shifting-bar takes N,B")),
        }
    }
    if let Some(rest) = arg.strip_prefix("bars-stripes:") {
        match nums(rest)?[..] {
            [d] => return Ok(DataSource::Generator(GeneratorSpec::BarsStripes { d })),
            _ => return Err(Failure::validation("bars-stripes takes D")),
        }
    }
    Ok(DataSource::File(FileSpec {
        file: arg.into(),
        format: None,
        limit: None,
        binarize_seed: None,
        dim: None,
    }))
}

pub fn resolve_format(path: &Path, explicit: Option<FileFormat>) -> CliResult<FileFormat> {
    explicit
        .or_else(|| FileFormat::from_extension(path))
        .ok_or_else(|| {
            Failure::validation(format!(
                "cannot infer the format of {}; pass --format idx|csv|json",
                path.display()
            ))
        })
}

pub fn load_file(f: &FileSpec) -> CliResult<BinaryDataset> {
    if !f.file.is_file() {
        return Err(Failure::validation(format!("file {} does not exist", f.file.display())));
    }
    let format = resolve_format(&f.file, f.format)?;
    let name = f
        .file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let data = match load_binary_matrix(&f.file, format, f.dim)? {
        LoadedMatrix::Binary(d) => d,
        LoadedMatrix::Grayscale(g) => {
            let g = match f.limit {
                Some(l) => g.head(l),
                None => g,
            };
            binarize_statistical(&g, &name, f.binarize_seed.unwrap_or(0))
        }
    };
    Ok(match f.limit {
        Some(l) => data.head(l),
        None => data,
    })
}
