//! Datasets: the synthetic benchmark generators, file loading, statistical
//! binarization and the per-epoch shuffled mini-batch iterator.

mod generators;
mod io;

use ndarray::Array1;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::BinaryPattern;
use crate::rng::{streams, RngStream};

pub use generators::{gen_bars_stripes, gen_shifting_bar};
pub use io::{
    load_binary_dataset, load_binary_matrix, manifest_path, read_manifest, write_atomic, write_dataset,
    write_idx, DatasetManifest, FileFormat, LoadedMatrix, MANIFEST_FORMAT,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryDataset {
    name: String,
    m: usize,
    patterns: Vec<BinaryPattern>,
}

impl BinaryDataset {
    pub fn new(name: impl Into<String>, m: usize, patterns: Vec<BinaryPattern>) -> Result<Self> {
        for p in &patterns {
            check_len("dataset pattern", m, p.len())?;
        }
        Ok(Self {
            name: name.into(),
            m,
            patterns,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[BinaryPattern] {
        &self.patterns
    }

    /// Per-unit mean; zeros for an empty dataset.
    pub fn mean(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.m);
        for p in &self.patterns {
            for (o, &b) in out.iter_mut().zip(p.as_slice()) {
                *o += b as f64;
            }
        }
        if !self.patterns.is_empty() {
            out.mapv_inplace(|x| x / self.patterns.len() as f64);
        }
        out
    }

    /// The first `count` patterns.
    pub fn head(&self, count: usize) -> Self {
        Self {
            name: self.name.clone(),
            m: self.m,
            patterns: self.patterns.iter().take(count).cloned().collect(),
        }
    }
}

/// Row-per-sample intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GrayscaleMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("grayscale matrix entries", rows * cols, data.len())?;
        if let Some(pos) = data.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid(
                "grayscale intensity",
                format!("entry {pos} is {}, outside [0, 1]", data[pos]),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn head(&self, count: usize) -> Self {
        let rows = count.min(self.rows);
        Self {
            rows,
            cols: self.cols,
            data: self.data[..rows * self.cols].to_vec(),
        }
    }
}

/// Samples every pixel once as `Bernoulli(intensity)`. The draws come from
/// the dedicated binarization stream of `seed`, so the binary dataset is
/// fixed for a given seed.
pub fn binarize_statistical(gray: &GrayscaleMatrix, name: &str, seed: u64) -> BinaryDataset {
    let mut rng = RngStream::new(seed, streams::BINARIZE);
    let patterns = (0..gray.rows)
        .map(|i| {
            let bits = gray.row(i).iter().map(|&p| rng.bernoulli(p)).collect();
            BinaryPattern::new(bits).expect("sampled bits are binary")
        })
        .collect();
    BinaryDataset {
        name: name.to_string(),
        m: gray.cols,
        patterns,
    }
}

/// Permutation of `0..len` for `(seed, epoch)`.
pub fn epoch_permutation(len: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut rng = RngStream::new(seed, streams::SHUFFLE + epoch);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng.raw());
    order
}

/// Shuffles the dataset for `(seed, epoch)` and chunks it into batches of
/// `batch_size`; the final short batch is kept. `batch_size >= N` gives a
/// single full batch.
pub fn minibatches(
    dataset: &BinaryDataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<BinaryPattern>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size", "must be >= 1"));
    }
    let order = epoch_permutation(dataset.len(), seed, epoch);
    Ok(order
        .chunks(batch_size)
        .map(|chunk| chunk.iter().map(|&i| dataset.patterns[i].clone()).collect())
        .collect())
}
