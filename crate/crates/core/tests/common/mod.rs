#![allow(dead_code)]

use dcrbm::{BinaryPattern, ModelDims, RbmParams, RngStream};
use ndarray::{Array1, Array2};

/// Model with every parameter drawn from `N(0, sigma²)`.
pub fn random_params(m: usize, n: usize, sigma: f64, seed: u64) -> RbmParams {
    let mut rng = RngStream::new(seed, 77);
    let mut gauss = |len: usize| (0..len).map(|_| sigma * rng.standard_normal()).collect::<Vec<_>>();
    let w = Array2::from_shape_vec((n, m), gauss(n * m)).unwrap();
    let b = Array1::from(gauss(m));
    let c = Array1::from(gauss(n));
    RbmParams::from_parts(w, b, c).unwrap()
}

pub fn random_pattern(len: usize, rng: &mut RngStream) -> BinaryPattern {
    BinaryPattern::new((0..len).map(|_| rng.bernoulli(0.5)).collect()).unwrap()
}

pub fn all_patterns(len: usize) -> Vec<BinaryPattern> {
    (0..1u64 << len).map(|i| BinaryPattern::from_index(i, len)).collect()
}

pub fn dims(m: usize, n: usize) -> ModelDims {
    ModelDims::new(m, n).unwrap()
}
