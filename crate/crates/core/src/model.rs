//! Binary RBM parameters, the energy function, the layer conditionals and
//! the two convex pieces of the log-likelihood:
//!
//! * `g(θ, v) = log Σ_h exp(-E(v, h))` (free-energy term of a single sample)
//! * `f(θ) = log Z(θ)`
//!
//! so that `log p(v) = g(θ, v) - f(θ)`. Exact versions of `f` and `∇f` are
//! computed by enumerating the smaller layer.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::centering::CenteringState;
use crate::error::{check_len, Error, Result};
use crate::math::{sigmoid, softplus, LogSumExp};

/// Default cap on `min(m, n)` for exact enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelDims {
    /// Visible units.
    pub m: usize,
    /// Hidden units.
    pub n: usize,
}

impl ModelDims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("model dims", format!("need m, n >= 1 (got m={m}, n={n})")));
        }
        Ok(Self { m, n })
    }

    /// Number of scalar parameters, `mn + m + n`.
    pub fn num_params(&self) -> usize {
        self.m * self.n + self.m + self.n
    }
}

/// A vector of exact 0/1 values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BinaryPattern(Vec<u8>);

impl BinaryPattern {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(
                "binary pattern",
                format!("entry {pos} is {}, expected 0 or 1", bits[pos]),
            ));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1; len])
    }

    /// Pattern whose bit `j` is bit `j` of `index`.
    pub fn from_index(index: u64, len: usize) -> Self {
        Self((0..len).map(|j| ((index >> j) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (j, &b)| acc | ((b as u64) << j))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_f64(&self) -> Array1<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }
}

impl TryFrom<Vec<u8>> for BinaryPattern {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<BinaryPattern> for Vec<u8> {
    fn from(p: BinaryPattern) -> Self {
        p.0
    }
}

/// A `∇θ`-shaped triple. Records returned by [`RbmParams::grad_g`],
/// [`RbmParams::exact_grad_f`] and the sampler's estimator are expectations
/// of products of binary variables, so every entry is in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
    pub dc: Array1<f64>,
}

impl GradientRecord {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dw: Array2::zeros((dims.n, dims.m)),
            db: Array1::zeros(dims.m),
            dc: Array1::zeros(dims.n),
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            m: self.db.len(),
            n: self.dc.len(),
        }
    }

    /// All entries in parameter order: W row-major, then b, then c.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.dw
            .iter()
            .chain(self.db.iter())
            .chain(self.dc.iter())
            .copied()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &GradientRecord) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Accumulates `p(h|v) v^T`, `v`, `p(h|v)` for one visible configuration.
    pub(crate) fn accumulate_outer(&mut self, v: &[u8], hidden_probs: &[f64]) {
        for (row, &p) in self.dw.rows_mut().into_iter().zip(hidden_probs) {
            for (w, &x) in row.into_iter().zip(v) {
                *w += p * x as f64;
            }
        }
        for (b, &x) in self.db.iter_mut().zip(v) {
            *b += x as f64;
        }
        for (c, &p) in self.dc.iter_mut().zip(hidden_probs) {
            *c += p;
        }
    }

    pub(crate) fn divide_inplace(&mut self, denom: f64) {
        self.dw.mapv_inplace(|x| x / denom);
        self.db.mapv_inplace(|x| x / denom);
        self.dc.mapv_inplace(|x| x / denom);
    }

    /// `self - other`, elementwise.
    pub fn difference(&self, other: &GradientRecord) -> GradientRecord {
        GradientRecord {
            dw: &self.dw - &other.dw,
            db: &self.db - &other.db,
            dc: &self.dc - &other.dc,
        }
    }
}

/// `θ = {W ∈ R^{n×m}, b ∈ R^m, c ∈ R^n}`; `W[i][j]` couples hidden `i` and
/// visible `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsDocument", into = "ParamsDocument")]
pub struct RbmParams {
    dims: ModelDims,
    weights: Array2<f64>,
    visible_bias: Array1<f64>,
    hidden_bias: Array1<f64>,
}

impl RbmParams {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            dims,
            weights: Array2::zeros((dims.n, dims.m)),
            visible_bias: Array1::zeros(dims.m),
            hidden_bias: Array1::zeros(dims.n),
        }
    }

    pub fn from_parts(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
    ) -> Result<Self> {
        let (n, m) = weights.dim();
        let dims = ModelDims::new(m, n)?;
        check_len("visible bias", m, visible_bias.len())?;
        check_len("hidden bias", n, hidden_bias.len())?;
        let params = Self {
            dims,
            weights: weights.as_standard_layout().into_owned(),
            visible_bias,
            hidden_bias,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("RBM parameters"));
        }
        Ok(params)
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn visible_bias(&self) -> ArrayView1<'_, f64> {
        self.visible_bias.view()
    }

    pub fn hidden_bias(&self) -> ArrayView1<'_, f64> {
        self.hidden_bias.view()
    }

    pub fn weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        self.weights.view_mut()
    }

    pub fn visible_bias_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.visible_bias.view_mut()
    }

    pub fn hidden_bias_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.hidden_bias.view_mut()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|x| x.is_finite())
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
    }

    /// `θ ← θ + step · grad`.
    pub fn ascend(&mut self, grad: &GradientRecord, step: f64) {
        self.weights.scaled_add(step, &grad.dw);
        self.visible_bias.scaled_add(step, &grad.db);
        self.hidden_bias.scaled_add(step, &grad.dc);
    }

    pub(crate) fn weight_row(&self, i: usize) -> &[f64] {
        let m = self.dims.m;
        &self.weights.as_slice().expect("standard layout")[i * m..(i + 1) * m]
    }

    fn check_visible(&self, v: &BinaryPattern) -> Result<()> {
        check_len("visible pattern", self.dims.m, v.len())
    }

    fn check_hidden(&self, h: &BinaryPattern) -> Result<()> {
        check_len("hidden pattern", self.dims.n, h.len())
    }

    /// `E(v, h) = -Σ_ij w_ij h_i v_j - Σ_j b_j v_j - Σ_i c_i h_i`.
    pub fn energy(&self, v: &BinaryPattern, h: &BinaryPattern) -> Result<f64> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let v = v.as_slice();
        let h = h.as_slice();
        let mut e = 0.0;
        for (i, &hi) in h.iter().enumerate() {
            if hi == 1 {
                let row = self.weight_row(i);
                e -= row.iter().zip(v).map(|(w, &x)| w * x as f64).sum::<f64>();
                e -= self.hidden_bias[i];
            }
        }
        e -= self
            .visible_bias
            .iter()
            .zip(v)
            .map(|(b, &x)| b * x as f64)
            .sum::<f64>();
        Ok(e)
    }

    /// Writes `Σ_j w_ij (v_j - μ_j) + c_i` into `out`. The `None` branch
    /// uses `v_j` directly; `v_j - 0.0 == v_j` exactly, so zero offsets and
    /// no offsets give bit-identical results.
    pub(crate) fn hidden_preactivation_into(&self, v: &[u8], mu: Option<&[f64]>, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.weight_row(i);
            let dot: f64 = match mu {
                None => row.iter().zip(v).map(|(w, &x)| w * x as f64).sum(),
                Some(mu) => row
                    .iter()
                    .zip(v)
                    .zip(mu)
                    .map(|((w, &x), mu)| w * (x as f64 - mu))
                    .sum(),
            };
            *o = dot + self.hidden_bias[i];
        }
    }

    /// Writes `Σ_i w_ij (h_i - λ_i) + b_j` into `out`.
    pub(crate) fn visible_preactivation_into(
        &self,
        h: &[u8],
        lambda: Option<&[f64]>,
        out: &mut [f64],
    ) {
        out.fill(0.0);
        for (i, &hi) in h.iter().enumerate() {
            let coef = match lambda {
                None => hi as f64,
                Some(lambda) => hi as f64 - lambda[i],
            };
            for (o, w) in out.iter_mut().zip(self.weight_row(i)) {
                *o += w * coef;
            }
        }
        for (o, b) in out.iter_mut().zip(self.visible_bias.iter()) {
            *o += b;
        }
    }

    pub(crate) fn hidden_probs_into(&self, v: &[u8], offsets: Option<&CenteringState>, out: &mut [f64]) {
        self.hidden_preactivation_into(v, offsets.map(|o| o.mu_slice()), out);
        for x in out.iter_mut() {
            *x = sigmoid(*x);
        }
    }

    pub(crate) fn visible_probs_into(&self, h: &[u8], offsets: Option<&CenteringState>, out: &mut [f64]) {
        self.visible_preactivation_into(h, offsets.map(|o| o.lambda_slice()), out);
        for x in out.iter_mut() {
            *x = sigmoid(*x);
        }
    }

    fn check_offsets(&self, offsets: Option<&CenteringState>) -> Result<()> {
        if let Some(o) = offsets {
            check_len("visible offset", self.dims.m, o.mu().len())?;
            check_len("hidden offset", self.dims.n, o.lambda().len())?;
        }
        Ok(())
    }

    /// `p(h_i = 1 | v) = σ(Σ_j w_ij (v_j - μ_j) + c_i)`; `μ = 0` without offsets.
    pub fn hidden_conditional(
        &self,
        v: &BinaryPattern,
        offsets: Option<&CenteringState>,
    ) -> Result<Array1<f64>> {
        self.check_visible(v)?;
        self.check_offsets(offsets)?;
        let mut out = Array1::zeros(self.dims.n);
        self.hidden_probs_into(v.as_slice(), offsets, out.as_slice_mut().unwrap());
        Ok(out)
    }

    /// `p(v_j = 1 | h) = σ(Σ_i w_ij (h_i - λ_i) + b_j)`; `λ = 0` without offsets.
    pub fn visible_conditional(
        &self,
        h: &BinaryPattern,
        offsets: Option<&CenteringState>,
    ) -> Result<Array1<f64>> {
        self.check_hidden(h)?;
        self.check_offsets(offsets)?;
        let mut out = Array1::zeros(self.dims.m);
        self.visible_probs_into(h.as_slice(), offsets, out.as_slice_mut().unwrap());
        Ok(out)
    }

    pub(crate) fn g_value_raw(&self, v: &[u8], scratch: &mut [f64]) -> f64 {
        self.hidden_preactivation_into(v, None, scratch);
        let bv: f64 = self
            .visible_bias
            .iter()
            .zip(v)
            .map(|(b, &x)| b * x as f64)
            .sum();
        bv + scratch.iter().map(|&a| softplus(a)).sum::<f64>()
    }

    /// `g(θ, v) = b·v + Σ_i softplus(Σ_j w_ij v_j + c_i)`, the hidden layer
    /// marginalized analytically.
    pub fn g_value(&self, v: &BinaryPattern) -> Result<f64> {
        self.check_visible(v)?;
        let mut scratch = vec![0.0; self.dims.n];
        Ok(self.g_value_raw(v.as_slice(), &mut scratch))
    }

    /// `∇g(θ, v)`: `dW = p(h|v) v^T`, `db = v`, `dc = p(h|v)`.
    pub fn grad_g(&self, v: &BinaryPattern) -> Result<GradientRecord> {
        let probs = self.hidden_conditional(v, None)?;
        let mut grad = GradientRecord::zeros(self.dims);
        grad.accumulate_outer(v.as_slice(), probs.as_slice().unwrap());
        Ok(grad)
    }

    /// Log-weight of hidden configuration `h` with the visible layer summed out:
    /// `c·h + Σ_j softplus(Σ_i w_ij h_i + b_j)`.
    fn hidden_free_term(&self, h: &[u8], scratch: &mut [f64]) -> f64 {
        self.visible_preactivation_into(h, None, scratch);
        let ch: f64 = self
            .hidden_bias
            .iter()
            .zip(h)
            .map(|(c, &x)| c * x as f64)
            .sum();
        ch + scratch.iter().map(|&a| softplus(a)).sum::<f64>()
    }

    fn check_cap(&self, cap: usize) -> Result<()> {
        let size = self.dims.m.min(self.dims.n);
        if size > cap || size >= 64 {
            Err(Error::IntractableSize { size, cap })
        } else {
            Ok(())
        }
    }

    fn enumerate_visible(&self) -> bool {
        self.dims.m <= self.dims.n
    }

    /// Exact `log Z` with the default enumeration cap.
    pub fn exact_log_partition(&self) -> Result<f64> {
        self.exact_log_partition_capped(DEFAULT_ENUMERATION_CAP)
    }

    /// Exact `log Z`, enumerating `2^min(m, n)` states of the smaller layer.
    pub fn exact_log_partition_capped(&self, cap: usize) -> Result<f64> {
        self.check_cap(cap)?;
        let mut acc = LogSumExp::default();
        if self.enumerate_visible() {
            let mut scratch = vec![0.0; self.dims.n];
            for idx in 0..1u64 << self.dims.m {
                let v = BinaryPattern::from_index(idx, self.dims.m);
                acc.push(self.g_value_raw(v.as_slice(), &mut scratch));
            }
        } else {
            let mut scratch = vec![0.0; self.dims.m];
            for idx in 0..1u64 << self.dims.n {
                let h = BinaryPattern::from_index(idx, self.dims.n);
                acc.push(self.hidden_free_term(h.as_slice(), &mut scratch));
            }
        }
        Ok(acc.value())
    }

    /// `log p(v) = g(θ, v) - log Z(θ)`.
    pub fn exact_log_likelihood(&self, v: &BinaryPattern) -> Result<f64> {
        let g = self.g_value(v)?;
        Ok(g - self.exact_log_partition()?)
    }

    /// `∇f(θ) = E_{p(v,h)}[h v^T, v, h]`, computed by enumeration.
    pub fn exact_grad_f(&self) -> Result<GradientRecord> {
        self.exact_grad_f_capped(DEFAULT_ENUMERATION_CAP)
    }

    pub fn exact_grad_f_capped(&self, cap: usize) -> Result<GradientRecord> {
        let log_z = self.exact_log_partition_capped(cap)?;
        let ModelDims { m, n } = self.dims;
        let mut grad = GradientRecord::zeros(self.dims);
        if self.enumerate_visible() {
            let mut scratch = vec![0.0; n];
            let mut probs = vec![0.0; n];
            for idx in 0..1u64 << m {
                let v = BinaryPattern::from_index(idx, m);
                let weight = (self.g_value_raw(v.as_slice(), &mut scratch) - log_z).exp();
                self.hidden_probs_into(v.as_slice(), None, &mut probs);
                for p in probs.iter_mut() {
                    *p *= weight;
                }
                for (row, &p) in grad.dw.rows_mut().into_iter().zip(&probs) {
                    for (g, &x) in row.into_iter().zip(v.as_slice()) {
                        *g += p * x as f64;
                    }
                }
                for (g, &x) in grad.db.iter_mut().zip(v.as_slice()) {
                    *g += weight * x as f64;
                }
                for (g, &p) in grad.dc.iter_mut().zip(&probs) {
                    *g += p;
                }
            }
        } else {
            let mut scratch = vec![0.0; m];
            let mut probs = vec![0.0; m];
            for idx in 0..1u64 << n {
                let h = BinaryPattern::from_index(idx, n);
                let weight = (self.hidden_free_term(h.as_slice(), &mut scratch) - log_z).exp();
                self.visible_probs_into(h.as_slice(), None, &mut probs);
                for p in probs.iter_mut() {
                    *p *= weight;
                }
                for (row, &hi) in grad.dw.rows_mut().into_iter().zip(h.as_slice()) {
                    if hi == 1 {
                        for (g, &p) in row.into_iter().zip(&probs) {
                            *g += p;
                        }
                    }
                }
                for (g, &p) in grad.db.iter_mut().zip(&probs) {
                    *g += p;
                }
                for (g, &x) in grad.dc.iter_mut().zip(h.as_slice()) {
                    *g += weight * x as f64;
                }
            }
        }
        // the weights sum to 1 only up to rounding; each entry is an
        // expectation of a {0,1} product
        grad.dw.mapv_inplace(|x| x.clamp(0.0, 1.0));
        grad.db.mapv_inplace(|x| x.clamp(0.0, 1.0));
        grad.dc.mapv_inplace(|x| x.clamp(0.0, 1.0));
        Ok(grad)
    }

    /// Mean exact log-likelihood over `testset` (log Z computed once).
    pub fn atll_exact(&self, testset: &[BinaryPattern]) -> Result<f64> {
        self.atll_exact_capped(testset, DEFAULT_ENUMERATION_CAP)
    }

    pub fn atll_exact_capped(&self, testset: &[BinaryPattern], cap: usize) -> Result<f64> {
        if testset.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let log_z = self.exact_log_partition_capped(cap)?;
        let mut total = 0.0;
        for v in testset {
            total += self.g_value(v)? - log_z;
        }
        Ok(total / testset.len() as f64)
    }
}

pub const PARAMS_FORMAT: &str = "dcrbm-params";
pub const PARAMS_VERSION: u32 = 1;

/// On-disk form of [`RbmParams`]: `W` as `n` rows of `m` values.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamsDocument {
    format: String,
    version: u32,
    m: usize,
    n: usize,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl From<RbmParams> for ParamsDocument {
    fn from(p: RbmParams) -> Self {
        ParamsDocument {
            format: PARAMS_FORMAT.to_string(),
            version: PARAMS_VERSION,
            m: p.dims.m,
            n: p.dims.n,
            w: p.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            b: p.visible_bias.to_vec(),
            c: p.hidden_bias.to_vec(),
        }
    }
}

impl TryFrom<ParamsDocument> for RbmParams {
    type Error = Error;

    fn try_from(doc: ParamsDocument) -> Result<Self> {
        if doc.format != PARAMS_FORMAT {
            return Err(Error::invalid("params format", doc.format));
        }
        if doc.version != PARAMS_VERSION {
            return Err(Error::invalid(
                "params version",
                format!("unsupported version {}", doc.version),
            ));
        }
        check_len("weight rows", doc.n, doc.w.len())?;
        let mut flat = Vec::with_capacity(doc.n * doc.m);
        for row in &doc.w {
            check_len("weight row", doc.m, row.len())?;
            flat.extend_from_slice(row);
        }
        let weights = Array2::from_shape_vec((doc.n, doc.m), flat)
            .map_err(|e| Error::invalid("weights", e.to_string()))?;
        RbmParams::from_parts(weights, Array1::from(doc.b), Array1::from(doc.c))
    }
}
