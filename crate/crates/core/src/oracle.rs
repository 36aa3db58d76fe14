//! Brute-force reference computations, deliberately written without the
//! library's fast paths: joint `(v, h)` enumeration, direct energy sums,
//! finite differences and the exact Gibbs kernel. Only usable for tiny models.

use crate::math::log_sum_exp;
use crate::model::{BinaryPattern, GradientRecord, RbmParams};

/// Guard for the `2^(m+n)` joint enumeration.
pub const JOINT_CAP: usize = 22;

fn bit(index: u64, k: usize) -> f64 {
    ((index >> k) & 1) as f64
}

/// `E(v, h)` as the literal triple sum.
pub fn energy_direct(params: &RbmParams, v: &[f64], h: &[f64]) -> f64 {
    let w = params.weights();
    let b = params.visible_bias();
    let c = params.hidden_bias();
    let mut e = 0.0;
    for i in 0..h.len() {
        for j in 0..v.len() {
            e -= h[i] * w[[i, j]] * v[j];
        }
        e -= c[i] * h[i];
    }
    for j in 0..v.len() {
        e -= b[j] * v[j];
    }
    e
}

fn pattern(index: u64, len: usize) -> Vec<f64> {
    (0..len).map(|k| bit(index, k)).collect()
}

/// `-E(v, h)` for every joint state, indexed `v_index * 2^n + h_index`.
fn joint_log_weights(params: &RbmParams) -> Vec<f64> {
    let d = params.dims();
    assert!(d.m + d.n <= JOINT_CAP, "joint enumeration too large");
    let mut out = Vec::with_capacity(1 << (d.m + d.n));
    for vi in 0..1u64 << d.m {
        let v = pattern(vi, d.m);
        for hi in 0..1u64 << d.n {
            out.push(-energy_direct(params, &v, &pattern(hi, d.n)));
        }
    }
    out
}

/// `log Z` by summing `exp(-E)` over all `2^(m+n)` joint states.
pub fn log_partition_joint(params: &RbmParams) -> f64 {
    log_sum_exp(&joint_log_weights(params))
}

/// Exact marginal `p(v)` for all `2^m` visible states, using the
/// little-endian index of [`BinaryPattern::from_index`].
pub fn visible_distribution(params: &RbmParams) -> Vec<f64> {
    let d = params.dims();
    let lw = joint_log_weights(params);
    let log_z = log_sum_exp(&lw);
    lw.chunks(1 << d.n)
        .map(|row| (log_sum_exp(row) - log_z).exp())
        .collect()
}

/// `log p(v)` by joint enumeration.
pub fn log_likelihood_joint(params: &RbmParams, v: &BinaryPattern) -> f64 {
    let d = params.dims();
    let vf = v.to_f64().to_vec();
    let row: Vec<f64> = (0..1u64 << d.n)
        .map(|hi| -energy_direct(params, &vf, &pattern(hi, d.n)))
        .collect();
    log_sum_exp(&row) - log_partition_joint(params)
}

/// Mean `log p(v)` over a test set by joint enumeration.
pub fn atll_joint(params: &RbmParams, testset: &[BinaryPattern]) -> f64 {
    let log_z = log_partition_joint(params);
    let d = params.dims();
    let total: f64 = testset
        .iter()
        .map(|v| {
            let vf = v.to_f64().to_vec();
            let row: Vec<f64> = (0..1u64 << d.n)
                .map(|hi| -energy_direct(params, &vf, &pattern(hi, d.n)))
                .collect();
            log_sum_exp(&row) - log_z
        })
        .sum();
    total / testset.len() as f64
}

/// Central finite differences of `objective` w.r.t. every parameter.
pub fn finite_difference<F>(params: &RbmParams, step: f64, objective: F) -> GradientRecord
where
    F: Fn(&RbmParams) -> f64,
{
    let d = params.dims();
    let mut grad = GradientRecord::zeros(d);
    let diff = |mutate: &dyn Fn(&mut RbmParams, f64)| {
        let mut plus = params.clone();
        mutate(&mut plus, step);
        let mut minus = params.clone();
        mutate(&mut minus, -step);
        (objective(&plus) - objective(&minus)) / (2.0 * step)
    };
    for i in 0..d.n {
        for j in 0..d.m {
            grad.dw[[i, j]] = diff(&|p, s| p.weights_mut()[[i, j]] += s);
        }
    }
    for j in 0..d.m {
        grad.db[j] = diff(&|p, s| p.visible_bias_mut()[j] += s);
    }
    for i in 0..d.n {
        grad.dc[i] = diff(&|p, s| p.hidden_bias_mut()[i] += s);
    }
    grad
}

/// Largest entrywise relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &GradientRecord, b: &GradientRecord, floor: f64) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Row-stochastic `2^m × 2^m` matrix of one block-Gibbs transition
/// `v → h → v'`, computed from the conditionals written out directly.
pub fn gibbs_kernel(params: &RbmParams) -> Vec<Vec<f64>> {
    let d = params.dims();
    let w = params.weights();
    let b = params.visible_bias();
    let c = params.hidden_bias();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let states = 1u64 << d.m;
    let mut kernel = vec![vec![0.0; states as usize]; states as usize];
    for vi in 0..states {
        let v = pattern(vi, d.m);
        let ph: Vec<f64> = (0..d.n)
            .map(|i| sig(c[i] + (0..d.m).map(|j| w[[i, j]] * v[j]).sum::<f64>()))
            .collect();
        for hi in 0..1u64 << d.n {
            let h = pattern(hi, d.n);
            let p_h: f64 = (0..d.n).map(|i| if h[i] == 1.0 { ph[i] } else { 1.0 - ph[i] }).product();
            let pv: Vec<f64> = (0..d.m)
                .map(|j| sig(b[j] + (0..d.n).map(|i| w[[i, j]] * h[i]).sum::<f64>()))
                .collect();
            for ui in 0..states {
                let u = pattern(ui, d.m);
                let p_u: f64 =
                    (0..d.m).map(|j| if u[j] == 1.0 { pv[j] } else { 1.0 - pv[j] }).product();
                kernel[vi as usize][ui as usize] += p_h * p_u;
            }
        }
    }
    kernel
}

/// `π K` for a row vector `π`.
pub fn apply_kernel(dist: &[f64], kernel: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; dist.len()];
    for (p, row) in dist.iter().zip(kernel) {
        for (o, k) in out.iter_mut().zip(row) {
            *o += p * k;
        }
    }
    out
}

/// Exact samples from a discrete distribution by inverse CDF on uniforms.
pub fn sample_exact(dist: &[f64], uniforms: impl IntoIterator<Item = f64>) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for p in dist {
        acc += p;
        cdf.push(acc);
    }
    uniforms
        .into_iter()
        .map(|u| {
            let target = u * acc;
            cdf.partition_point(|&x| x <= target).min(dist.len() - 1)
        })
        .collect()
}

/// Pearson chi-square statistic of `counts` against probabilities `expected`,
/// pooling cells whose expected count is below `min_expected`. Returns the
/// statistic and the degrees of freedom.
pub fn chi_square(counts: &[usize], expected: &[f64], min_expected: f64) -> (f64, usize) {
    let total: usize = counts.iter().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pool_obs, mut pool_exp) = (0.0, 0.0);
    for (&o, &p) in counts.iter().zip(expected) {
        let e = p * total;
        if e < min_expected {
            pool_obs += o as f64;
            pool_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_exp > 0.0 {
        stat += (pool_obs - pool_exp).powi(2) / pool_exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// Upper critical value of chi-square with `dof` degrees of freedom at the
/// given standard-normal quantile `z` (Wilson–Hilferty approximation).
pub fn chi_square_critical(dof: usize, z: f64) -> f64 {
    let k = dof.max(1) as f64;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}
