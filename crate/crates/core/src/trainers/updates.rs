//! Parameter updates for one mini-batch.
//!
//! Every rule ascends the log-likelihood with the batch-mean gradient
//! `pos - neg`, where `pos` is the data-side statistic `∇g` and `neg` the
//! chain-endpoint estimate of `∇f`. The sums are taken in sample order and
//! divided by the batch size once, in the same way for every rule, so that
//! degenerate configurations of one rule reproduce another bit for bit.

use ndarray::{Array1, Array2};

use crate::centering::CenteringState;
use crate::error::{check_len, Error, Result};
use crate::model::{BinaryPattern, GradientRecord, RbmParams};
use crate::rng::{RngPosition, RngStream};
use crate::sampler::{run_chain_inplace, ChainSnapshot, ChainState, GibbsScratch};

use super::config::TrainConfig;

/// One random stream per batch slot; slot `i` uses stream id `i`.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    seed: u64,
    streams: Vec<RngStream>,
}

impl ChainStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            streams: Vec::new(),
        }
    }

    pub fn slot(&mut self, i: usize) -> &mut RngStream {
        while self.streams.len() <= i {
            let id = self.streams.len() as u64;
            self.streams.push(RngStream::new(self.seed, id));
        }
        &mut self.streams[i]
    }

    /// Total uniform draws consumed over all slots.
    pub fn total_draws(&self) -> u64 {
        self.streams.iter().map(RngStream::draws).sum()
    }

    pub fn positions(&self) -> Vec<RngPosition> {
        self.streams.iter().map(RngStream::position).collect()
    }

    pub fn restore(seed: u64, positions: &[RngPosition]) -> Self {
        Self {
            seed,
            streams: positions.iter().map(|&p| RngStream::restore(p)).collect(),
        }
    }
}

/// Negative-phase chains that survive across updates.
#[derive(Debug, Clone)]
pub struct PersistentChains {
    chains: Vec<ChainState>,
}

impl PersistentChains {
    /// One chain per sample of `batch`, started at the sample, with slot
    /// streams identical to [`ChainStreams`] for the same seed.
    pub fn from_batch(batch: &[BinaryPattern], seed: u64) -> Self {
        Self {
            chains: batch
                .iter()
                .enumerate()
                .map(|(i, v)| ChainState::new(v.clone(), RngStream::new(seed, i as u64)))
                .collect(),
        }
    }

    pub fn from_states(chains: Vec<ChainState>) -> Self {
        Self { chains }
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn states(&self) -> &[ChainState] {
        &self.chains
    }

    pub fn total_draws(&self) -> u64 {
        self.chains.iter().map(|c| c.rng.draws()).sum()
    }

    pub fn snapshots(&self) -> Vec<ChainSnapshot> {
        self.chains.iter().map(ChainState::snapshot).collect()
    }

    pub fn restore(snaps: &[ChainSnapshot]) -> Self {
        Self {
            chains: snaps.iter().map(ChainState::restore).collect(),
        }
    }
}

fn check_batch(params: &RbmParams, batch: &[BinaryPattern]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("mini-batch"));
    }
    for v in batch {
        check_len("batch pattern", params.dims().m, v.len())?;
    }
    Ok(())
}

fn check_dcp(cfg: &TrainConfig) -> Result<()> {
    if cfg.d == 0 || cfg.k_prime == 0 {
        return Err(Error::InvalidConfig(format!(
            "d and k_prime must be >= 1 (got d={}, k_prime={})",
            cfg.d, cfg.k_prime
        )));
    }
    Ok(())
}

/// Batch mean of `∇g(θ, v_i)`.
pub fn positive_phase(params: &RbmParams, batch: &[BinaryPattern]) -> Result<GradientRecord> {
    check_batch(params, batch)?;
    let mut sum = GradientRecord::zeros(params.dims());
    let mut probs = vec![0.0; params.dims().n];
    for v in batch {
        params.hidden_probs_into(v.as_slice(), None, &mut probs);
        sum.accumulate_outer(v.as_slice(), &probs);
    }
    sum.divide_inplace(batch.len() as f64);
    Ok(sum)
}

/// Advances chain `i` of `store` by `steps` transitions under `params`
/// (slot stream `i`), then returns the batch mean of `f̂'` at the endpoints.
fn negative_phase(
    params: &RbmParams,
    store: &mut [BinaryPattern],
    steps: usize,
    streams: &mut ChainStreams,
) -> GradientRecord {
    let mut scratch = GibbsScratch::new(params.dims());
    let mut sum = GradientRecord::zeros(params.dims());
    for (i, v) in store.iter_mut().enumerate() {
        run_chain_inplace(params, v.as_mut_slice(), steps, None, streams.slot(i), &mut scratch);
        params.hidden_probs_into(v.as_slice(), None, &mut scratch.hidden_probs);
        sum.accumulate_outer(v.as_slice(), &scratch.hidden_probs);
    }
    sum.divide_inplace(store.len() as f64);
    sum
}

/// CD-K: chains start at the data, one update per batch.
pub fn cd_update(
    params: &RbmParams,
    batch: &[BinaryPattern],
    cfg: &TrainConfig,
    streams: &mut ChainStreams,
) -> Result<RbmParams> {
    let pos = positive_phase(params, batch)?;
    let mut ends = batch.to_vec();
    let neg = negative_phase(params, &mut ends, cfg.k, streams);
    let mut next = params.clone();
    next.ascend(&pos.difference(&neg), cfg.eta);
    Ok(next)
}

/// Persistent CD: chain `i` continues from where the previous update left
/// it. A batch shorter than the chain pool (the tail batch of an epoch)
/// uses the leading chains only.
pub fn pcd_update(
    params: &RbmParams,
    batch: &[BinaryPattern],
    chains: &mut PersistentChains,
    cfg: &TrainConfig,
) -> Result<RbmParams> {
    let pos = positive_phase(params, batch)?;
    if batch.len() > chains.len() {
        return Err(Error::DimensionMismatch {
            what: "persistent chain count",
            expected: batch.len(),
            got: chains.len(),
        });
    }
    let mut scratch = GibbsScratch::new(params.dims());
    let mut sum = GradientRecord::zeros(params.dims());
    for chain in chains.chains.iter_mut().take(batch.len()) {
        check_len("chain state", params.dims().m, chain.v.len())?;
        run_chain_inplace(params, chain.v.as_mut_slice(), cfg.k, None, &mut chain.rng, &mut scratch);
        params.hidden_probs_into(chain.v.as_slice(), None, &mut scratch.hidden_probs);
        sum.accumulate_outer(chain.v.as_slice(), &scratch.hidden_probs);
    }
    sum.divide_inplace(batch.len() as f64);
    let mut next = params.clone();
    next.ascend(&pos.difference(&sum), cfg.eta);
    Ok(next)
}

/// `d` gradient steps on the convex surrogate `f(θ) - θ·pos`, starting from
/// `start`. `negative` supplies an estimate of `∇f` at the current iterate;
/// `pos` stays frozen for the whole loop.
pub fn dcp_inner_loop<F>(
    start: &RbmParams,
    pos: &GradientRecord,
    d: usize,
    eta: f64,
    mut negative: F,
) -> Result<RbmParams>
where
    F: FnMut(&RbmParams, usize) -> Result<GradientRecord>,
{
    let mut theta = start.clone();
    for l in 0..d {
        let neg = negative(&theta, l)?;
        theta.ascend(&pos.difference(&neg), eta);
    }
    Ok(theta)
}

/// Mini-batch S-DCP. The sample store `V_T` starts at the batch and carries
/// each chain's endpoint into the next inner iteration; the gradient
/// accumulator is reset at every inner iteration.
pub fn sdcp_update_minibatch(
    params: &RbmParams,
    batch: &[BinaryPattern],
    cfg: &TrainConfig,
    streams: &mut ChainStreams,
) -> Result<RbmParams> {
    check_dcp(cfg)?;
    let pos = positive_phase(params, batch)?;
    let mut store = batch.to_vec();
    dcp_inner_loop(params, &pos, cfg.d, cfg.eta, |theta, _| {
        Ok(negative_phase(theta, &mut store, cfg.k_prime, streams))
    })
}

fn column_mean(rows: &[Vec<f64>], len: usize) -> Array1<f64> {
    let mut out = Array1::zeros(len);
    for row in rows {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    out.mapv_inplace(|x| x / rows.len() as f64);
    out
}

/// `Σ_i (h_i - λ)(v_i - μ)^T / N`, laid out `n × m`.
fn centered_outer_mean(
    hidden: &[Vec<f64>],
    visible: &[Vec<f64>],
    mu: &Array1<f64>,
    lambda: &Array1<f64>,
) -> Array2<f64> {
    let (n, m) = (lambda.len(), mu.len());
    let mut out = Array2::zeros((n, m));
    for (h, v) in hidden.iter().zip(visible) {
        for (t, mut row) in out.rows_mut().into_iter().enumerate() {
            let ht = h[t] - lambda[t];
            for (j, o) in row.iter_mut().enumerate() {
                *o += ht * (v[j] - mu[j]);
            }
        }
    }
    out.mapv_inplace(|x| x / hidden.len() as f64);
    out
}

fn as_rows(patterns: &[BinaryPattern]) -> Vec<Vec<f64>> {
    patterns
        .iter()
        .map(|p| p.as_slice().iter().map(|&b| b as f64).collect())
        .collect()
}

/// Mini-batch S-DCP with centered gradients.
///
/// `params` are in the centered parameterization belonging to `centering`;
/// use [`CenteringState::uncentered`] to obtain the represented model. Per
/// inner iteration: run centered chains from the working store, shift the
/// biases and move the offsets towards the batch statistics, then take a
/// centered gradient step. The data-side weight statistic is evaluated once,
/// at the first inner iteration.
pub fn csdcp_update_minibatch(
    params: &RbmParams,
    batch: &[BinaryPattern],
    cfg: &TrainConfig,
    centering: &mut CenteringState,
    streams: &mut ChainStreams,
) -> Result<RbmParams> {
    check_dcp(cfg)?;
    check_batch(params, batch)?;
    centering.check_dims(params.dims())?;
    let dims = params.dims();
    let nb = batch.len();

    let data_rows = as_rows(batch);
    let mut data_hidden = vec![vec![0.0; dims.n]; nb];
    for (v, h) in batch.iter().zip(data_hidden.iter_mut()) {
        params.hidden_probs_into(v.as_slice(), Some(centering), h);
    }
    let mu_batch = column_mean(&data_rows, dims.m);
    let lambda_batch = column_mean(&data_hidden, dims.n);

    let mut theta = params.clone();
    let mut store = batch.to_vec();
    let mut model_hidden = vec![vec![0.0; dims.n]; nb];
    let mut scratch = GibbsScratch::new(dims);
    let mut data_weight_stat: Option<Array2<f64>> = None;

    for _ in 0..cfg.d {
        for (i, (v, h)) in store.iter_mut().zip(model_hidden.iter_mut()).enumerate() {
            run_chain_inplace(
                &theta,
                v.as_mut_slice(),
                cfg.k_prime,
                Some(centering),
                streams.slot(i),
                &mut scratch,
            );
            theta.hidden_probs_into(v.as_slice(), Some(centering), h);
        }

        centering.reparameterize(&mut theta, &mu_batch, &lambda_batch);

        let pos_w = data_weight_stat.get_or_insert_with(|| {
            centered_outer_mean(&data_hidden, &data_rows, centering.mu(), centering.lambda())
        });
        let model_rows = as_rows(&store);
        let neg_w = centered_outer_mean(&model_hidden, &model_rows, centering.mu(), centering.lambda());
        let step = GradientRecord {
            dw: &*pos_w - &neg_w,
            db: &mu_batch - &column_mean(&model_rows, dims.m),
            dc: &lambda_batch - &column_mean(&model_hidden, dims.n),
        };
        theta.ascend(&step, cfg.eta);
    }
    Ok(theta)
}

/// Centered-gradient CD: [`csdcp_update_minibatch`] with `d = 1` and
/// `k_prime = k`.
pub fn cg_update(
    params: &RbmParams,
    batch: &[BinaryPattern],
    cfg: &TrainConfig,
    centering: &mut CenteringState,
    streams: &mut ChainStreams,
) -> Result<RbmParams> {
    let mut inner = cfg.clone();
    inner.d = 1;
    inner.k_prime = cfg.k;
    csdcp_update_minibatch(params, batch, &inner, centering, streams)
}

/// All `(d, k_prime)` with `d · k_prime = k`, ordered by `d`.
pub fn match_budget(k: usize) -> Vec<(usize, usize)> {
    (1..=k).filter(|d| k % d == 0).map(|d| (d, k / d)).collect()
}
