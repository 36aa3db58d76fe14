use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::centering::CenteringState;
use crate::data::{minibatches, BinaryDataset};
use crate::error::{Error, Result};
use crate::evaluator::{AtllKind, EvalSettings};
use crate::model::{ModelDims, RbmParams};
use crate::rng::{streams, RngPosition, RngStream};
use crate::sampler::ChainSnapshot;

use super::config::{Algorithm, TrainConfig};
use super::init::init_params;
use super::updates::{
    cd_update, cg_update, csdcp_update_minibatch, pcd_update, sdcp_update_minibatch, ChainStreams,
    PersistentChains,
};

/// Initial hidden offset for centered training.
pub const INITIAL_LAMBDA: f64 = 0.5;

/// Mixes two words into a fresh seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sequential training state for one trial.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    /// Working parameters; centered when the algorithm is.
    params: RbmParams,
    initial: RbmParams,
    centering: Option<CenteringState>,
    chains: Option<PersistentChains>,
    streams: ChainStreams,
    epoch: usize,
}

impl Trainer {
    pub fn new(train_data: &BinaryDataset, hidden: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if train_data.is_empty() {
            return Err(Error::Empty("training data"));
        }
        let dims = ModelDims::new(train_data.dim(), hidden)?;
        let mut init_rng = RngStream::new(cfg.seed, streams::INIT);
        let initial = init_params(dims, &cfg.init, train_data, &mut init_rng)?;
        let (params, centering) = if cfg.algorithm.is_centered() {
            let centering = CenteringState::new(
                train_data.mean(),
                Array1::from_elem(hidden, INITIAL_LAMBDA),
                cfg.nu_mu,
                cfg.nu_lambda,
            )?;
            (centering.centered(&initial), Some(centering))
        } else {
            (initial.clone(), None)
        };
        Ok(Self {
            cfg: cfg.clone(),
            params,
            initial,
            centering,
            chains: None,
            streams: ChainStreams::new(cfg.seed),
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// The parameters at epoch 0 (shared by every algorithm for one seed).
    pub fn initial_model(&self) -> &RbmParams {
        &self.initial
    }

    /// The represented model in plain (uncentered) form.
    pub fn model(&self) -> RbmParams {
        match &self.centering {
            Some(c) => c.uncentered(&self.params),
            None => self.params.clone(),
        }
    }

    pub fn working_params(&self) -> &RbmParams {
        &self.params
    }

    pub fn centering(&self) -> Option<&CenteringState> {
        self.centering.as_ref()
    }

    /// Uniform draws consumed by every Gibbs chain so far.
    pub fn chain_draws(&self) -> u64 {
        self.streams.total_draws() + self.chains.as_ref().map_or(0, PersistentChains::total_draws)
    }

    /// Runs one epoch and returns the number of Gibbs transitions it made,
    /// measured from the chains' draw counters.
    pub fn run_epoch(&mut self, data: &BinaryDataset) -> Result<u64> {
        let dims = self.params.dims();
        let before = self.chain_draws();
        let batches = minibatches(data, self.cfg.batch_size, self.cfg.seed, self.epoch as u64)?;
        for batch in &batches {
            self.params = match self.cfg.algorithm {
                Algorithm::Cd => cd_update(&self.params, batch, &self.cfg, &mut self.streams)?,
                Algorithm::Sdcp => {
                    sdcp_update_minibatch(&self.params, batch, &self.cfg, &mut self.streams)?
                }
                Algorithm::Pcd => {
                    let chains = self
                        .chains
                        .get_or_insert_with(|| PersistentChains::from_batch(batch, self.cfg.seed));
                    pcd_update(&self.params, batch, chains, &self.cfg)?
                }
                Algorithm::Csdcp => csdcp_update_minibatch(
                    &self.params,
                    batch,
                    &self.cfg,
                    self.centering.as_mut().expect("centered trainer"),
                    &mut self.streams,
                )?,
                Algorithm::Cg => cg_update(
                    &self.params,
                    batch,
                    &self.cfg,
                    self.centering.as_mut().expect("centered trainer"),
                    &mut self.streams,
                )?,
            };
        }
        if !self.params.is_finite() {
            return Err(Error::NonFinite("parameters after update"));
        }
        self.epoch += 1;
        let draws = self.chain_draws() - before;
        let per_transition = (dims.m + dims.n) as u64;
        debug_assert_eq!(draws % per_transition, 0);
        Ok(draws / per_transition)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            epoch: self.epoch,
            config: self.cfg.clone(),
            model: self.model(),
            working_params: self.params.clone(),
            initial_params: self.initial.clone(),
            centering: self.centering.clone(),
            chain_streams: self.streams.positions(),
            persistent_chains: self.chains.as_ref().map(PersistentChains::snapshots),
        }
    }

    pub fn resume(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(
                "checkpoint",
                format!("unsupported {} v{}", ckpt.format, ckpt.version),
            ));
        }
        ckpt.config.validate()?;
        if ckpt.config.algorithm.is_centered() != ckpt.centering.is_some() {
            return Err(Error::invalid("checkpoint", "centering state does not match algorithm"));
        }
        Ok(Self {
            cfg: ckpt.config.clone(),
            params: ckpt.working_params.clone(),
            initial: ckpt.initial_params.clone(),
            centering: ckpt.centering.clone(),
            chains: ckpt.persistent_chains.as_deref().map(PersistentChains::restore),
            streams: ChainStreams::restore(ckpt.config.seed, &ckpt.chain_streams),
            epoch: ckpt.epoch,
        })
    }
}

pub const CHECKPOINT_FORMAT: &str = "dcrbm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to continue a run bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub epoch: usize,
    pub config: TrainConfig,
    /// The represented model, uncentered.
    pub model: RbmParams,
    pub working_params: RbmParams,
    pub initial_params: RbmParams,
    pub centering: Option<CenteringState>,
    pub chain_streams: Vec<RngPosition>,
    pub persistent_chains: Option<Vec<ChainSnapshot>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub atll: f64,
    pub kind: AtllKind,
    /// Training seconds elapsed when the point was recorded.
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub config: TrainConfig,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// Gibbs transitions performed in each epoch.
    pub transitions_per_epoch: Vec<u64>,
    pub seconds_per_epoch: f64,
    pub initial_params: RbmParams,
    pub final_params: RbmParams,
}

impl TrainingRun {
    pub fn final_atll(&self) -> f64 {
        self.curve.last().expect("curve has the initial point").atll
    }

    /// Identical apart from timing fields.
    pub fn same_result(&self, other: &TrainingRun) -> bool {
        self.config == other.config
            && self.transitions_per_epoch == other.transitions_per_epoch
            && self.initial_params == other.initial_params
            && self.final_params == other.final_params
            && self.curve.len() == other.curve.len()
            && self.curve.iter().zip(&other.curve).all(|(a, b)| {
                a.epoch == b.epoch && a.kind == b.kind && a.atll.to_bits() == b.atll.to_bits()
            })
    }
}

/// Trains for `cfg.epochs` epochs, recording ATLL on `test_set` at epoch 0,
/// every `eval_interval` epochs, and after the last epoch.
pub fn train(
    train_data: &BinaryDataset,
    test_set: &BinaryDataset,
    hidden: usize,
    cfg: &TrainConfig,
    eval: &EvalSettings,
) -> Result<TrainingRun> {
    train_with(train_data, test_set, hidden, cfg, eval, |_, _| {})
}

/// [`train`] with a callback after every recorded curve point.
pub fn train_with<F>(
    train_data: &BinaryDataset,
    test_set: &BinaryDataset,
    hidden: usize,
    cfg: &TrainConfig,
    eval: &EvalSettings,
    mut on_point: F,
) -> Result<TrainingRun>
where
    F: FnMut(&Trainer, &CurvePoint),
{
    let mut trainer = Trainer::new(train_data, hidden, cfg)?;
    let start = Instant::now();
    let mut curve = Vec::new();
    let mut transitions = Vec::with_capacity(cfg.epochs);
    let mut record = |trainer: &Trainer, curve: &mut Vec<CurvePoint>| -> Result<()> {
        let seed = derive_seed(cfg.seed, trainer.epoch() as u64);
        let rec = eval.evaluate(&trainer.model(), test_set.patterns(), seed)?;
        let point = CurvePoint {
            epoch: trainer.epoch(),
            atll: rec.atll,
            kind: rec.mode,
            wall_clock_s: start.elapsed().as_secs_f64(),
        };
        on_point(trainer, &point);
        curve.push(point);
        Ok(())
    };
    record(&trainer, &mut curve)?;
    for epoch in 1..=cfg.epochs {
        transitions.push(trainer.run_epoch(train_data)?);
        if epoch % cfg.eval_interval == 0 || epoch == cfg.epochs {
            record(&trainer, &mut curve)?;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(TrainingRun {
        config: cfg.clone(),
        seed: cfg.seed,
        curve,
        transitions_per_epoch: transitions,
        seconds_per_epoch: if cfg.epochs == 0 { 0.0 } else { elapsed / cfg.epochs as f64 },
        initial_params: trainer.initial_model().clone(),
        final_params: trainer.model(),
    })
}
