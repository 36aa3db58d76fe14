//! The training algorithms (CD, PCD, SDCP, CSDCP, CG) and the epoch loop.

mod config;
mod init;
mod run;
mod updates;

pub use config::{Algorithm, InitScheme, TrainConfig, VisibleBiasInit};
pub use init::{init_params, BASE_RATE_EPSILON};
pub use run::{
    derive_seed, train, train_with, Checkpoint, CurvePoint, Trainer, TrainingRun,
    CHECKPOINT_FORMAT, CHECKPOINT_VERSION, INITIAL_LAMBDA,
};
pub use updates::{
    cd_update, cg_update, csdcp_update_minibatch, dcp_inner_loop, match_budget, pcd_update,
    positive_phase, sdcp_update_minibatch, ChainStreams, PersistentChains,
};
