use ndarray::{Array1, Array2};

use crate::data::BinaryDataset;
use crate::error::{check_len, Error, Result};
use crate::math::logit;
use crate::model::{ModelDims, RbmParams};
use crate::rng::RngStream;

use super::config::{InitScheme, VisibleBiasInit};

/// Clamp applied to per-unit means before taking the logit.
pub const BASE_RATE_EPSILON: f64 = 1e-4;

/// `W ~ N(0, σ²)`, `c = 0`, and `b` either zero or the logit of the
/// clamped training mean of each visible unit.
pub fn init_params(
    dims: ModelDims,
    scheme: &InitScheme,
    train_data: &BinaryDataset,
    rng: &mut RngStream,
) -> Result<RbmParams> {
    let sigma = scheme.weight_sigma;
    let weights = if sigma == 0.0 {
        Array2::zeros((dims.n, dims.m))
    } else {
        Array2::from_shape_simple_fn((dims.n, dims.m), || sigma * rng.standard_normal())
    };
    let visible_bias = match scheme.visible_bias {
        VisibleBiasInit::Zero => Array1::zeros(dims.m),
        VisibleBiasInit::BaseRate => {
            if train_data.is_empty() {
                return Err(Error::Empty("training data for base-rate initialization"));
            }
            check_len("training data dimension", dims.m, train_data.dim())?;
            train_data
                .mean()
                .mapv(|p| logit(p.clamp(BASE_RATE_EPSILON, 1.0 - BASE_RATE_EPSILON)))
        }
    };
    RbmParams::from_parts(weights, visible_bias, Array1::zeros(dims.n))
}
