//! Block Gibbs sampling and the chain-endpoint estimator of `∇f`.
//!
//! A transition samples all hidden units from `p(h|v)` and then all visible
//! units from `p(v|h)`, consuming exactly `n + m` uniform draws in that
//! order.

use serde::{Deserialize, Serialize};

use crate::centering::CenteringState;
use crate::error::{check_len, Result};
use crate::model::{BinaryPattern, GradientRecord, ModelDims, RbmParams};
use crate::rng::{RngPosition, RngStream};

/// Current visible configuration of a chain plus its random stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub v: BinaryPattern,
    pub rng: RngStream,
}

/// Serializable [`ChainState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub v: BinaryPattern,
    pub rng: RngPosition,
}

impl ChainState {
    pub fn new(v: BinaryPattern, rng: RngStream) -> Self {
        Self { v, rng }
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        ChainSnapshot {
            v: self.v.clone(),
            rng: self.rng.position(),
        }
    }

    pub fn restore(snap: &ChainSnapshot) -> Self {
        Self {
            v: snap.v.clone(),
            rng: RngStream::restore(snap.rng),
        }
    }
}

/// Reusable buffers for the hot sampling loop.
#[derive(Debug, Clone)]
pub(crate) struct GibbsScratch {
    pub hidden_probs: Vec<f64>,
    pub visible_probs: Vec<f64>,
    pub h: Vec<u8>,
}

impl GibbsScratch {
    pub fn new(dims: ModelDims) -> Self {
        Self {
            hidden_probs: vec![0.0; dims.n],
            visible_probs: vec![0.0; dims.m],
            h: vec![0; dims.n],
        }
    }
}

#[inline]
pub(crate) fn transition_inplace(
    params: &RbmParams,
    v: &mut [u8],
    offsets: Option<&CenteringState>,
    rng: &mut RngStream,
    scratch: &mut GibbsScratch,
) {
    params.hidden_probs_into(v, offsets, &mut scratch.hidden_probs);
    for (h, &p) in scratch.h.iter_mut().zip(&scratch.hidden_probs) {
        *h = rng.bernoulli(p);
    }
    params.visible_probs_into(&scratch.h, offsets, &mut scratch.visible_probs);
    for (x, &p) in v.iter_mut().zip(&scratch.visible_probs) {
        *x = rng.bernoulli(p);
    }
}

pub(crate) fn run_chain_inplace(
    params: &RbmParams,
    v: &mut [u8],
    steps: usize,
    offsets: Option<&CenteringState>,
    rng: &mut RngStream,
    scratch: &mut GibbsScratch,
) {
    for _ in 0..steps {
        transition_inplace(params, v, offsets, rng, scratch);
    }
}

fn check_inputs(params: &RbmParams, v: &BinaryPattern, offsets: Option<&CenteringState>) -> Result<()> {
    check_len("visible pattern", params.dims().m, v.len())?;
    if let Some(o) = offsets {
        o.check_dims(params.dims())?;
    }
    Ok(())
}

/// One block Gibbs transition from `v`; returns `(v', h)`.
pub fn gibbs_transition(
    params: &RbmParams,
    v: &BinaryPattern,
    offsets: Option<&CenteringState>,
    rng: &mut RngStream,
) -> Result<(BinaryPattern, BinaryPattern)> {
    check_inputs(params, v, offsets)?;
    let mut scratch = GibbsScratch::new(params.dims());
    let mut next = v.clone();
    transition_inplace(params, next.as_mut_slice(), offsets, rng, &mut scratch);
    let h = BinaryPattern::new(scratch.h).expect("sampled bits are binary");
    Ok((next, h))
}

/// `steps` transitions from `v0`; `steps == 0` returns `v0` unchanged.
pub fn run_chain(
    params: &RbmParams,
    v0: &BinaryPattern,
    steps: usize,
    offsets: Option<&CenteringState>,
    rng: &mut RngStream,
) -> Result<BinaryPattern> {
    check_inputs(params, v0, offsets)?;
    let mut scratch = GibbsScratch::new(params.dims());
    let mut v = v0.clone();
    run_chain_inplace(params, v.as_mut_slice(), steps, offsets, rng, &mut scratch);
    Ok(v)
}

/// `f̂'(θ, ṽ)`: the model-side statistics at a chain endpoint, with the
/// hidden layer averaged out (`p(h|ṽ) ṽ^T`, `ṽ`, `p(h|ṽ)`).
pub fn estimate_grad_f(
    params: &RbmParams,
    v_end: &BinaryPattern,
    offsets: Option<&CenteringState>,
) -> Result<GradientRecord> {
    let probs = params.hidden_conditional(v_end, offsets)?;
    let mut grad = GradientRecord::zeros(params.dims());
    grad.accumulate_outer(v_end.as_slice(), probs.as_slice().unwrap());
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn saturated() -> RbmParams {
        RbmParams::from_parts(Array2::from_elem((1, 1), 30.0), Array1::zeros(1), Array1::zeros(1))
            .unwrap()
    }

    #[test]
    fn transition_consumes_m_plus_n_draws() {
        let p = RbmParams::zeros(ModelDims::new(5, 3).unwrap());
        let mut rng = RngStream::new(1, 0);
        gibbs_transition(&p, &BinaryPattern::zeros(5), None, &mut rng).unwrap();
        assert_eq!(rng.draws(), 8);
        run_chain(&p, &BinaryPattern::zeros(5), 7, None, &mut rng).unwrap();
        assert_eq!(rng.draws(), 8 + 7 * 8);
    }

    #[test]
    fn zero_steps_is_identity() {
        let p = RbmParams::zeros(ModelDims::new(4, 2).unwrap());
        let v = BinaryPattern::new(vec![1, 0, 1, 1]).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert_eq!(run_chain(&p, &v, 0, None, &mut rng).unwrap(), v);
        assert_eq!(rng.draws(), 0);
    }

    #[test]
    fn one_step_chain_equals_transition() {
        let mut p = RbmParams::zeros(ModelDims::new(4, 3).unwrap());
        p.weights_mut().fill(0.4);
        let v = BinaryPattern::new(vec![1, 0, 1, 0]).unwrap();
        let (a, _) = gibbs_transition(&p, &v, None, &mut RngStream::new(3, 2)).unwrap();
        let b = run_chain(&p, &v, 1, None, &mut RngStream::new(3, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_model_stays_on() {
        let p = saturated();
        let one = BinaryPattern::ones(1);
        let mut rng = RngStream::new(5, 0);
        for _ in 0..1000 {
            let (v, h) = gibbs_transition(&p, &one, None, &mut rng).unwrap();
            assert_eq!(v, one);
            assert_eq!(h, one);
        }
    }

    #[test]
    fn transition_is_deterministic_for_fixed_stream() {
        let mut p = RbmParams::zeros(ModelDims::new(6, 4).unwrap());
        p.weights_mut().fill(-0.3);
        let v = BinaryPattern::new(vec![1, 1, 0, 0, 1, 0]).unwrap();
        let a = gibbs_transition(&p, &v, None, &mut RngStream::new(99, 4)).unwrap();
        let b = gibbs_transition(&p, &v, None, &mut RngStream::new(99, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_model_gives_fair_coins() {
        let p = RbmParams::zeros(ModelDims::new(3, 2).unwrap());
        let mut rng = RngStream::new(17, 0);
        let trials = 100_000;
        let mut v = BinaryPattern::zeros(3);
        let mut ones_v = [0usize; 3];
        let mut ones_h = [0usize; 2];
        for _ in 0..trials {
            let (nv, h) = gibbs_transition(&p, &v, None, &mut rng).unwrap();
            for (c, &b) in ones_v.iter_mut().zip(nv.as_slice()) {
                *c += b as usize;
            }
            for (c, &b) in ones_h.iter_mut().zip(h.as_slice()) {
                *c += b as usize;
            }
            v = nv;
        }
        let sigma = (0.25 / trials as f64).sqrt();
        for c in ones_v.iter().chain(&ones_h) {
            assert!((*c as f64 / trials as f64 - 0.5).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn estimator_matches_grad_g_without_offsets() {
        let mut p = RbmParams::zeros(ModelDims::new(4, 3).unwrap());
        p.weights_mut()[[1, 2]] = 1.5;
        p.hidden_bias_mut()[0] = -0.7;
        let v = BinaryPattern::new(vec![0, 1, 1, 0]).unwrap();
        assert_eq!(estimate_grad_f(&p, &v, None).unwrap(), p.grad_g(&v).unwrap());

        let zero = RbmParams::zeros(ModelDims::new(4, 3).unwrap());
        let g = estimate_grad_f(&zero, &BinaryPattern::ones(4), None).unwrap();
        assert!(g.dw.iter().all(|&x| x == 0.5));
        assert!(g.db.iter().all(|&x| x == 1.0));
        assert!(g.dc.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn chain_snapshot_round_trips() {
        let p = RbmParams::zeros(ModelDims::new(4, 3).unwrap());
        let mut chain = ChainState::new(BinaryPattern::zeros(4), RngStream::new(4, 1));
        chain.v = run_chain(&p, &chain.v, 3, None, &mut chain.rng).unwrap();
        let snap = chain.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let mut restored = ChainState::restore(&serde_json::from_str(&json).unwrap());
        let a = run_chain(&p, &chain.v, 5, None, &mut chain.rng).unwrap();
        let b = run_chain(&p, &restored.v, 5, None, &mut restored.rng).unwrap();
        assert_eq!(a, b);
    }
}
