use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{ModelDims, RbmParams};

/// Offsets `μ` (visible) and `λ` (hidden) of a centered RBM, plus the
/// sliding factors of their moving averages.
///
/// A centered parameter set `(W, b, c)` with offsets `(μ, λ)` has energy
/// `-(h - λ)^T W (v - μ) - b·v - c·h`, which is the ordinary RBM with
/// `b - W^T λ` and `c - W μ` as biases (see [`CenteringState::uncentered`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringState {
    mu: Array1<f64>,
    lambda: Array1<f64>,
    nu_mu: f64,
    nu_lambda: f64,
}

fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{x} is outside [0, 1]")))
    }
}

impl CenteringState {
    pub fn new(mu: Array1<f64>, lambda: Array1<f64>, nu_mu: f64, nu_lambda: f64) -> Result<Self> {
        check_unit("nu_mu", nu_mu)?;
        check_unit("nu_lambda", nu_lambda)?;
        for &x in mu.iter() {
            check_unit("mu", x)?;
        }
        for &x in lambda.iter() {
            check_unit("lambda", x)?;
        }
        Ok(Self {
            mu,
            lambda,
            nu_mu,
            nu_lambda,
        })
    }

    /// Zero offsets; with zero sliding factors this disables centering.
    pub fn zeros(dims: ModelDims, nu_mu: f64, nu_lambda: f64) -> Result<Self> {
        Self::new(Array1::zeros(dims.m), Array1::zeros(dims.n), nu_mu, nu_lambda)
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn lambda(&self) -> &Array1<f64> {
        &self.lambda
    }

    pub fn nu_mu(&self) -> f64 {
        self.nu_mu
    }

    pub fn nu_lambda(&self) -> f64 {
        self.nu_lambda
    }

    pub(crate) fn mu_slice(&self) -> &[f64] {
        self.mu.as_slice().expect("contiguous")
    }

    pub(crate) fn lambda_slice(&self) -> &[f64] {
        self.lambda.as_slice().expect("contiguous")
    }

    pub fn check_dims(&self, dims: ModelDims) -> Result<()> {
        check_len("visible offset", dims.m, self.mu.len())?;
        check_len("hidden offset", dims.n, self.lambda.len())
    }

    /// The equivalent uncentered parameters: `b - W^T λ`, `c - W μ`.
    pub fn uncentered(&self, centered: &RbmParams) -> RbmParams {
        let w = centered.weights();
        let b = &centered.visible_bias() - &w.t().dot(&self.lambda);
        let c = &centered.hidden_bias() - &w.dot(&self.mu);
        RbmParams::from_parts(w.to_owned(), b, c).expect("shapes already validated")
    }

    /// Inverse of [`Self::uncentered`]: `b + W^T λ`, `c + W μ`.
    pub fn centered(&self, plain: &RbmParams) -> RbmParams {
        let w = plain.weights();
        let b = &plain.visible_bias() + &w.t().dot(&self.lambda);
        let c = &plain.hidden_bias() + &w.dot(&self.mu);
        RbmParams::from_parts(w.to_owned(), b, c).expect("shapes already validated")
    }

    /// Moves the offsets towards the batch statistics and shifts the biases
    /// so that the represented distribution is unchanged:
    ///
    /// `b += ν_λ W^T (λ_batch - λ)`, `c += ν_μ W (μ_batch - μ)`, then
    /// `μ ← (1-ν_μ) μ + ν_μ μ_batch`, `λ ← (1-ν_λ) λ + ν_λ λ_batch`.
    pub fn reparameterize(
        &mut self,
        params: &mut RbmParams,
        mu_batch: &Array1<f64>,
        lambda_batch: &Array1<f64>,
    ) {
        let b_shift = params.weights().t().dot(&(lambda_batch - &self.lambda));
        let c_shift = params.weights().dot(&(mu_batch - &self.mu));
        params.visible_bias_mut().scaled_add(self.nu_lambda, &b_shift);
        params.hidden_bias_mut().scaled_add(self.nu_mu, &c_shift);
        let (nu_mu, nu_lambda) = (self.nu_mu, self.nu_lambda);
        self.mu
            .zip_mut_with(mu_batch, |m, &mb| *m = (1.0 - nu_mu) * *m + nu_mu * mb);
        self.lambda
            .zip_mut_with(lambda_batch, |l, &lb| *l = (1.0 - nu_lambda) * *l + nu_lambda * lb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn rejects_out_of_range_values() {
        assert!(CenteringState::new(array![0.5], array![0.5], 1.5, 0.0).is_err());
        assert!(CenteringState::new(array![0.5], array![0.5], 0.0, -0.1).is_err());
        assert!(CenteringState::new(array![1.2], array![0.5], 0.0, 0.0).is_err());
        assert!(CenteringState::new(array![0.2], array![0.5], 0.01, 0.01).is_ok());
    }

    #[test]
    fn centered_and_uncentered_are_inverse() {
        let p = RbmParams::from_parts(
            Array2::from_shape_vec((2, 3), vec![0.3, -1.0, 2.0, 0.5, 0.25, -0.75]).unwrap(),
            array![0.1, 0.2, -0.3],
            array![1.0, -1.0],
        )
        .unwrap();
        let s = CenteringState::new(array![0.2, 0.4, 0.6], array![0.5, 0.5], 0.01, 0.01).unwrap();
        let back = s.uncentered(&s.centered(&p));
        for (a, b) in back.visible_bias().iter().zip(p.visible_bias()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in back.hidden_bias().iter().zip(p.hidden_bias()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_factors_leave_everything_fixed() {
        let mut p = RbmParams::from_parts(
            Array2::from_elem((2, 2), 0.7),
            array![0.1, 0.2],
            array![0.3, 0.4],
        )
        .unwrap();
        let before = p.clone();
        let mut s = CenteringState::new(array![0.1, 0.9], array![0.5, 0.5], 0.0, 0.0).unwrap();
        let s0 = s.clone();
        s.reparameterize(&mut p, &array![1.0, 0.0], &array![0.2, 0.9]);
        assert_eq!(p, before);
        assert_eq!(s, s0);
    }
}
