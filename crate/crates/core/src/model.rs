//! Likelihood, prior and tempered posterior for the joint state `(θ, log τ²)`.
//!
//! Every model the samplers understand is a Gaussian observation model on a
//! sum-of-squares loss `E(θ)`: with `n` residual entries,
//!
//! ```text
//! log p(x | θ, τ²) = -(n/2) log(2π τ²) - E(θ) / (2 τ²)
//! ```
//!
//! The autoencoder uses `n = N·D` and `E` = reconstruction error. Toy targets
//! used for validation set `n = 0` and choose `E` so that `-E/2` is the
//! desired log density at `τ² = 1`.

use std::f64::consts::PI;

use ndarray::ArrayView2;

use crate::autoencoder::{squared_error, ParamVector, Topology};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One replica's full MCMC state: parameters and the log of the noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub params: ParamVector<T>,
    pub log_tau_sq: T,
}

impl<T: Scalar> ModelState<T> {
    pub fn new(params: ParamVector<T>, log_tau_sq: T) -> Self {
        Self { params, log_tau_sq }
    }

    pub fn tau_sq(&self) -> T {
        self.log_tau_sq.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.log_tau_sq.is_finite() && self.params.is_finite()
    }
}

/// Gaussian weight prior `N(0, σ²)` and inverse-gamma(ν₁, ν₂)-style prior on τ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig<T> {
    pub sigma_sq: T,
    pub nu_1: T,
    pub nu_2: T,
}

impl<T: Scalar> Default for PriorConfig<T> {
    fn default() -> Self {
        Self {
            sigma_sq: T::of(25.0),
            nu_1: T::zero(),
            nu_2: T::of(3.0),
        }
    }
}

impl<T: Scalar> PriorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_sq > T::zero()) {
            return Err(Error::Config(format!(
                "prior sigma_sq must be > 0, got {}",
                self.sigma_sq
            )));
        }
        if !(self.nu_2 > T::zero()) {
            return Err(Error::Config(format!(
                "prior nu_2 must be > 0, got {}",
                self.nu_2
            )));
        }
        if !self.nu_1.is_finite() {
            return Err(Error::Config("prior nu_1 must be finite".into()));
        }
        Ok(())
    }
}

/// Gaussian log-likelihood from a precomputed sum of squared residuals.
pub fn log_likelihood_from_loss<T: Scalar>(loss: T, n_residuals: usize, log_tau_sq: T) -> T {
    let two = T::of(2.0);
    let n = T::of_usize(n_residuals);
    -(n / two) * (T::of(2.0 * PI).ln() + log_tau_sq) - loss / (two * log_tau_sq.exp())
}

/// `log p(x | θ, τ²)` for an autoencoder: the reconstruction is compared to
/// the input itself over all `N·D` entries.
pub fn log_likelihood<T: Scalar>(
    state: &ModelState<T>,
    dataset: &Dataset<T>,
    topology: &Topology,
) -> Result<T> {
    let fwd = topology.forward(&state.params, dataset.features.view())?;
    let recon = fwd.reconstruction();
    if recon.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("reconstruction diverged".into()));
    }
    let loss = squared_error(recon, dataset.features.view());
    Ok(log_likelihood_from_loss(
        loss,
        dataset.features.len(),
        state.log_tau_sq,
    ))
}

/// Log prior up to the inverse-gamma normalizing constant:
/// `-(L/2) log(2πσ²) - Σθ²/(2σ²) - (1+ν₁) log τ² - ν₂/τ²`.
pub fn log_prior<T: Scalar>(state: &ModelState<T>, cfg: &PriorConfig<T>, n_params: usize) -> T {
    let two = T::of(2.0);
    let sum_sq: T = state.params.iter().map(|&w| w * w).sum();
    -(T::of_usize(n_params) / two) * (T::of(2.0 * PI) * cfg.sigma_sq).ln()
        - sum_sq / (two * cfg.sigma_sq)
        - (T::one() + cfg.nu_1) * state.log_tau_sq
        - cfg.nu_2 / state.log_tau_sq.exp()
}

/// Likelihood raised to `1/temperature`; the prior is never tempered.
pub fn tempered_log_posterior<T: Scalar>(log_likelihood: T, log_prior: T, temperature: T) -> T {
    log_likelihood / temperature + log_prior
}

/// Per-sample fit summaries written to chain traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitMetrics<T> {
    pub train_mse: T,
    pub test_mse: T,
}

/// Anything the samplers can target: a Gaussian model on a sum-of-squares loss.
pub trait SquaredErrorModel<T: Scalar>: Sync {
    fn n_params(&self) -> usize;

    /// Number of residual entries `n` in the likelihood normalizer.
    fn n_residuals(&self) -> usize;

    fn loss(&self, params: &[T]) -> Result<T>;

    fn loss_and_gradient(&self, params: &[T]) -> Result<(T, Vec<T>)>;

    fn log_prior(&self, state: &ModelState<T>) -> T;

    fn log_likelihood_from_loss(&self, loss: T, log_tau_sq: T) -> T {
        log_likelihood_from_loss(loss, self.n_residuals(), log_tau_sq)
    }

    fn log_likelihood(&self, state: &ModelState<T>) -> Result<T> {
        let loss = self.loss(&state.params)?;
        Ok(self.log_likelihood_from_loss(loss, state.log_tau_sq))
    }

    /// Train MSE can be derived from the loss; the test MSE may need a forward pass.
    fn metrics(&self, _params: &[T], _loss: T) -> Result<FitMetrics<T>> {
        Ok(FitMetrics {
            train_mse: T::nan(),
            test_mse: T::nan(),
        })
    }
}

/// Autoencoder posterior over a training split, with an optional test split
/// monitored for reporting.
#[derive(Debug, Clone)]
pub struct BayesAutoencoder<T> {
    pub topology: Topology,
    pub train: Dataset<T>,
    pub test: Option<Dataset<T>>,
    pub prior: PriorConfig<T>,
}

impl<T: Scalar> BayesAutoencoder<T> {
    pub fn new(
        topology: Topology,
        train: Dataset<T>,
        test: Option<Dataset<T>>,
        prior: PriorConfig<T>,
    ) -> Result<Self> {
        prior.validate()?;
        for ds in std::iter::once(&train).chain(test.as_ref()) {
            if ds.n_features() != topology.input_dim() {
                return Err(Error::Dimension(format!(
                    "dataset has {} features, topology {topology} expects {}",
                    ds.n_features(),
                    topology.input_dim()
                )));
            }
        }
        if train.n_instances() == 0 {
            return Err(Error::Empty("training split".into()));
        }
        Ok(Self {
            topology,
            train,
            test,
            prior,
        })
    }

    fn train_view(&self) -> ArrayView2<'_, T> {
        self.train.features.view()
    }

    pub fn mse_on(&self, params: &[T], dataset: &Dataset<T>) -> Result<T> {
        if dataset.n_instances() == 0 {
            return Ok(T::nan());
        }
        self.topology.mse(params, dataset.features.view())
    }
}

fn finite_or_err<T: Scalar>(loss: T) -> Result<T> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("reconstruction loss".into()))
    }
}

impl<T: Scalar> SquaredErrorModel<T> for BayesAutoencoder<T> {
    fn n_params(&self) -> usize {
        self.topology.total_params()
    }

    fn n_residuals(&self) -> usize {
        self.train.features.len()
    }

    fn loss(&self, params: &[T]) -> Result<T> {
        finite_or_err(self.topology.loss(params, self.train_view())?)
    }

    fn loss_and_gradient(&self, params: &[T]) -> Result<(T, Vec<T>)> {
        let (loss, grad) = self.topology.loss_and_gradient(params, self.train_view())?;
        finite_or_err(loss)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("loss gradient".into()));
        }
        Ok((loss, grad))
    }

    fn log_prior(&self, state: &ModelState<T>) -> T {
        log_prior(state, &self.prior, self.n_params())
    }

    fn metrics(&self, params: &[T], loss: T) -> Result<FitMetrics<T>> {
        let train_mse = loss / T::of_usize(self.n_residuals());
        let test_mse = match &self.test {
            Some(test) => self.mse_on(params, test)?,
            None => T::nan(),
        };
        Ok(FitMetrics {
            train_mse,
            test_mse,
        })
    }
}
