//! Small analytic targets for validating the samplers.
//!
//! Each encodes a log density `log π(θ)` as a loss `E(θ) = -2 log π(θ)` with
//! no residual normalizer, so at `τ² = 1` the likelihood is exactly
//! `log π(θ)` up to a constant. Priors are flat; pair with
//! `tau_step_sd = 0` and `log τ² = 0`.

use crate::error::{Error, Result};
use crate::model::{ModelState, SquaredErrorModel};
use crate::scalar::Scalar;

/// Multivariate Gaussian `N(mean, precision⁻¹)` via `E = (θ-m)ᵀ P (θ-m)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget<T> {
    pub mean: Vec<T>,
    /// Row-major symmetric positive-definite precision matrix.
    pub precision: Vec<T>,
}

impl<T: Scalar> GaussianTarget<T> {
    pub fn new(mean: Vec<T>, precision: Vec<T>) -> Result<Self> {
        let d = mean.len();
        if precision.len() != d * d {
            return Err(Error::Dimension(format!(
                "precision has {} entries for dimension {d}",
                precision.len()
            )));
        }
        Ok(Self { mean, precision })
    }

    /// Target with the given 2x2 covariance.
    pub fn from_covariance_2d(mean: [T; 2], cov: [[T; 2]; 2]) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(det > T::zero()) {
            return Err(Error::Degenerate(
                "covariance is not positive definite".into(),
            ));
        }
        let precision = vec![
            cov[1][1] / det,
            -cov[0][1] / det,
            -cov[1][0] / det,
            cov[0][0] / det,
        ];
        Self::new(mean.to_vec(), precision)
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn centered(&self, params: &[T]) -> Vec<T> {
        params
            .iter()
            .zip(&self.mean)
            .map(|(&p, &m)| p - m)
            .collect()
    }

    fn precision_times(&self, v: &[T]) -> Vec<T> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.precision[i * d + j] * v[j]).sum())
            .collect()
    }
}

impl<T: Scalar> SquaredErrorModel<T> for GaussianTarget<T> {
    fn n_params(&self) -> usize {
        self.dim()
    }

    fn n_residuals(&self) -> usize {
        0
    }

    fn loss(&self, params: &[T]) -> Result<T> {
        let c = self.centered(params);
        let pc = self.precision_times(&c);
        Ok(c.iter().zip(&pc).map(|(&a, &b)| a * b).sum())
    }

    fn loss_and_gradient(&self, params: &[T]) -> Result<(T, Vec<T>)> {
        let c = self.centered(params);
        let pc = self.precision_times(&c);
        let loss = c.iter().zip(&pc).map(|(&a, &b)| a * b).sum();
        let two = T::of(2.0);
        Ok((loss, pc.into_iter().map(|g| two * g).collect()))
    }

    fn log_prior(&self, _state: &ModelState<T>) -> T {
        T::zero()
    }
}

/// Equal-weight mixture of `N(-separation/2, sd²)` and `N(+separation/2, sd²)` in one dimension.
#[derive(Debug, Clone, Copy)]
pub struct BimodalTarget<T> {
    pub half_separation: T,
    pub sd: T,
}

impl<T: Scalar> BimodalTarget<T> {
    pub fn new(separation: T, sd: T) -> Self {
        Self {
            half_separation: separation / T::of(2.0),
            sd,
        }
    }

    /// Unnormalized log density, computed stably.
    pub fn log_density(&self, x: T) -> T {
        let two = T::of(2.0);
        let s2 = self.sd * self.sd;
        let a = -(x - self.half_separation).powi(2) / (two * s2);
        let b = -(x + self.half_separation).powi(2) / (two * s2);
        let m = a.max(b);
        m + ((a - m).exp() + (b - m).exp()).ln()
    }

    /// Mode index of a point: 1 for the positive component, 0 otherwise.
    pub fn mode_of(&self, x: T) -> usize {
        usize::from(x > T::zero())
    }
}

impl<T: Scalar> SquaredErrorModel<T> for BimodalTarget<T> {
    fn n_params(&self) -> usize {
        1
    }

    fn n_residuals(&self) -> usize {
        0
    }

    fn loss(&self, params: &[T]) -> Result<T> {
        Ok(-T::of(2.0) * self.log_density(params[0]))
    }

    fn loss_and_gradient(&self, params: &[T]) -> Result<(T, Vec<T>)> {
        let x = params[0];
        let two = T::of(2.0);
        let s2 = self.sd * self.sd;
        let a = -(x - self.half_separation).powi(2) / (two * s2);
        let b = -(x + self.half_separation).powi(2) / (two * s2);
        let m = a.max(b);
        let (wa, wb) = ((a - m).exp(), (b - m).exp());
        let total = wa + wb;
        // d/dx log π = Σ w_k (μ_k - x)/s² / Σ w_k
        let dlog =
            (wa * (self.half_separation - x) + wb * (-self.half_separation - x)) / (total * s2);
        Ok((-two * (m + total.ln()), vec![-two * dlog]))
    }

    fn log_prior(&self, _state: &ModelState<T>) -> T {
        T::zero()
    }
}
