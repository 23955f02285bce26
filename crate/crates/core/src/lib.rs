//! Bayesian autoencoders sampled by parallel-tempered MCMC.
//!
//! The posterior over autoencoder weights and the observation variance is
//! explored by an ensemble of Metropolis-Hastings replicas on a geometric
//! temperature ladder. Proposals are random walks, Langevin-gradient moves, or
//! Adam-preconditioned Langevin moves used during burn-in.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the precision.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` deliberately rejects NaN

pub mod autoencoder;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod kv;
pub mod model;
pub mod proposals;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod tempering;
pub mod toy;

pub use autoencoder::{Activation, ForwardResult, ParamVector, Topology};
pub use data::{Dataset, SplitSpec};
pub use diagnostics::{PosteriorSummary, RHatReport, ReducedEnsemble};
pub use error::{Error, Result};
pub use model::{BayesAutoencoder, ModelState, PriorConfig, SquaredErrorModel};
pub use proposals::{KernelKind, ProposalConfig};
pub use sampler::{ReplicaChain, Snapshot};
pub use scalar::Scalar;
pub use tempering::{
    run_ensemble, EnsembleOptions, EnsembleResult, Execution, Initialization, TemperingConfig,
};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type ParamVector64 = ParamVector<f64>;
pub type ParamVector32 = ParamVector<f32>;
pub type ModelState64 = ModelState<f64>;
pub type ModelState32 = ModelState<f32>;
pub type BayesAutoencoder64 = BayesAutoencoder<f64>;
pub type BayesAutoencoder32 = BayesAutoencoder<f32>;
pub type EnsembleResult64 = EnsembleResult<f64>;
pub type EnsembleResult32 = EnsembleResult<f32>;
