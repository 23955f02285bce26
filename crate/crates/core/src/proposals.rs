//! Proposal kernels: random walk, Langevin-gradient (LG) and Adam-preconditioned
//! Langevin (adapt-LG), plus the kernel schedule and the Gaussian proposal
//! density ratio needed for the Metropolis-Hastings correction.
//!
//! Gradient kernels drift downhill on the loss, `μ(θ) = θ - ν₃·g(θ)`, and add
//! `N(0, ν₄² I)` noise. `log τ²` always takes a symmetric random-walk step, so
//! it never contributes to the density ratio.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ModelState, SquaredErrorModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    RandomWalk,
    Lg,
    AdaptLg,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::RandomWalk, KernelKind::Lg, KernelKind::AdaptLg];

    pub fn index(self) -> usize {
        match self {
            KernelKind::RandomWalk => 0,
            KernelKind::Lg => 1,
            KernelKind::AdaptLg => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::RandomWalk => "random_walk",
            KernelKind::Lg => "lg",
            KernelKind::AdaptLg => "adapt_lg",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown kernel kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalConfig<T> {
    /// ν₄: sd of the Gaussian noise on θ.
    pub step_sd: T,
    /// ν₃: drift step along the (possibly preconditioned) loss gradient.
    pub learn_rate: T,
    /// sd of the random-walk step on log τ². Zero keeps τ² fixed.
    pub tau_step_sd: T,
    /// Probability that a proposal uses a gradient kernel.
    pub lg_rate: T,
    pub adam_beta1: T,
    pub adam_beta2: T,
    pub adam_eps: T,
}

impl<T: Scalar> Default for ProposalConfig<T> {
    fn default() -> Self {
        Self {
            step_sd: T::of(0.005),
            learn_rate: T::of(0.01),
            tau_step_sd: T::of(0.01),
            lg_rate: T::of(0.5),
            adam_beta1: T::of(0.99),
            adam_beta2: T::of(0.999),
            adam_eps: T::of(1e-8),
        }
    }
}

impl<T: Scalar> ProposalConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.step_sd > T::zero()) {
            return bad(format!("step_sd must be > 0, got {}", self.step_sd));
        }
        if !(self.learn_rate > T::zero()) {
            return bad(format!("learn_rate must be > 0, got {}", self.learn_rate));
        }
        if !(self.tau_step_sd >= T::zero()) {
            return bad(format!(
                "tau_step_sd must be >= 0, got {}",
                self.tau_step_sd
            ));
        }
        if !(self.lg_rate >= T::zero() && self.lg_rate <= T::one()) {
            return bad(format!("lg_rate must lie in [0, 1], got {}", self.lg_rate));
        }
        for (name, beta) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(beta > T::zero() && beta < T::one()) {
                return bad(format!("{name} must lie in (0, 1), got {beta}"));
            }
        }
        if !(self.adam_eps >= T::zero()) {
            return bad(format!("adam_eps must be >= 0, got {}", self.adam_eps));
        }
        Ok(())
    }
}

/// Adam moment estimates; one per replica, reset at chain start.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
        }
    }
}

/// One Adam moment update. Returns the bias-corrected, variance-normalized
/// direction `ĝ = √(1-β₂ᵏ)/√(1-β₁ᵏ) · η_k / (√μ_k + ε)` and the advanced state.
pub fn adam_update<T: Scalar>(
    grad: &[T],
    adam: &AdamState<T>,
    cfg: &ProposalConfig<T>,
) -> Result<(Vec<T>, AdamState<T>)> {
    if grad.len() != adam.first_moment.len() {
        return Err(Error::Dimension(format!(
            "gradient length {} but Adam state length {}",
            grad.len(),
            adam.first_moment.len()
        )));
    }
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let k = adam.step_count + 1;
    let kf = T::of(k as f64);
    let correction = (T::one() - b2.powf(kf)).sqrt() / (T::one() - b1.powf(kf)).sqrt();
    let mut next = AdamState {
        first_moment: Vec::with_capacity(grad.len()),
        second_moment: Vec::with_capacity(grad.len()),
        step_count: k,
    };
    let mut direction = Vec::with_capacity(grad.len());
    for ((&g, &m), &v) in grad.iter().zip(&adam.first_moment).zip(&adam.second_moment) {
        let m = b1 * m + (T::one() - b1) * g;
        let v = b2 * v + (T::one() - b2) * g * g;
        direction.push(correction * m / (v.sqrt() + cfg.adam_eps));
        next.first_moment.push(m);
        next.second_moment.push(v);
    }
    Ok((direction, next))
}

/// Proposed state together with what the MH step needs about it.
#[derive(Debug, Clone)]
pub struct ProposalOutcome<T> {
    pub proposed: ModelState<T>,
    pub kind: KernelKind,
    /// `log Q(Θ | Θ*) - log Q(Θ* | Θ)`.
    pub log_q_ratio: T,
    /// Loss and gradient at the proposed θ when the kernel already computed them.
    pub evaluation: Option<(T, Vec<T>)>,
}

/// `(‖θ* - μ(θ)‖² - ‖θ - μ(θ*)‖²) / (2ν₄²)`.
pub fn log_q_ratio_gaussian<T: Scalar>(
    current: &[T],
    proposed: &[T],
    mean_fwd: &[T],
    mean_rev: &[T],
    step_sd: T,
) -> Result<T> {
    let n = current.len();
    if proposed.len() != n || mean_fwd.len() != n || mean_rev.len() != n {
        return Err(Error::Dimension(
            "proposal density ratio needs equal-length vectors".into(),
        ));
    }
    let fwd: T = proposed
        .iter()
        .zip(mean_fwd)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    let rev: T = current
        .iter()
        .zip(mean_rev)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum();
    Ok((fwd - rev) / (T::of(2.0) * step_sd * step_sd))
}

fn perturb_tau<T: Scalar, R: Rng + ?Sized>(
    log_tau_sq: T,
    cfg: &ProposalConfig<T>,
    rng: &mut R,
) -> T {
    log_tau_sq + cfg.tau_step_sd * T::standard_normal(rng)
}

fn add_noise<T: Scalar, R: Rng + ?Sized>(mean: &[T], sd: T, rng: &mut R) -> Vec<T> {
    mean.iter()
        .map(|&m| m + sd * T::standard_normal(rng))
        .collect()
}

fn drifted<T: Scalar>(theta: &[T], direction: &[T], rate: T) -> Vec<T> {
    theta
        .iter()
        .zip(direction)
        .map(|(&t, &g)| t - rate * g)
        .collect()
}

fn require_finite<T: Scalar>(v: &[T], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// `θ* = θ + N(0, ν₄² I)`, symmetric.
pub fn propose_random_walk<T: Scalar, R: Rng + ?Sized>(
    state: &ModelState<T>,
    cfg: &ProposalConfig<T>,
    rng: &mut R,
) -> ProposalOutcome<T> {
    let params = add_noise(&state.params, cfg.step_sd, rng);
    let log_tau_sq = perturb_tau(state.log_tau_sq, cfg, rng);
    ProposalOutcome {
        proposed: ModelState::new(params.into(), log_tau_sq),
        kind: KernelKind::RandomWalk,
        log_q_ratio: T::zero(),
        evaluation: None,
    }
}

/// Langevin-gradient proposal `θ* ~ N(θ - ν₃∇E(θ), ν₄² I)`. `current_grad`
/// is `∇E(θ)`; the gradient at θ* is computed here for the reverse density.
pub fn propose_lg<T: Scalar, M: SquaredErrorModel<T> + ?Sized, R: Rng + ?Sized>(
    state: &ModelState<T>,
    current_grad: &[T],
    cfg: &ProposalConfig<T>,
    model: &M,
    rng: &mut R,
) -> Result<ProposalOutcome<T>> {
    require_finite(current_grad, "loss gradient at current state")?;
    let mean_fwd = drifted(&state.params, current_grad, cfg.learn_rate);
    let params = add_noise(&mean_fwd, cfg.step_sd, rng);
    let log_tau_sq = perturb_tau(state.log_tau_sq, cfg, rng);
    let (loss, grad) = model.loss_and_gradient(&params)?;
    let mean_rev = drifted(&params, &grad, cfg.learn_rate);
    let log_q_ratio =
        log_q_ratio_gaussian(&state.params, &params, &mean_fwd, &mean_rev, cfg.step_sd)?;
    Ok(ProposalOutcome {
        proposed: ModelState::new(params.into(), log_tau_sq),
        kind: KernelKind::Lg,
        log_q_ratio,
        evaluation: Some((loss, grad)),
    })
}

/// Adam-preconditioned Langevin proposal `θ* ~ N(θ - ν₃ĝ(θ), ν₄² I)`.
///
/// The reverse mean applies the same pre-update moments to `∇E(θ*)`. The
/// returned state has absorbed `∇E(θ)` exactly once, whatever the MH outcome.
pub fn propose_adapt_lg<T: Scalar, M: SquaredErrorModel<T> + ?Sized, R: Rng + ?Sized>(
    state: &ModelState<T>,
    current_grad: &[T],
    adam: &AdamState<T>,
    cfg: &ProposalConfig<T>,
    model: &M,
    rng: &mut R,
) -> Result<(ProposalOutcome<T>, AdamState<T>)> {
    require_finite(current_grad, "loss gradient at current state")?;
    let (direction, next_adam) = adam_update(current_grad, adam, cfg)?;
    let mean_fwd = drifted(&state.params, &direction, cfg.learn_rate);
    let params = add_noise(&mean_fwd, cfg.step_sd, rng);
    let log_tau_sq = perturb_tau(state.log_tau_sq, cfg, rng);
    let (loss, grad) = model.loss_and_gradient(&params)?;
    let (rev_direction, _) = adam_update(&grad, adam, cfg)?;
    let mean_rev = drifted(&params, &rev_direction, cfg.learn_rate);
    let log_q_ratio =
        log_q_ratio_gaussian(&state.params, &params, &mean_fwd, &mean_rev, cfg.step_sd)?;
    Ok((
        ProposalOutcome {
            proposed: ModelState::new(params.into(), log_tau_sq),
            kind: KernelKind::AdaptLg,
            log_q_ratio,
            evaluation: Some((loss, grad)),
        },
        next_adam,
    ))
}

/// Random walk with probability `1 - lg_rate`; otherwise adapt-LG before
/// `r_switch` and LG from then on. Always consumes exactly one uniform draw.
pub fn select_kernel<T: Scalar, R: Rng + ?Sized>(
    sample_index: usize,
    r_switch: usize,
    lg_rate: T,
    rng: &mut R,
) -> KernelKind {
    let u = T::unit_uniform(rng);
    if u < lg_rate {
        if sample_index < r_switch {
            KernelKind::AdaptLg
        } else {
            KernelKind::Lg
        }
    } else {
        KernelKind::RandomWalk
    }
}
