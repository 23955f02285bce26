//! Replica-exchange driver.
//!
//! `M` replicas start on a geometric ladder `T_i = T_max^(i/(M-1))` and run
//! independently between synchronous barriers every `R_swap` samples. At a
//! barrier neighboring rungs of the ladder are offered a swap of their
//! temperature values; the parameter vectors never move. From `R_switch` on
//! every replica runs at temperature 1 and only those samples form the
//! posterior.
//!
//! The coordinator draws one uniform per offered pair from its own stream, and
//! each replica owns its stream, so sequential and pooled execution produce
//! bit-identical results.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::autoencoder::ParamVector;
use crate::error::{Error, Result};
use crate::model::{ModelState, SquaredErrorModel};
use crate::proposals::ProposalConfig;
use crate::rng::{stream_rng, stream_seed, COORDINATOR_STREAM, INIT_STREAM};
use crate::sampler::{AcceptanceCounts, ChainSchedule, Replica, ReplicaChain, Snapshot};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperingConfig<T> {
    /// M
    pub n_replicas: usize,
    pub t_max: T,
    /// Samples between swap barriers.
    pub swap_interval: usize,
    /// Samples per replica.
    pub max_samples: usize,
    /// First sample drawn at temperature 1 by every replica.
    pub switch_sample: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for TemperingConfig<T> {
    fn default() -> Self {
        Self {
            n_replicas: 8,
            t_max: T::of(2.0),
            swap_interval: 5,
            max_samples: 6000,
            switch_sample: 3000,
            seed: 1,
        }
    }
}

impl<T: Scalar> TemperingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_replicas == 0 {
            return bad("n_replicas must be >= 1".into());
        }
        if !(self.t_max >= T::one()) || !self.t_max.is_finite() {
            return bad(format!(
                "t_max must be a finite value >= 1, got {}",
                self.t_max
            ));
        }
        if self.max_samples == 0 {
            return bad("max_samples must be >= 1".into());
        }
        if self.swap_interval == 0 || self.swap_interval > self.max_samples {
            return bad(format!(
                "swap_interval must lie in [1, max_samples = {}], got {}",
                self.max_samples, self.swap_interval
            ));
        }
        if self.switch_sample > self.max_samples {
            return bad(format!(
                "switch_sample ({}) must not exceed max_samples ({})",
                self.switch_sample, self.max_samples
            ));
        }
        Ok(())
    }
}

/// Geometric ladder with exact endpoints 1 and `t_max`.
pub fn build_ladder<T: Scalar>(n_replicas: usize, t_max: T) -> Vec<T> {
    match n_replicas {
        0 => Vec::new(),
        1 => vec![T::one()],
        m => (0..m)
            .map(|i| match i {
                0 => T::one(),
                i if i == m - 1 => t_max,
                i => t_max.powf(T::of_usize(i) / T::of_usize(m - 1)),
            })
            .collect(),
    }
}

/// Log swap acceptance ratio `(1/t_b - 1/t_a)(log L_a - log L_b)`.
pub fn swap_log_ratio<T: Scalar>(log_lik_a: T, log_lik_b: T, t_a: T, t_b: T) -> T {
    if log_lik_a == log_lik_b || t_a == t_b {
        return T::zero();
    }
    (T::one() / t_b - T::one() / t_a) * (log_lik_a - log_lik_b)
}

/// Rung pairs offered at a barrier: even pairs on even barriers, odd pairs on odd ones.
pub fn swap_pair_schedule(barrier_index: usize, n_replicas: usize) -> Vec<(usize, usize)> {
    let start = barrier_index % 2;
    (start..n_replicas.saturating_sub(1))
        .step_by(2)
        .map(|i| (i, i + 1))
        .collect()
}

/// How replica segments are executed between barriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Round-robin on the calling thread. The reference mode.
    #[default]
    Sequential,
    /// One task per replica on a dedicated rayon pool; `workers = 0` uses every core.
    Pool { workers: usize },
}

/// Starting points of the replicas.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization<T> {
    /// Weights from `N(0, weight_sd²)`. `shared` starts every replica from the
    /// same draw. `log_tau_sq = None` starts at the log of the initial
    /// per-residual loss, the variance that best explains the starting fit.
    Random {
        weight_sd: T,
        shared: bool,
        log_tau_sq: Option<T>,
    },
    /// Explicit states: either one for all replicas or one per replica.
    States(Vec<ModelState<T>>),
}

impl<T: Scalar> Default for Initialization<T> {
    fn default() -> Self {
        Initialization::Random {
            weight_sd: T::of(0.1),
            shared: false,
            log_tau_sq: None,
        }
    }
}

impl<T: Scalar> Initialization<T> {
    /// Initial states for `n_replicas` replicas of `model`.
    pub fn states<M: SquaredErrorModel<T> + ?Sized>(
        &self,
        model: &M,
        n_replicas: usize,
        seed: u64,
    ) -> Result<Vec<ModelState<T>>> {
        match self {
            Initialization::States(states) => match states.len() {
                1 => Ok(vec![states[0].clone(); n_replicas]),
                n if n == n_replicas => Ok(states.clone()),
                n => Err(Error::Config(format!(
                    "{n} initial states given for {n_replicas} replicas"
                ))),
            },
            Initialization::Random {
                weight_sd,
                shared,
                log_tau_sq,
            } => {
                if !(*weight_sd >= T::zero()) {
                    return Err(Error::Config(format!(
                        "initial weight sd must be >= 0, got {weight_sd}"
                    )));
                }
                let draws = if *shared { 1 } else { n_replicas };
                let init_seed = stream_seed(seed, INIT_STREAM);
                let mut states = Vec::with_capacity(draws);
                for r in 0..draws {
                    let mut rng = stream_rng(init_seed, r as u64);
                    let params = ParamVector::random(model.n_params(), *weight_sd, &mut rng);
                    let log_tau_sq = match log_tau_sq {
                        Some(v) => *v,
                        None => initial_log_tau_sq(model, &params)?,
                    };
                    states.push(ModelState::new(params, log_tau_sq));
                }
                if *shared {
                    states = vec![states[0].clone(); n_replicas];
                }
                Ok(states)
            }
        }
    }
}

fn initial_log_tau_sq<T: Scalar, M: SquaredErrorModel<T> + ?Sized>(
    model: &M,
    params: &[T],
) -> Result<T> {
    if model.n_residuals() == 0 {
        return Ok(T::zero());
    }
    let mse = model.loss(params)? / T::of_usize(model.n_residuals());
    if !(mse > T::zero()) || !mse.is_finite() {
        return Err(Error::Degenerate(format!(
            "cannot derive an initial tau^2 from per-residual loss {mse}"
        )));
    }
    Ok(mse.ln())
}

/// Run-level options that are not part of the tempering schedule itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions<T> {
    pub init: Initialization<T>,
    /// Keep a full state snapshot every `thin` samples.
    pub thin: usize,
    pub execution: Execution,
}

impl<T: Scalar> Default for EnsembleOptions<T> {
    fn default() -> Self {
        Self {
            init: Initialization::default(),
            thin: 1,
            execution: Execution::Sequential,
        }
    }
}

/// One offered swap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapRecord<T> {
    pub barrier: usize,
    /// Number of samples every replica had drawn when the barrier was reached.
    pub sample_index: usize,
    /// Ladder rungs of the pair; `rung_b = rung_a + 1`.
    pub rung_a: usize,
    pub rung_b: usize,
    pub replica_a: usize,
    pub replica_b: usize,
    pub log_ratio: T,
    pub accepted: bool,
    pub post_switch: bool,
}

/// Temperature held by every replica from `sample_index` on.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureRow<T> {
    pub sample_index: usize,
    pub temperatures: Vec<T>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SwapCounts {
    pub attempts: u64,
    pub accepts: u64,
}

impl SwapCounts {
    pub fn pct(&self) -> Option<f64> {
        (self.attempts > 0).then(|| 100.0 * self.accepts as f64 / self.attempts as f64)
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult<T> {
    pub config: TemperingConfig<T>,
    pub ladder: Vec<T>,
    /// Indexed by replica id.
    pub chains: Vec<ReplicaChain<T>>,
    /// Swaps offered before the switch to temperature 1.
    pub swaps: SwapCounts,
    /// Swaps offered afterwards; always accepted, kept for bookkeeping.
    pub post_switch_swaps: SwapCounts,
    pub swap_log: Vec<SwapRecord<T>>,
    pub temperature_log: Vec<TemperatureRow<T>>,
    pub wall_time: Duration,
}

impl<T: Scalar> EnsembleResult<T> {
    /// Pooled snapshots drawn at or after the switch, replica by replica.
    pub fn posterior(&self) -> Vec<&Snapshot<T>> {
        self.chains
            .iter()
            .flat_map(|c| {
                c.snapshots
                    .iter()
                    .filter(|s| s.sample_index >= self.config.switch_sample)
            })
            .collect()
    }

    /// Per-replica post-switch snapshots, the parallel chains for R-hat.
    pub fn posterior_chains(&self) -> Vec<Vec<&Snapshot<T>>> {
        self.chains
            .iter()
            .map(|c| {
                c.snapshots
                    .iter()
                    .filter(|s| s.sample_index >= self.config.switch_sample)
                    .collect()
            })
            .collect()
    }

    /// Every snapshot taken at temperature 1 with `sample_index >= burn_in`,
    /// whichever replica held that temperature.
    pub fn temperature_one_samples(&self, burn_in: usize) -> Vec<&Snapshot<T>> {
        self.chains
            .iter()
            .flat_map(|c| c.snapshots.iter())
            .filter(|s| s.sample_index >= burn_in && s.temperature == T::one())
            .collect()
    }

    /// Acceptance over all replicas and all samples.
    pub fn acceptance(&self) -> AcceptanceCounts {
        let mut total = AcceptanceCounts::default();
        for c in &self.chains {
            total.merge(&c.counts);
        }
        total
    }

    pub fn post_burn_in_acceptance(&self) -> AcceptanceCounts {
        let mut total = AcceptanceCounts::default();
        for c in &self.chains {
            total.merge(&c.post_burn_in);
        }
        total
    }

    pub fn samples_drawn(&self) -> usize {
        self.chains.iter().map(ReplicaChain::len).min().unwrap_or(0)
    }
}

/// Failure of a run. An aborted run still carries everything sampled so far.
#[derive(Debug)]
pub enum EnsembleError<T> {
    /// Rejected before any sampling.
    Invalid(Error),
    Aborted {
        partial: Box<EnsembleResult<T>>,
        error: Error,
    },
}

impl<T> EnsembleError<T> {
    pub fn error(&self) -> &Error {
        match self {
            EnsembleError::Invalid(e) | EnsembleError::Aborted { error: e, .. } => e,
        }
    }

    pub fn into_error(self) -> Error {
        match self {
            EnsembleError::Invalid(e) | EnsembleError::Aborted { error: e, .. } => e,
        }
    }
}

impl<T> fmt::Display for EnsembleError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleError::Invalid(e) => write!(f, "invalid run: {e}"),
            EnsembleError::Aborted { partial, error } => {
                let drawn = partial
                    .chains
                    .iter()
                    .map(|c| c.records.len())
                    .min()
                    .unwrap_or(0);
                write!(f, "run aborted after {drawn} samples per replica: {error}")
            }
        }
    }
}

impl<T: fmt::Debug> std::error::Error for EnsembleError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(self.error())
    }
}

impl<T> From<Error> for EnsembleError<T> {
    fn from(e: Error) -> Self {
        EnsembleError::Invalid(e)
    }
}

/// Sample indices at which all replicas stop: swap barriers, the switch and the end.
fn stop_points(cfg: &TemperingConfig<impl Scalar>) -> Vec<usize> {
    let mut stops: Vec<usize> = (1..=cfg.max_samples / cfg.swap_interval)
        .map(|k| k * cfg.swap_interval)
        .collect();
    if cfg.switch_sample > 0 {
        stops.push(cfg.switch_sample);
    }
    stops.push(cfg.max_samples);
    stops.sort_unstable();
    stops.dedup();
    stops
}

struct Coordinator<T> {
    ladder: Vec<T>,
    /// holder[rung] = replica currently at that rung.
    holder: Vec<usize>,
    rng: crate::rng::SamplerRng,
    barrier: usize,
    switched: bool,
    swaps: SwapCounts,
    post_switch_swaps: SwapCounts,
    swap_log: Vec<SwapRecord<T>>,
    temperature_log: Vec<TemperatureRow<T>>,
}

impl<T: Scalar> Coordinator<T> {
    fn log_temperatures(&mut self, sample_index: usize, replicas: &[Replica<T>]) {
        self.temperature_log.push(TemperatureRow {
            sample_index,
            temperatures: replicas.iter().map(Replica::temperature).collect(),
        });
    }

    fn swap_barrier(&mut self, sample_index: usize, replicas: &mut [Replica<T>]) {
        for (rung_a, rung_b) in swap_pair_schedule(self.barrier, replicas.len()) {
            let (ra, rb) = (self.holder[rung_a], self.holder[rung_b]);
            let (ta, tb) = (replicas[ra].temperature(), replicas[rb].temperature());
            let log_ratio = swap_log_ratio(
                replicas[ra].log_likelihood(),
                replicas[rb].log_likelihood(),
                ta,
                tb,
            );
            let log_u = T::unit_uniform(&mut self.rng).ln();
            let accepted = log_u < log_ratio.min(T::zero());
            let counts = if self.switched {
                &mut self.post_switch_swaps
            } else {
                &mut self.swaps
            };
            counts.attempts += 1;
            if accepted {
                counts.accepts += 1;
                replicas[ra].set_temperature(tb);
                replicas[rb].set_temperature(ta);
                self.holder.swap(rung_a, rung_b);
            }
            self.swap_log.push(SwapRecord {
                barrier: self.barrier,
                sample_index,
                rung_a,
                rung_b,
                replica_a: ra,
                replica_b: rb,
                log_ratio,
                accepted,
                post_switch: self.switched,
            });
        }
        self.barrier += 1;
    }
}

fn run_segments<T: Scalar, M: SquaredErrorModel<T> + ?Sized>(
    replicas: &mut [Replica<T>],
    model: &M,
    proposal: &ProposalConfig<T>,
    n_steps: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<()> {
    let results: Vec<Result<()>> = match pool {
        None => replicas
            .iter_mut()
            .map(|r| r.run_segment(model, proposal, n_steps))
            .collect(),
        Some(pool) => pool.install(|| {
            replicas
                .par_iter_mut()
                .map(|r| r.run_segment(model, proposal, n_steps))
                .collect()
        }),
    };
    // lowest replica id wins so the reported error does not depend on scheduling
    results.into_iter().collect()
}

/// Runs the full ensemble. See the module docs for the schedule.
pub fn run_ensemble<T: Scalar, M: SquaredErrorModel<T> + ?Sized>(
    cfg: &TemperingConfig<T>,
    proposal: &ProposalConfig<T>,
    model: &M,
    options: &EnsembleOptions<T>,
) -> Result<EnsembleResult<T>, EnsembleError<T>> {
    let start = Instant::now();
    cfg.validate()?;
    proposal.validate()?;
    if options.thin == 0 {
        return Err(Error::Config("thinning interval must be >= 1".into()).into());
    }
    let pool = match options.execution {
        Execution::Sequential => None,
        Execution::Pool { workers } => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
        ),
    };

    let ladder = build_ladder(cfg.n_replicas, cfg.t_max);
    let schedule = ChainSchedule {
        switch_sample: cfg.switch_sample,
        thin: options.thin,
    };
    let initial = options.init.states(model, cfg.n_replicas, cfg.seed)?;
    let tempered = cfg.switch_sample > 0;
    let mut replicas = Vec::with_capacity(cfg.n_replicas);
    for (id, state) in initial.into_iter().enumerate() {
        let t = if tempered { ladder[id] } else { T::one() };
        replicas.push(Replica::new(
            id,
            t,
            state,
            model,
            stream_rng(cfg.seed, id as u64),
            schedule,
        )?);
    }

    let mut coord = Coordinator {
        ladder: ladder.clone(),
        holder: (0..cfg.n_replicas).collect(),
        rng: stream_rng(cfg.seed, COORDINATOR_STREAM),
        barrier: 0,
        switched: !tempered,
        swaps: SwapCounts::default(),
        post_switch_swaps: SwapCounts::default(),
        swap_log: Vec::new(),
        temperature_log: Vec::new(),
    };
    coord.log_temperatures(0, &replicas);

    let mut done = 0;
    let mut failure = None;
    for stop in stop_points(cfg) {
        if let Err(e) = run_segments(&mut replicas, model, proposal, stop - done, pool.as_ref()) {
            failure = Some(e);
            break;
        }
        done = stop;
        if done == cfg.max_samples {
            break;
        }
        let mut changed = false;
        if done % cfg.swap_interval == 0 && cfg.n_replicas > 1 {
            let before = coord.swaps.accepts + coord.post_switch_swaps.accepts;
            coord.swap_barrier(done, &mut replicas);
            changed = coord.swaps.accepts + coord.post_switch_swaps.accepts != before;
        }
        if done == cfg.switch_sample {
            for r in &mut replicas {
                r.set_temperature(T::one());
            }
            coord.switched = true;
            changed = true;
        }
        if changed {
            coord.log_temperatures(done, &replicas);
        }
    }

    let result = EnsembleResult {
        config: *cfg,
        ladder: coord.ladder,
        chains: replicas.into_iter().map(Replica::into_chain).collect(),
        swaps: coord.swaps,
        post_switch_swaps: coord.post_switch_swaps,
        swap_log: coord.swap_log,
        temperature_log: coord.temperature_log,
        wall_time: start.elapsed(),
    };
    match failure {
        None => Ok(result),
        Some(error) => Err(EnsembleError::Aborted {
            partial: Box::new(result),
            error,
        }),
    }
}

pub const SWAP_LOG_HEADER: &str =
    "barrier,sample_index,rung_a,rung_b,replica_a,replica_b,log_ratio,accepted,post_switch";

pub fn write_swap_log<T: Scalar>(path: &Path, log: &[SwapRecord<T>]) -> Result<()> {
    let mut out = String::with_capacity(64 * (log.len() + 1));
    out.push_str(SWAP_LOG_HEADER);
    out.push('\n');
    for s in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:e},{},{}",
            s.barrier,
            s.sample_index,
            s.rung_a,
            s.rung_b,
            s.replica_a,
            s.replica_b,
            s.log_ratio,
            u8::from(s.accepted),
            u8::from(s.post_switch)
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_swap_log<T: Scalar>(path: &Path) -> Result<Vec<SwapRecord<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SWAP_LOG_HEADER) {
        return Err(Error::format(path, "missing swap log header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(path, format!("malformed swap log row {}", i + 2));
            if f.len() != 9 {
                return Err(bad());
            }
            let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let flag = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad()),
            };
            Ok(SwapRecord {
                barrier: u(f[0])?,
                sample_index: u(f[1])?,
                rung_a: u(f[2])?,
                rung_b: u(f[3])?,
                replica_a: u(f[4])?,
                replica_b: u(f[5])?,
                log_ratio: f[6].parse::<T>().map_err(|_| bad())?,
                accepted: flag(f[7])?,
                post_switch: flag(f[8])?,
            })
        })
        .collect()
}

/// One row per temperature change: `sample_index,t_0,...,t_{M-1}` keyed by replica id.
pub fn write_temperature_log<T: Scalar>(path: &Path, log: &[TemperatureRow<T>]) -> Result<()> {
    let m = log.first().map_or(0, |r| r.temperatures.len());
    let mut out = String::from("sample_index");
    for r in 0..m {
        let _ = write!(out, ",replica_{r}");
    }
    out.push('\n');
    for row in log {
        let _ = write!(out, "{}", row.sample_index);
        for t in &row.temperatures {
            let _ = write!(out, ",{t:e}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_temperature_log<T: Scalar>(path: &Path) -> Result<Vec<TemperatureRow<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty temperature log"))?;
    if !header.starts_with("sample_index") {
        return Err(Error::format(path, "missing temperature log header"));
    }
    let m = header.split(',').count() - 1;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::format(path, format!("malformed temperature row {}", i + 2));
            let mut f = line.split(',');
            let sample_index = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let temperatures = f
                .map(|s| s.parse::<T>().map_err(|_| bad()))
                .collect::<Result<Vec<T>>>()?;
            if temperatures.len() != m {
                return Err(bad());
            }
            Ok(TemperatureRow {
                sample_index,
                temperatures,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{BimodalTarget, GaussianTarget};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn ladder_examples() {
        let l = build_ladder(8, 2.0f64);
        assert_eq!(l.len(), 8);
        assert_eq!(l[0], 1.0);
        assert_eq!(l[7], 2.0);
        assert_abs_diff_eq!(l[1], 2f64.powf(1.0 / 7.0), epsilon = 1e-15);
        for w in l.windows(3) {
            assert_abs_diff_eq!(w[1] / w[0], w[2] / w[1], epsilon = 1e-12);
        }
        assert_eq!(build_ladder(2, 4.0f64), vec![1.0, 4.0]);
        assert_eq!(build_ladder(1, 4.0f64), vec![1.0]);
    }

    #[test]
    fn swap_ratio_examples() {
        assert_eq!(swap_log_ratio(-3.0, -3.0, 1.0, 2.0), 0.0);
        assert_eq!(swap_log_ratio(-3.0, -9.0, 1.5, 1.5), 0.0);
        assert_abs_diff_eq!(
            swap_log_ratio(-100.0, -90.0, 1.0, 2.0),
            5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pair_schedule_examples() {
        assert_eq!(swap_pair_schedule(0, 4), vec![(0, 1), (2, 3)]);
        assert_eq!(swap_pair_schedule(1, 4), vec![(1, 2)]);
        assert!(swap_pair_schedule(0, 1).is_empty());
        // counting oracle: each neighbor pair on exactly half the barriers
        let m = 7;
        let mut seen = vec![0usize; m - 1];
        for b in 0..1000 {
            for (i, j) in swap_pair_schedule(b, m) {
                assert_eq!(j, i + 1);
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 500), "{seen:?}");
    }

    #[test]
    fn config_validation() {
        let ok = TemperingConfig::<f64> {
            n_replicas: 4,
            t_max: 2.0,
            swap_interval: 5,
            max_samples: 20,
            switch_sample: 10,
            seed: 0,
        };
        assert!(ok.validate().is_ok());
        assert!(TemperingConfig {
            n_replicas: 0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TemperingConfig { t_max: 0.5, ..ok }.validate().is_err());
        assert!(TemperingConfig {
            swap_interval: 0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TemperingConfig {
            swap_interval: 21,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TemperingConfig {
            switch_sample: 21,
            ..ok
        }
        .validate()
        .is_err());
    }

    fn gaussian() -> GaussianTarget<f64> {
        GaussianTarget::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn toy_proposal() -> ProposalConfig<f64> {
        ProposalConfig {
            step_sd: 0.5,
            learn_rate: 0.05,
            tau_step_sd: 0.0,
            lg_rate: 0.5,
            ..ProposalConfig::default()
        }
    }

    fn toy_options() -> EnsembleOptions<f64> {
        EnsembleOptions {
            init: Initialization::Random {
                weight_sd: 1.0,
                shared: false,
                log_tau_sq: Some(0.0),
            },
            thin: 1,
            execution: Execution::Sequential,
        }
    }

    fn toy_config(m: usize) -> TemperingConfig<f64> {
        TemperingConfig {
            n_replicas: m,
            t_max: 5.0,
            swap_interval: 3,
            max_samples: 40,
            switch_sample: 20,
            seed: 9,
        }
    }

    #[test]
    fn single_replica_never_swaps() {
        let r = run_ensemble(&toy_config(1), &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        assert_eq!(r.swaps.attempts + r.post_switch_swaps.attempts, 0);
        assert_eq!(r.chains.len(), 1);
        assert_eq!(r.chains[0].len(), 40);
        assert!(r.chains[0].records.iter().all(|rec| rec.temperature == 1.0));
    }

    #[test]
    fn posterior_holds_only_post_switch_samples() {
        let r = run_ensemble(&toy_config(4), &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        let post = r.posterior();
        assert_eq!(post.len(), 4 * 20);
        assert!(post
            .iter()
            .all(|s| s.sample_index >= 20 && s.temperature == 1.0));
        assert!(r.swaps.accepts <= r.swaps.attempts);
        assert_eq!(r.post_switch_swaps.accepts, r.post_switch_swaps.attempts);
        for rec in &r.swap_log {
            assert_eq!(rec.post_switch, rec.sample_index >= 20);
        }
    }

    #[test]
    fn temperatures_are_a_permutation_of_the_ladder_before_the_switch() {
        let cfg = TemperingConfig {
            n_replicas: 5,
            max_samples: 300,
            switch_sample: 150,
            swap_interval: 2,
            ..toy_config(5)
        };
        let target = BimodalTarget::new(4.0, 0.7);
        let r = run_ensemble(&cfg, &toy_proposal(), &target, &toy_options()).unwrap();
        assert!(r.swaps.accepts > 0);
        let ladder = build_ladder(5, 5.0);
        for i in 0..cfg.max_samples {
            let mut ts: Vec<f64> = r.chains.iter().map(|c| c.records[i].temperature).collect();
            ts.sort_by(f64::total_cmp);
            if i < cfg.switch_sample {
                assert_eq!(ts, ladder, "sample {i}");
            } else {
                assert!(ts.iter().all(|&t| t == 1.0));
            }
        }
        // the temperature log replays the per-sample temperatures
        for c in &r.chains {
            for rec in &c.records {
                let row = r
                    .temperature_log
                    .iter()
                    .rev()
                    .find(|row| row.sample_index <= rec.sample_index)
                    .unwrap();
                assert_eq!(row.temperatures[c.replica_id], rec.temperature);
            }
        }
    }

    #[test]
    fn swaps_move_temperatures_not_states() {
        let cfg = TemperingConfig {
            n_replicas: 4,
            max_samples: 60,
            switch_sample: 60,
            swap_interval: 1,
            ..toy_config(4)
        };
        let r = run_ensemble(
            &cfg,
            &toy_proposal(),
            &BimodalTarget::new(4.0, 0.7),
            &toy_options(),
        )
        .unwrap();
        assert!(r.swaps.accepts > 0);
        // across every accepted swap each replica continues from its own last state
        for c in &r.chains {
            for w in c.snapshots.windows(2) {
                let rec = &c.records[w[1].sample_index];
                if !rec.accepted {
                    assert_eq!(w[0].state, w[1].state);
                }
            }
        }
    }

    #[test]
    fn no_switch_means_no_posterior_but_tempered_samples() {
        let cfg = TemperingConfig {
            switch_sample: 40,
            ..toy_config(3)
        };
        let r = run_ensemble(&cfg, &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        assert!(r.posterior().is_empty());
        assert_eq!(r.temperature_one_samples(0).len(), 40);
    }

    #[test]
    fn pool_matches_sequential() {
        let seq =
            run_ensemble(&toy_config(4), &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        let opts = EnsembleOptions {
            execution: Execution::Pool { workers: 3 },
            ..toy_options()
        };
        let par = run_ensemble(&toy_config(4), &toy_proposal(), &gaussian(), &opts).unwrap();
        assert_eq!(format!("{:?}", seq.chains), format!("{:?}", par.chains));
        assert_eq!(seq.swap_log, par.swap_log);
    }

    #[test]
    fn adding_replicas_keeps_existing_streams() {
        // without swaps, replica 0 sees the same stream regardless of M
        let one = TemperingConfig {
            t_max: 1.0,
            ..toy_config(1)
        };
        let three = TemperingConfig {
            t_max: 1.0,
            ..toy_config(3)
        };
        let a = run_ensemble(&one, &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        let b = run_ensemble(&three, &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        assert_eq!(
            format!("{:?}", a.chains[0].records),
            format!("{:?}", b.chains[0].records)
        );
    }

    #[test]
    fn shared_and_explicit_initialization() {
        let init = Initialization::Random {
            weight_sd: 1.0,
            shared: true,
            log_tau_sq: None,
        };
        let states = init.states(&gaussian(), 3, 4).unwrap();
        assert!(states.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(states[0].log_tau_sq, 0.0);
        let fixed = ModelState::new(ParamVector(vec![0.5, 0.5]), 0.0);
        assert_eq!(
            Initialization::States(vec![fixed.clone()])
                .states(&gaussian(), 2, 0)
                .unwrap(),
            vec![fixed.clone(), fixed.clone()]
        );
        assert!(Initialization::States(vec![fixed.clone(), fixed.clone()])
            .states(&gaussian(), 3, 0)
            .is_err());
    }

    #[test]
    fn failure_returns_partial_run() {
        let wrong = Initialization::States(vec![ModelState::new(ParamVector(vec![0.0; 3]), 0.0)]);
        let opts = EnsembleOptions {
            init: wrong,
            ..toy_options()
        };
        match run_ensemble(&toy_config(2), &toy_proposal(), &gaussian(), &opts) {
            Err(EnsembleError::Invalid(Error::Dimension(_))) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_files_round_trip() {
        let r = run_ensemble(&toy_config(3), &toy_proposal(), &gaussian(), &toy_options()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sp = dir.path().join("swap_log.csv");
        write_swap_log(&sp, &r.swap_log).unwrap();
        assert_eq!(read_swap_log::<f64>(&sp).unwrap(), r.swap_log);
        let tp = dir.path().join("temperatures.csv");
        write_temperature_log(&tp, &r.temperature_log).unwrap();
        assert_eq!(read_temperature_log::<f64>(&tp).unwrap(), r.temperature_log);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ladder_is_geometric_and_increasing(m in 1usize..20, t_max in 1.0f64..100.0) {
            let l = build_ladder(m, t_max);
            prop_assert_eq!(l.len(), m);
            prop_assert_eq!(l[0], 1.0);
            if m > 1 {
                prop_assert_eq!(l[m - 1], t_max);
                let r = (t_max).powf(1.0 / (m - 1) as f64);
                for w in l.windows(2) {
                    prop_assert!(w[1] >= w[0]);
                    prop_assert!((w[1] / w[0] - r).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn swap_ratio_ignores_pair_order(la in -1e3f64..0.0, lb in -1e3f64..0.0, ta in 1.0f64..10.0, tb in 1.0f64..10.0) {
            let fwd = swap_log_ratio(la, lb, ta, tb);
            let rev = swap_log_ratio(lb, la, tb, ta);
            prop_assert!((fwd - rev).abs() <= 1e-9 * (1.0 + fwd.abs()));
            // moving the better likelihood to the colder rung is always accepted
            if la < lb && ta < tb {
                prop_assert!(fwd >= 0.0);
            }
        }
    }
}
