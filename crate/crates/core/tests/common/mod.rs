#![allow(dead_code)]

use ptbae::model::ModelState;
use ptbae::proposals::ProposalConfig;
use ptbae::rng::stream_rng;
use ptbae::sampler::{ChainSchedule, Replica};
use ptbae::{ParamVector, SquaredErrorModel};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

/// Standard error of the mean of a correlated series by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], n_batches: usize) -> f64 {
    let size = xs.len() / n_batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(mean).collect();
    (variance(&means) / means.len() as f64).sqrt()
}

/// Runs one temperature-1 chain and returns every sample of every coordinate.
pub fn run_chain<M: SquaredErrorModel<f64>>(
    model: &M,
    start: Vec<f64>,
    cfg: &ProposalConfig<f64>,
    n: usize,
    seed: u64,
    temperature: f64,
) -> (Vec<Vec<f64>>, f64) {
    let dim = start.len();
    let mut r = Replica::new(
        0,
        temperature,
        ModelState::new(ParamVector(start), 0.0),
        model,
        stream_rng(seed, 0),
        ChainSchedule {
            switch_sample: 0,
            thin: n + 1,
        },
    )
    .unwrap();
    let mut out = vec![Vec::with_capacity(n); dim];
    for _ in 0..n {
        r.mh_step(model, cfg).unwrap();
        for (d, v) in out.iter_mut().zip(r.state.params.iter()) {
            d.push(*v);
        }
    }
    let acc = r.chain.counts.overall_pct().unwrap();
    (out, acc)
}
