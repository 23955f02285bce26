//! Samplers against targets whose moments are known in closed form or by quadrature.

mod common;

use common::*;
use ptbae::autoencoder::Activation;
use ptbae::model::{tempered_log_posterior, ModelState};
use ptbae::proposals::{propose_lg, propose_random_walk, ProposalConfig};
use ptbae::rng::stream_rng;
use ptbae::toy::GaussianTarget;
use ptbae::{
    BayesAutoencoder, Dataset, ParamVector, PriorConfig, Scalar, SquaredErrorModel, Topology,
};

fn correlated_target() -> GaussianTarget<f64> {
    GaussianTarget::from_covariance_2d([1.0, -2.0], [[1.0, 0.6], [0.6, 2.0]]).unwrap()
}

fn lg_only(step_sd: f64, learn_rate: f64) -> ProposalConfig<f64> {
    ProposalConfig {
        step_sd,
        learn_rate,
        tau_step_sd: 0.0,
        lg_rate: 1.0,
        ..ProposalConfig::default()
    }
}

#[test]
fn lg_chain_recovers_correlated_gaussian() {
    let target = correlated_target();
    let n = 100_000;
    let (xs, acc) = run_chain(&target, vec![1.0, -2.0], &lg_only(0.8, 0.3), n, 11, 1.0);
    assert!(acc > 20.0, "acceptance {acc}");
    for (d, &m) in [1.0, -2.0].iter().enumerate() {
        let se = batch_means_se(&xs[d], 100);
        assert!(
            (mean(&xs[d]) - m).abs() < 3.0 * se,
            "mean {d}: {} vs {m} (se {se})",
            mean(&xs[d])
        );
    }
    let cov = [
        [variance(&xs[0]), covariance(&xs[0], &xs[1])],
        [0.0, variance(&xs[1])],
    ];
    assert!((cov[0][0] - 1.0).abs() < 0.1, "{cov:?}");
    assert!((cov[1][1] - 2.0).abs() < 0.2, "{cov:?}");
    assert!((cov[0][1] - 0.6).abs() < 0.06, "{cov:?}");
}

/// Hand-rolled LG Metropolis-Hastings loop; `corrected = false` drops the proposal density ratio.
fn lg_variance(
    target: &GaussianTarget<f64>,
    cfg: &ProposalConfig<f64>,
    corrected: bool,
    n: usize,
) -> f64 {
    let mut rng = stream_rng(5, 0);
    let mut state = ModelState::new(ParamVector(vec![1.0, -2.0]), 0.0);
    let mut post = target.log_likelihood(&state).unwrap();
    let mut grad = target.loss_and_gradient(&state.params).unwrap().1;
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let out = propose_lg(&state, &grad, cfg, target, &mut rng).unwrap();
        let p = target.log_likelihood(&out.proposed).unwrap();
        let log_alpha = p - post + if corrected { out.log_q_ratio } else { 0.0 };
        if f64::unit_uniform(&mut rng).ln() < log_alpha.min(0.0) {
            state = out.proposed;
            post = p;
            grad = out.evaluation.unwrap().1;
        }
        xs.push(state.params[0]);
    }
    variance(&xs)
}

#[test]
fn dropping_the_density_ratio_biases_the_variance() {
    let target = correlated_target();
    let cfg = lg_only(0.8, 0.3);
    let good = lg_variance(&target, &cfg, true, 100_000);
    let bad = lg_variance(&target, &cfg, false, 100_000);
    assert!((good - 1.0).abs() < 0.1, "corrected variance {good}");
    assert!(
        (bad - 1.0).abs() > 0.2,
        "uncorrected variance {bad} should be visibly off"
    );
}

#[test]
fn random_walk_on_standard_normal() {
    let target = GaussianTarget::new(vec![0.0], vec![1.0]).unwrap();
    let cfg = ProposalConfig {
        step_sd: 2.4,
        tau_step_sd: 0.0,
        lg_rate: 0.0,
        ..ProposalConfig::default()
    };
    let (xs, _) = run_chain(&target, vec![0.0], &cfg, 100_000, 3, 1.0);
    let se = batch_means_se(&xs[0], 100);
    assert!(mean(&xs[0]).abs() < 3.0 * se);
    assert!((variance(&xs[0]) - 1.0).abs() < 0.1);
}

#[test]
fn random_walk_flux_balances_between_bins() {
    // three bins on N(0.3, 1); the flux between the two outer bins is not forced to balance by topology
    let target = GaussianTarget::new(vec![0.3], vec![1.0]).unwrap();
    let cfg = ProposalConfig {
        step_sd: 3.0,
        tau_step_sd: 0.0,
        lg_rate: 0.0,
        ..ProposalConfig::default()
    };
    let (xs, _) = run_chain(&target, vec![0.3], &cfg, 200_000, 8, 1.0);
    let bin = |x: f64| {
        if x < -0.5 {
            0
        } else if x < 0.5 {
            1
        } else {
            2
        }
    };
    let mut flux = [[0u64; 3]; 3];
    for w in xs[0].windows(2) {
        flux[bin(w[0])][bin(w[1])] += 1;
    }
    for (a, b) in [(0, 2), (0, 1), (1, 2)] {
        let (ab, ba) = (flux[a][b] as f64, flux[b][a] as f64);
        assert!(
            (ab - ba).abs() < 4.0 * (ab + ba).sqrt(),
            "{a}->{b}: {ab} vs {ba}"
        );
    }
}

#[test]
fn hotter_replicas_accept_more_often() {
    let target = correlated_target();
    let cfg = ProposalConfig {
        step_sd: 1.5,
        tau_step_sd: 0.0,
        lg_rate: 0.0,
        ..ProposalConfig::default()
    };
    let temps = [1.0, 2.0, 4.0, 8.0];
    let rates: Vec<f64> = temps
        .iter()
        .map(|&t| {
            (0..20)
                .map(|s| run_chain(&target, vec![1.0, -2.0], &cfg, 2000, s, t).1)
                .sum::<f64>()
                / 20.0
        })
        .collect();
    for w in rates.windows(2) {
        assert!(w[1] > w[0], "{rates:?}");
    }
}

#[test]
fn lg_with_vanishing_drift_matches_random_walk() {
    let target = correlated_target();
    let state = ModelState::new(ParamVector(vec![0.4, 0.1]), 0.0);
    let grad = target.loss_and_gradient(&state.params).unwrap().1;
    let cfg = ProposalConfig {
        learn_rate: 0.0,
        ..ProposalConfig::default()
    };
    for seed in 0..20 {
        let lg = propose_lg(&state, &grad, &cfg, &target, &mut stream_rng(seed, 0)).unwrap();
        let rw = propose_random_walk(&state, &cfg, &mut stream_rng(seed, 0));
        assert_eq!(lg.proposed, rw.proposed);
        assert_eq!(lg.log_q_ratio, 0.0);
    }
}

/// x' = w·x + b on one feature with fixed τ²; posterior mean of (w, b) by dense quadrature.
#[test]
fn linear_unit_posterior_mean_matches_quadrature() {
    let xs = [0.1, 0.35, 0.5, 0.8, 0.95];
    let data =
        Dataset::from_features(ndarray::Array2::from_shape_vec((5, 1), xs.to_vec()).unwrap());
    let topo =
        Topology::with_activations(vec![1, 1], Activation::Sigmoid, Activation::Identity).unwrap();
    let prior = PriorConfig {
        sigma_sq: 1.0,
        ..PriorConfig::default()
    };
    let model = BayesAutoencoder::new(topo, data, None, prior).unwrap();
    let log_tau_sq = (0.05f64).ln();

    let log_post = |w: f64, b: f64| {
        let state = ModelState::new(ParamVector(vec![w, b]), log_tau_sq);
        tempered_log_posterior(
            model.log_likelihood(&state).unwrap(),
            model.log_prior(&state),
            1.0,
        )
    };
    let (mut z, mut ew, mut eb, mut max) = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
    let grid: Vec<f64> = (0..=800).map(|i| -3.0 + 6.0 * i as f64 / 800.0).collect();
    for &w in &grid {
        for &b in &grid {
            max = f64::max(max, log_post(w, b));
        }
    }
    for &w in &grid {
        for &b in &grid {
            let p = (log_post(w, b) - max).exp();
            z += p;
            ew += w * p;
            eb += b * p;
        }
    }
    let (ew, eb) = (ew / z, eb / z);

    let mut r = ptbae::sampler::Replica::new(
        0,
        1.0,
        ModelState::new(ParamVector(vec![0.0, 0.0]), log_tau_sq),
        &model,
        stream_rng(21, 0),
        ptbae::sampler::ChainSchedule {
            switch_sample: 0,
            thin: 1_000_000,
        },
    )
    .unwrap();
    let cfg = ProposalConfig {
        step_sd: 0.5,
        tau_step_sd: 0.0,
        lg_rate: 0.0,
        ..ProposalConfig::default()
    };
    let (mut ws, mut bs) = (Vec::new(), Vec::new());
    for i in 0..120_000 {
        r.mh_step(&model, &cfg).unwrap();
        if i >= 20_000 {
            ws.push(r.state.params[0]);
            bs.push(r.state.params[1]);
        }
    }
    let (sw, sb) = (batch_means_se(&ws, 100), batch_means_se(&bs, 100));
    assert!(
        (mean(&ws) - ew).abs() < 3.0 * sw,
        "w: {} vs {ew} (se {sw})",
        mean(&ws)
    );
    assert!(
        (mean(&bs) - eb).abs() < 3.0 * sb,
        "b: {} vs {eb} (se {sb})",
        mean(&bs)
    );
}
