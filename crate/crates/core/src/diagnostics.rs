//! Convergence diagnostics, posterior summaries, reduced-data ensembles and
//! the kNN benchmark used to judge the reduced features.

use std::borrow::Borrow;
use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Zip};

use crate::autoencoder::Topology;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::sampler::Snapshot;
use crate::scalar::Scalar;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor n-1).
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Classic potential scale reduction factor of one scalar quantity.
///
/// `W` is the mean within-chain variance, `B/n` the variance of the chain
/// means, `V = (n-1)/n·W + B/n` and `R = sqrt(V/W)`. Chains that are all
/// constant have `W = 0` and are reported as degenerate.
pub fn gelman_rubin<C: AsRef<[f64]>>(chains: &[C]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::Config(format!(
            "R-hat needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].as_ref().len();
    if chains.iter().any(|c| c.as_ref().len() != n) {
        return Err(Error::Dimension(
            "R-hat chains must have equal lengths".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Config(format!(
            "R-hat needs at least 2 samples per chain, got {n}"
        )));
    }
    if chains
        .iter()
        .flat_map(|c| c.as_ref())
        .any(|x| !x.is_finite())
    {
        return Err(Error::NonFinite("R-hat input".into()));
    }
    let w = mean(
        &chains
            .iter()
            .map(|c| sample_variance(c.as_ref()))
            .collect::<Vec<_>>(),
    );
    if !(w > 0.0) {
        return Err(Error::Degenerate("every chain is constant (W = 0)".into()));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c.as_ref())).collect();
    let b_over_n = sample_variance(&means);
    let nf = n as f64;
    let v = (nf - 1.0) / nf * w + b_over_n;
    Ok((v / w).sqrt())
}

/// Chains shorter than this are not reported.
pub const MIN_RHAT_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RHatReport {
    pub parameter_ids: Vec<usize>,
    pub r_hat: Vec<f64>,
    pub n_chains: usize,
    pub n_samples_per_chain: usize,
}

/// R-hat of one flat parameter index over parallel chains of snapshots.
pub fn rhat_for_id<T: Scalar, S: Borrow<Snapshot<T>>>(chains: &[Vec<S>], id: usize) -> Result<f64> {
    let n_params = chains
        .iter()
        .flat_map(|c| c.first())
        .map(|s| s.borrow().state.params.len())
        .next()
        .ok_or_else(|| Error::Empty("posterior chains".into()))?;
    if id >= n_params {
        return Err(Error::OutOfRange {
            index: id,
            len: n_params,
        });
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < MIN_RHAT_SAMPLES {
        return Err(Error::Config(format!(
            "R-hat needs at least {MIN_RHAT_SAMPLES} retained samples per chain, got {n}"
        )));
    }
    let traces: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| {
            c.iter()
                .map(|s| s.borrow().state.params[id].as_f64())
                .collect()
        })
        .collect();
    gelman_rubin(&traces)
}

/// R-hat for every requested id; any invalid id fails the whole report.
pub fn rhat_report<T: Scalar, S: Borrow<Snapshot<T>>>(
    chains: &[Vec<S>],
    parameter_ids: &[usize],
) -> Result<RHatReport> {
    let r_hat = parameter_ids
        .iter()
        .map(|&id| rhat_for_id(chains, id))
        .collect::<Result<Vec<_>>>()?;
    Ok(RHatReport {
        parameter_ids: parameter_ids.to_vec(),
        r_hat,
        n_chains: chains.len(),
        n_samples_per_chain: chains.iter().map(Vec::len).min().unwrap_or(0),
    })
}

/// Best, mean and population standard deviation of a per-sample metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MseStats {
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub per_sample: Vec<f64>,
}

impl MseStats {
    pub fn from_samples(per_sample: Vec<f64>) -> Result<Self> {
        if per_sample.is_empty() {
            return Err(Error::Empty("metric samples".into()));
        }
        let best = per_sample.iter().copied().fold(f64::INFINITY, f64::min);
        let m = mean(&per_sample);
        let var =
            per_sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / per_sample.len() as f64;
        Ok(Self {
            best,
            mean: m,
            std: var.sqrt(),
            per_sample,
        })
    }
}

/// Run-level figures carried into a summary unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunFigures {
    pub acceptance_pct: f64,
    pub swap_pct: f64,
    pub wall_minutes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary<T> {
    pub n_samples: usize,
    pub train: MseStats,
    pub test: Option<MseStats>,
    pub map_state: ModelState<T>,
    pub map_log_posterior: f64,
    /// Position of the MAP sample in the posterior slice.
    pub map_index: usize,
    pub acceptance_pct: f64,
    pub swap_pct: f64,
    pub wall_minutes: f64,
}

/// Recomputes per-sample reconstruction MSE on both splits and finds the MAP
/// sample (largest untempered `log L + log p`; the first one on ties).
pub fn summarize<T: Scalar, S: Borrow<Snapshot<T>>>(
    posterior: &[S],
    topology: &Topology,
    train: &Dataset<T>,
    test: Option<&Dataset<T>>,
    figures: RunFigures,
) -> Result<PosteriorSummary<T>> {
    if posterior.is_empty() {
        return Err(Error::Empty("posterior".into()));
    }
    let mse_trace = |ds: &Dataset<T>| -> Result<Vec<f64>> {
        posterior
            .iter()
            .map(|s| {
                topology
                    .mse(&s.borrow().state.params, ds.features.view())
                    .map(|v| v.as_f64())
            })
            .collect()
    };
    let train_stats = MseStats::from_samples(mse_trace(train)?)?;
    let test_stats = match test {
        Some(ds) if ds.n_instances() > 0 => Some(MseStats::from_samples(mse_trace(ds)?)?),
        _ => None,
    };
    let (map_index, map_log_posterior) = posterior
        .iter()
        .map(|s| s.borrow().log_posterior().as_f64())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, lp)| {
            if lp > best.1 {
                (i, lp)
            } else {
                best
            }
        });
    Ok(PosteriorSummary {
        n_samples: posterior.len(),
        train: train_stats,
        test: test_stats,
        map_state: posterior[map_index].borrow().state.clone(),
        map_log_posterior,
        map_index,
        acceptance_pct: figures.acceptance_pct,
        swap_pct: figures.swap_pct,
        wall_minutes: figures.wall_minutes,
    })
}

/// Latent codes of a dataset under several posterior samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEnsemble<T> {
    pub members: Vec<Array2<T>>,
    /// Position of each member in the posterior it was drawn from.
    pub member_indices: Vec<usize>,
    pub mean: Array2<T>,
    /// Per-cell population standard deviation across members.
    pub sd: Array2<T>,
}

/// `k` evenly spaced positions in `0..len`, always including the first.
pub fn spread_indices(len: usize, k: usize) -> Vec<usize> {
    let k = k.min(len);
    (0..k).map(|i| i * len / k).collect()
}

/// Encodes `dataset` with up to `max_members` evenly spaced posterior samples.
pub fn reduce_ensemble<T: Scalar, S: Borrow<Snapshot<T>>>(
    posterior: &[S],
    dataset: &Dataset<T>,
    topology: &Topology,
    max_members: usize,
) -> Result<ReducedEnsemble<T>> {
    if posterior.is_empty() {
        return Err(Error::Empty("posterior".into()));
    }
    if max_members == 0 {
        return Err(Error::Config("max_members must be >= 1".into()));
    }
    let member_indices = spread_indices(posterior.len(), max_members);
    let members = member_indices
        .iter()
        .map(|&i| topology.encode(&posterior[i].borrow().state.params, dataset.features.view()))
        .collect::<Result<Vec<_>>>()?;
    let (mean, sd) = cell_mean_sd(&members);
    Ok(ReducedEnsemble {
        members,
        member_indices,
        mean,
        sd,
    })
}

fn cell_mean_sd<T: Scalar>(members: &[Array2<T>]) -> (Array2<T>, Array2<T>) {
    // shifted by the first member so identical members give exactly zero spread
    let k = T::of_usize(members.len());
    let origin = &members[0];
    let mut shift = Array2::<T>::zeros(origin.raw_dim());
    for m in members {
        Zip::from(&mut shift)
            .and(m)
            .and(origin)
            .for_each(|s, &x, &o| *s += x - o);
    }
    shift.mapv_inplace(|v| v / k);
    let mut var = Array2::<T>::zeros(origin.raw_dim());
    for m in members {
        Zip::from(&mut var)
            .and(m)
            .and(origin)
            .and(&shift)
            .for_each(|v, &x, &o, &s| *v += (x - o - s) * (x - o - s));
    }
    let mean = origin + &shift;
    let sd = var.mapv(|v| (v / k).sqrt());
    (mean, sd)
}

/// kNN labels of `test` rows: Euclidean distance, majority vote among the `k`
/// nearest, ties broken by the smallest summed distance and then the smaller label.
pub fn knn_predict<T: Scalar>(
    train: ArrayView2<'_, T>,
    labels: &[i64],
    test: ArrayView2<'_, T>,
    k: usize,
) -> Result<Vec<i64>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if train.nrows() == 0 {
        return Err(Error::Empty("kNN training set".into()));
    }
    if labels.len() != train.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} training rows",
            labels.len(),
            train.nrows()
        )));
    }
    if test.ncols() != train.ncols() {
        return Err(Error::Dimension(format!(
            "test rows have {} features, training rows {}",
            test.ncols(),
            train.ncols()
        )));
    }
    let k = k.min(train.nrows());
    let mut neighbors: Vec<(f64, i64)> = Vec::with_capacity(train.nrows());
    let predictions = test
        .rows()
        .into_iter()
        .map(|q| {
            neighbors.clear();
            for (row, &label) in train.rows().into_iter().zip(labels) {
                let d2: f64 = row
                    .iter()
                    .zip(q.iter())
                    .map(|(&a, &b)| (a - b).as_f64().powi(2))
                    .sum();
                neighbors.push((d2, label));
            }
            // ordering on (distance, label) keeps the vote independent of row order
            let by_key = |a: &(f64, i64), b: &(f64, i64)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < neighbors.len() {
                neighbors.select_nth_unstable_by(k - 1, by_key);
            }
            let mut votes: Vec<(i64, usize, f64)> = Vec::new();
            for &(d2, label) in &neighbors[..k] {
                match votes.iter_mut().find(|v| v.0 == label) {
                    Some(v) => {
                        v.1 += 1;
                        v.2 += d2.sqrt();
                    }
                    None => votes.push((label, 1, d2.sqrt())),
                }
            }
            votes
                .into_iter()
                .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
                .map(|v| v.0)
                .unwrap_or_default()
        })
        .collect();
    Ok(predictions)
}

/// Fraction of `test` rows whose kNN label matches `test_labels`.
pub fn knn_classify<T: Scalar>(
    train: ArrayView2<'_, T>,
    train_labels: &[i64],
    test: ArrayView2<'_, T>,
    test_labels: &[i64],
    k: usize,
) -> Result<f64> {
    if test_labels.len() != test.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} test rows",
            test_labels.len(),
            test.nrows()
        )));
    }
    if test.nrows() == 0 {
        return Err(Error::Empty("kNN test set".into()));
    }
    let predicted = knn_predict(train, train_labels, test, k)?;
    let correct = predicted
        .iter()
        .zip(test_labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(correct as f64 / test.nrows() as f64)
}

/// Sorts ids and removes duplicates, the order reports use.
pub fn canonical_ids(ids: &[usize]) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Median of finite values.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::ParamVector;
    use crate::data::generate_clusters;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn identical_short_chains_hand_value() {
        let c = vec![1.0, 2.0, 3.0, 4.0];
        let r = gelman_rubin(&[c.clone(), c]).unwrap();
        assert_abs_diff_eq!(r, 0.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn iid_chains_are_near_one() {
        let mut rng = stream_rng(3, 0);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                (0..10_000)
                    .map(|_| f64::standard_normal(&mut rng))
                    .collect()
            })
            .collect();
        let r = gelman_rubin(&chains).unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
    }

    #[test]
    fn separated_chains_are_far_from_one() {
        let mut rng = stream_rng(4, 0);
        let chains: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                (0..200)
                    .map(|_| c as f64 * 5.0 + f64::standard_normal(&mut rng))
                    .collect()
            })
            .collect();
        assert!(gelman_rubin(&chains).unwrap() > 2.0);
    }

    #[test]
    fn degenerate_and_malformed_inputs() {
        assert!(matches!(
            gelman_rubin(&[vec![2.0; 12], vec![2.0; 12]]),
            Err(Error::Degenerate(_))
        ));
        assert!(gelman_rubin(&[vec![1.0, 2.0]]).is_err());
        assert!(gelman_rubin(&[vec![1.0, 2.0], vec![1.0, 2.0, 3.0]]).is_err());
        assert!(gelman_rubin(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]).is_err());
    }

    fn snap(params: Vec<f64>, ll: f64, lp: f64, index: usize) -> Snapshot<f64> {
        Snapshot {
            replica_id: 0,
            sample_index: index,
            temperature: 1.0,
            state: ModelState::new(ParamVector(params), -3.0),
            log_likelihood: ll,
            log_prior: lp,
            train_mse: f64::NAN,
            test_mse: f64::NAN,
        }
    }

    #[test]
    fn rhat_report_rejects_out_of_range_ids() {
        let mut rng = stream_rng(5, 0);
        let chains: Vec<Vec<Snapshot<f64>>> = (0..3)
            .map(|_| {
                (0..20)
                    .map(|i| snap(vec![rng.random(), rng.random()], 0.0, 0.0, i))
                    .collect()
            })
            .collect();
        let report = rhat_report(&chains, &[0, 1]).unwrap();
        assert_eq!(report.n_chains, 3);
        assert_eq!(report.n_samples_per_chain, 20);
        assert!(report.r_hat.iter().all(|r| r.is_finite()));
        assert!(matches!(
            rhat_report(&chains, &[0, 10_000]),
            Err(Error::OutOfRange {
                index: 10_000,
                len: 2
            })
        ));
        let short: Vec<Vec<&Snapshot<f64>>> =
            chains.iter().map(|c| c.iter().take(5).collect()).collect();
        assert!(rhat_for_id(&short, 0).is_err());
    }

    fn tiny_topology() -> Topology {
        Topology::new(vec![2, 1, 2]).unwrap()
    }

    #[test]
    fn summary_of_single_sample() {
        let topo = tiny_topology();
        let ds = Dataset::from_features(array![[0.1, 0.9], [0.4, 0.2]]);
        let p = vec![0.3; topo.total_params()];
        let s = summarize(
            &[snap(p.clone(), -1.0, -2.0, 0)],
            &topo,
            &ds,
            Some(&ds),
            RunFigures::default(),
        )
        .unwrap();
        assert_eq!(s.train.best, s.train.mean);
        assert_eq!(s.train.std, 0.0);
        assert_eq!(s.test.as_ref().unwrap().best, s.train.best);
        assert_eq!(s.train.best, topo.mse(&p, ds.features.view()).unwrap());
        let empty: [Snapshot<f64>; 0] = [];
        assert!(summarize(&empty, &topo, &ds, None, RunFigures::default()).is_err());
    }

    #[test]
    fn summary_best_and_map() {
        let topo = tiny_topology();
        let ds = Dataset::from_features(array![[0.1, 0.9], [0.4, 0.2], [0.7, 0.7]]);
        let mut rng = stream_rng(6, 0);
        let post: Vec<Snapshot<f64>> = (0..30)
            .map(|i| {
                let p = (0..topo.total_params())
                    .map(|_| f64::standard_normal(&mut rng))
                    .collect();
                snap(p, -rng.random::<f64>() * 10.0, -rng.random::<f64>(), i)
            })
            .collect();
        let s = summarize(&post, &topo, &ds, None, RunFigures::default()).unwrap();
        assert!(s.test.is_none());
        assert_eq!(
            s.train.best,
            s.train
                .per_sample
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        );
        for p in &post {
            assert!(s.map_log_posterior >= p.log_posterior());
        }
        assert_eq!(s.map_state, post[s.map_index].state);
    }

    #[test]
    fn ensemble_of_identical_states_has_zero_sd() {
        let topo = tiny_topology();
        let ds = Dataset::from_features(array![[0.1, 0.9], [0.4, 0.2], [0.7, 0.7]]);
        let p = vec![0.5; topo.total_params()];
        let post: Vec<_> = (0..5).map(|i| snap(p.clone(), 0.0, 0.0, i)).collect();
        let e = reduce_ensemble(&post, &ds, &topo, 3).unwrap();
        assert_eq!(e.members.len(), 3);
        assert_eq!(e.member_indices, vec![0, 1, 3]);
        assert!(e.sd.iter().all(|&v| v == 0.0));
        assert_eq!(e.mean.dim(), (3, 1));
    }

    #[test]
    fn single_member_mean_is_its_latent() {
        let topo = tiny_topology();
        let ds = Dataset::from_features(array![[0.1, 0.9], [0.4, 0.2]]);
        let mut rng = stream_rng(7, 0);
        let post: Vec<_> = (0..4)
            .map(|i| {
                snap(
                    (0..topo.total_params()).map(|_| rng.random()).collect(),
                    0.0,
                    0.0,
                    i,
                )
            })
            .collect();
        let e = reduce_ensemble(&post, &ds, &topo, 1).unwrap();
        assert_eq!(
            e.mean,
            topo.encode(&post[0].state.params, ds.features.view())
                .unwrap()
        );
        assert!(e.sd.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ensemble_sd_shrinks_as_posterior_collapses() {
        let topo = Topology::new(vec![3, 2, 3]).unwrap();
        let ds = Dataset::from_features(array![[0.1, 0.9, 0.3], [0.4, 0.2, 0.8], [0.6, 0.5, 0.1]]);
        let mut rng = stream_rng(8, 0);
        let base: Vec<f64> = (0..topo.total_params())
            .map(|_| f64::standard_normal(&mut rng))
            .collect();
        let noise: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                (0..base.len())
                    .map(|_| f64::standard_normal(&mut rng))
                    .collect()
            })
            .collect();
        let mut previous = f64::INFINITY;
        for scale in [1.0, 0.3, 0.1, 0.03, 0.01, 0.0] {
            let post: Vec<_> = noise
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    snap(
                        base.iter().zip(n).map(|(b, e)| b + scale * e).collect(),
                        0.0,
                        0.0,
                        i,
                    )
                })
                .collect();
            let e = reduce_ensemble(&post, &ds, &topo, 10).unwrap();
            let total: f64 = e.sd.sum();
            assert!(
                total < previous || (total == 0.0 && previous == 0.0),
                "{scale}: {total} vs {previous}"
            );
            previous = total;
        }
        assert_eq!(previous, 0.0);
    }

    #[test]
    fn knn_identical_point_wins_at_k1() {
        let train = array![[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]];
        let pred = knn_predict(train.view(), &[7, 8, 9], array![[1.0, 1.0]].view(), 1).unwrap();
        assert_eq!(pred, vec![8]);
    }

    #[test]
    fn knn_tie_goes_to_nearer_class() {
        // two votes each; class 2 is closer in total
        let train = array![[1.0], [-1.0], [0.5], [-0.6]];
        let pred = knn_predict(train.view(), &[1, 1, 2, 2], array![[0.0]].view(), 4).unwrap();
        assert_eq!(pred, vec![2]);
    }

    #[test]
    fn knn_separated_clusters_are_perfect() {
        let train: Dataset<f64> = generate_clusters(50, 2, 3, 10.0, 0.1, 1).unwrap();
        let test: Dataset<f64> = generate_clusters(20, 2, 3, 10.0, 0.1, 2).unwrap();
        let acc = knn_classify(
            train.features.view(),
            train.labels.as_ref().unwrap(),
            test.features.view(),
            test.labels.as_ref().unwrap(),
            3,
        )
        .unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn knn_errors() {
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(knn_predict(empty.view(), &[], array![[0.0, 0.0]].view(), 1).is_err());
        assert!(knn_predict(
            array![[0.0, 0.0]].view(),
            &[1],
            array![[0.0, 0.0]].view(),
            0
        )
        .is_err());
    }

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[f64::NAN]), None);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rhat_is_affine_invariant(seed in any::<u64>(), a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0], b in -100.0f64..100.0) {
            let mut rng = stream_rng(seed, 0);
            let chains: Vec<Vec<f64>> = (0..3)
                .map(|c| (0..30).map(|_| c as f64 * 0.3 + f64::standard_normal(&mut rng)).collect())
                .collect();
            let moved: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| a * x + b).collect()).collect();
            let r0 = gelman_rubin(&chains).unwrap();
            let r1 = gelman_rubin(&moved).unwrap();
            prop_assert!((r0 - r1).abs() < 1e-10, "{} vs {}", r0, r1);
        }

        #[test]
        fn rhat_lower_bound(seed in any::<u64>(), n in 2usize..50, m in 2usize..6) {
            let mut rng = stream_rng(seed, 1);
            let chains: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
            let r = gelman_rubin(&chains).unwrap();
            prop_assert!(r >= ((n as f64 - 1.0) / n as f64).sqrt() - 1e-12);
        }

        #[test]
        fn knn_is_row_permutation_invariant(seed in any::<u64>(), k in 1usize..7) {
            let mut rng = stream_rng(seed, 2);
            let n = 25;
            // coarse grid values so distance ties actually occur
            let train = Array2::from_shape_fn((n, 2), |_| (rng.random_range(0..5)) as f64);
            let labels: Vec<i64> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let test = Array2::from_shape_fn((10, 2), |_| (rng.random_range(0..5)) as f64);
            let base = knn_predict(train.view(), &labels, test.view(), k).unwrap();
            let order = crate::data::shuffled_order(n, seed);
            let shuffled = train.select(ndarray::Axis(0), &order);
            let shuffled_labels: Vec<i64> = order.iter().map(|&i| labels[i]).collect();
            prop_assert_eq!(base, knn_predict(shuffled.view(), &shuffled_labels, test.view(), k).unwrap());
        }
    }
}
