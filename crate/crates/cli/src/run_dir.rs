//! Layout of a run directory and the code that writes and reloads it.
//!
//! A run directory holds everything later commands need: the manifest (config
//! echo plus results), both normalized splits, per-replica traces and
//! parameter snapshots, the swap log and the temperature log.

use std::path::{Path, PathBuf};

use ptbae::autoencoder::params_header;
use ptbae::data::{load_dataset, save_dataset};
use ptbae::kv::{join_list, KvDoc};
use ptbae::sampler::{read_snapshots, write_snapshots, write_trace};
use ptbae::tempering::{write_swap_log, write_temperature_log};
use ptbae::{Dataset, EnsembleResult, Scalar, Snapshot, Topology};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.txt")
    }
    pub fn train_data(&self) -> PathBuf {
        self.root.join("train.csv")
    }
    pub fn test_data(&self) -> PathBuf {
        self.root.join("test.csv")
    }
    pub fn trace(&self, replica: usize) -> PathBuf {
        self.root.join(format!("chain_{replica}.csv"))
    }
    pub fn params(&self, replica: usize) -> PathBuf {
        self.root.join(format!("params_{replica}.csv"))
    }
    pub fn swap_log(&self) -> PathBuf {
        self.root.join("swap_log.csv")
    }
    pub fn temperatures(&self) -> PathBuf {
        self.root.join("temperatures.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.txt")
    }
    pub fn map_params(&self) -> PathBuf {
        self.root.join("map_params.csv")
    }
    pub fn rhat(&self) -> PathBuf {
        self.root.join("rhat.csv")
    }

    pub fn create(&self, overwrite: bool) -> CliResult<()> {
        if self.manifest().exists() && !overwrite {
            return Err(CliError::Usage(format!(
                "{} already holds a run; pass --force or choose another output.dir",
                self.root.display()
            )));
        }
        std::fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", self.root.display())))
    }

    pub fn read_manifest(&self) -> CliResult<KvDoc> {
        let path = self.manifest();
        if !path.is_file() {
            return Err(CliError::Data(format!(
                "{} is not a run directory (no manifest.txt)",
                self.root.display()
            )));
        }
        Ok(KvDoc::read(&path)?)
    }
}

/// Config echo with the run status, written before sampling starts.
pub fn write_pending_manifest(dir: &RunDir, cfg: &ExperimentConfig) -> CliResult<()> {
    let mut doc = cfg.to_kv();
    doc.set("manifest.status", "running");
    doc.write(&dir.manifest())?;
    Ok(())
}

pub fn write_splits<T: Scalar>(
    dir: &RunDir,
    train: &Dataset<T>,
    test: &Dataset<T>,
) -> CliResult<()> {
    save_dataset(train, &dir.train_data())?;
    save_dataset(test, &dir.test_data())?;
    Ok(())
}

/// Traces, snapshots, logs and the final manifest. `error` marks an aborted run.
pub fn write_result<T: Scalar>(
    dir: &RunDir,
    cfg: &ExperimentConfig,
    topology: &Topology,
    result: &EnsembleResult<T>,
    error: Option<&ptbae::Error>,
) -> CliResult<()> {
    let header = params_header::<T>(topology);
    for chain in &result.chains {
        write_trace(&dir.trace(chain.replica_id), chain)?;
        write_snapshots(&dir.params(chain.replica_id), &header, chain)?;
    }
    write_swap_log(&dir.swap_log(), &result.swap_log)?;
    write_temperature_log(&dir.temperatures(), &result.temperature_log)?;

    let mut doc = cfg.to_kv();
    doc.set(
        "manifest.status",
        if error.is_some() {
            "aborted"
        } else {
            "complete"
        },
    );
    if let Some(e) = error {
        doc.set("manifest.error", e.to_string().replace('\n', " "));
    }
    doc.set("manifest.ladder", join_list(&result.ladder));
    doc.set("manifest.n_params", topology.total_params());
    doc.set("manifest.samples_drawn", result.samples_drawn());
    doc.set("manifest.wall_seconds", result.wall_time.as_secs_f64());
    doc.set("manifest.swap_attempts", result.swaps.attempts);
    doc.set("manifest.swap_accepts", result.swaps.accepts);
    doc.set(
        "manifest.post_switch_swap_attempts",
        result.post_switch_swaps.attempts,
    );
    doc.set(
        "manifest.post_switch_swap_accepts",
        result.post_switch_swaps.accepts,
    );
    doc.set(
        "manifest.acceptance_pct",
        pct(result.acceptance().overall_pct()),
    );
    doc.set(
        "manifest.post_burn_in_acceptance_pct",
        pct(result.post_burn_in_acceptance().overall_pct()),
    );
    doc.set("manifest.swap_pct", pct(result.swaps.pct()));
    doc.write(&dir.manifest())?;
    Ok(())
}

fn pct(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// A completed run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun<T> {
    pub config: ExperimentConfig,
    pub manifest: KvDoc,
    pub topology: Topology,
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    /// Snapshots per replica, in replica order.
    pub chains: Vec<Vec<Snapshot<T>>>,
}

impl<T: Scalar> LoadedRun<T> {
    pub fn load(dir: &RunDir) -> CliResult<Self> {
        let manifest = dir.read_manifest()?;
        let config = ExperimentConfig::from_kv(&manifest, "swiss-desk")
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.manifest().display())))?;
        if manifest.get("manifest.status") == Some("running") {
            return Err(CliError::Data(format!(
                "{} is an unfinished run",
                dir.root.display()
            )));
        }
        let topology = config.model.topology()?;
        let train = load_existing(&dir.train_data())?;
        let test = load_existing(&dir.test_data())?;
        let mut chains = Vec::with_capacity(config.tempering.n_replicas);
        for r in 0..config.tempering.n_replicas {
            let path = dir.params(r);
            if !path.is_file() {
                return Err(CliError::Data(format!("missing {}", path.display())));
            }
            let (header, snaps) = read_snapshots::<T>(&path, r)?;
            if header != params_header::<T>(&topology) {
                return Err(CliError::Data(format!(
                    "{}: header does not match the manifest topology",
                    path.display()
                )));
            }
            if let Some(bad) = snaps
                .iter()
                .find(|s| s.state.params.len() != topology.total_params())
            {
                return Err(CliError::Data(format!(
                    "{}: sample {} has {} parameters, expected {}",
                    path.display(),
                    bad.sample_index,
                    bad.state.params.len(),
                    topology.total_params()
                )));
            }
            chains.push(snaps);
        }
        Ok(Self {
            config,
            manifest,
            topology,
            train,
            test,
            chains,
        })
    }

    /// Per-replica snapshots drawn at temperature 1 after the switch.
    pub fn posterior_chains(&self) -> Vec<Vec<&Snapshot<T>>> {
        let switch = self.config.tempering.switch_sample;
        self.chains
            .iter()
            .map(|c| c.iter().filter(|s| s.sample_index >= switch).collect())
            .collect()
    }

    pub fn posterior(&self) -> Vec<&Snapshot<T>> {
        self.posterior_chains().into_iter().flatten().collect()
    }

    pub fn manifest_f64(&self, key: &str) -> f64 {
        self.manifest
            .parsed::<f64>(key)
            .ok()
            .flatten()
            .unwrap_or(f64::NAN)
    }
}

fn load_existing<T: Scalar>(path: &Path) -> CliResult<Dataset<T>> {
    if !path.is_file() {
        return Err(CliError::Data(format!("missing {}", path.display())));
    }
    Ok(load_dataset(path)?)
}
