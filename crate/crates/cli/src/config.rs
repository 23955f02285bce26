//! Experiment configuration: presets, flat `key=value` layering and validation.
//!
//! Every key has a value in every preset, so [`ExperimentConfig::to_kv`]
//! followed by [`ExperimentConfig::from_kv`] is the identity. Keys under
//! `manifest.` are run results and are ignored on input.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ptbae::kv::{join_list, parse_list, KvDoc};
use ptbae::model::PriorConfig;
use ptbae::proposals::ProposalConfig;
use ptbae::tempering::{EnsembleOptions, Execution, Initialization, TemperingConfig};
use ptbae::{Activation, Scalar, SplitSpec, Topology};

use crate::error::CliError;

/// Prefix of keys that record run outcomes rather than inputs.
pub const MANIFEST_PREFIX: &str = "manifest.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    SwissRoll,
    MadelonLike,
    Clusters,
    Csv,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::SwissRoll => "swiss_roll",
            DatasetKind::MadelonLike => "madelon_like",
            DatasetKind::Clusters => "clusters",
            DatasetKind::Csv => "csv",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "swiss_roll" => Ok(DatasetKind::SwissRoll),
            "madelon_like" => Ok(DatasetKind::MadelonLike),
            "clusters" => Ok(DatasetKind::Clusters),
            "csv" => Ok(DatasetKind::Csv),
            other => Err(format!(
                "unknown dataset kind {other:?} (swiss_roll, madelon_like, clusters, csv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(format!("unknown scalar {other:?} (f64, f32)")),
        }
    }
}

/// Where the data comes from. Generator fields are ignored for `csv` and vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Total instances to generate (clusters: split evenly over classes).
    pub n_points: usize,
    pub noise_sd: f64,
    pub n_features: usize,
    pub n_classes: usize,
    pub separation: f64,
    pub cluster_sd: f64,
    pub seed: u64,
    pub path: Option<PathBuf>,
    pub has_labels: bool,
    pub label_column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub scalar: Precision,
}

impl ModelSpec {
    pub fn topology(&self) -> Result<Topology, CliError> {
        Topology::with_activations(
            self.layer_sizes.clone(),
            self.hidden_activation,
            self.output_activation,
        )
        .map_err(|e| CliError::Usage(format!("model.topology: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub weight_sd: f64,
    pub shared: bool,
    /// `None` derives the start from the initial fit.
    pub log_tau_sq: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub thin: usize,
    /// 0 runs the sequential reference mode; otherwise a pool of this many threads.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSpec {
    pub rhat_ids: Vec<usize>,
    pub knn_k: usize,
    pub max_members: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub dataset: DatasetSpec,
    pub split: SplitSpec,
    pub model: ModelSpec,
    pub prior: PriorConfig<f64>,
    pub proposal: ProposalConfig<f64>,
    pub tempering: TemperingConfig<f64>,
    pub init: InitSpec,
    pub run: RunSpec,
    pub output_dir: PathBuf,
    pub diagnostics: DiagnosticsSpec,
}

pub const PRESETS: [&str; 6] = [
    "swiss-desk",
    "swiss-full",
    "madelon-desk",
    "madelon-full",
    "coil-desk",
    "coil-full",
];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let mut cfg = Self::swiss_desk();
        cfg.preset = name.to_string();
        cfg.output_dir = PathBuf::from("runs").join(name);
        let t = &mut cfg.tempering;
        match name {
            "swiss-desk" => {}
            "swiss-full" => {
                t.n_replicas = 8;
                t.max_samples = 6000;
                t.switch_sample = 3000;
            }
            "madelon-desk" | "madelon-full" => {
                let full = name == "madelon-full";
                let d = &mut cfg.dataset;
                d.kind = DatasetKind::MadelonLike;
                d.n_features = if full { 500 } else { 50 };
                d.n_points = if full { 3800 } else { 600 };
                cfg.split.train_count = if full { 2000 } else { 400 };
                cfg.split.test_count = if full { 1800 } else { 200 };
                cfg.model.layer_sizes = if full {
                    vec![500, 450, 400, 300, 400, 450, 500]
                } else {
                    vec![50, 45, 40, 30, 40, 45, 50]
                };
                cfg.run.thin = 25;
                if full {
                    t.n_replicas = 8;
                    t.max_samples = 6000;
                    t.switch_sample = 3000;
                }
            }
            "coil-desk" | "coil-full" => {
                let full = name == "coil-full";
                let d = &mut cfg.dataset;
                d.kind = DatasetKind::Csv;
                d.n_features = 85;
                d.has_labels = true;
                d.label_column = 85;
                cfg.split.train_count = if full { 5822 } else { 2000 };
                cfg.split.test_count = if full { 4000 } else { 1000 };
                cfg.model.layer_sizes = vec![85, 70, 60, 50, 60, 70, 85];
                cfg.run.thin = 25;
                if full {
                    t.n_replicas = 8;
                    t.max_samples = 6000;
                    t.switch_sample = 3000;
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown preset {other:?} (one of {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(cfg)
    }

    fn swiss_desk() -> Self {
        Self {
            preset: "swiss-desk".into(),
            dataset: DatasetSpec {
                kind: DatasetKind::SwissRoll,
                n_points: 5000,
                noise_sd: 0.0,
                n_features: 3,
                n_classes: 2,
                separation: 4.0,
                cluster_sd: 0.5,
                seed: 1,
                path: None,
                has_labels: false,
                label_column: 0,
            },
            split: SplitSpec {
                train_count: 3750,
                test_count: 1250,
                shuffle_seed: 1,
            },
            model: ModelSpec {
                layer_sizes: vec![3, 10, 5, 2, 5, 10, 3],
                hidden_activation: Activation::Sigmoid,
                output_activation: Activation::Sigmoid,
                scalar: Precision::F64,
            },
            prior: PriorConfig::default(),
            proposal: ProposalConfig::default(),
            tempering: TemperingConfig {
                n_replicas: 4,
                t_max: 2.0,
                swap_interval: 5,
                max_samples: 2000,
                switch_sample: 1000,
                seed: 1,
            },
            init: InitSpec {
                weight_sd: 0.1,
                shared: false,
                log_tau_sq: None,
            },
            run: RunSpec {
                thin: 1,
                workers: 0,
            },
            output_dir: PathBuf::from("runs/swiss-desk"),
            diagnostics: DiagnosticsSpec {
                rhat_ids: vec![0, 50, 100, 150],
                knn_k: 5,
                max_members: 10,
            },
        }
    }

    /// Preset named by `preset` in `doc` (or `default_preset`), overlaid with every key of `doc`.
    pub fn from_kv(doc: &KvDoc, default_preset: &str) -> Result<Self, CliError> {
        let name = doc.get("preset").unwrap_or(default_preset);
        let mut cfg = Self::preset(name)?;
        for (key, value) in doc.iter() {
            if key == "preset" || key.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            cfg.apply(key, value)?;
        }
        Ok(cfg)
    }

    /// Set one key. Unknown keys and unparsable values are usage errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        let bad = |m: String| CliError::Usage(format!("{key}={value}: {m}"));
        fn p<V: FromStr>(v: &str) -> Result<V, String> {
            v.parse::<V>().map_err(|_| format!("cannot parse {v:?}"))
        }
        let d = &mut self.dataset;
        let r: Result<(), String> = (|| {
            match key {
                "dataset.kind" => d.kind = p(value)?,
                "dataset.n_points" => d.n_points = p(value)?,
                "dataset.noise_sd" => d.noise_sd = p(value)?,
                "dataset.n_features" => d.n_features = p(value)?,
                "dataset.n_classes" => d.n_classes = p(value)?,
                "dataset.separation" => d.separation = p(value)?,
                "dataset.cluster_sd" => d.cluster_sd = p(value)?,
                "dataset.seed" => d.seed = p(value)?,
                "dataset.path" => d.path = (!value.is_empty()).then(|| PathBuf::from(value)),
                "dataset.has_labels" => d.has_labels = p(value)?,
                "dataset.label_column" => d.label_column = p(value)?,
                "split.train" => self.split.train_count = p(value)?,
                "split.test" => self.split.test_count = p(value)?,
                "split.seed" => self.split.shuffle_seed = p(value)?,
                "model.topology" => {
                    self.model.layer_sizes = Topology::parse(value).map_err(|e| e.to_string())?
                }
                "model.hidden_activation" => {
                    self.model.hidden_activation =
                        value.parse().map_err(|e: ptbae::Error| e.to_string())?
                }
                "model.output_activation" => {
                    self.model.output_activation =
                        value.parse().map_err(|e: ptbae::Error| e.to_string())?
                }
                "model.scalar" => self.model.scalar = p(value)?,
                "prior.sigma_sq" => self.prior.sigma_sq = p(value)?,
                "prior.nu_1" => self.prior.nu_1 = p(value)?,
                "prior.nu_2" => self.prior.nu_2 = p(value)?,
                "proposal.step_sd" => self.proposal.step_sd = p(value)?,
                "proposal.learn_rate" => self.proposal.learn_rate = p(value)?,
                "proposal.tau_step_sd" => self.proposal.tau_step_sd = p(value)?,
                "proposal.lg_rate" => self.proposal.lg_rate = p(value)?,
                "proposal.adam_beta1" => self.proposal.adam_beta1 = p(value)?,
                "proposal.adam_beta2" => self.proposal.adam_beta2 = p(value)?,
                "proposal.adam_eps" => self.proposal.adam_eps = p(value)?,
                "tempering.n_replicas" => self.tempering.n_replicas = p(value)?,
                "tempering.t_max" => self.tempering.t_max = p(value)?,
                "tempering.swap_interval" => self.tempering.swap_interval = p(value)?,
                "tempering.max_samples" => self.tempering.max_samples = p(value)?,
                "tempering.switch_sample" => self.tempering.switch_sample = p(value)?,
                "tempering.seed" => self.tempering.seed = p(value)?,
                "init.weight_sd" => self.init.weight_sd = p(value)?,
                "init.shared" => self.init.shared = p(value)?,
                "init.log_tau_sq" => {
                    self.init.log_tau_sq = if value == "auto" {
                        None
                    } else {
                        Some(p(value)?)
                    }
                }
                "run.thin" => self.run.thin = p(value)?,
                "run.workers" => self.run.workers = p(value)?,
                "output.dir" => self.output_dir = PathBuf::from(value),
                "diagnostics.rhat_ids" => {
                    self.diagnostics.rhat_ids =
                        parse_list(value).map_err(|b| format!("bad id {b:?}"))?
                }
                "diagnostics.knn_k" => self.diagnostics.knn_k = p(value)?,
                "diagnostics.max_members" => self.diagnostics.max_members = p(value)?,
                _ => return Err("unknown key".into()),
            }
            Ok(())
        })();
        r.map_err(bad)
    }

    /// Full echo; feeding it back through [`Self::from_kv`] reproduces `self`.
    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let d = &self.dataset;
        doc.set("preset", &self.preset);
        doc.set("dataset.kind", d.kind);
        doc.set("dataset.n_points", d.n_points);
        doc.set("dataset.noise_sd", d.noise_sd);
        doc.set("dataset.n_features", d.n_features);
        doc.set("dataset.n_classes", d.n_classes);
        doc.set("dataset.separation", d.separation);
        doc.set("dataset.cluster_sd", d.cluster_sd);
        doc.set("dataset.seed", d.seed);
        doc.set(
            "dataset.path",
            d.path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        doc.set("dataset.has_labels", d.has_labels);
        doc.set("dataset.label_column", d.label_column);
        doc.set("split.train", self.split.train_count);
        doc.set("split.test", self.split.test_count);
        doc.set("split.seed", self.split.shuffle_seed);
        doc.set(
            "model.topology",
            self.model
                .layer_sizes
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("-"),
        );
        doc.set("model.hidden_activation", self.model.hidden_activation);
        doc.set("model.output_activation", self.model.output_activation);
        doc.set("model.scalar", self.model.scalar);
        doc.set("prior.sigma_sq", self.prior.sigma_sq);
        doc.set("prior.nu_1", self.prior.nu_1);
        doc.set("prior.nu_2", self.prior.nu_2);
        let q = &self.proposal;
        doc.set("proposal.step_sd", q.step_sd);
        doc.set("proposal.learn_rate", q.learn_rate);
        doc.set("proposal.tau_step_sd", q.tau_step_sd);
        doc.set("proposal.lg_rate", q.lg_rate);
        doc.set("proposal.adam_beta1", q.adam_beta1);
        doc.set("proposal.adam_beta2", q.adam_beta2);
        doc.set("proposal.adam_eps", q.adam_eps);
        let t = &self.tempering;
        doc.set("tempering.n_replicas", t.n_replicas);
        doc.set("tempering.t_max", t.t_max);
        doc.set("tempering.swap_interval", t.swap_interval);
        doc.set("tempering.max_samples", t.max_samples);
        doc.set("tempering.switch_sample", t.switch_sample);
        doc.set("tempering.seed", t.seed);
        doc.set("init.weight_sd", self.init.weight_sd);
        doc.set("init.shared", self.init.shared);
        doc.set(
            "init.log_tau_sq",
            self.init
                .log_tau_sq
                .map_or("auto".to_string(), |v| v.to_string()),
        );
        doc.set("run.thin", self.run.thin);
        doc.set("run.workers", self.run.workers);
        doc.set("output.dir", self.output_dir.display());
        doc.set(
            "diagnostics.rhat_ids",
            join_list(&self.diagnostics.rhat_ids),
        );
        doc.set("diagnostics.knn_k", self.diagnostics.knn_k);
        doc.set("diagnostics.max_members", self.diagnostics.max_members);
        doc
    }

    /// Feature count the dataset will have, when known without reading files.
    pub fn expected_features(&self) -> Option<usize> {
        match self.dataset.kind {
            DatasetKind::SwissRoll => Some(3),
            DatasetKind::MadelonLike | DatasetKind::Clusters => Some(self.dataset.n_features),
            DatasetKind::Csv => None,
        }
    }

    /// Every statically checkable problem, reported together.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let mut check = |r: Result<(), String>| {
            if let Err(m) = r {
                problems.push(m);
            }
        };
        check(self.model.topology().map(|_| ()).map_err(|e| e.to_string()));
        if let (Some(d), Some(&first)) = (self.expected_features(), self.model.layer_sizes.first())
        {
            if d != first {
                check(Err(format!(
                    "model.topology input width {first} differs from the dataset's {d} features"
                )));
            }
        }
        check(self.prior.validate().map_err(|e| e.to_string()));
        check(self.proposal.validate().map_err(|e| e.to_string()));
        check(self.tempering.validate().map_err(|e| e.to_string()));
        let ds = &self.dataset;
        match ds.kind {
            DatasetKind::Csv => match &ds.path {
                None => check(Err("dataset.path is required for csv data".into())),
                Some(p) if !p.is_file() => {
                    check(Err(format!("dataset.path {} does not exist", p.display())))
                }
                _ => {}
            },
            _ => {
                if ds.n_points == 0 {
                    check(Err("dataset.n_points must be >= 1".into()));
                }
                if ds.n_points < self.split.train_count + self.split.test_count {
                    check(Err(format!(
                        "split {}+{} exceeds dataset.n_points {}",
                        self.split.train_count, self.split.test_count, ds.n_points
                    )));
                }
            }
        }
        if ds.kind == DatasetKind::Clusters
            && (ds.n_classes == 0 || !ds.n_points.is_multiple_of(ds.n_classes))
        {
            check(Err(
                "dataset.n_points must be a positive multiple of dataset.n_classes".into(),
            ));
        }
        if ds.kind == DatasetKind::MadelonLike && ds.n_features < 20 {
            check(Err(
                "madelon_like data needs dataset.n_features >= 20".into()
            ));
        }
        if self.split.train_count == 0 {
            check(Err("split.train must be >= 1".into()));
        }
        if self.run.thin == 0 {
            check(Err("run.thin must be >= 1".into()));
        }
        if !(self.init.weight_sd >= 0.0) {
            check(Err("init.weight_sd must be >= 0".into()));
        }
        if self.diagnostics.knn_k == 0 {
            check(Err("diagnostics.knn_k must be >= 1".into()));
        }
        if self.diagnostics.max_members == 0 {
            check(Err("diagnostics.max_members must be >= 1".into()));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(problems.join("; ")))
        }
    }

    pub fn tempering_as<T: Scalar>(&self) -> TemperingConfig<T> {
        let t = &self.tempering;
        TemperingConfig {
            n_replicas: t.n_replicas,
            t_max: T::of(t.t_max),
            swap_interval: t.swap_interval,
            max_samples: t.max_samples,
            switch_sample: t.switch_sample,
            seed: t.seed,
        }
    }

    pub fn proposal_as<T: Scalar>(&self) -> ProposalConfig<T> {
        let q = &self.proposal;
        ProposalConfig {
            step_sd: T::of(q.step_sd),
            learn_rate: T::of(q.learn_rate),
            tau_step_sd: T::of(q.tau_step_sd),
            lg_rate: T::of(q.lg_rate),
            adam_beta1: T::of(q.adam_beta1),
            adam_beta2: T::of(q.adam_beta2),
            adam_eps: T::of(q.adam_eps),
        }
    }

    pub fn prior_as<T: Scalar>(&self) -> PriorConfig<T> {
        PriorConfig {
            sigma_sq: T::of(self.prior.sigma_sq),
            nu_1: T::of(self.prior.nu_1),
            nu_2: T::of(self.prior.nu_2),
        }
    }

    pub fn options_as<T: Scalar>(&self) -> EnsembleOptions<T> {
        EnsembleOptions {
            init: Initialization::Random {
                weight_sd: T::of(self.init.weight_sd),
                shared: self.init.shared,
                log_tau_sq: self.init.log_tau_sq.map(T::of),
            },
            thin: self.run.thin,
            execution: match self.run.workers {
                0 => Execution::Sequential,
                w => Execution::Pool { workers: w },
            },
        }
    }
}
