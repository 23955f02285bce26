//! Subcommand implementations. Each validates its inputs before computing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use ptbae::data::{
    apply_bounds, generate_clusters, generate_madelon_like, generate_swiss_roll, load_csv,
    load_dataset, save_dataset, split,
};
use ptbae::diagnostics::{
    knn_classify, reduce_ensemble, rhat_for_id, summarize, MseStats, RunFigures,
};
use ptbae::kv::KvDoc;
use ptbae::tempering::EnsembleError;
use ptbae::{run_ensemble, BayesAutoencoder, Dataset, PosteriorSummary, Scalar, Snapshot};

use crate::config::{DatasetKind, ExperimentConfig, Precision};
use crate::error::{CliError, CliResult};
use crate::run_dir::{write_pending_manifest, write_result, write_splits, LoadedRun, RunDir};

/// Calls `$f::<f32>` or `$f::<f64>` according to a [`Precision`].
macro_rules! dispatch {
    ($prec:expr, $f:ident ( $($arg:expr),* )) => {
        match $prec {
            Precision::F64 => $f::<f64>($($arg),*),
            Precision::F32 => $f::<f32>($($arg),*),
        }
    };
}

/// Layers applied in order: preset, config file, `--set` pairs, named flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigLayers {
    pub preset: Option<String>,
    pub config_file: Option<PathBuf>,
    pub sets: Vec<String>,
    pub flags: Vec<(String, String)>,
    /// Parent of the default output directory when no layer sets `output.dir`.
    pub output_root: Option<PathBuf>,
}

pub fn resolve_config(layers: &ConfigLayers) -> CliResult<ExperimentConfig> {
    let mut doc = match &layers.config_file {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!(
                    "config file {} does not exist",
                    path.display()
                )));
            }
            KvDoc::read(path)?
        }
        None => KvDoc::new(),
    };
    for pair in &layers.sets {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {pair:?}")))?;
        doc.set(k.trim(), v.trim());
    }
    for (k, v) in &layers.flags {
        doc.set(k, v);
    }
    if let Some(p) = &layers.preset {
        doc.set("preset", p);
    }
    let explicit_dir = doc.contains("output.dir");
    let mut cfg = ExperimentConfig::from_kv(&doc, "swiss-desk")?;
    if !explicit_dir {
        let root = layers
            .output_root
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs"));
        cfg.output_dir = root.join(&cfg.preset);
    }
    Ok(cfg)
}

/// Raw (unnormalized) dataset described by the config.
pub fn build_dataset<T: Scalar>(cfg: &ExperimentConfig) -> CliResult<Dataset<T>> {
    let d = &cfg.dataset;
    let ds = match d.kind {
        DatasetKind::SwissRoll => generate_swiss_roll(d.n_points, d.noise_sd, d.seed),
        DatasetKind::MadelonLike => generate_madelon_like(d.n_points, d.n_features, d.seed),
        DatasetKind::Clusters => {
            if d.n_classes == 0 || !d.n_points.is_multiple_of(d.n_classes) {
                return Err(CliError::Usage(
                    "dataset.n_points must be a positive multiple of dataset.n_classes".into(),
                ));
            }
            generate_clusters(
                d.n_points / d.n_classes,
                d.n_classes,
                d.n_features,
                d.separation,
                d.cluster_sd,
                d.seed,
            )
        }
        DatasetKind::Csv => {
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| CliError::Usage("dataset.path is required for csv data".into()))?;
            return Ok(load_csv(path, d.has_labels, d.label_column)?);
        }
    };
    ds.map_err(|e| match e {
        ptbae::Error::Empty(m) => CliError::Usage(m),
        other => other.into(),
    })
}

/// Writes the generated dataset (and its `.meta` sidecar) to `out`.
pub fn cmd_generate(cfg: &ExperimentConfig, out: Option<&Path>) -> CliResult<PathBuf> {
    if cfg.dataset.kind == DatasetKind::Csv {
        return Err(CliError::Usage(
            "generate needs a generator dataset.kind, not csv".into(),
        ));
    }
    if cfg.dataset.n_points == 0 {
        return Err(CliError::Usage("dataset.n_points must be >= 1".into()));
    }
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("{}.csv", cfg.dataset.kind)));
    dispatch!(cfg.model.scalar, generate_into(cfg, &path))?;
    Ok(path)
}

fn generate_into<T: Scalar>(cfg: &ExperimentConfig, path: &Path) -> CliResult<()> {
    let ds = build_dataset::<T>(cfg)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    save_dataset(&ds, path)?;
    Ok(())
}

/// Headline numbers of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub n_samples: usize,
    pub train: MseStats,
    pub test: Option<MseStats>,
    pub acceptance_pct: f64,
    pub swap_pct: f64,
    pub wall_minutes: f64,
    pub map_log_tau_sq: f64,
}

impl RunReport {
    fn from_summary<T: Scalar>(s: &PosteriorSummary<T>) -> Self {
        Self {
            n_samples: s.n_samples,
            train: s.train.clone(),
            test: s.test.clone(),
            acceptance_pct: s.acceptance_pct,
            swap_pct: s.swap_pct,
            wall_minutes: s.wall_minutes,
            map_log_tau_sq: s.map_state.log_tau_sq.as_f64(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "posterior samples: {}", self.n_samples);
        let _ = writeln!(
            out,
            "train MSE best/mean/std: {:.5} {:.5} {:.5}",
            self.train.best, self.train.mean, self.train.std
        );
        if let Some(t) = &self.test {
            let _ = writeln!(
                out,
                "test MSE best/mean/std:  {:.5} {:.5} {:.5}",
                t.best, t.mean, t.std
            );
        }
        let _ = writeln!(
            out,
            "acceptance %: {:.2}  swap %: {:.2}  minutes: {:.2}",
            self.acceptance_pct, self.swap_pct, self.wall_minutes
        );
        out
    }
}

/// Runs the ensemble and writes the run directory. Also writes the summary.
pub fn cmd_sample(cfg: &ExperimentConfig, overwrite: bool) -> CliResult<RunReport> {
    cfg.validate()?;
    dispatch!(cfg.model.scalar, sample_typed(cfg, overwrite))
}

fn sample_typed<T: Scalar>(cfg: &ExperimentConfig, overwrite: bool) -> CliResult<RunReport> {
    let topology = cfg.model.topology()?;
    let raw = build_dataset::<T>(cfg)?;
    if raw.n_features() != topology.input_dim() {
        return Err(CliError::Usage(format!(
            "model.topology input width {} differs from the dataset's {} features",
            topology.input_dim(),
            raw.n_features()
        )));
    }
    let (train, test) = split(&raw, cfg.split)?;
    let model = BayesAutoencoder::new(
        topology.clone(),
        train.clone(),
        (test.n_instances() > 0).then(|| test.clone()),
        cfg.prior_as::<T>(),
    )?;
    let dir = RunDir::new(&cfg.output_dir);
    dir.create(overwrite)?;
    write_pending_manifest(&dir, cfg)?;
    write_splits(&dir, &train, &test)?;

    let result = match run_ensemble(
        &cfg.tempering_as::<T>(),
        &cfg.proposal_as::<T>(),
        &model,
        &cfg.options_as::<T>(),
    ) {
        Ok(r) => r,
        Err(EnsembleError::Invalid(e)) => return Err(e.into()),
        Err(EnsembleError::Aborted { partial, error }) => {
            write_result(&dir, cfg, &topology, &partial, Some(&error))?;
            return Err(CliError::Run(format!(
                "{error} (partial results in {})",
                dir.root.display()
            )));
        }
    };
    write_result(&dir, cfg, &topology, &result, None)?;
    let loaded = LoadedRun::<T>::load(&dir)?;
    let summary = write_summary(&dir, &loaded)?;
    Ok(RunReport::from_summary(&summary))
}

fn figures<T: Scalar>(run: &LoadedRun<T>) -> RunFigures {
    RunFigures {
        acceptance_pct: run.manifest_f64("manifest.acceptance_pct"),
        swap_pct: run.manifest_f64("manifest.swap_pct"),
        wall_minutes: run.manifest_f64("manifest.wall_seconds") / 60.0,
    }
}

fn write_summary<T: Scalar>(dir: &RunDir, run: &LoadedRun<T>) -> CliResult<PosteriorSummary<T>> {
    let posterior = run.posterior();
    if posterior.is_empty() {
        return Err(CliError::Run(
            "no temperature-1 samples after the switch; raise max_samples above switch_sample"
                .into(),
        ));
    }
    let test = (run.test.n_instances() > 0).then_some(&run.test);
    let s = summarize(&posterior, &run.topology, &run.train, test, figures(run))?;
    let mut doc = KvDoc::new();
    doc.set("n_samples", s.n_samples);
    for (name, stats) in [("train", Some(&s.train)), ("test", s.test.as_ref())] {
        if let Some(m) = stats {
            doc.set(&format!("{name}_mse_best"), m.best);
            doc.set(&format!("{name}_mse_mean"), m.mean);
            doc.set(&format!("{name}_mse_std"), m.std);
        }
    }
    doc.set("map_index", s.map_index);
    let map = posterior[s.map_index];
    doc.set("map_replica", map.replica_id);
    doc.set("map_sample_index", map.sample_index);
    doc.set("map_log_posterior", s.map_log_posterior);
    doc.set("map_log_tau_sq", s.map_state.log_tau_sq);
    doc.set("acceptance_pct", s.acceptance_pct);
    doc.set("swap_pct", s.swap_pct);
    doc.set("wall_minutes", s.wall_minutes);
    doc.write(&dir.summary())?;
    ptbae::autoencoder::write_params(&dir.map_params(), &run.topology, &s.map_state.params)?;
    Ok(s)
}

/// One row of the R̂ table: a value or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct RHatRow {
    pub parameter_id: usize,
    pub r_hat: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    pub rhat: Vec<RHatRow>,
    pub run: RunReport,
}

/// R̂ per requested parameter id (rows for bad ids carry the error) and the posterior summary.
pub fn cmd_diagnose(dir: &Path, ids: Option<&[usize]>) -> CliResult<DiagnoseReport> {
    let dir = RunDir::new(dir);
    let prec = precision_of(&dir)?;
    dispatch!(prec, diagnose_typed(&dir, ids))
}

fn precision_of(dir: &RunDir) -> CliResult<Precision> {
    let doc = dir.read_manifest()?;
    match doc.get("model.scalar") {
        None => Ok(Precision::F64),
        Some(s) => Precision::from_str(s).map_err(CliError::Data),
    }
}

fn diagnose_typed<T: Scalar>(dir: &RunDir, ids: Option<&[usize]>) -> CliResult<DiagnoseReport> {
    let run = LoadedRun::<T>::load(dir)?;
    let ids = ids
        .map(<[usize]>::to_vec)
        .unwrap_or_else(|| run.config.diagnostics.rhat_ids.clone());
    let chains = run.posterior_chains();
    let rows: Vec<RHatRow> = ids
        .iter()
        .map(|&id| RHatRow {
            parameter_id: id,
            r_hat: rhat_for_id(&chains, id).map_err(|e| e.to_string()),
        })
        .collect();
    if !rows.is_empty() {
        let mut out = String::from("parameter_id,r_hat,error\n");
        for row in &rows {
            match &row.r_hat {
                Ok(v) => {
                    let _ = writeln!(out, "{},{v},", row.parameter_id);
                }
                Err(m) => {
                    let _ = writeln!(out, "{},,{}", row.parameter_id, m.replace(',', ";"));
                }
            }
        }
        let path = dir.rhat();
        std::fs::write(&path, out)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    let summary = write_summary(dir, &run)?;
    Ok(DiagnoseReport {
        rhat: rows,
        run: RunReport::from_summary(&summary),
    })
}

/// Which rows `reduce` encodes.
#[derive(Debug, Clone, PartialEq)]
pub enum ReduceInput {
    Train,
    Test,
    /// Training rows followed by test rows.
    All,
    /// A dataset file; raw data is scaled with the run's training bounds.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceReport {
    pub n_rows: usize,
    pub latent_dim: usize,
    pub n_members: usize,
    pub files: Vec<PathBuf>,
}

/// Latent mean and sd across posterior members, plus a plot-ready scatter file.
pub fn cmd_reduce(
    dir: &Path,
    input: &ReduceInput,
    max_members: Option<usize>,
    write_members: bool,
) -> CliResult<ReduceReport> {
    if max_members == Some(0) {
        return Err(CliError::Usage("max_members must be >= 1".into()));
    }
    if let ReduceInput::File(p) = input {
        if !p.is_file() {
            return Err(CliError::Usage(format!("{} does not exist", p.display())));
        }
    }
    let dir = RunDir::new(dir);
    let prec = precision_of(&dir)?;
    dispatch!(prec, reduce_typed(&dir, input, max_members, write_members))
}

fn concat_rows<T: Scalar>(a: &Dataset<T>, b: &Dataset<T>) -> CliResult<Dataset<T>> {
    let features = concatenate(Axis(0), &[a.features.view(), b.features.view()])
        .map_err(|e| CliError::Data(format!("cannot join splits: {e}")))?;
    let join = |x: &Option<Vec<_>>, y: &Option<Vec<_>>| match (x, y) {
        (Some(x), Some(y)) => Some([x.as_slice(), y.as_slice()].concat()),
        _ => None,
    };
    Ok(Dataset {
        features,
        labels: join(&a.labels, &b.labels),
        color: match (&a.color, &b.color) {
            (Some(x), Some(y)) => Some([x.as_slice(), y.as_slice()].concat()),
            _ => None,
        },
        ..a.clone()
    })
}

fn reduce_typed<T: Scalar>(
    dir: &RunDir,
    input: &ReduceInput,
    max_members: Option<usize>,
    write_members: bool,
) -> CliResult<ReduceReport> {
    let run = LoadedRun::<T>::load(dir)?;
    let data = match input {
        ReduceInput::Train => run.train.clone(),
        ReduceInput::Test => run.test.clone(),
        ReduceInput::All => concat_rows(&run.train, &run.test)?,
        ReduceInput::File(p) => {
            let ds = load_dataset::<T>(p)?;
            if ds.n_features() != run.topology.input_dim() {
                return Err(CliError::Data(format!(
                    "{} has {} features, the run's model expects {}",
                    p.display(),
                    ds.n_features(),
                    run.topology.input_dim()
                )));
            }
            if ds.normalized {
                ds
            } else {
                apply_bounds(&ds, &run.train.norm_min, &run.train.norm_max)
            }
        }
    };
    if data.n_instances() == 0 {
        return Err(CliError::Data("no rows to reduce".into()));
    }
    let posterior = run.posterior();
    let k = max_members.unwrap_or(run.config.diagnostics.max_members);
    let reduced = reduce_ensemble(&posterior, &data, &run.topology, k)?;
    let latent_dim = reduced.mean.ncols();
    let mut files = vec![
        dir.root.join("latent_mean.csv"),
        dir.root.join("latent_sd.csv"),
    ];
    write_matrix(&files[0], "z", &reduced.mean, &[])?;
    write_matrix(&files[1], "sd_z", &reduced.sd, &[])?;
    if write_members {
        let member_dir = dir.root.join("members");
        std::fs::create_dir_all(&member_dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", member_dir.display())))?;
        for (m, latent) in reduced.members.iter().enumerate() {
            let path = member_dir.join(format!("member_{m}.csv"));
            write_matrix(&path, "z", latent, &[])?;
            files.push(path);
        }
    }
    let mut extra: Vec<(&str, Vec<String>)> = Vec::new();
    let sd_cols: Vec<String> = (0..latent_dim).map(|j| format!("sd_z{j}")).collect();
    for (j, name) in sd_cols.iter().enumerate() {
        extra.push((
            name.as_str(),
            reduced
                .sd
                .column(j)
                .iter()
                .map(ToString::to_string)
                .collect(),
        ));
    }
    if let Some(c) = &data.color {
        extra.push(("color", c.iter().map(ToString::to_string).collect()));
    }
    if let Some(l) = &data.labels {
        extra.push(("label", l.iter().map(ToString::to_string).collect()));
    }
    let scatter = dir.root.join("scatter.csv");
    write_matrix(&scatter, "z", &reduced.mean, &extra)?;
    files.push(scatter);
    Ok(ReduceReport {
        n_rows: data.n_instances(),
        latent_dim,
        n_members: reduced.members.len(),
        files,
    })
}

/// CSV with columns `{prefix}0..` followed by the `extra` columns.
fn write_matrix<T: Scalar>(
    path: &Path,
    prefix: &str,
    m: &Array2<T>,
    extra: &[(&str, Vec<String>)],
) -> CliResult<()> {
    let mut header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in m.rows().into_iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .map(ToString::to_string)
            .chain(extra.iter().map(|(_, col)| col[i].clone()))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub k: usize,
    pub original: f64,
    pub map_reduced: f64,
    /// Accuracy per ensemble member, with best/mean/std.
    pub members: AccuracyStats,
}

/// Best (largest), mean and population sd of per-member accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyStats {
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub per_member: Vec<f64>,
}

/// kNN accuracy on original features, MAP-reduced features and each member's reduced features.
pub fn cmd_benchmark(
    dir: &Path,
    k: Option<usize>,
    max_members: Option<usize>,
) -> CliResult<BenchmarkReport> {
    if k == Some(0) {
        return Err(CliError::Usage("k must be >= 1".into()));
    }
    if max_members == Some(0) {
        return Err(CliError::Usage("max_members must be >= 1".into()));
    }
    let dir = RunDir::new(dir);
    let prec = precision_of(&dir)?;
    dispatch!(prec, benchmark_typed(&dir, k, max_members))
}

fn benchmark_typed<T: Scalar>(
    dir: &RunDir,
    k: Option<usize>,
    max_members: Option<usize>,
) -> CliResult<BenchmarkReport> {
    let run = LoadedRun::<T>::load(dir)?;
    let k = k.unwrap_or(run.config.diagnostics.knn_k);
    let (Some(train_labels), Some(test_labels)) = (&run.train.labels, &run.test.labels) else {
        return Err(CliError::Data(
            "benchmark needs class labels in both splits".into(),
        ));
    };
    if run.test.n_instances() == 0 {
        return Err(CliError::Data(
            "benchmark needs a non-empty test split".into(),
        ));
    }
    let accuracy = |train: &Array2<T>, test: &Array2<T>| -> CliResult<f64> {
        Ok(knn_classify(
            train.view(),
            train_labels,
            test.view(),
            test_labels,
            k,
        )?)
    };
    let original = accuracy(&run.train.features, &run.test.features)?;

    let posterior = run.posterior();
    if posterior.is_empty() {
        return Err(CliError::Data("run has no posterior samples".into()));
    }
    let map = map_snapshot(&posterior);
    let encode =
        |s: &Snapshot<T>, ds: &Dataset<T>| run.topology.encode(&s.state.params, ds.features.view());
    let map_reduced = accuracy(&encode(map, &run.train)?, &encode(map, &run.test)?)?;

    let cap = max_members.unwrap_or(run.config.diagnostics.max_members);
    let train_red = reduce_ensemble(&posterior, &run.train, &run.topology, cap)?;
    let test_red = reduce_ensemble(&posterior, &run.test, &run.topology, cap)?;
    let per_member = train_red
        .members
        .iter()
        .zip(&test_red.members)
        .map(|(a, b)| accuracy(a, b))
        .collect::<CliResult<Vec<f64>>>()?;
    let n = per_member.len() as f64;
    let mean = per_member.iter().sum::<f64>() / n;
    let std = (per_member.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let best = per_member.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = BenchmarkReport {
        k,
        original,
        map_reduced,
        members: AccuracyStats {
            best,
            mean,
            std,
            per_member,
        },
    };

    let mut doc = KvDoc::new();
    doc.set("k", k);
    doc.set("original_accuracy", report.original);
    doc.set("map_reduced_accuracy", report.map_reduced);
    doc.set("member_accuracy_best", best);
    doc.set("member_accuracy_mean", mean);
    doc.set("member_accuracy_std", std);
    doc.set("n_members", report.members.per_member.len());
    doc.write(&dir.root.join("benchmark.txt"))?;
    Ok(report)
}

/// Largest untempered log posterior; the first on ties.
fn map_snapshot<'a, T: Scalar>(posterior: &[&'a Snapshot<T>]) -> &'a Snapshot<T> {
    let mut best = posterior[0];
    for s in &posterior[1..] {
        if s.log_posterior() > best.log_posterior() {
            best = s;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    LgRate,
    NReplicas,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::LgRate => "proposal.lg_rate",
            SweepAxis::NReplicas => "tempering.n_replicas",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LgRate => "lg_rate",
            SweepAxis::NReplicas => "n_replicas",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lg_rate" => Ok(SweepAxis::LgRate),
            "n_replicas" => Ok(SweepAxis::NReplicas),
            other => Err(format!(
                "unknown sweep axis {other:?} (lg_rate, n_replicas)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub run_dir: PathBuf,
    pub outcome: Result<RunReport, String>,
}

/// One full run per value under `output.dir/<axis>_<value>`, tabulated in `output.dir/sweep.csv`.
/// A failing run is recorded and the sweep moves on.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    overwrite: bool,
) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let mut runs = Vec::with_capacity(values.len());
    for v in values {
        let mut c = cfg.clone();
        c.apply(axis.key(), v)?;
        c.output_dir = cfg.output_dir.join(format!("{}_{}", axis.name(), v.trim()));
        c.validate()?;
        if c.output_dir.join("manifest.txt").exists() && !overwrite {
            return Err(CliError::Usage(format!(
                "{} already holds a run; pass --force",
                c.output_dir.display()
            )));
        }
        runs.push((v.trim().to_string(), c));
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", cfg.output_dir.display())))?;
    let mut rows = Vec::with_capacity(runs.len());
    for (value, c) in runs {
        let outcome = cmd_sample(&c, overwrite).map_err(|e| e.to_string());
        rows.push(SweepRow {
            value,
            run_dir: c.output_dir.clone(),
            outcome,
        });
        write_sweep_table(&cfg.output_dir.join("sweep.csv"), axis, &rows)?;
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str =
    "value,status,train_mse_best,train_mse_mean,train_mse_std,test_mse_best,test_mse_mean,test_mse_std,swap_pct,acceptance_pct,minutes,message";

fn write_sweep_table(path: &Path, axis: SweepAxis, rows: &[SweepRow]) -> CliResult<()> {
    let mut out = format!("# axis={}\n{SWEEP_HEADER}\n", axis.name());
    for row in rows {
        match &row.outcome {
            Ok(r) => {
                let t = r.test.clone().unwrap_or(MseStats {
                    best: f64::NAN,
                    mean: f64::NAN,
                    std: f64::NAN,
                    per_sample: vec![],
                });
                let _ = writeln!(
                    out,
                    "{},ok,{},{},{},{},{},{},{},{},{},",
                    row.value,
                    r.train.best,
                    r.train.mean,
                    r.train.std,
                    t.best,
                    t.mean,
                    t.std,
                    r.swap_pct,
                    r.acceptance_pct,
                    r.wall_minutes
                );
            }
            Err(m) => {
                let _ = writeln!(
                    out,
                    "{},failed,,,,,,,,,,{}",
                    row.value,
                    m.replace([',', '\n'], ";")
                );
            }
        }
    }
    std::fs::write(path, out).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
