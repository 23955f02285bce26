use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ptbae::kv::parse_list;
use ptbae_cli::commands::{
    cmd_benchmark, cmd_diagnose, cmd_generate, cmd_reduce, cmd_sample, cmd_sweep, resolve_config,
    ConfigLayers, ReduceInput, SweepAxis,
};
use ptbae_cli::config::PRESETS;
use ptbae_cli::{CliError, CliResult};

// A closed stdout (e.g. piped into `head`) is not an error worth panicking over.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! out_raw {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Bayesian autoencoders sampled with parallel-tempered MCMC.
#[derive(Debug, Parser)]
#[command(name = "ptbae", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated dataset and its metadata sidecar.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output file (default: <output.dir>/<kind>.csv).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Run the tempered ensemble and write a run directory.
    Sample {
        #[command(flatten)]
        config: ConfigArgs,
        /// Reuse an output directory that already holds a run.
        #[arg(long)]
        force: bool,
    },
    /// Gelman-Rubin R-hat per parameter id plus the posterior summary.
    Diagnose {
        run_dir: PathBuf,
        /// Comma-separated parameter ids; an empty string skips R-hat.
        #[arg(long)]
        ids: Option<String>,
    },
    /// Latent mean and sd across posterior members.
    Reduce {
        run_dir: PathBuf,
        /// Rows to encode: train, test or all.
        #[arg(long, default_value = "test", conflicts_with = "data")]
        split: String,
        /// Encode this dataset file instead of a stored split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        max_members: Option<usize>,
        /// Also write each member's latent codes.
        #[arg(long)]
        members: bool,
    },
    /// kNN accuracy on original, MAP-reduced and member-reduced features.
    Benchmark {
        run_dir: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        max_members: Option<usize>,
    },
    /// One run per value along lg_rate or n_replicas.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Base preset.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// key=value config file layered over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set tempering.t_max=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Parent directory for runs when output.dir is not set.
    #[arg(long, env = "PTBAE_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    /// output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// tempering.seed
    #[arg(long)]
    seed: Option<u64>,
    /// tempering.n_replicas
    #[arg(long)]
    n_replicas: Option<usize>,
    /// tempering.max_samples
    #[arg(long)]
    max_samples: Option<usize>,
    /// tempering.switch_sample
    #[arg(long)]
    switch_sample: Option<usize>,
    /// proposal.lg_rate
    #[arg(long)]
    lg_rate: Option<f64>,
    /// run.workers (0 = sequential reference mode)
    #[arg(long)]
    workers: Option<usize>,
    /// model.topology, e.g. 3-10-5-2-5-10-3
    #[arg(long)]
    topology: Option<String>,
    /// model.scalar (f64 or f32)
    #[arg(long)]
    scalar: Option<String>,
    /// dataset.path
    #[arg(long)]
    data: Option<PathBuf>,
    /// dataset.n_points
    #[arg(long)]
    n_points: Option<usize>,
}

impl ConfigArgs {
    fn layers(&self) -> ConfigLayers {
        let mut flags = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        let s = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        push("output.dir", s(&self.out));
        push("tempering.seed", self.seed.map(|v| v.to_string()));
        push(
            "tempering.n_replicas",
            self.n_replicas.map(|v| v.to_string()),
        );
        push(
            "tempering.max_samples",
            self.max_samples.map(|v| v.to_string()),
        );
        push(
            "tempering.switch_sample",
            self.switch_sample.map(|v| v.to_string()),
        );
        push("proposal.lg_rate", self.lg_rate.map(|v| v.to_string()));
        push("run.workers", self.workers.map(|v| v.to_string()));
        push("model.topology", self.topology.clone());
        push("model.scalar", self.scalar.clone());
        push("dataset.path", s(&self.data));
        push("dataset.n_points", self.n_points.map(|v| v.to_string()));
        ConfigLayers {
            preset: self.preset.clone(),
            config_file: self.config.clone(),
            sets: self.sets.clone(),
            flags,
            output_root: self.output_root.clone(),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate { config, file } => {
            let cfg = resolve_config(&config.layers())?;
            let path = cmd_generate(&cfg, file.as_deref())?;
            out!("wrote {}", path.display());
        }
        Command::Sample { config, force } => {
            let cfg = resolve_config(&config.layers())?;
            let report = cmd_sample(&cfg, force)?;
            out!("run directory: {}", cfg.output_dir.display());
            out_raw!("{}", report.render());
        }
        Command::Diagnose { run_dir, ids } => {
            let ids = ids
                .map(|s| {
                    parse_list::<usize>(&s)
                        .map_err(|b| CliError::Usage(format!("bad parameter id {b:?}")))
                })
                .transpose()?;
            let report = cmd_diagnose(&run_dir, ids.as_deref())?;
            for row in &report.rhat {
                match &row.r_hat {
                    Ok(v) => out!("R-hat[{}] = {v:.4}", row.parameter_id),
                    Err(m) => out!("R-hat[{}] unavailable: {m}", row.parameter_id),
                }
            }
            out_raw!("{}", report.run.render());
        }
        Command::Reduce {
            run_dir,
            split,
            data,
            max_members,
            members,
        } => {
            let input = match (data, split.as_str()) {
                (Some(p), _) => ReduceInput::File(p),
                (None, "train") => ReduceInput::Train,
                (None, "test") => ReduceInput::Test,
                (None, "all") => ReduceInput::All,
                (None, other) => {
                    return Err(CliError::Usage(format!(
                        "--split must be train, test or all, got {other:?}"
                    )))
                }
            };
            let report = cmd_reduce(&run_dir, &input, max_members, members)?;
            out!(
                "encoded {} rows into {} latent dims with {} members",
                report.n_rows,
                report.latent_dim,
                report.n_members
            );
            for f in &report.files {
                out!("wrote {}", f.display());
            }
        }
        Command::Benchmark {
            run_dir,
            k,
            max_members,
        } => {
            let r = cmd_benchmark(&run_dir, k, max_members)?;
            out!("kNN (k={}) accuracy", r.k);
            out!("original features: {:.4}", r.original);
            out!("MAP-reduced:       {:.4}", r.map_reduced);
            out!(
                "members best/mean/std: {:.4} {:.4} {:.4} ({} members)",
                r.members.best,
                r.members.mean,
                r.members.std,
                r.members.per_member.len()
            );
        }
        Command::Sweep {
            config,
            axis,
            values,
            force,
        } => {
            let cfg = resolve_config(&config.layers())?;
            let axis: SweepAxis = axis.parse().map_err(CliError::Usage)?;
            let values: Vec<String> = values
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(String::from)
                .collect();
            let rows = cmd_sweep(&cfg, axis, &values, force)?;
            for row in &rows {
                match &row.outcome {
                    Ok(r) => {
                        let test = r.test.as_ref().map_or(f64::NAN, |t| t.best);
                        out!(
                            "{}={}: train best {:.5}, test best {:.5}, acceptance {:.2}%, swaps {:.2}%, {:.2} min",
                            axis.name(),
                            row.value,
                            r.train.best,
                            test,
                            r.acceptance_pct,
                            r.swap_pct,
                            r.wall_minutes
                        );
                    }
                    Err(m) => out!("{}={}: failed: {m}", axis.name(), row.value),
                }
            }
            out!("wrote {}", cfg.output_dir.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ptbae: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
