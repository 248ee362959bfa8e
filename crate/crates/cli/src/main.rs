use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cesbound::ces_model::{CesDistribution, DensityGenerator};
use cesbound::harness::records::{csv_string, write_outputs, ExperimentOutput};
use cesbound::harness::{self, Experiment, ExperimentConfig};
use cesbound::rng::split_streams;

#[derive(Parser, Debug)]
#[command(name = "cesbound", version, about = "Semiparametric CRBs for CES data models")]
struct Cli {
    /// TOML file overriding the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output file. CSV results also get a JSON sidecar next to them.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a bound over the λ grid.
    Bound {
        #[command(subcommand)]
        which: BoundKind,
    },
    /// Monte Carlo experiments.
    Mc {
        #[command(subcommand)]
        which: McKind,
    },
    /// Numerical self-checks; exit code 2 when a check fails.
    Validate {
        #[command(subcommand)]
        which: ValidateKind,
    },
    /// Draw complex-t snapshots from the scatter experiment's model.
    Sample {
        /// Shape parameter; defaults to the first grid value.
        #[arg(long)]
        lambda: Option<f64>,
        /// Number of snapshots; defaults to L.
        #[arg(long)]
        snapshots: Option<usize>,
    },
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum BoundKind {
    /// Frobenius norm of the scatter CCSCRB divided by L.
    Cscrb,
    /// SSCRB on the source frequency.
    Sscrb,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum McKind {
    Fig1,
    Fig2,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum ValidateKind {
    Sfim,
    Sscrb,
}

fn load_config(cli: &Cli, experiment: Experiment) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_toml_file(experiment, path)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::defaults(experiment),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = cli.runs {
        cfg.runs = runs;
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit_records(cfg: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    match &cfg.output {
        Some(path) => write_outputs(path, cfg, output)?,
        None => print!("{}", csv_string(&output.records)?),
    }
    for f in &output.tyler_non_converged {
        if f.count > 0 {
            eprintln!("warning: Tyler reached max_iter in {} runs at λ = {}", f.count, f.lambda);
        }
    }
    Ok(())
}

fn emit_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

enum Outcome {
    Done,
    ValidationFailed,
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Bound { which } => {
            let (experiment, curve): (_, fn(&ExperimentConfig) -> cesbound::Result<_>) = match which {
                BoundKind::Cscrb => (Experiment::Fig1, harness::cscrb_curve),
                BoundKind::Sscrb => (Experiment::Fig2, harness::sscrb_curve),
            };
            let cfg = load_config(cli, experiment)?;
            let start = std::time::Instant::now();
            let records = curve(&cfg)?;
            let output = ExperimentOutput {
                records,
                tyler_non_converged: Vec::new(),
                wall_time_seconds: start.elapsed().as_secs_f64(),
            };
            emit_records(&cfg, &output)?;
        }
        Command::Mc { which } => {
            let output = match which {
                McKind::Fig1 => {
                    let cfg = load_config(cli, Experiment::Fig1)?;
                    (harness::run_fig1(&cfg)?, cfg)
                }
                McKind::Fig2 => {
                    let cfg = load_config(cli, Experiment::Fig2)?;
                    (harness::run_fig2(&cfg)?, cfg)
                }
            };
            emit_records(&output.1, &output.0)?;
        }
        Command::Validate { which } => {
            let (json, passed) = match which {
                ValidateKind::Sfim => {
                    let cfg = load_config(cli, Experiment::ValidateSfim)?;
                    let report = harness::run_validate_sfim(&cfg)?;
                    (serde_json::to_string_pretty(&report)?, report.passed)
                }
                ValidateKind::Sscrb => {
                    let cfg = load_config(cli, Experiment::ValidateSscrb)?;
                    let report = harness::run_validate_sscrb(&cfg)?;
                    (serde_json::to_string_pretty(&report)?, report.passed)
                }
            };
            emit_text(cli.out.as_deref(), &(json + "\n"))?;
            if !passed {
                eprintln!("validation failed");
                return Ok(Outcome::ValidationFailed);
            }
        }
        Command::Sample { lambda, snapshots } => {
            let cfg = load_config(cli, Experiment::Fig1)?;
            let lambda = lambda.unwrap_or(cfg.lambda_grid[0]);
            let l = snapshots.unwrap_or(cfg.l);
            let gen = DensityGenerator::complex_t_with_power(lambda, cfg.data_power)?;
            let dist = CesDistribution::zero_mean(cfg.toeplitz_scatter(), gen)?;
            let (mut dir, mut rad) = split_streams(&[cfg.seed, 0]);
            let z = dist.sample_snapshots_split(l, &mut dir, &mut rad)?;
            let mut text = String::from("snapshot,sensor,re,im\n");
            for (j, col) in z.column_iter().enumerate() {
                for (i, x) in col.iter().enumerate() {
                    text.push_str(&format!("{j},{i},{},{}\n", x.re, x.im));
                }
            }
            emit_text(cli.out.as_deref(), &text)?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
