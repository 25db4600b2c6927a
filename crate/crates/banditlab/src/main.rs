use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use banditlab::io::{load_config, write_json};
use banditlab::sweep::{load_config_dir, run_config, run_to_dir, sweep, write_sweep};
use banditlab::{parse_dist, tune};
use banditlab_core::hazard::sup_generalized_hazard;
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "banditlab", version, about = "Perturbation-based bandit experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config; writes round logs, gains, results.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the tuned perturbation scale and its regret certificate.
    Tune {
        /// Kind name or JSON distribution spec.
        #[arg(long)]
        dist: String,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "T")]
        t: u64,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Print the generalized hazard supremum over a grid.
    CheckHazard {
        /// Kind name or JSON distribution spec.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        zmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        zmax: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Estimate the overestimation, underestimation and divergence penalties.
    Decompose {
        #[arg(long)]
        config: PathBuf,
        /// Also write results.csv and manifest.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config in a directory.
    Sweep {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also estimate penalties (exact-gradient configs only).
        #[arg(long)]
        decompose: bool,
    },
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let run = run_to_dir(&cfg, &out, cli.jobs)?;
            for (seed, e) in &run.failures {
                log::error!("seed {seed}: {e}");
            }
            print_json(&run.report)?;
            if run.report.is_none() {
                bail!("every seed failed");
            }
        }
        Command::Tune { dist, n, t, alpha } => {
            print_json(&tune(&parse_dist(&dist)?, n, t, alpha)?)?;
        }
        Command::CheckHazard {
            dist,
            alpha,
            zmin,
            zmax,
            points,
        } => {
            let d = parse_dist(&dist)?;
            print_json(&sup_generalized_hazard(&d, alpha, (zmin, zmax), points)?)?;
        }
        Command::Decompose { config, out } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build()?;
            let run = pool.install(|| run_config("decompose", &cfg, true));
            for (seed, e) in &run.failures {
                log::error!("seed {seed}: {e}");
            }
            #[derive(Serialize)]
            struct Output<'a> {
                report: &'a Option<banditlab_core::harness::RegretReport>,
                decompositions: &'a [banditlab_core::harness::Decomposition],
            }
            print_json(&Output {
                report: &run.report,
                decompositions: &run.decompositions,
            })?;
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                banditlab::io::write_results(&out.join("results.csv"), &run.rows())?;
                write_json(&out.join("manifest.json"), &run.manifest())?;
            }
            if run.report.is_none() {
                bail!("every seed failed");
            }
        }
        Command::Sweep { configs, out, decompose } => {
            let (ok, mut rejected) = load_config_dir(&configs)?;
            if ok.is_empty() && rejected.is_empty() {
                bail!("no *.json configs in {}", configs.display());
            }
            let mut result = sweep(ok, decompose, cli.jobs).context("sweep")?;
            result.rejected.append(&mut rejected);
            for r in &result.rejected {
                log::error!("{}: {}", r.name, r.error);
            }
            for run in &result.runs {
                for (seed, e) in &run.failures {
                    log::error!("{} seed {seed}: {e}", run.name);
                }
                if let Some(rep) = &run.report {
                    log::info!("{}: mean regret {:.3} +/- {:.3}", run.name, rep.mean_regret, rep.std_error);
                }
            }
            if let Some(out) = out {
                write_sweep(&out, &result)?;
            } else {
                let reports: Vec<_> = result.runs.iter().map(|r| (&r.name, &r.report)).collect();
                print_json(&reports)?;
            }
        }
    }
    Ok(())
}
