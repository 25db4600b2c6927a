//! Parallel execution over `(config, seed)` pairs.
//!
//! Every pair derives its own generator streams from the config, so the
//! schedule never affects results. Failures are recorded per pair and the
//! rest of the work carries on.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use banditlab_core::harness::{aggregate, decompose_penalties, run_episode_with, Decomposition, EpisodeResult, ExperimentConfig, RegretReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{load_config, result_rows, write_gains, write_json, write_results, Manifest, ResultRow, RoundLogWriter};

/// Outcome of every seed of one config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRun {
    pub name: String,
    pub config: ExperimentConfig,
    pub episodes: Vec<EpisodeResult>,
    pub decompositions: Vec<Decomposition>,
    pub failures: Vec<(u64, String)>,
    pub report: Option<RegretReport>,
}

impl ConfigRun {
    pub fn rows(&self) -> Vec<ResultRow> {
        result_rows(&self.config, &self.episodes, &self.decompositions)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest::new(&self.config, seeds(&self.config).collect(), self.report.clone(), self.failures.clone())
    }
}

/// A config that could not be loaded or validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub name: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub runs: Vec<ConfigRun>,
    pub rejected: Vec<Rejected>,
}

pub fn seeds(cfg: &ExperimentConfig) -> impl Iterator<Item = u64> {
    0..cfg.n_seeds as u64
}

type PairOutcome = std::result::Result<(EpisodeResult, Option<Decomposition>), String>;

fn run_pair(cfg: &ExperimentConfig, seed: u64, decompose: bool) -> PairOutcome {
    let ep = run_episode_with(cfg, seed, |_| {}).map_err(|e| e.to_string())?;
    let dec = if decompose {
        Some(decompose_penalties(cfg, seed).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok((ep, dec))
}

fn collect(name: String, cfg: ExperimentConfig, outcomes: Vec<(u64, PairOutcome)>) -> ConfigRun {
    let mut episodes = Vec::new();
    let mut decompositions = Vec::new();
    let mut failures = Vec::new();
    for (seed, o) in outcomes {
        match o {
            Ok((e, d)) => {
                episodes.push(e);
                decompositions.extend(d);
            }
            Err(msg) => failures.push((seed, msg)),
        }
    }
    let report = if episodes.is_empty() {
        None
    } else {
        match aggregate(&cfg, &episodes, &decompositions) {
            Ok(r) => Some(r),
            Err(e) => {
                failures.push((u64::MAX, format!("aggregation: {e}")));
                None
            }
        }
    };
    ConfigRun {
        name,
        config: cfg,
        episodes,
        decompositions,
        failures,
        report,
    }
}

/// All seeds of one config, in parallel on the current rayon pool.
pub fn run_config(name: &str, cfg: &ExperimentConfig, decompose: bool) -> ConfigRun {
    let outcomes: Vec<(u64, PairOutcome)> = seeds(cfg)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|s| (s, run_pair(cfg, s, decompose)))
        .collect();
    collect(name.to_owned(), cfg.clone(), outcomes)
}

/// Runs the cross product of configs and their seeds on `jobs` threads
/// (all cores when `None`). Output order follows the input order.
pub fn sweep(configs: Vec<(String, ExperimentConfig)>, decompose: bool, jobs: Option<usize>) -> Result<SweepResult> {
    let mut valid = Vec::new();
    let mut rejected = Vec::new();
    for (name, cfg) in configs {
        match cfg.validate() {
            Ok(()) => valid.push((name, cfg)),
            Err(e) => rejected.push(Rejected { name, error: e.to_string() }),
        }
    }
    let pairs: Vec<(usize, u64)> = valid
        .iter()
        .enumerate()
        .flat_map(|(i, (_, c))| seeds(c).map(move |s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let outcomes: Vec<(usize, u64, PairOutcome)> = pool.install(|| {
        pairs
            .into_par_iter()
            .map(|(i, s)| (i, s, run_pair(&valid[i].1, s, decompose)))
            .collect()
    });
    let mut grouped: Vec<Vec<(u64, PairOutcome)>> = valid.iter().map(|_| Vec::new()).collect();
    for (i, s, o) in outcomes {
        grouped[i].push((s, o));
    }
    let runs = valid
        .into_iter()
        .zip(grouped)
        .map(|((name, cfg), o)| collect(name, cfg, o))
        .collect();
    Ok(SweepResult { runs, rejected })
}

/// Every `*.json` file of `dir`, sorted by file name. Unreadable configs are
/// returned as rejections rather than errors.
pub fn load_config_dir(dir: &Path) -> Result<(Vec<(String, ExperimentConfig)>, Vec<Rejected>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for p in paths {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        match load_config(&p) {
            Ok(c) => ok.push((name, c)),
            Err(e) => bad.push(Rejected {
                name,
                error: format!("{e:#}"),
            }),
        }
    }
    Ok((ok, bad))
}

#[derive(Debug, Serialize)]
struct SweepManifest<'a> {
    runs: Vec<NamedManifest>,
    rejected: &'a [Rejected],
}

#[derive(Debug, Serialize)]
struct NamedManifest {
    name: String,
    #[serde(flatten)]
    manifest: Manifest,
}

/// `results.csv` with one row per successful `(config, seed)` and
/// `manifest.json` with full configs, reports and failures.
pub fn write_sweep(out: &Path, result: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let rows: Vec<ResultRow> = result.runs.iter().flat_map(|r| r.rows()).collect();
    write_results(&out.join("results.csv"), &rows)?;
    let manifest = SweepManifest {
        runs: result
            .runs
            .iter()
            .map(|r| NamedManifest {
                name: r.name.clone(),
                manifest: r.manifest(),
            })
            .collect(),
        rejected: &result.rejected,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

/// Runs one config and writes per-seed round logs and gain tables next to
/// the results table and manifest.
pub fn run_to_dir(cfg: &ExperimentConfig, out: &Path, jobs: Option<usize>) -> Result<ConfigRun> {
    cfg.validate()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let outcomes: Vec<(u64, PairOutcome)> = pool.install(|| {
        seeds(cfg)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|s| (s, logged_episode(cfg, s, out).map(|e| (e, None)).map_err(|e| format!("{e:#}"))))
            .collect()
    });
    let run = collect("run".to_owned(), cfg.clone(), outcomes);
    write_results(&out.join("results.csv"), &run.rows())?;
    write_json(&out.join("manifest.json"), &run.manifest())?;
    Ok(run)
}

fn logged_episode(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<EpisodeResult> {
    let gains = cfg.gains(seed)?;
    write_gains(
        &gains,
        &out.join(format!("gains_seed{seed}.csv")),
        &out.join(format!("gains_seed{seed}.json")),
    )?;
    let file = File::create(out.join(format!("rounds_seed{seed}.csv")))?;
    let mut w = RoundLogWriter::new(BufWriter::new(file));
    let mut write_err = None;
    let ep = run_episode_with(cfg, seed, |log| {
        if write_err.is_none() {
            write_err = w.write(log).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    w.finish()?;
    Ok(ep)
}
