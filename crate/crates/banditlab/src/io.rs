//! File formats: round logs, gain tables, result tables and run manifests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use banditlab_core::adversaries::GainSequence;
use banditlab_core::gbpa::RoundLog;
use banditlab_core::harness::{Decomposition, EpisodeResult, ExperimentConfig, RegretReport};
use serde::{Deserialize, Serialize};

/// Environment variable that replaces `master_seed` in loaded configs.
pub const MASTER_SEED_ENV: &str = "BANDITLAB_MASTER_SEED";

/// Reads a config and applies the master-seed override from the environment.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    apply_seed_override(&mut cfg, std::env::var(MASTER_SEED_ENV).ok().as_deref())?;
    Ok(cfg)
}

pub fn apply_seed_override(cfg: &mut ExperimentConfig, value: Option<&str>) -> Result<()> {
    if let Some(v) = value {
        cfg.master_seed = v
            .trim()
            .parse()
            .with_context(|| format!("{MASTER_SEED_ENV}={v:?} is not an unsigned integer"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RoundRow {
    t: u64,
    arm: usize,
    gain: f64,
    p_estimate: f64,
    estimator_value: f64,
    gr_iterations: Option<u64>,
}

/// Streaming CSV writer for round logs.
pub struct RoundLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RoundLogWriter<W> {
    pub fn new(w: W) -> Self {
        RoundLogWriter {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write(&mut self, log: &RoundLog) -> Result<()> {
        self.inner.serialize(RoundRow {
            t: log.t,
            arm: log.arm,
            gain: log.gain,
            p_estimate: log.p_estimate,
            estimator_value: log.estimator_value,
            gr_iterations: log.gr_iterations,
        })?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Round logs back from CSV. Fields the format does not carry
/// (`gr_cap_hit`, `expected_gain`) come back as their defaults.
pub fn read_round_log<R: Read>(r: R) -> Result<Vec<RoundLog>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<RoundRow>()
        .map(|row| {
            let row = row?;
            Ok(RoundLog {
                t: row.t,
                arm: row.arm,
                gain: row.gain,
                p_estimate: row.p_estimate,
                estimator_value: row.estimator_value,
                gr_iterations: row.gr_iterations,
                gr_cap_hit: false,
                expected_gain: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainHeader {
    pub generator_id: String,
    pub seed: Option<u64>,
    #[serde(rename = "N")]
    pub n_arms: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
}

/// Writes `T` rows of `N` gains (headed `arm0..armN-1`) and a JSON header.
pub fn write_gains(g: &GainSequence, csv_path: &Path, header_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record((0..g.n_arms()).map(|i| format!("arm{i}")))?;
    for row in g.rows() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    let header = GainHeader {
        generator_id: g.generator_id.clone(),
        seed: g.seed,
        n_arms: g.n_arms(),
        horizon: g.horizon(),
    };
    write_json(header_path, &header)
}

pub fn read_gains(csv_path: &Path, header_path: &Path) -> Result<GainSequence> {
    let header: GainHeader = serde_json::from_reader(BufReader::new(File::open(header_path)?))?;
    let mut rd = csv::Reader::from_path(csv_path)?;
    let mut gains = Vec::with_capacity(header.n_arms * header.horizon);
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != header.n_arms {
            bail!("row {} has {} columns, header says N = {}", gains.len() / header.n_arms + 1, rec.len(), header.n_arms);
        }
        for field in rec.iter() {
            gains.push(field.parse::<f64>()?);
        }
    }
    let g = GainSequence::from_rows(gains, header.n_arms, header.generator_id, header.seed)?;
    if g.horizon() != header.horizon {
        bail!("table has {} rows, header says T = {}", g.horizon(), header.horizon);
    }
    Ok(g)
}

/// One line of the flat results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(rename = "N")]
    pub n_arms: usize,
    pub dist: String,
    pub eta: Option<f64>,
    pub regret: f64,
    pub over_est: Option<f64>,
    pub under_est: Option<f64>,
    pub div_est: Option<f64>,
    pub algorithm: String,
    pub adversary: String,
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

pub fn result_rows(cfg: &ExperimentConfig, episodes: &[EpisodeResult], decompositions: &[Decomposition]) -> Vec<ResultRow> {
    let hash = hash_hex(cfg.fingerprint());
    let algorithm = serde_json::to_value(cfg.algorithm)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    episodes
        .iter()
        .map(|e| {
            let d = decompositions.iter().find(|d| d.seed == e.seed);
            ResultRow {
                config_hash: hash.clone(),
                seed: e.seed,
                horizon: cfg.horizon,
                n_arms: cfg.n_arms,
                dist: cfg.distribution.name().to_owned(),
                eta: e.eta,
                regret: e.regret,
                over_est: d.map(|d| d.overestimation.value),
                under_est: d.map(|d| d.underestimation.value),
                div_est: d.map(|d| d.divergence_sum.value),
                algorithm: algorithm.clone(),
                adversary: cfg.adversary.name().to_owned(),
            }
        })
        .collect()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Everything needed to reproduce and interpret one config's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub report: Option<RegretReport>,
    /// `(seed, error)` for runs that failed.
    #[serde(default)]
    pub failures: Vec<(u64, String)>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, seeds: Vec<u64>, report: Option<RegretReport>, failures: Vec<(u64, String)>) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: hash_hex(cfg.fingerprint()),
            config: cfg.clone(),
            seeds,
            report,
            failures,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
