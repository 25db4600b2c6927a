//! Episode runner, regret accounting and the penalty decomposition.
//!
//! Realized regret is `max_i sum_t g_{t,i} - sum_t g_{t,i_t}`. Every
//! `(config, seed)` pair owns its own generator streams, derived from
//! `(master_seed, config fingerprint, seed)`, so runs can be scheduled in
//! any order or in parallel with identical results.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::adversaries::{AdversarySpec, GainSequence};
use crate::baselines::{default_learning_rate, exp3_step, Exp3State};
use crate::distributions::{DistributionSpec, Kind};
use crate::error::{Error, Result};
use crate::gbpa::{gbpa_step_exact, gbpa_step_ftpl, BanditState, GRConfig, GradientMethod, RoundLog};
use crate::rng::{mix64, stream, stream_seed};
use crate::smoothing::{divergence_penalty_mc, potential_mc, MAX_QUADRATURE_ARMS};
use crate::tuning::{eta_gaussian, eta_master, eta_uniform, TuningResult};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GbpaExact,
    FtplGr,
    Exp3,
}

/// How the perturbation scale is chosen. The chosen `eta` multiplies the
/// scale already present in the configured distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EtaRule {
    Fixed { eta: f64 },
    /// `(NT)^(2/3)`; bounded-support distributions only.
    Uniform,
    /// Generalized-hazard schedule at a given `alpha`; needs a certified
    /// bound on `h_alpha` (Gaussian).
    GeneralizedHazard { alpha: f64 },
    /// Gaussian schedule with `alpha = 1 / ln T`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    /// Divergence is evaluated every `thinning`-th round and scaled up.
    pub thinning: u64,
    pub divergence_samples: usize,
    pub potential_samples: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            thinning: 10,
            divergence_samples: 10_000,
            potential_samples: 100_000,
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub distribution: DistributionSpec,
    pub adversary: AdversarySpec,
    #[serde(rename = "N")]
    pub n_arms: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub eta_rule: EtaRule,
    #[serde(default = "one")]
    pub n_seeds: u32,
    /// Geometric-resampling cap; `ceil(sqrt(NT))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gr_cap: Option<u64>,
    #[serde(default)]
    pub gradient: GradientMethod,
    /// EXP3 learning rate; `sqrt(2 ln N / (NT))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp3_learning_rate: Option<f64>,
    #[serde(default)]
    pub exp3_gamma: f64,
    #[serde(default)]
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub master_seed: u64,
    /// Output location; not part of the fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const ADVERSARY_STREAM: u64 = 0x6164_7665_7273_6172;
const DIAGNOSTIC_STREAM: u64 = 0x6469_6167_6e6f_7374;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

impl ExperimentConfig {
    /// FNV-1a hash of the JSON form, ignoring `master_seed` and `output`.
    pub fn fingerprint(&self) -> u64 {
        let mut c = self.clone();
        c.master_seed = 0;
        c.output = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        fnv1a(&json)
    }

    pub fn gr_config(&self) -> Result<GRConfig> {
        match self.gr_cap {
            Some(m) => GRConfig::new(m),
            None => Ok(GRConfig::default_for(self.n_arms, self.horizon)),
        }
    }

    /// `NT / (e M)` for resampling runs.
    pub fn gr_bias_budget(&self) -> Option<f64> {
        match self.algorithm {
            Algorithm::FtplGr => self.gr_config().ok().map(|c| c.bias_budget(self.n_arms, self.horizon)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_arms == 0 {
            return Err(Error::param("N", "need at least one arm"));
        }
        if self.horizon == 0 {
            return Err(Error::param("T", "need at least one round"));
        }
        if self.n_seeds == 0 {
            return Err(Error::param("n_seeds", "need at least one seed"));
        }
        self.adversary.validate(self.n_arms)?;
        self.gr_config()?;
        if self.decomposition.thinning == 0 {
            return Err(Error::param("decomposition.thinning", "must be at least 1"));
        }
        if self.algorithm == Algorithm::GbpaExact {
            match self.gradient {
                GradientMethod::Quadrature { abs_tol } if !(abs_tol > 0.0) => {
                    return Err(Error::param("gradient.abs_tol", "must be positive"));
                }
                GradientMethod::Quadrature { .. } if self.n_arms > MAX_QUADRATURE_ARMS => {
                    return Err(Error::Unsupported(alloc::format!(
                        "quadrature gradients are limited to {MAX_QUADRATURE_ARMS} arms"
                    )));
                }
                GradientMethod::CdfForm { n_samples } | GradientMethod::MonteCarlo { n_samples } if n_samples == 0 => {
                    return Err(Error::param("gradient.n_samples", "must be at least 1"));
                }
                _ => {}
            }
        }
        if self.algorithm == Algorithm::Exp3 {
            if let Some(lr) = self.exp3_learning_rate {
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(Error::param("exp3_learning_rate", "must be positive"));
                }
            }
            if !(0.0..=1.0).contains(&self.exp3_gamma) {
                return Err(Error::param("exp3_gamma", "must lie in [0, 1]"));
            }
            return Ok(());
        }
        self.resolve_eta().map(|_| ())
    }

    /// Scale from the rule, together with its certificate when the rule has
    /// one.
    pub fn resolve_eta(&self) -> Result<(f64, Option<TuningResult>)> {
        let d = &self.distribution;
        match self.eta_rule {
            EtaRule::Fixed { eta } => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::param("eta", "must be positive and finite"));
                }
                Ok((eta, None))
            }
            EtaRule::Uniform => {
                if !d.is_bounded_right() || !d.support().lower.is_finite() {
                    return Err(Error::param("eta_rule", "the uniform rule needs a bounded-support distribution"));
                }
                let r = eta_uniform(self.n_arms, self.horizon)?;
                Ok((r.eta, Some(r)))
            }
            EtaRule::GeneralizedHazard { alpha } => {
                if !matches!(d.kind(), Kind::Gaussian) {
                    return Err(Error::param(
                        "eta_rule",
                        "the generalized-hazard rule needs a certified hazard bound (gaussian)",
                    ));
                }
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::param("alpha", "must lie in (0, 1)"));
                }
                if self.n_arms < 2 {
                    return Err(Error::param("N", "the generalized-hazard rule needs N >= 2"));
                }
                let q = d.with_eta(1.0)?.emax_bound(self.n_arms)?;
                let r = eta_master(2.0 / alpha, alpha, self.n_arms, self.horizon, q)?;
                Ok((r.eta, Some(r)))
            }
            EtaRule::Gaussian => {
                if !matches!(d.kind(), Kind::Gaussian) {
                    return Err(Error::param("eta_rule", "the gaussian rule needs a gaussian distribution"));
                }
                let r = eta_gaussian(self.n_arms, self.horizon)?;
                Ok((r.eta, Some(r)))
            }
        }
    }

    /// The perturbation actually played.
    pub fn played_distribution(&self) -> Result<DistributionSpec> {
        let (eta, _) = self.resolve_eta()?;
        self.distribution.scale(eta)
    }

    pub fn learner_seed(&self, seed: u64) -> u64 {
        stream_seed(self.master_seed, self.fingerprint(), seed)
    }

    pub fn gains(&self, seed: u64) -> Result<GainSequence> {
        let s = mix64(self.learner_seed(seed) ^ ADVERSARY_STREAM);
        self.adversary.generate(self.n_arms, self.horizon as usize, s)
    }
}

/// Per-seed outcome of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub regret: f64,
    pub learner_gain: f64,
    pub best_gain: f64,
    /// `sum_t <p_t, g_t>` when the learner exposes `p_t`.
    pub expected_gain: Option<f64>,
    pub eta: Option<f64>,
    pub gr_cap_hits: u64,
    pub final_lhat: Vec<f64>,
}

/// Plays one episode and hands every round to `sink`.
pub fn run_episode_with<F: FnMut(&RoundLog)>(cfg: &ExperimentConfig, seed: u64, mut sink: F) -> Result<EpisodeResult> {
    cfg.validate()?;
    let gains = cfg.gains(seed)?;
    play(cfg, seed, &gains, |log, _| sink(log))
}

/// Plays one episode and returns its result with the full round log.
pub fn run_episode(cfg: &ExperimentConfig, seed: u64) -> Result<(EpisodeResult, Vec<RoundLog>)> {
    let mut logs = Vec::with_capacity(cfg.horizon as usize);
    let r = run_episode_with(cfg, seed, |l| logs.push(*l))?;
    Ok((r, logs))
}

/// Shared loop; `hook` also sees the learner state before each round when
/// the learner is a gradient-based one.
fn play<F: FnMut(&RoundLog, Option<&BanditState>)>(
    cfg: &ExperimentConfig,
    seed: u64,
    gains: &GainSequence,
    mut hook: F,
) -> Result<EpisodeResult> {
    let mut rng = stream(cfg.learner_seed(seed));
    let mut learner_gain = 0.0;
    let mut expected = 0.0;
    let mut has_expected = true;
    let mut cap_hits = 0;
    let final_lhat;
    let mut eta = None;
    match cfg.algorithm {
        Algorithm::Exp3 => {
            let lr = cfg
                .exp3_learning_rate
                .unwrap_or_else(|| default_learning_rate(cfg.n_arms, cfg.horizon));
            let mut state = Exp3State::new(cfg.n_arms, lr, cfg.exp3_gamma)?;
            for g in gains.rows() {
                let (log, next) = exp3_step(state, g, &mut rng)?;
                state = next;
                learner_gain += log.gain;
                expected += log.expected_gain.unwrap_or(0.0);
                hook(&log, None);
            }
            final_lhat = Vec::new();
        }
        Algorithm::GbpaExact | Algorithm::FtplGr => {
            let d = cfg.played_distribution()?;
            eta = Some(d.eta());
            let gr = cfg.gr_config()?;
            let mut state = BanditState::new(cfg.n_arms)?;
            for g in gains.rows() {
                let before = state.clone();
                let (log, next) = if cfg.algorithm == Algorithm::GbpaExact {
                    gbpa_step_exact(state, g, &d, &cfg.gradient, &mut rng)?
                } else {
                    gbpa_step_ftpl(state, g, &d, gr, &mut rng)?
                };
                state = next;
                learner_gain += log.gain;
                match log.expected_gain {
                    Some(e) => expected += e,
                    None => has_expected = false,
                }
                cap_hits += log.gr_cap_hit as u64;
                hook(&log, Some(&before));
            }
            final_lhat = state.lhat().to_vec();
        }
    }
    let best_gain = gains.best_total();
    Ok(EpisodeResult {
        seed,
        regret: best_gain - learner_gain,
        learner_gain,
        best_gain,
        expected_gain: has_expected.then_some(expected),
        eta,
        gr_cap_hits: cap_hits,
        final_lhat,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimates of the three penalty terms for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub seed: u64,
    pub regret: f64,
    /// `Phi(G_T) - sum_t <p_t, g_t>`, the regret with the learner's own
    /// randomness in the last step averaged out.
    pub expected_regret: f64,
    /// `Phi~(0) - Phi(0)`.
    pub overestimation: Estimate,
    /// `Phi(Lhat_T) - Phi~(Lhat_T)`.
    pub underestimation: Estimate,
    /// Sum of per-round expected divergences.
    pub divergence_sum: Estimate,
    pub thinning: u64,
    /// True when the divergence sum was extrapolated from thinned rounds.
    pub approximate: bool,
}

impl Decomposition {
    pub fn total(&self) -> Estimate {
        let v = self.overestimation.value + self.underestimation.value + self.divergence_sum.value;
        let se = (self.overestimation.std_error.powi(2)
            + self.underestimation.std_error.powi(2)
            + self.divergence_sum.std_error.powi(2))
        .sqrt();
        Estimate { value: v, std_error: se }
    }
}

/// Replays the exact-gradient episode of `seed` and estimates each penalty.
/// The learner's path is identical to [`run_episode`]; diagnostics draw
/// from a separate stream.
pub fn decompose_penalties(cfg: &ExperimentConfig, seed: u64) -> Result<Decomposition> {
    if cfg.algorithm != Algorithm::GbpaExact {
        return Err(Error::Unsupported(
            "penalty decomposition needs exact learner probabilities (algorithm gbpa_exact)".into(),
        ));
    }
    cfg.validate()?;
    let d = cfg.played_distribution()?;
    let gains = cfg.gains(seed)?;
    let dc = cfg.decomposition;
    let mut diag = stream(mix64(cfg.learner_seed(seed) ^ DIAGNOSTIC_STREAM));
    let mut div_sum = 0.0;
    let mut div_var = 0.0;
    let mut failure = None;
    let result = play(cfg, seed, &gains, |log, before| {
        if failure.is_some() || (log.t - 1) % dc.thinning != 0 {
            return;
        }
        let state = before.expect("gradient-based learner");
        let g = gains.round((log.t - 1) as usize);
        match divergence_penalty_mc(state.lhat(), g, &d, dc.divergence_samples, &mut diag) {
            Ok(e) => {
                div_sum += e.value;
                div_var += e.std_error * e.std_error;
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let k = dc.thinning as f64;
    let evaluated = cfg.horizon.div_ceil(dc.thinning) as f64;
    // scale the sampled rounds up to the whole horizon
    let scale = cfg.horizon as f64 / evaluated;
    let zero = vec![0.0; cfg.n_arms];
    let over = potential_mc(&zero, &d, dc.potential_samples, &mut diag)?;
    let smoothed_end = potential_mc(&result.final_lhat, &d, dc.potential_samples, &mut diag)?;
    let phi_end = result.final_lhat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Decomposition {
        seed,
        regret: result.regret,
        expected_regret: result.best_gain - result.expected_gain.unwrap_or(f64::NAN),
        overestimation: Estimate {
            value: over.value,
            std_error: over.std_error,
        },
        underestimation: Estimate {
            value: phi_end - smoothed_end.value,
            std_error: smoothed_end.std_error,
        },
        divergence_sum: Estimate {
            value: div_sum * scale,
            std_error: div_var.sqrt() * scale,
        },
        thinning: dc.thinning,
        approximate: k > 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub eta: Option<f64>,
    pub predicted_bound: Option<f64>,
    pub gr_bias_budget: Option<f64>,
    /// `min(predicted_bound + gr_bias_budget, T)`.
    pub effective_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySummary {
    pub overestimation: Estimate,
    pub underestimation: Estimate,
    pub divergence_sum: Estimate,
    pub total: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub config_hash: u64,
    pub n_arms: usize,
    pub horizon: u64,
    pub per_seed: Vec<(u64, f64)>,
    pub mean_regret: f64,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std_regret: f64,
    pub std_error: f64,
    pub penalties: Option<PenaltySummary>,
    pub certificates: Certificates,
    pub gr_cap_hits: u64,
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean_estimate(xs: impl Iterator<Item = Estimate>) -> Estimate {
    let v: Vec<Estimate> = xs.collect();
    let n = v.len() as f64;
    let values: Vec<f64> = v.iter().map(|e| e.value).collect();
    let (mean, sd) = mean_and_sd(&values);
    // spread across seeds dominates; per-seed MC error enters through it
    let mc = (v.iter().map(|e| e.std_error.powi(2)).sum::<f64>()).sqrt() / n;
    Estimate {
        value: mean,
        std_error: (sd * sd / n + mc * mc).sqrt(),
    }
}

/// Aggregates per-seed episodes (and optional decompositions) into a report.
pub fn aggregate(cfg: &ExperimentConfig, episodes: &[EpisodeResult], decompositions: &[Decomposition]) -> Result<RegretReport> {
    if episodes.is_empty() {
        return Err(Error::param("episodes", "need at least one episode"));
    }
    let regrets: Vec<f64> = episodes.iter().map(|e| e.regret).collect();
    let (mean, sd) = mean_and_sd(&regrets);
    let penalties = (!decompositions.is_empty()).then(|| {
        let over = mean_estimate(decompositions.iter().map(|d| d.overestimation));
        let under = mean_estimate(decompositions.iter().map(|d| d.underestimation));
        let div = mean_estimate(decompositions.iter().map(|d| d.divergence_sum));
        let total = mean_estimate(decompositions.iter().map(|d| d.total()));
        PenaltySummary {
            overestimation: over,
            underestimation: under,
            divergence_sum: div,
            total,
        }
    });
    let (eta, tuning) = match cfg.algorithm {
        Algorithm::Exp3 => (None, None),
        _ => {
            let (eta, t) = cfg.resolve_eta()?;
            (Some(eta * cfg.distribution.eta()), t)
        }
    };
    let predicted = tuning.map(|t| t.predicted_bound);
    let budget = cfg.gr_bias_budget();
    let effective = predicted.map(|b| (b + budget.unwrap_or(0.0)).min(cfg.horizon as f64));
    Ok(RegretReport {
        config_hash: cfg.fingerprint(),
        n_arms: cfg.n_arms,
        horizon: cfg.horizon,
        per_seed: episodes.iter().map(|e| (e.seed, e.regret)).collect(),
        mean_regret: mean,
        std_regret: sd,
        std_error: sd / (episodes.len() as f64).sqrt(),
        penalties,
        certificates: Certificates {
            eta,
            predicted_bound: predicted,
            gr_bias_budget: budget,
            effective_bound: effective,
        },
        gr_cap_hits: episodes.iter().map(|e| e.gr_cap_hits).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_points: usize,
}

// two-sided 95% Student t quantiles, df = 1..=30
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

/// Least-squares slope of `ln(regret)` against `ln(T)` over `(T, regret)`
/// points. Needs at least four points spanning two decades of `T`.
pub fn fit_regret_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    if points.len() < 4 {
        return Err(Error::param("points", alloc::format!("need at least 4, got {}", points.len())));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0 && r > 0.0 && t.is_finite() && r.is_finite())) {
        return Err(Error::param("points", "horizons and regrets must be positive and finite"));
    }
    let tmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if tmax / tmin < 100.0 {
        return Err(Error::param("points", "horizons must span at least two decades"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = points.len() - 2;
    let se = (sse / df as f64 / sxx).sqrt();
    let tq = if df <= 30 { T_975[df - 1] } else { 1.96 };
    Ok(ExponentFit {
        slope,
        intercept,
        ci_low: slope - tq * se,
        ci_high: slope + tq * se,
        n_points: points.len(),
    })
}
