//! The gradient-based prediction loop.
//!
//! Each round the learner plays `i_t ~ p_t = grad Phi~(Lhat_{t-1})`, observes
//! `g_{t,i_t}` and adds the importance-weighted estimate
//! `(g_{t,i_t} / p_{t,i_t}) e_{i_t}` to `Lhat`. Two interchangeable steps are
//! provided: [`gbpa_step_exact`] computes `p_t`, while [`gbpa_step_ftpl`]
//! only samples a perturbed leader and replaces `1 / p_{t,i_t}` with a
//! geometric-resampling count.

use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::rng::open01;
use crate::smoothing::{grad_cdf_form, grad_mc, grad_quadrature, top_two};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    lhat: Vec<f64>,
    t: u64,
}

impl BanditState {
    pub fn new(n_arms: usize) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::param("n_arms", "need at least one arm"));
        }
        Ok(BanditState {
            lhat: vec![0.0; n_arms],
            t: 0,
        })
    }

    /// State with a given gain estimate, e.g. for diagnostics at a chosen
    /// point.
    pub fn from_estimate(lhat: Vec<f64>, t: u64) -> Result<Self> {
        if lhat.is_empty() || lhat.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("lhat", "need finite entries and at least one arm"));
        }
        Ok(BanditState { lhat, t })
    }

    pub fn lhat(&self) -> &[f64] {
        &self.lhat
    }

    /// Rounds played so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn n_arms(&self) -> usize {
        self.lhat.len()
    }

    fn advance(mut self, arm: usize, estimate: f64) -> Self {
        self.lhat[arm] += estimate;
        self.t += 1;
        self
    }
}

/// One played round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 1-based round index.
    pub t: u64,
    /// 0-based arm index.
    pub arm: usize,
    pub gain: f64,
    /// `p_{t,i_t}` for exact steps, `1 / K` for resampling steps.
    pub p_estimate: f64,
    pub estimator_value: f64,
    pub gr_iterations: Option<u64>,
    pub gr_cap_hit: bool,
    /// `<p_t, g_t>`, available when `p_t` is computed.
    pub expected_gain: Option<f64>,
}

/// Cap `M` on geometric-resampling trials. Truncating at `M` adds at most
/// `NT / (e M)` to the expected regret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GRConfig {
    pub cap: u64,
}

impl GRConfig {
    pub fn new(cap: u64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::param("gr_cap", "must be at least 1"));
        }
        Ok(GRConfig { cap })
    }

    /// `M = ceil(sqrt(N T))`.
    pub fn default_for(n_arms: usize, horizon: u64) -> Self {
        let m = ((n_arms as f64) * (horizon as f64)).sqrt().ceil() as u64;
        GRConfig { cap: m.max(1) }
    }

    /// `N T / (e M)`.
    pub fn bias_budget(&self, n_arms: usize, horizon: u64) -> f64 {
        n_arms as f64 * horizon as f64 / (core::f64::consts::E * self.cap as f64)
    }
}

/// How an exact step obtains `p_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum GradientMethod {
    Quadrature { abs_tol: f64 },
    CdfForm { n_samples: usize },
    MonteCarlo { n_samples: usize },
}

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::Quadrature { abs_tol: 1e-10 }
    }
}

impl GradientMethod {
    pub fn probabilities<R: RngCore + ?Sized>(&self, lhat: &[f64], d: &DistributionSpec, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            GradientMethod::Quadrature { abs_tol } => grad_quadrature(lhat, d, abs_tol),
            GradientMethod::CdfForm { n_samples } => Ok(grad_cdf_form(lhat, d, n_samples, rng)?.probabilities),
            GradientMethod::MonteCarlo { n_samples } => Ok(grad_mc(lhat, d, n_samples, rng)?.probabilities),
        }
    }
}

/// Checks `g` against `[-1, 0]^N`; `round` is 1-based.
pub fn validate_gains(g: &[f64], n_arms: usize, round: u64) -> Result<()> {
    if g.len() != n_arms {
        return Err(Error::DimensionMismatch {
            expected: n_arms,
            got: g.len(),
        });
    }
    for (arm, &value) in g.iter().enumerate() {
        if !(-1.0..=0.0).contains(&value) {
            return Err(Error::InvalidGain { round, arm, value });
        }
    }
    Ok(())
}

fn perturbed_leader<R: RngCore + ?Sized>(lhat: &[f64], d: &DistributionSpec, rng: &mut R, w: &mut [f64]) -> usize {
    for (wj, &l) in w.iter_mut().zip(lhat) {
        *wj = l + d.sample(rng);
    }
    top_two(w).0
}

/// `argmax_i (Lhat_i + eta Z_i)`, lowest index on ties.
pub fn ftpl_sample<R: RngCore + ?Sized>(state: &BanditState, d: &DistributionSpec, rng: &mut R) -> usize {
    let mut w = vec![0.0; state.n_arms()];
    perturbed_leader(&state.lhat, d, rng, &mut w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resample {
    /// Trials until the perturbed leader was `arm` again, or the cap.
    pub k: u64,
    pub cap_hit: bool,
}

/// Redraws perturbations until the leader equals `arm`, counting trials.
/// `E[K] = (1 - (1 - p)^M) / p` where `p` is the probability of `arm`.
pub fn geometric_resampling<R: RngCore + ?Sized>(
    state: &BanditState,
    d: &DistributionSpec,
    arm: usize,
    cfg: GRConfig,
    rng: &mut R,
) -> Resample {
    let mut w = vec![0.0; state.n_arms()];
    for k in 1..=cfg.cap {
        if perturbed_leader(&state.lhat, d, rng, &mut w) == arm {
            return Resample { k, cap_hit: false };
        }
    }
    Resample {
        k: cfg.cap,
        cap_hit: true,
    }
}

/// Draws an index from `p`; entries equal to zero are never returned.
pub fn sample_index<R: RngCore + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let total: f64 = p.iter().sum();
    let u = open01(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// One round with `p_t` computed by `method`.
pub fn gbpa_step_exact<R: RngCore + ?Sized>(
    state: BanditState,
    g: &[f64],
    d: &DistributionSpec,
    method: &GradientMethod,
    rng: &mut R,
) -> Result<(RoundLog, BanditState)> {
    let round = state.t + 1;
    validate_gains(g, state.n_arms(), round)?;
    let p = method.probabilities(&state.lhat, d, rng)?;
    let arm = sample_index(&p, rng);
    let gain = g[arm];
    let estimate = gain / p[arm];
    let log = RoundLog {
        t: round,
        arm,
        gain,
        p_estimate: p[arm],
        estimator_value: estimate,
        gr_iterations: None,
        gr_cap_hit: false,
        expected_gain: Some(p.iter().zip(g).map(|(a, b)| a * b).sum()),
    };
    Ok((log, state.advance(arm, estimate)))
}

/// One follow-the-perturbed-leader round with geometric resampling.
pub fn gbpa_step_ftpl<R: RngCore + ?Sized>(
    state: BanditState,
    g: &[f64],
    d: &DistributionSpec,
    cfg: GRConfig,
    rng: &mut R,
) -> Result<(RoundLog, BanditState)> {
    let round = state.t + 1;
    validate_gains(g, state.n_arms(), round)?;
    let arm = ftpl_sample(&state, d, rng);
    let gain = g[arm];
    // a zero gain leaves the estimate at zero whatever K is
    let resample = if gain == 0.0 && state.n_arms() > 1 {
        None
    } else {
        Some(geometric_resampling(&state, d, arm, cfg, rng))
    };
    let k = resample.map_or(1, |r| r.k);
    if resample.is_some_and(|r| r.cap_hit) {
        log::debug!("geometric resampling hit the cap {} at round {round}", cfg.cap);
    }
    let estimate = k as f64 * gain;
    let log = RoundLog {
        t: round,
        arm,
        gain,
        p_estimate: 1.0 / k as f64,
        estimator_value: estimate,
        gr_iterations: resample.map(|r| r.k),
        gr_cap_hit: resample.is_some_and(|r| r.cap_hit),
        expected_gain: None,
    };
    Ok((log, state.advance(arm, estimate)))
}
