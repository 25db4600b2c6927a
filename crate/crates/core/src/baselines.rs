//! EXP3 reference learner.
//!
//! Gains in `[-1, 0]` are played as losses `-g` in `[0, 1]`; the sampling
//! distribution is `(1 - gamma) softmax(w) + gamma / N`, and the played arm's
//! log-weight drops by `lr * loss / p`.

use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbpa::{sample_index, validate_gains, RoundLog};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3State {
    log_weights: Vec<f64>,
    learning_rate: f64,
    gamma: f64,
    t: u64,
}

impl Exp3State {
    pub fn new(n_arms: usize, learning_rate: f64, gamma: f64) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::param("n_arms", "need at least one arm"));
        }
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::param("learning_rate", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::param("gamma", "must lie in [0, 1]"));
        }
        Ok(Exp3State {
            log_weights: vec![0.0; n_arms],
            learning_rate,
            gamma,
            t: 0,
        })
    }

    /// `lr = sqrt(2 ln N / (N T))`, no exploration mixing.
    pub fn tuned(n_arms: usize, horizon: u64) -> Result<Self> {
        Self::new(n_arms, default_learning_rate(n_arms, horizon), 0.0)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.log_weights.len() as f64;
        let m = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|x| (x - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|x| (1.0 - self.gamma) * x / s + self.gamma / n).collect()
    }
}

pub fn default_learning_rate(n_arms: usize, horizon: u64) -> f64 {
    (2.0 * (n_arms as f64).ln() / (n_arms as f64 * horizon.max(1) as f64)).sqrt()
}

pub fn exp3_step<R: RngCore + ?Sized>(mut state: Exp3State, g: &[f64], rng: &mut R) -> Result<(RoundLog, Exp3State)> {
    let round = state.t + 1;
    validate_gains(g, state.log_weights.len(), round)?;
    let p = state.probabilities();
    let arm = sample_index(&p, rng);
    let gain = g[arm];
    let loss_estimate = -gain / p[arm];
    state.log_weights[arm] -= state.learning_rate * loss_estimate;
    let m = state.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for w in &mut state.log_weights {
        *w -= m;
    }
    state.t = round;
    let log = RoundLog {
        t: round,
        arm,
        gain,
        p_estimate: p[arm],
        estimator_value: gain / p[arm],
        gr_iterations: None,
        gr_cap_hit: false,
        expected_gain: Some(p.iter().zip(g).map(|(a, b)| a * b).sum()),
    };
    Ok((log, state))
}
