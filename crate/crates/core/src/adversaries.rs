//! Oblivious adversaries: gain tables in `[-1, 0]^{T x N}` fixed before
//! play.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{open01, stream};

/// A fully materialized `T x N` gain table, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSequence {
    gains: Vec<f64>,
    n_arms: usize,
    horizon: usize,
    pub generator_id: String,
    pub seed: Option<u64>,
}

impl GainSequence {
    /// Builds a table from row-major gains, checking every entry.
    pub fn from_rows(gains: Vec<f64>, n_arms: usize, generator_id: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::param("N", "need at least one arm"));
        }
        if gains.len() % n_arms != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_arms * (gains.len() / n_arms + 1),
                got: gains.len(),
            });
        }
        for (k, &value) in gains.iter().enumerate() {
            if !(-1.0..=0.0).contains(&value) {
                return Err(Error::InvalidGain {
                    round: (k / n_arms) as u64 + 1,
                    arm: k % n_arms,
                    value,
                });
            }
        }
        Ok(GainSequence {
            horizon: gains.len() / n_arms,
            gains,
            n_arms,
            generator_id: generator_id.into(),
            seed,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Gains of round `t` (0-based).
    pub fn round(&self, t: usize) -> &[f64] {
        &self.gains[t * self.n_arms..(t + 1) * self.n_arms]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.gains.chunks_exact(self.n_arms)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gains
    }

    /// `G_T`, the cumulative gain of every arm.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_arms];
        for row in self.rows() {
            for (c, g) in total.iter_mut().zip(row) {
                *c += g;
            }
        }
        total
    }

    /// `max_i G_{T,i}`.
    pub fn best_total(&self) -> f64 {
        self.cumulative().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_shape(n: usize, t: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::param("N", "need at least one arm"));
    }
    if t == 0 {
        return Err(Error::param("T", "need at least one round"));
    }
    Ok(())
}

/// Arm `best_arm` (0-based) gains 0 every round, all others `-gap`.
pub fn gen_constant_gap(n: usize, t: usize, gap: f64, best_arm: usize) -> Result<GainSequence> {
    check_shape(n, t)?;
    if !(0.0..=1.0).contains(&gap) {
        return Err(Error::param("gap", alloc::format!("must lie in [0, 1], got {gap}")));
    }
    if best_arm >= n {
        return Err(Error::param("best_arm", alloc::format!("must be below N = {n}, got {best_arm}")));
    }
    let mut row = vec![-gap; n];
    row[best_arm] = 0.0;
    let gains = row.iter().copied().cycle().take(n * t).collect();
    GainSequence::from_rows(gains, n, "constant_gap", None)
}

/// `g_{t,i} = -B_{t,i}` with `B_{t,i} ~ Bernoulli(means_i)`, drawn up front
/// from a stream seeded by `seed`.
pub fn gen_stochastic(n: usize, t: usize, means: &[f64], seed: u64) -> Result<GainSequence> {
    check_shape(n, t)?;
    if means.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: means.len(),
        });
    }
    if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::param("means", "entries must lie in [0, 1]"));
    }
    let mut rng = stream(seed);
    let mut gains = Vec::with_capacity(n * t);
    for _ in 0..t {
        for &m in means {
            gains.push(if bernoulli(m, &mut rng) { -1.0 } else { 0.0 });
        }
    }
    GainSequence::from_rows(gains, n, "stochastic", Some(seed))
}

fn bernoulli<R: RngCore + ?Sized>(p: f64, rng: &mut R) -> bool {
    // open01 never returns 0 or 1, so p = 0 and p = 1 are exact
    open01(rng) < p
}

/// The best arm (gain 0) rotates every `period` rounds, starting at arm 0;
/// all other arms gain -1.
pub fn gen_switching(n: usize, t: usize, period: usize) -> Result<GainSequence> {
    check_shape(n, t)?;
    if period == 0 {
        return Err(Error::param("period", "must be at least 1"));
    }
    let mut gains = vec![-1.0; n * t];
    for round in 0..t {
        gains[round * n + (round / period) % n] = 0.0;
    }
    GainSequence::from_rows(gains, n, "switching", None)
}

/// Serializable description of an adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AdversarySpec {
    ConstantGap {
        gap: f64,
        #[serde(default)]
        best_arm: usize,
    },
    Stochastic {
        means: Vec<f64>,
    },
    Switching {
        period: usize,
    },
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::ConstantGap { .. } => "constant_gap",
            AdversarySpec::Stochastic { .. } => "stochastic",
            AdversarySpec::Switching { .. } => "switching",
        }
    }

    /// Materializes the table; `seed` only matters for random adversaries.
    pub fn generate(&self, n: usize, t: usize, seed: u64) -> Result<GainSequence> {
        match self {
            AdversarySpec::ConstantGap { gap, best_arm } => gen_constant_gap(n, t, *gap, *best_arm),
            AdversarySpec::Stochastic { means } => gen_stochastic(n, t, means, seed),
            AdversarySpec::Switching { period } => gen_switching(n, t, *period),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            AdversarySpec::ConstantGap { gap, best_arm } => {
                if !(0.0..=1.0).contains(gap) {
                    return Err(Error::param("gap", "must lie in [0, 1]"));
                }
                if *best_arm >= n {
                    return Err(Error::param("best_arm", "must be below N"));
                }
            }
            AdversarySpec::Stochastic { means } => {
                if means.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: means.len(),
                    });
                }
                if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                    return Err(Error::param("means", "entries must lie in [0, 1]"));
                }
            }
            AdversarySpec::Switching { period } => {
                if *period == 0 {
                    return Err(Error::param("period", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

impl core::fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AdversarySpec::ConstantGap { gap, best_arm } => write!(f, "constant_gap(gap={gap}, best={best_arm})"),
            AdversarySpec::Stochastic { means } => write!(f, "stochastic({} arms)", means.len()),
            AdversarySpec::Switching { period } => write!(f, "switching(period={period})"),
        }
    }
}

impl GainSequence {
    pub fn describe(&self) -> String {
        match self.seed {
            Some(s) => alloc::format!("{} {}x{} seed {s}", self.generator_id, self.horizon, self.n_arms),
            None => alloc::format!("{} {}x{}", self.generator_id, self.horizon, self.n_arms),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_gap_examples() {
        let g = gen_constant_gap(2, 7, 1.0, 0).unwrap();
        assert_eq!(g.cumulative(), vec![0.0, -7.0]);
        assert_eq!(g.best_total(), 0.0);
        let z = gen_constant_gap(3, 4, 0.0, 1).unwrap();
        assert!(z.as_slice().iter().all(|&x| x == 0.0));
        assert!(gen_constant_gap(2, 3, 1.5, 0).is_err());
        assert!(gen_constant_gap(2, 3, 0.5, 2).is_err());
    }

    #[test]
    fn stochastic_extremes() {
        let ones = gen_stochastic(3, 50, &[1.0; 3], 9).unwrap();
        assert!(ones.as_slice().iter().all(|&x| x == -1.0));
        let zeros = gen_stochastic(3, 50, &[0.0; 3], 9).unwrap();
        assert!(zeros.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(gen_stochastic(2, 30, &[0.3, 0.6], 4).unwrap(), gen_stochastic(2, 30, &[0.3, 0.6], 4).unwrap());
        assert_ne!(gen_stochastic(2, 30, &[0.3, 0.6], 4).unwrap(), gen_stochastic(2, 30, &[0.3, 0.6], 5).unwrap());
    }

    #[test]
    fn switching_examples() {
        let t = 12;
        assert_eq!(gen_switching(2, t, t).unwrap().as_slice(), gen_constant_gap(2, t, 1.0, 0).unwrap().as_slice());
        let alt = gen_switching(2, 10, 1).unwrap();
        assert_eq!(alt.cumulative(), vec![-5.0, -5.0]);
        assert_eq!(alt.round(3), &[-1.0, 0.0]);
    }

    #[test]
    fn spec_round_trip() {
        let s = AdversarySpec::ConstantGap { gap: 0.5, best_arm: 0 };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"type":"constant_gap","gap":0.5,"best_arm":0}"#);
        let back: AdversarySpec = serde_json::from_str(r#"{"type":"switching","period":3}"#).unwrap();
        assert_eq!(back, AdversarySpec::Switching { period: 3 });
    }
}
