//! Closed-form scale schedules and the regret bounds that come with them.
//! Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

/// Which schedule produced a [`TuningResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningRule {
    /// Uniform `[0, 1]` perturbation, `eta = (NT)^(2/3)`.
    Uniform,
    /// Any perturbation with `h_alpha <= C` and `EMAX(N) <= Q`.
    GeneralizedHazard,
    /// Gaussian perturbation with `alpha = 1 / ln T`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub eta: f64,
    /// Expected-regret certificate. It can exceed `T`, in which case it is
    /// vacuous.
    pub predicted_bound: f64,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub rule: TuningRule,
}

fn check_nt(n: usize, t: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::param("N", "need at least one arm"));
    }
    if t == 0 {
        return Err(Error::param("T", "need at least one round"));
    }
    Ok((n as f64, t as f64))
}

/// `eta = (NT)^(2/3)`, bound `3 (NT)^(2/3)`, `epsilon = 1 / sqrt(2 eta)`.
pub fn eta_uniform(n: usize, t: u64) -> Result<TuningResult> {
    let (nf, tf) = check_nt(n, t)?;
    let eta = (nf * tf).powf(2.0 / 3.0);
    Ok(TuningResult {
        eta,
        predicted_bound: 3.0 * eta,
        alpha: None,
        epsilon: Some(1.0 / (2.0 * eta).sqrt()),
        rule: TuningRule::Uniform,
    })
}

/// Scale for a perturbation with `sup h_alpha <= c` and `EMAX(N) <= q_n`:
///
/// ```text
/// eta   = (2 C N T / ((1 - alpha) Q))^(1 / (2 - alpha))
/// bound = 2 (2C / (1 - alpha))^(1/(2-alpha)) (NT)^(1/(2-alpha)) Q^((1-alpha)/(2-alpha))
/// ```
pub fn eta_master(c: f64, alpha: f64, n: usize, t: u64, q_n: f64) -> Result<TuningResult> {
    let (nf, tf) = check_nt(n, t)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("C", "must be positive and finite"));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param("alpha", alloc::format!("must lie in [0, 1), got {alpha}")));
    }
    if !(q_n > 0.0 && q_n.is_finite()) {
        return Err(Error::param("Q", "must be positive and finite"));
    }
    let e = 1.0 / (2.0 - alpha);
    let eta = (2.0 * c * nf * tf / ((1.0 - alpha) * q_n)).powf(e);
    let bound = 2.0 * (2.0 * c / (1.0 - alpha)).powf(e) * (nf * tf).powf(e) * q_n.powf((1.0 - alpha) * e);
    Ok(TuningResult {
        eta,
        predicted_bound: bound,
        alpha: Some(alpha),
        epsilon: None,
        rule: TuningRule::GeneralizedHazard,
    })
}

/// The two closed forms of the Gaussian certificate:
/// `96 sqrt(NT) N^(1/ln T) sqrt(ln N) ln T`, and, when `T > N`,
/// `278 sqrt(NT) sqrt(ln N) ln T`.
pub fn gaussian_bound_forms(n: usize, t: u64) -> Result<(f64, Option<f64>)> {
    let (nf, tf) = check_nt(n, t)?;
    let common = (nf * tf).sqrt() * nf.ln().sqrt() * tf.ln();
    let b96 = 96.0 * common * nf.powf(1.0 / tf.ln());
    let b278 = (tf > nf).then(|| 278.0 * common);
    Ok((b96, b278))
}

/// Gaussian schedule with `alpha = 1 / ln T`:
/// `eta = (4NT / (alpha (1 - alpha) sqrt(2 ln N)))^(1/(2 - alpha))`.
pub fn eta_gaussian(n: usize, t: u64) -> Result<TuningResult> {
    let (nf, tf) = check_nt(n, t)?;
    if t <= 4 {
        return Err(Error::param("T", alloc::format!("must exceed 4, got {t}")));
    }
    if n < 2 {
        return Err(Error::param("N", "need at least two arms"));
    }
    let alpha = 1.0 / tf.ln();
    let q = (2.0 * nf.ln()).sqrt();
    let eta = (4.0 * nf * tf / (alpha * (1.0 - alpha) * q)).powf(1.0 / (2.0 - alpha));
    let (b96, b278) = gaussian_bound_forms(n, t)?;
    Ok(TuningResult {
        eta,
        predicted_bound: b278.map_or(b96, |b| b.min(b96)),
        alpha: Some(alpha),
        epsilon: None,
        rule: TuningRule::Gaussian,
    })
}

/// `T N L (1/(2 eta eps) + 1 - q) + eta` where `q = F^{-1}(1 - eps)` of the
/// unscaled perturbation and `L` bounds its density.
pub fn bounded_support_bound_raw(l: f64, eta: f64, epsilon: f64, q: f64, n: usize, t: u64) -> Result<f64> {
    let (nf, tf) = check_nt(n, t)?;
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::param("L", "must be positive and finite"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", "must be positive and finite"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    Ok(tf * nf * l * (1.0 / (2.0 * eta * epsilon) + 1.0 - q) + eta)
}

/// [`bounded_support_bound_raw`] with `L` and the quantile read off `d`
/// (its shape only; `d`'s own scale is ignored).
pub fn bounded_support_bound(d: &DistributionSpec, eta: f64, epsilon: f64, n: usize, t: u64) -> Result<f64> {
    if !d.is_bounded_right() || !d.support().lower.is_finite() {
        return Err(Error::param("distribution", "needs bounded support"));
    }
    let unit = d.with_eta(1.0)?;
    let l = unit
        .density_bound()
        .ok_or_else(|| Error::param("distribution", "density must be bounded"))?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    let q = unit.quantile(1.0 - epsilon)?;
    bounded_support_bound_raw(l, eta, epsilon, q, n, t)
}
