//! Stochastic smoothing of the max potential `Phi(G) = max_i G_i`:
//!
//! ```text
//! Phi~(G) = E max_i (G_i + eta Z_i)
//! dPhi~/dG_i = P(i is the perturbed argmax) = E[1 - F_eta(L_{-i} - G_i)]
//! d2Phi~/dG_i2 = E[f_eta(L_{-i} - G_i)]
//! ```
//!
//! where `L_{-i} = max_{j != i} (G_j + eta Z_j)`. Monte-Carlo estimators take
//! a caller-owned generator; the quadrature forms are deterministic.

use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

/// Largest arm count accepted by the quadrature routines.
pub const MAX_QUADRATURE_ARMS: usize = 16;

/// Probability mass left outside the quadrature range on each side, per arm.
const TRUNCATION_MASS: f64 = 1e-13;

/// Floor applied to `p_i` when sizing the importance-weighted step.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub probabilities: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianEstimate {
    pub diagonal: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
}

/// `Phi~` for a fixed distribution and arm count.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPotential {
    pub dist: DistributionSpec,
    pub n_arms: usize,
}

impl SmoothedPotential {
    pub fn new(dist: DistributionSpec, n_arms: usize) -> Result<Self> {
        if n_arms == 0 {
            return Err(Error::param("n_arms", "need at least one arm"));
        }
        Ok(SmoothedPotential { dist, n_arms })
    }

    fn check(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.n_arms {
            return Err(Error::DimensionMismatch {
                expected: self.n_arms,
                got: g.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, g: &[f64], abs_tol: f64) -> Result<f64> {
        self.check(g)?;
        potential_quadrature(g, &self.dist, abs_tol)
    }

    pub fn gradient(&self, g: &[f64], abs_tol: f64) -> Result<Vec<f64>> {
        self.check(g)?;
        grad_quadrature(g, &self.dist, abs_tol)
    }

    pub fn bregman(&self, g1: &[f64], g0: &[f64], abs_tol: f64) -> Result<f64> {
        self.check(g1)?;
        self.check(g0)?;
        bregman_divergence(g1, g0, &self.dist, abs_tol)
    }
}

fn check_input(g: &[f64], n_samples: usize) -> Result<()> {
    if g.is_empty() {
        return Err(Error::param("G", "need at least one arm"));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("G", "entries must be finite"));
    }
    if n_samples == 0 {
        return Err(Error::param("n_samples", "need at least one sample"));
    }
    Ok(())
}

/// Index of the largest entry (lowest index on ties), its value and the
/// runner-up value (`-inf` when there is a single entry).
pub(crate) fn top_two(w: &[f64]) -> (usize, f64, f64) {
    let mut best = 0;
    let mut first = w[0];
    let mut second = f64::NEG_INFINITY;
    for (j, &x) in w.iter().enumerate().skip(1) {
        if x > first {
            second = first;
            first = x;
            best = j;
        } else if x > second {
            second = x;
        }
    }
    (best, first, second)
}

fn perturb<R: RngCore + ?Sized>(g: &[f64], d: &DistributionSpec, rng: &mut R, w: &mut [f64]) {
    for (wj, &gj) in w.iter_mut().zip(g) {
        *wj = gj + d.sample(rng);
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

/// Monte-Carlo estimate of `E max_i (G_i + eta Z_i)`.
pub fn potential_mc<R: RngCore + ?Sized>(
    g: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_input(g, n_samples)?;
    let mut w = vec![0.0; g.len()];
    let mut m = Moments::default();
    for _ in 0..n_samples {
        perturb(g, d, rng, &mut w);
        m.push(top_two(&w).1);
    }
    Ok(McEstimate {
        value: m.mean,
        std_error: m.std_error(),
        n_samples,
    })
}

/// Argmax frequencies of `G + eta Z`.
pub fn grad_mc<R: RngCore + ?Sized>(
    g: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_input(g, n_samples)?;
    let n = g.len();
    let mut w = vec![0.0; n];
    let mut counts = vec![0u64; n];
    for _ in 0..n_samples {
        perturb(g, d, rng, &mut w);
        counts[top_two(&w).0] += 1;
    }
    let total = n_samples as f64;
    let probabilities: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let std_errors = probabilities.iter().map(|&p| (p * (1.0 - p) / total).sqrt()).collect();
    Ok(GradientEstimate {
        probabilities,
        std_errors,
        n_samples,
    })
}

/// Shared loop of the conditional estimators: averages `h(L_{-i} - G_i)`
/// for every arm from one perturbation vector per sample.
fn conditional_mc<R, H>(g: &[f64], d: &DistributionSpec, n_samples: usize, rng: &mut R, h: H) -> Vec<Moments>
where
    R: RngCore + ?Sized,
    H: Fn(f64) -> f64,
{
    let n = g.len();
    let mut w = vec![0.0; n];
    let mut acc = vec![Moments::default(); n];
    for _ in 0..n_samples {
        perturb(g, d, rng, &mut w);
        let (best, first, second) = top_two(&w);
        for (i, m) in acc.iter_mut().enumerate() {
            let rest = if i == best { second } else { first };
            m.push(h(rest - g[i]));
        }
    }
    acc
}

/// `p_i = E[1 - F_eta(L_{-i} - G_i)]`, renormalized onto the simplex.
pub fn grad_cdf_form<R: RngCore + ?Sized>(
    g: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_input(g, n_samples)?;
    let acc = conditional_mc(g, d, n_samples, rng, |x| d.sf(x));
    let total: f64 = acc.iter().map(|m| m.mean).sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("conditional survival estimates sum to zero".into()));
    }
    Ok(GradientEstimate {
        probabilities: acc.iter().map(|m| m.mean / total).collect(),
        std_errors: acc.iter().map(|m| m.std_error() / total).collect(),
        n_samples,
    })
}

/// `E[f_eta(L_{-i} - G_i)]` for every arm.
pub fn hessian_diag_mc<R: RngCore + ?Sized>(
    g: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<HessianEstimate> {
    check_input(g, n_samples)?;
    let acc = conditional_mc(g, d, n_samples, rng, |x| d.pdf(x));
    Ok(HessianEstimate {
        diagonal: acc.iter().map(|m| m.mean).collect(),
        std_errors: acc.iter().map(|m| m.std_error()).collect(),
        n_samples,
    })
}

fn check_quadrature_input(g: &[f64], abs_tol: f64) -> Result<()> {
    check_input(g, 1)?;
    if g.len() > MAX_QUADRATURE_ARMS {
        return Err(Error::Unsupported(alloc::format!(
            "quadrature is limited to {MAX_QUADRATURE_ARMS} arms, got {}",
            g.len()
        )));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::param("abs_tol", "must be positive"));
    }
    Ok(())
}

/// Quadrature range of the standard-scaled perturbation: the support where
/// it is finite, otherwise the `TRUNCATION_MASS` quantiles.
fn truncated_support(d: &DistributionSpec) -> (f64, f64) {
    let s = d.support();
    let lo = if s.lower.is_finite() {
        s.lower
    } else {
        d.quantile(TRUNCATION_MASS).expect("valid probability")
    };
    let hi = if s.upper.is_finite() {
        s.upper
    } else {
        d.quantile(1.0 - TRUNCATION_MASS).expect("valid probability")
    };
    (lo, hi)
}

/// `p_i = ∫ f_eta(z) prod_{j != i} F_eta(G_i - G_j + z) dz`, one adaptive
/// quadrature per arm, then renormalized.
pub fn grad_quadrature(g: &[f64], d: &DistributionSpec, abs_tol: f64) -> Result<Vec<f64>> {
    check_quadrature_input(g, abs_tol)?;
    let n = g.len();
    let (lo, hi) = truncated_support(d);
    let kinks = d.kinks();
    let opts = QuadOptions::abs(abs_tol / n as f64);
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        // below a the product vanishes (or is within the truncation mass)
        let a = g
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &gj)| lo + gj - g[i])
            .fold(lo, f64::max);
        if a >= hi {
            p.push(0.0);
            continue;
        }
        let mut breaks = kinks.clone();
        for (j, &gj) in g.iter().enumerate() {
            if j != i {
                breaks.extend(kinks.iter().map(|k| k + gj - g[i]));
            }
        }
        let integrand = |z: f64| {
            let mut v = d.pdf(z);
            for (j, &gj) in g.iter().enumerate() {
                if j != i && v != 0.0 {
                    v *= d.cdf(g[i] - gj + z);
                }
            }
            v
        };
        p.push(integrate(integrand, a, hi, &breaks, opts)?.value.max(0.0));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 10.0 * abs_tol + 2.0 * n as f64 * TRUNCATION_MASS {
        return Err(Error::Numerical(alloc::format!(
            "quadrature probabilities sum to {total}, off by more than the tolerance"
        )));
    }
    for x in &mut p {
        *x /= total;
    }
    Ok(p)
}

/// `Phi~(G)` by quadrature of `E M = a + ∫_a^b (1 - prod_j F_eta(x - G_j)) dx`
/// over a range that holds all but the truncation mass.
pub fn potential_quadrature(g: &[f64], d: &DistributionSpec, abs_tol: f64) -> Result<f64> {
    check_quadrature_input(g, abs_tol)?;
    let (lo, hi) = truncated_support(d);
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = (gmin + lo, gmax + hi);
    let kinks = d.kinks();
    let breaks: Vec<f64> = g.iter().flat_map(|&gj| kinks.iter().map(move |k| k + gj)).collect();
    let survival = |x: f64| {
        let mut prod = 1.0;
        for &gj in g {
            prod *= d.cdf(x - gj);
            if prod == 0.0 {
                break;
            }
        }
        1.0 - prod
    };
    let r = integrate(survival, a, b, &breaks, QuadOptions::abs(abs_tol))?;
    Ok(a + r.value)
}

/// `D(G1, G0) = Phi~(G1) - Phi~(G0) - <grad Phi~(G0), G1 - G0>`.
///
/// Values that come out negative by less than `abs_tol` (quadrature noise)
/// are clamped to zero.
pub fn bregman_divergence(g1: &[f64], g0: &[f64], d: &DistributionSpec, abs_tol: f64) -> Result<f64> {
    if g1.len() != g0.len() {
        return Err(Error::DimensionMismatch {
            expected: g0.len(),
            got: g1.len(),
        });
    }
    let shift: f64 = g1.iter().zip(g0).map(|(a, b)| (a - b).abs()).sum();
    let phi1 = potential_quadrature(g1, d, abs_tol / 4.0)?;
    let phi0 = potential_quadrature(g0, d, abs_tol / 4.0)?;
    let grad = grad_quadrature(g0, d, abs_tol / (4.0 * shift.max(1.0)))?;
    let inner: f64 = grad.iter().zip(g1.iter().zip(g0)).map(|(p, (a, b))| p * (a - b)).sum();
    let value = phi1 - phi0 - inner;
    if value >= 0.0 {
        return Ok(value);
    }
    if value >= -abs_tol {
        log::debug!("bregman divergence {value:e} clamped to 0");
        return Ok(0.0);
    }
    Err(Error::Numerical(alloc::format!(
        "bregman divergence {value:e} is negative beyond tolerance {abs_tol:e}"
    )))
}

/// Learner distribution used by the divergence penalty: quadrature for
/// small `N`, otherwise the conditional Monte-Carlo form.
pub fn learner_probabilities<R: RngCore + ?Sized>(
    lhat: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if lhat.len() <= MAX_QUADRATURE_ARMS {
        grad_quadrature(lhat, d, 1e-10)
    } else {
        Ok(grad_cdf_form(lhat, d, n_samples, rng)?.probabilities)
    }
}

/// Expected one-round divergence `E_i[D(Lhat + (g_i / p_i) e_i, Lhat)]`.
///
/// Along coordinate `i` the divergence reduces to
/// `E ∫_0^S (F_eta(x + s) - F_eta(x)) ds` with `x = L_{-i} - Lhat_i` and
/// `S = |g_i| / p_i`, which the integrated cdf `Psi` evaluates exactly:
/// `Psi(x + S) - Psi(x) - S F(x)`. Only the expectation over `Z_{-i}` is
/// sampled. `p_i` is floored at [`PROBABILITY_FLOOR`] when sizing `S`.
pub fn divergence_penalty_mc<R: RngCore + ?Sized>(
    lhat: &[f64],
    gains: &[f64],
    d: &DistributionSpec,
    n_samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_input(lhat, n_samples)?;
    if gains.len() != lhat.len() {
        return Err(Error::DimensionMismatch {
            expected: lhat.len(),
            got: gains.len(),
        });
    }
    for (arm, &v) in gains.iter().enumerate() {
        if !(-1.0..=0.0).contains(&v) {
            return Err(Error::InvalidGain { round: 0, arm, value: v });
        }
    }
    if gains.iter().all(|&v| v == 0.0) {
        return Ok(McEstimate {
            value: 0.0,
            std_error: 0.0,
            n_samples,
        });
    }
    let p = learner_probabilities(lhat, d, n_samples, rng)?;
    let steps: Vec<f64> = p
        .iter()
        .zip(gains)
        .map(|(&pi, &gi)| {
            if pi > 0.0 && pi < PROBABILITY_FLOOR && gi != 0.0 {
                log::debug!("probability {pi:e} floored at {PROBABILITY_FLOOR:e} in the divergence step");
            }
            gi.abs() / pi.max(PROBABILITY_FLOOR)
        })
        .collect();
    let n = lhat.len();
    let mut w = vec![0.0; n];
    let mut m = Moments::default();
    for _ in 0..n_samples {
        perturb(lhat, d, rng, &mut w);
        let (best, first, second) = top_two(&w);
        let mut total = 0.0;
        for i in 0..n {
            if p[i] == 0.0 || steps[i] == 0.0 {
                continue;
            }
            let rest = if i == best { second } else { first };
            let x = rest - lhat[i];
            let s = steps[i];
            let term = if x == f64::NEG_INFINITY {
                0.0
            } else {
                d.integrated_cdf(x + s) - d.integrated_cdf(x) - s * d.cdf(x)
            };
            total += p[i] * term.max(0.0);
        }
        m.push(total);
    }
    Ok(McEstimate {
        value: m.mean,
        std_error: m.std_error(),
        n_samples,
    })
}
