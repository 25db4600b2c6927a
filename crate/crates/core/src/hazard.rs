//! Hazard rates and tail diagnostics.
//!
//! `h_alpha(z) = f(z) |z|^alpha / (1 - F(z))^(1 - alpha)`, with `alpha = 0`
//! the ordinary hazard rate. Everything is evaluated as
//! `exp(ln f + alpha ln|z| - (1 - alpha) ln(1 - F))`, so deep tails do not
//! underflow before the ratio is formed.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Kind};
use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, QuadOptions};

// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

/// Margin kept between grids and the edges of a bounded support.
pub const SUPPORT_EDGE_MARGIN: f64 = 1e-9;

/// Fraction of the grid (from the right) inspected by the eventual checks.
pub const TAIL_FRACTION: f64 = 0.2;

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::param("alpha", alloc::format!("must lie in [0, 1), got {alpha}")))
    }
}

/// `f(z) / (1 - F(z))`.
pub fn hazard_rate(d: &DistributionSpec, z: f64) -> Result<f64> {
    let ln_f = d.ln_pdf(z);
    if ln_f == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let ln_s = d.ln_sf(z);
    if ln_s == f64::NEG_INFINITY {
        return Err(Error::SupportEdge { z });
    }
    Ok((ln_f - ln_s).exp())
}

/// `f(z) |z|^alpha / (1 - F(z))^(1 - alpha)` for `alpha` in `[0, 1)`.
pub fn generalized_hazard(d: &DistributionSpec, z: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return hazard_rate(d, z);
    }
    let ln_f = d.ln_pdf(z);
    if ln_f == f64::NEG_INFINITY || z == 0.0 {
        return Ok(0.0);
    }
    let ln_s = d.ln_sf(z);
    if ln_s == f64::NEG_INFINITY {
        return Err(Error::SupportEdge { z });
    }
    Ok((ln_f + alpha * z.abs().ln() - (1.0 - alpha) * ln_s).exp())
}

/// `R(z) = -ln(1 - F(z))`.
pub fn log_survival(d: &DistributionSpec, z: f64) -> Result<f64> {
    let ln_s = d.ln_sf(z);
    if ln_s == f64::NEG_INFINITY {
        return Err(Error::SupportEdge { z });
    }
    Ok(-ln_s)
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(move |k| if k == n - 1 { b } else { a + step * k as f64 })
}

fn check_range(range: (f64, f64), n_points: usize, min_points: usize) -> Result<()> {
    let (a, b) = range;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::param("grid_range", alloc::format!("need finite zmin < zmax, got ({a}, {b})")));
    }
    if n_points < min_points {
        return Err(Error::param("n_points", alloc::format!("need at least {min_points}, got {n_points}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardReport {
    pub alpha: f64,
    /// `(z, h_alpha(z))`, sorted by `z`; includes the refined maximizer.
    pub grid: Vec<(f64, f64)>,
    pub argmax_z: f64,
    pub sup_estimate: f64,
    /// Analytic bound on `sup h_alpha`, when one is known for the kind.
    pub certified_bound: Option<f64>,
    pub grid_range: (f64, f64),
    /// Set when `h_alpha` is still rising at the right edge of the grid, so
    /// the supremum may lie beyond it (or be infinite).
    pub inconclusive: bool,
    /// Grid points dropped because the survival function vanished there.
    pub skipped_points: usize,
}

/// Dense-grid maximum of `h_alpha`, refined by golden-section search around
/// the best grid point.
pub fn sup_generalized_hazard(
    d: &DistributionSpec,
    alpha: f64,
    grid_range: (f64, f64),
    n_points: usize,
) -> Result<HazardReport> {
    check_alpha(alpha)?;
    check_range(grid_range, n_points, 100)?;
    let support = d.support();
    let margin = SUPPORT_EDGE_MARGIN * d.eta();
    let lo = grid_range.0.max(support.lower + margin);
    let hi = if support.bounded_right {
        grid_range.1.min(support.upper - margin)
    } else {
        grid_range.1
    };
    if !(lo < hi) {
        return Err(Error::param("grid_range", "does not intersect the support"));
    }

    let mut grid = Vec::with_capacity(n_points + 1);
    let mut skipped = 0;
    for z in linspace(lo, hi, n_points) {
        match generalized_hazard(d, z, alpha) {
            Ok(h) => grid.push((z, h)),
            Err(Error::SupportEdge { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if grid.len() < 2 {
        return Err(Error::Numerical("survival function vanishes on the whole grid".into()));
    }

    let k = (0..grid.len())
        .max_by(|&i, &j| grid[i].1.total_cmp(&grid[j].1))
        .expect("non-empty");
    let last = grid.len() - 1;
    let rising = grid[last].1 > grid[last - 1].1 * (1.0 + 1e-9);
    let inconclusive = k == last && rising || !grid[k].1.is_finite();

    if 0 < k && k < last && grid[k].1.is_finite() {
        let h = |z: f64| generalized_hazard(d, z, alpha).unwrap_or(f64::NEG_INFINITY);
        let (z, v) = golden_max(h, grid[k - 1].0, grid[k + 1].0);
        if v > grid[k].1 {
            let at = grid.partition_point(|p| p.0 < z);
            grid.insert(at, (z, v));
        }
    }
    let (argmax_z, sup_estimate) = grid
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");

    let certified_bound = match d.kind() {
        Kind::Gaussian if alpha > 0.0 => Some(d.eta().powf(alpha - 1.0) * 2.0 / alpha),
        Kind::Exponential { rate } if alpha == 0.0 => Some(rate / d.eta()),
        _ => None,
    };

    Ok(HazardReport {
        alpha,
        grid,
        argmax_z,
        sup_estimate,
        certified_bound,
        grid_range: (lo, hi),
        inconclusive,
        skipped_points: skipped,
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-14 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    Constant,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub direction: Direction,
    /// Left end of the longest run, ending at the right edge, that agrees
    /// with `direction`. Equals the right edge when inconclusive.
    pub threshold_z0: f64,
    pub grid_range: (f64, f64),
}

/// Sign of `b - a`, treating differences within `1e-12` of the larger
/// magnitude as zero.
fn diff_sign(a: f64, b: f64) -> i8 {
    let d = b - a;
    if d.abs() <= 1e-12 * a.abs().max(b.abs()) {
        0
    } else if d > 0.0 {
        1
    } else {
        -1
    }
}

/// Decides whether `f` is eventually monotone on a uniform grid: the last
/// [`TAIL_FRACTION`] of successive differences must not contain both signs.
pub fn eventual_monotonicity_check<F: FnMut(f64) -> f64>(
    mut f: F,
    grid_range: (f64, f64),
    n_points: usize,
) -> Result<MonotonicityVerdict> {
    check_range(grid_range, n_points, 3)?;
    let zs: Vec<f64> = linspace(grid_range.0, grid_range.1, n_points).collect();
    let vals: Vec<f64> = zs.iter().map(|&z| f(z)).collect();
    let signs: Vec<i8> = vals.windows(2).map(|w| diff_sign(w[0], w[1])).collect();
    let tail = ((signs.len() as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, signs.len());
    let tail_start = signs.len() - tail;

    let inconclusive = MonotonicityVerdict {
        direction: Direction::Inconclusive,
        threshold_z0: grid_range.1,
        grid_range,
    };
    if vals[tail_start..].iter().any(|v| !v.is_finite()) {
        return Ok(inconclusive);
    }
    let has_up = signs[tail_start..].contains(&1);
    let has_down = signs[tail_start..].contains(&-1);
    let (direction, wanted) = match (has_up, has_down) {
        (true, true) => return Ok(inconclusive),
        (true, false) => (Direction::Increasing, 1),
        (false, true) => (Direction::Decreasing, -1),
        (false, false) => (Direction::Constant, 0),
    };
    let mut start = signs.len();
    while start > 0 && (signs[start - 1] == wanted || signs[start - 1] == 0) && vals[start - 1].is_finite() {
        start -= 1;
    }
    Ok(MonotonicityVerdict {
        direction,
        threshold_z0: zs[start],
        grid_range,
    })
}

/// Smallest grid point from which `f <= 0` holds up to the right edge, or
/// `None` when the last grid value is positive.
pub fn eventual_nonpositive_onset<F: FnMut(f64) -> f64>(
    mut f: F,
    grid_range: (f64, f64),
    n_points: usize,
) -> Result<Option<f64>> {
    check_range(grid_range, n_points, 2)?;
    let zs: Vec<f64> = linspace(grid_range.0, grid_range.1, n_points).collect();
    let mut onset = None;
    for &z in zs.iter().rev() {
        if f(z) <= 0.0 {
            onset = Some(z);
        } else {
            break;
        }
    }
    Ok(onset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Heavy,
    Light,
    Inconclusive,
}

/// `ln(Fbar(z) e^{lambda z})` on the grid for one `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEvidence {
    pub lambda: f64,
    pub direction: Direction,
    pub ln_values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailClass {
    pub class: TailKind,
    /// Largest `lambda` for which `Fbar(z) e^{lambda z}` stayed bounded.
    pub lambda_star: Option<f64>,
    pub accepted: Vec<f64>,
    pub evidence: Vec<TailEvidence>,
}

/// `2^-6, 2^-5, ..., 2^4`.
pub fn default_lambda_ladder() -> Vec<f64> {
    (-6..=4).map(|k| 2f64.powi(k)).collect()
}

/// Classifies the right tail by the eventual trend of `Fbar(z) e^{lambda z}`
/// for each `lambda` in the ladder (log scale, so no overflow).
pub fn tail_classify(d: &DistributionSpec, lambdas: &[f64], grid_range: (f64, f64), n_points: usize) -> Result<TailClass> {
    check_range(grid_range, n_points, 10)?;
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::param("lambdas", "need a non-empty list of positive values"));
    }
    if d.is_bounded_right() {
        return Ok(TailClass {
            class: TailKind::Light,
            lambda_star: lambdas.iter().copied().reduce(f64::max),
            accepted: lambdas.to_vec(),
            evidence: Vec::new(),
        });
    }
    let edge_sf = d.sf(grid_range.1);
    if edge_sf >= 1e-6 {
        return Err(Error::param(
            "grid_range",
            alloc::format!("right edge must reach the tail (survival {edge_sf:e} >= 1e-6)"),
        ));
    }
    let mut evidence = Vec::with_capacity(lambdas.len());
    let mut accepted = Vec::new();
    let mut growing = 0;
    for &lambda in lambdas {
        let g = |z: f64| d.ln_sf(z) + lambda * z;
        let verdict = eventual_monotonicity_check(g, grid_range, n_points)?;
        match verdict.direction {
            Direction::Decreasing | Direction::Constant => accepted.push(lambda),
            Direction::Increasing => growing += 1,
            Direction::Inconclusive => {}
        }
        evidence.push(TailEvidence {
            lambda,
            direction: verdict.direction,
            ln_values: linspace(grid_range.0, grid_range.1, n_points).map(|z| (z, g(z))).collect(),
        });
    }
    let lambda_star = accepted.iter().copied().reduce(f64::max);
    let class = if lambda_star.is_some() {
        TailKind::Light
    } else if growing == lambdas.len() {
        TailKind::Heavy
    } else {
        TailKind::Inconclusive
    };
    Ok(TailClass {
        class,
        lambda_star,
        accepted,
        evidence,
    })
}

fn check_delta_beta(delta: f64, beta: f64, z: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta", alloc::format!("must lie in [0, 1), got {delta}")));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::param("beta", alloc::format!("must be > 1, got {beta}")));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::param("z", alloc::format!("must be finite and >= 0, got {z}")));
    }
    Ok(())
}

/// `m_{delta,beta}(z) e^{z^beta}`, which has the sign of `m_{delta,beta}`
/// but stays of order one in the tail.
///
/// With `c = beta z^(beta-1)` the tail term becomes
/// `beta z^(beta-1) e^{z^beta} ∫_z^∞ e^{-t^beta} dt = ∫_0^∞ exp(-((z + v/c)^beta - z^beta)) dv`,
/// which is integrated adaptively to relative tolerance `1e-10`.
pub fn m_delta_beta_scaled(delta: f64, beta: f64, z: f64) -> Result<f64> {
    check_delta_beta(delta, beta, z)?;
    if z == 0.0 {
        return Ok(1.0 - delta);
    }
    let c = beta * z.powf(beta - 1.0);
    let zb = z.powf(beta);
    let integrand = |v: f64| {
        let x = v / (c * z);
        (-zb * (beta * x.ln_1p()).exp_m1()).exp()
    };
    let tail = integrate_to_infinity(integrand, 0.0, QuadOptions::rel(1e-10))?;
    Ok(1.0 - delta - tail.value)
}

/// `(1 - delta) e^{-z^beta} - beta z^(beta-1) ∫_z^∞ e^{-t^beta} dt`.
pub fn m_delta_beta(delta: f64, beta: f64, z: f64) -> Result<f64> {
    Ok(m_delta_beta_scaled(delta, beta, z)? * (-z.powf(beta)).exp())
}
