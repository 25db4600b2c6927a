//! File formats, parallel sweeps and command helpers on top of
//! `banditlab-core`.

pub mod io;
pub mod sweep;

use anyhow::{bail, Result};
use banditlab_core::distributions::{DistributionSpec, Kind};
use banditlab_core::tuning::{eta_gaussian, eta_master, eta_uniform, TuningResult};

/// Parses `--dist`: either a bare kind name (`gaussian`) or a full JSON
/// spec (`{"kind": "weibull", "params": {"shape": 2}}`).
pub fn parse_dist(arg: &str) -> Result<DistributionSpec> {
    let trimmed = arg.trim();
    let json = if trimmed.starts_with('{') {
        trimmed.to_owned()
    } else {
        serde_json::json!({ "kind": trimmed }).to_string()
    };
    Ok(serde_json::from_str(&json)?)
}

/// Picks the schedule that fits the distribution. For Gaussians, `alpha`
/// selects the generalized-hazard schedule at that `alpha`; otherwise the
/// `alpha = 1 / ln T` schedule is used.
pub fn tune(d: &DistributionSpec, n: usize, t: u64, alpha: Option<f64>) -> Result<TuningResult> {
    Ok(match (d.kind(), alpha) {
        (Kind::Uniform01, None) => eta_uniform(n, t)?,
        (Kind::Gaussian, None) => eta_gaussian(n, t)?,
        (Kind::Gaussian, Some(a)) => {
            if n < 2 {
                bail!("the generalized-hazard schedule needs N >= 2");
            }
            let q = d.with_eta(1.0)?.emax_bound(n)?;
            eta_master(2.0 / a, a, n, t, q)?
        }
        (Kind::Uniform01, Some(_)) => bail!("--alpha only applies to gaussian perturbations"),
        (k, _) => bail!("no tuning schedule for `{}`; use a fixed eta", k.name()),
    })
}
