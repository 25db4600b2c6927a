//! Acceptance gates. Each test prints one `PASS`/`FAIL` line with the
//! measured quantities and its wall time against the limit, then asserts
//! both.

use std::f64::consts::E;
use std::io::Write;
use std::time::{Duration, Instant};

use banditlab::sweep::{run_config, ConfigRun};
use banditlab_core::distributions::DistributionSpec;
use banditlab_core::gbpa::{gbpa_step_exact, geometric_resampling, BanditState, GRConfig, GradientMethod};
use banditlab_core::harness::{fit_regret_exponent, ExperimentConfig};
use banditlab_core::hazard::{
    eventual_monotonicity_check, eventual_nonpositive_onset, generalized_hazard, hazard_rate, m_delta_beta_scaled,
    Direction,
};
use banditlab_core::rng::{open01, stream};
use banditlab_core::smoothing::{divergence_penalty_mc, grad_cdf_form, grad_mc, grad_quadrature};
use banditlab_core::tuning::eta_master;
use serde_json::json;

fn gate(id: u32, title: &str, limit_s: u64, start: Instant, pass: bool, detail: String) {
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_s);
    let in_time = elapsed <= limit;
    let verdict = if pass && in_time { "PASS" } else { "FAIL" };
    let line = format!(
        "AC{id:02} {verdict} {title}: {detail} [{:.2}s / {limit_s}s]\n",
        elapsed.as_secs_f64()
    );
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "AC{id:02} criterion not met: {detail}");
    assert!(in_time, "AC{id:02} exceeded {limit_s}s: {:.2}s", elapsed.as_secs_f64());
}

fn config(v: serde_json::Value) -> ExperimentConfig {
    let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn run(name: &str, cfg: &ExperimentConfig, decompose: bool) -> ConfigRun {
    let r = run_config(name, cfg, decompose);
    assert!(r.failures.is_empty(), "{name}: {:?}", r.failures);
    r
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

#[test]
fn ac01_gaussian_generalized_hazard_bound() {
    let start = Instant::now();
    let d = DistributionSpec::gaussian();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for k in 1..=9 {
        let alpha = k as f64 / 10.0;
        for z in linspace(-10.0, 10.0, 2001) {
            let h = generalized_hazard(&d, z, alpha).unwrap();
            worst = worst.max(h * alpha / 2.0);
            if !(h <= 2.0 / alpha) {
                violations += 1;
            }
        }
    }
    gate(
        1,
        "gaussian h_alpha <= 2/alpha",
        1,
        start,
        violations == 0,
        format!("{violations} violations over 9 x 2001 points, max h_alpha/(2/alpha) = {worst:.4}"),
    );
}

#[test]
fn ac02_gaussian_mills_sandwich() {
    let start = Instant::now();
    let d = DistributionSpec::gaussian();
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for z in linspace(0.01, 10.0, 1000) {
        let h = hazard_rate(&d, z).unwrap();
        let upper = z / 2.0 + (z * z + 4.0).sqrt() / 2.0;
        min_gap = min_gap.min((h - z).min(upper - h));
        if !(z < h && h < upper) {
            violations += 1;
        }
    }
    gate(
        2,
        "gaussian hazard between z and (z + sqrt(z^2+4))/2",
        1,
        start,
        violations == 0,
        format!("{violations} violations over 1000 points, tightest margin {min_gap:.3e}"),
    );
}

#[test]
fn ac03_gradient_estimators_agree() {
    let start = Instant::now();
    let dists = [
        DistributionSpec::gaussian(),
        DistributionSpec::gumbel(),
        DistributionSpec::uniform01(),
        DistributionSpec::exp_power(2.0).unwrap(),
    ];
    let n_samples = 400_000;
    let mut rng = stream(0xac03);
    let mut comparisons = 0;
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let d = &dists[case % dists.len()];
        let n = 2 + (open01(&mut rng) * 4.0) as usize;
        let g: Vec<f64> = (0..n).map(|_| -1.5 * open01(&mut rng)).collect();
        let mc = grad_mc(&g, d, n_samples, &mut rng).unwrap();
        let cdf = grad_cdf_form(&g, d, n_samples, &mut rng).unwrap();
        let quad = grad_quadrature(&g, d, 1e-10).unwrap();
        let est = [
            (&mc.probabilities, &mc.std_errors),
            (&cdf.probabilities, &cdf.std_errors),
            (&quad, &vec![0.0; n]),
        ];
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for i in 0..n {
                let diff = (est[a].0[i] - est[b].0[i]).abs();
                let tol = 3.0 * est[a].1[i].hypot(est[b].1[i]) + 1e-3;
                worst = worst.max(diff / tol);
                comparisons += 1;
                if diff > tol {
                    violations.push((case, d.name(), a, b, i, diff, tol));
                }
            }
        }
    }
    gate(
        3,
        "mc / cdf-form / quadrature gradients agree",
        120,
        start,
        violations.is_empty(),
        format!(
            "{} of {comparisons} comparisons outside 3 sigma + 1e-3, worst |diff|/tol = {worst:.3}{}",
            violations.len(),
            violations.first().map(|v| format!(", first {v:?}")).unwrap_or_default()
        ),
    );
}

#[test]
fn ac04_divergence_certificate() {
    let start = Instant::now();
    let (alpha, c, horizon) = (0.5, 4.0, 10_000);
    let mut rng = stream(0xac04);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for n in [2usize, 5, 10] {
        let q = (2.0 * (n as f64).ln()).sqrt();
        let eta = eta_master(c, alpha, n, horizon, q).unwrap().eta;
        let d = DistributionSpec::gaussian().scale(eta).unwrap();
        let bound = eta.powf(alpha - 1.0) * (2.0 * c / (1.0 - alpha)) * n as f64;
        for _ in 0..200 {
            // leaders spread over a few perturbation scales, some far behind
            let spread = 4.0 * eta * open01(&mut rng);
            let lhat: Vec<f64> = (0..n).map(|_| -spread * open01(&mut rng)).collect();
            let g: Vec<f64> = (0..n).map(|_| -open01(&mut rng)).collect();
            let e = divergence_penalty_mc(&lhat, &g, &d, 10_000, &mut rng).unwrap();
            worst = worst.max(e.value / bound);
            if e.value > bound + 3.0 * e.std_error {
                violations += 1;
            }
        }
    }
    gate(
        4,
        "per-round divergence <= eta^(alpha-1) 2C/(1-alpha) N",
        300,
        start,
        violations == 0,
        format!("{violations} of 600 states above bound + 3 sigma, max divergence/bound = {worst:.3e}"),
    );
}

#[test]
fn ac05_uniform_perturbation_certificate() {
    let start = Instant::now();
    let (n, t) = (2usize, 100_000u64);
    let bound = 3.0 * ((n as u64 * t) as f64).powf(2.0 / 3.0);
    let mut details = Vec::new();
    let mut pass = true;
    for adversary in [json!({"type": "constant_gap", "gap": 1.0}), json!({"type": "switching", "period": t / 10})] {
        let cfg = config(json!({
            "algorithm": "gbpa_exact",
            "distribution": {"kind": "uniform01"},
            "adversary": adversary,
            "N": n, "T": t,
            "eta_rule": {"rule": "uniform"},
            "n_seeds": 20
        }));
        let r = run("uniform", &cfg, false);
        let rep = r.report.unwrap();
        pass &= rep.mean_regret <= bound;
        details.push(format!("{} mean {:.1} +/- {:.1}", cfg.adversary.name(), rep.mean_regret, rep.std_error));
    }
    gate(
        5,
        "uniform perturbation regret <= 3 (NT)^(2/3)",
        600,
        start,
        pass,
        format!("{} vs bound {bound:.1}", details.join(", ")),
    );
}

#[test]
fn ac06_gaussian_regret_exponent() {
    let start = Instant::now();
    let mut points = Vec::new();
    for t in [1_000u64, 3_000, 10_000, 30_000, 100_000] {
        let cfg = config(json!({
            "algorithm": "ftpl_gr",
            "distribution": {"kind": "gaussian"},
            "adversary": {"type": "constant_gap", "gap": 1.0},
            "N": 10, "T": t,
            "eta_rule": {"rule": "gaussian"},
            "n_seeds": 20
        }));
        let rep = run("gaussian", &cfg, false).report.unwrap();
        points.push((t as f64, rep.mean_regret));
    }
    let fit = fit_regret_exponent(&points).unwrap();
    let table: Vec<String> = points.iter().map(|(t, r)| format!("{t:.0}:{r:.1}")).collect();
    gate(
        6,
        "gaussian FTPL log-log regret slope <= 0.65",
        1800,
        start,
        fit.slope <= 0.65,
        format!(
            "slope {:.3} (95% CI {:.3}..{:.3}), mean regret by T {}",
            fit.slope,
            fit.ci_low,
            fit.ci_high,
            table.join(" ")
        ),
    );
}

/// Repeats one exact step from a fixed state and checks, per arm, that
/// `p_i lhat_i` averages to `p_i g_i` and `lhat_i` averages to at least `g_i`.
fn estimator_contracts(d: &DistributionSpec, lhat: &[f64], g: &[f64], reps: usize, seed: u64) -> (usize, usize, String) {
    let n = lhat.len();
    let method = GradientMethod::default();
    let p = grad_quadrature(lhat, d, 1e-10).unwrap();
    let mut rng = stream(seed);
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..reps {
        let state = BanditState::from_estimate(lhat.to_vec(), 0).unwrap();
        let (log, _) = gbpa_step_exact(state, g, d, &method, &mut rng).unwrap();
        sum[log.arm] += log.estimator_value;
        sum_sq[log.arm] += log.estimator_value * log.estimator_value;
    }
    let m = reps as f64;
    let (mut unbiased_fail, mut over_fail) = (0, 0);
    let mut parts = Vec::new();
    for i in 0..n {
        let mean = sum[i] / m;
        let se = ((sum_sq[i] / m - mean * mean).max(0.0) / m).sqrt();
        if (p[i] * mean - p[i] * g[i]).abs() > 3.0 * p[i] * se + 1e-12 {
            unbiased_fail += 1;
        }
        if mean < g[i] - 3.0 * se - 1e-12 {
            over_fail += 1;
        }
        parts.push(format!("p={:.3} E={mean:.4} g={:.3}", p[i], g[i]));
    }
    (unbiased_fail, over_fail, parts.join("; "))
}

#[test]
fn ac07_estimator_contracts() {
    let start = Instant::now();
    let g = [-0.7, -0.2, -0.9];
    // the third arm trails by more than the support width, so p = 0 there
    let (u1, o1, s1) = estimator_contracts(&DistributionSpec::uniform01(), &[0.0, -0.4, -1.5], &g, 100_000, 0xac07);
    let (u2, o2, s2) = estimator_contracts(&DistributionSpec::gaussian(), &[0.0, -1.0, -2.0], &g, 100_000, 0xac17);
    gate(
        7,
        "estimates unbiased on the support and overestimate off it",
        120,
        start,
        u1 + o1 + u2 + o2 == 0,
        format!("uniform01 [{s1}] fails {u1}/{o1}; gaussian [{s2}] fails {u2}/{o2}"),
    );
}

#[test]
fn ac08_geometric_resampling_bias() {
    let start = Instant::now();
    let d = DistributionSpec::gumbel();
    let reps = 200_000;
    let mut rng = stream(0xac08);
    let mut violations = 0;
    let mut rows = Vec::new();
    for p in [0.1f64, 0.3, 0.5] {
        // Gumbel argmax is a softmax, so arm 0 leads with probability p
        let state = BanditState::from_estimate(vec![(p / (1.0 - p)).ln(), 0.0], 0).unwrap();
        for cap in [5u64, 10, 50] {
            let cfg = GRConfig::new(cap).unwrap();
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..reps {
                let k = geometric_resampling(&state, &d, 0, cfg, &mut rng).k as f64;
                s += k;
                s2 += k * k;
            }
            let mean = s / reps as f64;
            let se = ((s2 / reps as f64 - mean * mean) / reps as f64).sqrt();
            let bias = 1.0 / p - mean;
            let expected = (1.0 - p).powi(cap as i32) / p;
            if (bias - expected).abs() > 3.0 * se {
                violations += 1;
            }
            rows.push(format!("p={p} M={cap}: {bias:.4} vs {expected:.4}"));
        }
    }
    let (n, t, cap) = (10usize, 1_000u64, 50u64);
    let cfg = config(json!({
        "algorithm": "ftpl_gr",
        "distribution": {"kind": "gaussian"},
        "adversary": {"type": "constant_gap", "gap": 0.5},
        "N": n, "T": t,
        "eta_rule": {"rule": "gaussian"},
        "gr_cap": cap,
        "n_seeds": 2
    }));
    let budget = n as f64 * t as f64 / (E * cap as f64);
    let recorded = run("gr", &cfg, false).report.unwrap().certificates.gr_bias_budget;
    let exact = recorded == Some(budget) && cfg.gr_bias_budget() == Some(budget);
    gate(
        8,
        "geometric resampling bias (1-p)^M/p and budget NT/(eM)",
        60,
        start,
        violations == 0 && exact,
        format!(
            "{violations} of 9 outside 3 sigma [{}]; budget recorded {recorded:?} vs {budget}",
            rows.join(", ")
        ),
    );
}

#[test]
fn ac09_exp_power_assumptions() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut onsets = Vec::new();
    for beta in [1.5, 2.0, 3.0] {
        let min_m0 = linspace(0.0, 10.0, 1001)
            .map(|z| m_delta_beta_scaled(0.0, beta, z).unwrap())
            .fold(f64::INFINITY, f64::min);
        if !(min_m0 > 0.0) {
            failures.push(format!("m_0 beta={beta} min {min_m0:.3e}"));
        }
        for delta in [0.2, 0.5, 0.8] {
            let m = |z: f64| m_delta_beta_scaled(delta, beta, z).unwrap();
            let verdict = eventual_monotonicity_check(m, (0.0, 10.0), 1001).unwrap();
            let onset = eventual_nonpositive_onset(m, (0.0, 10.0), 1001).unwrap();
            let ok = matches!(verdict.direction, Direction::Decreasing | Direction::Constant) && onset.is_some();
            if !ok {
                failures.push(format!("m_delta beta={beta} delta={delta}: {:?} onset {onset:?}", verdict.direction));
            }
            onsets.push(format!("{beta}/{delta}:{:.2}", onset.unwrap_or(f64::NAN)));
        }
    }
    gate(
        9,
        "exp-power m_0 > 0 and m_delta eventually <= 0",
        60,
        start,
        failures.is_empty(),
        format!("failures {failures:?}; nonpositive from z (beta/delta:z) {}", onsets.join(" ")),
    );
}

#[test]
fn ac10_penalty_decomposition() {
    let start = Instant::now();
    let n = 5usize;
    let cfg = config(json!({
        "algorithm": "gbpa_exact",
        "distribution": {"kind": "gaussian"},
        "adversary": {"type": "stochastic", "means": [0.3, 0.5, 0.5, 0.5, 0.5]},
        "N": n, "T": 1000,
        "eta_rule": {"rule": "gaussian"},
        "n_seeds": 50
    }));
    let rep = run("decompose", &cfg, true).report.unwrap();
    let pen = rep.penalties.unwrap();
    let eta = rep.certificates.eta.unwrap();
    let tol = 3.0 * rep.std_error.hypot(pen.total.std_error);
    let upper = rep.mean_regret <= pen.total.value + tol;
    let over_cap = (2.0 * (n as f64).ln()).sqrt() * eta;
    let over_ok = pen.overestimation.value <= over_cap + 3.0 * pen.overestimation.std_error;
    let finite = [pen.overestimation, pen.underestimation, pen.divergence_sum]
        .iter()
        .all(|e| e.value.is_finite() && e.std_error.is_finite());
    gate(
        10,
        "mean regret <= over + under + divergence; over <= sqrt(2 ln N) eta",
        900,
        start,
        upper && over_ok && finite,
        format!(
            "regret {:.2} +/- {:.2} vs over {:.2} + under {:.2} + div {:.3} = {:.2} (tol {tol:.2}); over cap {over_cap:.2}",
            rep.mean_regret,
            rep.std_error,
            pen.overestimation.value,
            pen.underestimation.value,
            pen.divergence_sum.value,
            pen.total.value
        ),
    );
}

#[test]
fn ac11_exp3_baseline() {
    let start = Instant::now();
    let (n, t) = (10usize, 10_000u64);
    let base = json!({
        "distribution": {"kind": "gaussian"},
        "adversary": {"type": "constant_gap", "gap": 0.5},
        "N": n, "T": t,
        "eta_rule": {"rule": "gaussian"},
        "n_seeds": 20
    });
    let with = |alg: &str| {
        let mut v = base.clone();
        v["algorithm"] = json!(alg);
        config(v)
    };
    let exp3 = run("exp3", &with("exp3"), false).report.unwrap();
    let ftpl = run("ftpl", &with("ftpl_gr"), false).report.unwrap();
    let exp3_cap = 4.0 * (n as f64 * t as f64 * (n as f64).ln()).sqrt();
    let ratio = ftpl.mean_regret / exp3.mean_regret;
    gate(
        11,
        "EXP3 <= 4 sqrt(NT ln N); gaussian FTPL within 2x of EXP3",
        600,
        start,
        exp3.mean_regret <= exp3_cap && ratio <= 2.0,
        format!(
            "EXP3 {:.1} +/- {:.1} (cap {exp3_cap:.1}); FTPL {:.1} +/- {:.1} at eta {:.1}; ratio {ratio:.2}",
            exp3.mean_regret,
            exp3.std_error,
            ftpl.mean_regret,
            ftpl.std_error,
            ftpl.certificates.eta.unwrap()
        ),
    );
}
