use banditlab_core::distributions::DistributionSpec;
use banditlab_core::hazard::{generalized_hazard, hazard_rate, log_survival, sup_generalized_hazard};
use proptest::prelude::*;

#[test]
fn heavy_tailed_sup_is_grid_stable() {
    for shape in [1.5, 2.0, 4.0] {
        let d = DistributionSpec::pareto(shape).unwrap();
        let near = sup_generalized_hazard(&d, 0.0, (0.0, 1e2), 20_001).unwrap();
        let far = sup_generalized_hazard(&d, 0.0, (0.0, 1e4), 20_001).unwrap();
        assert!(near.sup_estimate.is_finite());
        let ratio = near.sup_estimate / far.sup_estimate;
        assert!((ratio - 1.0).abs() <= 0.05, "shape {shape}: {ratio}");
    }
}

#[test]
fn light_tailed_generalized_sup_is_grid_stable() {
    let dists = [
        DistributionSpec::gaussian(),
        DistributionSpec::exp_power(1.5).unwrap(),
        DistributionSpec::exp_power(2.0).unwrap(),
        DistributionSpec::exp_power(3.0).unwrap(),
    ];
    for d in &dists {
        for alpha in [0.3, 0.6, 0.9] {
            let near = sup_generalized_hazard(d, alpha, (-10.0, 10.0), 4001).unwrap();
            let far = sup_generalized_hazard(d, alpha, (-20.0, 40.0), 12_001).unwrap();
            assert!(!near.inconclusive, "{d} alpha {alpha}");
            let ratio = near.sup_estimate / far.sup_estimate;
            assert!((ratio - 1.0).abs() <= 0.05, "{d} alpha {alpha}: {ratio}");
        }
    }
}

#[test]
fn cumulative_hazard_derivative_is_hazard() {
    let h = 1e-5;
    for d in [
        DistributionSpec::gaussian(),
        DistributionSpec::gumbel(),
        DistributionSpec::weibull(1.7).unwrap(),
        DistributionSpec::exp_power(2.5).unwrap(),
        DistributionSpec::pareto(3.0).unwrap(),
    ] {
        let s = d.support();
        let lo = s.lower.max(-5.0) + 0.01;
        let mut worst = 0.0f64;
        for k in 0..=400 {
            let z = lo + (6.0 - lo) * k as f64 / 400.0;
            let fd = (log_survival(&d, z + h).unwrap() - log_survival(&d, z - h).unwrap()) / (2.0 * h);
            worst = worst.max((fd - hazard_rate(&d, z).unwrap()).abs());
        }
        assert!(worst <= 1e-4, "{d}: {worst:e}");
    }
}

fn any_dist() -> impl Strategy<Value = DistributionSpec> {
    (0usize..5, 1.2f64..3.5).prop_map(|(k, s)| match k {
        0 => DistributionSpec::gaussian(),
        1 => DistributionSpec::gumbel(),
        2 => DistributionSpec::weibull(s).unwrap(),
        3 => DistributionSpec::exp_power(s).unwrap(),
        _ => DistributionSpec::exponential(s).unwrap(),
    })
}

proptest! {
    #[test]
    fn alpha_zero_is_the_hazard_rate(d in any_dist(), z in 0.01f64..8.0) {
        let a = generalized_hazard(&d, z, 0.0).unwrap();
        let b = hazard_rate(&d, z).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn gaussian_generalized_hazard_bound(z in -30.0f64..30.0, alpha in 0.01f64..0.99) {
        let h = generalized_hazard(&DistributionSpec::gaussian(), z, alpha).unwrap();
        prop_assert!((0.0..=2.0 / alpha).contains(&h));
    }
}
