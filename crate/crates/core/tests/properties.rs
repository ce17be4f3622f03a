use proptest::prelude::*;

use rwre_core::limitlaws::{stable_cdf, StableParams};
use rwre_core::rng::replica_rng;
use rwre_core::spectral::lambda;
use rwre_core::stats::ks_two_sample;
use rwre_core::tails::{hill_estimator, sample_r};
use rwre_core::walksim::annealed_walk_records;
use rwre_core::{minorization_split, reverse_kernel, speed, stationary_distribution, EnvironmentSpec};

/// Positive stochastic matrix with 2 to 4 states and omega in (0.2, 0.8).
fn spec_strategy() -> impl Strategy<Value = EnvironmentSpec> {
    (2usize..=4)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(prop::collection::vec(0.05f64..1.0, k), k),
                prop::collection::vec(0.2f64..0.8, k),
            )
        })
        .prop_map(|(weights, omega)| {
            let rows: Vec<Vec<f64>> = weights
                .iter()
                .map(|w| {
                    let s: f64 = w.iter().sum();
                    w.iter().map(|x| x / s).collect()
                })
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            EnvironmentSpec::from_rows(&refs, &omega, 0.1).expect("valid spec")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_invariant(spec in spec_strategy()) {
        let h = spec.transition();
        let pi = stationary_distribution(h).unwrap();
        let k = spec.len();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for y in 0..k {
            let next: f64 = (0..k).map(|x| pi[x] * h[(x, y)]).sum();
            prop_assert!((next - pi[y]).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_kernel_is_stochastic_and_balanced(spec in spec_strategy()) {
        let h = spec.transition();
        let pi = stationary_distribution(h).unwrap();
        let rev = reverse_kernel(&spec).unwrap();
        let k = spec.len();
        for x in 0..k {
            prop_assert!((rev.row(x).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for y in 0..k {
                prop_assert!((pi[x] * rev[(x, y)] - pi[y] * h[(y, x)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minorization_reconstructs_the_power(spec in spec_strategy(), m in 1usize..4) {
        let split = minorization_split(&spec, m).unwrap();
        prop_assert!(split.r > 0.0 && split.r <= 1.0);
        prop_assert!(split.theta.iter().all(|&t| t >= 0.0));
        prop_assert!(split.reconstruction_error(spec.transition()) < 1e-12);
    }

    #[test]
    fn lambda_is_convex_and_vanishes_at_zero(
        spec in spec_strategy(),
        a in 0.0f64..4.0,
        b in 0.0f64..4.0,
    ) {
        prop_assert!(lambda(&spec, 0.0).unwrap().abs() < 1e-12);
        let mid = lambda(&spec, 0.5 * (a + b)).unwrap();
        let chord = 0.5 * (lambda(&spec, a).unwrap() + lambda(&spec, b).unwrap());
        prop_assert!(mid <= chord + 1e-10);
    }

    #[test]
    fn speed_lies_in_unit_interval(spec in spec_strategy()) {
        if let Ok(report) = speed(&spec) {
            prop_assert!(report.v_p >= 0.0 && report.v_p <= 1.0);
            if report.kappa <= 1.0 {
                prop_assert_eq!(report.v_p, 0.0);
            }
        }
    }

    #[test]
    fn r_grows_as_tolerance_tightens(spec in spec_strategy(), seed in 0u64..1000) {
        if lambda(&spec, 1.0).unwrap() < 0.0 || spec.rho().iter().all(|&r| r < 1.0) {
            let loose = sample_r(&spec, &mut replica_rng(seed, 0), 1e-6);
            let tight = sample_r(&spec, &mut replica_rng(seed, 0), 1e-12);
            if let (Ok(l), Ok(t)) = (loose, tight) {
                prop_assert!(l >= 1.0);
                prop_assert!(t >= l);
            }
        }
    }

    #[test]
    fn walk_identity_on_random_specs(spec in spec_strategy(), seed in 0u64..1000) {
        if let Ok(records) = annealed_walk_records(&spec, 20, 8, seed, 1_000_000) {
            for r in records.iter().filter(|r| !r.censored) {
                prop_assert!(r.identity_holds());
            }
        }
    }
}

proptest! {
    #[test]
    fn stable_cdf_is_monotone(
        kappa in prop::sample::select(vec![0.5, 0.8, 1.0, 1.3, 1.7, 2.0]),
        b in 0.3f64..3.0,
        x in -6.0f64..6.0,
        dx in 0.01f64..2.0,
    ) {
        let p = StableParams::new(kappa, b).unwrap();
        let lo = stable_cdf(p, x).unwrap();
        let hi = stable_cdf(p, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-8);
    }

    #[test]
    fn stable_cdf_scaling_identity(
        kappa in prop::sample::select(vec![0.5, 0.8, 1.3, 1.7, 2.0]),
        b in 0.3f64..3.0,
        s in 0.5f64..3.0,
        x in -4.0f64..4.0,
    ) {
        let a = stable_cdf(StableParams::new(kappa, b).unwrap(), x).unwrap();
        let c = stable_cdf(StableParams::new(kappa, s.powf(kappa) * b).unwrap(), s * x).unwrap();
        prop_assert!((a - c).abs() < 1e-8);
    }

    #[test]
    fn hill_is_scale_invariant(seed in 0u64..1000, scale in 0.01f64..100.0) {
        use rand::Rng;
        let mut rng = replica_rng(seed, 0);
        let xs: Vec<f64> = (0..2000).map(|_| (1.0 - rng.random::<f64>()).powf(-0.5)).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| x * scale).collect();
        let a = hill_estimator(&xs, 0.1).unwrap().index;
        let b = hill_estimator(&scaled, 0.1).unwrap().index;
        prop_assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn ks_two_sample_is_symmetric(
        a in prop::collection::vec(-10.0f64..10.0, 1..50),
        b in prop::collection::vec(-10.0f64..10.0, 1..50),
    ) {
        let ab = ks_two_sample(&a, &b);
        let ba = ks_two_sample(&b, &a);
        prop_assert!((ab.statistic - ba.statistic).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
    }
}
