use mte_core::kernel_mte::GridSpec;
use mte_core::simulation::{generate, true_mode, DgpSpec};
use mte_core::{estimate_dml_mte, estimate_kernel_mte, Arm, DmlConfig, KernelMteConfig, Method, MteResult64};
use statrs::distribution::{ContinuousCDF, Normal};

fn coarse_kernel<T: mte_core::Real>() -> KernelMteConfig<T> {
    KernelMteConfig { grid: GridSpec::Auto { points: 256 }, ..KernelMteConfig::default() }
}

fn check_intervals(r: &MteResult64) {
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - r.alpha / 2.0);
    for (theta, se, ci) in [(r.theta1, r.se1, r.ci1), (r.theta0, r.se0, r.ci0), (r.delta, r.se_delta, r.ci_delta)] {
        assert!(se > 0.0 && se.is_finite());
        assert!((ci.0 - (theta - z * se)).abs() < 1e-12 && (ci.1 - (theta + z * se)).abs() < 1e-12);
    }
    assert!((r.se_delta - (r.se1 * r.se1 + r.se0 * r.se0).sqrt()).abs() < 1e-12);
    assert_eq!(r.delta, r.theta1 - r.theta0);
}

#[test]
fn both_estimators_run_on_every_named_design() {
    for name in DgpSpec::NAMES {
        let dgp = DgpSpec::named(name).unwrap();
        let sample = generate(&dgp, 1500, 11).unwrap();
        let k = estimate_kernel_mte(&sample, &coarse_kernel()).unwrap().result;
        let d = estimate_dml_mte(&sample, &DmlConfig { grid: GridSpec::Auto { points: 256 }, ..DmlConfig::default() })
            .unwrap()
            .result;
        assert_eq!(k.method, Method::Kernel);
        assert_eq!(d.method, Method::Dml);
        assert_eq!(d.folds, Some(5));
        check_intervals(&k);
        check_intervals(&d);
        let truth = true_mode(&dgp, Arm::Treated).unwrap() - true_mode(&dgp, Arm::Control).unwrap();
        assert!((k.delta - truth).abs() < 0.6, "{name}: kernel {} vs {truth}", k.delta);
        assert!((d.delta - truth).abs() < 0.6, "{name}: dml {} vs {truth}", d.delta);
        if dgp.dim >= 2 {
            assert!(!k.diagnostics.warnings.is_empty(), "{name}: expected a bandwidth warning");
        }
    }
}

#[test]
fn single_precision_tracks_double_precision() {
    let sample = generate(&DgpSpec::lognormal_plain(), 1000, 5).unwrap();
    let a = estimate_kernel_mte(&sample, &coarse_kernel::<f64>()).unwrap().result;
    let b = estimate_kernel_mte(&sample.cast::<f32>(), &coarse_kernel::<f32>()).unwrap().result;
    assert!((a.theta1 - f64::from(b.theta1)).abs() < 1e-3);
    assert!((a.theta0 - f64::from(b.theta0)).abs() < 1e-3);
    assert!((a.se_delta - f64::from(b.se_delta)).abs() < 1e-3 * a.se_delta.max(1.0));
}

#[test]
fn results_round_trip_through_json() {
    let sample = generate(&DgpSpec::normal_selection(), 800, 2).unwrap();
    let r = estimate_dml_mte(&sample, &DmlConfig { grid: GridSpec::Auto { points: 128 }, ..DmlConfig::default() })
        .unwrap()
        .result;
    let text = serde_json::to_string(&r).unwrap();
    let back: MteResult64 = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn seeds_change_dml_folds_but_not_kernel_results() {
    let sample = generate(&DgpSpec::lognormal_confounded(), 800, 3).unwrap();
    let base = DmlConfig { grid: GridSpec::Auto { points: 128 }, ..DmlConfig::default() };
    let a = estimate_dml_mte(&sample, &DmlConfig { seed: 1, ..base.clone() }).unwrap().result;
    let b = estimate_dml_mte(&sample, &DmlConfig { seed: 2, ..base }).unwrap().result;
    assert_ne!(a.v1_hat, b.v1_hat);
    let k1 = estimate_kernel_mte(&sample, &coarse_kernel()).unwrap().result;
    let k2 = estimate_kernel_mte(&sample, &coarse_kernel()).unwrap().result;
    assert_eq!(k1, k2);
}
