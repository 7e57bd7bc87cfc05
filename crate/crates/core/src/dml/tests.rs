use super::*;
use crate::density::default_grid;
use crate::kernel_mte::{estimate_kernel_mte, kernel_variance_components, KernelMteConfig};
use crate::nuisance::KernelNwHyper;
use crate::simulation::{generate, true_delta, DgpSpec};

fn duplicated(base: &Sample<f64>) -> Sample<f64> {
    let n = base.len();
    let y = [base.y(), base.y()].concat();
    let x = [base.x(), base.x()].concat();
    let treated = (0..2 * n).map(|i| i < n).collect();
    Sample::new(y, treated, x, base.dim()).unwrap()
}

fn mirrored_partition(n: usize, k: usize, seed: u64) -> FoldPartition {
    let half = make_folds(n, k, seed).unwrap();
    let assignments = [half.assignments(), half.assignments()].concat();
    FoldPartition::from_assignments(assignments, k, seed).unwrap()
}

/// Arm-average smoothed outcomes and a constant propensity, identical for
/// both arms of a duplicated sample.
fn oracle_bundle(base: &Sample<f64>, grid: &[f64], spec: KernelSpec<f64>, k: usize, pi: f64) -> NuisanceBundle<f64> {
    let y = base.y().to_vec();
    let make = |arm: Arm| {
        let y = y.clone();
        SmoothedOutcomeFit::from_fn(grid.to_vec(), arm, spec, move |_: &[f64], t, order| {
            y.iter().map(|&v| spec.scaled(t - v, order)).sum::<f64>() / y.len() as f64
        })
        .unwrap()
    };
    let fold = FoldNuisance {
        pi: PropensityFit::constant(pi, Some(0.01)).unwrap(),
        g1: make(Arm::Treated),
        g0: make(Arm::Control),
    };
    NuisanceBundle { folds: vec![fold; k] }
}

fn plain(n: usize, seed: u64) -> Sample<f64> {
    generate(&DgpSpec::lognormal_plain(), n, seed).unwrap()
}

fn quick_config() -> DmlConfig<f64> {
    DmlConfig { grid: GridSpec::Auto { points: 128 }, ..Default::default() }
}

#[test]
fn oracle_curves_agree_on_duplicated_arms() {
    let base = plain(100, 1);
    let s = duplicated(&base);
    let spec = KernelSpec::new(KernelFamily::Gaussian, 0.3).unwrap();
    let grid = default_grid(s.y(), 0.3, 64).unwrap();
    let p = mirrored_partition(100, 4, 2);
    let bundle = oracle_bundle(&base, &grid, spec, 4, 0.5);
    for order in Order::ALL {
        let c1 = dml_density_curve(&s, &p, &bundle, &spec, &grid, Arm::Treated, order).unwrap();
        let c0 = dml_density_curve(&s, &p, &bundle, &spec, &grid, Arm::Control, order).unwrap();
        for (a, b) in c1.values().iter().zip(c0.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
    let vc = dml_variance_components(&s, &p, &bundle, &spec, 0.8, 0.8).unwrap();
    assert!((vc.v1 - vc.v0).abs() < 1e-10);
    assert!((vc.m1 - vc.m0).abs() < 1e-10);
}

#[test]
fn certain_treatment_reduces_to_the_kernel_average() {
    let y = vec![0.1, 0.5, 0.9, 1.4, 2.0, 0.3, 0.7, 1.1, 1.6, 2.2];
    let s = Sample::new(y.clone(), vec![true; 10], (0..10).map(|i| i as f64).collect(), 1).unwrap();
    let spec = KernelSpec::new(KernelFamily::Gaussian, 0.4).unwrap();
    let grid = default_grid(&y, 0.4, 33).unwrap();
    let p = make_folds(10, 5, 3).unwrap();
    let g = SmoothedOutcomeFit::from_fn(grid.clone(), Arm::Treated, spec, |_: &[f64], _, _| 7.5).unwrap();
    let fold = FoldNuisance { pi: PropensityFit::constant(1.0, None).unwrap(), g1: g.clone(), g0: g };
    let bundle = NuisanceBundle { folds: vec![fold; 5] };
    let curve = dml_density_curve(&s, &p, &bundle, &spec, &grid, Arm::Treated, Order::Zero).unwrap();
    for (j, &t) in grid.iter().enumerate() {
        let plain = y.iter().map(|&v| spec.scaled(t - v, Order::Zero)).sum::<f64>() / 10.0;
        assert!((curve.values()[j] - plain).abs() < 1e-14);
    }
}

#[test]
fn grid_mismatch_is_a_configuration_error() {
    let base = plain(40, 1);
    let spec = KernelSpec::new(KernelFamily::Gaussian, 0.3).unwrap();
    let grid = default_grid(base.y(), 0.3, 16).unwrap();
    let bundle = oracle_bundle(&base, &grid, spec, 2, 0.5);
    let p = make_folds(40, 2, 0).unwrap();
    let other = default_grid(base.y(), 0.3, 17).unwrap();
    let err = dml_density_curve(&base, &p, &bundle, &spec, &other, Arm::Treated, Order::Zero).unwrap_err();
    assert!(matches!(err, MteError::Configuration(_)));
}

#[test]
fn order_zero_curve_integrates_to_one() {
    let s = plain(2000, 4);
    let est = estimate_dml_mte(&s, &DmlConfig::default()).unwrap();
    for c in [&est.treated_curve, &est.control_curve] {
        let total = c.integral();
        assert!((total - 1.0).abs() <= 0.05, "{total}");
    }
}

#[test]
fn confounded_design_recovers_the_effect() {
    let dgp = DgpSpec::lognormal_confounded();
    let s = generate(&dgp, 4000, 12).unwrap();
    let r = estimate_dml_mte(&s, &DmlConfig::default()).unwrap().result;
    let truth = true_delta(&dgp).unwrap();
    assert!((r.delta - truth).abs() < 0.2, "{} vs {truth}", r.delta);
    assert_eq!(r.folds, Some(5));
    assert_eq!(r.method, Method::Dml);
}

#[test]
fn duplicated_arms_with_mirrored_folds_have_zero_effect() {
    let base = plain(150, 8);
    let s = duplicated(&base);
    let p = mirrored_partition(150, 5, 1);
    let r = estimate_dml_with_partition(&s, &p, &quick_config()).unwrap().result;
    assert!(r.delta.abs() < 1e-10, "{}", r.delta);
    assert!((r.v1_hat - r.v0_hat).abs() < 1e-10);
}

#[test]
fn estimates_are_deterministic() {
    let s = plain(400, 3);
    let a = estimate_dml_mte(&s, &quick_config()).unwrap().result;
    let b = estimate_dml_mte(&s, &quick_config()).unwrap().result;
    assert_eq!(a, b);
}

#[test]
fn fold_labels_do_not_matter() {
    let s = plain(300, 5);
    let p = make_folds(300, 4, 11).unwrap();
    let q = p.relabeled(&[3, 1, 0, 2]).unwrap();
    let a = estimate_dml_with_partition(&s, &p, &quick_config()).unwrap().result;
    let b = estimate_dml_with_partition(&s, &q, &quick_config()).unwrap().result;
    assert_eq!(a, b);
}

#[test]
fn fold_count_is_validated() {
    let s = plain(50, 1);
    for folds in [0, 1, 51] {
        let err = estimate_dml_mte(&s, &DmlConfig { folds, ..quick_config() }).unwrap_err();
        assert!(matches!(err, MteError::InvalidArgument(_)));
    }
}

#[test]
fn lone_treated_observation_cannot_be_cross_fitted() {
    let mut treated = vec![false; 20];
    treated[3] = true;
    let s = Sample::new((0..20).map(|i| i as f64 * 0.1).collect(), treated, (0..20).map(|i| i as f64).collect(), 1)
        .unwrap();
    let err = estimate_dml_mte(&s, &quick_config()).unwrap_err();
    assert_eq!(err, MteError::Stratification { attempts: MAX_FOLD_RESEEDS + 1 });
}

#[test]
fn first_order_curve_matches_finite_differences() {
    let s = plain(600, 6);
    let h = 0.3;
    let spec = KernelSpec::new(KernelFamily::Gaussian, h).unwrap();
    let grid = default_grid(s.y(), h, 2001).unwrap();
    let p = make_folds(600, 3, 0).unwrap();
    let bundle = fit_nuisances(&s, &p, &grid, &spec, &DmlConfig::default()).unwrap();
    for arm in Arm::BOTH {
        let f0 = dml_density_curve(&s, &p, &bundle, &spec, &grid, arm, Order::Zero).unwrap();
        let f1 = dml_density_curve(&s, &p, &bundle, &spec, &grid, arm, Order::First).unwrap();
        let scale = f1.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for j in 1..grid.len() - 1 {
            let fd = (f0.values()[j + 1] - f0.values()[j - 1]) / (grid[j + 1] - grid[j - 1]);
            assert!((fd - f1.values()[j]).abs() <= 5e-3 * scale);
        }
    }
}

#[test]
fn curvature_is_negative_at_the_mode() {
    let negatives = (0..20)
        .filter(|&seed| {
            let r = estimate_dml_mte(&plain(2000, 100 + seed), &DmlConfig { seed, ..quick_config() }).unwrap().result;
            r.m1_hat < 0.0
        })
        .count();
    assert!(negatives >= 19);
}

#[test]
fn arm_swap_mirrors_the_estimate() {
    // The logistic fit on flipped labels matches 1 - π only to solver
    // precision, so the mirror holds to a tolerance.
    let s = plain(500, 2);
    let a = estimate_dml_mte(&s, &quick_config()).unwrap().result;
    let b = estimate_dml_mte(&s.with_flipped_treatment(), &quick_config()).unwrap().result;
    assert!((a.theta1 - b.theta0).abs() < 1e-6);
    assert!((a.theta0 - b.theta1).abs() < 1e-6);
    assert!((a.se1 - b.se0).abs() < 1e-6 * a.se1);
    assert!((a.delta + b.delta).abs() < 1e-6);
}

#[test]
fn variance_components_agree_with_the_kernel_plug_in() {
    let s = plain(2000, 21);
    let kernel = estimate_kernel_mte(&s, &KernelMteConfig::default()).unwrap().result;
    let h = kernel.h;
    let spec = KernelSpec::new(KernelFamily::Gaussian, h).unwrap();
    let (std_sample, _) = crate::sample::standardize_covariates(&s).unwrap();
    let plug_in = kernel_variance_components(&std_sample, &spec, kernel.theta1, kernel.theta0, None, 0.01).unwrap();
    let config = DmlConfig {
        bandwidth: Bandwidth::Fixed(h),
        propensity: PropensityLearner::KernelNw(KernelNwHyper::default()),
        ..DmlConfig::default()
    };
    let grid = default_grid(s.y(), h, 512).unwrap();
    let p = make_folds(2000, 5, 0).unwrap();
    let bundle = fit_nuisances(&s, &p, &grid, &spec, &config).unwrap();
    let dml = dml_variance_components(&s, &p, &bundle, &spec, kernel.theta1, kernel.theta0).unwrap();
    for (a, b) in [(plug_in.m1, dml.m1), (plug_in.m0, dml.m0), (plug_in.v1, dml.v1), (plug_in.v0, dml.v0)] {
        assert!((a - b).abs() <= 0.15 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn orthogonality_shift_vanishes_at_zero_and_for_g_only_directions() {
    let dgp = DgpSpec::normal_selection();
    let s = generate(&dgp, 20_000, 77).unwrap();
    let spec = KernelSpec::new(KernelFamily::Gaussian, 0.5).unwrap();
    let pi = |x: &[f64]| dgp.propensity(x);
    let g = |x: &[f64], y: f64, o: Order| dgp.smoothed_outcome(Arm::Treated, x, y, &spec, o).unwrap();
    let truth = OracleNuisance { pi: &pi, g: &g };
    let zero_pi = |_: &[f64]| 0.0;
    let bump = |x: &[f64], _: f64, _: Order| 1.0 + x[0];
    let direction = OracleNuisance { pi: &zero_pi, g: &bump };
    let probe =
        OrthogonalityProbe { y: 1.5, arm: Arm::Treated, spec, order: Order::First, form: ScoreForm::Orthogonal };
    let eps = [0.0, 0.05, 0.1, 0.2, 0.4];
    let table = orthogonality_check(&s, &truth, &direction, &eps, &probe).unwrap();
    assert_eq!(table[0].shift, 0.0);
    // The g-only shift is ε · mean((D - π)/π · b); compare with its
    // standard error.
    let terms: Vec<f64> = (0..s.len())
        .map(|i| {
            let x = s.row(i);
            let d = if s.treated()[i] { 1.0 } else { 0.0 };
            (d - pi(x)) / pi(x) * bump(x, 0.0, Order::First)
        })
        .collect();
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let sd = (terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    for point in &table[1..] {
        assert!(point.shift <= 3.0 * point.epsilon * sd / n.sqrt());
    }
}
