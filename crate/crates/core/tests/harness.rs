//! Plumbing and small-scale behaviour of the cross-model studies.

use proptest::prelude::*;
use surfflow::hierarchy_harness::{
    compare_densities, run_coupling_regime_study, run_diffusion_limit_study, run_homogenization_study,
    successive_orders, ConvergenceReport, CouplingScenario, DiffusionLimitScenario, HomogenizationScenario,
};
use surfflow::kinetic_solvers::CouplingRegime;
use surfflow::Error;

#[test]
fn identical_profiles_have_zero_distance() {
    let a = vec![0.3, 1.2, -0.4, 2.0];
    assert_eq!(compare_densities(&a, &a, 0.25).unwrap(), (0.0, 0.0));
}

#[test]
fn unit_offset_on_unit_interval() {
    let a: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
    let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
    let (l1, linf) = compare_densities(&a, &b, 0.1).unwrap();
    assert!((l1 - 1.0).abs() < 1e-14);
    assert!((linf - 1.0).abs() < 1e-15);
}

#[test]
fn mismatched_profiles_are_rejected() {
    assert!(matches!(compare_densities(&[1.0, 2.0], &[1.0], 0.5), Err(Error::GridMismatch(_))));
}

#[test]
fn orders_follow_the_log_ratio() {
    let p = [0.1, 0.05, 0.025];
    let e = [4e-2, 1e-2, 2.5e-3];
    let o = successive_orders(&p, &e);
    assert_eq!(o.len(), 2);
    assert!(o.iter().all(|x| (x - 2.0).abs() < 1e-12));
    let r = ConvergenceReport::new("epsilon", p.to_vec(), e.to_vec(), e.to_vec(), vec![0.0; 3], Some(0.8));
    assert!(r.monotone && r.passed);
    assert!((r.order.unwrap() - 2.0).abs() < 1e-12);
    let flat = ConvergenceReport::new("epsilon", p.to_vec(), vec![1e-3, 2e-3, 1e-4], vec![0.0; 3], vec![], Some(0.8));
    assert!(!flat.monotone && !flat.passed);
    let zero = ConvergenceReport::new("epsilon", p.to_vec(), vec![0.0; 3], vec![0.0; 3], vec![], None);
    assert!(zero.order.is_none());
    let csv = r.to_csv();
    assert!(csv.starts_with("epsilon,L1,Linf,order\n"));
    assert_eq!(csv.lines().count(), 4);
}

fn small_diffusion() -> DiffusionLimitScenario {
    DiffusionLimitScenario {
        nx: 16,
        nv: 8,
        ne: 8,
        t_final: 0.05,
        ..DiffusionLimitScenario::default()
    }
}

#[test]
fn constant_density_stays_at_the_floor() {
    let sc = DiffusionLimitScenario {
        amplitude: 0.0,
        ..small_diffusion()
    };
    let r = run_diffusion_limit_study(&[0.1, 0.05, 0.025], &sc).unwrap();
    assert!(r.l1.iter().all(|e| *e < 1e-13), "{:?}", r.l1);
    assert!(r.linf.iter().all(|e| *e < 1e-13));
}

#[test]
fn diffusion_study_needs_three_points() {
    assert!(run_diffusion_limit_study(&[0.1, 0.05], &small_diffusion()).is_err());
}

#[test]
fn small_diffusion_study_improves_with_epsilon() {
    let r = run_diffusion_limit_study(&[0.2, 0.1, 0.05], &small_diffusion()).unwrap();
    assert!(r.monotone, "{}", r.summary());
    assert!(r.l1.iter().all(|e| *e > 0.0));
}

#[test]
fn flat_tangential_potential_has_no_homogenization_error() {
    let sc = HomogenizationScenario {
        u_m: 0.0,
        length: 0.16,
        t_final: 0.02,
        nex: 8,
        ne: 6,
        ..HomogenizationScenario::default()
    };
    // With U = 0 every cell is free and B_i = S_i / 2 exactly, so the two models coincide.
    let r = run_homogenization_study(&[0.04, 0.02, 0.01], &sc);
    match r {
        Ok(r) => assert!(r.l1.iter().all(|e| *e < 1e-12), "{:?}", r.l1),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn coupling_sum_matches_single_layer_in_every_regime() {
    let sc = CouplingScenario {
        ne: 12,
        nv: 8,
        t_final: 0.05,
        ..CouplingScenario::default()
    };
    let regimes = [CouplingRegime::Strong, CouplingRegime::Moderate, CouplingRegime::Weak];
    let diags = run_coupling_regime_study(&regimes, &sc).unwrap();
    assert_eq!(diags.len(), 3);
    for d in &diags {
        assert!(d.sum_error <= 1e-12, "{:?}: {}", d.regime, d.sum_error);
        assert!(d.final_gap() < d.gaps[0], "{:?}", d.regime);
        assert!(d.to_csv().starts_with("t,gap,predicted\n"));
    }
    assert!(run_coupling_regime_study(&regimes, &CouplingScenario { n2: 1.5, ..sc }).is_err());
}

#[test]
fn weak_gap_decays_at_the_exchange_rate() {
    // The exchange term as written removes free molecules at (c / 2) per layer, so the gap
    // relaxes at rate c; a shallow well makes the rate large enough to measure.
    let sc = CouplingScenario {
        w_m: 1.0,
        ne: 32,
        nv: 8,
        ..CouplingScenario::default()
    };
    let d = &run_coupling_regime_study(&[CouplingRegime::Weak], &sc).unwrap()[0];
    assert!((d.measured_rate / d.c - 1.0).abs() < 0.05, "rate {} vs c {}", d.measured_rate, d.c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn comparison_is_symmetric(
        a in prop::collection::vec(-5.0..5.0_f64, 1..40),
        shift in -2.0..2.0_f64,
        dx in 0.01..1.0_f64,
    ) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift * (i as f64).cos()).collect();
        let x = compare_densities(&a, &b, dx).unwrap();
        let y = compare_densities(&b, &a, dx).unwrap();
        prop_assert_eq!(x, y);
        prop_assert!(x.0 >= 0.0 && x.1 >= 0.0);
        prop_assert!(x.0 <= x.1 * dx * a.len() as f64 * (1.0 + 1e-12));
    }
}
