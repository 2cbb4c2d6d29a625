//! Fixed points, conservation and independent-path checks of the relaxation operators.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use surfflow::equilibrium_collision::{
    build_gamma_table, kernel_khat_eval, kernel_khat_row_integral, maxwellian, qph_apply, slice_mass,
    theta_apply, velocity_weights, Axis, EnergyGrid, ThetaBarOperator, ThetaOperator,
};
use surfflow::potential_geometry::{trap_length_l, NormalPotential, QuadratureSpec, TangentialPotential};

fn wall() -> NormalPotential {
    NormalPotential::inverse_square_wall(4.0, 0.5).unwrap()
}

fn wall_setup(nv: usize, ne: usize) -> (NormalPotential, EnergyGrid, ThetaOperator) {
    let w = wall();
    let grid = EnergyGrid::aligned(nv, 6.0, ne, 6.0, w.separatrix()).unwrap();
    let theta = ThetaOperator::new(&w, &grid.ez, &QuadratureSpec::default()).unwrap();
    (w, grid, theta)
}

fn l_m(grid: &EnergyGrid, theta: &ThetaOperator, beta: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(grid.nv() * grid.ne());
    for v in grid.x_axis.centers() {
        for (k, e) in grid.ez.centers().iter().enumerate() {
            g.push(beta * theta.l()[k] * maxwellian(*v, *e));
        }
    }
    g
}

#[test]
fn maxwellian_values() {
    assert_eq!(maxwellian(0.0, 0.0), 1.0);
    assert_relative_eq!(maxwellian(1.0, 1.0), 0.135_335_283_236_612_7, max_relative = 1e-15);
    assert_eq!(maxwellian(0.3, -1.2), maxwellian(-0.3, 1.2));
}

#[test]
fn theta_fixed_point_for_several_levels() {
    let (_, grid, theta) = wall_setup(16, 32);
    for beta in [0.5, 1.0, 3.0] {
        let out = theta_apply(&theta, &grid, &l_m(&grid, &theta, beta));
        for t in out {
            assert!((t - beta).abs() <= 1e-12 * beta, "{t} vs {beta}");
        }
    }
    let zero = theta_apply(&theta, &grid, &vec![0.0; grid.nv() * grid.ne()]);
    assert!(zero.iter().all(|t| *t == 0.0));
}

#[test]
fn kernel_rows_are_stochastic_on_the_parabolic_well() {
    let w = NormalPotential::piecewise_parabolic(4.0, 0.5).unwrap();
    let q = QuadratureSpec::default();
    for k in 0..5 {
        let e = 0.1 + 0.4 * k as f64;
        let s = kernel_khat_row_integral(&w, e, &q).unwrap();
        assert!((s - 1.0).abs() <= 1e-8, "row {e}: {s}");
        assert!(kernel_khat_eval(&w, e, 0.3, &q).unwrap() >= 0.0);
    }
}

#[test]
fn flat_layer_gamma_is_pi() {
    let grid = EnergyGrid::aligned(32, 6.0, 32, 6.0, 0.0).unwrap();
    let flat = NormalPotential::flat();
    let q = QuadratureSpec::default();
    let theta = ThetaOperator::new(&flat, &grid.ez, &q).unwrap();
    let gt = build_gamma_table(&flat, None, &grid, &theta, &q, 1.0).unwrap();
    assert_relative_eq!(gt.gamma, PI, max_relative = 1e-12);
    assert_relative_eq!(gt.gamma_grid, PI, max_relative = 2e-10);
    assert_relative_eq!(gt.gamma_z(0.3), PI.sqrt(), max_relative = 1e-15);
    assert_relative_eq!(gt.gamma0(0.3), gt.gamma_x * gt.gamma_z(0.3), max_relative = 1e-15);
}

#[test]
fn wall_gamma_matches_an_independent_quadrature() {
    let (w, grid, theta) = wall_setup(32, 32);
    let q = QuadratureSpec::default();
    let gt = build_gamma_table(&w, None, &grid, &theta, &q, 1.0).unwrap();
    assert_relative_eq!(gt.gamma_z(w.z_m), PI.sqrt(), max_relative = 1e-15);
    // double-exponential quadrature of sqrt(pi) int l(e) exp(-e^2) de, split at the separatrix
    let f = |e: f64| trap_length_l(&w, e, &q).unwrap() * (-e * e).exp();
    let sep = w.separatrix();
    let trapped = quadrature::integrate(f, 1e-12, sep, 1e-13).integral;
    let free = quadrature::integrate(f, sep, 6.0, 1e-13).integral;
    let oracle = 2.0 * PI.sqrt() * (trapped + free);
    assert_relative_eq!(gt.gamma, oracle, max_relative = 1e-9);
    // the grid sum uses cell-averaged l with a point Maxwellian and converges at second order
    assert!((gt.gamma_grid - gt.gamma).abs() < 2e-2 * gt.gamma);
}

#[test]
fn qph_annihilates_equilibrium_and_conserves_mass() {
    let (_, grid, theta) = wall_setup(16, 32);
    let (w, _) = velocity_weights(&grid);
    let eq = l_m(&grid, &theta, 0.7);
    let inc = qph_apply(&theta, &grid, &eq, 0.5);
    assert!(inc.iter().all(|v| v.abs() <= 1e-10));
    let mut g = eq.clone();
    for (n, v) in g.iter_mut().enumerate() {
        *v *= 1.0 + 0.3 * ((n as f64) * 0.37).sin();
    }
    let inc = qph_apply(&theta, &grid, &g, 0.5);
    let scale = slice_mass(&g, &w, theta.widths());
    assert!(slice_mass(&inc, &w, theta.widths()).abs() <= 1e-12 * scale);
}

#[test]
fn qph_splits_into_loss_and_redistributed_gain() {
    let (_, grid, theta) = wall_setup(16, 32);
    let ne = grid.ne();
    let (w, mx) = velocity_weights(&grid);
    let base = l_m(&grid, &theta, 1.0);
    // a zero-mass perturbation: odd in v_x
    let mut dg = vec![0.0; base.len()];
    for (i, v) in grid.x_axis.centers().iter().enumerate() {
        for k in 0..ne {
            dg[i * ne + k] = 0.1 * v * base[i * ne + k];
        }
    }
    assert!(slice_mass(&dg, &w, theta.widths()).abs() < 1e-15);
    let g: Vec<f64> = base.iter().zip(&dg).map(|(a, b)| a + b).collect();
    let tau = 0.8;
    let inc = qph_apply(&theta, &grid, &g, tau);
    let th_dg = theta_apply(&theta, &grid, &dg);
    for i in 0..grid.nv() {
        for k in 0..ne {
            let direct = (th_dg[k] * theta.l()[k] * mx[i] * theta.mz()[k] - dg[i * ne + k]) / tau;
            assert!((inc[i * ne + k] - direct).abs() <= 1e-12, "({i},{k})");
        }
    }
}

fn meso_setup() -> (ThetaOperator, ThetaBarOperator, Axis) {
    let (_, _, theta) = wall_setup(16, 16);
    let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
    let ex = Axis::separatrix_aligned(24, 4.0, 1.0).unwrap();
    let bar = ThetaBarOperator::new(&u, &ex, &QuadratureSpec::default()).unwrap();
    (theta, bar, ex)
}

fn meso_l_m(theta: &ThetaOperator, bar: &ThetaBarOperator, beta: f64) -> Vec<f64> {
    let mut h = Vec::new();
    for mx in bar.mx() {
        for k in 0..theta.ne() {
            h.push(beta * theta.l()[k] * mx * theta.mz()[k]);
        }
    }
    h
}

#[test]
fn theta_bar_fixed_point_and_paths_agree() {
    let (theta, bar, _) = meso_setup();
    for beta in [0.5, 1.0, 3.0] {
        let out = bar.apply(&theta, &meso_l_m(&theta, &bar, beta));
        assert!(out.iter().all(|t| (t - beta).abs() <= 1e-12 * beta));
    }
    let h: Vec<f64> = (0..bar.nex() * theta.ne()).map(|n| 1.0 + ((n as f64) * 0.61).cos()).collect();
    let a = bar.apply(&theta, &h);
    let b = bar.apply_by_profile(&theta, &h);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn theta_bar_conserves_the_weighted_mass() {
    let (theta, bar, _) = meso_setup();
    let ne = theta.ne();
    let h: Vec<f64> = (0..bar.nex() * ne).map(|n| 1.0 + 0.5 * ((n as f64) * 0.23).sin()).collect();
    let t = bar.apply(&theta, &h);
    let mut defect = 0.0;
    let mut scale = 0.0;
    for i in 0..bar.nex() {
        for k in 0..ne {
            let gain = t[i * ne + k] * theta.l()[k] * bar.mx()[i] * theta.mz()[k];
            let wgt = bar.period_sums()[i] * theta.widths()[k];
            defect += (gain - h[i * ne + k]) * wgt;
            scale += h[i * ne + k] * wgt;
        }
    }
    assert!(defect.abs() <= 1e-13 * scale, "{defect}");
}

#[test]
fn harmonic_meso_velocities() {
    let (_, bar, ex) = meso_setup();
    for (i, c) in ex.centers().iter().enumerate() {
        if c.abs() <= 1.0 {
            assert!(bar.bound()[i]);
            assert_eq!(bar.velocity()[i], 0.0);
        } else {
            assert!(!bar.bound()[i]);
            assert!(bar.velocity()[i] * c > 0.0 && bar.velocity()[i].abs() < c.abs() + 0.5 * ex.widths()[i]);
        }
    }
}

#[test]
fn flat_tangential_potential_reduces_theta_bar_to_theta() {
    let (_, grid, theta) = wall_setup(16, 16);
    let bar = ThetaBarOperator::new(&TangentialPotential::flat(0.1), &grid.x_axis, &QuadratureSpec::default()).unwrap();
    let ne = theta.ne();
    let h: Vec<f64> = (0..grid.nv() * ne).map(|n| 1.0 + 0.4 * ((n as f64) * 0.17).cos()).collect();
    let a = bar.apply(&theta, &h);
    let b = theta_apply(&theta, &grid, &h);
    for i in 0..grid.nv() {
        for k in 0..ne {
            assert!((a[i * ne + k] - b[k]).abs() <= 1e-12 * b[k].abs().max(1.0));
        }
        assert_relative_eq!(bar.velocity()[i], grid.x_axis.centers()[i], max_relative = 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn theta_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let (_, grid, theta) = wall_setup(8, 16);
        let n = grid.nv() * grid.ne();
        let g1: Vec<f64> = (0..n).map(|k| ((k as f64 + s1 as f64) * 0.731).sin()).collect();
        let g2: Vec<f64> = (0..n).map(|k| ((k as f64 * 1.3 + s2 as f64) * 0.419).cos()).collect();
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let lhs = theta_apply(&theta, &grid, &mix);
        let t1 = theta_apply(&theta, &grid, &g1);
        let t2 = theta_apply(&theta, &grid, &g2);
        for k in 0..grid.ne() {
            let rhs = a * t1[k] + b * t2[k];
            prop_assert!((lhs[k] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + t1[k].abs() + t2[k].abs()));
        }
    }

    #[test]
    fn kernel_path_matches_density_path(seed in 0u64..10_000) {
        let (_, _, theta) = wall_setup(8, 16);
        let phi: Vec<f64> = (0..theta.ne()).map(|k| 1.0 + 0.9 * ((k as f64 + seed as f64) * 0.917).sin()).collect();
        let a = theta.theta_from_phi(&phi);
        let b = theta.theta_from_phi_kernel(&phi);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn theta_fixed_point_for_any_level(beta in 0.01f64..100.0) {
        let (_, grid, theta) = wall_setup(8, 16);
        let out = theta_apply(&theta, &grid, &l_m(&grid, &theta, beta));
        for t in out {
            prop_assert!((t - beta).abs() <= 1e-12 * beta);
        }
    }

    #[test]
    fn qph_is_mass_neutral(seed in 0u64..10_000, tau in 0.05f64..5.0) {
        let (_, grid, theta) = wall_setup(8, 16);
        let (w, _) = velocity_weights(&grid);
        let g: Vec<f64> = (0..grid.nv() * grid.ne())
            .map(|k| 1.0 + ((k as f64 + seed as f64) * 0.37).sin())
            .collect();
        let inc = qph_apply(&theta, &grid, &g, tau);
        let scale = slice_mass(&g, &w, theta.widths()) / tau;
        prop_assert!(slice_mass(&inc, &w, theta.widths()).abs() <= 1e-12 * scale);
    }
}
