//! Conservation, stationarity, symmetry and cross-model checks of the kinetic solvers.

use std::f64::consts::PI;

use surfflow::equilibrium_collision::{Axis, EnergyGrid, ThetaBarOperator, ThetaOperator};
use surfflow::kinetic_solvers::{
    AmbientBoundary, ChannelSolver, ChannelState, CollisionPlan, CouplingRegime, FineSolver, MassCorrection,
    MesoSolver, MicroMacroSolver, PairOperator, PhaseGrid, SurfaceState, TransportScheme, TrappedSolver,
    TwoGroupSolver, XBoundary,
};
use surfflow::potential_geometry::{NormalPotential, QuadratureSpec, TangentialPotential};
use surfflow::Error;

fn wall_theta(nv: usize, ne: usize) -> (EnergyGrid, ThetaOperator) {
    let w = NormalPotential::inverse_square_wall(4.0, 0.5).unwrap();
    let grid = EnergyGrid::aligned(nv, 6.0, ne, 6.0, w.separatrix()).unwrap();
    let theta = ThetaOperator::new(&w, &grid.ez, &QuadratureSpec::default()).unwrap();
    (grid, theta)
}

fn phase(nx: usize, dt: f64, eps: f64) -> (PhaseGrid, ThetaOperator) {
    let (energy, theta) = wall_theta(8, 8);
    (PhaseGrid::new(0.0, 1.0, nx, energy, dt, eps).unwrap(), theta)
}

/// Smooth nonnegative data that is neither even in `v` nor an equilibrium.
fn rough(grid: &PhaseGrid) -> SurfaceState {
    SurfaceState::from_fn(grid, |x, v, e| {
        (1.0 + 0.5 * (2.0 * PI * x).sin() + 0.3 * (v * 1.3 + e).cos()) * (-0.5 * v * v - 0.4 * e * e).exp()
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn trapped_step_conserves_mass_with_force_and_both_schemes() {
    for scheme in [TransportScheme::Upwind, TransportScheme::Muscl] {
        for boundary in [XBoundary::Periodic, XBoundary::Reflective] {
            let (mut grid, theta) = phase(16, 0.002, 0.5);
            grid.scheme = scheme;
            grid.boundary = boundary;
            let force = grid.sample(|x| 0.5 * (2.0 * PI * x).sin());
            let solver = TrappedSolver::new(&grid, &theta, 1.0, &force).unwrap();
            let mut s = rough(&grid);
            let m0 = s.total_mass(&grid);
            for _ in 0..20 {
                let m = s.total_mass(&grid);
                solver.step(&mut s).unwrap();
                assert!(rel(s.total_mass(&grid), m) <= 1e-12, "{scheme:?} {boundary:?}");
            }
            assert!(rel(s.total_mass(&grid), m0) <= 1e-12);
        }
    }
}

#[test]
fn uniform_equilibrium_is_stationary() {
    let (grid, theta) = phase(16, 0.004, 1.0);
    let solver = TrappedSolver::new(&grid, &theta, 0.7, &vec![0.0; 16]).unwrap();
    let init = SurfaceState::equilibrium(&grid, &theta, |_| 2.5);
    let scale = init.g.iter().fold(0.0_f64, |m, v| m.max(*v));
    let mut s = init.clone();
    solver.step(&mut s).unwrap();
    assert!(max_diff(&s.g, &init.g) <= 1e-10 * scale);
    for _ in 0..99 {
        solver.step(&mut s).unwrap();
    }
    assert!(max_diff(&s.g, &init.g) <= 1e-8 * scale);
    for n in s.density_moment(&grid) {
        assert!(rel(n, 2.5) <= 1e-12);
    }
}

#[test]
fn equilibrium_density_and_zero_state_moments() {
    let (grid, theta) = phase(8, 0.004, 1.0);
    let s = SurfaceState::equilibrium(&grid, &theta, |x| 1.0 + x);
    for (n, x) in s.density_moment(&grid).iter().zip(grid.x_centers()) {
        assert!(rel(*n, 1.0 + x) <= 1e-13);
    }
    let z = SurfaceState::zeros(&grid);
    assert!(z.density_moment(&grid).iter().all(|n| *n == 0.0));
    assert!(z.flux_moment(&grid).iter().all(|n| *n == 0.0));
}

#[test]
fn collision_fixed_point_projection_limit_and_mass() {
    let (grid, theta) = phase(1, 0.01, 1.0);
    let (w, mx) = (grid.energy.x_axis.widths().to_vec(), grid.energy.x_axis.centers().iter().map(|v| (-v * v).exp()).collect::<Vec<_>>());
    let c_x: f64 = w.iter().zip(&mx).map(|(a, b)| a * b).sum();
    let eq = SurfaceState::equilibrium(&grid, &theta, |_| 1.7).g;
    for lambda in [1e-3, 1.0, 1e3] {
        let plan = CollisionPlan::new(&theta, lambda, PairOperator::relaxation(8, lambda), MassCorrection::Conserve).unwrap();
        let mut g = eq.clone();
        plan.apply(&mut g, None, &w, &mx, c_x).unwrap();
        assert!(max_diff(&g, &eq) <= 1e-14 * 1.7);
    }
    let lambda = 1e8;
    let plan = CollisionPlan::new(&theta, lambda, PairOperator::relaxation(8, lambda), MassCorrection::Conserve).unwrap();
    let start = rough(&grid);
    let n0 = start.density_moment(&grid)[0];
    let mut g = start.g.clone();
    plan.apply(&mut g, None, &w, &mx, c_x).unwrap();
    let target = SurfaceState::equilibrium(&grid, &theta, |_| n0).g;
    let scale = target.iter().fold(0.0_f64, |m, v| m.max(*v));
    assert!(max_diff(&g, &target) <= 1e-6 * scale);
    let mut after = start.clone();
    after.g = g;
    assert!(rel(after.density_moment(&grid)[0], n0) <= 1e-12);
}

#[test]
fn even_data_without_force_keeps_zero_flux() {
    let (grid, theta) = phase(16, 0.004, 1.0);
    let solver = TrappedSolver::new(&grid, &theta, 1.0, &vec![0.0; 16]).unwrap();
    let mut uniform = SurfaceState::from_fn(&grid, |_, v, e| (-v * v - 0.3 * e * e).exp() * (1.0 + 0.2 * e));
    let mut s = SurfaceState::from_fn(&grid, |x, v, e| (2.0 + (2.0 * PI * x).cos()) * (-v * v - 0.3 * e * e).exp());
    for _ in 0..20 {
        solver.step(&mut uniform).unwrap();
        for phi in uniform.flux_moment(&grid) {
            assert!(phi.abs() <= 1e-12, "flux {phi}");
        }
        solver.step(&mut s).unwrap();
        let total: f64 = s.flux_moment(&grid).iter().sum();
        assert!(total.abs() <= 1e-12, "net flux {total}");
    }
}

#[test]
fn undershoots_stay_at_rounding_level() {
    let (grid, theta) = phase(16, 0.002, 0.5);
    let force = grid.sample(|x| 0.5 * (2.0 * PI * x).sin());
    let solver = TrappedSolver::new(&grid, &theta, 1.0, &force).unwrap();
    let mut s = SurfaceState::from_fn(&grid, |x, v, e| if x < 0.5 { (-v * v - e * e).exp() } else { 0.0 });
    for _ in 0..20 {
        let r = solver.step(&mut s).unwrap();
        assert!(r.undershoot >= -1e-14, "undershoot {}", r.undershoot);
    }
}

#[test]
fn cfl_violations_are_rejected() {
    let (grid, theta) = phase(16, 0.05, 1.0);
    assert!(matches!(TrappedSolver::new(&grid, &theta, 1.0, &vec![0.0; 16]), Err(Error::Cfl(_))));
    let (grid, theta) = phase(16, 0.005, 1.0);
    assert!(matches!(TrappedSolver::new(&grid, &theta, 1.0, &vec![1000.0; 16]), Err(Error::Cfl(_))));
    let (energy, _) = wall_theta(8, 8);
    assert!(matches!(PhaseGrid::new(0.0, 1.0, 8, energy, 0.01, 1.5), Err(Error::InvalidGrid(_))));
}

fn channel_pair(grid: &PhaseGrid) -> (SurfaceState, SurfaceState) {
    let a = SurfaceState::from_fn(grid, |x, v, e| (1.0 + 0.5 * (2.0 * PI * x).cos()) * (-v * v - e * e).exp());
    let b = SurfaceState::from_fn(grid, |x, v, e| (1.0 - 0.5 * (2.0 * PI * x).cos()) * (-0.8 * v * v - 1.2 * e * e).exp());
    (a, b)
}

#[test]
fn channel_sum_follows_the_trapped_solver() {
    for regime in [CouplingRegime::Strong, CouplingRegime::Moderate, CouplingRegime::Weak] {
        let (grid, theta) = phase(16, 0.001, 0.2);
        let force = grid.sample(|x| 0.3 * (2.0 * PI * x).cos());
        let ch = ChannelSolver::new(&grid, &theta, 1.0, &force, regime).unwrap();
        let tr = TrappedSolver::new(&grid, &theta, 1.0, &force).unwrap();
        let (a, b) = channel_pair(&grid);
        let mut st = ChannelState::new(a, b, regime, grid.epsilon).unwrap();
        let m0 = st.sum().total_mass(&grid);
        for _ in 0..10 {
            let mut sum = st.sum();
            tr.step(&mut sum).unwrap();
            ch.step(&mut st).unwrap();
            let scale = sum.g.iter().fold(0.0_f64, |m, v| m.max(*v));
            assert!(max_diff(&st.sum().g, &sum.g) <= 1e-12 * scale, "{regime:?}");
        }
        assert!(rel(st.sum().total_mass(&grid), m0) <= 1e-12);
    }
}

#[test]
fn channel_with_equal_layers_stays_symmetric() {
    let (grid, theta) = phase(16, 0.001, 0.2);
    let ch = ChannelSolver::new(&grid, &theta, 1.0, &vec![0.0; 16], CouplingRegime::Strong).unwrap();
    let (a, _) = channel_pair(&grid);
    let mut st = ChannelState::new(a.clone(), a, CouplingRegime::Strong, grid.epsilon).unwrap();
    for _ in 0..10 {
        ch.step(&mut st).unwrap();
        let scale = st.g1.g.iter().fold(0.0_f64, |m, v| m.max(*v));
        assert!(max_diff(&st.g1.g, &st.g2.g) <= 1e-12 * scale);
    }
}

#[test]
fn channel_rejects_nonlinear_transport() {
    let (mut grid, theta) = phase(16, 0.001, 0.2);
    grid.scheme = TransportScheme::Muscl;
    assert!(ChannelSolver::new(&grid, &theta, 1.0, &vec![0.0; 16], CouplingRegime::Weak).is_err());
}

#[test]
fn closed_two_group_matches_the_trapped_solver() {
    let (grid, theta) = phase(16, 0.002, 0.5);
    let force = vec![0.0; 16];
    let tg = TwoGroupSolver::new(&grid, &theta, 1.0, &force, AmbientBoundary::Closed).unwrap();
    let tr = TrappedSolver::new(&grid, &theta, 1.0, &force).unwrap();
    let mut a = rough(&grid);
    let mut b = a.clone();
    let m0 = a.total_mass(&grid);
    for _ in 0..10 {
        let (_, rec) = tg.step(&mut a).unwrap();
        tr.step(&mut b).unwrap();
        assert!(rec.influx.iter().all(|v| *v == 0.0));
    }
    assert_eq!(a.g, b.g);
    assert!(rel(a.total_mass(&grid), m0) <= 1e-12);
}

#[test]
fn ambient_in_detailed_balance_leaves_the_layer_unchanged() {
    let (grid, theta) = phase(16, 0.002, 0.5);
    let amb = AmbientBoundary::maxwellian(&grid, &theta, |_| 1.3).unwrap();
    let tg = TwoGroupSolver::new(&grid, &theta, 1.0, &vec![0.0; 16], amb).unwrap();
    let init = SurfaceState::equilibrium(&grid, &theta, |_| 1.3);
    let mut s = init.clone();
    let (_, rec) = tg.step(&mut s).unwrap();
    let scale = init.g.iter().fold(0.0_f64, |m, v| m.max(*v));
    assert!(max_diff(&s.g, &init.g) <= 1e-8 * scale);
    for (o, i) in rec.outflux.iter().zip(&rec.influx) {
        assert!(rel(*o, *i) <= 1e-8);
        assert!(*o > 0.0);
    }
    let nf = rec.free_cells.len();
    assert_eq!(rec.emitted.len(), 16 * 8 * nf);
}

#[test]
fn zero_ambient_drains_the_layer_monotonically() {
    let (grid, theta) = phase(16, 0.002, 0.5);
    let amb = AmbientBoundary::prescribed(&grid, vec![0.0; grid.len()]).unwrap();
    let tg = TwoGroupSolver::new(&grid, &theta, 1.0, &vec![0.0; 16], amb).unwrap();
    let mut s = SurfaceState::equilibrium(&grid, &theta, |x| 1.0 + 0.5 * (2.0 * PI * x).sin());
    let free_mass = |s: &SurfaceState| -> f64 {
        let ne = s.ne;
        let de = grid.energy.ez.widths();
        let dv = grid.energy.x_axis.widths();
        s.g.iter()
            .enumerate()
            .filter(|(idx, _)| theta.free()[idx % ne])
            .map(|(idx, g)| g * de[idx % ne] * dv[(idx / ne) % s.nv])
            .sum()
    };
    let mut m = s.total_mass(&grid);
    let mut f = free_mass(&s);
    for _ in 0..20 {
        tg.step(&mut s).unwrap();
        let (m1, f1) = (s.total_mass(&grid), free_mass(&s));
        assert!(m1 < m && f1 < f);
        m = m1;
        f = f1;
    }
}

#[test]
fn negative_ambient_is_rejected() {
    let (grid, _) = phase(4, 0.002, 0.5);
    let mut f = vec![0.0; grid.len()];
    f[3] = -1.0;
    assert!(AmbientBoundary::prescribed(&grid, f).is_err());
}

fn meso_grid(u: &TangentialPotential, nx: usize, dt: f64) -> (PhaseGrid, ThetaOperator, ThetaBarOperator) {
    let (energy, theta) = wall_theta(8, 8);
    let ex = Axis::separatrix_aligned(12, 4.0, u.separatrix().max(1.0)).unwrap();
    let bar = ThetaBarOperator::new(u, &ex, &QuadratureSpec::default()).unwrap();
    let grid = PhaseGrid::new(0.0, 1.0, nx, EnergyGrid::new(ex, energy.ez).unwrap(), dt, 1.0).unwrap();
    (grid, theta, bar)
}

#[test]
fn meso_equilibrium_is_stationary_and_mass_is_conserved() {
    let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
    let (grid, theta, bar) = meso_grid(&u, 16, 0.01);
    let solver = MesoSolver::new(&grid, &theta, &bar, 0.5).unwrap();
    let init = solver.equilibrium(|_| 1.4);
    let mut s = init.clone();
    for _ in 0..100 {
        solver.step(&mut s).unwrap();
    }
    let scale = init.h.iter().fold(0.0_f64, |m, v| m.max(*v));
    assert!(max_diff(&s.h, &init.h) <= 1e-8 * scale);
    for n in solver.density_moment(&s) {
        assert!(rel(n, 1.4) <= 1e-10);
    }
    let mut s = solver.equilibrium(|x| 1.0 + 0.8 * (2.0 * PI * x).sin());
    for i in 0..s.h.len() {
        s.h[i] *= 1.0 + 0.2 * ((i % 7) as f64);
    }
    for _ in 0..20 {
        let m = solver.total_mass(&s);
        solver.step(&mut s).unwrap();
        assert!(rel(solver.total_mass(&s), m) <= 1e-12);
    }
}

#[test]
fn meso_density_of_l_m_is_the_discrete_normalization() {
    let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
    let (grid, theta, bar) = meso_grid(&u, 4, 0.01);
    let solver = MesoSolver::new(&grid, &theta, &bar, 0.5).unwrap();
    let st = solver.equilibrium(|_| solver.gamma_grid());
    for n in solver.density_moment(&st) {
        assert!(rel(n, solver.gamma_grid()) <= 1e-13);
    }
    assert!(bar.velocity().iter().zip(bar.bound()).all(|(v, b)| !b || *v == 0.0));
}

#[test]
fn flat_meso_model_reduces_to_the_trapped_solver() {
    let u = TangentialPotential::flat(0.1);
    let (grid, theta, bar) = meso_grid(&u, 16, 0.01);
    let meso = MesoSolver::new(&grid, &theta, &bar, 0.5).unwrap();
    let tr = TrappedSolver::new(&grid, &theta, 0.5, &vec![0.0; 16]).unwrap();
    let mut m = meso.equilibrium(|x| 1.0 + 0.5 * (2.0 * PI * x).sin());
    let mut s = SurfaceState::equilibrium(&grid, &theta, |x| 1.0 + 0.5 * (2.0 * PI * x).sin());
    for _ in 0..20 {
        meso.step(&mut m).unwrap();
        tr.step(&mut s).unwrap();
    }
    let nm = meso.density_moment(&m);
    let nt = s.density_moment(&grid);
    assert!(max_diff(&nm, &nt) <= 1e-10, "{}", max_diff(&nm, &nt));
}

fn fine_setup(u: &TangentialPotential, delta: f64, nx: usize) -> (PhaseGrid, ThetaOperator, ThetaBarOperator) {
    let (energy, theta) = wall_theta(8, 8);
    let ex = Axis::separatrix_aligned(12, 4.0, u.separatrix().max(1.0)).unwrap();
    let bar = ThetaBarOperator::new(u, &ex, &QuadratureSpec::default()).unwrap();
    let dt = 0.2 / nx as f64;
    let grid = PhaseGrid::new(0.0, 4.0 * delta, nx, EnergyGrid::new(ex, energy.ez).unwrap(), dt, 1.0).unwrap();
    (grid, theta, bar)
}

#[test]
fn fine_solver_conserves_mass_and_keeps_uniform_state() {
    let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
    let (grid, theta, _) = fine_setup(&u, 0.25, 64);
    let fine = FineSolver::new(&grid, &theta, &u, 0.25, 0.5).unwrap();
    let init = fine.uniform(0.8);
    let mut s = init.clone();
    for _ in 0..50 {
        fine.step(&mut s).unwrap();
    }
    let scale = init.h.iter().fold(0.0_f64, |m, v| m.max(*v));
    assert!(max_diff(&s.h, &init.h) <= 1e-10 * scale);
    let mut s = fine.uniform(1.0);
    for (i, v) in s.h.iter_mut().enumerate() {
        *v *= 1.0 + 0.5 * ((i / 96) as f64 * 0.3).sin();
    }
    for _ in 0..30 {
        let m = fine.total_mass(&s);
        fine.step(&mut s).unwrap();
        assert!(rel(fine.total_mass(&s), m) <= 1e-12);
    }
}

#[test]
fn fine_solver_needs_resolution() {
    let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
    let (grid, theta, _) = fine_setup(&u, 0.25, 32);
    assert!(matches!(FineSolver::new(&grid, &theta, &u, 0.25, 0.5), Err(Error::Resolution(_))));
}

#[test]
fn flat_fine_solver_equals_meso_streaming() {
    let u = TangentialPotential::flat(0.1);
    let (grid, theta, bar) = fine_setup(&u, 0.25, 64);
    let fine = FineSolver::new(&grid, &theta, &u, 0.25, 0.5).unwrap();
    let meso = MesoSolver::new(&grid, &theta, &bar, 0.5).unwrap();
    let mut m = meso.equilibrium(|x| 1.0 + 0.5 * (2.0 * PI * x).sin());
    let mut f = fine.state_from_meso(&m).unwrap();
    for _ in 0..20 {
        meso.step(&mut m).unwrap();
        fine.step(&mut f).unwrap();
    }
    let scale = m.h.iter().fold(0.0_f64, |a, v| a.max(*v));
    assert!(max_diff(&m.h, &f.h) <= 1e-12 * scale);
}

#[test]
fn micro_macro_conserves_mass_and_approaches_diffusion() {
    let (energy, theta) = wall_theta(8, 8);
    let nx = 32;
    let probe = PhaseGrid::new(0.0, 1.0, nx, energy.clone(), 1.0, 1e-3).unwrap();
    let dt = MicroMacroSolver::auto_dt(&probe, &theta, 1.0);
    let grid = PhaseGrid::new(0.0, 1.0, nx, energy, dt, 1e-3).unwrap();
    let mm = MicroMacroSolver::new(&grid, &theta, 1.0, &vec![0.0; nx]).unwrap();
    let init = |x: f64| 1.0 + 0.5 * (2.0 * PI * x).cos();
    let mut st = mm.initial(init);
    let mut n = grid.sample(init);
    let d = mm.diffusivity();
    let m0 = mm.total_mass(&st);
    let dx = grid.dx();
    for _ in 0..200 {
        mm.step(&mut st).unwrap();
        let old = n.clone();
        for c in 0..nx {
            let (l, r) = ((c + nx - 1) % nx, (c + 1) % nx);
            n[c] = old[c] + dt * d * (old[r] - 2.0 * old[c] + old[l]) / (dx * dx);
        }
    }
    assert!(rel(mm.total_mass(&st), m0) <= 1e-12);
    let err = max_diff(&mm.density_moment(&st), &n);
    assert!(err <= 5e-3, "micro-macro vs diffusion: {err}");
}
