//! Cross-model studies: kinetic against diffusion as `eps -> 0`, fine against mesoscopic as
//! `delta -> 0`, and the channel coupling regimes against their limiting behaviour.
//!
//! Every study is deterministic. Runtimes are measured for the summary but kept out of the CSV
//! reports so repeated runs produce identical files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::diffusion_solvers::compute_exchange_c;
use crate::equilibrium_collision::{Axis, EnergyGrid, ThetaBarOperator, ThetaOperator};
use crate::error::{Error, Result};
use crate::kinetic_solvers::{
    ChannelSolver, ChannelState, CouplingRegime, FineSolver, MesoSolver, MicroMacroSolver, PhaseGrid, SurfaceState,
    TrappedSolver,
};
use crate::potential_geometry::{NormalPotential, QuadratureSpec, TangentialPotential};

/// Grid-weighted `(L1, Linf)` distance of two density profiles with cell width `dx`.
pub fn compare_densities(a: &[f64], b: &[f64], dx: f64) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "density profiles have {} and {} cells",
            a.len(),
            b.len()
        )));
    }
    let (l1, linf) = a.iter().zip(b).fold((0.0, 0.0_f64), |(s, m), (x, y)| {
        let d = (x - y).abs();
        (s + d, m.max(d))
    });
    Ok((l1 * dx, linf))
}

/// Orders `log2(e_i / e_{i+1}) / log2(p_i / p_{i+1})` of successive sweep points. A pair with a
/// non-positive error yields no entry.
pub fn successive_orders(params: &[f64], errors: &[f64]) -> Vec<f64> {
    params
        .windows(2)
        .zip(errors.windows(2))
        .filter(|(_, e)| e[0] > 0.0 && e[1] > 0.0)
        .map(|(p, e)| (e[0] / e[1]).log2() / (p[0] / p[1]).log2())
        .collect()
}

/// Result of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Name of the swept parameter.
    pub parameter: String,
    /// Swept values, in the order given.
    pub values: Vec<f64>,
    /// `L1` error per value.
    pub l1: Vec<f64>,
    /// `Linf` error per value.
    pub linf: Vec<f64>,
    /// Orders between successive values, from the `L1` errors.
    pub orders: Vec<f64>,
    /// Mean of `orders`, when at least one exists.
    pub order: Option<f64>,
    /// Wall-clock seconds per value.
    pub runtimes: Vec<f64>,
    /// `L1` errors strictly decrease along the sweep.
    pub monotone: bool,
    /// Order required for `passed`, if any.
    pub min_order: Option<f64>,
    /// Monotone, and the order meets `min_order` when one is set.
    pub passed: bool,
}

impl ConvergenceReport {
    /// Assembles the report and evaluates the pass flag.
    pub fn new(parameter: &str, values: Vec<f64>, l1: Vec<f64>, linf: Vec<f64>, runtimes: Vec<f64>, min_order: Option<f64>) -> Self {
        let orders = successive_orders(&values, &l1);
        let order = if orders.is_empty() {
            None
        } else {
            Some(orders.iter().sum::<f64>() / orders.len() as f64)
        };
        let monotone = l1.len() >= 2 && l1.windows(2).all(|w| w[1] < w[0]);
        let order_ok = match min_order {
            Some(m) => order.is_some_and(|o| o.is_finite() && o >= m),
            None => true,
        };
        Self {
            parameter: parameter.to_string(),
            values,
            l1,
            linf,
            orders,
            order,
            runtimes,
            monotone,
            min_order,
            passed: monotone && order_ok,
        }
    }

    /// CSV with columns `<parameter>, L1, Linf, order` (the order column holds the order
    /// from the previous row).
    pub fn to_csv(&self) -> String {
        let mut s = format!("{},L1,Linf,order\n", self.parameter);
        for i in 0..self.values.len() {
            let order = if i == 0 {
                String::new()
            } else {
                successive_orders(&self.values[i - 1..=i], &self.l1[i - 1..=i])
                    .first()
                    .map(|o| format!("{o:.16e}"))
                    .unwrap_or_default()
            };
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{}", self.values[i], self.l1[i], self.linf[i], order);
        }
        s
    }

    /// Human-readable block with one line per value and a pass/fail line.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for i in 0..self.values.len() {
            let _ = writeln!(
                s,
                "  {} = {:<8} L1 = {:.4e}  Linf = {:.4e}  ({:.2} s)",
                self.parameter,
                self.values[i],
                self.l1[i],
                self.linf[i],
                self.runtimes.get(i).copied().unwrap_or(0.0)
            );
        }
        let order = self.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
        let _ = writeln!(
            s,
            "  monotone = {}  order = {}  {}",
            self.monotone,
            order,
            if self.passed { "PASS" } else { "FAIL" }
        );
        s
    }
}

fn wall(w_m: f64, z_m: f64) -> Result<NormalPotential> {
    NormalPotential::inverse_square_wall(w_m, z_m)
}

/// Setup of the diffusion-limit study: a Gaussian bump `1 + A exp(-x^2 / (2 s^2))` on a
/// periodic interval, trapped surface kinetics on an inverse-square wall.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionLimitScenario {
    /// Left end of the interval.
    pub x_min: f64,
    /// Interval length.
    pub length: f64,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `v_x` cells.
    pub nv: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
    /// Velocity cutoff.
    pub v_max: f64,
    /// Energy cutoff.
    pub e_max: f64,
    /// Well depth.
    pub w_m: f64,
    /// Well minimum.
    pub z_m: f64,
    /// Relaxation time.
    pub tau_ms: f64,
    /// Final time.
    pub t_final: f64,
    /// Bump amplitude `A`.
    pub amplitude: f64,
    /// Bump width `s`.
    pub width: f64,
    /// Amplitude `a` of the tangential potential `U = a cos(pi x)`.
    pub force_amplitude: f64,
}

impl Default for DiffusionLimitScenario {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            length: 2.0,
            nx: 128,
            nv: 32,
            ne: 32,
            v_max: 6.0,
            e_max: 6.0,
            w_m: 4.0,
            z_m: 0.5,
            tau_ms: 1.0,
            t_final: 0.5,
            amplitude: 1.0,
            width: 0.25,
            force_amplitude: 0.0,
        }
    }
}

impl DiffusionLimitScenario {
    /// Initial density.
    pub fn initial(&self, x: f64) -> f64 {
        1.0 + self.amplitude * (-x * x / (2.0 * self.width * self.width)).exp()
    }

    fn force_at(&self, x: f64) -> f64 {
        -self.force_amplitude * PI * (PI * x).sin()
    }
}

/// Explicit reference `N' = N - dt/dx (J_j - J_{j-1})` with `J_j = -D (dN_j + 2 U'_j Nbar_j)`,
/// the `eps -> 0` limit of the micro-macro scheme on the same grid and step.
fn diffusion_reference(n0: Vec<f64>, d: f64, force_faces: &[f64], dx: f64, dt: f64, steps: usize) -> Vec<f64> {
    let nx = n0.len();
    let mut n = n0;
    let mut j = vec![0.0; nx];
    for _ in 0..steps {
        for f in 0..nx {
            let r = (f + 1) % nx;
            j[f] = -d * ((n[r] - n[f]) / dx + force_faces[f] * (n[f] + n[r]));
        }
        for c in 0..nx {
            n[c] -= dt / dx * (j[c] - j[(c + nx - 1) % nx]);
        }
    }
    n
}

/// Micro-macro kinetics against the diffusion limit for each `eps`. Passes when the `L1`
/// error strictly decreases and the mean order is at least `0.8`.
pub fn run_diffusion_limit_study(epsilons: &[f64], sc: &DiffusionLimitScenario) -> Result<ConvergenceReport> {
    if epsilons.len() < 3 {
        return Err(Error::Domain("the diffusion-limit study needs at least three epsilon values".into()));
    }
    let w = wall(sc.w_m, sc.z_m)?;
    let energy = EnergyGrid::aligned(sc.nv, sc.v_max, sc.ne, sc.e_max, w.separatrix())?;
    let theta = ThetaOperator::new(&w, &energy.ez, &QuadratureSpec::default())?;
    let runs: Vec<Result<(f64, f64, f64)>> = epsilons
        .par_iter()
        .map(|&eps| {
            let start = Instant::now();
            let probe = PhaseGrid::new(sc.x_min, sc.length, sc.nx, energy.clone(), 1.0, eps)?;
            let auto = MicroMacroSolver::auto_dt(&probe, &theta, sc.tau_ms);
            let steps = (sc.t_final / auto).ceil() as usize;
            let dt = sc.t_final / steps as f64;
            let grid = PhaseGrid::new(sc.x_min, sc.length, sc.nx, energy.clone(), dt, eps)?;
            let dx = grid.dx();
            let faces: Vec<f64> = (0..sc.nx).map(|j| sc.force_at(sc.x_min + (j as f64 + 1.0) * dx)).collect();
            let solver = MicroMacroSolver::new(&grid, &theta, sc.tau_ms, &faces)?;
            let mut st = solver.initial(|x| sc.initial(x));
            for _ in 0..steps {
                solver.step(&mut st)?;
            }
            let reference = diffusion_reference(grid.sample(|x| sc.initial(x)), solver.diffusivity(), &faces, dx, dt, steps);
            let (l1, linf) = compare_densities(&solver.density_moment(&st), &reference, dx)?;
            Ok((l1, linf, start.elapsed().as_secs_f64()))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(
        "epsilon",
        epsilons.to_vec(),
        runs.iter().map(|r| r.0).collect(),
        runs.iter().map(|r| r.1).collect(),
        runs.iter().map(|r| r.2).collect(),
        Some(0.8),
    ))
}

/// Setup of the homogenization study: harmonic tangential potential of half-period `delta`,
/// initial density `1 + A sin(2 pi x / L)` on `[0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationScenario {
    /// Interval length `L`, a whole number of periods `2 delta` for every swept `delta`.
    pub length: f64,
    /// Tangential barrier `U_m`; zero selects the flat potential.
    pub u_m: f64,
    /// Number of `e_x` cells.
    pub nex: usize,
    /// `e_x` cutoff.
    pub ex_max: f64,
    /// Number of `e_z` cells.
    pub ne: usize,
    /// `e_z` cutoff.
    pub e_max: f64,
    /// Well depth.
    pub w_m: f64,
    /// Well minimum.
    pub z_m: f64,
    /// Relaxation time.
    pub tau_ms: f64,
    /// Final time.
    pub t_final: f64,
    /// Density modulation `A`.
    pub amplitude: f64,
    /// Courant number of the fine solver.
    pub courant: f64,
}

impl Default for HomogenizationScenario {
    fn default() -> Self {
        Self {
            length: 0.48,
            u_m: 1.0,
            nex: 12,
            ex_max: 4.0,
            ne: 8,
            e_max: 6.0,
            w_m: 4.0,
            z_m: 0.5,
            tau_ms: 1.0,
            t_final: 0.25,
            amplitude: 0.5,
            courant: 0.8,
        }
    }
}

/// Averages consecutive blocks of `k` cells.
fn block_average(v: &[f64], k: usize) -> Vec<f64> {
    v.chunks_exact(k).map(|c| c.iter().sum::<f64>() / k as f64).collect()
}

/// Fine against mesoscopic densities for each `delta`, both on the grid `dx = delta / 16` and
/// compared through averages over each period `2 delta`. The fine density is doubled to the
/// mesoscopic normalization `S_i = int_{-1}^{1} B_i dy`. Passes when the `L1` error strictly
/// decreases.
pub fn run_homogenization_study(deltas: &[f64], sc: &HomogenizationScenario) -> Result<ConvergenceReport> {
    if deltas.len() < 3 {
        return Err(Error::Domain("the homogenization study needs at least three delta values".into()));
    }
    let w = wall(sc.w_m, sc.z_m)?;
    let q = QuadratureSpec::default();
    let ez = Axis::separatrix_aligned(sc.ne, sc.e_max, w.separatrix())?;
    let theta = ThetaOperator::new(&w, &ez, &q)?;
    let runs: Vec<Result<(f64, f64, f64)>> = deltas
        .par_iter()
        .map(|&delta| {
            let start = Instant::now();
            let u = if sc.u_m == 0.0 {
                TangentialPotential::flat(delta)
            } else {
                TangentialPotential::harmonic(sc.u_m, delta)?
            };
            let ex = if u.is_flat() {
                Axis::uniform_symmetric(sc.nex, sc.ex_max)?
            } else {
                Axis::separatrix_aligned(sc.nex, sc.ex_max, u.separatrix())?
            };
            let bar = ThetaBarOperator::new(&u, &ex, &q)?;
            let per_window = (2.0 * fine_cells_per_delta()) as usize;
            let windows = (sc.length / (2.0 * delta)).round() as usize;
            let nx = windows * per_window;
            let dx = sc.length / nx as f64;
            let dt0 = sc.courant * dx / sc.ex_max;
            let steps = (sc.t_final / dt0).ceil() as usize;
            let dt = sc.t_final / steps as f64;
            let energy = EnergyGrid::new(ex, ez.clone())?;
            let grid = PhaseGrid::new(0.0, sc.length, nx, energy, dt, 1.0)?;
            let meso = MesoSolver::new(&grid, &theta, &bar, sc.tau_ms)?;
            let fine = FineSolver::new(&grid, &theta, &u, delta, sc.tau_ms)?;
            let mut m = meso.equilibrium(|x| 1.0 + sc.amplitude * (2.0 * PI * x / sc.length).sin());
            let mut f = fine.state_from_meso(&m)?;
            for _ in 0..steps {
                meso.step(&mut m)?;
                fine.step(&mut f)?;
            }
            let nm = block_average(&meso.density_moment(&m), per_window);
            let nf: Vec<f64> = block_average(&fine.density_moment(&f), per_window)
                .iter()
                .map(|v| 2.0 * v)
                .collect();
            let (l1, linf) = compare_densities(&nm, &nf, 2.0 * delta)?;
            Ok((l1, linf, start.elapsed().as_secs_f64()))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::new(
        "delta",
        deltas.to_vec(),
        runs.iter().map(|r| r.0).collect(),
        runs.iter().map(|r| r.1).collect(),
        runs.iter().map(|r| r.2).collect(),
        None,
    ))
}

fn fine_cells_per_delta() -> f64 {
    crate::kinetic_solvers::fine::MIN_CELLS_PER_DELTA
}

/// Setup of the channel study: two `x`-uniform layers at densities `n1`, `n2` in equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingScenario {
    /// Knudsen-type scale `eps`.
    pub epsilon: f64,
    /// Well depth.
    pub w_m: f64,
    /// Well minimum.
    pub z_m: f64,
    /// Relaxation time.
    pub tau_ms: f64,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `v_x` cells.
    pub nv: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
    /// Velocity cutoff.
    pub v_max: f64,
    /// Energy cutoff.
    pub e_max: f64,
    /// Initial density of layer 1.
    pub n1: f64,
    /// Initial density of layer 2.
    pub n2: f64,
    /// Final time of the moderate and weak runs; the strong run stops at `5 eps tau_ms`.
    pub t_final: f64,
    /// Courant number of the kinetic step.
    pub courant: f64,
}

impl Default for CouplingScenario {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            w_m: 4.0,
            z_m: 0.5,
            tau_ms: 1.0,
            nx: 2,
            nv: 16,
            ne: 32,
            v_max: 6.0,
            e_max: 6.0,
            n1: 1.5,
            n2: 0.5,
            t_final: 1.0,
            courant: 0.8,
        }
    }
}

/// Diagnostics of one coupling regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeDiagnostics {
    /// Regime.
    pub regime: CouplingRegime,
    /// Sample times, starting at zero.
    pub times: Vec<f64>,
    /// `sup |N1 - N2| / N_*` with `N_* = N1 + N2`, per sample.
    pub gaps: Vec<f64>,
    /// Largest per-step deviation of the layer sum from the single-layer solver, relative to
    /// the largest entry of the sum.
    pub sum_error: f64,
    /// Exchange rate `c(W_m)`.
    pub c: f64,
    /// Fitted rate `-ln(gap(t_end) / gap(0)) / t_end`.
    pub measured_rate: f64,
    /// Largest relative deviation of `gap(t) / gap(0)` from `exp(-2 c t)`.
    pub weak_deviation: f64,
}

impl RegimeDiagnostics {
    /// Final relative gap.
    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().unwrap_or(&f64::NAN)
    }

    /// CSV with columns `t, gap, predicted` where `predicted = gap(0) exp(-2 c t)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,gap,predicted\n");
        let g0 = self.gaps.first().copied().unwrap_or(0.0);
        for (t, g) in self.times.iter().zip(&self.gaps) {
            let _ = writeln!(s, "{t:.16e},{g:.16e},{:.16e}", g0 * (-2.0 * self.c * t).exp());
        }
        s
    }
}

fn relative_gap(a: &SurfaceState, b: &SurfaceState, grid: &PhaseGrid) -> f64 {
    let n1 = a.density_moment(grid);
    let n2 = b.density_moment(grid);
    n1.iter()
        .zip(&n2)
        .map(|(x, y)| (x - y).abs() / (x + y))
        .fold(0.0, f64::max)
}

/// Runs the channel solver in each regime from asymmetric equilibrium layers and records the
/// density gap, the sum-trajectory error and the exchange-rate comparison.
pub fn run_coupling_regime_study(regimes: &[CouplingRegime], sc: &CouplingScenario) -> Result<Vec<RegimeDiagnostics>> {
    if !(sc.n1 > 0.0 && sc.n2 > 0.0) || sc.n1 == sc.n2 {
        return Err(Error::Domain("the coupling study needs distinct positive layer densities".into()));
    }
    let w = wall(sc.w_m, sc.z_m)?;
    let q = QuadratureSpec::default();
    let energy = EnergyGrid::aligned(sc.nv, sc.v_max, sc.ne, sc.e_max, w.separatrix())?;
    let theta = ThetaOperator::new(&w, &energy.ez, &q)?;
    let c = compute_exchange_c(&w, &q)?;
    let length = 1.0;
    let dx = length / sc.nx as f64;
    regimes
        .iter()
        .map(|&regime| {
            let t_end = match regime {
                CouplingRegime::Strong => 5.0 * sc.epsilon * sc.tau_ms,
                _ => sc.t_final,
            };
            let dt0 = sc.courant * sc.epsilon * dx / sc.v_max;
            let steps = (t_end / dt0).ceil() as usize;
            let dt = t_end / steps as f64;
            let grid = PhaseGrid::new(0.0, length, sc.nx, energy.clone(), dt, sc.epsilon)?;
            let force = vec![0.0; sc.nx];
            let solver = ChannelSolver::new(&grid, &theta, sc.tau_ms, &force, regime)?;
            let single = TrappedSolver::new(&grid, &theta, sc.tau_ms, &force)?;
            let g1 = SurfaceState::equilibrium(&grid, &theta, |_| sc.n1);
            let g2 = SurfaceState::equilibrium(&grid, &theta, |_| sc.n2);
            let mut st = ChannelState::new(g1, g2, regime, sc.epsilon)?;
            let mut times = vec![0.0];
            let mut gaps = vec![relative_gap(&st.g1, &st.g2, &grid)];
            let mut sum_error = 0.0_f64;
            for s in 0..steps {
                let mut reference = st.sum();
                single.step(&mut reference)?;
                solver.step(&mut st)?;
                let sum = st.sum();
                let scale = reference.g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let dev = sum.g.iter().zip(&reference.g).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                sum_error = sum_error.max(dev / scale);
                times.push((s + 1) as f64 * dt);
                gaps.push(relative_gap(&st.g1, &st.g2, &grid));
            }
            let g0 = gaps[0];
            let measured_rate = -(gaps[gaps.len() - 1] / g0).ln() / t_end;
            let weak_deviation = times
                .iter()
                .zip(&gaps)
                .map(|(t, g)| {
                    let p = (-2.0 * c * t).exp();
                    (g / g0 - p).abs() / p
                })
                .fold(0.0, f64::max);
            Ok(RegimeDiagnostics {
                regime,
                times,
                gaps,
                sum_error,
                c,
                measured_rate,
                weak_deviation,
            })
        })
        .collect()
}
