//! Scenario dispatch: builds the solver named by a configuration, advances it and writes the
//! outputs.
//!
//! Initial densities are `N0(x) = 1 + A exp(-(x - x_c)^2 / (2 s^2))` with `x_c` the interval
//! midpoint, the tangential force derives from `U(x) = a cos(2 pi (x - x_min) / L)` and the
//! non-isothermal temperature is `T(x) = 1 + b sin(2 pi (x - x_min) / L)`. A fixed `dt` that
//! does not divide `t_final` is shortened to the next step that does.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{AmbientMode, NormalSpec, ScenarioConfig, ScenarioKind, StepSize};
use super::snapshot::{write_snapshot_binary, write_text, DensityTable, SnapshotHeader};
use crate::diffusion_solvers::{
    coefficients_at, compute_coefficients, compute_d0n, compute_exchange_c, DiffusionGrid, DiffusionSolver,
    TimeScheme,
};
use crate::equilibrium_collision::{Axis, EnergyGrid, ThetaBarOperator, ThetaOperator};
use crate::error::{Error, Result};
use crate::hierarchy_harness::{
    run_coupling_regime_study, run_diffusion_limit_study, run_homogenization_study, CouplingScenario,
    DiffusionLimitScenario, HomogenizationScenario,
};
use crate::kinetic_solvers::{
    AmbientBoundary, ChannelSolver, ChannelState, CouplingRegime, FineSolver, MesoSolver, PhaseGrid, SurfaceState,
    TrappedSolver, TwoGroupSolver,
};
use crate::potential_geometry::{NormalPotential, QuadratureSpec};

/// Fraction of the stability bound used by `dt = "auto"`.
pub const AUTO_COURANT: f64 = 0.8;

/// Default final time of the time-dependent scenarios.
pub const DEFAULT_T_FINAL: f64 = 0.1;

/// Command-line overrides of the `[output]` section.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Output directory.
    pub out_dir: Option<PathBuf>,
    /// Steps between snapshots.
    pub snapshot_every: Option<usize>,
}

/// Outcome of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Scenario kind.
    pub kind: ScenarioKind,
    /// Number of time steps (zero for tables and studies).
    pub steps: usize,
    /// Time step.
    pub dt: f64,
    /// Final time reached.
    pub t_final: f64,
    /// Total mass at the start and at the end.
    pub mass: Option<(f64, f64)>,
    /// Files written, in creation order.
    pub files: Vec<PathBuf>,
    /// Pass flag of a study.
    pub passed: Option<bool>,
    /// Human-readable report of a study.
    pub report: Option<String>,
}

impl RunSummary {
    /// Relative mass change `(M_end - M_0) / M_0`.
    pub fn mass_drift(&self) -> Option<f64> {
        self.mass.map(|(a, b)| if a != 0.0 { (b - a) / a } else { b - a })
    }

    /// One-line summary.
    pub fn line(&self) -> String {
        let mut s = format!("{}: ", self.kind);
        if self.steps > 0 {
            let _ = write!(s, "{} steps of dt = {:.6e} to t = {:.6e}", self.steps, self.dt, self.t_final);
        } else {
            s.push_str("done");
        }
        if let Some(d) = self.mass_drift() {
            let _ = write!(s, ", mass drift {d:.3e}");
        }
        if let Some(p) = self.passed {
            s.push_str(if p { ", PASS" } else { ", FAIL" });
        }
        let _ = write!(s, ", {} file(s) written", self.files.len());
        s
    }
}

/// Output directory and snapshot schedule of one run.
struct Sink {
    dir: PathBuf,
    every: usize,
    binary: bool,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Self> {
        let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir,
            every: opts.snapshot_every.unwrap_or(cfg.output.snapshot_every),
            binary: cfg.output.binary,
            files: Vec::new(),
        })
    }

    fn wants(&self, step: usize, last: usize) -> bool {
        step == 0 || step == last || (self.every > 0 && step % self.every == 0)
    }

    fn table(&self, name: &str) -> Result<DensityTable> {
        DensityTable::create(self.dir.join(format!("{name}.csv")))
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn dump(&mut self, name: &str, index: u64, dims: (usize, usize, usize), values: &[f64]) -> Result<()> {
        if !self.binary {
            return Ok(());
        }
        let sub = self.dir.join("snapshots");
        fs::create_dir_all(&sub).map_err(|e| Error::io(format!("creating {}", sub.display()), e))?;
        let path = sub.join(format!("{name}_{index:06}.bin"));
        let header = SnapshotHeader {
            nx: dims.0 as u64,
            nv: dims.1 as u64,
            ne: dims.2 as u64,
            index,
        };
        write_snapshot_binary(&path, header, values)?;
        self.files.push(path);
        Ok(())
    }
}

/// One field recorded at each snapshot.
struct Field<'a> {
    name: &'a str,
    n: Vec<f64>,
    phi: Vec<f64>,
    raw: &'a [f64],
    dims: (usize, usize, usize),
}

/// Time loop shared by every time-dependent scenario.
fn drive<S>(
    sink: &mut Sink,
    names: &[&str],
    x: &[f64],
    dx: f64,
    steps: usize,
    dt: f64,
    state: &mut S,
    mut advance: impl FnMut(&mut S) -> Result<()>,
    observe: impl Fn(&S) -> Vec<Field<'_>>,
) -> Result<(f64, f64)> {
    let mut tables = names.iter().map(|n| sink.table(n)).collect::<Result<Vec<_>>>()?;
    let mass = |fields: &[Field<'_>]| fields.iter().map(|f| f.n.iter().sum::<f64>() * dx).sum::<f64>();
    let mut index = 0u64;
    let mut record = |sink: &mut Sink, tables: &mut [DensityTable], t: f64, fields: &[Field<'_>]| -> Result<()> {
        for (table, f) in tables.iter_mut().zip(fields) {
            table.append(t, x, &f.n, &f.phi)?;
            sink.dump(f.name, index, f.dims, f.raw)?;
        }
        index += 1;
        Ok(())
    };
    let fields = observe(state);
    let m0 = mass(&fields);
    record(sink, &mut tables, 0.0, &fields)?;
    drop(fields);
    let mut m1 = m0;
    for step in 1..=steps {
        advance(state)?;
        if sink.wants(step, steps) {
            let fields = observe(state);
            if step == steps {
                m1 = mass(&fields);
            }
            record(sink, &mut tables, step as f64 * dt, &fields)?;
        }
    }
    for t in tables {
        let path = t.finish()?;
        sink.files.push(path);
    }
    Ok((m0, m1))
}

fn fit_steps(t_final: f64, dt: StepSize, auto_bound: f64) -> Result<(usize, f64)> {
    let target = match dt {
        StepSize::Auto => AUTO_COURANT * auto_bound,
        StepSize::Fixed(d) => d,
    };
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Domain(format!("cannot derive a time step (bound {auto_bound})")));
    }
    let steps = ((t_final / target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, t_final / steps as f64))
}

fn quadrature() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn normal(cfg: &ScenarioConfig) -> Result<NormalPotential> {
    cfg.normal
        .as_ref()
        .ok_or_else(|| Error::Validation(vec![format!("kind {} requires section [potential.normal]", cfg.kind)]))?
        .build()
}

fn initial_density(cfg: &ScenarioConfig) -> impl Fn(f64) -> f64 {
    let xc = cfg.grid.x_min + 0.5 * cfg.grid.length;
    let a = cfg.physics.initial_amplitude;
    let s = cfg.physics.initial_width;
    move |x| 1.0 + a * (-(x - xc) * (x - xc) / (2.0 * s * s)).exp()
}

/// `U'(x)` of `U(x) = a cos(2 pi (x - x_min) / L)`.
fn force_derivative(cfg: &ScenarioConfig) -> impl Fn(f64) -> f64 {
    let k = 2.0 * PI / cfg.grid.length;
    let a = cfg.physics.force_amplitude;
    let x0 = cfg.grid.x_min;
    move |x| -a * k * (k * (x - x0)).sin()
}

fn temperature(cfg: &ScenarioConfig) -> impl Fn(f64) -> f64 {
    let k = 2.0 * PI / cfg.grid.length;
    let b = cfg.physics.temperature_amplitude;
    let x0 = cfg.grid.x_min;
    move |x| 1.0 + b * (k * (x - x0)).sin()
}

fn t_final(cfg: &ScenarioConfig) -> f64 {
    cfg.grid.t_final.unwrap_or(DEFAULT_T_FINAL)
}

fn phase_grid(cfg: &ScenarioConfig, energy: EnergyGrid, dt: f64, epsilon: f64) -> Result<PhaseGrid> {
    let g = &cfg.grid;
    let mut grid = PhaseGrid::new(g.x_min, g.length, g.nx, energy, dt, epsilon)?;
    grid.epsilon0 = cfg.physics.epsilon0;
    grid.boundary = g.boundary;
    grid.scheme = g.scheme;
    grid.validate()?;
    Ok(grid)
}

fn cell_average_of_faces(j: &[f64]) -> Vec<f64> {
    let n = j.len();
    (0..n).map(|i| 0.5 * (j[(i + n - 1) % n] + j[i])).collect()
}

/// Reads, validates and runs a scenario.
pub fn run_config_file(path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    run_scenario(&super::config::parse_config(path)?, opts)
}

/// Runs a validated scenario and writes its outputs.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut sink = Sink::new(cfg, opts)?;
    let mut summary = RunSummary {
        kind: cfg.kind,
        steps: 0,
        dt: 0.0,
        t_final: 0.0,
        mass: None,
        files: Vec::new(),
        passed: None,
        report: None,
    };
    match cfg.kind {
        ScenarioKind::TrappedKinetic | ScenarioKind::TwoGroup | ScenarioKind::Channel => {
            run_surface(cfg, &mut sink, &mut summary)?
        }
        ScenarioKind::Mesoscopic | ScenarioKind::FineTangential => run_tangential(cfg, &mut sink, &mut summary)?,
        ScenarioKind::DiffusionIso | ScenarioKind::DiffusionNoniso | ScenarioKind::CoupledDiffusion => {
            run_diffusion(cfg, &mut sink, &mut summary)?
        }
        ScenarioKind::Coeffs => run_coeffs(cfg, &mut sink)?,
        ScenarioKind::StudyDiffusionLimit | ScenarioKind::StudyHomogenization | ScenarioKind::StudyCoupling => {
            run_study(cfg, &mut sink, &mut summary)?
        }
    }
    summary.files = sink.files;
    Ok(summary)
}

fn run_surface(cfg: &ScenarioConfig, sink: &mut Sink, summary: &mut RunSummary) -> Result<()> {
    let w = normal(cfg)?;
    let g = &cfg.grid;
    let eps = cfg.physics.epsilon;
    let tau = cfg.physics.tau_ms;
    let energy = EnergyGrid::aligned(g.nv, g.v_max, g.ne, g.e_max, w.separatrix())?;
    let theta = ThetaOperator::new(&w, &energy.ez, &quadrature())?;
    let probe = phase_grid(cfg, energy.clone(), 1.0, eps)?;
    let dx = probe.dx();
    let x = probe.x_centers();
    let force: Vec<f64> = x.iter().map(|x| force_derivative(cfg)(*x)).collect();
    let vmax = energy.x_axis.centers().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let fmax = force.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
    let dv_min = energy.x_axis.widths().iter().copied().fold(f64::INFINITY, f64::min);
    let mut bound = 0.9 * eps * dx / vmax;
    if fmax > 0.0 {
        bound = bound.min(0.9 * eps * dv_min / fmax);
    }
    let tf = t_final(cfg);
    let (steps, dt) = fit_steps(tf, g.dt, bound)?;
    let grid = phase_grid(cfg, energy, dt, eps)?;
    let n0 = initial_density(cfg);
    let dims = (grid.nx, grid.rows(), grid.ne());
    let surface_fields = |name: &'static str, s: &SurfaceState| Field {
        name,
        n: s.density_moment(&grid),
        phi: s.flux_moment(&grid),
        raw: &[],
        dims,
    };
    let mass = match cfg.kind {
        ScenarioKind::TrappedKinetic => {
            let solver = TrappedSolver::new(&grid, &theta, tau, &force)?;
            let mut st = SurfaceState::equilibrium(&grid, &theta, &n0);
            drive(sink, &["density"], &x, dx, steps, dt, &mut st, |s| solver.step(s).map(|_| ()), |s| {
                vec![Field {
                    raw: &s.g,
                    ..surface_fields("density", s)
                }]
            })?
        }
        ScenarioKind::TwoGroup => {
            let ambient = match cfg.physics.ambient {
                AmbientMode::Closed => AmbientBoundary::Closed,
                AmbientMode::Maxwellian(d) => AmbientBoundary::maxwellian(&grid, &theta, |_| d)?,
            };
            let solver = TwoGroupSolver::new(&grid, &theta, tau, &force, ambient)?;
            let mut st = SurfaceState::equilibrium(&grid, &theta, &n0);
            drive(sink, &["density"], &x, dx, steps, dt, &mut st, |s| solver.step(s).map(|_| ()), |s| {
                vec![Field {
                    raw: &s.g,
                    ..surface_fields("density", s)
                }]
            })?
        }
        _ => {
            let solver = ChannelSolver::new(&grid, &theta, tau, &force, cfg.physics.regime)?;
            let (a, b) = (cfg.physics.n1, cfg.physics.n2);
            let g1 = SurfaceState::equilibrium(&grid, &theta, |x| a * n0(x));
            let g2 = SurfaceState::equilibrium(&grid, &theta, |x| b * n0(x));
            let mut st = ChannelState::new(g1, g2, cfg.physics.regime, eps)?;
            drive(sink, &["layer1", "layer2"], &x, dx, steps, dt, &mut st, |s| solver.step(s).map(|_| ()), |s| {
                vec![
                    Field {
                        raw: &s.g1.g,
                        ..surface_fields("layer1", &s.g1)
                    },
                    Field {
                        raw: &s.g2.g,
                        ..surface_fields("layer2", &s.g2)
                    },
                ]
            })?
        }
    };
    summary.steps = steps;
    summary.dt = dt;
    summary.t_final = tf;
    summary.mass = Some(mass);
    Ok(())
}

fn run_tangential(cfg: &ScenarioConfig, sink: &mut Sink, summary: &mut RunSummary) -> Result<()> {
    let w = normal(cfg)?;
    let spec = cfg
        .tangential
        .as_ref()
        .ok_or_else(|| Error::Validation(vec![format!("kind {} requires section [potential.tangential]", cfg.kind)]))?;
    let u = spec.build()?;
    let g = &cfg.grid;
    let tau = cfg.physics.tau_ms;
    let q = quadrature();
    let ez = Axis::separatrix_aligned(g.ne, g.e_max, w.separatrix())?;
    let theta = ThetaOperator::new(&w, &ez, &q)?;
    let ex = if u.is_flat() {
        Axis::uniform_symmetric(g.nex, g.ex_max)?
    } else {
        Axis::separatrix_aligned(g.nex, g.ex_max, u.separatrix())?
    };
    let bar = ThetaBarOperator::new(&u, &ex, &q)?;
    let dx = g.length / g.nx as f64;
    let vmax = bar.velocity().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let bound = 0.9 * dx / vmax.max(g.ex_max);
    let tf = t_final(cfg);
    let (steps, dt) = fit_steps(tf, g.dt, bound)?;
    let energy = EnergyGrid::new(ex, ez)?;
    let grid = phase_grid(cfg, energy, dt, 1.0)?;
    let x = grid.x_centers();
    let dims = (grid.nx, grid.rows(), grid.ne());
    let meso = MesoSolver::new(&grid, &theta, &bar, tau)?;
    let n0 = initial_density(cfg);
    let mut m = meso.equilibrium(&n0);
    let mass = if cfg.kind == ScenarioKind::Mesoscopic {
        drive(sink, &["density"], &x, dx, steps, dt, &mut m, |s| meso.step(s).map(|_| ()), |s| {
            vec![Field {
                name: "density",
                n: meso.density_moment(s),
                phi: meso.flux_moment(s),
                raw: &s.h,
                dims,
            }]
        })?
    } else {
        let fine = FineSolver::new(&grid, &theta, &u, spec.delta(), tau)?;
        let mut f = fine.state_from_meso(&m)?;
        drive(sink, &["density"], &x, dx, steps, dt, &mut f, |s| fine.step(s).map(|_| ()), |s| {
            vec![Field {
                name: "density",
                n: fine.density_moment(s),
                phi: fine.flux_moment(s),
                raw: &s.h,
                dims,
            }]
        })?
    };
    summary.steps = steps;
    summary.dt = dt;
    summary.t_final = tf;
    summary.mass = Some(mass);
    Ok(())
}

fn run_diffusion(cfg: &ScenarioConfig, sink: &mut Sink, summary: &mut RunSummary) -> Result<()> {
    let g = &cfg.grid;
    let tau = cfg.physics.tau_ms;
    let q = quadrature();
    let grid = DiffusionGrid::new(g.x_min, g.length, g.nx)?;
    let dx = grid.dx();
    let x = grid.centers();
    let force_faces: Vec<f64> = grid.faces().iter().map(|x| force_derivative(cfg)(*x)).collect();
    let w = cfg.normal.as_ref().map(NormalSpec::build).transpose()?;
    let build = |dt: f64, scheme: TimeScheme| -> Result<DiffusionSolver> {
        match cfg.kind {
            ScenarioKind::DiffusionNoniso => {
                let w = w.as_ref().ok_or_else(|| Error::Domain("missing normal potential".into()))?;
                let temp: Vec<f64> = x.iter().map(|x| temperature(cfg)(*x)).collect();
                DiffusionSolver::non_isothermal(
                    grid.clone(),
                    |t| coefficients_at(w, tau, t, &q),
                    tau,
                    &temp,
                    &force_faces,
                    dt,
                    scheme,
                )
            }
            _ => {
                let d0n = match &w {
                    Some(w) => compute_d0n(w, tau, &q)?,
                    None => 0.5 * tau,
                };
                DiffusionSolver::isothermal(grid.clone(), d0n, tau, &force_faces, dt, scheme)
            }
        }
    };
    let probe = build(f64::MIN_POSITIVE, TimeScheme::ForwardEuler)?;
    let mut bound = probe.explicit_bound();
    let exchange = if cfg.kind == ScenarioKind::CoupledDiffusion {
        let w = w.as_ref().ok_or_else(|| Error::Domain("missing normal potential".into()))?;
        let c = compute_exchange_c(w, &q)? * cfg.physics.regime.scale(cfg.physics.epsilon);
        if c > 0.0 {
            bound = bound.min(0.5 / c / AUTO_COURANT);
        }
        c
    } else {
        0.0
    };
    let tf = t_final(cfg);
    let (steps, dt) = fit_steps(tf, g.dt, bound)?;
    let solver = build(dt, g.time_scheme)?;
    let n0 = initial_density(cfg);
    let fields_of = |name: &'static str, n: &[f64]| Field {
        name,
        n: n.to_vec(),
        phi: cell_average_of_faces(&solver.fluxes(n)),
        raw: &[],
        dims: (n.len(), 1, 1),
    };
    let mass = if cfg.kind == ScenarioKind::CoupledDiffusion {
        let mut st = (
            x.iter().map(|x| cfg.physics.n1 * n0(*x)).collect::<Vec<_>>(),
            x.iter().map(|x| cfg.physics.n2 * n0(*x)).collect::<Vec<_>>(),
        );
        drive(
            sink,
            &["layer1", "layer2"],
            &x,
            dx,
            steps,
            dt,
            &mut st,
            |(a, b)| solver.step_coupled(a, b, exchange),
            |(a, b)| {
                vec![
                    Field {
                        raw: a,
                        ..fields_of("layer1", a)
                    },
                    Field {
                        raw: b,
                        ..fields_of("layer2", b)
                    },
                ]
            },
        )?
    } else {
        let mut n: Vec<f64> = x.iter().map(|x| n0(*x)).collect();
        drive(sink, &["density"], &x, dx, steps, dt, &mut n, |n| solver.step(n), |n| {
            vec![Field {
                raw: n,
                ..fields_of("density", n)
            }]
        })?
    };
    summary.steps = steps;
    summary.dt = dt;
    summary.t_final = tf;
    summary.mass = Some(mass);
    Ok(())
}

/// Coefficient table text with columns `W_m,U_m,tau_ms,gamma,D0n,D0T@T1N1,C0p,C0T,c`, one
/// row per well depth (the `[sweep]` values, or the configured depth).
pub fn coefficient_table(cfg: &ScenarioConfig) -> Result<String> {
    let spec = cfg
        .normal
        .as_ref()
        .ok_or_else(|| Error::Validation(vec!["kind coeffs requires section [potential.normal]".into()]))?;
    let u_m = cfg.tangential.as_ref().map_or(0.0, |t| t.u_m());
    let tau = cfg.physics.tau_ms;
    let specs: Vec<NormalSpec> = if cfg.sweep.values.is_empty() || matches!(spec, NormalSpec::Flat | NormalSpec::Tabulated { .. }) {
        vec![spec.clone()]
    } else {
        cfg.sweep.values.iter().map(|w| spec.with_depth(*w)).collect()
    };
    let q = quadrature();
    let mut s = String::from("W_m,U_m,tau_ms,gamma,D0n,D0T@T1N1,C0p,C0T,c\n");
    for sp in specs {
        let w = sp.build()?;
        let c = compute_coefficients(&w, tau, &q)?;
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            w.w_m, u_m, tau, c.gamma, c.d0n, c.d0t, c.c0p, c.c0t, c.c_exchange
        );
    }
    Ok(s)
}

fn run_coeffs(cfg: &ScenarioConfig, sink: &mut Sink) -> Result<()> {
    let table = coefficient_table(cfg)?;
    sink.text("coefficients.csv", &table)
}

fn depth_and_minimum(cfg: &ScenarioConfig) -> Result<(f64, f64)> {
    match &cfg.normal {
        Some(spec) => spec.depth_and_minimum(),
        None => Err(Error::Validation(vec![format!(
            "kind {} requires section [potential.normal]",
            cfg.kind
        )])),
    }
}

fn run_study(cfg: &ScenarioConfig, sink: &mut Sink, summary: &mut RunSummary) -> Result<()> {
    let g = &cfg.grid;
    let p = &cfg.physics;
    let (w_m, z_m) = depth_and_minimum(cfg)?;
    match cfg.kind {
        ScenarioKind::StudyDiffusionLimit => {
            let base = DiffusionLimitScenario::default();
            let sc = DiffusionLimitScenario {
                x_min: g.x_min,
                length: g.length,
                nx: g.nx,
                nv: g.nv,
                ne: g.ne,
                v_max: g.v_max,
                e_max: g.e_max,
                w_m,
                z_m,
                tau_ms: p.tau_ms,
                t_final: g.t_final.unwrap_or(base.t_final),
                amplitude: p.initial_amplitude,
                width: p.initial_width,
                force_amplitude: p.force_amplitude,
            };
            let eps = if cfg.sweep.values.is_empty() { vec![0.1, 0.05, 0.025] } else { cfg.sweep.values.clone() };
            let r = run_diffusion_limit_study(&eps, &sc)?;
            sink.text("diffusion_limit.csv", &r.to_csv())?;
            summary.passed = Some(r.passed);
            summary.report = Some(r.summary());
        }
        ScenarioKind::StudyHomogenization => {
            let base = HomogenizationScenario::default();
            let u_m = cfg.tangential.as_ref().map_or(0.0, |t| t.u_m());
            let sc = HomogenizationScenario {
                length: g.length,
                u_m,
                nex: g.nex,
                ex_max: g.ex_max,
                ne: g.ne,
                e_max: g.e_max,
                w_m,
                z_m,
                tau_ms: p.tau_ms,
                t_final: g.t_final.unwrap_or(base.t_final),
                amplitude: p.initial_amplitude,
                ..base
            };
            let deltas = if cfg.sweep.values.is_empty() { vec![0.04, 0.02, 0.01] } else { cfg.sweep.values.clone() };
            let r = run_homogenization_study(&deltas, &sc)?;
            sink.text("homogenization.csv", &r.to_csv())?;
            summary.passed = Some(r.monotone);
            summary.report = Some(r.summary());
        }
        _ => {
            let base = CouplingScenario::default();
            let sc = CouplingScenario {
                epsilon: p.epsilon,
                w_m,
                z_m,
                tau_ms: p.tau_ms,
                nx: g.nx,
                nv: g.nv,
                ne: g.ne,
                v_max: g.v_max,
                e_max: g.e_max,
                n1: p.n1,
                n2: p.n2,
                t_final: g.t_final.unwrap_or(base.t_final),
                ..base
            };
            let regimes = if cfg.sweep.regimes.is_empty() {
                vec![CouplingRegime::Strong, CouplingRegime::Moderate, CouplingRegime::Weak]
            } else {
                cfg.sweep.regimes.clone()
            };
            let diags = run_coupling_regime_study(&regimes, &sc)?;
            let mut table = String::from("regime,c,measured_rate,final_gap,sum_error,weak_deviation\n");
            let mut report = String::new();
            for d in &diags {
                let name = regime_name(d.regime);
                sink.text(&format!("coupling_{name}.csv"), &d.to_csv())?;
                let _ = writeln!(
                    table,
                    "{name},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    d.c,
                    d.measured_rate,
                    d.final_gap(),
                    d.sum_error,
                    d.weak_deviation
                );
                let _ = writeln!(
                    report,
                    "{name}: final gap {:.3e}, rate {:.4e} (c = {:.4e}), sum error {:.2e}",
                    d.final_gap(),
                    d.measured_rate,
                    d.c,
                    d.sum_error
                );
            }
            sink.text("coupling.csv", &table)?;
            summary.passed = Some(diags.iter().all(|d| d.sum_error <= 1e-12));
            summary.report = Some(report.trim_end().to_string());
        }
    }
    Ok(())
}

fn regime_name(r: CouplingRegime) -> &'static str {
    match r {
        CouplingRegime::Strong => "strong",
        CouplingRegime::Moderate => "moderate",
        CouplingRegime::Weak => "weak",
    }
}
