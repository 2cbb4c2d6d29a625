//! Split solvers of the surface models in diffusion time:
//! `d_t g + (v/eps) d_x g - (U'/eps) d_v g = (Theta[g] l M - g) / (eps^2 tau_ms) + exchange`.
//!
//! Each step runs half a Vlasov step, the `x` transport, half a Vlasov step and the implicit
//! relaxation, in that order.

use rayon::prelude::*;

use super::collision::{CollisionPlan, MassCorrection, PairOperator};
use super::transport::{vlasov_slab, XSweep};
use super::{clip_slab, tangential_quadrature, PhaseGrid, StepReport, SurfaceState, TransportScheme};
use crate::equilibrium_collision::ThetaOperator;
use crate::error::{Error, Result};

/// Transport part shared by the surface solvers.
#[derive(Debug, Clone)]
struct SurfaceCore {
    grid: PhaseGrid,
    speed: Vec<f64>,
    accel: Vec<f64>,
    w: Vec<f64>,
    mx: Vec<f64>,
    c_x: f64,
}

impl SurfaceCore {
    fn new(grid: &PhaseGrid, theta: &ThetaOperator, force: &[f64]) -> Result<Self> {
        grid.validate()?;
        if theta.ne() != grid.ne() {
            return Err(Error::GridMismatch(format!(
                "relaxation operator has {} energy cells, grid has {}",
                theta.ne(),
                grid.ne()
            )));
        }
        if force.len() != grid.nx {
            return Err(Error::GridMismatch(format!(
                "force has {} samples, grid has {} cells",
                force.len(),
                grid.nx
            )));
        }
        let eps = grid.epsilon;
        let speed: Vec<f64> = grid.energy.x_axis.centers().iter().map(|v| v / eps).collect();
        let vmax = speed.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        grid.check_cfl(grid.dt * vmax / grid.dx(), "x transport")?;
        let accel: Vec<f64> = force.iter().map(|f| -f / eps).collect();
        let amax = accel.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        let dv_min = grid.energy.x_axis.widths().iter().copied().fold(f64::INFINITY, f64::min);
        grid.check_cfl(grid.dt * amax / dv_min, "Vlasov")?;
        let (w, mx, c_x) = tangential_quadrature(&grid.energy);
        Ok(Self {
            grid: grid.clone(),
            speed,
            accel,
            w,
            mx,
            c_x,
        })
    }

    fn lambda(&self, tau_ms: f64) -> Result<f64> {
        if !(tau_ms > 0.0 && tau_ms.is_finite()) {
            return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
        }
        Ok(self.grid.dt / (self.grid.epsilon * self.grid.epsilon * tau_ms))
    }

    fn check_state(&self, s: &SurfaceState) -> Result<()> {
        if s.nx != self.grid.nx || s.nv != self.grid.rows() || s.ne != self.grid.ne() || s.g.len() != self.grid.len() {
            return Err(Error::GridMismatch(format!(
                "state is {}x{}x{}, grid is {}x{}x{}",
                s.nx,
                s.nv,
                s.ne,
                self.grid.nx,
                self.grid.rows(),
                self.grid.ne()
            )));
        }
        Ok(())
    }

    fn half_vlasov(&self, g: &mut [f64]) {
        let ne = self.grid.ne();
        let dv = self.grid.energy.x_axis.widths();
        let half = 0.5 * self.grid.dt;
        g.par_chunks_mut(self.grid.slab())
            .zip(&self.accel)
            .for_each(|(slab, a)| vlasov_slab(slab, ne, *a, half, dv));
    }

    /// Vlasov-transport-Vlasov part of the step.
    fn advect(&self, g: &[f64]) -> Vec<f64> {
        let mut a = g.to_vec();
        self.half_vlasov(&mut a);
        let mut b = vec![0.0; a.len()];
        XSweep {
            nx: self.grid.nx,
            rows: self.grid.rows(),
            ne: self.grid.ne(),
            speed: &self.speed,
            ratio: self.grid.dt / self.grid.dx(),
            boundary: self.grid.boundary,
            scheme: self.grid.scheme,
        }
        .run(&a, &mut b);
        self.half_vlasov(&mut b);
        b
    }

    fn clip(&self, g: &mut [f64]) -> f64 {
        let max = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let de = self.grid.energy.ez.widths();
        let min = g
            .par_chunks_mut(self.grid.slab())
            .map(|slab| clip_slab(slab, &self.w, de))
            .reduce(|| 0.0, f64::min);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// Single-group solver of the trapped surface equation.
#[derive(Debug, Clone)]
pub struct TrappedSolver {
    core: SurfaceCore,
    plan: CollisionPlan,
}

impl TrappedSolver {
    /// `force` holds `U'(x)` at the cell centres.
    pub fn new(grid: &PhaseGrid, theta: &ThetaOperator, tau_ms: f64, force: &[f64]) -> Result<Self> {
        let core = SurfaceCore::new(grid, theta, force)?;
        let lambda = core.lambda(tau_ms)?;
        let plan = CollisionPlan::new(
            theta,
            lambda,
            PairOperator::relaxation(theta.ne(), lambda),
            MassCorrection::Conserve,
        )?;
        Ok(Self { core, plan })
    }

    /// Grid of the solver.
    pub fn grid(&self) -> &PhaseGrid {
        &self.core.grid
    }

    /// Relaxation factor `dt / (eps^2 tau_ms)`.
    pub fn lambda(&self) -> f64 {
        self.plan.lambda()
    }

    /// Implicit relaxation of every `x` slab in place.
    pub fn relax(&self, g: &mut [f64]) -> Result<()> {
        let c = &self.core;
        g.par_chunks_mut(c.grid.slab())
            .try_for_each(|slab| self.plan.apply(slab, None, &c.w, &c.mx, c.c_x))
    }

    /// Advances one time step.
    pub fn step(&self, state: &mut SurfaceState) -> Result<StepReport> {
        self.core.check_state(state)?;
        let mut g = self.core.advect(&state.g);
        self.relax(&mut g)?;
        let undershoot = self.core.clip(&mut g);
        state.g = g;
        Ok(StepReport { undershoot })
    }
}

/// Incoming bulk distribution at the layer edge.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbientBoundary {
    /// No exchange with the bulk.
    Closed,
    /// Prescribed `f_s(x, v_x, e_z)` in the state layout.
    Prescribed(Vec<f64>),
}

impl AmbientBoundary {
    /// Validated prescribed distribution.
    pub fn prescribed(grid: &PhaseGrid, f_s: Vec<f64>) -> Result<Self> {
        if f_s.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "ambient distribution has {} values, grid has {}",
                f_s.len(),
                grid.len()
            )));
        }
        if f_s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("ambient distribution must be finite and nonnegative".into()));
        }
        Ok(Self::Prescribed(f_s))
    }

    /// Maxwellian `(n_b(x) / gamma_grid) M`, in detailed balance with a layer of density `n_b`.
    pub fn maxwellian(grid: &PhaseGrid, theta: &ThetaOperator, density: impl Fn(f64) -> f64) -> Result<Self> {
        let eq = SurfaceState::equilibrium(grid, theta, density);
        let ne = grid.ne();
        let f_s = eq
            .g
            .iter()
            .enumerate()
            .map(|(idx, g)| g / theta.l()[idx % ne])
            .collect();
        Self::prescribed(grid, f_s)
    }
}

/// Exchange diagnostics of a two-group step, evaluated on the post-step state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutfluxRecord {
    /// Indices of the positive free `e_z` cells.
    pub free_cells: Vec<usize>,
    /// Emitted bulk distribution `g / l` on positive free cells, index
    /// `(ix * nv + iv) * free_cells.len() + f`.
    pub emitted: Vec<f64>,
    /// Mass flux from the layer to the bulk per `x` cell.
    pub outflux: Vec<f64>,
    /// Mass flux from the bulk to the layer per `x` cell.
    pub influx: Vec<f64>,
}

/// Positive and negative member of the mirror pair containing `j`.
fn pair_of(theta: &ThetaOperator, j: usize) -> (usize, usize) {
    let m = theta.ne() - 1 - j;
    if theta.centers()[j] > 0.0 {
        (j, m)
    } else {
        (m, j)
    }
}

/// Exchange rates `1 / (2 tau_j)` on free cells, zero on trapped cells.
fn free_rates(theta: &ThetaOperator) -> Vec<f64> {
    (0..theta.ne())
        .map(|j| if theta.free()[j] { 0.5 / theta.tau(j) } else { 0.0 })
        .collect()
}

/// Two-group surface solver with free-molecule exchange against a prescribed ambient.
#[derive(Debug, Clone)]
pub struct TwoGroupSolver {
    core: SurfaceCore,
    plan: CollisionPlan,
    ambient: AmbientBoundary,
    rates: Vec<f64>,
    alpha: Vec<f64>,
    l: Vec<f64>,
    centers: Vec<f64>,
    free: Vec<bool>,
}

impl TwoGroupSolver {
    /// The exchange enters with unit coupling scale, `(1/eps) (l f_s - g(|e|)) / (2 tau_z)`.
    pub fn new(
        grid: &PhaseGrid,
        theta: &ThetaOperator,
        tau_ms: f64,
        force: &[f64],
        ambient: AmbientBoundary,
    ) -> Result<Self> {
        let core = SurfaceCore::new(grid, theta, force)?;
        let lambda = core.lambda(tau_ms)?;
        if let AmbientBoundary::Prescribed(f) = &ambient {
            if f.len() != grid.len() {
                return Err(Error::GridMismatch("ambient distribution does not match the grid".into()));
            }
        }
        let rates = free_rates(theta);
        let mu = grid.dt / grid.epsilon;
        let (pair, alpha) = match ambient {
            AmbientBoundary::Closed => (PairOperator::relaxation(theta.ne(), lambda), vec![0.0; theta.ne()]),
            AmbientBoundary::Prescribed(_) => {
                let alpha: Vec<f64> = rates.iter().map(|r| mu * r).collect();
                (PairOperator::two_group(theta, lambda, &alpha), alpha)
            }
        };
        let correction = if matches!(ambient, AmbientBoundary::Closed) {
            MassCorrection::Conserve
        } else {
            MassCorrection::Unscaled
        };
        let plan = CollisionPlan::new(theta, lambda, pair, correction)?;
        Ok(Self {
            core,
            plan,
            ambient,
            rates,
            alpha,
            l: theta.l().to_vec(),
            centers: theta.centers().to_vec(),
            free: theta.free().to_vec(),
        })
    }

    /// Advances one time step and reports the exchange with the bulk.
    pub fn step(&self, state: &mut SurfaceState) -> Result<(StepReport, OutfluxRecord)> {
        let c = &self.core;
        c.check_state(state)?;
        let slab = c.grid.slab();
        let ne = c.grid.ne();
        let mut g = c.advect(&state.g);
        match &self.ambient {
            AmbientBoundary::Closed => g
                .par_chunks_mut(slab)
                .try_for_each(|s| self.plan.apply(s, None, &c.w, &c.mx, c.c_x))?,
            AmbientBoundary::Prescribed(f_s) => g.par_chunks_mut(slab).zip(f_s.par_chunks(slab)).try_for_each(
                |(s, f)| {
                    let src: Vec<f64> = f
                        .iter()
                        .enumerate()
                        .map(|(idx, v)| {
                            let j = idx % ne;
                            self.alpha[j] * self.l[j] * v
                        })
                        .collect();
                    self.plan.apply(s, Some(&src), &c.w, &c.mx, c.c_x)
                },
            )?,
        }
        let undershoot = c.clip(&mut g);
        state.g = g;
        Ok((StepReport { undershoot }, self.record(state)))
    }

    fn record(&self, state: &SurfaceState) -> OutfluxRecord {
        let c = &self.core;
        let ne = c.grid.ne();
        let nv = c.grid.rows();
        let de = c.grid.energy.ez.widths();
        let free_cells: Vec<usize> = (0..ne).filter(|&j| self.free[j] && self.centers[j] > 0.0).collect();
        let nf = free_cells.len();
        let mut emitted = vec![0.0; c.grid.nx * nv * nf];
        let mut outflux = vec![0.0; c.grid.nx];
        let mut influx = vec![0.0; c.grid.nx];
        let inv_eps = 1.0 / c.grid.epsilon;
        for ix in 0..c.grid.nx {
            for iv in 0..nv {
                let base = (ix * nv + iv) * ne;
                for (f, &j) in free_cells.iter().enumerate() {
                    emitted[(ix * nv + iv) * nf + f] = state.g[base + j] / self.l[j];
                }
                for j in (0..ne).filter(|&j| self.free[j]) {
                    let p = if self.centers[j] > 0.0 { j } else { ne - 1 - j };
                    outflux[ix] += inv_eps * self.rates[j] * state.g[base + p] * c.w[iv] * de[j];
                    if let AmbientBoundary::Prescribed(f_s) = &self.ambient {
                        influx[ix] += inv_eps * self.rates[j] * self.l[j] * f_s[base + j] * c.w[iv] * de[j];
                    }
                }
            }
        }
        OutfluxRecord {
            free_cells,
            emitted,
            outflux,
            influx,
        }
    }
}

/// Strength of the inter-layer exchange in the channel model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    /// Coupling scale `1/eps`.
    Strong,
    /// Coupling scale `1`.
    Moderate,
    /// Coupling scale `eps`.
    Weak,
}

impl CouplingRegime {
    /// Coupling scale `kappa` multiplying the exchange term.
    pub fn scale(self, epsilon: f64) -> f64 {
        match self {
            CouplingRegime::Strong => 1.0 / epsilon,
            CouplingRegime::Moderate => 1.0,
            CouplingRegime::Weak => epsilon,
        }
    }
}

/// Distributions of the two channel walls.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// Layer 1.
    pub g1: SurfaceState,
    /// Layer 2.
    pub g2: SurfaceState,
    /// Coupling scale `kappa`.
    pub coupling_scale: f64,
}

impl ChannelState {
    /// Pairs two layers on the same grid.
    pub fn new(g1: SurfaceState, g2: SurfaceState, regime: CouplingRegime, epsilon: f64) -> Result<Self> {
        if (g1.nx, g1.nv, g1.ne) != (g2.nx, g2.nv, g2.ne) {
            return Err(Error::GridMismatch("channel layers must share one grid".into()));
        }
        Ok(Self {
            g1,
            g2,
            coupling_scale: regime.scale(epsilon),
        })
    }

    /// Summed distribution `g1 + g2`.
    pub fn sum(&self) -> SurfaceState {
        let mut s = self.g1.clone();
        for (a, b) in s.g.iter_mut().zip(&self.g2.g) {
            *a += b;
        }
        s
    }
}

/// Two-layer channel solver. Layer 1 gains `kappa/eps (g2(-|e|) - g1(|e|)) / (2 tau_z)` on free
/// cells and layer 2 the opposite amount, so the summed distribution follows the trapped
/// equation exactly. The step solves for the sum and the difference of the layers.
#[derive(Debug, Clone)]
pub struct ChannelSolver {
    core: SurfaceCore,
    sum_plan: CollisionPlan,
    diff_plan: CollisionPlan,
    alpha: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    regime: CouplingRegime,
}

impl ChannelSolver {
    /// The channel requires the linear upwind transport so that the layer sum commutes with
    /// the step.
    pub fn new(
        grid: &PhaseGrid,
        theta: &ThetaOperator,
        tau_ms: f64,
        force: &[f64],
        regime: CouplingRegime,
    ) -> Result<Self> {
        if grid.scheme != TransportScheme::Upwind {
            return Err(Error::Domain("the channel solver requires upwind transport".into()));
        }
        let core = SurfaceCore::new(grid, theta, force)?;
        let lambda = core.lambda(tau_ms)?;
        let mu = grid.dt * regime.scale(grid.epsilon) / grid.epsilon;
        let alpha: Vec<f64> = free_rates(theta).iter().map(|r| mu * r).collect();
        let sum_plan = CollisionPlan::new(
            theta,
            lambda,
            PairOperator::relaxation(theta.ne(), lambda),
            MassCorrection::Conserve,
        )?;
        let diff_plan = CollisionPlan::new(
            theta,
            lambda,
            PairOperator::channel_difference(theta, lambda, &alpha),
            MassCorrection::Unscaled,
        )?;
        let pairs = (0..theta.ne()).map(|j| pair_of(theta, j)).collect();
        Ok(Self {
            core,
            sum_plan,
            diff_plan,
            alpha,
            pairs,
            regime,
        })
    }

    /// Coupling regime.
    pub fn regime(&self) -> CouplingRegime {
        self.regime
    }

    /// Advances both layers one time step.
    pub fn step(&self, state: &mut ChannelState) -> Result<StepReport> {
        let c = &self.core;
        c.check_state(&state.g1)?;
        c.check_state(&state.g2)?;
        let slab = c.grid.slab();
        let ne = c.grid.ne();
        let mut g1 = c.advect(&state.g1.g);
        let mut g2 = c.advect(&state.g2.g);
        g1.par_chunks_mut(slab)
            .zip(g2.par_chunks_mut(slab))
            .try_for_each(|(a, b)| -> Result<()> {
                let mut s: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
                let mut d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
                self.sum_plan.apply(&mut s, None, &c.w, &c.mx, c.c_x)?;
                let mut src = vec![0.0; slab];
                for (row_s, row_src) in s.chunks_exact(ne).zip(src.chunks_exact_mut(ne)) {
                    for j in 0..ne {
                        if self.alpha[j] != 0.0 {
                            let (p, n) = self.pairs[j];
                            row_src[j] = self.alpha[j] * (row_s[n] - row_s[p]);
                        }
                    }
                }
                self.diff_plan.apply(&mut d, Some(&src), &c.w, &c.mx, c.c_x)?;
                for idx in 0..slab {
                    a[idx] = 0.5 * (s[idx] + d[idx]);
                    b[idx] = 0.5 * (s[idx] - d[idx]);
                }
                Ok(())
            })?;
        let u1 = c.clip(&mut g1);
        let u2 = c.clip(&mut g2);
        state.g1.g = g1;
        state.g2.g = g2;
        Ok(StepReport {
            undershoot: u1.min(u2),
        })
    }
}
