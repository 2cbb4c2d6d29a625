//! Time integrators for the kinetic surface models: the single-group trapped equation, the
//! two-group model with ambient exchange, the two-layer channel, the homogenized mesoscopic
//! model with its fine-grained reference, and an asymptotic-preserving micro-macro scheme.
//!
//! Phase-space arrays are flat with index `(ix * rows + i) * ne + k`, where `i` runs over the
//! tangential axis (`v_x` or `e_x`) and `k` over `e_z`.
//!
//! Surface models run in diffusion time: transport carries `1/epsilon`, relaxation
//! `1/(epsilon^2 tau_ms)`. The mesoscopic and fine models run in collision time with unit
//! transport speed scale and relaxation `1/tau_ms`.

pub mod collision;
pub mod fine;
pub mod meso;
pub mod micro_macro;
pub mod surface;
mod transport;

pub use collision::{CollisionPlan, MassCorrection, PairOperator};
pub use fine::{FineSolver, FineTangentialState};
pub use meso::{MesoSolver, MesoState};
pub use micro_macro::{MicroMacroSolver, MicroMacroState};
pub use surface::{
    AmbientBoundary, ChannelSolver, ChannelState, CouplingRegime, OutfluxRecord, TrappedSolver, TwoGroupSolver,
};

use crate::equilibrium_collision::{EnergyGrid, ThetaOperator};
use crate::error::{Error, Result};

/// Courant bound shared by transport and Vlasov advection.
pub const CFL_MAX: f64 = 0.9;

/// Boundary treatment in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XBoundary {
    /// Periodic interval.
    #[default]
    Periodic,
    /// Specular reflection at both ends.
    Reflective,
}

/// Spatial reconstruction of the `x` transport.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportScheme {
    /// First-order upwind.
    #[default]
    Upwind,
    /// Second-order MUSCL with the minmod limiter.
    Muscl,
}

/// Uniform `x` grid, velocity-energy grid and time-step parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    /// Left end of the `x` interval.
    pub x_min: f64,
    /// Length of the `x` interval.
    pub length: f64,
    /// Number of `x` cells.
    pub nx: usize,
    /// Tangential and normal axes.
    pub energy: EnergyGrid,
    /// Time step.
    pub dt: f64,
    /// Scale parameter `epsilon`.
    pub epsilon: f64,
    /// Channel scale parameter `epsilon_0`.
    pub epsilon0: f64,
    /// Boundary treatment.
    pub boundary: XBoundary,
    /// Transport reconstruction.
    pub scheme: TransportScheme,
}

impl PhaseGrid {
    /// Periodic upwind grid with `epsilon_0 = 1`.
    pub fn new(x_min: f64, length: f64, nx: usize, energy: EnergyGrid, dt: f64, epsilon: f64) -> Result<Self> {
        let grid = Self {
            x_min,
            length,
            nx,
            energy,
            dt,
            epsilon,
            epsilon0: 1.0,
            boundary: XBoundary::Periodic,
            scheme: TransportScheme::Upwind,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks positivity of `dt`, `length`, `nx` and `epsilon in (0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || !(self.length > 0.0 && self.length.is_finite()) || !self.x_min.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "x grid needs nx > 0 and a positive length (nx = {}, length = {})",
                self.nx, self.length
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidGrid(format!("epsilon must be in (0,1], got {}", self.epsilon)));
        }
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return Err(Error::InvalidGrid(format!("epsilon0 must be positive, got {}", self.epsilon0)));
        }
        Ok(())
    }

    /// Cell width.
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    /// Cell centres.
    pub fn x_centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|i| self.x_min + (i as f64 + 0.5) * dx).collect()
    }

    /// Samples `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x_centers().into_iter().map(f).collect()
    }

    /// Number of tangential cells.
    pub fn rows(&self) -> usize {
        self.energy.nv()
    }

    /// Number of normal cells.
    pub fn ne(&self) -> usize {
        self.energy.ne()
    }

    /// Values per `x` cell.
    pub fn slab(&self) -> usize {
        self.rows() * self.ne()
    }

    /// Total phase-space length.
    pub fn len(&self) -> usize {
        self.nx * self.slab()
    }

    /// True when the grid holds no cells.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check_cfl(&self, courant: f64, what: &str) -> Result<()> {
        if courant > CFL_MAX {
            return Err(Error::Cfl(format!("{what} Courant number {courant:.4} exceeds {CFL_MAX}")));
        }
        Ok(())
    }
}

/// Tangential weights `dv_i`, point Maxwellian `exp(-v_i^2)` and `c_x = sum dv Mx`.
pub(crate) fn tangential_quadrature(grid: &EnergyGrid) -> (Vec<f64>, Vec<f64>, f64) {
    let w = grid.x_axis.widths().to_vec();
    let mx: Vec<f64> = grid.x_axis.centers().iter().map(|v| (-v * v).exp()).collect();
    let c_x = w.iter().zip(&mx).map(|(a, b)| a * b).sum();
    (w, mx, c_x)
}

/// Distribution `g(x, v_x, e_z)` of a surface model.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceState {
    /// Flat values, index `(ix * nv + iv) * ne + ie`.
    pub g: Vec<f64>,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `v_x` cells.
    pub nv: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
}

impl SurfaceState {
    /// Zero state.
    pub fn zeros(grid: &PhaseGrid) -> Self {
        Self {
            g: vec![0.0; grid.len()],
            nx: grid.nx,
            nv: grid.rows(),
            ne: grid.ne(),
        }
    }

    /// State filled from `f(x, v_x, e_z)` at cell centres.
    pub fn from_fn(grid: &PhaseGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(grid);
        let xs = grid.x_centers();
        let vs = grid.energy.x_axis.centers();
        let es = grid.energy.ez.centers();
        for (ix, x) in xs.iter().enumerate() {
            for (iv, v) in vs.iter().enumerate() {
                for (ie, e) in es.iter().enumerate() {
                    s.g[(ix * s.nv + iv) * s.ne + ie] = f(*x, *v, *e);
                }
            }
        }
        s
    }

    /// Order-zero state `(N(x) / gamma_grid) l M`, whose discrete density is `N(x)`.
    pub fn equilibrium(grid: &PhaseGrid, theta: &ThetaOperator, density: impl Fn(f64) -> f64) -> Self {
        let (_, mx, c_x) = tangential_quadrature(&grid.energy);
        let gamma = c_x * theta.normal_moment();
        let xs = grid.x_centers();
        let mut s = Self::zeros(grid);
        let ne = s.ne;
        for (ix, x) in xs.iter().enumerate() {
            let a = density(*x) / gamma;
            for (iv, m) in mx.iter().enumerate() {
                for k in 0..ne {
                    s.g[(ix * s.nv + iv) * ne + k] = a * theta.l()[k] * m * theta.mz()[k];
                }
            }
        }
        s
    }

    /// Number density `N(x) = sum g dv de`.
    pub fn density_moment(&self, grid: &PhaseGrid) -> Vec<f64> {
        slab_moments(&self.g, grid, grid.energy.x_axis.widths())
    }

    /// Tangential flux `Phi(x) = (1/epsilon) sum v g dv de`.
    pub fn flux_moment(&self, grid: &PhaseGrid) -> Vec<f64> {
        let w: Vec<f64> = grid
            .energy
            .x_axis
            .centers()
            .iter()
            .zip(grid.energy.x_axis.widths())
            .map(|(v, dv)| v * dv / grid.epsilon)
            .collect();
        slab_moments(&self.g, grid, &w)
    }

    /// Total mass `sum N dx`.
    pub fn total_mass(&self, grid: &PhaseGrid) -> f64 {
        self.density_moment(grid).iter().sum::<f64>() * grid.dx()
    }
}

/// Per-`x` sums `sum_ik a_ik w_i de_k`.
pub(crate) fn slab_moments(a: &[f64], grid: &PhaseGrid, w: &[f64]) -> Vec<f64> {
    let de = grid.energy.ez.widths();
    let ne = de.len();
    a.chunks_exact(grid.slab())
        .map(|slab| {
            slab.chunks_exact(ne)
                .zip(w)
                .map(|(row, wi)| wi * row.iter().zip(de).map(|(x, d)| x * d).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Clips negative values of one `x` slab to zero and rescales the rest to restore the slab
/// mass. Returns the most negative value found (0 when none).
pub(crate) fn clip_slab(slab: &mut [f64], w: &[f64], de: &[f64]) -> f64 {
    let min = slab.iter().copied().fold(0.0, f64::min);
    if min >= 0.0 {
        return 0.0;
    }
    let ne = de.len();
    let mass = |s: &[f64]| -> f64 {
        s.chunks_exact(ne)
            .zip(w)
            .map(|(row, wi)| wi * row.iter().zip(de).map(|(x, d)| x * d).sum::<f64>())
            .sum()
    };
    let before = mass(slab);
    for v in slab.iter_mut() {
        *v = v.max(0.0);
    }
    let after = mass(slab);
    if after > 0.0 && before > 0.0 {
        let r = before / after;
        for v in slab.iter_mut() {
            *v *= r;
        }
    }
    min
}

/// Diagnostics of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// Most negative value before clipping, relative to the largest value (0 when none).
    pub undershoot: f64,
}
