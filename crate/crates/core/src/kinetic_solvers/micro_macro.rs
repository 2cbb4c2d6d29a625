//! Asymptotic-preserving micro-macro scheme for the trapped surface equation in diffusion time.
//!
//! The distribution is split as `g = N E + eps h` with `E = l M / gamma_grid` and `<h> = 0`,
//! where `<.>` is the discrete density `sum . dv de`. The density `N` lives at cell centres,
//! `h` on cell faces (staggered grid). One step solves
//!
//! `(1 + lambda) h' - lambda Theta[h'] l M = h - dt/eps^2 v E (d_x N + 2 U' N)
//!                                           - dt/eps (I - Pi)(v d_x h - U' d_v h)`
//!
//! with `lambda = dt / (eps^2 tau_ms)`, projects `h'` onto `<h'> = 0`, and updates
//! `N' = N - dt d_x <v h'>`. As `eps -> 0` the scheme becomes an explicit discretization of
//! `d_t N = d_x (D (d_x N + 2 U' N))` with `D = tau_ms <v^2 E>`.

use rayon::prelude::*;

use super::collision::{CollisionPlan, MassCorrection, PairOperator};
use super::transport::vlasov_slab;
use super::{tangential_quadrature, PhaseGrid, SurfaceState, XBoundary};
use crate::equilibrium_collision::ThetaOperator;
use crate::error::{Error, Result};

/// Macro density at cell centres and micro part on faces.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroState {
    /// Density `N` per cell.
    pub n: Vec<f64>,
    /// Micro part on the face between cells `j` and `j + 1`, index `(j * nv + iv) * ne + ie`.
    pub h: Vec<f64>,
}

/// Largest stable step: `dx^2 / (2 D)` for the macro update and, for the explicit upwind
/// transport of `h` with Courant number `nu = dt v_max / (eps dx)` damped by
/// `1 + lambda`, the condition `2 nu - 1 <= 1 + lambda`.
fn stability_bound(eps: f64, dx: f64, v: &[f64], diffusivity: f64, tau_ms: f64) -> f64 {
    let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let macro_bound = dx * dx / (2.0 * diffusivity);
    let excess = 2.0 * vmax * eps * tau_ms - dx;
    if excess <= 0.0 {
        macro_bound
    } else {
        macro_bound.min(2.0 * eps * eps * tau_ms * dx / excess)
    }
}

/// Micro-macro solver on a periodic grid.
#[derive(Debug, Clone)]
pub struct MicroMacroSolver {
    grid: PhaseGrid,
    plan: CollisionPlan,
    e: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    mx: Vec<f64>,
    c_x: f64,
    force_faces: Vec<f64>,
    diffusivity: f64,
}

impl MicroMacroSolver {
    /// `force_faces[j]` is `U'` on the face between cells `j` and `j + 1`.
    pub fn new(grid: &PhaseGrid, theta: &ThetaOperator, tau_ms: f64, force_faces: &[f64]) -> Result<Self> {
        grid.validate()?;
        if grid.boundary != XBoundary::Periodic {
            return Err(Error::Domain("the micro-macro solver supports periodic x only".into()));
        }
        if theta.ne() != grid.ne() || force_faces.len() != grid.nx {
            return Err(Error::GridMismatch("operator or force samples do not match the grid".into()));
        }
        if !(tau_ms > 0.0 && tau_ms.is_finite()) {
            return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
        }
        let (w, mx, c_x) = tangential_quadrature(&grid.energy);
        let gamma = c_x * theta.normal_moment();
        let ne = grid.ne();
        let mut e = vec![0.0; grid.slab()];
        for (i, m) in mx.iter().enumerate() {
            for k in 0..ne {
                e[i * ne + k] = theta.l()[k] * m * theta.mz()[k] / gamma;
            }
        }
        let v = grid.energy.x_axis.centers().to_vec();
        let de = grid.energy.ez.widths();
        let mut second = 0.0;
        for i in 0..v.len() {
            for k in 0..ne {
                second += v[i] * v[i] * e[i * ne + k] * w[i] * de[k];
            }
        }
        let diffusivity = tau_ms * second;
        let bound = stability_bound(grid.epsilon, grid.dx(), &v, diffusivity, tau_ms);
        if grid.dt > bound {
            return Err(Error::Cfl(format!(
                "micro-macro step {} exceeds the stability bound {bound:.4e}",
                grid.dt
            )));
        }
        let eps = grid.epsilon;
        let lambda = grid.dt / (eps * eps * tau_ms);
        let plan = CollisionPlan::new(
            theta,
            lambda,
            PairOperator::relaxation(ne, lambda),
            MassCorrection::Unscaled,
        )?;
        Ok(Self {
            grid: grid.clone(),
            plan,
            e,
            v,
            w,
            mx,
            c_x,
            force_faces: force_faces.to_vec(),
            diffusivity,
        })
    }

    /// Step size `0.8` times the stability bound.
    pub fn auto_dt(grid: &PhaseGrid, theta: &ThetaOperator, tau_ms: f64) -> f64 {
        let (w, mx, c_x) = tangential_quadrature(&grid.energy);
        let gamma = c_x * theta.normal_moment();
        let v = grid.energy.x_axis.centers();
        let second: f64 = v
            .iter()
            .zip(&w)
            .zip(&mx)
            .map(|((vi, wi), m)| vi * vi * wi * m)
            .sum::<f64>()
            * theta.normal_moment()
            / gamma;
        0.8 * stability_bound(grid.epsilon, grid.dx(), v, tau_ms * second, tau_ms)
    }

    /// Grid of the solver.
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Limiting diffusivity `tau_ms <v^2 E>` of the discrete velocity grid.
    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    /// State with density `N(x)` and zero micro part.
    pub fn initial(&self, density: impl Fn(f64) -> f64) -> MicroMacroState {
        MicroMacroState {
            n: self.grid.sample(density),
            h: vec![0.0; self.grid.len()],
        }
    }

    /// Density `N`.
    pub fn density_moment(&self, st: &MicroMacroState) -> Vec<f64> {
        st.n.clone()
    }

    /// Flux `<v h>` at cell centres (average of the two adjacent faces).
    pub fn flux_moment(&self, st: &MicroMacroState) -> Vec<f64> {
        let j = self.face_flux(&st.h);
        let nx = self.grid.nx;
        (0..nx).map(|c| 0.5 * (j[c] + j[(c + nx - 1) % nx])).collect()
    }

    /// Total mass `sum N dx`.
    pub fn total_mass(&self, st: &MicroMacroState) -> f64 {
        st.n.iter().sum::<f64>() * self.grid.dx()
    }

    /// Distribution `N E + eps h` at cell centres, with `h` averaged from the faces.
    pub fn to_surface(&self, st: &MicroMacroState) -> SurfaceState {
        let mut s = SurfaceState::zeros(&self.grid);
        let slab = self.grid.slab();
        let nx = self.grid.nx;
        let eps = self.grid.epsilon;
        for c in 0..nx {
            let l = (c + nx - 1) % nx;
            for idx in 0..slab {
                s.g[c * slab + idx] =
                    st.n[c] * self.e[idx] + 0.5 * eps * (st.h[c * slab + idx] + st.h[l * slab + idx]);
            }
        }
        s
    }

    fn face_flux(&self, h: &[f64]) -> Vec<f64> {
        let de = self.grid.energy.ez.widths();
        let ne = de.len();
        h.chunks_exact(self.grid.slab())
            .map(|slab| {
                slab.chunks_exact(ne)
                    .enumerate()
                    .map(|(i, row)| self.v[i] * self.w[i] * row.iter().zip(de).map(|(a, d)| a * d).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    fn project(&self, slab: &mut [f64]) {
        let de = self.grid.energy.ez.widths();
        let ne = de.len();
        let m: f64 = slab
            .chunks_exact(ne)
            .zip(&self.w)
            .map(|(row, wi)| wi * row.iter().zip(de).map(|(a, d)| a * d).sum::<f64>())
            .sum();
        for (x, e) in slab.iter_mut().zip(&self.e) {
            *x -= m * e;
        }
    }

    /// Advances one time step.
    pub fn step(&self, st: &mut MicroMacroState) -> Result<()> {
        let nx = self.grid.nx;
        let slab = self.grid.slab();
        if st.n.len() != nx || st.h.len() != nx * slab {
            return Err(Error::GridMismatch("micro-macro state does not match the grid".into()));
        }
        let ne = self.grid.ne();
        let dt = self.grid.dt;
        let dx = self.grid.dx();
        let eps = self.grid.epsilon;
        let dv = self.grid.energy.x_axis.widths();
        let old = &st.h;
        let n = &st.n;
        let mut h = vec![0.0; old.len()];
        h.par_chunks_mut(slab).enumerate().try_for_each(|(j, dst)| -> Result<()> {
            let jl = (j + nx - 1) % nx;
            let jr = (j + 1) % nx;
            let n_r = n[jr];
            let drive = (n_r - n[j]) / dx + 2.0 * self.force_faces[j] * 0.5 * (n[j] + n_r);
            let own = &old[j * slab..(j + 1) * slab];
            let mut q = vec![0.0; slab];
            for i in 0..self.v.len() {
                let vi = self.v[i];
                for k in 0..ne {
                    let idx = i * ne + k;
                    q[idx] = if vi > 0.0 {
                        vi * (own[idx] - old[jl * slab + idx]) / dx
                    } else {
                        vi * (old[jr * slab + idx] - own[idx]) / dx
                    };
                }
            }
            // -U' d_v h in flux form, read off a unit-time Vlasov update.
            let mut moved = own.to_vec();
            vlasov_slab(&mut moved, ne, -self.force_faces[j], 1.0, dv);
            for idx in 0..slab {
                q[idx] += own[idx] - moved[idx];
            }
            self.project(&mut q);
            for i in 0..self.v.len() {
                for k in 0..ne {
                    let idx = i * ne + k;
                    dst[idx] = own[idx] - dt / (eps * eps) * self.v[i] * self.e[idx] * drive - dt / eps * q[idx];
                }
            }
            self.plan.apply(dst, None, &self.w, &self.mx, self.c_x)?;
            self.project(dst);
            Ok(())
        })?;
        let j = self.face_flux(&h);
        for c in 0..nx {
            let l = (c + nx - 1) % nx;
            st.n[c] -= dt / dx * (j[c] - j[l]);
        }
        st.h = h;
        Ok(())
    }
}
