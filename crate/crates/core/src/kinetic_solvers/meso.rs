//! Homogenized mesoscopic model `d_t h + w_x(e_x) d_x h = (Theta_bar[h] l M - h) / tau_ms` in
//! collision time.
//!
//! With `T = Theta_bar[h]` the implicit relaxation `h = (h* + lambda T l M) / (1 + lambda)` turns
//! into `T - c (A (x) B) T = Theta_bar[h*] / (1 + lambda)` with `c = lambda / (1 + lambda)`,
//! `A = R diag(Mx)` and `B = K diag(Mz)`. The `nex * ne` system is factored once.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::transport::XSweep;
use super::{slab_moments, PhaseGrid, StepReport};
use crate::equilibrium_collision::{ThetaBarOperator, ThetaOperator};
use crate::error::{Error, Result};

/// Normwise backward-error target `|r| <= tol (|b| + |A| |x|)` of the refined solve.
const RESIDUAL_TOL: f64 = 1e-12;
/// Refinement sweeps allowed before reporting non-convergence.
const MAX_SWEEPS: usize = 200;

/// Mesoscopic distribution `h(x, e_x, e_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MesoState {
    /// Flat values, index `(ix * nex + i) * ne + k`.
    pub h: Vec<f64>,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `e_x` cells.
    pub nex: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
    /// Cell-averaged mass weights `|e_x| sigma_bar_x`.
    pub weights: Vec<f64>,
}

/// Mesoscopic solver.
#[derive(Debug, Clone)]
pub struct MesoSolver {
    grid: PhaseGrid,
    lambda: f64,
    s: Vec<f64>,
    velocity: Vec<f64>,
    mass_weights: Vec<f64>,
    mixing: Vec<f64>,
    kernel: Vec<f64>,
    l: Vec<f64>,
    mx: Vec<f64>,
    mz: Vec<f64>,
    de: Vec<f64>,
    matrix: DMatrix<f64>,
    norm: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl MesoSolver {
    /// `grid.energy.x_axis` must be the `e_x` axis of `bar`.
    pub fn new(grid: &PhaseGrid, theta: &ThetaOperator, bar: &ThetaBarOperator, tau_ms: f64) -> Result<Self> {
        grid.validate()?;
        let nex = bar.nex();
        let ne = theta.ne();
        if grid.rows() != nex || grid.ne() != ne || grid.energy.x_axis.centers() != bar.centers() {
            return Err(Error::GridMismatch("mesoscopic grid does not match the orbit-averaged operator".into()));
        }
        if !(tau_ms > 0.0 && tau_ms.is_finite()) {
            return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
        }
        let vmax = bar.velocity().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        grid.check_cfl(grid.dt * vmax / grid.dx(), "mesoscopic transport")?;
        let lambda = grid.dt / tau_ms;
        let c = lambda / (1.0 + lambda);
        let r = bar.mixing();
        let k = theta.kernel();
        let n = nex * ne;
        let mut matrix = DMatrix::<f64>::identity(n, n);
        for i in 0..nex {
            for ip in 0..nex {
                let a = r[i * nex + ip] * bar.mx()[ip];
                if a == 0.0 {
                    continue;
                }
                for kk in 0..ne {
                    for kp in 0..ne {
                        matrix[(i * ne + kk, ip * ne + kp)] -= c * a * k[kk * ne + kp] * theta.mz()[kp];
                    }
                }
            }
        }
        let norm = matrix.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let lu = matrix.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::NonConvergence("mesoscopic relaxation matrix is singular".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            lambda,
            s: bar.period_sums().to_vec(),
            velocity: bar.velocity().to_vec(),
            mass_weights: bar.mass_weights(),
            mixing: r.to_vec(),
            kernel: k.to_vec(),
            l: theta.l().to_vec(),
            mx: bar.mx().to_vec(),
            mz: theta.mz().to_vec(),
            de: theta.widths().to_vec(),
            matrix,
            norm,
            lu,
        })
    }

    /// Grid of the solver.
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Relaxation factor `dt / tau_ms`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Discrete mesoscopic normalization `sum_ik l_k Mx_i Mz_k S_i de_k`.
    pub fn gamma_grid(&self) -> f64 {
        let t: f64 = self.s.iter().zip(&self.mx).map(|(s, m)| s * m).sum();
        let n: f64 = (0..self.l.len()).map(|k| self.l[k] * self.mz[k] * self.de[k]).sum();
        t * n
    }

    /// Zero state.
    pub fn zeros(&self) -> MesoState {
        MesoState {
            h: vec![0.0; self.grid.len()],
            nx: self.grid.nx,
            nex: self.grid.rows(),
            ne: self.grid.ne(),
            weights: self.mass_weights.clone(),
        }
    }

    /// Order-zero state `(N(x) / gamma_grid) l M` with density `N(x)`.
    pub fn equilibrium(&self, density: impl Fn(f64) -> f64) -> MesoState {
        let mut st = self.zeros();
        let gamma = self.gamma_grid();
        let ne = st.ne;
        for (ix, x) in self.grid.x_centers().iter().enumerate() {
            let a = density(*x) / gamma;
            for i in 0..st.nex {
                for k in 0..ne {
                    st.h[(ix * st.nex + i) * ne + k] = a * self.l[k] * self.mx[i] * self.mz[k];
                }
            }
        }
        st
    }

    /// Density `N(x) = sum_ik h S_i de_k`.
    pub fn density_moment(&self, st: &MesoState) -> Vec<f64> {
        slab_moments(&st.h, &self.grid, &self.s)
    }

    /// Flux `Phi(x) = sum_ik w_i h S_i de_k`.
    pub fn flux_moment(&self, st: &MesoState) -> Vec<f64> {
        let w: Vec<f64> = self.s.iter().zip(&self.velocity).map(|(s, v)| s * v).collect();
        slab_moments(&st.h, &self.grid, &w)
    }

    /// Weighted total mass `sum N dx`.
    pub fn total_mass(&self, st: &MesoState) -> f64 {
        self.density_moment(st).iter().sum::<f64>() * self.grid.dx()
    }

    fn solve(&self, b: DVector<f64>) -> Result<DVector<f64>> {
        let fail = || Error::NonConvergence("LU back-substitution failed".into());
        let mut x = self.lu.solve(&b).ok_or_else(fail)?;
        for _ in 0..MAX_SWEEPS {
            let scale = (b.amax() + self.norm * x.amax()).max(f64::MIN_POSITIVE);
            let r = &b - &self.matrix * &x;
            if r.amax() <= RESIDUAL_TOL * scale {
                return Ok(x);
            }
            x += self.lu.solve(&r).ok_or_else(fail)?;
        }
        Err(Error::NonConvergence(format!(
            "mesoscopic relaxation residual above {RESIDUAL_TOL:e} after {MAX_SWEEPS} sweeps"
        )))
    }

    /// Implicit relaxation of one `x` slab in place.
    fn relax_slab(&self, h: &mut [f64]) -> Result<()> {
        let nex = self.mx.len();
        let ne = self.l.len();
        let mut ku = vec![0.0; nex * ne];
        for i in 0..nex {
            for kk in 0..ne {
                ku[i * ne + kk] = (0..ne)
                    .map(|kp| self.kernel[kk * ne + kp] * h[i * ne + kp] / self.l[kp])
                    .sum();
            }
        }
        let mut rhs = vec![0.0; nex * ne];
        for i in 0..nex {
            for ip in 0..nex {
                let r = self.mixing[i * nex + ip];
                if r == 0.0 {
                    continue;
                }
                for kk in 0..ne {
                    rhs[i * ne + kk] += r * ku[ip * ne + kk];
                }
            }
        }
        for v in rhs.iter_mut() {
            *v /= 1.0 + self.lambda;
        }
        let t = self.solve(DVector::from_vec(rhs))?;
        let mut before = 0.0;
        let mut gain = 0.0;
        for i in 0..nex {
            for kk in 0..ne {
                let w = self.s[i] * self.de[kk];
                before += w * h[i * ne + kk];
                gain += w * t[i * ne + kk] * self.l[kk] * self.mx[i] * self.mz[kk];
            }
        }
        let r = if gain != 0.0 { before / gain } else { 1.0 };
        for i in 0..nex {
            for kk in 0..ne {
                let g = self.lambda * r * t[i * ne + kk] * self.l[kk] * self.mx[i] * self.mz[kk];
                h[i * ne + kk] = (h[i * ne + kk] + g) / (1.0 + self.lambda);
            }
        }
        Ok(())
    }

    /// Advances one time step: transport with the cell velocities, then implicit relaxation.
    pub fn step(&self, st: &mut MesoState) -> Result<StepReport> {
        if st.h.len() != self.grid.len() {
            return Err(Error::GridMismatch("mesoscopic state does not match the grid".into()));
        }
        let mut h = vec![0.0; st.h.len()];
        XSweep {
            nx: self.grid.nx,
            rows: self.grid.rows(),
            ne: self.grid.ne(),
            speed: &self.velocity,
            ratio: self.grid.dt / self.grid.dx(),
            boundary: self.grid.boundary,
            scheme: self.grid.scheme,
        }
        .run(&st.h, &mut h);
        h.par_chunks_mut(self.grid.slab()).try_for_each(|s| self.relax_slab(s))?;
        let max = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let de = self.grid.energy.ez.widths();
        let min = h
            .par_chunks_mut(self.grid.slab())
            .map(|slab| super::clip_slab(slab, &self.s, de))
            .reduce(|| 0.0, f64::min);
        st.h = h;
        Ok(StepReport {
            undershoot: if max > 0.0 { min / max } else { 0.0 },
        })
    }
}
