//! Fine-grained reference for the mesoscopic model: the tangential equation with the
//! oscillating potential `U(x) = U^(x / delta)` resolved on the `x` grid, in collision time.
//!
//! The unknown is `h(x, e_x, e_z)` on `e_x` cells. Its conserved density per cell is
//! `q = B_i(x) h` with `B_i(x) = int_cell |e| / sqrt(e^2 - U(x)) de`, the local phase-space
//! measure, and its flux is `F_i(x) h` with `F_i(x) = int_{cell, e^2 > U(x)} e de`. A face
//! carries the smaller of the two adjacent capacities; the remainder is turned around inside
//! the cell, which moves molecules between the `+e_x` and `-e_x` cells of the same `|e_x|`.
//! Classically forbidden cells (`B_i = 0`) hold zero.

use rayon::prelude::*;

use super::collision::{CollisionPlan, MassCorrection, PairOperator};
use super::meso::MesoState;
use super::{PhaseGrid, StepReport, XBoundary};
use crate::equilibrium_collision::{tangential_weights, ThetaOperator};
use crate::error::{Error, Result};
use crate::potential_geometry::TangentialPotential;

/// Cells per oscillation half-period required of the `x` grid.
pub const MIN_CELLS_PER_DELTA: f64 = 16.0;

/// Fine distribution `h(x, e_x, e_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FineTangentialState {
    /// Flat values, index `(ix * nex + i) * ne + k`.
    pub h: Vec<f64>,
    /// Number of `x` cells.
    pub nx: usize,
    /// Number of `e_x` cells.
    pub nex: usize,
    /// Number of `e_z` cells.
    pub ne: usize,
}

/// Fine-grained tangential solver.
#[derive(Debug, Clone)]
pub struct FineSolver {
    grid: PhaseGrid,
    delta: f64,
    plan: CollisionPlan,
    /// `B_i(x_j)`, index `j * nex + i`.
    b: Vec<f64>,
    /// `sum_i B_i(x_j) Mx_i`.
    beta: Vec<f64>,
    /// Signed `F_i(x_j)`.
    f: Vec<f64>,
    /// Signed face capacity between cells `j` and `j + 1`.
    face: Vec<f64>,
    mx: Vec<f64>,
    l: Vec<f64>,
    mz: Vec<f64>,
}

fn positive_bounds(edges: &[f64], i: usize) -> (f64, f64) {
    let (a, b) = (edges[i], edges[i + 1]);
    if b <= 0.0 {
        (-b, -a)
    } else {
        (a.max(0.0), b)
    }
}

impl FineSolver {
    /// `delta` is the half-period of the potential in `x` units; the `x` interval must hold
    /// a whole number of periods.
    pub fn new(
        grid: &PhaseGrid,
        theta: &ThetaOperator,
        u: &TangentialPotential,
        delta: f64,
        tau_ms: f64,
    ) -> Result<Self> {
        grid.validate()?;
        if theta.ne() != grid.ne() {
            return Err(Error::GridMismatch("relaxation operator does not match the energy grid".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        let dx = grid.dx();
        if dx > delta / MIN_CELLS_PER_DELTA * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "dx = {dx} does not resolve delta = {delta} (need dx <= delta/{MIN_CELLS_PER_DELTA})"
            )));
        }
        let periods = grid.length / (2.0 * delta);
        if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
            return Err(Error::Resolution(format!(
                "interval length {} is not a whole number of periods 2 delta = {}",
                grid.length,
                2.0 * delta
            )));
        }
        if !(tau_ms > 0.0 && tau_ms.is_finite()) {
            return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
        }
        let axis = &grid.energy.x_axis;
        let nex = axis.len();
        let nx = grid.nx;
        let mx: Vec<f64> = axis.centers().iter().map(|e| (-e * e).exp()).collect();
        let mut b = Vec::with_capacity(nx * nex);
        let mut beta = Vec::with_capacity(nx);
        let mut f = Vec::with_capacity(nx * nex);
        for x in grid.x_centers() {
            let uu = u.eval(x / delta);
            let tw = tangential_weights(axis, uu);
            b.extend_from_slice(&tw.b);
            beta.push(tw.beta);
            for i in 0..nex {
                let (lo, hi) = positive_bounds(axis.edges(), i);
                let cap = if hi * hi > uu { 0.5 * (hi * hi - (lo * lo).max(uu)) } else { 0.0 };
                f.push(if axis.centers()[i] > 0.0 { cap } else { -cap });
            }
        }
        let mut face = vec![0.0; nx * nex];
        for j in 0..nx {
            let jn = j + 1;
            for i in 0..nex {
                face[j * nex + i] = if jn < nx {
                    min_abs(f[j * nex + i], f[jn * nex + i])
                } else {
                    match grid.boundary {
                        XBoundary::Periodic => min_abs(f[j * nex + i], f[i]),
                        XBoundary::Reflective => 0.0,
                    }
                };
            }
        }
        let mut worst = 0.0_f64;
        for idx in 0..nx * nex {
            if b[idx] > 0.0 {
                worst = worst.max(f[idx].abs() / b[idx]);
            }
        }
        grid.check_cfl(grid.dt * worst / dx, "fine transport")?;
        let lambda = grid.dt / tau_ms;
        let plan = CollisionPlan::new(
            theta,
            lambda,
            PairOperator::relaxation(theta.ne(), lambda),
            MassCorrection::Conserve,
        )?;
        Ok(Self {
            grid: grid.clone(),
            delta,
            plan,
            b,
            beta,
            f,
            face,
            mx,
            l: theta.l().to_vec(),
            mz: theta.mz().to_vec(),
        })
    }

    /// Grid of the solver.
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    /// Half-period of the potential.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Copies a mesoscopic state on the same grid, zeroing forbidden cells.
    pub fn state_from_meso(&self, meso: &MesoState) -> Result<FineTangentialState> {
        if meso.h.len() != self.grid.len() {
            return Err(Error::GridMismatch("mesoscopic state does not match the fine grid".into()));
        }
        let ne = self.grid.ne();
        let mut h = meso.h.clone();
        for (row, b) in h.chunks_exact_mut(ne).zip(&self.b) {
            if *b == 0.0 {
                row.fill(0.0);
            }
        }
        Ok(FineTangentialState {
            h,
            nx: self.grid.nx,
            nex: self.grid.rows(),
            ne,
        })
    }

    /// Uniform state `a l M` on allowed cells.
    pub fn uniform(&self, a: f64) -> FineTangentialState {
        let ne = self.grid.ne();
        let nex = self.grid.rows();
        let mut h = vec![0.0; self.grid.len()];
        for (idx, row) in h.chunks_exact_mut(ne).enumerate() {
            if self.b[idx] > 0.0 {
                let i = idx % nex;
                for k in 0..ne {
                    row[k] = a * self.l[k] * self.mx[i] * self.mz[k];
                }
            }
        }
        FineTangentialState {
            h,
            nx: self.grid.nx,
            nex,
            ne,
        }
    }

    /// Local density `rho(x) = sum_ik B_i(x) h de_k`.
    pub fn density_moment(&self, st: &FineTangentialState) -> Vec<f64> {
        self.weighted(st, &self.b)
    }

    /// Local flux `sum_ik F_i(x) h de_k`.
    pub fn flux_moment(&self, st: &FineTangentialState) -> Vec<f64> {
        self.weighted(st, &self.f)
    }

    fn weighted(&self, st: &FineTangentialState, w: &[f64]) -> Vec<f64> {
        let ne = self.grid.ne();
        let nex = self.grid.rows();
        let de = self.grid.energy.ez.widths();
        st.h.chunks_exact(nex * ne)
            .enumerate()
            .map(|(j, slab)| {
                slab.chunks_exact(ne)
                    .enumerate()
                    .map(|(i, row)| w[j * nex + i] * row.iter().zip(de).map(|(a, d)| a * d).sum::<f64>())
                    .sum()
            })
            .collect()
    }

    /// Total mass `sum rho dx`.
    pub fn total_mass(&self, st: &FineTangentialState) -> f64 {
        self.density_moment(st).iter().sum::<f64>() * self.grid.dx()
    }

    fn transport(&self, h: &[f64]) -> Vec<f64> {
        let ne = self.grid.ne();
        let nex = self.grid.rows();
        let nx = self.grid.nx;
        let slab = nex * ne;
        let r = self.grid.dt / self.grid.dx();
        let periodic = self.grid.boundary == XBoundary::Periodic;
        let mut out = vec![0.0; h.len()];
        out.par_chunks_mut(slab).enumerate().for_each(|(j, dst)| {
            let left = if j > 0 { Some(j - 1) } else if periodic { Some(nx - 1) } else { None };
            let right = if j + 1 < nx { Some(j + 1) } else if periodic { Some(0) } else { None };
            for i in 0..nex {
                let cell = j * nex + i;
                if self.b[cell] == 0.0 {
                    continue;
                }
                let fr = self.face[cell];
                let fl = left.map_or(0.0, |l| self.face[l * nex + i]);
                let mirror = nex - 1 - i;
                let d_cap = fr.abs() - fl.abs();
                let positive = self.grid.energy.x_axis.centers()[i] > 0.0;
                for k in 0..ne {
                    let hv = |c: usize, row: usize| h[(c * nex + row) * ne + k];
                    let own = hv(j, i);
                    let (inflow, outflow, turned) = if positive {
                        let turned = if d_cap < 0.0 { d_cap * own } else { d_cap * hv(j, mirror) };
                        (fl.abs() * left.map_or(0.0, |l| hv(l, i)), fr.abs() * own, turned)
                    } else {
                        let turned = if d_cap > 0.0 { -d_cap * own } else { -d_cap * hv(j, mirror) };
                        (fr.abs() * right.map_or(0.0, |rr| hv(rr, i)), fl.abs() * own, turned)
                    };
                    let q = self.b[cell] * own + r * (inflow - outflow + turned);
                    dst[i * ne + k] = q / self.b[cell];
                }
            }
        });
        out
    }

    /// Advances one time step: transport with in-cell turning, then implicit relaxation.
    pub fn step(&self, st: &mut FineTangentialState) -> Result<StepReport> {
        if st.h.len() != self.grid.len() {
            return Err(Error::GridMismatch("fine state does not match the grid".into()));
        }
        let ne = self.grid.ne();
        let nex = self.grid.rows();
        let slab = nex * ne;
        let mut h = self.transport(&st.h);
        h.par_chunks_mut(slab).enumerate().try_for_each(|(j, s)| -> Result<()> {
            let w = &self.b[j * nex..(j + 1) * nex];
            self.plan.apply(s, None, w, &self.mx, self.beta[j])?;
            for (row, bi) in s.chunks_exact_mut(ne).zip(w) {
                if *bi == 0.0 {
                    row.fill(0.0);
                }
            }
            Ok(())
        })?;
        let max = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let de = self.grid.energy.ez.widths();
        let min = h
            .par_chunks_mut(slab)
            .enumerate()
            .map(|(j, s)| super::clip_slab(s, &self.b[j * nex..(j + 1) * nex], de))
            .reduce(|| 0.0, f64::min);
        st.h = h;
        Ok(StepReport {
            undershoot: if max > 0.0 { min / max } else { 0.0 },
        })
    }
}

/// The entry of smaller magnitude, carrying the sign of the first.
fn min_abs(a: f64, b: f64) -> f64 {
    a.signum() * a.abs().min(b.abs())
}
