//! Maxwellian equilibria, the normalization constants `gamma`, the phonon relaxation operator
//! `Q_ph` with its redistribution operators `Theta` and `Theta_bar`, and the continuum
//! kernel used as an independent check.
//!
//! Convention: `gamma = <<l M>>`, the `l`-weighted Maxwellian moment. With this weight the
//! order-zero state `(N / gamma) l M` is a fixed point of `Theta` and carries density `N`.

pub mod grid;
pub mod kernel;
pub mod theta;
pub mod theta_bar;

use std::f64::consts::PI;

pub use grid::{Axis, EnergyGrid};
pub use kernel::{kernel_k_eval, kernel_khat_eval, kernel_khat_row_integral, overlap_window};
pub use theta::ThetaOperator;
pub use theta_bar::{tangential_weights, TangentialWeights, ThetaBarOperator};

use crate::error::{Error, Result};
use crate::potential_geometry::{trap_length_l, NormalPotential, QuadratureSpec, TangentialPotential};
use crate::quadrature::GaussRule;

/// Dimensionless Maxwellian `exp(-v^2 - e^2)`.
pub fn maxwellian(v_or_e_x: f64, e_z: f64) -> f64 {
    (-v_or_e_x * v_or_e_x - e_z * e_z).exp()
}

/// `int_{-e_max}^{e_max} e^{2k} l(e) exp(-e^2) de` by Gauss-Legendre quadrature, split at the
/// separatrix. The free side uses `e = sqrt(W_m) + s^2` to absorb the square-root behaviour of
/// `l` just above the separatrix.
pub fn normal_l_moment(w: &NormalPotential, power: i32, e_max: f64, q: &QuadratureSpec) -> Result<f64> {
    normal_l_moment_at(w, power, e_max, 1.0, q)
}

/// `int_{-e_max}^{e_max} e^{2k} l(e) exp(-e^2 / T) de` at temperature `T` with the dimensionless
/// well profile held fixed.
pub fn normal_l_moment_at(
    w: &NormalPotential,
    power: i32,
    e_max: f64,
    temperature: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    let sep = w.separatrix();
    if !(e_max > sep) {
        return Err(Error::Domain(format!("cutoff {e_max} must exceed the separatrix {sep}")));
    }
    let integrand = |e: f64| -> Result<f64> {
        if e == 0.0 {
            return Ok(0.0);
        }
        Ok(e.powi(2 * power) * trap_length_l(w, e, q)? * (-e * e / temperature).exp())
    };
    q.converged("l-weighted Maxwellian moment", |rule: &GaussRule| {
        let mut err = None;
        let mut total = 0.0;
        if sep > 0.0 {
            total += rule.integrate(0.0, sep, |e| match integrand(e) {
                Ok(v) => v,
                Err(x) => {
                    err.get_or_insert(x);
                    0.0
                }
            });
        }
        let smax = (e_max - sep).sqrt();
        total += rule.integrate(0.0, smax, |s| match integrand(sep + s * s) {
            Ok(v) => 2.0 * s * v,
            Err(x) => {
                err.get_or_insert(x);
                0.0
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(2.0 * total),
        }
    })
}

/// Normalization constants of the equilibria.
#[derive(Debug, Clone)]
pub struct GammaTable {
    /// Continuum `gamma = <<l M>>`.
    pub gamma: f64,
    /// Discrete `sum l_j M_ij dv_i de_j` on the solver grid.
    pub gamma_grid: f64,
    /// Tangential factor `sqrt(pi)`.
    pub gamma_x: f64,
    /// `d gamma / dT` at `T = 1` with the dimensionless profile held fixed.
    pub gamma_prime: f64,
    /// Continuum mesoscopic normalization `2 <<|e_x| sigma_bar_x l M>>` when a tangential
    /// potential is given.
    pub gamma_meso: Option<f64>,
    /// Dimensionless molecule-phonon relaxation time.
    pub tau_ms: f64,
    normal: NormalPotential,
    tangential: Option<TangentialPotential>,
}

impl GammaTable {
    /// `gamma_z(z) = sqrt(pi) exp(-W(z))`.
    pub fn gamma_z(&self, z: f64) -> f64 {
        PI.sqrt() * (-self.normal.eval(z)).exp()
    }

    /// `gamma_0(z) = pi exp(-W(z)) = gamma_x gamma_z(z)`.
    pub fn gamma0(&self, z: f64) -> f64 {
        PI * (-self.normal.eval(z)).exp()
    }

    /// `gamma_1(y, z) = pi exp(-U^(y) - W(z))`; equals `gamma_0` without a tangential potential.
    pub fn gamma1(&self, y: f64, z: f64) -> f64 {
        let u = self.tangential.as_ref().map_or(0.0, |u| u.eval(y));
        PI * (-u - self.normal.eval(z)).exp()
    }
}

/// Builds the normalization table. `gamma_grid` uses the `l` cells of `theta` and the point
/// Maxwellian at the cell centres of `grid.x_axis`.
pub fn build_gamma_table(
    w: &NormalPotential,
    u: Option<&TangentialPotential>,
    grid: &EnergyGrid,
    theta: &ThetaOperator,
    q: &QuadratureSpec,
    tau_ms: f64,
) -> Result<GammaTable> {
    if !(tau_ms > 0.0) {
        return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
    }
    let e_max = grid.e_max();
    let l0 = normal_l_moment(w, 0, e_max, q)?;
    let l1 = normal_l_moment(w, 1, e_max, q)?;
    let sqrt_pi = PI.sqrt();
    let mx_moment: f64 = grid
        .x_axis
        .centers()
        .iter()
        .zip(grid.x_axis.widths())
        .map(|(v, dv)| (-v * v).exp() * dv)
        .sum();
    let gamma_meso = match u {
        Some(u) => {
            let rule = GaussRule::new(q.node_count);
            let mut ys = Vec::new();
            let mut ws = Vec::new();
            rule.push_interval(-1.0, u.y_min(), &mut ys, &mut ws);
            rule.push_interval(u.y_min(), 1.0, &mut ys, &mut ws);
            let iy: f64 = ys.iter().zip(&ws).map(|(y, wt)| wt * (-u.eval(*y)).exp()).sum();
            Some(sqrt_pi * iy * l0)
        }
        None => None,
    };
    Ok(GammaTable {
        gamma: sqrt_pi * l0,
        gamma_grid: mx_moment * theta.normal_moment(),
        gamma_x: sqrt_pi,
        gamma_prime: 0.5 * sqrt_pi * l0 + sqrt_pi * l1,
        gamma_meso,
        tau_ms,
        normal: w.clone(),
        tangential: u.cloned(),
    })
}

/// Tangential quadrature weights `dv_i` and point Maxwellian `exp(-v_i^2)` of a grid.
pub fn velocity_weights(grid: &EnergyGrid) -> (Vec<f64>, Vec<f64>) {
    let w = grid.x_axis.widths().to_vec();
    let mx = grid.x_axis.centers().iter().map(|v| (-v * v).exp()).collect();
    (w, mx)
}

/// `Theta[g]` for one `(v_x, e_z)` slice (row-major, `v_x` outer).
pub fn theta_apply(theta: &ThetaOperator, grid: &EnergyGrid, g: &[f64]) -> Vec<f64> {
    let (w, mx) = velocity_weights(grid);
    let c_x: f64 = w.iter().zip(&mx).map(|(a, b)| a * b).sum();
    theta.theta_from_phi(&theta.phi(g, &w, c_x))
}

/// `Q_ph[g] = (Theta[g] l M - g) / tau_ms` for one slice, with the gain rescaled so that the
/// discrete mass moment of the increment vanishes.
pub fn qph_apply(theta: &ThetaOperator, grid: &EnergyGrid, g: &[f64], tau_ms: f64) -> Vec<f64> {
    let (w, mx) = velocity_weights(grid);
    let ne = theta.ne();
    let c_x: f64 = w.iter().zip(&mx).map(|(a, b)| a * b).sum();
    let th = theta.theta_from_phi(&theta.phi(g, &w, c_x));
    let gain_mass = c_x * theta.gain_mass(&th);
    let loss_mass = slice_mass(g, &w, theta.widths());
    let r = if gain_mass != 0.0 { loss_mass / gain_mass } else { 1.0 };
    let mut out = vec![0.0; g.len()];
    for (i, row) in g.chunks_exact(ne).enumerate() {
        for k in 0..ne {
            let gain = r * th[k] * theta.l()[k] * mx[i] * theta.mz()[k];
            out[i * ne + k] = (gain - row[k]) / tau_ms;
        }
    }
    out
}

/// `sum_ik g_ik w_i de_k` of one slice.
pub fn slice_mass(g: &[f64], w: &[f64], de: &[f64]) -> f64 {
    let ne = de.len();
    g.chunks_exact(ne)
        .zip(w)
        .map(|(row, wi)| wi * row.iter().zip(de).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}
