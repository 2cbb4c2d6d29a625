//! Diffusion coefficients of the surface layer and integrators of the macroscopic models:
//! isothermal drift-diffusion, its non-isothermal extension and the two-layer exchange system.
//!
//! In dimensionless units the coefficients at temperature `T`, with the well profile held fixed
//! and `M_T = exp(-(v^2 + e^2) / T)`, are
//!
//! - `gamma(T) = <<l M_T>>`, `gamma'(T) = <<(v^2 + e^2) / T^2 l M_T>>`,
//! - `D0n = tau_ms <<v^2 l M_T>> / gamma`,
//! - `D0T = tau_ms N (<<v^2 (v^2 + e^2) / T^2 l M_T>> / gamma - (gamma' / gamma) <<v^2 l M_T>> / gamma)`,
//! - `C0p = D0n / T`, `C0T = D0T - (N / T) D0n`,
//! - `c = int_free |e| Mz de / int l Mz de`.
//!
//! Every scheme is written as interface fluxes `J_{j+1/2}` on a periodic grid, so the total mass
//! changes only by rounding.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::equilibrium_collision::normal_l_moment_at;
use crate::error::{Error, Result};
use crate::potential_geometry::{NormalPotential, QuadratureSpec};
use crate::quadrature::GaussRule;

/// Cutoff of the `e_z` integrals, in units of the thermal speed.
pub const E_CUTOFF: f64 = 9.0;
/// Cutoff of the `v_x` integrals, in units of the thermal speed.
pub const V_CUTOFF: f64 = 9.0;
/// Explicit schemes require `dt <= EXPLICIT_LIMIT * dx^2 / D`.
pub const EXPLICIT_LIMIT: f64 = 0.4;

/// Coefficients of the macroscopic models at `T = 1`, `N = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportCoefficients {
    /// Density diffusivity.
    pub d0n: f64,
    /// Thermal diffusivity at `N = 1`.
    pub d0t: f64,
    /// Pressure-form diffusivity.
    pub c0p: f64,
    /// Pressure-form thermal coefficient.
    pub c0t: f64,
    /// Inter-layer exchange rate.
    pub c_exchange: f64,
    /// Normalization `gamma = <<l M>>`.
    pub gamma: f64,
    /// Relaxation time.
    pub tau_ms: f64,
}

/// Diffusivities at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCoefficients {
    /// `D0n(T)`.
    pub d0n: f64,
    /// `D0T(N, T) / N`.
    pub d0t_per_n: f64,
    /// `gamma(T)`.
    pub gamma: f64,
}

/// `int v^{2k} exp(-v^2 / T) dv` by Gauss-Legendre quadrature with a refinement check.
pub fn velocity_moment(power: i32, temperature: f64, q: &QuadratureSpec) -> Result<f64> {
    let cut = V_CUTOFF * temperature.sqrt();
    q.converged("velocity moment", |rule: &GaussRule| {
        let half = rule.integrate(0.0, cut, |v| v.powi(2 * power) * (-v * v / temperature).exp());
        Ok(2.0 * half)
    })
}

/// Diffusivities at temperature `T`.
pub fn coefficients_at(w: &NormalPotential, tau_ms: f64, temperature: f64, q: &QuadratureSpec) -> Result<ThermalCoefficients> {
    if !(tau_ms > 0.0 && tau_ms.is_finite()) {
        return Err(Error::Domain(format!("tau_ms must be positive, got {tau_ms}")));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    let t = temperature;
    let e_max = E_CUTOFF * t.sqrt() + w.separatrix();
    let l0 = normal_l_moment_at(w, 0, e_max, t, q)?;
    let l1 = normal_l_moment_at(w, 1, e_max, t, q)?;
    let v0 = velocity_moment(0, t, q)?;
    let v1 = velocity_moment(1, t, q)?;
    let v2 = velocity_moment(2, t, q)?;
    let gamma = v0 * l0;
    let gamma_prime = (v1 * l0 + v0 * l1) / (t * t);
    let second = v1 * l0;
    let mixed = (v2 * l0 + v1 * l1) / (t * t);
    Ok(ThermalCoefficients {
        d0n: tau_ms * second / gamma,
        d0t_per_n: tau_ms * (mixed / gamma - gamma_prime / gamma * second / gamma),
        gamma,
    })
}

/// `D0n` at `T = 1`.
pub fn compute_d0n(w: &NormalPotential, tau_ms: f64, q: &QuadratureSpec) -> Result<f64> {
    Ok(coefficients_at(w, tau_ms, 1.0, q)?.d0n)
}

/// `D0T(N, T)`.
pub fn compute_d0t(w: &NormalPotential, tau_ms: f64, n: f64, temperature: f64, q: &QuadratureSpec) -> Result<f64> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("density must be nonnegative, got {n}")));
    }
    Ok(n * coefficients_at(w, tau_ms, temperature, q)?.d0t_per_n)
}

/// `(C0p, C0T) = (D0n / T, D0T - (N / T) D0n)`.
pub fn compute_pressure_coeffs(d0n: f64, d0t: f64, n: f64, temperature: f64) -> Result<(f64, f64)> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    Ok((d0n / temperature, d0t - n / temperature * d0n))
}

/// Numerator `int_{|e| > sqrt(W_m)} |e| exp(-e^2) de` of the exchange rate, by quadrature.
pub fn exchange_numerator(w: &NormalPotential, q: &QuadratureSpec) -> Result<f64> {
    let sep = w.separatrix();
    q.converged("exchange numerator", |rule: &GaussRule| {
        Ok(2.0 * rule.integrate(sep, sep + E_CUTOFF, |e| e * (-e * e).exp()))
    })
}

/// Exchange rate `c(W_m)`.
pub fn compute_exchange_c(w: &NormalPotential, q: &QuadratureSpec) -> Result<f64> {
    if !(w.w_m > 0.0) {
        return Err(Error::Domain(format!("W_m must be positive, got {}", w.w_m)));
    }
    let den = normal_l_moment_at(w, 0, E_CUTOFF + w.separatrix(), 1.0, q)?;
    Ok(exchange_numerator(w, q)? / den)
}

/// All coefficients at `T = 1`, `N = 1`.
pub fn compute_coefficients(w: &NormalPotential, tau_ms: f64, q: &QuadratureSpec) -> Result<TransportCoefficients> {
    let th = coefficients_at(w, tau_ms, 1.0, q)?;
    let (c0p, c0t) = compute_pressure_coeffs(th.d0n, th.d0t_per_n, 1.0, 1.0)?;
    let c_exchange = if w.w_m > 0.0 { compute_exchange_c(w, q)? } else { 0.0 };
    Ok(TransportCoefficients {
        d0n: th.d0n,
        d0t: th.d0t_per_n,
        c0p,
        c0t,
        c_exchange,
        gamma: th.gamma,
        tau_ms,
    })
}

/// Pointwise flux `-D0n dN/dx - D0T dT/dx` of the density form.
pub fn density_form_flux(d0n: f64, d0t: f64, dn_dx: f64, dt_dx: f64) -> f64 {
    -d0n * dn_dx - d0t * dt_dx
}

/// Pointwise flux `-C0p dp/dx - C0T dT/dx` of the pressure form, `p = N T`.
pub fn pressure_form_flux(c0p: f64, c0t: f64, dp_dx: f64, dt_dx: f64) -> f64 {
    -c0p * dp_dx - c0t * dt_dx
}

/// Uniform periodic grid of cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionGrid {
    /// Left end.
    pub x_min: f64,
    /// Interval length.
    pub length: f64,
    /// Number of cells.
    pub nx: usize,
}

impl DiffusionGrid {
    /// Validated grid.
    pub fn new(x_min: f64, length: f64, nx: usize) -> Result<Self> {
        if nx < 2 || !(length > 0.0 && length.is_finite()) || !x_min.is_finite() {
            return Err(Error::InvalidGrid(format!("diffusion grid needs nx >= 2 and length > 0 (nx = {nx}, length = {length})")));
        }
        Ok(Self { x_min, length, nx })
    }

    /// Cell width.
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    /// Cell centres.
    pub fn centers(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|j| self.x_min + (j as f64 + 0.5) * dx).collect()
    }

    /// Face `j` sits between cells `j` and `j + 1` (the last face wraps around).
    pub fn faces(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nx).map(|j| self.x_min + (j as f64 + 1.0) * dx).collect()
    }

    /// Total mass `sum N dx`.
    pub fn mass(&self, n: &[f64]) -> f64 {
        n.iter().sum::<f64>() * self.dx()
    }
}

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    /// Heun's second-order Runge-Kutta.
    #[default]
    Rk2,
    /// Forward Euler.
    ForwardEuler,
    /// Crank-Nicolson (implicit theta scheme with theta = 1/2).
    CrankNicolson,
}

/// Linear flux operator `J_j = -a_j (N_{j+1} - N_j) / dx + p_j N_j + q_j N_{j+1}` with one
/// time-step configuration.
#[derive(Debug, Clone)]
pub struct DiffusionSolver {
    grid: DiffusionGrid,
    dt: f64,
    scheme: TimeScheme,
    a: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    implicit: Option<(DMatrix<f64>, LU<f64, Dyn, Dyn>)>,
}

/// Splits a face velocity into upwind weights on the left and right cell.
fn upwind(u: f64) -> (f64, f64) {
    if u >= 0.0 {
        (u, 0.0)
    } else {
        (0.0, u)
    }
}

impl DiffusionSolver {
    fn build(grid: DiffusionGrid, dt: f64, scheme: TimeScheme, a: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        let dx = grid.dx();
        let amax = a.iter().fold(0.0_f64, |m, v| m.max(*v));
        let umax = p.iter().chain(&q).fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut s = Self {
            grid,
            dt,
            scheme,
            a,
            p,
            q,
            implicit: None,
        };
        match scheme {
            TimeScheme::Rk2 | TimeScheme::ForwardEuler => {
                if amax > 0.0 && dt > EXPLICIT_LIMIT * dx * dx / amax {
                    return Err(Error::Stability(format!(
                        "dt = {dt} exceeds {EXPLICIT_LIMIT} dx^2 / D = {:.6e}",
                        EXPLICIT_LIMIT * dx * dx / amax
                    )));
                }
                if dt * umax / dx > 0.9 {
                    return Err(Error::Stability(format!("drift Courant number {} exceeds 0.9", dt * umax / dx)));
                }
            }
            TimeScheme::CrankNicolson => {
                let n = grid.nx;
                let mut op = DMatrix::<f64>::zeros(n, n);
                let mut unit = vec![0.0; n];
                for c in 0..n {
                    unit[c] = 1.0;
                    let col = s.rate(&unit);
                    for r in 0..n {
                        op[(r, c)] = col[r];
                    }
                    unit[c] = 0.0;
                }
                let lhs = DMatrix::<f64>::identity(n, n) - &op * (0.5 * dt);
                let lu = lhs.clone().lu();
                if !lu.is_invertible() {
                    return Err(Error::NonConvergence("Crank-Nicolson matrix is singular".into()));
                }
                s.implicit = Some((op, lu));
            }
        }
        Ok(s)
    }

    /// Isothermal drift-diffusion `d_t N = d_x (D0n d_x N + tau_ms U' N)`. `force_faces[j]` is
    /// `U'` on face `j`.
    pub fn isothermal(
        grid: DiffusionGrid,
        d0n: f64,
        tau_ms: f64,
        force_faces: &[f64],
        dt: f64,
        scheme: TimeScheme,
    ) -> Result<Self> {
        if force_faces.len() != grid.nx {
            return Err(Error::GridMismatch("force samples do not match the diffusion grid".into()));
        }
        if !(d0n > 0.0) {
            return Err(Error::Domain(format!("D0n must be positive, got {d0n}")));
        }
        let a = vec![d0n; grid.nx];
        let (p, q) = force_faces.iter().map(|f| upwind(-tau_ms * f)).unzip();
        Self::build(grid, dt, scheme, a, p, q)
    }

    /// Non-isothermal model `d_t N = d_x (D0n(T) d_x N + D0T(N, T) d_x T + tau_ms U' N)` for a
    /// prescribed temperature at the cell centres. Face temperatures are arithmetic means and
    /// the `N` inside `D0T` is the upwind cell value.
    pub fn non_isothermal(
        grid: DiffusionGrid,
        coefficients: impl Fn(f64) -> Result<ThermalCoefficients>,
        tau_ms: f64,
        temperature: &[f64],
        force_faces: &[f64],
        dt: f64,
        scheme: TimeScheme,
    ) -> Result<Self> {
        let n = grid.nx;
        if temperature.len() != n || force_faces.len() != n {
            return Err(Error::GridMismatch("temperature or force samples do not match the diffusion grid".into()));
        }
        if temperature.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Domain("temperature must be positive".into()));
        }
        let dx = grid.dx();
        let mut cache: HashMap<u64, ThermalCoefficients> = HashMap::new();
        let mut a = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for j in 0..n {
            let r = (j + 1) % n;
            let tf = 0.5 * (temperature[j] + temperature[r]);
            let co = match cache.get(&tf.to_bits()) {
                Some(c) => *c,
                None => {
                    let c = coefficients(tf)?;
                    cache.insert(tf.to_bits(), c);
                    c
                }
            };
            a.push(co.d0n);
            let (pd, qd) = upwind(-tau_ms * force_faces[j]);
            let dtdx = (temperature[r] - temperature[j]) / dx;
            let (pt, qt) = if dtdx == 0.0 { (0.0, 0.0) } else { upwind(-co.d0t_per_n * dtdx) };
            p.push(pd + pt);
            q.push(qd + qt);
        }
        Self::build(grid, dt, scheme, a, p, q)
    }

    /// Grid.
    pub fn grid(&self) -> &DiffusionGrid {
        &self.grid
    }

    /// Time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Largest step accepted by the explicit schemes: `min(0.4 dx^2 / D_max, 0.9 dx / |u|_max)`.
    pub fn explicit_bound(&self) -> f64 {
        let dx = self.grid.dx();
        let amax = self.a.iter().fold(0.0_f64, |m, v| m.max(*v));
        let umax = self.p.iter().chain(&self.q).fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut b = f64::INFINITY;
        if amax > 0.0 {
            b = EXPLICIT_LIMIT * dx * dx / amax;
        }
        if umax > 0.0 {
            b = b.min(0.9 * dx / umax);
        }
        b
    }

    /// Interface fluxes `J_j` on face `j`.
    pub fn fluxes(&self, n: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx;
        let dx = self.grid.dx();
        (0..nx)
            .map(|j| {
                let r = (j + 1) % nx;
                -self.a[j] * (n[r] - n[j]) / dx + self.p[j] * n[j] + self.q[j] * n[r]
            })
            .collect()
    }

    /// Semi-discrete rate `-(J_j - J_{j-1}) / dx`.
    pub fn rate(&self, n: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx;
        let dx = self.grid.dx();
        let f = self.fluxes(n);
        (0..nx).map(|j| -(f[j] - f[(j + nx - 1) % nx]) / dx).collect()
    }

    fn check(&self, n: &[f64]) -> Result<()> {
        if n.len() != self.grid.nx {
            return Err(Error::GridMismatch(format!(
                "density has {} cells, grid has {}",
                n.len(),
                self.grid.nx
            )));
        }
        Ok(())
    }

    /// Advances one time step.
    pub fn step(&self, n: &mut [f64]) -> Result<()> {
        self.check(n)?;
        let dt = self.dt;
        match self.scheme {
            TimeScheme::ForwardEuler => {
                let k = self.rate(n);
                for (x, r) in n.iter_mut().zip(k) {
                    *x += dt * r;
                }
            }
            TimeScheme::Rk2 => {
                let k1 = self.rate(n);
                let mid: Vec<f64> = n.iter().zip(&k1).map(|(x, r)| x + dt * r).collect();
                let k2 = self.rate(&mid);
                for ((x, a), b) in n.iter_mut().zip(k1).zip(k2) {
                    *x += 0.5 * dt * (a + b);
                }
            }
            TimeScheme::CrankNicolson => {
                let (op, lu) = self.implicit.as_ref().ok_or_else(|| Error::NonConvergence("missing factorization".into()))?;
                let v = DVector::from_column_slice(n);
                let rhs = &v + op * &v * (0.5 * dt);
                let out = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::NonConvergence("Crank-Nicolson solve failed".into()))?;
                n.copy_from_slice(out.as_slice());
            }
        }
        Ok(())
    }

    /// Advances one step of the two-layer system
    /// `d_t N_1 = L N_1 + c (N_2 - N_1)`, `d_t N_2 = L N_2 + c (N_1 - N_2)`.
    /// Only the explicit schemes are supported.
    pub fn step_coupled(&self, n1: &mut [f64], n2: &mut [f64], c: f64) -> Result<()> {
        self.check(n1)?;
        self.check(n2)?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("exchange rate must be nonnegative, got {c}")));
        }
        if c * self.dt > 0.5 {
            return Err(Error::Stability(format!("exchange step c dt = {} exceeds 0.5", c * self.dt)));
        }
        let dt = self.dt;
        let rates = |a: &[f64], b: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut ra = self.rate(a);
            let mut rb = self.rate(b);
            for j in 0..a.len() {
                let x = c * (b[j] - a[j]);
                ra[j] += x;
                rb[j] -= x;
            }
            (ra, rb)
        };
        match self.scheme {
            TimeScheme::ForwardEuler => {
                let (ra, rb) = rates(n1, n2);
                for j in 0..n1.len() {
                    n1[j] += dt * ra[j];
                    n2[j] += dt * rb[j];
                }
            }
            TimeScheme::Rk2 => {
                let (a1, b1) = rates(n1, n2);
                let m1: Vec<f64> = n1.iter().zip(&a1).map(|(x, r)| x + dt * r).collect();
                let m2: Vec<f64> = n2.iter().zip(&b1).map(|(x, r)| x + dt * r).collect();
                let (a2, b2) = rates(&m1, &m2);
                for j in 0..n1.len() {
                    n1[j] += 0.5 * dt * (a1[j] + a2[j]);
                    n2[j] += 0.5 * dt * (b1[j] + b2[j]);
                }
            }
            TimeScheme::CrankNicolson => {
                return Err(Error::Domain("the coupled system supports explicit schemes only".into()));
            }
        }
        Ok(())
    }
}
