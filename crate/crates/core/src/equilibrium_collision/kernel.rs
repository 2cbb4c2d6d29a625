//! Continuum integral kernel of `Theta`, evaluated by adaptive double-exponential quadrature.
//! It serves as an independent check of the discrete operator and never runs inside a solver.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::potential_geometry::{crossing_time_tau_z, Branch, NormalPotential, QuadratureSpec};

/// Absolute error target of each inner `z` integral.
const INNER_TOL: f64 = 1e-14;
/// Absolute error target of each outer `e'` integral piece.
const OUTER_TOL: f64 = 1e-12;
/// Distance beyond `|e|` where the Gaussian tail of the `e'` integral is cut.
const TAIL: f64 = 7.0;

/// Overlap window `[max(z_-(e), z_-(e')), min(z_+(e), z_+(e'))]` of two orbits. For a single-well
/// potential the orbit of the larger energy contains the other one.
pub fn overlap_window(w: &NormalPotential, e_z: f64, e_zp: f64) -> Result<(f64, f64)> {
    let (a1, b1) = w.turning_points_e2(e_z * e_z)?;
    if e_zp.abs() >= e_z.abs() {
        return Ok((a1, b1));
    }
    let (a2, b2) = w.turning_points_e2(e_zp * e_zp)?;
    let window = (a1.max(a2), b1.min(b2));
    if window.0 > window.1 {
        return Err(Error::Domain(format!("orbits of e_z = {e_z} and e_z' = {e_zp} do not overlap")));
    }
    Ok(window)
}

fn de(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    quadrature::integrate(f, a, b, tol).integral
}

/// `k^(e_z, e_z') = (1 / tau_z(e_z)) int sigma_z(z, e_z) |e_z'| sigma_z(z, e_z') Mz(e_z')
/// / (sqrt(pi) exp(-W(z))) dz` over the overlap window.
///
/// `tau_z(e_z)` is taken from the refined Gauss-Legendre quadrature of `q`.
pub fn kernel_khat_eval(w: &NormalPotential, e_z: f64, e_zp: f64, q: &QuadratureSpec) -> Result<f64> {
    let tau = crossing_time_tau_z(w, e_z, q)?;
    khat_with_tau(w, e_z, e_zp, tau)
}

fn khat_with_tau(w: &NormalPotential, e_z: f64, e_zp: f64, tau: f64) -> Result<f64> {
    if e_zp == 0.0 {
        return Ok(0.0);
    }
    overlap_window(w, e_z, e_zp)?;
    let ep2 = e_zp * e_zp;
    if w.is_flat() {
        return Ok((-ep2).exp() / (e_z.abs() * PI.sqrt() * tau));
    }
    let m2 = (e_z * e_z).min(ep2);
    let excess = (e_z * e_z).max(ep2) - m2;
    let (zl, zr) = w.turning_points_e2(m2)?;
    // Both branches are parametrized by z = z_m -/+ s sin^2(theta), whose anchor at theta = pi/2
    // is the turning point of the smaller energy, so that the inverse square roots stay bounded.
    let branch_integral = |branch: Branch, anchor: f64, theta_max: f64| {
        let s = (anchor - w.z_m).abs();
        let sign = if branch == Branch::Left { -1.0 } else { 1.0 };
        let f = |th: f64| {
            let (sn, cs) = th.sin_cos();
            let z = w.z_m + sign * s * sn * sn;
            let d = s * cs * cs;
            let wz = w.eval(z);
            let gap = w.branch_gap(branch, anchor, z, d).unwrap_or(m2 - wz);
            if !(gap > 0.0) {
                return 0.0;
            }
            let jac = 2.0 * s * sn * cs;
            (wz - ep2).exp() * jac / (gap.sqrt() * (gap + excess).sqrt())
        };
        de(f, 0.0, theta_max, INNER_TOL)
    };
    let left = branch_integral(Branch::Left, zl, FRAC_PI_2);
    let right = if m2 < w.w_m {
        branch_integral(Branch::Right, zr, FRAC_PI_2)
    } else {
        let c = w.right_anchor(m2);
        if c.is_finite() {
            let theta_max = ((1.0 - w.z_m) / (c - w.z_m)).sqrt().asin();
            branch_integral(Branch::Right, c, theta_max)
        } else {
            let f = |z: f64| {
                let wz = w.eval(z);
                (wz - ep2).exp() / ((m2 - wz).sqrt() * (m2 + excess - wz).sqrt())
            };
            de(f, w.z_m, 1.0, INNER_TOL)
        }
    };
    Ok(e_zp.abs() * (left + right) / (PI.sqrt() * tau))
}

/// `k(e_z; v_x', e_z') = k^(e_z, e_z') exp(-v_x'^2) / sqrt(pi)`, so that integrating over
/// `v_x'` returns `k^`.
pub fn kernel_k_eval(w: &NormalPotential, e_z: f64, v_xp: f64, e_zp: f64, q: &QuadratureSpec) -> Result<f64> {
    Ok(kernel_khat_eval(w, e_z, e_zp, q)? * (-v_xp * v_xp).exp() / PI.sqrt())
}

/// `int k^(e_z, e') de'` over the real line, split at `0`, `±|e_z|` and the separatrix where
/// `k^` has kinks.
pub fn kernel_khat_row_integral(w: &NormalPotential, e_z: f64, q: &QuadratureSpec) -> Result<f64> {
    let q_ref = QuadratureSpec {
        node_count: q.node_count * q.refinement_factor,
        ..*q
    };
    let tau = crossing_time_tau_z(w, e_z, &q_ref)?;
    let ae = e_z.abs();
    let mut first_err = None;
    let f = |ep: f64| match khat_with_tau(w, e_z, ep, tau) {
        Ok(v) => v,
        Err(_) => f64::NAN,
    };
    let mut breaks = vec![0.0, ae, ae + TAIL];
    let sep = w.separatrix();
    if sep > 0.0 && sep < ae + TAIL && (sep - ae).abs() > 1e-12 {
        breaks.push(sep);
    }
    breaks.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for p in breaks.windows(2) {
        let v = de(&f, p[0], p[1], OUTER_TOL);
        if !v.is_finite() && first_err.is_none() {
            first_err = Some(Error::Domain(format!("kernel row at e_z = {e_z} is not evaluable")));
        }
        total += v;
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_of_larger_energy_contains_smaller() {
        let w = NormalPotential::piecewise_parabolic(4.0, 0.5).unwrap();
        let (a, b) = overlap_window(&w, 1.0, 0.5).unwrap();
        assert!((a - 0.375).abs() < 1e-14 && (b - 0.625).abs() < 1e-14);
        let (a, b) = overlap_window(&w, 1.0, 1.5).unwrap();
        assert!((a - 0.25).abs() < 1e-14 && (b - 0.75).abs() < 1e-14);
    }

    #[test]
    fn kernel_is_nonnegative_and_even_in_second_argument() {
        let w = NormalPotential::piecewise_parabolic(4.0, 0.5).unwrap();
        let q = QuadratureSpec::default();
        for ep in [0.1, 0.7, 1.2, 3.0] {
            let a = kernel_khat_eval(&w, 1.0, ep, &q).unwrap();
            let b = kernel_khat_eval(&w, 1.0, -ep, &q).unwrap();
            assert!(a >= 0.0);
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}
