//! Discrete redistribution operator `Theta` on a separatrix-aligned `e_z` axis.
//!
//! Densities are cell constants in `e_z`, so the `e_z`-integral of `|e| sigma_z(z, e)` over
//! a cell is taken exactly:
//! `A_k(z) = sqrt(b^2 - W(z))_+ - sqrt(a^2 - W(z))_+` for the cell `[a, b]` (mirrored for
//! negative cells). The `z`-integrals use Gauss-Legendre nodes on the intervals delimited
//! by the turning points of every cell edge, each mapped by `z = p + (q - p) sin^2(theta)`.
//! With the cell-averaged trap lengths `l_j = (1/de_j) sum_q w_q A_j(z_q)` and the discrete
//! normalization `gamma0_hat(z) = sum_k A_k(z) Mz_k`, the operator satisfies
//! `Theta[l M] = 1` and `mass(Theta[g] l M) = mass(g)` up to rounding, for any resolution.

use crate::equilibrium_collision::grid::Axis;
use crate::error::{Error, Result};
use crate::potential_geometry::{NormalPotential, QuadratureSpec};
use crate::quadrature::GaussRule;

/// Precomputed discrete `Theta` operator for one normal potential and one `e_z` axis.
#[derive(Debug, Clone)]
pub struct ThetaOperator {
    ne: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
    l: Vec<f64>,
    mz: Vec<f64>,
    free: Vec<bool>,
    zq: Vec<f64>,
    wq: Vec<f64>,
    a: Vec<f64>,
    gamma0_hat: Vec<f64>,
    kernel: Vec<f64>,
}

/// Cell-integrated `|e| sigma_z` weight of the positive cell `[lo, hi]` at potential value `w`.
pub(crate) fn cell_weight(lo: f64, hi: f64, w: f64) -> f64 {
    let top = (hi * hi - w).max(0.0).sqrt();
    let bottom = (lo * lo - w).max(0.0).sqrt();
    top - bottom
}

fn positive_bounds(edges: &[f64], j: usize) -> (f64, f64) {
    let (a, b) = (edges[j], edges[j + 1]);
    if b <= 0.0 {
        (-b, -a)
    } else {
        (a.max(0.0), b)
    }
}

fn z_nodes(w: &NormalPotential, edges: &[f64], rule: &GaussRule) -> Result<(Vec<f64>, Vec<f64>)> {
    let top = edges.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let (z_lo, _) = w.turning_points_e2(top * top)?;
    let mut breaks = vec![z_lo, 1.0];
    if !w.is_flat() {
        breaks.push(w.z_m);
        for e in edges.iter().filter(|e| **e > 0.0) {
            let (zl, zr) = w.turning_points_e2(e * e)?;
            breaks.push(zl);
            if zr < 1.0 {
                breaks.push(zr);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for p in breaks.windows(2) {
        if p[1] > p[0] {
            rule.push_sin2(p[0], p[1], p[1], &mut xs, &mut ws);
        }
    }
    Ok((xs, ws))
}

fn cell_lengths(w: &NormalPotential, axis: &Axis, rule: &GaussRule) -> Result<Vec<f64>> {
    let (zq, wq) = z_nodes(w, axis.edges(), rule)?;
    let mut l = vec![0.0; axis.len()];
    for (z, wt) in zq.iter().zip(&wq) {
        let wz = w.eval(*z);
        for (j, lj) in l.iter_mut().enumerate() {
            let (lo, hi) = positive_bounds(axis.edges(), j);
            *lj += wt * cell_weight(lo, hi, wz);
        }
    }
    for (lj, dw) in l.iter_mut().zip(axis.widths()) {
        *lj /= dw;
    }
    Ok(l)
}

impl ThetaOperator {
    /// Builds the operator. The axis must be symmetric and aligned with `sqrt(W_m)`;
    /// the cell trap lengths are checked against a refined quadrature.
    pub fn new(w: &NormalPotential, axis: &Axis, q: &QuadratureSpec) -> Result<Self> {
        q.validate()?;
        if !axis.is_symmetric() {
            return Err(Error::InvalidGrid("e_z axis must be symmetric about 0".into()));
        }
        axis.check_aligned(w.separatrix())?;
        let rule = GaussRule::new(q.node_count);
        let fine = GaussRule::new(q.node_count * q.refinement_factor);
        let l = cell_lengths(w, axis, &rule)?;
        let l_ref = cell_lengths(w, axis, &fine)?;
        for (j, (a, b)) in l.iter().zip(&l_ref).enumerate() {
            if (a - b).abs() > q.tolerance * b.abs() {
                return Err(Error::Quadrature {
                    what: format!("cell trap length l[{j}]"),
                    coarse: *a,
                    refined: *b,
                    tolerance: q.tolerance,
                });
            }
        }
        let (zq, wq) = z_nodes(w, axis.edges(), &rule)?;
        let ne = axis.len();
        let nq = zq.len();
        let mut a = vec![0.0; nq * ne];
        for (qi, z) in zq.iter().enumerate() {
            let wz = w.eval(*z);
            for j in 0..ne {
                let (lo, hi) = positive_bounds(axis.edges(), j);
                a[qi * ne + j] = cell_weight(lo, hi, wz);
            }
        }
        let centers = axis.centers().to_vec();
        let mz: Vec<f64> = centers.iter().map(|e| (-e * e).exp()).collect();
        let gamma0_hat: Vec<f64> = (0..nq)
            .map(|qi| (0..ne).map(|k| a[qi * ne + k] * mz[k]).sum())
            .collect();
        let widths = axis.widths().to_vec();
        let mut kernel = vec![0.0; ne * ne];
        for qi in 0..nq {
            let row = &a[qi * ne..(qi + 1) * ne];
            let s = wq[qi] / gamma0_hat[qi];
            for j in 0..ne {
                let aj = row[j] * s;
                if aj == 0.0 {
                    continue;
                }
                for k in 0..ne {
                    kernel[j * ne + k] += aj * row[k];
                }
            }
        }
        for j in 0..ne {
            let d = l[j] * widths[j];
            for k in 0..ne {
                kernel[j * ne + k] /= d;
            }
        }
        let sep = w.separatrix();
        let free = centers.iter().map(|e| e.abs() > sep).collect();
        Ok(Self {
            ne,
            centers,
            widths,
            l,
            mz,
            free,
            zq,
            wq,
            a,
            gamma0_hat,
            kernel,
        })
    }

    /// Number of `e_z` cells.
    pub fn ne(&self) -> usize {
        self.ne
    }

    /// Cell centres.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Cell widths.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Cell-averaged trap lengths.
    pub fn l(&self) -> &[f64] {
        &self.l
    }

    /// Cell crossing times `l_j / |e_j|`.
    pub fn tau(&self, j: usize) -> f64 {
        self.l[j] / self.centers[j].abs()
    }

    /// Normal Maxwellian `exp(-e_j^2)` at cell centres.
    pub fn mz(&self) -> &[f64] {
        &self.mz
    }

    /// Free-molecule flags (`|e_j| > sqrt(W_m)`).
    pub fn free(&self) -> &[bool] {
        &self.free
    }

    /// Kernel matrix `K` (`ne x ne`, row-major) with `Theta = K phi` and `K Mz = 1`.
    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    /// `z` quadrature nodes.
    pub fn z_nodes(&self) -> &[f64] {
        &self.zq
    }

    /// `z` quadrature weights.
    pub fn z_weights(&self) -> &[f64] {
        &self.wq
    }

    /// Discrete `gamma_0` profile at the quadrature nodes divided by the tangential moment.
    pub fn gamma0_hat(&self) -> &[f64] {
        &self.gamma0_hat
    }

    /// Sum of `l_j Mz_j de_j`, the normal factor of the discrete `gamma`.
    pub fn normal_moment(&self) -> f64 {
        (0..self.ne).map(|j| self.l[j] * self.mz[j] * self.widths[j]).sum()
    }

    /// Normalized cell densities `phi_k = sum_i g_ik w_i / (l_k c_x)` of one phase-space
    /// slice `g` (row-major `(i, k)`).
    pub fn phi(&self, g: &[f64], weights: &[f64], c_x: f64) -> Vec<f64> {
        let ne = self.ne;
        let mut phi = vec![0.0; ne];
        for (row, w) in g.chunks_exact(ne).zip(weights) {
            for k in 0..ne {
                phi[k] += row[k] * w;
            }
        }
        for k in 0..ne {
            phi[k] /= self.l[k] * c_x;
        }
        phi
    }

    /// `Theta` from normalized densities via the density profile `n(z)`.
    pub fn theta_from_phi(&self, phi: &[f64]) -> Vec<f64> {
        let ne = self.ne;
        let mut theta = vec![0.0; ne];
        for (qi, row) in self.a.chunks_exact(ne).enumerate() {
            let n: f64 = row.iter().zip(phi).map(|(a, p)| a * p).sum();
            let s = self.wq[qi] * n / self.gamma0_hat[qi];
            for j in 0..ne {
                theta[j] += row[j] * s;
            }
        }
        for j in 0..ne {
            theta[j] /= self.l[j] * self.widths[j];
        }
        theta
    }

    /// `Theta = K phi` through the precomputed kernel.
    pub fn theta_from_phi_kernel(&self, phi: &[f64]) -> Vec<f64> {
        let ne = self.ne;
        (0..ne)
            .map(|j| self.kernel[j * ne..(j + 1) * ne].iter().zip(phi).map(|(k, p)| k * p).sum())
            .collect()
    }

    /// Discrete mass `sum_k Theta_k l_k Mz_k de_k` of the gain `Theta l M` per unit tangential moment.
    pub fn gain_mass(&self, theta: &[f64]) -> f64 {
        (0..self.ne).map(|j| theta[j] * self.l[j] * self.mz[j] * self.widths[j]).sum()
    }

    /// Discrete mass `sum_k phi_k l_k de_k` per unit tangential moment.
    pub fn phi_mass(&self, phi: &[f64]) -> f64 {
        (0..self.ne).map(|k| phi[k] * self.l[k] * self.widths[k]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential_geometry::trap_length_l;

    fn wall_axis() -> (NormalPotential, Axis) {
        let w = NormalPotential::inverse_square_wall(4.0, 0.5).unwrap();
        let axis = Axis::separatrix_aligned(16, 6.0, 2.0).unwrap();
        (w, axis)
    }

    #[test]
    fn kernel_rows_reproduce_fixed_point() {
        let (w, axis) = wall_axis();
        let op = ThetaOperator::new(&w, &axis, &QuadratureSpec::default()).unwrap();
        let theta = op.theta_from_phi(op.mz());
        for t in theta {
            assert!((t - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn cell_lengths_match_continuum_average() {
        let (w, axis) = wall_axis();
        let q = QuadratureSpec::default();
        let op = ThetaOperator::new(&w, &axis, &q).unwrap();
        let rule = GaussRule::new(24);
        for j in 0..axis.len() {
            let (a, b) = (axis.edges()[j], axis.edges()[j + 1]);
            let avg = rule.integrate_sin2(a, b, b, |e| trap_length_l(&w, e, &q).unwrap()) / (b - a);
            assert!((avg - op.l()[j]).abs() < 1e-6 * avg, "cell {j}: {avg} vs {}", op.l()[j]);
        }
    }

    #[test]
    fn misaligned_axis_is_rejected() {
        let w = NormalPotential::inverse_square_wall(4.0, 0.5).unwrap();
        let axis = Axis::uniform_symmetric(10, 6.0).unwrap();
        assert!(ThetaOperator::new(&w, &axis, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn flat_layer_lengths_are_one() {
        let axis = Axis::uniform_symmetric(8, 6.0).unwrap();
        let op = ThetaOperator::new(&NormalPotential::flat(), &axis, &QuadratureSpec::default()).unwrap();
        for l in op.l() {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }
}
