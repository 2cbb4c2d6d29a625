//! Discrete orbit-averaged operator `Theta_bar` of the mesoscopic model.
//!
//! The tangential equivalent velocity `e_x` is discretized on a separatrix-aligned axis and
//! the `e_x`-integral of `|e| sigma_x^#(y, e)` over a cell is taken exactly:
//! `B_i(y) = sqrt(b^2 - U^(y))_+ - sqrt(a^2 - U^(y))_+`. The fast variable `y` is integrated
//! over one period with Gauss-Legendre nodes between the turning points of every cell edge.
//!
//! With `S_i = sum_p w_p B_i(y_p)` and `beta(y) = sum_i B_i(y) Mx_i` the cell-averaged operator is
//! `Theta_bar_ik = sum_i' R_ii' (K u_i')_k` with `R_ii' = sum_p w_p B_i B_i' / (beta S_i)` and
//! `u = h / l`. It satisfies `Theta_bar[l M] = 1` and conserves the weighted mass
//! `sum_ik h_ik S_i de_k`.

use crate::equilibrium_collision::grid::Axis;
use crate::equilibrium_collision::theta::{cell_weight, ThetaOperator};
use crate::error::{Error, Result};
use crate::potential_geometry::{QuadratureSpec, TangentialPotential};
use crate::quadrature::GaussRule;

/// Tangential cell weights of one fast-variable position.
#[derive(Debug, Clone)]
pub struct TangentialWeights {
    /// Cell-integrated `|e| sigma_x^#` per `e_x` cell.
    pub b: Vec<f64>,
    /// `sum_i b_i Mx_i`.
    pub beta: f64,
}

/// Precomputed orbit-averaged operator.
#[derive(Debug, Clone)]
pub struct ThetaBarOperator {
    nex: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
    mx: Vec<f64>,
    bound: Vec<bool>,
    yq: Vec<f64>,
    wq: Vec<f64>,
    b: Vec<f64>,
    beta: Vec<f64>,
    s: Vec<f64>,
    r: Vec<f64>,
    velocity: Vec<f64>,
}

fn positive_bounds(edges: &[f64], j: usize) -> (f64, f64) {
    let (a, b) = (edges[j], edges[j + 1]);
    if b <= 0.0 {
        (-b, -a)
    } else {
        (a.max(0.0), b)
    }
}

/// Tangential cell weights `B_i` at potential value `u`.
pub fn tangential_weights(axis: &Axis, u: f64) -> TangentialWeights {
    let b: Vec<f64> = (0..axis.len())
        .map(|i| {
            let (lo, hi) = positive_bounds(axis.edges(), i);
            cell_weight(lo, hi, u)
        })
        .collect();
    let beta = b
        .iter()
        .zip(axis.centers())
        .map(|(bi, e)| bi * (-e * e).exp())
        .sum();
    TangentialWeights { b, beta }
}

fn y_nodes(u: &TangentialPotential, edges: &[f64], rule: &GaussRule) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut breaks = vec![-1.0, 1.0];
    if !u.is_flat() {
        breaks.push(u.y_min());
        for e in edges.iter().filter(|e| **e > 0.0 && e.powi(2) < u.u_m) {
            let (yl, yr) = u.turning_points_e2(e * e)?;
            breaks.push(yl);
            breaks.push(yr);
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

fn period_sums(u: &TangentialPotential, axis: &Axis, rule: &GaussRule) -> Result<Vec<f64>> {
    let (yq, wq) = y_nodes(u, axis.edges(), rule)?;
    let mut s = vec![0.0; axis.len()];
    for (y, w) in yq.iter().zip(&wq) {
        let tw = tangential_weights(axis, u.eval(*y));
        for (si, bi) in s.iter_mut().zip(&tw.b) {
            *si += w * bi;
        }
    }
    Ok(s)
}

impl ThetaBarOperator {
    /// Builds the operator on a symmetric `e_x` axis aligned with `sqrt(U_m)`.
    pub fn new(u: &TangentialPotential, axis: &Axis, q: &QuadratureSpec) -> Result<Self> {
        q.validate()?;
        if !axis.is_symmetric() {
            return Err(Error::InvalidGrid("e_x axis must be symmetric about 0".into()));
        }
        if !u.is_flat() {
            axis.check_aligned(u.separatrix())?;
        }
        let rule = GaussRule::new(q.node_count);
        let s = period_sums(u, axis, &rule)?;
        let s_ref = period_sums(u, axis, &GaussRule::new(q.node_count * q.refinement_factor))?;
        for (i, (a, b)) in s.iter().zip(&s_ref).enumerate() {
            if (a - b).abs() > q.tolerance * b.abs() {
                return Err(Error::Quadrature {
                    what: format!("tangential period sum S[{i}]"),
                    coarse: *a,
                    refined: *b,
                    tolerance: q.tolerance,
                });
            }
        }
        let (yq, wq) = y_nodes(u, axis.edges(), &rule)?;
        let nex = axis.len();
        let mut b = Vec::with_capacity(yq.len() * nex);
        let mut beta = Vec::with_capacity(yq.len());
        for y in &yq {
            let tw = tangential_weights(axis, u.eval(*y));
            b.extend_from_slice(&tw.b);
            beta.push(tw.beta);
        }
        let mut r = vec![0.0; nex * nex];
        for (p, row) in b.chunks_exact(nex).enumerate() {
            let f = wq[p] / beta[p];
            for i in 0..nex {
                let bi = row[i] * f;
                if bi == 0.0 {
                    continue;
                }
                for k in 0..nex {
                    r[i * nex + k] += bi * row[k];
                }
            }
        }
        for i in 0..nex {
            for k in 0..nex {
                r[i * nex + k] /= s[i];
            }
        }
        let centers = axis.centers().to_vec();
        let widths = axis.widths().to_vec();
        let mx = centers.iter().map(|e| (-e * e).exp()).collect();
        let bound: Vec<bool> = centers
            .iter()
            .map(|e| !u.is_flat() && e * e <= u.u_m)
            .collect();
        let velocity = (0..nex)
            .map(|i| {
                if bound[i] {
                    0.0
                } else {
                    let (lo, hi) = (axis.edges()[i], axis.edges()[i + 1]);
                    (hi * hi - lo * lo) / s[i]
                }
            })
            .collect();
        Ok(Self {
            nex,
            centers,
            widths,
            mx,
            bound,
            yq,
            wq,
            b,
            beta,
            s,
            r,
            velocity,
        })
    }

    /// Number of `e_x` cells.
    pub fn nex(&self) -> usize {
        self.nex
    }

    /// `e_x` cell centres.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `e_x` cell widths.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Tangential Maxwellian `exp(-e_x^2)` at cell centres.
    pub fn mx(&self) -> &[f64] {
        &self.mx
    }

    /// Bound-cell flags (`e_x^2 <= U_m`).
    pub fn bound(&self) -> &[bool] {
        &self.bound
    }

    /// Period sums `S_i = int_{-1}^{1} B_i dy = 2 int_cell |e| sigma_bar_x de`.
    pub fn period_sums(&self) -> &[f64] {
        &self.s
    }

    /// Cell-averaged mass weights `|e_x| sigma_bar_x`, equal to `S_i / (2 de_i)`.
    pub fn mass_weights(&self) -> Vec<f64> {
        self.s.iter().zip(&self.widths).map(|(s, w)| 0.5 * s / w).collect()
    }

    /// Transport velocity of each cell: zero for bound cells, the cell-averaged orbit
    /// velocity `int_cell e de / (S_i / 2)` otherwise.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Mixing matrix `R` (`nex x nex`, row-major).
    pub fn mixing(&self) -> &[f64] {
        &self.r
    }

    /// Fast-variable quadrature nodes.
    pub fn y_nodes(&self) -> &[f64] {
        &self.yq
    }

    /// Fast-variable quadrature weights.
    pub fn y_weights(&self) -> &[f64] {
        &self.wq
    }

    /// Tangential moment `sum_i S_i Mx_i`, the tangential factor of the meso `gamma`.
    pub fn tangential_moment(&self) -> f64 {
        self.s.iter().zip(&self.mx).map(|(s, m)| s * m).sum()
    }

    /// `Theta_bar[h]` for one slice `h` (row-major `(i, k)` over `e_x`, `e_z`) via `R` and `K`.
    pub fn apply(&self, theta: &ThetaOperator, h: &[f64]) -> Vec<f64> {
        let ne = theta.ne();
        let nex = self.nex;
        let mut ku = vec![0.0; nex * ne];
        for i in 0..nex {
            let u: Vec<f64> = (0..ne).map(|k| h[i * ne + k] / theta.l()[k]).collect();
            let t = theta.theta_from_phi_kernel(&u);
            ku[i * ne..(i + 1) * ne].copy_from_slice(&t);
        }
        let mut out = vec![0.0; nex * ne];
        for i in 0..nex {
            for ip in 0..nex {
                let rv = self.r[i * nex + ip];
                if rv == 0.0 {
                    continue;
                }
                for k in 0..ne {
                    out[i * ne + k] += rv * ku[ip * ne + k];
                }
            }
        }
        out
    }

    /// `Theta_bar[h]` evaluated through the fast-variable profile `Theta(y, e_z)` (independent path).
    pub fn apply_by_profile(&self, theta: &ThetaOperator, h: &[f64]) -> Vec<f64> {
        let ne = theta.ne();
        let nex = self.nex;
        let mut out = vec![0.0; nex * ne];
        for (p, row) in self.b.chunks_exact(nex).enumerate() {
            let mut phi = vec![0.0; ne];
            for i in 0..nex {
                for k in 0..ne {
                    phi[k] += h[i * ne + k] * row[i];
                }
            }
            for k in 0..ne {
                phi[k] /= theta.l()[k] * self.beta[p];
            }
            let t = theta.theta_from_phi(&phi);
            for i in 0..nex {
                let f = self.wq[p] * row[i];
                for k in 0..ne {
                    out[i * ne + k] += f * t[k];
                }
            }
        }
        for i in 0..nex {
            for k in 0..ne {
                out[i * ne + k] /= self.s[i];
            }
        }
        out
    }
}
