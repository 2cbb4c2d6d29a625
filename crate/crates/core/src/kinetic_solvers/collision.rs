//! Implicit relaxation step `g = (g* + lambda Theta[g] l M + src) / (1 + lambda)` and its
//! variants with an exchange term that couples each energy cell with its mirror cell.
//!
//! Every variant can be written as `g_j = a_j R_j + b_j R_p(j)` with
//! `R = g* + lambda Theta[g] l M + src` and `p(j)` the mirror of `j`. Taking the normalized
//! density `phi` of both sides gives the `ne x ne` system
//! `(I - lambda L diag(Mz) K) phi = L (phi* + phi_src)`, which is factored once and solved per
//! `x` cell with iterative refinement.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::equilibrium_collision::ThetaOperator;
use crate::error::{Error, Result};

/// Normwise backward-error target `|r| <= tol (|b| + |A| |x|)` of the refined solve.
const RESIDUAL_TOL: f64 = 1e-12;
/// Refinement sweeps allowed before reporting non-convergence.
const MAX_SWEEPS: usize = 200;

/// Mirror-pair coefficients `g_j = diag_j R_j + off_j R_p(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOperator {
    /// Coefficient of the cell itself.
    pub diag: Vec<f64>,
    /// Coefficient of the mirror cell.
    pub off: Vec<f64>,
}

impl PairOperator {
    /// Plain relaxation: `g = R / (1 + lambda)`.
    pub fn relaxation(ne: usize, lambda: f64) -> Self {
        Self {
            diag: vec![1.0 / (1.0 + lambda); ne],
            off: vec![0.0; ne],
        }
    }

    /// Relaxation with the free-molecule loss `alpha_j g(|e_j|)` of the two-group model: the
    /// positive free cell loses its own value, the negative free cell loses the value of its
    /// positive mirror.
    pub fn two_group(theta: &ThetaOperator, lambda: f64, alpha: &[f64]) -> Self {
        let ne = theta.ne();
        let mut diag = vec![1.0 / (1.0 + lambda); ne];
        let mut off = vec![0.0; ne];
        for j in 0..ne {
            let a = alpha[j];
            if a == 0.0 {
                continue;
            }
            if theta.centers()[j] > 0.0 {
                diag[j] = 1.0 / (1.0 + lambda + a);
            } else {
                off[j] = -a / ((1.0 + lambda) * (1.0 + lambda + a));
            }
        }
        Self { diag, off }
    }

    /// Difference equation of the two-layer channel: both cells of a free pair lose
    /// `alpha (D_n + D_p)`.
    pub fn channel_difference(theta: &ThetaOperator, lambda: f64, alpha: &[f64]) -> Self {
        let ne = theta.ne();
        let mut diag = vec![1.0 / (1.0 + lambda); ne];
        let mut off = vec![0.0; ne];
        for j in 0..ne {
            let a = alpha[j];
            if a == 0.0 {
                continue;
            }
            let s = a / ((1.0 + lambda) * (1.0 + lambda + 2.0 * a));
            diag[j] = 1.0 / (1.0 + lambda) - s;
            off[j] = -s;
        }
        Self { diag, off }
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let ne = r.len();
        for j in 0..ne {
            out[j] = self.diag[j] * r[j] + self.off[j] * r[ne - 1 - j];
        }
    }
}

/// How the gain term is rescaled after the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassCorrection {
    /// Gain mass equals the pre-collision mass (pure relaxation).
    Conserve,
    /// Gain left as solved (exchange present, mass is not an invariant).
    Unscaled,
}

/// Factored implicit relaxation for one `lambda` and one pair operator.
#[derive(Debug, Clone)]
pub struct CollisionPlan {
    ne: usize,
    lambda: f64,
    pair: PairOperator,
    correction: MassCorrection,
    matrix: DMatrix<f64>,
    norm: f64,
    lu: LU<f64, Dyn, Dyn>,
    kernel: Vec<f64>,
    l: Vec<f64>,
    mz: Vec<f64>,
    de: Vec<f64>,
}

impl CollisionPlan {
    /// Factors `I - lambda L diag(Mz) K`.
    pub fn new(theta: &ThetaOperator, lambda: f64, pair: PairOperator, correction: MassCorrection) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain(format!("relaxation factor lambda must be positive, got {lambda}")));
        }
        let ne = theta.ne();
        let k = theta.kernel();
        let mz = theta.mz();
        let mut matrix = DMatrix::<f64>::identity(ne, ne);
        for j in 0..ne {
            let p = ne - 1 - j;
            for c in 0..ne {
                let dk = pair.diag[j] * mz[j] * k[j * ne + c] + pair.off[j] * mz[p] * k[p * ne + c];
                matrix[(j, c)] -= lambda * dk;
            }
        }
        let norm = matrix.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let lu = matrix.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::NonConvergence("relaxation matrix is singular".into()));
        }
        Ok(Self {
            ne,
            lambda,
            pair,
            correction,
            matrix,
            norm,
            lu,
            kernel: k.to_vec(),
            l: theta.l().to_vec(),
            mz: mz.to_vec(),
            de: theta.widths().to_vec(),
        })
    }

    /// Relaxation factor.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = self
            .lu
            .solve(b)
            .ok_or_else(|| Error::NonConvergence("LU back-substitution failed".into()))?;
        for _ in 0..MAX_SWEEPS {
            let scale = (b.amax() + self.norm * x.amax()).max(f64::MIN_POSITIVE);
            let r = b - &self.matrix * &x;
            if r.amax() <= RESIDUAL_TOL * scale {
                return Ok(x);
            }
            let dx = self
                .lu
                .solve(&r)
                .ok_or_else(|| Error::NonConvergence("LU back-substitution failed".into()))?;
            x += dx;
        }
        Err(Error::NonConvergence(format!(
            "relaxation residual above {RESIDUAL_TOL:e} after {MAX_SWEEPS} refinement sweeps"
        )))
    }

    /// Relaxes one `x` slice in place. `g` holds `rows x ne` values, `weights[i]` and `mx[i]` are
    /// the tangential quadrature weight and Maxwellian of row `i`, `c_x = sum weights * mx`.
    /// `src`, when given, is added to `R` before the pair operator.
    pub fn apply(&self, g: &mut [f64], src: Option<&[f64]>, weights: &[f64], mx: &[f64], c_x: f64) -> Result<()> {
        let ne = self.ne;
        let phi_of = |a: &[f64]| {
            let mut phi = vec![0.0; ne];
            for (row, w) in a.chunks_exact(ne).zip(weights) {
                if *w == 0.0 {
                    continue;
                }
                for k in 0..ne {
                    phi[k] += row[k] * w;
                }
            }
            for k in 0..ne {
                phi[k] /= self.l[k] * c_x;
            }
            phi
        };
        let mut base = phi_of(g);
        if let Some(s) = src {
            for (b, p) in base.iter_mut().zip(phi_of(s)) {
                *b += p;
            }
        }
        let mut rhs = vec![0.0; ne];
        self.pair.apply(&base, &mut rhs);
        let phi = self.solve(&DVector::from_vec(rhs))?;
        let theta: Vec<f64> = (0..ne)
            .map(|j| (0..ne).map(|c| self.kernel[j * ne + c] * phi[c]).sum())
            .collect();
        let r = match self.correction {
            MassCorrection::Conserve => {
                let gain_mass: f64 =
                    c_x * (0..ne).map(|k| theta[k] * self.l[k] * self.mz[k] * self.de[k]).sum::<f64>();
                let mut m = 0.0;
                for (row, w) in g.chunks_exact(ne).zip(weights) {
                    m += w * row.iter().zip(&self.de).map(|(a, b)| a * b).sum::<f64>();
                }
                if gain_mass != 0.0 {
                    m / gain_mass
                } else {
                    1.0
                }
            }
            MassCorrection::Unscaled => 1.0,
        };
        let mut row_r = vec![0.0; ne];
        for (i, row) in g.chunks_exact_mut(ne).enumerate() {
            for k in 0..ne {
                let gain = self.lambda * r * theta[k] * self.l[k] * mx[i] * self.mz[k];
                row_r[k] = row[k] + gain + src.map_or(0.0, |s| s[i * ne + k]);
            }
            self.pair.apply(&row_r, row);
        }
        Ok(())
    }
}
