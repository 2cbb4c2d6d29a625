//! Cell-centred velocity and energy axes.

use crate::error::{Error, Result};

/// One-dimensional finite-volume axis described by its cell edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    edges: Vec<f64>,
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Axis {
    /// Builds an axis from strictly ascending edges.
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidGrid("an axis needs at least one cell".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("axis edges must be finite and strictly ascending".into()));
        }
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { edges, centers, widths })
    }

    /// `n` equal cells on `[-max, max]`; `n` must be even so that 0 is an edge, never a centre.
    pub fn uniform_symmetric(n: usize, max: f64) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("symmetric axis needs an even cell count, got {n}")));
        }
        if !(max > 0.0) {
            return Err(Error::InvalidGrid(format!("axis cutoff must be positive, got {max}")));
        }
        let edges = (0..=n).map(|k| max * (2.0 * k as f64 / n as f64 - 1.0)).collect::<Vec<_>>();
        let mut axis = Self::from_edges(edges)?;
        axis.symmetrize();
        Ok(axis)
    }

    /// `n` cells on `[-max, max]` with edges at `0` and `±sep`. Each half carries
    /// `round(n/2 * sep / max)` (at least one, at most `n/2 - 1`) uniform cells inside the
    /// separatrix and uniform cells outside it. `sep = 0` gives the uniform axis.
    pub fn separatrix_aligned(n: usize, max: f64, sep: f64) -> Result<Self> {
        if sep == 0.0 {
            return Self::uniform_symmetric(n, max);
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "separatrix-aligned axis needs an even cell count >= 4, got {n}"
            )));
        }
        if !(sep > 0.0 && sep < max) {
            return Err(Error::InvalidGrid(format!(
                "separatrix {sep} must lie strictly inside (0, {max})"
            )));
        }
        let half = n / 2;
        let inner = ((half as f64 * sep / max).round() as usize).clamp(1, half - 1);
        let outer = half - inner;
        let mut positive = Vec::with_capacity(half + 1);
        for k in 0..=inner {
            positive.push(sep * k as f64 / inner as f64);
        }
        for k in 1..=outer {
            positive.push(sep + (max - sep) * k as f64 / outer as f64);
        }
        positive[inner] = sep;
        positive[half] = max;
        let mut edges: Vec<f64> = positive[1..].iter().rev().map(|e| -e).collect();
        edges.extend_from_slice(&positive);
        let mut axis = Self::from_edges(edges)?;
        axis.symmetrize();
        Ok(axis)
    }

    fn symmetrize(&mut self) {
        let n = self.edges.len() - 1;
        for k in 0..=n / 2 {
            let v = 0.5 * (self.edges[n - k] - self.edges[k]);
            self.edges[k] = -v;
            self.edges[n - k] = v;
        }
        if n % 2 == 0 {
            self.edges[n / 2] = 0.0;
        }
        for j in 0..n {
            self.centers[j] = 0.5 * (self.edges[j] + self.edges[j + 1]);
            self.widths[j] = self.edges[j + 1] - self.edges[j];
        }
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    /// True for an axis without cells (never for a constructed axis).
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Cell edges.
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Cell centres.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Cell widths.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Index of the mirror cell `-c_j`.
    pub fn partner(&self, j: usize) -> usize {
        self.len() - 1 - j
    }

    /// Largest edge magnitude.
    pub fn max_abs(&self) -> f64 {
        self.edges[0].abs().max(self.edges[self.len()].abs())
    }

    /// True when the edge set is invariant under negation and no centre is zero.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        n % 2 == 0 && (0..=n).all(|k| (self.edges[k] + self.edges[n - k]).abs() <= 1e-13 * self.max_abs())
    }

    /// Fails when a cell straddles `|e| = sep`.
    pub fn check_aligned(&self, sep: f64) -> Result<()> {
        let tol = 1e-12 * self.max_abs().max(1.0);
        for w in self.edges.windows(2) {
            let (a, b) = (w[0].abs().min(w[1].abs()), w[0].abs().max(w[1].abs()));
            if w[0] < 0.0 && w[1] > 0.0 {
                continue;
            }
            if a < sep - tol && b > sep + tol {
                return Err(Error::InvalidGrid(format!(
                    "cell [{}, {}] straddles the separatrix |e| = {sep}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Pair of axes for the tangential variable (`v_x` or `e_x`) and the normal energy `e_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    /// Tangential velocity or tangential equivalent velocity.
    pub x_axis: Axis,
    /// Normal equivalent velocity.
    pub ez: Axis,
}

impl EnergyGrid {
    /// Validates symmetry of both axes.
    pub fn new(x_axis: Axis, ez: Axis) -> Result<Self> {
        if !x_axis.is_symmetric() || !ez.is_symmetric() {
            return Err(Error::InvalidGrid("velocity and energy axes must be symmetric about 0".into()));
        }
        Ok(Self { x_axis, ez })
    }

    /// Uniform tangential axis and a normal axis aligned with the well separatrix `sqrt(W_m)`.
    pub fn aligned(nv: usize, v_max: f64, ne: usize, e_max: f64, w_sep: f64) -> Result<Self> {
        Self::new(
            Axis::uniform_symmetric(nv, v_max)?,
            Axis::separatrix_aligned(ne, e_max, w_sep)?,
        )
    }

    /// Tangential cutoff.
    pub fn v_max(&self) -> f64 {
        self.x_axis.max_abs()
    }

    /// Normal cutoff.
    pub fn e_max(&self) -> f64 {
        self.ez.max_abs()
    }

    /// Number of tangential cells.
    pub fn nv(&self) -> usize {
        self.x_axis.len()
    }

    /// Number of normal cells.
    pub fn ne(&self) -> usize {
        self.ez.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_axis_is_symmetric_and_skips_zero() {
        let a = Axis::uniform_symmetric(8, 6.0).unwrap();
        assert!(a.is_symmetric());
        assert!(a.centers().iter().all(|c| *c != 0.0));
        assert_eq!(a.edges()[4], 0.0);
        assert!(Axis::uniform_symmetric(7, 6.0).is_err());
    }

    #[test]
    fn aligned_axis_has_separatrix_edge() {
        let a = Axis::separatrix_aligned(32, 6.0, 2.0).unwrap();
        assert!(a.is_symmetric());
        assert!(a.edges().contains(&2.0));
        assert!(a.edges().contains(&-2.0));
        a.check_aligned(2.0).unwrap();
        let u = Axis::uniform_symmetric(32, 6.0).unwrap();
        assert!(u.check_aligned(2.1).is_err());
    }

    #[test]
    fn partner_mirrors_centres() {
        let a = Axis::separatrix_aligned(10, 4.0, 1.0).unwrap();
        for j in 0..a.len() {
            assert!((a.centers()[j] + a.centers()[a.partner(j)]).abs() < 1e-14);
        }
    }
}
