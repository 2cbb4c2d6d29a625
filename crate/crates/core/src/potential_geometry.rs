//! Normal and tangential interaction potentials and the orbit geometry derived from them:
//! turning points, crossing times, trap lengths, orbit-averaged tangential velocities.
//!
//! All quantities are dimensionless. Energies are measured in units of `kT`, so a molecule
//! with equivalent normal velocity `e_z` turns where `W(z) = e_z^2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{GaussRule, OrbitNode};
use crate::spline::{bisect_monotone, MonotoneCubic};

/// Default lower limit of every z-integral.
pub const DEFAULT_Z_FLOOR: f64 = 1e-4;
/// Default value the repulsive branch must reach at the floor, in units of `kT`.
pub const DEFAULT_REPULSIVE_CAP: f64 = 100.0;

/// Gauss-Legendre resolution with a refinement self-check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Nodes per integration branch.
    pub node_count: usize,
    /// Multiplier used for the refined comparison run.
    pub refinement_factor: usize,
    /// Relative disagreement allowed between the two runs.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            node_count: 32,
            refinement_factor: 2,
            tolerance: 1e-10,
        }
    }
}

impl QuadratureSpec {
    /// Checks `node_count >= 8`, `refinement_factor >= 2`, `tolerance > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.node_count < 8 || self.refinement_factor < 2 || !(self.tolerance > 0.0) {
            return Err(Error::Domain(format!(
                "quadrature settings need node_count >= 8, refinement_factor >= 2, tolerance > 0 (got {:?})",
                self
            )));
        }
        Ok(())
    }

    /// Evaluates `f` with the base and the refined rule and returns the refined value when
    /// both agree to the relative tolerance.
    pub fn converged<F: Fn(&GaussRule) -> Result<f64>>(&self, what: &str, f: F) -> Result<f64> {
        self.validate()?;
        let coarse = f(&GaussRule::new(self.node_count))?;
        let refined = f(&GaussRule::new(self.node_count * self.refinement_factor))?;
        let scale = refined.abs().max(f64::MIN_POSITIVE);
        if (coarse - refined).abs() > self.tolerance * scale {
            return Err(Error::Quadrature {
                what: what.to_string(),
                coarse,
                refined,
                tolerance: self.tolerance,
            });
        }
        Ok(refined)
    }
}

/// Shape of the normal potential `W(z)` on `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalProfile {
    /// `W = 0` across the layer: every molecule crosses it freely.
    Flat,
    /// Parabola of curvature `W_m / z_m^2` left of the minimum and `W_m / (1 - z_m)^2` right of it.
    /// The repulsive side is bounded by `W_m`, so only energies below `W(z_floor)` are admissible.
    PiecewiseParabolic,
    /// `W_m (z_m / z - 1)^2` left of the minimum, the parabola of
    /// [`NormalProfile::PiecewiseParabolic`] right of it.
    InverseSquareWall,
    /// Monotone cubic through a table with a single zero minimum.
    Tabulated(MonotoneCubic),
}

/// Repulsive-attractive potential of the surface layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalPotential {
    /// Functional form.
    pub profile: NormalProfile,
    /// Well depth at the layer edge `z = 1`.
    pub w_m: f64,
    /// Location of the minimum.
    pub z_m: f64,
    /// Lower bound on `W(z_floor)`; energies above it are outside the evaluable range.
    pub repulsive_cap: f64,
    /// Lower limit of every z-integral.
    pub z_floor: f64,
}

impl NormalPotential {
    /// Potential-free layer of unit width.
    pub fn flat() -> Self {
        Self {
            profile: NormalProfile::Flat,
            w_m: 0.0,
            z_m: 0.5,
            repulsive_cap: f64::INFINITY,
            z_floor: 0.0,
        }
    }

    /// Piecewise parabolic well (bounded repulsive side, for geometry checks).
    pub fn piecewise_parabolic(w_m: f64, z_m: f64) -> Result<Self> {
        Self::check_well(w_m, z_m)?;
        let mut p = Self {
            profile: NormalProfile::PiecewiseParabolic,
            w_m,
            z_m,
            repulsive_cap: 0.0,
            z_floor: DEFAULT_Z_FLOOR,
        };
        p.repulsive_cap = p.eval(p.z_floor);
        Ok(p)
    }

    /// Inverse-square wall with a parabolic attractive side.
    pub fn inverse_square_wall(w_m: f64, z_m: f64) -> Result<Self> {
        Self::check_well(w_m, z_m)?;
        let p = Self {
            profile: NormalProfile::InverseSquareWall,
            w_m,
            z_m,
            repulsive_cap: DEFAULT_REPULSIVE_CAP,
            z_floor: DEFAULT_Z_FLOOR,
        };
        p.check_cap()?;
        Ok(p)
    }

    /// Tabulated profile. The table must start at or below `z_floor`, end at `z = 1`, contain a
    /// single node with value zero, decrease strictly before it and increase strictly after it.
    pub fn tabulated(z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let spline = MonotoneCubic::new(z.clone(), w.clone())?;
        let n = z.len();
        let m = w
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if w[m] != 0.0 || m == 0 || m == n - 1 {
            return Err(Error::InvalidPotential(
                "normal table needs an interior node with W = 0 as its minimum".into(),
            ));
        }
        if w[..=m].windows(2).any(|p| p[1] >= p[0]) || w[m..].windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidPotential(
                "normal table must decrease strictly to its minimum and increase strictly after".into(),
            ));
        }
        if (z[n - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPotential("normal table must end at z = 1".into()));
        }
        if z[0] > DEFAULT_Z_FLOOR || z[0] <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "normal table must start in (0, {DEFAULT_Z_FLOOR}]"
            )));
        }
        let p = Self {
            w_m: w[n - 1],
            z_m: z[m],
            profile: NormalProfile::Tabulated(spline),
            repulsive_cap: DEFAULT_REPULSIVE_CAP,
            z_floor: DEFAULT_Z_FLOOR,
        };
        p.check_cap()?;
        Ok(p)
    }

    fn check_well(w_m: f64, z_m: f64) -> Result<()> {
        if !(w_m > 0.0 && w_m.is_finite()) {
            return Err(Error::InvalidPotential(format!("W_m must be positive, got {w_m}")));
        }
        if !(z_m > 0.0 && z_m < 1.0) {
            return Err(Error::InvalidPotential(format!("z_m must lie in (0, 1), got {z_m}")));
        }
        Ok(())
    }

    fn check_cap(&self) -> Result<()> {
        let at_floor = self.eval(self.z_floor);
        if at_floor < self.repulsive_cap {
            return Err(Error::InvalidPotential(format!(
                "W(z_floor = {}) = {at_floor} is below the repulsive cap {}",
                self.z_floor, self.repulsive_cap
            )));
        }
        Ok(())
    }

    /// Overrides the repulsive cap and re-validates it.
    pub fn with_repulsive_cap(mut self, cap: f64) -> Result<Self> {
        self.repulsive_cap = cap;
        if !matches!(self.profile, NormalProfile::Flat) {
            self.check_cap()?;
        }
        Ok(self)
    }

    /// `W(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        match &self.profile {
            NormalProfile::Flat => 0.0,
            NormalProfile::PiecewiseParabolic => {
                let s = if z < self.z_m {
                    (z - self.z_m) / self.z_m
                } else {
                    (z - self.z_m) / (1.0 - self.z_m)
                };
                self.w_m * s * s
            }
            NormalProfile::InverseSquareWall => {
                let s = if z < self.z_m {
                    self.z_m / z - 1.0
                } else {
                    (z - self.z_m) / (1.0 - self.z_m)
                };
                self.w_m * s * s
            }
            NormalProfile::Tabulated(s) => s.eval(z).max(0.0),
        }
    }

    /// `W'(z)`.
    pub fn deriv(&self, z: f64) -> f64 {
        match &self.profile {
            NormalProfile::Flat => 0.0,
            NormalProfile::PiecewiseParabolic => {
                if z < self.z_m {
                    2.0 * self.w_m * (z - self.z_m) / (self.z_m * self.z_m)
                } else {
                    2.0 * self.w_m * (z - self.z_m) / ((1.0 - self.z_m) * (1.0 - self.z_m))
                }
            }
            NormalProfile::InverseSquareWall => {
                if z < self.z_m {
                    -2.0 * self.w_m * (self.z_m / z - 1.0) * self.z_m / (z * z)
                } else {
                    2.0 * self.w_m * (z - self.z_m) / ((1.0 - self.z_m) * (1.0 - self.z_m))
                }
            }
            NormalProfile::Tabulated(s) => s.deriv(z),
        }
    }

    /// Trapped/free separatrix `sqrt(W_m)`.
    pub fn separatrix(&self) -> f64 {
        self.w_m.sqrt()
    }

    /// True for the potential-free layer.
    pub fn is_flat(&self) -> bool {
        matches!(self.profile, NormalProfile::Flat)
    }

    /// Largest `e_z^2` whose left turning point stays above `z_floor`.
    pub fn max_energy(&self) -> f64 {
        if self.is_flat() {
            f64::INFINITY
        } else {
            self.eval(self.z_floor)
        }
    }

    /// Turning points `(z_-, z_+)` of the orbit with `e_z^2 = e2`.
    pub fn turning_points_e2(&self, e2: f64) -> Result<(f64, f64)> {
        if !e2.is_finite() || e2 < 0.0 {
            return Err(Error::Domain(format!("e_z^2 = {e2} is not a finite energy")));
        }
        if e2 == 0.0 {
            return Ok((self.z_m, self.z_m));
        }
        if self.is_flat() {
            return Ok((0.0, 1.0));
        }
        if e2 > self.max_energy() {
            return Err(Error::Domain(format!(
                "e_z^2 = {e2} exceeds W(z_floor) = {}; the left turning point would fall below z_floor",
                self.max_energy()
            )));
        }
        let r = (e2 / self.w_m).sqrt();
        let z_plus_quadratic = (self.z_m + (1.0 - self.z_m) * r).min(1.0);
        match &self.profile {
            NormalProfile::Flat => unreachable!(),
            NormalProfile::PiecewiseParabolic => Ok(((self.z_m * (1.0 - r)).max(self.z_floor), z_plus_quadratic)),
            NormalProfile::InverseSquareWall => Ok(((self.z_m / (1.0 + r)).max(self.z_floor), z_plus_quadratic)),
            NormalProfile::Tabulated(s) => {
                let zl = bisect_monotone(|z| s.eval(z), e2, self.z_floor, self.z_m);
                let zr = if e2 >= self.w_m {
                    1.0
                } else {
                    bisect_monotone(|z| s.eval(z), e2, self.z_m, 1.0)
                };
                Ok((zl, zr))
            }
        }
    }

    /// Right anchor `c >= 1` of the sine-squared map on the attractive branch of a free orbit:
    /// the zero of `e2 - W` continued past the layer edge.
    pub(crate) fn right_anchor(&self, e2: f64) -> f64 {
        match &self.profile {
            NormalProfile::Flat => f64::INFINITY,
            NormalProfile::PiecewiseParabolic | NormalProfile::InverseSquareWall => {
                (self.z_m + (1.0 - self.z_m) * (e2 / self.w_m).sqrt()).max(1.0)
            }
            NormalProfile::Tabulated(s) => {
                let slope = s.deriv(1.0);
                if slope > 0.0 {
                    1.0 + (e2 - self.w_m).max(0.0) / slope
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Quadrature nodes for `int_{z_-}^{z_+} f(z) dz` along the orbit with `e_z^2 = e2`, each
    /// paired with `e2 - W(z)`. Turning-point singularities are regularized by sine-squared
    /// maps, and near an anchor the gap is evaluated in factored form from the node's offset
    /// so that it keeps full relative precision at small energies.
    pub(crate) fn orbit_gaps(&self, rule: &GaussRule, e2: f64) -> Result<Vec<(f64, f64, f64)>> {
        let (zl, zr) = self.turning_points_e2(e2)?;
        let mut out = Vec::with_capacity(2 * rule.len());
        if self.is_flat() {
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            rule.push_interval(0.0, 1.0, &mut xs, &mut ws);
            return Ok(xs.into_iter().zip(ws).map(|(z, w)| (z, w, e2)).collect());
        }
        let mut left = Vec::with_capacity(rule.len());
        rule.push_sin2_left_offsets(zl, zl, self.z_m, &mut left);
        for n in left {
            let gap = self
                .branch_gap(Branch::Left, zl, n.x, n.anchor_offset)
                .unwrap_or_else(|| e2 - self.eval(n.x));
            out.push((n.x, n.weight, gap));
        }
        let mut right = Vec::with_capacity(rule.len());
        let anchor = if e2 < self.w_m { zr } else { self.right_anchor(e2) };
        if anchor.is_finite() {
            rule.push_sin2_offsets(self.z_m, zr, anchor, &mut right);
        } else {
            let mut xs = Vec::new();
            let mut ws = Vec::new();
            rule.push_interval(self.z_m, 1.0, &mut xs, &mut ws);
            right.extend(xs.into_iter().zip(ws).map(|(x, weight)| OrbitNode {
                x,
                weight,
                anchor_offset: f64::INFINITY,
            }));
        }
        for n in right {
            let gap = self
                .branch_gap(Branch::Right, anchor, n.x, n.anchor_offset)
                .unwrap_or_else(|| e2 - self.eval(n.x));
            out.push((n.x, n.weight, gap));
        }
        Ok(out)
    }

    /// `e^2 - W(z)` on one branch of an orbit whose (possibly virtual) turning point is `anchor`,
    /// evaluated in factored form from the distance `d = |z - anchor|`. Returns `None` for
    /// profiles without a closed form, where the caller falls back to the direct difference.
    pub(crate) fn branch_gap(&self, branch: Branch, anchor: f64, z: f64, d: f64) -> Option<f64> {
        if !d.is_finite() {
            return None;
        }
        match (&self.profile, branch) {
            (NormalProfile::PiecewiseParabolic, Branch::Left) if anchor > self.z_floor => {
                let s = self.z_m - anchor;
                Some(self.w_m / (self.z_m * self.z_m) * d * (2.0 * s - d))
            }
            (NormalProfile::InverseSquareWall, Branch::Left) if anchor > self.z_floor => {
                let s = self.z_m - anchor;
                let r_minus_u = self.z_m * d / (z * anchor);
                let r_plus_u = s / anchor + (s - d) / z;
                Some(self.w_m * r_minus_u * r_plus_u)
            }
            (NormalProfile::PiecewiseParabolic | NormalProfile::InverseSquareWall, Branch::Right) => {
                let s = anchor - self.z_m;
                Some(self.w_m / ((1.0 - self.z_m) * (1.0 - self.z_m)) * d * (2.0 * s - d))
            }
            _ => None,
        }
    }
}

/// Side of the potential minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Branch {
    /// Repulsive side, `z < z_m`.
    Left,
    /// Attractive side, `z > z_m`.
    Right,
}

/// Turning points `(z_-, z_+)` with `W(z_±) = e_z^2`; `z_+ = 1` for free molecules.
///
/// For the flat layer the idealized limits `(0, 1)` are returned.
pub fn normal_turning_points(w: &NormalPotential, e_z: f64) -> Result<(f64, f64)> {
    if !e_z.is_finite() {
        return Err(Error::Domain(format!("e_z = {e_z} is not finite")));
    }
    w.turning_points_e2(e_z * e_z)
}

/// `sigma_z(z, e_z) = (e_z^2 - W(z))^{-1/2}`.
pub fn sigma_z_eval(w: &NormalPotential, z: f64, e_z: f64) -> Result<f64> {
    let gap = e_z * e_z - w.eval(z);
    if !(gap > 0.0) {
        return Err(Error::Domain(format!(
            "z = {z} is classically forbidden for e_z = {e_z} (e_z^2 - W = {gap})"
        )));
    }
    Ok(1.0 / gap.sqrt())
}

fn tau_z_with(w: &NormalPotential, rule: &GaussRule, e_z: f64) -> Result<f64> {
    let e2 = e_z * e_z;
    Ok(w
        .orbit_gaps(rule, e2)?
        .iter()
        .map(|(_, wt, gap)| wt / gap.max(f64::MIN_POSITIVE).sqrt())
        .sum())
}

/// Crossing time `tau_z(e_z) = int_{z_-}^{z_+} sigma_z dz`.
pub fn crossing_time_tau_z(w: &NormalPotential, e_z: f64, q: &QuadratureSpec) -> Result<f64> {
    if e_z == 0.0 || !e_z.is_finite() {
        return Err(Error::Domain(format!("tau_z needs a finite nonzero e_z, got {e_z}")));
    }
    q.converged("tau_z", |rule| tau_z_with(w, rule, e_z))
}

/// Trap length `l(e_z) = |e_z| tau_z(e_z)`.
pub fn trap_length_l(w: &NormalPotential, e_z: f64, q: &QuadratureSpec) -> Result<f64> {
    Ok(e_z.abs() * crossing_time_tau_z(w, e_z, q)?)
}

/// Shape of the tangential potential `U^(y)` on one period `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentialProfile {
    /// `U^ = 0`.
    Flat,
    /// `U_m y^2`.
    Harmonic,
    /// `U_m (1 - cos(pi y)) / 2`.
    Cosine,
    /// Monotone cubic through a table on `[-1, 1]` with a single zero minimum.
    Tabulated(MonotoneCubic),
}

/// Periodic tangential potential with period 2 in the fast variable `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialPotential {
    /// Functional form.
    pub profile: TangentialProfile,
    /// Barrier height.
    pub u_m: f64,
    /// Physical half-period (used only for flight times and nondimensionalization).
    pub delta: f64,
    y_min: f64,
}

impl TangentialPotential {
    /// Potential-free surface.
    pub fn flat(delta: f64) -> Self {
        Self {
            profile: TangentialProfile::Flat,
            u_m: 0.0,
            delta,
            y_min: 0.0,
        }
    }

    /// Harmonic cell `U_m y^2`.
    pub fn harmonic(u_m: f64, delta: f64) -> Result<Self> {
        Self::check(u_m, delta)?;
        Ok(Self {
            profile: TangentialProfile::Harmonic,
            u_m,
            delta,
            y_min: 0.0,
        })
    }

    /// Cosine cell `U_m (1 - cos(pi y)) / 2`.
    pub fn cosine(u_m: f64, delta: f64) -> Result<Self> {
        Self::check(u_m, delta)?;
        Ok(Self {
            profile: TangentialProfile::Cosine,
            u_m,
            delta,
            y_min: 0.0,
        })
    }

    /// Tabulated cell. The table must span `[-1, 1]`, take equal values `U_m` at both ends,
    /// and have a single interior zero minimum with strictly monotone branches.
    pub fn tabulated(y: Vec<f64>, u: Vec<f64>, delta: f64) -> Result<Self> {
        let spline = MonotoneCubic::new(y.clone(), u.clone())?;
        let n = y.len();
        if (y[0] + 1.0).abs() > 1e-12 || (y[n - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPotential("tangential table must span [-1, 1]".into()));
        }
        if (u[0] - u[n - 1]).abs() > 1e-12 * u[0].abs().max(1.0) {
            return Err(Error::InvalidPotential(
                "tangential table must take the same value U_m at y = -1 and y = 1".into(),
            ));
        }
        let m = u
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if u[m] != 0.0 || m == 0 || m == n - 1 {
            return Err(Error::InvalidPotential(
                "tangential table needs a single interior minimum with value 0".into(),
            ));
        }
        if u[..=m].windows(2).any(|p| p[1] >= p[0]) || u[m..].windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidPotential(
                "tangential table must have one well per period (strictly monotone branches)".into(),
            ));
        }
        Self::check(u[0], delta)?;
        Ok(Self {
            u_m: u[0],
            y_min: y[m],
            profile: TangentialProfile::Tabulated(spline),
            delta,
        })
    }

    fn check(u_m: f64, delta: f64) -> Result<()> {
        if !(u_m > 0.0 && u_m.is_finite()) {
            return Err(Error::InvalidPotential(format!("U_m must be positive, got {u_m}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidPotential(format!("delta must be positive, got {delta}")));
        }
        Ok(())
    }

    /// Location of the minimum inside `[-1, 1]`.
    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    /// Bound/unbound separatrix `sqrt(U_m)`.
    pub fn separatrix(&self) -> f64 {
        self.u_m.sqrt()
    }

    /// True for the potential-free surface.
    pub fn is_flat(&self) -> bool {
        matches!(self.profile, TangentialProfile::Flat)
    }

    /// `U^(y)` with periodic extension.
    pub fn eval(&self, y: f64) -> f64 {
        let r = y - 2.0 * ((y + 1.0) / 2.0).floor();
        match &self.profile {
            TangentialProfile::Flat => 0.0,
            TangentialProfile::Harmonic => self.u_m * r * r,
            TangentialProfile::Cosine => 0.5 * self.u_m * (1.0 - (PI * r).cos()),
            TangentialProfile::Tabulated(s) => s.eval(r).clamp(0.0, self.u_m),
        }
    }

    fn left_anchor(&self, e2: f64) -> f64 {
        match &self.profile {
            TangentialProfile::Harmonic => -(e2 / self.u_m).sqrt(),
            TangentialProfile::Tabulated(s) => {
                let slope = s.deriv(-1.0);
                if slope < 0.0 {
                    -1.0 + (e2 - self.u_m).max(0.0) / slope
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => f64::NEG_INFINITY,
        }
    }

    fn right_anchor(&self, e2: f64) -> f64 {
        match &self.profile {
            TangentialProfile::Harmonic => (e2 / self.u_m).sqrt(),
            TangentialProfile::Tabulated(s) => {
                let slope = s.deriv(1.0);
                if slope > 0.0 {
                    1.0 + (e2 - self.u_m).max(0.0) / slope
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }

    /// Turning points for `e_x^2 = e2`; `(-1, 1)` for unbound orbits.
    pub fn turning_points_e2(&self, e2: f64) -> Result<(f64, f64)> {
        if !e2.is_finite() || e2 < 0.0 {
            return Err(Error::Domain(format!("e_x^2 = {e2} is not a finite energy")));
        }
        if e2 > self.u_m || (self.is_flat() && e2 > 0.0) {
            return Ok((-1.0, 1.0));
        }
        if e2 == 0.0 {
            return Ok((self.y_min, self.y_min));
        }
        if e2 == self.u_m {
            return Ok((-1.0, 1.0));
        }
        match &self.profile {
            TangentialProfile::Flat => Ok((-1.0, 1.0)),
            TangentialProfile::Harmonic => {
                let y = (e2 / self.u_m).sqrt();
                Ok((-y, y))
            }
            TangentialProfile::Cosine => {
                let y = (1.0 - 2.0 * e2 / self.u_m).clamp(-1.0, 1.0).acos() / PI;
                Ok((-y, y))
            }
            TangentialProfile::Tabulated(s) => Ok((
                bisect_monotone(|y| s.eval(y), e2, -1.0, self.y_min),
                bisect_monotone(|y| s.eval(y), e2, self.y_min, 1.0),
            )),
        }
    }

    /// Quadrature nodes for `int_{y_-}^{y_+} f(y) dy` along the orbit with `e_x^2 = e2`, each
    /// paired with `e2 - U^(y)`, evaluated in factored form next to the map anchors.
    pub(crate) fn orbit_gaps(&self, rule: &GaussRule, e2: f64) -> Result<Vec<(f64, f64, f64)>> {
        let (yl, yr) = self.turning_points_e2(e2)?;
        let (cl, cr) = if self.is_flat() {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else if e2 < self.u_m {
            (yl, yr)
        } else {
            (self.left_anchor(e2), self.right_anchor(e2))
        };
        let (a, b) = if e2 < self.u_m && !self.is_flat() { (yl, yr) } else { (-1.0, 1.0) };
        let mut nodes = Vec::with_capacity(2 * rule.len());
        let mid = self.y_min;
        if cl.is_finite() {
            rule.push_sin2_left_offsets(cl, a, mid, &mut nodes);
        } else {
            push_plain(rule, a, mid, &mut nodes);
        }
        let split = nodes.len();
        if cr.is_finite() {
            rule.push_sin2_offsets(mid, b, cr, &mut nodes);
        } else {
            push_plain(rule, mid, b, &mut nodes);
        }
        Ok(nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let c = if i < split { cl } else { cr };
                let d = n.anchor_offset;
                // distance from the minimum to the (possibly virtual) turning point
                let reach = (c - mid).abs();
                let gap = match &self.profile {
                    TangentialProfile::Harmonic if d.is_finite() => self.u_m * d * (2.0 * reach - d),
                    TangentialProfile::Cosine if d.is_finite() => {
                        self.u_m * (0.5 * PI * (2.0 * reach - d)).sin() * (0.5 * PI * d).sin()
                    }
                    _ => e2 - self.eval(n.x),
                };
                (n.x, n.weight, gap)
            })
            .collect())
    }
}

fn push_plain(rule: &GaussRule, a: f64, b: f64, out: &mut Vec<OrbitNode>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    rule.push_interval(a, b, &mut xs, &mut ws);
    out.extend(xs.into_iter().zip(ws).map(|(x, weight)| OrbitNode {
        x,
        weight,
        anchor_offset: f64::INFINITY,
    }));
}

/// Tangential turning points `(y_-, y_+)`; `(-1, 1)` when `e_x^2 > U_m`.
pub fn tangential_turning_points(u: &TangentialPotential, e_x: f64) -> Result<(f64, f64)> {
    if !e_x.is_finite() {
        return Err(Error::Domain(format!("e_x = {e_x} is not finite")));
    }
    u.turning_points_e2(e_x * e_x)
}

fn sigma_bar_with(u: &TangentialPotential, rule: &GaussRule, e_x: f64) -> Result<f64> {
    let e2 = e_x * e_x;
    let s: f64 = u
        .orbit_gaps(rule, e2)?
        .iter()
        .map(|(_, wt, gap)| wt / gap.max(f64::MIN_POSITIVE).sqrt())
        .sum();
    Ok(0.5 * s)
}

/// `sigma_bar_x(e_x) = (1/2) int_{y_-}^{y_+} (e_x^2 - U^(y))^{-1/2} dy`.
pub fn sigma_bar_x(u: &TangentialPotential, e_x: f64, q: &QuadratureSpec) -> Result<f64> {
    if e_x == 0.0 || !e_x.is_finite() {
        return Err(Error::Domain(format!("sigma_bar_x needs a finite nonzero e_x, got {e_x}")));
    }
    q.converged("sigma_bar_x", |rule| sigma_bar_with(u, rule, e_x))
}

/// True when the tangential orbit with equivalent velocity `e_x` is bound to one well.
pub fn is_bound(u: &TangentialPotential, e_x: f64) -> bool {
    !u.is_flat() && e_x * e_x <= u.u_m
}

/// Orbit-averaged tangential velocity: zero for bound orbits, `sgn(e_x) / sigma_bar_x` otherwise.
pub fn mean_tangential_velocity(u: &TangentialPotential, e_x: f64, q: &QuadratureSpec) -> Result<f64> {
    if !e_x.is_finite() {
        return Err(Error::Domain(format!("e_x = {e_x} is not finite")));
    }
    if e_x == 0.0 || is_bound(u, e_x) {
        return Ok(0.0);
    }
    Ok(e_x.signum() / sigma_bar_x(u, e_x, q)?)
}

/// Flight time across one period, `2 delta sigma_bar_x = 2 delta / |w_x|`, for unbound orbits.
pub fn flight_time_tau_fl(u: &TangentialPotential, e_x: f64, q: &QuadratureSpec) -> Result<f64> {
    if e_x == 0.0 || is_bound(u, e_x) {
        return Err(Error::Domain(format!(
            "flight time is defined for unbound orbits only (e_x = {e_x}, U_m = {})",
            u.u_m
        )));
    }
    Ok(2.0 * u.delta * sigma_bar_x(u, e_x, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parabolic() -> NormalPotential {
        NormalPotential::piecewise_parabolic(4.0, 0.5).unwrap()
    }

    #[test]
    fn zero_energy_sits_at_the_minimum() {
        assert_eq!(normal_turning_points(&parabolic(), 0.0).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn parabolic_turning_points_invert_the_parabola() {
        let (a, b) = normal_turning_points(&parabolic(), 1.0).unwrap();
        assert_relative_eq!(a, 0.25, epsilon = 1e-15);
        assert_relative_eq!(b, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn parabolic_well_rejects_energies_beyond_its_bounded_wall() {
        assert!(matches!(normal_turning_points(&parabolic(), 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn wall_free_orbit_reaches_layer_edge() {
        let w = NormalPotential::inverse_square_wall(4.0, 0.5).unwrap();
        let (a, b) = normal_turning_points(&w, 3.0).unwrap();
        assert_eq!(b, 1.0);
        assert_relative_eq!(w.eval(a), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn sigma_values() {
        let flat = NormalPotential::flat();
        assert_relative_eq!(sigma_z_eval(&flat, 0.3, 2.0).unwrap(), 0.5);
        assert_relative_eq!(sigma_z_eval(&parabolic(), 0.5, 1.0).unwrap(), 1.0);
        assert_relative_eq!(sigma_z_eval(&parabolic(), 0.6, 1.0).unwrap(), 1.091_089_451_179_962, max_relative = 1e-12);
        assert!(sigma_z_eval(&parabolic(), 0.2, 1.0).is_err());
    }

    #[test]
    fn parabolic_crossing_time_is_energy_independent() {
        let q = QuadratureSpec::default();
        for e in [0.05, 0.5, 1.0, 1.5, 1.95] {
            assert_relative_eq!(crossing_time_tau_z(&parabolic(), e, &q).unwrap(), PI / 4.0, max_relative = 1e-13);
        }
        assert_relative_eq!(trap_length_l(&parabolic(), 1.0, &q).unwrap(), PI / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn tiny_energies_keep_full_precision() {
        let q = QuadratureSpec::default();
        for e in [1e-7, 1e-5, 1e-3] {
            assert_relative_eq!(crossing_time_tau_z(&parabolic(), e, &q).unwrap(), PI / 4.0, max_relative = 1e-13);
        }
        let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
        assert_relative_eq!(sigma_bar_x(&u, 1e-6, &q).unwrap(), PI / 2.0, max_relative = 1e-13);
        let c = TangentialPotential::cosine(2.0, 0.1).unwrap();
        // small-amplitude limit of the cosine cell: U ~ (U_m pi^2 / 4) y^2
        let small = sigma_bar_x(&c, 1e-6, &q).unwrap();
        assert_relative_eq!(small, PI / 2.0 / (2.0 * PI * PI / 4.0f64).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn flat_layer_crossing() {
        let q = QuadratureSpec::default();
        let flat = NormalPotential::flat();
        assert_relative_eq!(crossing_time_tau_z(&flat, 2.0, &q).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(trap_length_l(&flat, 2.0, &q).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn cap_is_enforced_on_construction() {
        let tiny = NormalPotential::inverse_square_wall(1e-7, 0.5);
        assert!(matches!(tiny, Err(Error::InvalidPotential(_))));
    }

    #[test]
    fn tabulated_table_shape_is_validated() {
        let z = vec![1e-4, 0.3, 0.5, 1.0];
        assert!(NormalPotential::tabulated(z.clone(), vec![500.0, 1.0, 0.0, 4.0]).is_ok());
        assert!(NormalPotential::tabulated(z.clone(), vec![500.0, 0.0, 5.0, 4.0]).is_err());
        assert!(NormalPotential::tabulated(z, vec![50.0, 1.0, 0.0, 4.0]).is_err());
    }

    #[test]
    fn harmonic_tangential_geometry() {
        let q = QuadratureSpec::default();
        let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
        let (a, b) = tangential_turning_points(&u, 0.5).unwrap();
        assert_relative_eq!(a, -0.5);
        assert_relative_eq!(b, 0.5);
        assert_eq!(tangential_turning_points(&u, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(tangential_turning_points(&u, 1.5).unwrap(), (-1.0, 1.0));
        let sb = sigma_bar_x(&u, 2.0, &q).unwrap();
        assert_relative_eq!(sb, (0.5f64).asin() / (2.0 * 0.5), max_relative = 1e-12);
        assert_relative_eq!(mean_tangential_velocity(&u, 2.0, &q).unwrap(), 1.909_859_317_102_744, max_relative = 1e-12);
        assert_eq!(mean_tangential_velocity(&u, 0.7, &q).unwrap(), 0.0);
        assert_relative_eq!(sigma_bar_x(&u, 0.7, &q).unwrap(), PI / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn flat_tangential_geometry() {
        let q = QuadratureSpec::default();
        let u = TangentialPotential::flat(1.0);
        assert_relative_eq!(sigma_bar_x(&u, 2.0, &q).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(mean_tangential_velocity(&u, 1.5, &q).unwrap(), 1.5, max_relative = 1e-14);
        assert_relative_eq!(flight_time_tau_fl(&u, 1.0, &q).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn flight_time_rejects_bound_orbits() {
        let q = QuadratureSpec::default();
        let u = TangentialPotential::harmonic(1.0, 0.1).unwrap();
        assert!(matches!(flight_time_tau_fl(&u, 0.5, &q), Err(Error::Domain(_))));
    }

    #[test]
    fn cosine_turning_points_solve_the_profile() {
        let u = TangentialPotential::cosine(2.0, 0.1).unwrap();
        let (a, b) = tangential_turning_points(&u, 1.0).unwrap();
        assert_relative_eq!(u.eval(b), 1.0, max_relative = 1e-12);
        assert_relative_eq!(a, -b);
    }

    #[test]
    fn multi_well_tangential_table_is_rejected() {
        let y = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let u = vec![1.0, 0.0, 0.5, 0.0, 1.0];
        assert!(TangentialPotential::tabulated(y, u, 0.1).is_err());
    }

    #[test]
    fn quadrature_spec_validation() {
        let bad = QuadratureSpec { node_count: 4, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
