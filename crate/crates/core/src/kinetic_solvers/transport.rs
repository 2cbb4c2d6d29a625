//! Conservative finite-volume advection in `x` (per tangential row) and in `v_x` (per `x` cell).

use rayon::prelude::*;

use super::{TransportScheme, XBoundary};

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Layout and parameters of an `x` sweep.
pub(crate) struct XSweep<'a> {
    pub nx: usize,
    pub rows: usize,
    pub ne: usize,
    /// Speed of each tangential row in `x` units per unit time.
    pub speed: &'a [f64],
    /// `dt / dx`.
    pub ratio: f64,
    pub boundary: XBoundary,
    pub scheme: TransportScheme,
}

impl XSweep<'_> {
    /// Value at cell `ix` (possibly a ghost index), row `i`, energy `k`.
    fn at(&self, q: &[f64], ix: isize, i: usize, k: usize) -> f64 {
        let n = self.nx as isize;
        let (cell, row) = if (0..n).contains(&ix) {
            (ix as usize, i)
        } else {
            match self.boundary {
                XBoundary::Periodic => (ix.rem_euclid(n) as usize, i),
                XBoundary::Reflective => {
                    let m = if ix < 0 { -1 - ix } else { 2 * n - 1 - ix };
                    (m.clamp(0, n - 1) as usize, self.rows - 1 - i)
                }
            }
        };
        q[(cell * self.rows + row) * self.ne + k]
    }

    /// Numerical flux through the face between cells `a` and `a + 1`.
    fn flux(&self, q: &[f64], a: isize, i: usize, k: usize) -> f64 {
        let v = self.speed[i];
        if v == 0.0 {
            return 0.0;
        }
        let face = match self.scheme {
            TransportScheme::Upwind => {
                if v > 0.0 {
                    self.at(q, a, i, k)
                } else {
                    self.at(q, a + 1, i, k)
                }
            }
            TransportScheme::Muscl => {
                let nu = (v * self.ratio).abs();
                let (qm, q0, q1, q2) = (
                    self.at(q, a - 1, i, k),
                    self.at(q, a, i, k),
                    self.at(q, a + 1, i, k),
                    self.at(q, a + 2, i, k),
                );
                if v > 0.0 {
                    q0 + 0.5 * (1.0 - nu) * minmod(q0 - qm, q1 - q0)
                } else {
                    q1 - 0.5 * (1.0 - nu) * minmod(q1 - q0, q2 - q1)
                }
            }
        };
        v * face
    }

    /// Writes the advected state of `q` into `out`.
    pub fn run(&self, q: &[f64], out: &mut [f64]) {
        let slab = self.rows * self.ne;
        out.par_chunks_mut(slab).enumerate().for_each(|(ix, dst)| {
            let a = ix as isize;
            for i in 0..self.rows {
                for k in 0..self.ne {
                    let fr = self.flux(q, a, i, k);
                    let fl = self.flux(q, a - 1, i, k);
                    dst[i * self.ne + k] = q[ix * slab + i * self.ne + k] - self.ratio * (fr - fl);
                }
            }
        });
    }
}

/// Upwind advection `d_t g + a d_v g = 0` of one `x` slab over time `dt`, with zero flux
/// through the ends of the velocity axis.
pub(crate) fn vlasov_slab(slab: &mut [f64], ne: usize, accel: f64, dt: f64, dv: &[f64]) {
    if accel == 0.0 {
        return;
    }
    let nv = dv.len();
    let mut flux = vec![0.0; (nv + 1) * ne];
    for f in 1..nv {
        for k in 0..ne {
            let up = if accel > 0.0 { slab[(f - 1) * ne + k] } else { slab[f * ne + k] };
            flux[f * ne + k] = accel * up;
        }
    }
    for i in 0..nv {
        for k in 0..ne {
            slab[i * ne + k] -= dt / dv[i] * (flux[(i + 1) * ne + k] - flux[i * ne + k]);
        }
    }
}
