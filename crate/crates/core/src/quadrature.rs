//! Gauss-Legendre rules and the sine-squared endpoint map used for integrals
//! with inverse-square-root turning-point singularities.

use std::f64::consts::FRAC_PI_2;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Quadrature node of an orbit integral together with its distance to the nearest map anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitNode {
    /// Node position.
    pub x: f64,
    /// Quadrature weight.
    pub weight: f64,
    /// Non-negative distance to the anchor of the map that produced the node
    /// (infinite for plain Gauss-Legendre segments).
    pub anchor_offset: f64,
}

/// Gauss-Legendre nodes and weights on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Builds an `n`-point rule. `n` is clamped to at least 1.
    pub fn new(n: usize) -> Self {
        let degree = NonZeroUsize::new(n.max(1)).expect("n >= 1");
        let rule = GaussLegendre::new(degree);
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no nodes (never for a constructed rule).
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Pushes nodes and weights for `[a, b]` onto the output vectors.
    pub fn push_interval(&self, a: f64, b: f64, out_x: &mut Vec<f64>, out_w: &mut Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out_x.push(mid + half * x);
            out_w.push(w * half);
        }
    }

    /// Pushes nodes and weights of the map `z = a + (c - a) sin^2(theta)` restricted to
    /// `z` in `[a, b]`, where `c >= b` is the (possibly virtual) right turning point.
    ///
    /// The map turns `(z - a)^{-1/2}` and `(c - z)^{-1/2}` endpoint behaviour into a bounded
    /// integrand in `theta`. With `c == b` the full range `theta` in `[0, pi/2]` is used.
    pub fn push_sin2(&self, a: f64, b: f64, c: f64, out_x: &mut Vec<f64>, out_w: &mut Vec<f64>) {
        if b <= a {
            return;
        }
        let span = c - a;
        let ratio = ((b - a) / span).clamp(0.0, 1.0);
        let theta_b = if ratio >= 1.0 { FRAC_PI_2 } else { ratio.sqrt().asin() };
        let half = 0.5 * theta_b;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let th = half + half * x;
            let s = th.sin();
            out_x.push(a + span * s * s);
            out_w.push(w * half * span * (2.0 * th).sin());
        }
    }

    /// Mirror image of [`GaussRule::push_sin2`]: the singular endpoint `c <= a` lies on the left
    /// and the smooth endpoint is `b`.
    pub fn push_sin2_left(&self, c: f64, a: f64, b: f64, out_x: &mut Vec<f64>, out_w: &mut Vec<f64>) {
        let start = out_x.len();
        self.push_sin2(-b, -a, -c, out_x, out_w);
        for x in &mut out_x[start..] {
            *x = -*x;
        }
    }

    /// [`GaussRule::push_sin2`] that also records `c - z` for every node, computed as
    /// `(c - a) cos^2(theta)` so that it keeps full relative precision next to the anchor.
    pub fn push_sin2_offsets(&self, a: f64, b: f64, c: f64, out: &mut Vec<OrbitNode>) {
        if b <= a {
            return;
        }
        let span = c - a;
        let ratio = ((b - a) / span).clamp(0.0, 1.0);
        let theta_b = if ratio >= 1.0 { FRAC_PI_2 } else { ratio.sqrt().asin() };
        let half = 0.5 * theta_b;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let th = half + half * x;
            let (s, co) = th.sin_cos();
            out.push(OrbitNode {
                x: a + span * s * s,
                weight: w * half * span * (2.0 * th).sin(),
                anchor_offset: span * co * co,
            });
        }
    }

    /// Mirror image of [`GaussRule::push_sin2_offsets`] with the anchor `c <= a` on the left;
    /// the recorded offset is `z - c`.
    pub fn push_sin2_left_offsets(&self, c: f64, a: f64, b: f64, out: &mut Vec<OrbitNode>) {
        let start = out.len();
        self.push_sin2_offsets(-b, -a, -c, out);
        for n in &mut out[start..] {
            n.x = -n.x;
        }
    }

    /// Integrates `f` over `[a, b]` through the sine-squared map with right anchor `c >= b`.
    pub fn integrate_sin2<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, c: f64, mut f: F) -> f64 {
        let mut xs = Vec::with_capacity(self.len());
        let mut ws = Vec::with_capacity(self.len());
        self.push_sin2(a, b, c, &mut xs, &mut ws);
        xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
    }

    /// Integrates `f` over `[a, b]` through the mirrored map with left anchor `c <= a`.
    pub fn integrate_sin2_left<F: FnMut(f64) -> f64>(&self, c: f64, a: f64, b: f64, mut f: F) -> f64 {
        let mut xs = Vec::with_capacity(self.len());
        let mut ws = Vec::with_capacity(self.len());
        self.push_sin2_left(c, a, b, &mut xs, &mut ws);
        xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = GaussRule::new(8);
        let v = r.integrate(0.0, 2.0, |x| x.powi(7));
        assert!((v - 32.0).abs() < 1e-12);
    }

    #[test]
    fn sin2_map_handles_inverse_sqrt_endpoints() {
        let r = GaussRule::new(16);
        // integral of 1/sqrt((x-a)(c-x)) over [a, c] equals pi
        let v = r.integrate_sin2(0.2, 1.5, 1.5, |x| 1.0 / ((x - 0.2) * (1.5 - x)).sqrt());
        assert!((v - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn partial_sin2_map_matches_closed_form() {
        let r = GaussRule::new(24);
        // integral of 1/sqrt(c - x) over [0, 1] with c = 1.3: 2(sqrt(1.3) - sqrt(0.3))
        let v = r.integrate_sin2(0.0, 1.0, 1.3, |x| 1.0 / (1.3 - x).sqrt());
        let exact = 2.0 * (1.3f64.sqrt() - 0.3f64.sqrt());
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn left_map_mirrors_right_map() {
        let r = GaussRule::new(24);
        let v = r.integrate_sin2_left(-0.3, 0.0, 1.0, |x| 1.0 / (x + 0.3).sqrt());
        let exact = 2.0 * (1.3f64.sqrt() - 0.3f64.sqrt());
        assert!((v - exact).abs() < 1e-12);
    }
}
