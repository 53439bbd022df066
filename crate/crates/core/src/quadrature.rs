//! Angular and radial grids with their quadrature rules.
//!
//! Sphere factors use equispaced polar angles including both poles, with weights
//! that integrate band-limited zonal functions against `sin^(p-1)` exactly.
//! Circle factors use the periodic trapezoid rule.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one factor of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorKind {
    Circle,
    Sphere { dim: usize },
}

impl FactorKind {
    pub fn from_dim(dim: usize) -> Self {
        if dim == 1 {
            FactorKind::Circle
        } else {
            FactorKind::Sphere { dim }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FactorKind::Circle => 1,
            FactorKind::Sphere { dim } => *dim,
        }
    }
}

/// Area of the unit sphere `S^k`.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_area(k - 2),
    }
}

/// Gauss-Legendre integral of `f` over `[a, b]` with `points` nodes.
pub fn gauss_legendre(points: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(points.max(1)).expect("nonzero"));
    rule.integrate(a, b, f)
}

/// Nodes and weights for one factor of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGrid {
    pub kind: FactorKind,
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
}

impl FactorGrid {
    pub fn new(kind: FactorKind, radius: f64, count: usize) -> Result<Self> {
        match kind {
            FactorKind::Circle => {
                if count < 4 {
                    return Err(Error::InvalidInput(format!("circle grid needs at least 4 nodes, got {count}")));
                }
                let step = 2.0 * PI / count as f64;
                let nodes = (0..count).map(|j| j as f64 * step).collect();
                let weights = vec![radius * step; count];
                Ok(Self { kind, radius, nodes, weights, step })
            }
            FactorKind::Sphere { dim } => {
                if count < 5 || count % 2 == 0 {
                    return Err(Error::InvalidInput(format!("sphere grid needs an odd count >= 5, got {count}")));
                }
                let step = PI / (count - 1) as f64;
                let nodes: Vec<f64> = (0..count).map(|i| i as f64 * step).collect();
                let weights = zonal_weights(&nodes, dim)
                    .into_iter()
                    .map(|w| w * radius.powi(dim as i32) * sphere_area(dim - 1))
                    .collect();
                Ok(Self { kind, radius, nodes, weights, step })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total measure of the factor.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Grid index holding the value at ghost position `j` (may lie outside `0..len`).
    ///
    /// Sphere grids reflect through the poles, circle grids wrap around.
    pub fn fold(&self, j: isize) -> usize {
        let n = self.len() as isize;
        match self.kind {
            FactorKind::Circle => j.rem_euclid(n) as usize,
            FactorKind::Sphere { .. } => {
                let period = 2 * (n - 1);
                let r = j.rem_euclid(period);
                (if r < n { r } else { period - r }) as usize
            }
        }
    }
}

/// Weights for `int_0^pi g(theta) sin^(dim-1)(theta) dtheta` on equispaced nodes with poles.
///
/// The cosine series of `g` is read off by a type-I cosine transform and integrated
/// against exact moments.
fn zonal_weights(nodes: &[f64], dim: usize) -> Vec<f64> {
    let n = nodes.len();
    let gl_points = 3 * n + 64;
    let moments: Vec<f64> = (0..n)
        .map(|k| gauss_legendre(gl_points, 0.0, PI, |th| (k as f64 * th).cos() * th.sin().powi(dim as i32 - 1)))
        .collect();
    let end = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
    nodes
        .iter()
        .enumerate()
        .map(|(i, th)| {
            let s: f64 = moments
                .iter()
                .enumerate()
                .map(|(k, m)| end(k) * m * (k as f64 * th).cos())
                .sum();
            end(i) * 2.0 / (n - 1) as f64 * s
        })
        .collect()
}

/// Tensor grid over the two link factors.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    pub first: FactorGrid,
    pub second: FactorGrid,
}

impl AngularGrid {
    pub fn new(first: FactorGrid, second: FactorGrid) -> Self {
        Self { first, second }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.first.len(), self.second.len())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.first.weights[i] * self.second.weights[j]
    }

    pub fn volume(&self) -> f64 {
        self.first.volume() * self.second.volume()
    }
}

/// Logarithmically spaced radial nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub t_min: f64,
    pub t_nodes: Vec<f64>,
    pub count: usize,
}

impl RadialGrid {
    /// Nodes on `[t_min, 1]`.
    pub fn new(t_min: f64, count: usize) -> Result<Self> {
        Self::between(t_min, 1.0, count)
    }

    /// Nodes on `[lo, hi]`.
    pub fn between(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && count >= 5) {
            return Err(Error::InvalidInput(format!("radial grid [{lo}, {hi}] with {count} nodes")));
        }
        let (xl, xh) = (lo.ln(), hi.ln());
        let h = (xh - xl) / (count - 1) as f64;
        let mut t_nodes: Vec<f64> = (0..count).map(|i| (xl + i as f64 * h).exp()).collect();
        t_nodes[0] = lo;
        t_nodes[count - 1] = hi;
        Ok(Self { t_min: lo, t_nodes, count })
    }

    pub fn t_max(&self) -> f64 {
        self.t_nodes[self.count - 1]
    }

    /// Uniform step in `x = ln t`.
    pub fn step(&self) -> f64 {
        (self.t_max().ln() - self.t_min.ln()) / (self.count - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.t_nodes[i].ln()
    }
}

/// Composite Simpson rule for equispaced samples; an even count closes with a 3/8 panel.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            // odd-length prefix handled by Simpson, a leftover 4-point panel by the 3/8 rule
            let body = if n % 2 == 1 { n } else { n - 3 };
            let mut s = values[0] + values[body - 1];
            for (i, v) in values.iter().enumerate().take(body - 1).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if body < n {
                let v = &values[n - 4..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sphere_areas() {
        assert_abs_diff_eq!(sphere_area(2), 4.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_area(3), 2.0 * PI * PI, epsilon = 1e-13);
    }

    #[test]
    fn sphere_grid_volume_and_moments() {
        for dim in [2usize, 3, 4, 5] {
            let g = FactorGrid::new(FactorKind::Sphere { dim }, 0.7, 17).unwrap();
            assert_abs_diff_eq!(g.volume(), 0.7f64.powi(dim as i32) * sphere_area(dim), epsilon = 1e-12);
            // second moment of cos(theta): |S^dim| / (dim + 1)
            let m2: f64 = g.nodes.iter().zip(&g.weights).map(|(t, w)| w * t.cos().powi(2)).sum();
            let exact = 0.7f64.powi(dim as i32) * sphere_area(dim) / (dim as f64 + 1.0);
            assert_abs_diff_eq!(m2, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_grid_is_exact_for_trig() {
        let g = FactorGrid::new(FactorKind::Circle, 2.0, 16).unwrap();
        let s: f64 = g.nodes.iter().zip(&g.weights).map(|(t, w)| w * (3.0 * t).cos().powi(2)).sum();
        assert_abs_diff_eq!(s, 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn fold_reflects_and_wraps() {
        let s = FactorGrid::new(FactorKind::Sphere { dim: 2 }, 1.0, 9).unwrap();
        assert_eq!(s.fold(-1), 1);
        assert_eq!(s.fold(-2), 2);
        assert_eq!(s.fold(9), 7);
        assert_eq!(s.fold(10), 6);
        let c = FactorGrid::new(FactorKind::Circle, 1.0, 8).unwrap();
        assert_eq!(c.fold(-1), 7);
        assert_eq!(c.fold(9), 1);
    }

    #[test]
    fn radial_grid_is_log_uniform() {
        let g = RadialGrid::new(1e-3, 257).unwrap();
        assert_eq!(g.t_nodes[0], 1e-3);
        assert_eq!(g.t_nodes[256], 1.0);
        let r0 = g.t_nodes[1] / g.t_nodes[0];
        for w in g.t_nodes.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], r0, epsilon = 1e-12);
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [5usize, 6, 9, 10] {
            let h = 1.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            assert_abs_diff_eq!(simpson(&v, h), 0.25, epsilon = 1e-13);
        }
    }
}
