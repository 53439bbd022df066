//! Jacobi operator of the cone and the nonlinear part of the scalar-curvature map.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::embedding::{embed_graph, graph_symmetric_fields, linearized_symmetric_fields, second_variation_fields, SymmetricFields};
use crate::error::Result;
use crate::link::{CliffordLink, CurvatureInvariants};
use crate::quadrature::FactorKind;
use crate::space::{radial_derivatives, ConeField, ConeSpace};

/// Curvature data of the cone `{t w : w in M}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeGeometry {
    pub link: CliffordLink,
    pub inv: CurvatureInvariants,
}

impl ConeGeometry {
    pub fn new(link: CliffordLink) -> Self {
        Self { link, inv: link.invariants() }
    }

    /// Eigenvalues of the cone's shape operator at radius `t`: `0`, `lambda1 / t`, `lambda2 / t`.
    pub fn shape_eigenvalues(&self, t: f64) -> [f64; 3] {
        [0.0, self.inv.lambda1 / t, self.inv.lambda2 / t]
    }

    /// Eigenvalues of the third fundamental form at radius `t`.
    pub fn third_form_eigenvalues(&self, t: f64) -> [f64; 3] {
        self.shape_eigenvalues(t).map(|v| v * v)
    }

    /// `S_r(t) = S_r / t^r` for `r = 1, 2, 3`.
    pub fn s_bar(&self, r: usize, t: f64) -> f64 {
        let s = match r {
            1 => self.inv.s1,
            2 => self.inv.s2,
            3 => self.inv.s3,
            _ => 0.0,
        };
        s / t.powi(r as i32)
    }
}

/// `L u` mode by mode: `S1 (t^2 a'' + (n-2) t a' - mu a) / t^3`, second order in `ln t`.
pub fn jacobi_apply(space: &ConeSpace, u: &ConeField) -> Result<ConeField> {
    let a = u.profiles()?;
    let (a_x, a_xx) = radial_derivatives(a, space.radial.step());
    let n = space.n as f64;
    let s1 = space.inv.s1;
    let mut out = Array2::zeros(a.dim());
    for (m, mode) in space.modes().iter().enumerate() {
        for (i, t) in space.radial.t_nodes.iter().enumerate() {
            out[[m, i]] = s1 * (a_xx[[m, i]] + (n - 3.0) * a_x[[m, i]] - mode.mu * a[[m, i]]) / t.powi(3);
        }
    }
    Ok(space.field_from_profiles(out))
}

/// `div(T1 grad u) - 3 S3 u` assembled from grid values by second-order differences.
pub fn jacobi_divergence_form(space: &ConeSpace, u: &Array3<f64>) -> Array3<f64> {
    let (nt, n1, n2) = u.dim();
    let h = space.radial.step();
    let inv = space.inv;
    let n = space.n as f64;
    let (g1, g2) = (&space.angular.first, &space.angular.second);
    let c1 = inv.t1_eigs.0 / (space.link.a1 * space.link.a1);
    let c2 = inv.t1_eigs.1 / (space.link.a2 * space.link.a2);
    let factor_laplacian = |kind: FactorKind, step: f64, theta: f64, minus: f64, centre: f64, plus: f64| {
        let d2 = (plus - 2.0 * centre + minus) / (step * step);
        match kind {
            FactorKind::Circle => d2,
            FactorKind::Sphere { dim } => {
                let s = theta.sin();
                let extra = if s.abs() < 1e-12 { d2 } else { theta.cos() / s * (plus - minus) / (2.0 * step) };
                d2 + (dim as f64 - 1.0) * extra
            }
        }
    };
    let slices: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|it| {
            let t3 = space.radial.t_nodes[it].powi(3);
            let mut out = Vec::with_capacity(n1 * n2);
            for i in 0..n1 {
                for j in 0..n2 {
                    let c = u[[it, i, j]];
                    let (ux, uxx) = if it == 0 {
                        let (a, b, d) = (u[[0, i, j]], u[[1, i, j]], u[[2, i, j]]);
                        ((-3.0 * a + 4.0 * b - d) / (2.0 * h), (2.0 * a - 5.0 * b + 4.0 * d - u[[3, i, j]]) / (h * h))
                    } else if it == nt - 1 {
                        let (a, b, d) = (u[[it, i, j]], u[[it - 1, i, j]], u[[it - 2, i, j]]);
                        ((3.0 * a - 4.0 * b + d) / (2.0 * h), (2.0 * a - 5.0 * b + 4.0 * d - u[[it - 3, i, j]]) / (h * h))
                    } else {
                        let (m, p) = (u[[it - 1, i, j]], u[[it + 1, i, j]]);
                        ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h))
                    };
                    let l1 = factor_laplacian(
                        g1.kind,
                        g1.step,
                        g1.nodes[i],
                        u[[it, g1.fold(i as isize - 1), j]],
                        c,
                        u[[it, g1.fold(i as isize + 1), j]],
                    );
                    let l2 = factor_laplacian(
                        g2.kind,
                        g2.step,
                        g2.nodes[j],
                        u[[it, i, g2.fold(j as isize - 1)]],
                        c,
                        u[[it, i, g2.fold(j as isize + 1)]],
                    );
                    out.push((inv.s1 * (uxx + (n - 3.0) * ux) + c1 * l1 + c2 * l2 - 3.0 * inv.s3 * c) / t3);
                }
            }
            out
        })
        .collect();
    Array3::from_shape_fn((nt, n1, n2), |(it, i, j)| slices[it][i * n2 + j])
}

/// Gauss-Legendre points for the integral form of the remainder.
const REMAINDER_POINTS: usize = 4;

/// Scalar curvature of normal graphs from the embedding oracle, with its value and
/// exact derivative at the cone cached.
#[derive(Debug, Clone)]
pub struct CurvatureOracle {
    base: SymmetricFields,
}

impl CurvatureOracle {
    pub fn new(space: &ConeSpace) -> Result<Self> {
        let zero = Array3::zeros(space.shape());
        Ok(Self { base: symmetric_fields(space, &zero)? })
    }

    /// `S1, S2, S3` of the cone itself under the discretization.
    pub fn base(&self) -> &SymmetricFields {
        &self.base
    }

    /// Discrete linearization `D S2_h(0)[u]`.
    pub fn linearization(&self, space: &ConeSpace, u: &Array3<f64>) -> Result<Array3<f64>> {
        let zero = Array3::zeros(space.shape());
        Ok(linearized_symmetric_fields(&space.link, &space.radial, &space.angular, &zero, u)?.s2)
    }

    /// `Q(u) = S2_h(u) - S2_h(0) - D S2_h(0)[u]`, evaluated as
    /// `int_0^1 (1 - s) D^2 S2_h(s u)[u, u] ds` by Gauss-Legendre in `s`.
    ///
    /// The integral form avoids cancelling the `O(t^-2)` terms of the three curvatures
    /// near the tip.
    pub fn remainder(&self, space: &ConeSpace, u: &Array3<f64>) -> Result<Array3<f64>> {
        let rule = GaussLegendre::new(NonZeroUsize::new(REMAINDER_POINTS).expect("nonzero"));
        let mut acc = Array3::zeros(space.shape());
        for &(node, weight) in rule.as_node_weight_pairs() {
            let s = 0.5 * (node + 1.0);
            let base = u * s;
            let d2 = second_variation_fields(&space.link, &space.radial, &space.angular, &base, u)?.s2;
            acc.scaled_add(0.5 * weight * (1.0 - s), &d2);
        }
        Ok(acc)
    }

    /// The same remainder by direct subtraction.
    pub fn remainder_by_difference(&self, space: &ConeSpace, u: &Array3<f64>) -> Result<Array3<f64>> {
        let full = symmetric_fields(space, u)?;
        let lin = self.linearization(space, u)?;
        Ok(full.s2 - &self.base.s2 - lin)
    }
}

/// `S1, S2, S3` of the normal graph of `u`.
pub fn symmetric_fields(space: &ConeSpace, u: &Array3<f64>) -> Result<SymmetricFields> {
    let graph = embed_graph(&space.link, u, &space.radial, &space.angular)?;
    graph_symmetric_fields(&graph)
}

/// Nonlinear remainder of the scalar curvature, from the embedding oracle.
pub fn nonlinear_remainder(space: &ConeSpace, u: &ConeField, oracle: &CurvatureOracle) -> Result<ConeField> {
    let values = match &u.values {
        Some(v) => v.clone(),
        None => space.synthesize(u.profiles()?),
    };
    Ok(ConeField::from_values(oracle.remainder(space, &values)?))
}

/// Quadratic part of the scalar curvature of the normal graph, assembled from the
/// Hessian of `u` in the cone's orthonormal frame.
pub fn explicit_leading_q(space: &ConeSpace, u: &ConeField) -> Result<ConeField> {
    let geo = ConeGeometry::new(space.link);
    let jets = space.jets(u)?;
    let (nt, n1, n2) = space.shape();
    let mult = space.orbit_multiplicity().map(|m| m as f64);
    let inv = geo.inv;
    let lam = [inv.lambda1, inv.lambda2];
    let dims = [space.link.p as f64, space.link.q as f64];
    let slices: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|it| {
            let t = space.radial.t_nodes[it];
            let a = [lam[0] / t, lam[1] / t];
            let tr3 = dims[0] * a[0].powi(3) + dims[1] * a[1].powi(3);
            let tr4 = dims[0] * a[0].powi(4) + dims[1] * a[1].powi(4);
            let s1 = inv.s1 / t;
            let mut out = Vec::with_capacity(n1 * n2);
            for i in 0..n1 {
                for j in 0..n2 {
                    let fj = space.frame_jet(&jets, it, i, j);
                    let u0 = fj.value;
                    let mut b = fj.hess;
                    let mut orbit = fj.orbit;
                    for f in 0..2 {
                        b[f + 1][f + 1] += u0 * a[f] * a[f];
                        orbit[f] += u0 * a[f] * a[f];
                    }
                    let trace = b[0][0] + b[1][1] + b[2][2] + mult[0] * orbit[0] + mult[1] * orbit[1];
                    let sq: f64 = b.iter().flatten().map(|v| v * v).sum::<f64>()
                        + mult[0] * orbit[0] * orbit[0]
                        + mult[1] * orbit[1] * orbit[1];
                    let mut q = 0.5 * (trace * trace - sq);
                    for f in 0..2 {
                        let w = (s1 - a[f]) * a[f];
                        q += w * fj.grad[f + 1] * fj.grad[f + 1];
                        q += 2.0 * u0 * w * (fj.hess[f + 1][f + 1] + mult[f] * fj.orbit[f]);
                    }
                    q += u0 * u0 * (s1 * tr3 - tr4);
                    let grad2: f64 = fj.grad.iter().map(|g| g * g).sum();
                    q -= 2.0 * u0 * fj.grad[0] * inv.s2 / t.powi(3) + grad2 * inv.s2 / (t * t);
                    out.push(q);
                }
            }
            out
        })
        .collect();
    Ok(ConeField::from_values(Array3::from_shape_fn((nt, n1, n2), |(it, i, j)| slices[it][i * n2 + j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Parity;
    use crate::link::solve_scalar_flat_radii;
    use crate::quadrature::RadialGrid;
    use approx::assert_abs_diff_eq;
    use ndarray::Axis;

    fn space(nt: usize, sizes: (usize, usize)) -> ConeSpace {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        ConeSpace::band_limited(link, RadialGrid::new(1e-2, nt).unwrap(), sizes, None, 0.5).unwrap()
    }

    fn power_profiles(sp: &ConeSpace, terms: &[(usize, f64, f64)]) -> Array2<f64> {
        let mut a = Array2::zeros((sp.mode_count(), sp.radial.count));
        for &(m, w, g) in terms {
            for (i, t) in sp.radial.t_nodes.iter().enumerate() {
                a[[m, i]] += w * t.powf(g);
            }
        }
        a
    }

    fn rel_interior(sp: &ConeSpace, a: &Array3<f64>, b: &Array3<f64>) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for it in sp.interior() {
            let t3 = sp.radial.t_nodes[it].powi(3);
            for (x, y) in a.index_axis(Axis(0), it).iter().zip(b.index_axis(Axis(0), it).iter()) {
                num = num.max(t3 * (x - y).abs());
                den = den.max(t3 * y.abs());
            }
        }
        num / den
    }

    #[test]
    fn homogeneous_solutions_are_annihilated() {
        let err = |nt: usize| {
            let sp = space(nt, (17, 16));
            let mut worst = 0.0f64;
            for (m, mode) in sp.modes().iter().enumerate() {
                let mut a = Array2::zeros((sp.mode_count(), nt));
                for (i, t) in sp.radial.t_nodes.iter().enumerate() {
                    a[[m, i]] = (mode.gamma_plus * t.ln()).exp().re;
                }
                let u = ConeField::from_profiles(a);
                let lu = jacobi_apply(&sp, &u).unwrap();
                let p = lu.profiles().unwrap();
                for i in 1..nt - 1 {
                    let t = sp.radial.t_nodes[i];
                    let scale = sp.inv.s1 * (1.0 + mode.mu.abs()) * t.powf(mode.gamma_plus.re - 3.0);
                    worst = worst.max(p[[m, i]].abs() / scale);
                }
            }
            worst
        };
        let (coarse, fine) = (err(65), err(129));
        assert!(fine < 0.3 * coarse, "{coarse} {fine}");
    }

    #[test]
    fn cubic_mode_example() {
        let sp = space(257, (17, 16));
        let idx = sp.selection.index_of((1, 1, Parity::Cos)).unwrap();
        let u = ConeField::from_profiles(power_profiles(&sp, &[(idx, 1.0, 3.0)]));
        let lu = jacobi_apply(&sp, &u).unwrap();
        let p = lu.profiles().unwrap();
        for i in 1..sp.radial.count - 1 {
            assert_abs_diff_eq!(p[[idx, i]], 10.0 * sp.inv.s1, epsilon = 1e-3 * 10.0 * sp.inv.s1);
        }
    }

    #[test]
    fn divergence_form_agrees_with_spectral_form() {
        let err = |nt: usize, n1: usize, n2: usize| {
            let sp = space(nt, (n1, n2));
            let u = sp.field_from_profiles(power_profiles(&sp, &[(0, 0.4, 2.2), (2, 1.0, 2.5), (5, 0.5, 3.0), (9, 0.3, 2.7)]));
            let spectral = jacobi_apply(&sp, &u).unwrap();
            let div = jacobi_divergence_form(&sp, u.values().unwrap());
            rel_interior(&sp, &div, spectral.values().unwrap())
        };
        let (coarse, fine) = (err(65, 17, 16), err(129, 33, 32));
        assert!(fine < 0.35 * coarse && fine < 1e-2, "{coarse} {fine}");
    }

    #[test]
    fn oracle_linearization_matches_jacobi_operator() {
        let err = |nt: usize, n1: usize, n2: usize| {
            let sp = space(nt, (n1, n2));
            let u = sp.field_from_profiles(power_profiles(&sp, &[(0, 0.4, 2.2), (2, 1.0, 2.5), (9, 0.3, 2.7)]));
            let oracle = CurvatureOracle::new(&sp).unwrap();
            let lin = oracle.linearization(&sp, u.values().unwrap()).unwrap();
            let spectral = jacobi_apply(&sp, &u).unwrap();
            rel_interior(&sp, &lin, spectral.values().unwrap())
        };
        let (coarse, fine) = (err(65, 17, 16), err(129, 33, 32));
        assert!(fine < 0.35 * coarse && fine < 1e-2, "{coarse} {fine}");
    }

    #[test]
    fn integral_remainder_matches_subtraction() {
        let sp = space(65, (17, 16));
        let u = sp.field_from_profiles(power_profiles(&sp, &[(0, 0.02, 2.2), (sp.selection.j_threshold, 0.05, 2.5)]));
        let oracle = CurvatureOracle::new(&sp).unwrap();
        let v = u.values().unwrap();
        let q = oracle.remainder(&sp, v).unwrap();
        let diff = oracle.remainder_by_difference(&sp, v).unwrap();
        assert!(rel_interior(&sp, &q, &diff) < 1e-6);
    }

    #[test]
    fn remainder_is_quadratic() {
        let sp = space(65, (17, 16));
        let u = sp.field_from_profiles(power_profiles(&sp, &[(0, 0.2, 2.2), (sp.selection.j_threshold, 1.0, 2.5)]));
        let oracle = CurvatureOracle::new(&sp).unwrap();
        let v = u.values().unwrap();
        let norm = |s: f64| oracle.remainder(&sp, &(v * s)).unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs())) / (s * s);
        let (big, small) = (norm(1e-2), norm(1e-3));
        assert!((big / small - 1.0).abs() < 0.05, "{big} {small}");
    }

    #[test]
    fn remainder_vanishes_at_zero() {
        let sp = space(33, (17, 16));
        let oracle = CurvatureOracle::new(&sp).unwrap();
        let q = nonlinear_remainder(&sp, &sp.zeros(), &oracle).unwrap();
        assert_eq!(q.sup_abs().unwrap(), 0.0);
        assert_eq!(explicit_leading_q(&sp, &sp.zeros()).unwrap().sup_abs().unwrap(), 0.0);
    }

    #[test]
    fn explicit_q_of_radial_square() {
        // u = t^2: frame Hessian is 2 Id, the gradient is radial
        let sp = space(257, (17, 16));
        let u = ConeField::from_values(sp.tabulate(|t, _, _| t * t));
        let q = explicit_leading_q(&sp, &u).unwrap();
        let inv = sp.inv;
        let diag = [2.0, 2.0 + inv.lambda1.powi(2), 2.0 + inv.lambda1.powi(2), 2.0 + inv.lambda2.powi(2)];
        let tr: f64 = diag.iter().sum();
        let sq: f64 = diag.iter().map(|d| d * d).sum();
        let cubes = 2.0 * inv.lambda1.powi(3) + inv.lambda2.powi(3);
        let fourths = 2.0 * inv.lambda1.powi(4) + inv.lambda2.powi(4);
        let expect = 0.5 * (tr * tr - sq) + inv.s1 * cubes - fourths;
        let v = q.values().unwrap();
        for it in [60, 128, 200] {
            assert_abs_diff_eq!(v[[it, 4, 7]], expect, epsilon = 1e-2 * expect.abs());
        }
    }

    #[test]
    fn geometry_scalings() {
        let geo = ConeGeometry::new(solve_scalar_flat_radii(2, 1).unwrap());
        for t in [0.1, 0.5, 1.0] {
            for r in 1..=3 {
                let base = geo.s_bar(r, 1.0);
                assert_abs_diff_eq!(geo.s_bar(r, t) * t.powi(r as i32), base, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(geo.shape_eigenvalues(t)[1] * t, geo.inv.lambda1, epsilon = 1e-14);
            assert_abs_diff_eq!(geo.third_form_eigenvalues(t)[2] * t * t, geo.inv.lambda2.powi(2), epsilon = 1e-14);
        }
    }
}
