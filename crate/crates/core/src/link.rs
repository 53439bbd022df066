//! Scalar-flat products of round spheres in the unit sphere and their curvature invariants.
//!
//! A link `S^p(a1) x S^q(a2)` sits in `S^n`, `n = p + q + 1`, with `a1^2 + a2^2 = 1`.
//! Its principal curvatures are constant, so everything downstream only needs the
//! two curvature values together with their multiplicities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Abstract link data consumed by the cone machinery.
pub trait LinkGeometry {
    /// Ambient sphere dimension.
    fn ambient_dim(&self) -> usize;
    /// Principal curvatures paired with their multiplicities.
    fn principal_curvatures(&self) -> Vec<(f64, usize)>;
}

/// Product-of-spheres link with vanishing scalar curvature of its cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CliffordLink {
    pub p: usize,
    pub q: usize,
    pub a1: f64,
    pub a2: f64,
    pub sigma: f64,
    pub n: usize,
}

/// Principal curvatures, symmetric functions and Newton tensor eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureInvariants {
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    #[serde(rename = "S3")]
    pub s3: f64,
    pub t1_eigs: (f64, f64),
}

fn choose2(k: usize) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// Builds the scalar-flat link `S^p x S^q` with orientation making `S1 > 0`.
pub fn solve_scalar_flat_radii(p: usize, q: usize) -> Result<CliffordLink> {
    if p == 0 || q == 0 || p + q < 3 {
        return Err(Error::NoScalarFlatRadii { p, q });
    }
    let (a, b, c) = (choose2(p), -((p * q) as f64), choose2(q));
    let y = if a == 0.0 {
        // linear case p = 1
        -c / b
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Err(Error::NoScalarFlatRadii { p, q });
        }
        let sq = disc.sqrt();
        // stable pair of roots
        let big = (-b + sq) / (2.0 * a);
        let small = if big != 0.0 { c / (a * big) } else { 0.0 };
        let positive: Vec<f64> = [big, small].into_iter().filter(|v| *v > 0.0).collect();
        match positive.iter().copied().find(|v| *v >= 1.0) {
            Some(v) => v,
            None => *positive.first().ok_or(Error::NoScalarFlatRadii { p, q })?,
        }
    };
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::NoScalarFlatRadii { p, q });
    }
    let a1 = (1.0 / (1.0 + y)).sqrt();
    let a2 = (y / (1.0 + y)).sqrt();
    let s1_plus = p as f64 * a2 / a1 - q as f64 * a1 / a2;
    let sigma = if s1_plus > 0.0 {
        1.0
    } else if s1_plus < 0.0 {
        -1.0
    } else {
        return Err(Error::DegenerateLink);
    };
    Ok(CliffordLink { p, q, a1, a2, sigma, n: p + q + 1 })
}

/// Elementary symmetric polynomial `e_r` via the expansion of `prod (1 + x_i s)`.
pub fn elementary_symmetric(values: &[f64], r: usize) -> Result<f64> {
    if r > values.len() {
        return Err(Error::InvalidOrder { r, len: values.len() });
    }
    let mut e = vec![0.0; r + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=r).rev() {
            e[j] += v * e[j - 1];
        }
    }
    Ok(e[r])
}

impl CliffordLink {
    pub fn lambda1(&self) -> f64 {
        self.sigma * self.a2 / self.a1
    }

    pub fn lambda2(&self) -> f64 {
        -self.sigma * self.a1 / self.a2
    }

    /// Full multiset of principal curvatures.
    pub fn curvature_multiset(&self) -> Vec<f64> {
        let mut v = vec![self.lambda1(); self.p];
        v.extend(std::iter::repeat_n(self.lambda2(), self.q));
        v
    }

    pub fn invariants(&self) -> CurvatureInvariants {
        invariants(self)
    }

    /// The same submanifold with the factors listed in the opposite order.
    pub fn swapped(&self) -> CliffordLink {
        CliffordLink { p: self.q, q: self.p, a1: self.a2, a2: self.a1, sigma: -self.sigma, n: self.n }
    }
}

impl LinkGeometry for CliffordLink {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn principal_curvatures(&self) -> Vec<(f64, usize)> {
        vec![(self.lambda1(), self.p), (self.lambda2(), self.q)]
    }
}

pub fn invariants(link: &CliffordLink) -> CurvatureInvariants {
    let values = link.curvature_multiset();
    let e = |r| elementary_symmetric(&values, r).unwrap_or(0.0);
    let (lambda1, lambda2) = (link.lambda1(), link.lambda2());
    let s1 = e(1);
    CurvatureInvariants {
        lambda1,
        lambda2,
        s1,
        s2: e(2),
        s3: e(3),
        t1_eigs: (s1 - lambda1, s1 - lambda2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn s2xs1_radii_and_invariants() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        assert_abs_diff_eq!(link.a1, (1.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(link.a2, (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let inv = link.invariants();
        assert_abs_diff_eq!(inv.s1, 2.0 * 2f64.sqrt() - 0.5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(inv.s3, -(2f64.sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!(inv.s2, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.t1_eigs.0, 0.5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(inv.t1_eigs.1, 2.0 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn s3xs1_is_balanced() {
        let link = solve_scalar_flat_radii(3, 1).unwrap();
        assert_abs_diff_eq!(link.a1, link.a2, epsilon = 1e-15);
    }

    #[test]
    fn s4xs4_radii() {
        let link = solve_scalar_flat_radii(4, 4).unwrap();
        let y = (4.0 + 7f64.sqrt()) / 3.0;
        assert_abs_diff_eq!(link.a1 * link.a1, 3.0 / (7.0 + 7f64.sqrt()), epsilon = 1e-14);
        assert_abs_diff_eq!((link.a2 / link.a1).powi(2), y, epsilon = 1e-13);
        let inv = link.invariants();
        let r = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(inv.s1, 4.0 * r, epsilon = 1e-13);
        assert_abs_diff_eq!(inv.s3, -(28.0 / 3.0) * r, epsilon = 1e-12);
    }

    #[test]
    fn rejects_circles() {
        assert!(matches!(solve_scalar_flat_radii(1, 1), Err(Error::NoScalarFlatRadii { .. })));
        assert!(solve_scalar_flat_radii(0, 3).is_err());
    }

    #[test]
    fn elementary_symmetric_examples() {
        let s = 2f64.sqrt();
        assert_abs_diff_eq!(elementary_symmetric(&[s, s, -1.0 / s], 2).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(elementary_symmetric(&[1.0, 1.0, 1.0], 1).unwrap(), 3.0);
        assert_eq!(elementary_symmetric(&[2.0, 3.0, 4.0], 3).unwrap(), 24.0);
        assert_eq!(elementary_symmetric(&[2.0], 0).unwrap(), 1.0);
        assert!(matches!(elementary_symmetric(&[1.0], 2), Err(Error::InvalidOrder { .. })));
    }

    #[test]
    fn descriptor_field_names() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        let json = serde_json::to_value(link).unwrap();
        for key in ["p", "q", "a1", "a2", "sigma", "n"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    fn family() -> impl Strategy<Value = (usize, usize)> {
        (1usize..=8, 1usize..=8).prop_filter("p+q>=3", |(p, q)| p + q >= 3)
    }

    proptest! {
        #[test]
        fn scalar_flat_family((p, q) in family()) {
            let link = solve_scalar_flat_radii(p, q).unwrap();
            let inv = link.invariants();
            let lam = link.curvature_multiset();
            prop_assert!((link.a1.powi(2) + link.a2.powi(2) - 1.0).abs() < 1e-15);
            prop_assert!(inv.s2.abs() < 1e-12);
            prop_assert!(inv.s1 > 0.0);
            prop_assert!(inv.s3 != 0.0);
            // tr(T1 A^2) = sum (S1 - l) l^2
            let tr: f64 = lam.iter().map(|l| (inv.s1 - l) * l * l).sum();
            prop_assert!((tr + 3.0 * inv.s3).abs() < 1e-12 * (1.0 + inv.s3.abs()));
            let cubes: f64 = lam.iter().map(|l| l.powi(3)).sum();
            let newton = inv.s1.powi(3) - 3.0 * inv.s1 * inv.s2 + 3.0 * inv.s3;
            prop_assert!((cubes - newton).abs() < 1e-10 * (1.0 + cubes.abs()));
            prop_assert!(inv.t1_eigs.0 > 0.0 && inv.t1_eigs.1 > 0.0);
        }

        #[test]
        fn factor_swap((p, q) in family()) {
            let a = solve_scalar_flat_radii(p, q).unwrap();
            let b = a.swapped();
            let (ia, ib) = (a.invariants(), b.invariants());
            prop_assert!((ia.lambda1 - ib.lambda2).abs() < 1e-12);
            prop_assert!((ia.lambda2 - ib.lambda1).abs() < 1e-12);
            prop_assert!(ib.s2.abs() < 1e-12);
            prop_assert!((ia.s1 - ib.s1).abs() < 1e-10);
            prop_assert!((ia.s3 - ib.s3).abs() < 1e-10);
            // with a single positive root the solver itself returns the swapped link
            if p.min(q) == 1 {
                let c = solve_scalar_flat_radii(q, p).unwrap();
                prop_assert!((c.a1 - b.a1).abs() < 1e-12 && (c.sigma - b.sigma).abs() == 0.0);
            }
        }
    }
}
