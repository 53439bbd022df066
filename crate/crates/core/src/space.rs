//! Discrete truncated cone: grids, retained modes and fields living on them.
//!
//! A [`ConeField`] is stored as grid values over `(t, theta1, theta2)` and/or as
//! radial profiles `a_j(t)` of the retained modes, with `u = sum_j a_j phi_j`.

use std::collections::BTreeMap;

use ndarray::{s, Array2, Array3, Axis, Zip};
use rayon::prelude::*;

use crate::basis::{FactorMode, FactorTable};
use crate::error::{Error, Result};
use crate::link::{CliffordLink, CurvatureInvariants};
use crate::quadrature::{AngularGrid, FactorGrid, FactorKind, RadialGrid};
use crate::spectrum::{select_band_limited, SpectralMode, ThresholdSelection};

/// Scalar function on the truncated cone.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConeField {
    /// Grid values indexed `[t][theta1][theta2]`.
    pub values: Option<Array3<f64>>,
    /// Mode profiles indexed `[mode][t]`.
    pub profiles: Option<Array2<f64>>,
}

impl ConeField {
    pub fn from_values(values: Array3<f64>) -> Self {
        Self { values: Some(values), profiles: None }
    }

    pub fn from_profiles(profiles: Array2<f64>) -> Self {
        Self { values: None, profiles: Some(profiles) }
    }

    pub fn values(&self) -> Result<&Array3<f64>> {
        self.values.as_ref().ok_or(Error::MissingValues)
    }

    pub fn profiles(&self) -> Result<&Array2<f64>> {
        self.profiles.as_ref().ok_or(Error::MissingProfiles)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.as_ref().map(|v| v * c), profiles: self.profiles.as_ref().map(|p| p * c) }
    }

    /// `self + c * other` on every representation present in both.
    pub fn axpy(&self, c: f64, other: &ConeField) -> Self {
        let comb = |a: Option<&Array3<f64>>, b: Option<&Array3<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some(a + &(b * c)),
            _ => None,
        };
        let combp = |a: Option<&Array2<f64>>, b: Option<&Array2<f64>>| match (a, b) {
            (Some(a), Some(b)) => Some(a + &(b * c)),
            _ => None,
        };
        Self {
            values: comb(self.values.as_ref(), other.values.as_ref()),
            profiles: combp(self.profiles.as_ref(), other.profiles.as_ref()),
        }
    }

    pub fn sup_abs(&self) -> Result<f64> {
        Ok(self.values()?.iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// Grid values of a field and its derivatives up to second order in `(x, theta1, theta2)`, `x = ln t`.
#[derive(Debug, Clone)]
pub struct FieldJets {
    pub u: Array3<f64>,
    pub u_x: Array3<f64>,
    pub u_xx: Array3<f64>,
    pub u_1: Array3<f64>,
    pub u_11: Array3<f64>,
    pub u_2: Array3<f64>,
    pub u_22: Array3<f64>,
    pub u_x1: Array3<f64>,
    pub u_x2: Array3<f64>,
    pub u_12: Array3<f64>,
}

/// Gradient and Hessian of a zonal function in the cone's orthonormal frame.
///
/// Index 0 is radial, 1 and 2 are the meridian directions of the two factors.
/// Orbit directions are diagonal with entries `orbit[f]`, multiplicity `dim_f - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameJet {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub orbit: [f64; 2],
}

/// Second-order derivatives in `x` of each row of `profiles`, uniform step `h`.
pub fn radial_derivatives(profiles: &Array2<f64>, h: f64) -> (Array2<f64>, Array2<f64>) {
    let (rows, n) = profiles.dim();
    let mut d1 = Array2::zeros((rows, n));
    let mut d2 = Array2::zeros((rows, n));
    for r in 0..rows {
        let a = profiles.row(r);
        for i in 0..n {
            let (v1, v2) = if i == 0 {
                ((-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h), (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / (h * h))
            } else if i == n - 1 {
                (
                    (3.0 * a[i] - 4.0 * a[i - 1] + a[i - 2]) / (2.0 * h),
                    (2.0 * a[i] - 5.0 * a[i - 1] + 4.0 * a[i - 2] - a[i - 3]) / (h * h),
                )
            } else {
                ((a[i + 1] - a[i - 1]) / (2.0 * h), (a[i + 1] - 2.0 * a[i] + a[i - 1]) / (h * h))
            };
            d1[[r, i]] = v1;
            d2[[r, i]] = v2;
        }
    }
    (d1, d2)
}

/// Grids, link data and retained modes of one discretization.
#[derive(Debug, Clone)]
pub struct ConeSpace {
    pub link: CliffordLink,
    pub inv: CurvatureInvariants,
    pub n: usize,
    pub radial: RadialGrid,
    pub angular: AngularGrid,
    pub selection: ThresholdSelection,
    first: Vec<FactorTable>,
    second: Vec<FactorTable>,
    /// For each retained mode: factor table indices.
    pairs: Vec<(usize, usize)>,
}

impl ConeSpace {
    pub fn new(link: CliffordLink, radial: RadialGrid, sizes: (usize, usize), selection: ThresholdSelection) -> Result<Self> {
        let k1 = FactorKind::from_dim(link.p);
        let k2 = FactorKind::from_dim(link.q);
        let angular = AngularGrid::new(FactorGrid::new(k1, link.a1, sizes.0)?, FactorGrid::new(k2, link.a2, sizes.1)?);
        let mut first_idx: BTreeMap<FactorMode, usize> = BTreeMap::new();
        let mut second_idx: BTreeMap<FactorMode, usize> = BTreeMap::new();
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut pairs = Vec::with_capacity(selection.modes.len());
        for mode in &selection.modes {
            let (f, g) = mode.factor_modes(&link);
            let fi = *first_idx.entry(f).or_insert_with(|| {
                first.push(FactorTable::new(f, &angular.first));
                first.len() - 1
            });
            let gi = *second_idx.entry(g).or_insert_with(|| {
                second.push(FactorTable::new(g, &angular.second));
                second.len() - 1
            });
            pairs.push((fi, gi));
        }
        Ok(Self { inv: link.invariants(), n: link.n, link, radial, angular, selection, first, second, pairs })
    }

    /// Largest mode box resolved exactly by the angular quadrature.
    pub fn band_limits(link: &CliffordLink, sizes: (usize, usize)) -> (usize, usize) {
        let lim = |dim: usize, n: usize| if dim == 1 { n / 2 - 1 } else { (n - 1) / 2 };
        (lim(link.p, sizes.0), lim(link.q, sizes.1))
    }

    /// Space retaining every mode in the exactly resolved box.
    pub fn band_limited(
        link: CliffordLink,
        radial: RadialGrid,
        sizes: (usize, usize),
        m_requested: Option<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let (kmax, lmax) = Self::band_limits(&link, sizes);
        let sel = select_band_limited(&link, link.n, m_requested, epsilon, kmax, lmax)?;
        Self::new(link, radial, sizes, sel)
    }

    /// Same link, modes and angular sizes on another radial grid.
    pub fn with_radial(&self, radial: RadialGrid) -> Self {
        Self { radial, ..self.clone() }
    }

    pub fn modes(&self) -> &[SpectralMode] {
        &self.selection.modes
    }

    pub fn mode_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        let (a, b) = self.angular.shape();
        (self.radial.count, a, b)
    }

    pub fn zeros(&self) -> ConeField {
        ConeField {
            values: Some(Array3::zeros(self.shape())),
            profiles: Some(Array2::zeros((self.mode_count(), self.radial.count))),
        }
    }

    fn factor_matrix(tables: &[FactorTable], order: usize) -> Array2<f64> {
        let len = tables.first().map(|t| t.values.len()).unwrap_or(0);
        Array2::from_shape_fn((tables.len(), len), |(r, i)| match order {
            0 => tables[r].values[i],
            1 => tables[r].d1[i],
            _ => tables[r].d2[i],
        })
    }

    /// Values of mode `index` on the angular grid.
    pub fn eigenfunction(&self, index: usize) -> Array2<f64> {
        let (fi, gi) = self.pairs[index];
        let c = self.selection.modes[index].norm_const;
        let (a, b) = (&self.first[fi].values, &self.second[gi].values);
        Array2::from_shape_fn(self.angular.shape(), |(i, j)| c * a[i] * b[j])
    }

    /// Angular jet of mode `index` at node `(i, j)`: `[phi, phi_1, phi_11, phi_2, phi_22, phi_12]`.
    pub fn eigenfunction_jet(&self, index: usize, i: usize, j: usize) -> [f64; 6] {
        let (fi, gi) = self.pairs[index];
        let c = self.selection.modes[index].norm_const;
        let (a, b) = (&self.first[fi], &self.second[gi]);
        [
            c * a.values[i] * b.values[j],
            c * a.d1[i] * b.values[j],
            c * a.d2[i] * b.values[j],
            c * a.values[i] * b.d1[j],
            c * a.values[i] * b.d2[j],
            c * a.d1[i] * b.d1[j],
        ]
    }

    /// `sum_j profiles[j] * d^(o1) d^(o2) phi_j` on the full grid.
    pub fn synthesize_derivative(&self, profiles: &Array2<f64>, o1: usize, o2: usize) -> Array3<f64> {
        let f1 = Self::factor_matrix(&self.first, o1);
        let f2 = Self::factor_matrix(&self.second, o2);
        let (nt, n1, n2) = self.shape();
        let slices: Vec<Array2<f64>> = (0..nt)
            .into_par_iter()
            .map(|it| {
                let mut b = Array2::<f64>::zeros((self.first.len(), self.second.len()));
                for (m, &(fi, gi)) in self.pairs.iter().enumerate() {
                    b[[fi, gi]] += profiles[[m, it]] * self.selection.modes[m].norm_const;
                }
                f1.t().dot(&b).dot(&f2)
            })
            .collect();
        let mut out = Array3::zeros((nt, n1, n2));
        for (it, sl) in slices.into_iter().enumerate() {
            out.index_axis_mut(Axis(0), it).assign(&sl);
        }
        out
    }

    pub fn synthesize(&self, profiles: &Array2<f64>) -> Array3<f64> {
        self.synthesize_derivative(profiles, 0, 0)
    }

    /// Coefficients `a_j(t) = int u phi_j S1 dtheta` by grid quadrature.
    pub fn project(&self, values: &Array3<f64>) -> Array2<f64> {
        let w1 = &self.angular.first.weights;
        let w2 = &self.angular.second.weights;
        let f1 = Array2::from_shape_fn((self.first.len(), w1.len()), |(r, i)| self.first[r].values[i] * w1[i]);
        let f2 = Array2::from_shape_fn((w2.len(), self.second.len()), |(j, r)| self.second[r].values[j] * w2[j]);
        let nt = values.dim().0;
        let cols: Vec<Vec<f64>> = (0..nt)
            .into_par_iter()
            .map(|it| {
                let p = f1.dot(&values.index_axis(Axis(0), it)).dot(&f2);
                self.pairs
                    .iter()
                    .enumerate()
                    .map(|(m, &(fi, gi))| self.inv.s1 * self.selection.modes[m].norm_const * p[[fi, gi]])
                    .collect()
            })
            .collect();
        Array2::from_shape_fn((self.mode_count(), nt), |(m, it)| cols[it][m])
    }

    /// Fills whichever representation is missing.
    pub fn complete(&self, field: &ConeField) -> Result<ConeField> {
        match (&field.values, &field.profiles) {
            (Some(_), Some(_)) => Ok(field.clone()),
            (Some(v), None) => Ok(ConeField { values: Some(v.clone()), profiles: Some(self.project(v)) }),
            (None, Some(p)) => Ok(ConeField { values: Some(self.synthesize(p)), profiles: Some(p.clone()) }),
            (None, None) => Err(Error::MissingValues),
        }
    }

    /// Field with the given profiles in both representations.
    pub fn field_from_profiles(&self, profiles: Array2<f64>) -> ConeField {
        ConeField { values: Some(self.synthesize(&profiles)), profiles: Some(profiles) }
    }

    /// Jets from the spectral representation: exact in angle, second order in `x`.
    pub fn jets(&self, field: &ConeField) -> Result<FieldJets> {
        let a = match &field.profiles {
            Some(p) => p.clone(),
            None => self.project(field.values()?),
        };
        let h = self.radial.step();
        let (a_x, a_xx) = radial_derivatives(&a, h);
        let u = match &field.values {
            Some(v) => v.clone(),
            None => self.synthesize(&a),
        };
        Ok(FieldJets {
            u,
            u_x: self.synthesize(&a_x),
            u_xx: self.synthesize(&a_xx),
            u_1: self.synthesize_derivative(&a, 1, 0),
            u_11: self.synthesize_derivative(&a, 2, 0),
            u_2: self.synthesize_derivative(&a, 0, 1),
            u_22: self.synthesize_derivative(&a, 0, 2),
            u_x1: self.synthesize_derivative(&a_x, 1, 0),
            u_x2: self.synthesize_derivative(&a_x, 0, 1),
            u_12: self.synthesize_derivative(&a, 1, 1),
        })
    }

    /// Orthonormal-frame gradient and Hessian at node `(it, i, j)`.
    pub fn frame_jet(&self, jets: &FieldJets, it: usize, i: usize, j: usize) -> FrameJet {
        let t = self.radial.t_nodes[it];
        let idx = [it, i, j];
        let u = jets.u[idx];
        let ux = jets.u_x[idx];
        let u_t = ux / t;
        let u_tt = (jets.u_xx[idx] - ux) / (t * t);
        let (a1, a2) = (self.link.a1, self.link.a2);
        let th = [self.angular.first.nodes[i], self.angular.second.nodes[j]];
        let kinds = [self.angular.first.kind, self.angular.second.kind];
        let d1 = [jets.u_1[idx], jets.u_2[idx]];
        let d2 = [jets.u_11[idx], jets.u_22[idx]];
        let dx = [jets.u_x1[idx], jets.u_x2[idx]];
        let radii = [a1, a2];
        let mut hess = [[0.0; 3]; 3];
        let mut grad = [u_t, 0.0, 0.0];
        let mut orbit = [0.0; 2];
        hess[0][0] = u_tt;
        for f in 0..2 {
            let a = radii[f];
            grad[f + 1] = d1[f] / (t * a);
            // d_t (u_theta / (t a)) in the frame
            hess[0][f + 1] = dx[f] / (t * t * a) - d1[f] / (t * t * a);
            hess[f + 1][0] = hess[0][f + 1];
            hess[f + 1][f + 1] = d2[f] / (t * t * a * a) + u_t / t;
            if let FactorKind::Sphere { .. } = kinds[f] {
                let s = th[f].sin();
                let cot_term = if s.abs() < 1e-12 { d2[f] } else { th[f].cos() / s * d1[f] };
                orbit[f] = cot_term / (t * t * a * a) + u_t / t;
            }
        }
        let mixed = jets.u_12[idx] / (t * t * a1 * a2);
        hess[1][2] = mixed;
        hess[2][1] = mixed;
        FrameJet { value: u, grad, hess, orbit }
    }

    /// Orbit multiplicities of the two factors.
    pub fn orbit_multiplicity(&self) -> [usize; 2] {
        [self.link.p - 1, self.link.q - 1]
    }

    /// Angular integral `int f dtheta` of one slice.
    pub fn angular_integral(&self, slice: ndarray::ArrayView2<f64>) -> f64 {
        let (n1, n2) = self.angular.shape();
        let mut total = 0.0;
        for i in 0..n1 {
            let mut row = 0.0;
            for j in 0..n2 {
                row += self.angular.second.weights[j] * slice[[i, j]];
            }
            total += self.angular.first.weights[i] * row;
        }
        total
    }

    /// Values of a function of `(t, theta1, theta2)` on the grid.
    pub fn tabulate(&self, f: impl Fn(f64, f64, f64) -> f64 + Sync) -> Array3<f64> {
        let mut out = Array3::zeros(self.shape());
        Zip::indexed(&mut out).for_each(|(it, i, j), v| {
            *v = f(self.radial.t_nodes[it], self.angular.first.nodes[i], self.angular.second.nodes[j]);
        });
        out
    }

    /// Interior slice range excluding the tip row and the outer boundary row.
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.radial.count - 1
    }

    /// Restriction of the values to the slices in `range`.
    pub fn slab(values: &Array3<f64>, range: std::ops::Range<usize>) -> ndarray::ArrayView3<'_, f64> {
        values.slice(s![range, .., ..])
    }
}
