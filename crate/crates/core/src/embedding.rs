//! Independent curvature oracle: the normal graph embedded in Euclidean space.
//!
//! Zonal graphs are invariant under the isotropy of both factors, so each point is
//! represented in the 4-dimensional span of its two meridian planes,
//! `Y = (r1 cos th1, r1 sin th1, r2 cos th2, r2 sin th2)` with profile radii
//! `r1 = t a1 - sigma u a2`, `r2 = t a2 + sigma u a1`. Derivatives of `Y` are taken by
//! fourth-order finite differences in `(ln t, th1, th2)`; orbit directions contribute
//! their curvatures in closed form.
//!
//! The kernel is generic over dual numbers, which yields the exact derivative of the
//! discrete scalar curvature with respect to `u`.

use nalgebra::{Matrix3, SymmetricEigen};
use ndarray::{Array3, Array4, Axis};
use num_dual::{Dual2_64, Dual64, DualNum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::CliffordLink;
use crate::quadrature::{AngularGrid, FactorKind, RadialGrid};
use crate::stencil::{fornberg_weights, uniform_stencil};

/// The normal graph of `u` over the cone, sampled on the cone's grid.
#[derive(Debug, Clone)]
pub struct EmbeddedGraph {
    pub link: CliffordLink,
    pub radial: RadialGrid,
    pub angular: AngularGrid,
    pub u: Array3<f64>,
    /// Profile radius of the first factor.
    pub rho1: Array3<f64>,
    /// Profile radius of the second factor.
    pub rho2: Array3<f64>,
}

impl EmbeddedGraph {
    /// Reduced position `(x-plane, y-plane)` coordinates of node `(it, i, j)`.
    pub fn point(&self, it: usize, i: usize, j: usize) -> [f64; 4] {
        let (th1, th2) = (self.angular.first.nodes[i], self.angular.second.nodes[j]);
        let (r1, r2) = (self.rho1[[it, i, j]], self.rho2[[it, i, j]]);
        [r1 * th1.cos(), r1 * th1.sin(), r2 * th2.cos(), r2 * th2.sin()]
    }

    /// Reference cone normal `sigma (-a2 w1, a1 w2)` in reduced coordinates.
    pub fn cone_normal(&self, i: usize, j: usize) -> [f64; 4] {
        cone_normal(&self.link, self.angular.first.nodes[i], self.angular.second.nodes[j])
    }
}

fn cone_normal(link: &CliffordLink, th1: f64, th2: f64) -> [f64; 4] {
    let s = link.sigma;
    [-s * link.a2 * th1.cos(), -s * link.a2 * th1.sin(), s * link.a1 * th2.cos(), s * link.a1 * th2.sin()]
}

/// Embeds the normal graph of `u` and checks that both profile radii stay positive.
pub fn embed_graph(link: &CliffordLink, u: &Array3<f64>, radial: &RadialGrid, angular: &AngularGrid) -> Result<EmbeddedGraph> {
    let (nt, n1, n2) = u.dim();
    if nt != radial.count || (n1, n2) != angular.shape() {
        return Err(Error::InvalidInput("field shape does not match the grids".into()));
    }
    let mut rho1 = Array3::zeros(u.dim());
    let mut rho2 = Array3::zeros(u.dim());
    for ((it, i, j), v) in u.indexed_iter() {
        let t = radial.t_nodes[it];
        let r1 = t * link.a1 - link.sigma * v * link.a2;
        let r2 = t * link.a2 + link.sigma * v * link.a1;
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(Error::ImmersionFailure(format!("profile radius vanishes at node ({it}, {i}, {j})")));
        }
        rho1[[it, i, j]] = r1;
        rho2[[it, i, j]] = r2;
    }
    Ok(EmbeddedGraph { link: *link, radial: radial.clone(), angular: angular.clone(), u: u.clone(), rho1, rho2 })
}

/// Fundamental forms and orbit curvatures at one node.
#[derive(Debug, Clone, Copy)]
struct NodeForms<D> {
    metric: [[D; 3]; 3],
    second: [[D; 3]; 3],
    orbit: [D; 2],
}

/// Finite-difference machinery shared by all nodes.
struct Stencils {
    /// Per radial node: offsets and weights of the first and second derivative.
    radial: Vec<(Vec<isize>, Vec<f64>, Vec<f64>)>,
    /// Centered five-point weights per unit angular step, first and second derivative.
    angular1: [f64; 5],
    angular2: [f64; 5],
}

impl Stencils {
    fn new(radial: &RadialGrid) -> Self {
        let h = radial.step();
        let rad = (0..radial.count)
            .map(|i| {
                let (off, w1) = uniform_stencil(i, radial.count, h, 1);
                let (_, w2) = uniform_stencil(i, radial.count, h, 2);
                (off, w1, w2)
            })
            .collect();
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &nodes, 2);
        Self {
            radial: rad,
            angular1: std::array::from_fn(|k| w[1][k]),
            angular2: std::array::from_fn(|k| w[2][k]),
        }
    }
}

const GHOST: usize = 2;

/// Reduced positions on the radial neighbours of one slice, with two ghost layers in each angle.
struct SliceBlock<D> {
    first: isize,
    rows: usize,
    n1: usize,
    n2: usize,
    data: Vec<[D; 4]>,
}

impl<D: DualNum<Primitive = f64> + Copy> SliceBlock<D> {
    fn build(link: &CliffordLink, radial: &RadialGrid, angular: &AngularGrid, u: &Array3<D>, offsets: &[isize], it: usize) -> Self {
        let first = it as isize + offsets[0];
        let rows = offsets.len();
        let (n1, n2) = angular.shape();
        let (e1, e2) = (n1 + 2 * GHOST, n2 + 2 * GHOST);
        let mut data = Vec::with_capacity(rows * e1 * e2);
        for r in 0..rows {
            let tt = (first + r as isize) as usize;
            let t = radial.t_nodes[tt];
            for gi in 0..e1 {
                let a = gi as isize - GHOST as isize;
                let th1 = a as f64 * angular.first.step;
                let (c1, s1) = (th1.cos(), th1.sin());
                let fi = angular.first.fold(a);
                for gj in 0..e2 {
                    let b = gj as isize - GHOST as isize;
                    let th2 = b as f64 * angular.second.step;
                    let fj = angular.second.fold(b);
                    let v = u[[tt, fi, fj]];
                    let r1 = v * (-link.sigma * link.a2) + t * link.a1;
                    let r2 = v * (link.sigma * link.a1) + t * link.a2;
                    data.push([r1 * c1, r1 * s1, r2 * th2.cos(), r2 * th2.sin()]);
                }
            }
        }
        Self { first, rows, n1: e1, n2: e2, data }
    }

    fn at(&self, tt: isize, a: isize, b: isize) -> &[D; 4] {
        let r = (tt - self.first) as usize;
        debug_assert!(r < self.rows);
        let gi = (a + GHOST as isize) as usize;
        let gj = (b + GHOST as isize) as usize;
        &self.data[(r * self.n1 + gi) * self.n2 + gj]
    }
}

fn zero4<D: DualNum<Primitive = f64> + Copy>() -> [D; 4] {
    [D::from(0.0); 4]
}

fn axpy4<D: DualNum<Primitive = f64> + Copy>(acc: &mut [D; 4], w: f64, y: &[D; 4]) {
    for k in 0..4 {
        acc[k] += y[k] * w;
    }
}

fn dot4<D: DualNum<Primitive = f64> + Copy>(a: &[D; 4], b: &[D; 4]) -> D {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn det3<D: DualNum<Primitive = f64> + Copy>(m: [[D; 3]; 3]) -> D {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit vector orthogonal to three vectors of `R^4`.
fn cross4<D: DualNum<Primitive = f64> + Copy>(a: &[D; 4], b: &[D; 4], c: &[D; 4]) -> [D; 4] {
    let minor = |skip: usize| {
        let cols: Vec<usize> = (0..4).filter(|k| *k != skip).collect();
        det3([
            [a[cols[0]], a[cols[1]], a[cols[2]]],
            [b[cols[0]], b[cols[1]], b[cols[2]]],
            [c[cols[0]], c[cols[1]], c[cols[2]]],
        ])
    };
    [minor(0), -minor(1), minor(2), -minor(3)]
}

fn node_forms<D: DualNum<Primitive = f64> + Copy>(
    link: &CliffordLink,
    angular: &AngularGrid,
    st: &Stencils,
    block: &SliceBlock<D>,
    it: usize,
    i: usize,
    j: usize,
) -> Result<NodeForms<D>> {
    let (offs, wx1, wx2) = &st.radial[it];
    let (h1, h2) = (angular.first.step, angular.second.step);
    let (ti, ii, jj) = (it as isize, i as isize, j as isize);
    let mut d = [zero4::<D>(); 3];
    let mut dd = [[zero4::<D>(); 3]; 3];
    for (k, &o) in offs.iter().enumerate() {
        let y = block.at(ti + o, ii, jj);
        axpy4(&mut d[0], wx1[k], y);
        axpy4(&mut dd[0][0], wx2[k], y);
    }
    for k in 0..5 {
        let o = k as isize - 2;
        let y1 = block.at(ti, ii + o, jj);
        axpy4(&mut d[1], st.angular1[k] / h1, y1);
        axpy4(&mut dd[1][1], st.angular2[k] / (h1 * h1), y1);
        let y2 = block.at(ti, ii, jj + o);
        axpy4(&mut d[2], st.angular1[k] / h2, y2);
        axpy4(&mut dd[2][2], st.angular2[k] / (h2 * h2), y2);
    }
    for k in 0..5 {
        let wa = st.angular1[k];
        if wa == 0.0 {
            continue;
        }
        let o = k as isize - 2;
        for (r, &ox) in offs.iter().enumerate() {
            axpy4(&mut dd[0][1], wx1[r] * wa / h1, block.at(ti + ox, ii + o, jj));
            axpy4(&mut dd[0][2], wx1[r] * wa / h2, block.at(ti + ox, ii, jj + o));
        }
        for (l, &wb) in st.angular1.iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            axpy4(&mut dd[1][2], wa * wb / (h1 * h2), block.at(ti, ii + o, jj + l as isize - 2));
        }
    }
    let mut metric = [[D::from(0.0); 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            metric[a][b] = dot4(&d[a], &d[b]);
            metric[b][a] = metric[a][b];
        }
    }
    let det = det3(metric);
    let scale = metric[0][0].re() * metric[1][1].re() * metric[2][2].re();
    if !(det.re() > 1e-14 * scale) {
        return Err(Error::NormalDegeneracy([it, i, j]));
    }
    let mut normal = cross4(&d[0], &d[1], &d[2]);
    let len = dot4(&normal, &normal).sqrt();
    let (th1, th2) = (angular.first.nodes[i], angular.second.nodes[j]);
    let reference = cone_normal(link, th1, th2);
    let orient: f64 = (0..4).map(|k| normal[k].re() * reference[k]).sum();
    let sign = if orient < 0.0 { -1.0 } else { 1.0 };
    for v in normal.iter_mut() {
        *v = *v / len * sign;
    }
    let mut second = [[D::from(0.0); 3]; 3];
    for a in 0..3 {
        for b in a..3 {
            second[a][b] = dot4(&normal, &dd[a][b]);
            second[b][a] = second[a][b];
        }
    }
    let y = block.at(ti, ii, jj);
    let mut orbit = [D::from(0.0); 2];
    let kinds = [angular.first.kind, angular.second.kind];
    let thetas = [th1, th2];
    for f in 0..2 {
        if let FactorKind::Sphere { .. } = kinds[f] {
            let s = thetas[f].sin();
            orbit[f] = if s.abs() < 1e-12 {
                // pole: the factor is umbilic there, orbit curvature equals the meridian one
                second[f + 1][f + 1] / metric[f + 1][f + 1]
            } else {
                let rho = y[2 * f] * thetas[f].cos() + y[2 * f + 1] * s;
                -normal[2 * f + 1] / (rho * s)
            };
        }
    }
    Ok(NodeForms { metric, second, orbit })
}

fn inverse3<D: DualNum<Primitive = f64> + Copy>(g: [[D; 3]; 3]) -> [[D; 3]; 3] {
    let det = det3(g);
    let mut inv = [[D::from(0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let (a1, a2) = ((b + 1) % 3, (b + 2) % 3);
            let (b1, b2) = ((a + 1) % 3, (a + 2) % 3);
            inv[a][b] = (g[a1][b1] * g[a2][b2] - g[a1][b2] * g[a2][b1]) / det;
        }
    }
    inv
}

/// Shape operator `g^-1 II` on the visible block.
fn weingarten<D: DualNum<Primitive = f64> + Copy>(f: &NodeForms<D>) -> [[D; 3]; 3] {
    let inv = inverse3(f.metric);
    let mut w = [[D::from(0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            w[a][b] = inv[a][0] * f.second[0][b] + inv[a][1] * f.second[1][b] + inv[a][2] * f.second[2][b];
        }
    }
    w
}

/// `S1, S2, S3` of the visible block combined with the orbit curvatures.
fn symmetric_from_forms<D: DualNum<Primitive = f64> + Copy>(f: &NodeForms<D>, mult: [usize; 2]) -> [D; 3] {
    let w = weingarten(f);
    let e1 = w[0][0] + w[1][1] + w[2][2];
    let e2 = w[0][0] * w[1][1] - w[0][1] * w[1][0] + w[0][0] * w[2][2] - w[0][2] * w[2][0] + w[1][1] * w[2][2]
        - w[1][2] * w[2][1];
    let e3 = det3(w);
    let mut poly = [D::from(1.0), e1, e2, e3];
    for f_idx in 0..2 {
        for _ in 0..mult[f_idx] {
            let k = f.orbit[f_idx];
            for deg in (1..4).rev() {
                poly[deg] = poly[deg] + poly[deg - 1] * k;
            }
        }
    }
    [poly[1], poly[2], poly[3]]
}

/// Applies `node` to every grid node, slice by slice.
fn map_nodes<D, T, F>(link: &CliffordLink, radial: &RadialGrid, angular: &AngularGrid, u: &Array3<D>, node: F) -> Result<Vec<Vec<T>>>
where
    D: DualNum<Primitive = f64> + Copy + Send + Sync,
    T: Send,
    F: Fn(&NodeForms<D>, usize, usize, usize) -> T + Sync,
{
    let st = Stencils::new(radial);
    let (n1, n2) = angular.shape();
    (0..radial.count)
        .into_par_iter()
        .map(|it| {
            let block = SliceBlock::build(link, radial, angular, u, &st.radial[it].0, it);
            let mut out = Vec::with_capacity(n1 * n2);
            for i in 0..n1 {
                for j in 0..n2 {
                    let forms = node_forms(link, angular, &st, &block, it, i, j)?;
                    out.push(node(&forms, it, i, j));
                }
            }
            Ok(out)
        })
        .collect()
}

fn mult(link: &CliffordLink) -> [usize; 2] {
    [link.p - 1, link.q - 1]
}

/// Pointwise `S1, S2, S3` of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricFields {
    pub s1: Array3<f64>,
    pub s2: Array3<f64>,
    pub s3: Array3<f64>,
}

/// Principal curvatures of the graph at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureFields {
    /// Eigenvalues of the visible 3x3 block, ascending, indexed `[t][i][j][k]`.
    pub visible: Array4<f64>,
    /// Orbit curvatures of the two factors, indexed `[t][i][j][f]`.
    pub orbit: Array4<f64>,
    /// Orbit multiplicities `p - 1`, `q - 1`.
    pub multiplicity: [usize; 2],
}

impl CurvatureFields {
    /// All `n` principal curvatures at one node.
    pub fn at(&self, it: usize, i: usize, j: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..3).map(|k| self.visible[[it, i, j, k]]).collect();
        for f in 0..2 {
            v.extend(std::iter::repeat_n(self.orbit[[it, i, j, f]], self.multiplicity[f]));
        }
        v
    }
}

/// Principal curvatures of the embedded graph by finite differences.
pub fn shape_operator_fd(graph: &EmbeddedGraph) -> Result<CurvatureFields> {
    let (nt, n1, n2) = graph.u.dim();
    let slices = map_nodes(&graph.link, &graph.radial, &graph.angular, &graph.u, |f, _, _, _| {
        let g = Matrix3::from_fn(|a, b| f.metric[a][b]);
        let ii = Matrix3::from_fn(|a, b| f.second[a][b]);
        let chol = g.cholesky().expect("metric is positive definite after the degeneracy check");
        let l_inv = chol.l().try_inverse().expect("triangular factor is invertible");
        let sym = &l_inv * ii * l_inv.transpose();
        let sym = (sym + sym.transpose()) * 0.5;
        let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        ([eig[0], eig[1], eig[2]], f.orbit)
    })?;
    let mut visible = Array4::zeros((nt, n1, n2, 3));
    let mut orbit = Array4::zeros((nt, n1, n2, 2));
    for (it, sl) in slices.into_iter().enumerate() {
        for (idx, (v, o)) in sl.into_iter().enumerate() {
            let (i, j) = (idx / n2, idx % n2);
            for k in 0..3 {
                visible[[it, i, j, k]] = v[k];
            }
            orbit[[it, i, j, 0]] = o[0];
            orbit[[it, i, j, 1]] = o[1];
        }
    }
    Ok(CurvatureFields { visible, orbit, multiplicity: mult(&graph.link) })
}

/// Elementary symmetric functions of the principal curvatures, node by node.
pub fn symmetric_functions_field(curv: &CurvatureFields) -> SymmetricFields {
    let (nt, n1, n2, _) = curv.visible.dim();
    let mut out = SymmetricFields { s1: Array3::zeros((nt, n1, n2)), s2: Array3::zeros((nt, n1, n2)), s3: Array3::zeros((nt, n1, n2)) };
    for it in 0..nt {
        for i in 0..n1 {
            for j in 0..n2 {
                let e = symmetric_of_values(&curv.at(it, i, j));
                out.s1[[it, i, j]] = e[0];
                out.s2[[it, i, j]] = e[1];
                out.s3[[it, i, j]] = e[2];
            }
        }
    }
    out
}

/// `S1, S2, S3` of a list of principal curvatures.
pub fn symmetric_of_values(values: &[f64]) -> [f64; 3] {
    let mut e = [1.0, 0.0, 0.0, 0.0];
    for &v in values {
        for d in (1..4).rev() {
            e[d] += v * e[d - 1];
        }
    }
    [e[1], e[2], e[3]]
}

fn gather<T: Copy>(slices: Vec<Vec<[T; 3]>>, shape: (usize, usize, usize), pick: impl Fn(T) -> f64) -> [Array3<f64>; 3] {
    let mut out = [Array3::zeros(shape), Array3::zeros(shape), Array3::zeros(shape)];
    let n2 = shape.2;
    for (it, sl) in slices.into_iter().enumerate() {
        for (idx, v) in sl.into_iter().enumerate() {
            for r in 0..3 {
                out[r][[it, idx / n2, idx % n2]] = pick(v[r]);
            }
        }
    }
    out
}

/// `S1, S2, S3` of the graph directly from the characteristic polynomial of the shape operator.
pub fn graph_symmetric_fields(graph: &EmbeddedGraph) -> Result<SymmetricFields> {
    let m = mult(&graph.link);
    let slices = map_nodes(&graph.link, &graph.radial, &graph.angular, &graph.u, |f, _, _, _| symmetric_from_forms(f, m))?;
    let [s1, s2, s3] = gather(slices, graph.u.dim(), |v: f64| v);
    Ok(SymmetricFields { s1, s2, s3 })
}

/// Exact derivative of the discrete `S1, S2, S3` at `u = base` in the direction `v`.
pub fn linearized_symmetric_fields(
    link: &CliffordLink,
    radial: &RadialGrid,
    angular: &AngularGrid,
    base: &Array3<f64>,
    direction: &Array3<f64>,
) -> Result<SymmetricFields> {
    let u: Array3<Dual64> = ndarray::Zip::from(base).and(direction).map_collect(|b, v| Dual64::new(*b, *v));
    let m = mult(link);
    let slices = map_nodes(link, radial, angular, &u, |f, _, _, _| symmetric_from_forms(f, m))?;
    let [s1, s2, s3] = gather(slices, u.dim(), |v: Dual64| v.eps);
    Ok(SymmetricFields { s1, s2, s3 })
}

/// Exact second derivative of the discrete `S1, S2, S3` at `u = base` along `direction`.
pub fn second_variation_fields(
    link: &CliffordLink,
    radial: &RadialGrid,
    angular: &AngularGrid,
    base: &Array3<f64>,
    direction: &Array3<f64>,
) -> Result<SymmetricFields> {
    let u: Array3<Dual2_64> = ndarray::Zip::from(base).and(direction).map_collect(|b, v| Dual2_64::new(*b, *v, 0.0));
    let m = mult(link);
    let slices = map_nodes(link, radial, angular, &u, |f, _, _, _| symmetric_from_forms(f, m))?;
    let [s1, s2, s3] = gather(slices, u.dim(), |v: Dual2_64| v.v2);
    Ok(SymmetricFields { s1, s2, s3 })
}

/// Pointwise data for quadratic forms on the graph, in the coordinates `(ln t, theta1, theta2)`.
#[derive(Debug, Clone)]
pub struct GraphGeometry {
    /// `S1 g^-1 - g^-1 II g^-1` per node, flattened in `(t, theta1, theta2)` order.
    pub newton_inverse: Vec<[[f64; 3]; 3]>,
    /// Volume density relative to `dx` and the angular quadrature weights.
    pub volume: Array3<f64>,
    pub s1: Array3<f64>,
    pub s3: Array3<f64>,
}

/// Newton tensor, volume density and `S1, S3` of the graph at every node.
pub fn graph_geometry(graph: &EmbeddedGraph) -> Result<GraphGeometry> {
    let link = &graph.link;
    let m = mult(link);
    let (p, q) = (link.p as i32, link.q as i32);
    let norm = link.a1.powi(p) * link.a2.powi(q);
    let slices = map_nodes(link, &graph.radial, &graph.angular, &graph.u, |f: &NodeForms<f64>, it, i, j| {
        let sym = symmetric_from_forms(f, m);
        let inv = inverse3(f.metric);
        let mut newton = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = sym[0] * inv[a][b];
                for c in 0..3 {
                    for d in 0..3 {
                        acc -= inv[a][c] * f.second[c][d] * inv[d][b];
                    }
                }
                newton[a][b] = acc;
            }
        }
        let idx = [it, i, j];
        let vol = det3(f.metric).sqrt() * graph.rho1[idx].powi(p - 1) * graph.rho2[idx].powi(q - 1) / norm;
        (newton, vol, sym[0], sym[2])
    })?;
    let shape = graph.u.dim();
    let mut newton_inverse = Vec::with_capacity(shape.0 * shape.1 * shape.2);
    let mut volume = Array3::zeros(shape);
    let mut s1 = Array3::zeros(shape);
    let mut s3 = Array3::zeros(shape);
    for (it, slice) in slices.into_iter().enumerate() {
        for (k, (nw, vol, a, b)) in slice.into_iter().enumerate() {
            let (i, j) = (k / shape.2, k % shape.2);
            newton_inverse.push(nw);
            volume[[it, i, j]] = vol;
            s1[[it, i, j]] = a;
            s3[[it, i, j]] = b;
        }
    }
    Ok(GraphGeometry { newton_inverse, volume, s1, s3 })
}

/// Errors of the oracle on the exact cone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCalibration {
    /// `sup t |kappa - kappa_exact|` over interior slices, curvatures sorted per node.
    pub curvature_error: f64,
    /// `sup t^2 |S2|` over interior slices.
    pub s2_error: f64,
    /// `sup |t^r S_r - S_r(link)|` for `r = 1, 3` over interior slices.
    pub scaling_error: f64,
}

/// Runs the oracle at `u = 0` and compares with the exact cone curvatures `{0, lambda_i / t}`.
pub fn cone_calibration(link: &CliffordLink, radial: &RadialGrid, angular: &AngularGrid) -> Result<ConeCalibration> {
    let (n1, n2) = angular.shape();
    let zero = Array3::zeros((radial.count, n1, n2));
    let graph = embed_graph(link, &zero, radial, angular)?;
    let curv = shape_operator_fd(&graph)?;
    let sym = graph_symmetric_fields(&graph)?;
    let inv = link.invariants();
    let mut exact = link.curvature_multiset();
    exact.push(0.0);
    exact.sort_by(f64::total_cmp);
    let mut out = ConeCalibration { curvature_error: 0.0, s2_error: 0.0, scaling_error: 0.0 };
    for it in 1..radial.count - 1 {
        let t = radial.t_nodes[it];
        for i in 0..n1 {
            for j in 0..n2 {
                let mut k = curv.at(it, i, j);
                k.sort_by(f64::total_cmp);
                for (a, b) in k.iter().zip(&exact) {
                    out.curvature_error = out.curvature_error.max((t * a - b).abs());
                }
                out.s2_error = out.s2_error.max(t * t * sym.s2[[it, i, j]].abs());
                out.scaling_error = out
                    .scaling_error
                    .max((t * sym.s1[[it, i, j]] - inv.s1).abs())
                    .max((t.powi(3) * sym.s3[[it, i, j]] - inv.s3).abs());
            }
        }
    }
    Ok(out)
}

/// Residual summary of an embedded graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub sup_residual: f64,
    pub weighted_sup: f64,
    pub tip_weighted_sup: f64,
    pub grid_sizes: [usize; 3],
}

/// `sup |S2|` and `sup t^3 |S2|` over interior slices; the tip row is reported separately.
pub fn residual_summary(radial: &RadialGrid, s2: &Array3<f64>) -> ResidualSummary {
    let (nt, n1, n2) = s2.dim();
    let mut sup = 0.0f64;
    let mut weighted = 0.0f64;
    for it in 1..nt - 1 {
        let t3 = radial.t_nodes[it].powi(3);
        for v in s2.index_axis(Axis(0), it).iter() {
            sup = sup.max(v.abs());
            weighted = weighted.max(t3 * v.abs());
        }
    }
    let tip = s2.index_axis(Axis(0), 0).iter().fold(0.0f64, |m, v| m.max(v.abs())) * radial.t_nodes[0].powi(3);
    ResidualSummary { sup_residual: sup, weighted_sup: weighted, tip_weighted_sup: tip, grid_sizes: [nt, n1, n2] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::solve_scalar_flat_radii;
    use crate::quadrature::FactorGrid;
    use approx::assert_abs_diff_eq;

    fn grids(link: &CliffordLink, nt: usize, n1: usize, n2: usize) -> (RadialGrid, AngularGrid) {
        let radial = RadialGrid::new(1e-2, nt).unwrap();
        let angular = AngularGrid::new(
            FactorGrid::new(FactorKind::from_dim(link.p), link.a1, n1).unwrap(),
            FactorGrid::new(FactorKind::from_dim(link.q), link.a2, n2).unwrap(),
        );
        (radial, angular)
    }

    fn max_cone_error(link: &CliffordLink, nt: usize, n1: usize, n2: usize) -> f64 {
        let (radial, angular) = grids(link, nt, n1, n2);
        let u = Array3::zeros((nt, n1, n2));
        let graph = embed_graph(link, &u, &radial, &angular).unwrap();
        let curv = shape_operator_fd(&graph).unwrap();
        let inv = link.invariants();
        let mut expect = vec![0.0, inv.lambda1, inv.lambda2];
        expect.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        for it in 0..nt {
            let t = radial.t_nodes[it];
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..3 {
                        worst = worst.max((t * curv.visible[[it, i, j, k]] - expect[k]).abs());
                    }
                    if link.p > 1 {
                        worst = worst.max((t * curv.orbit[[it, i, j, 0]] - inv.lambda1).abs());
                    }
                    if link.q > 1 {
                        worst = worst.max((t * curv.orbit[[it, i, j, 1]] - inv.lambda2).abs());
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn cone_curvatures_converge_at_fourth_order() {
        for (p, q) in [(2, 1), (4, 4)] {
            let link = solve_scalar_flat_radii(p, q).unwrap();
            let odd = |n: usize| if link.q == 1 { n - 1 } else { n };
            let coarse = max_cone_error(&link, 17, 17, odd(17));
            let fine = max_cone_error(&link, 33, 33, odd(33));
            assert!(fine < coarse / 8.0, "{coarse} {fine}");
            assert!(fine < 1e-3);
        }
    }

    #[test]
    fn cone_is_scalar_flat() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        let (radial, angular) = grids(&link, 33, 33, 32);
        let u = Array3::zeros((33, 33, 32));
        let graph = embed_graph(&link, &u, &radial, &angular).unwrap();
        let s = graph_symmetric_fields(&graph).unwrap();
        let inv = link.invariants();
        for ((it, _, _), v) in s.s2.indexed_iter() {
            let t = radial.t_nodes[it];
            assert!(t * t * v.abs() < 1e-3);
            assert_abs_diff_eq!(t * s.s1[[it, 0, 0]], inv.s1, epsilon = 1e-3);
        }
        for it in 0..33 {
            let p = graph.point(it, 3, 5);
            let r = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_abs_diff_eq!(r, radial.t_nodes[it], epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_slope_gives_rescaled_cone() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        let c = 0.2;
        let (radial, angular) = grids(&link, 33, 33, 32);
        let u = Array3::from_shape_fn((33, 33, 32), |(it, _, _)| c * radial.t_nodes[it]);
        let graph = embed_graph(&link, &u, &radial, &angular).unwrap();
        let curv = shape_operator_fd(&graph).unwrap();
        let r = (1.0 + c * c).sqrt();
        let (b1, b2) = ((link.a1 - link.sigma * c * link.a2) / r, (link.a2 + link.sigma * c * link.a1) / r);
        let mut expect = vec![0.0, link.sigma * b2 / b1 / r, -link.sigma * b1 / b2 / r];
        expect.sort_by(f64::total_cmp);
        let it = 16;
        let t = radial.t_nodes[it];
        for k in 0..3 {
            assert_abs_diff_eq!(t * curv.visible[[it, 7, 3, k]], expect[k], epsilon = 1e-4);
        }
        assert_abs_diff_eq!(t * curv.orbit[[it, 7, 3, 0]], expect[2], epsilon = 1e-4);
    }

    #[test]
    fn symmetric_functions_of_example_point() {
        let s = 2f64.sqrt();
        let e = symmetric_of_values(&[0.0, s, s, -1.0 / s]);
        assert_abs_diff_eq!(e[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[2], -s, epsilon = 1e-15);
        assert_eq!(symmetric_of_values(&[0.0; 4]), [0.0; 3]);
    }

    #[test]
    fn dual_derivative_matches_difference_quotient() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        let (radial, angular) = grids(&link, 17, 17, 16);
        let base = Array3::zeros((17, 17, 16));
        let v = Array3::from_shape_fn((17, 17, 16), |(it, i, j)| {
            let t = radial.t_nodes[it];
            t * t * (1.0 + angular.first.nodes[i].cos() * angular.second.nodes[j].sin())
        });
        let lin = linearized_symmetric_fields(&link, &radial, &angular, &base, &v).unwrap();
        let eps = 1e-6;
        let plus = graph_symmetric_fields(&embed_graph(&link, &(&v * eps), &radial, &angular).unwrap()).unwrap();
        let minus = graph_symmetric_fields(&embed_graph(&link, &(&v * -eps), &radial, &angular).unwrap()).unwrap();
        let idx = [8, 5, 3];
        let fd = (plus.s2[idx] - minus.s2[idx]) / (2.0 * eps);
        assert_abs_diff_eq!(lin.s2[idx], fd, epsilon = 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn immersion_failure_detected() {
        let link = solve_scalar_flat_radii(2, 1).unwrap();
        let (radial, angular) = grids(&link, 9, 9, 8);
        let u = Array3::from_elem((9, 9, 8), 10.0);
        assert!(matches!(embed_graph(&link, &u, &radial, &angular), Err(Error::ImmersionFailure(_))));
    }
}
