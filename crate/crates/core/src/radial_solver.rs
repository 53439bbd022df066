//! Mode-by-mode solution of `L u = f` with high-mode boundary data, and the weighted norms.
//!
//! Each mode obeys `t^2 a'' + (n-2) t a' - mu a = t^3 f_j`. In `x = ln t` the
//! particular solution is a nested pair of exponentially weighted integrals,
//! evaluated by product integration: the smooth factor is interpolated by cubics
//! and the exponential weights are integrated exactly.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::Parity;
use crate::error::{Error, Result};
use crate::quadrature::{simpson, RadialGrid};
use crate::space::{ConeField, ConeSpace};
use crate::spectrum::{SpectralMode, ThresholdSelection};

/// `W_k(z) = int_0^1 e^(z s) s^k ds` for `k = 0..=3`.
fn exp_moments(z: Complex64) -> [Complex64; 4] {
    let mut w = [Complex64::new(0.0, 0.0); 4];
    if z.norm() < 2.0 {
        // power series: sum_j z^j / (j! (j + k + 1))
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..40 {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += term / (j + k + 1) as f64;
            }
            term *= z / (j + 1) as f64;
        }
    } else {
        let ez = z.exp();
        w[0] = (ez - 1.0) / z;
        for k in 1..4 {
            w[k] = (ez - w[k - 1] * k as f64) / z;
        }
    }
    w
}

/// Monomial coefficients of the cubic Lagrange basis on `nodes`.
fn lagrange_coefficients(nodes: [f64; 4]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (m, row) in out.iter_mut().enumerate() {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for (r, &xr) in nodes.iter().enumerate() {
            if r == m {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (d, c) in poly.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= xr * c;
            }
            poly = next;
            denom *= nodes[m] - xr;
        }
        for d in 0..4 {
            row[d] = poly[d] / denom;
        }
    }
    out
}

/// Stencil start offset for interval `[i, i+1]` among `n` nodes.
fn stencil_start(i: usize, n: usize) -> usize {
    if i == 0 {
        0
    } else if i + 2 >= n {
        n - 4
    } else {
        i - 1
    }
}

/// Weights of `int_0^1 e^(z s) g(x_i + h s) ds` on the cubic stencil of interval `i`.
struct IntervalWeights {
    start: usize,
    weights: [Complex64; 4],
}

fn interval_weights(z: Complex64, n: usize) -> Vec<IntervalWeights> {
    let moments = exp_moments(z);
    (0..n - 1)
        .map(|i| {
            let start = stencil_start(i, n);
            let nodes = std::array::from_fn(|r| (start + r) as f64 - i as f64);
            let lag = lagrange_coefficients(nodes);
            let weights = std::array::from_fn(|m| (0..4).map(|k| moments[k] * lag[m][k]).sum());
            IntervalWeights { start, weights }
        })
        .collect()
}

fn stencil_sum<T: Copy + Into<Complex64>>(w: &IntervalWeights, g: &[T]) -> Complex64 {
    (0..4).map(|r| w.weights[r] * g[w.start + r].into()).sum()
}

/// Options for a single mode solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    /// Decay-class exponent of the power-law continuation of `f_j` below `t_min`.
    pub tail_exponent: f64,
    /// Replace the decay-class exponent by the one read off the first two nodes when that is usable.
    pub fit_tail: bool,
    /// Accept a repeated indicial root.
    pub allow_log_branch: bool,
}

impl ModeOptions {
    pub fn for_selection(sel: &ThresholdSelection) -> Self {
        Self { tail_exponent: sel.m - 2.0 + sel.epsilon, fit_tail: true, allow_log_branch: false }
    }
}

/// Local power `f ~ t^e` near the tip, when the first two samples support one.
fn fitted_exponent(f0: f64, f1: f64, h: f64) -> Option<f64> {
    if f0 == 0.0 || f0 * f1 <= 0.0 {
        return None;
    }
    let e = (f1 / f0).ln() / h;
    (e.abs() < 50.0).then_some(e)
}

/// Radial profile of one mode.
///
/// Low modes integrate from the tip with zero constants; high modes integrate from
/// the outer boundary and take the value `alpha` there.
pub fn solve_mode_profile(
    mode: &SpectralMode,
    f_j: &[f64],
    alpha: f64,
    n: usize,
    low: bool,
    grid: &RadialGrid,
    opts: ModeOptions,
) -> Result<Vec<f64>> {
    if mode.is_degenerate() && !opts.allow_log_branch {
        return Err(Error::DegenerateRoot { mu: mode.mu });
    }
    let count = grid.count;
    if f_j.len() != count || count < 4 {
        return Err(Error::InvalidInput(format!("profile of length {} on {count} nodes", f_j.len())));
    }
    let h = grid.step();
    let gamma = mode.gamma_plus;
    let inner_rate = Complex64::new(n as f64, 0.0) + gamma;
    let outer_rate = Complex64::new(3.0, 0.0) - gamma;
    let usable = |e: f64| (inner_rate.re + e) > 0.5 && (!low || (outer_rate.re + e) > 0.5);
    let fitted = if opts.fit_tail { fitted_exponent(f_j[0], f_j[1], h).filter(|e| usable(*e)) } else { None };
    let e = Complex64::new(fitted.unwrap_or(opts.tail_exponent), 0.0);
    if (inner_rate + e).re <= 0.0 {
        return Err(Error::QuadratureUnderflow { exponent: (inner_rate + e).re });
    }
    // K(x) = e^{-(n+gamma)x} int_{-inf}^x e^{(n+gamma)y} f dy
    let mut inner = vec![Complex64::new(0.0, 0.0); count];
    inner[0] = f_j[0] / (inner_rate + e);
    let decay = (-inner_rate * h).exp();
    for (i, w) in interval_weights(inner_rate * h, count).iter().enumerate() {
        inner[i + 1] = decay * (inner[i] + stencil_sum(w, f_j) * h);
    }
    let mut outer = vec![Complex64::new(0.0, 0.0); count];
    if low {
        if (outer_rate + e).re <= 0.0 {
            return Err(Error::QuadratureUnderflow { exponent: (outer_rate + e).re });
        }
        outer[0] = inner[0] / (outer_rate + e);
        let decay = (-outer_rate * h).exp();
        for (i, w) in interval_weights(outer_rate * h, count).iter().enumerate() {
            outer[i + 1] = decay * (outer[i] + stencil_sum(w, &inner) * h);
        }
    } else {
        let growth = (outer_rate * h).exp();
        let weights = interval_weights(outer_rate * h, count);
        for i in (0..count - 1).rev() {
            outer[i] = growth * outer[i + 1] - stencil_sum(&weights[i], &inner) * h;
        }
    }
    let t_max = grid.t_max();
    Ok((0..count)
        .map(|i| {
            let t = grid.t_nodes[i];
            let hom = if low { Complex64::new(0.0, 0.0) } else { (gamma * (t / t_max).ln()).exp() * alpha };
            (hom + outer[i] * t.powi(3)).re
        })
        .collect())
}

/// Single-mode solve classified by the selection's weight exponent.
pub fn solve_mode(
    mode: &SpectralMode,
    f_j: &[f64],
    alpha: f64,
    n: usize,
    selection: &ThresholdSelection,
    grid: &RadialGrid,
) -> Result<Vec<f64>> {
    let low = mode.gamma_plus.re < selection.m;
    solve_mode_profile(mode, f_j, alpha, n, low, grid, ModeOptions::for_selection(selection))
}

/// One boundary coefficient addressed by mode labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCoefficient {
    pub k: usize,
    pub l: usize,
    #[serde(default = "default_parity")]
    pub parity: Parity,
    pub value: f64,
}

fn default_parity() -> Parity {
    Parity::None
}

/// Boundary data on the link.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    /// Coefficients in the normalized eigenbasis.
    Coefficients(Vec<ModeCoefficient>),
    /// Values on the angular grid.
    Values(Array2<f64>),
}

impl ConeSpace {
    /// Coefficients `<psi, phi_j>` (weight `S1`) for every retained mode.
    pub fn boundary_coefficients(&self, psi: &BoundaryData) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.mode_count()];
        match psi {
            BoundaryData::Coefficients(list) => {
                for c in list {
                    let idx = self
                        .selection
                        .index_of((c.k, c.l, c.parity))
                        .ok_or_else(|| Error::InvalidInput(format!("mode ({}, {}, {}) not retained", c.k, c.l, c.parity.as_str())))?;
                    out[idx] += c.value;
                }
            }
            BoundaryData::Values(v) => {
                let (n1, n2) = self.angular.shape();
                if v.dim() != (n1, n2) {
                    return Err(Error::InvalidInput("boundary values do not match the angular grid".into()));
                }
                let stacked = v.clone().insert_axis(Axis(0));
                let p = self.project(&stacked);
                for (m, o) in out.iter_mut().enumerate() {
                    *o = p[[m, 0]];
                }
            }
        }
        Ok(out)
    }

    /// Forcing coefficients `f_j(t) = int f phi_j dtheta`, so that `f / S1 = sum f_j phi_j`.
    pub fn project_forcing(&self, f: &ConeField) -> Result<Array2<f64>> {
        let a = match &f.profiles {
            Some(p) => p.clone(),
            None => self.project(f.values()?),
        };
        Ok(a / self.inv.s1)
    }

    /// Norm of the high-mode part of boundary coefficients.
    pub fn high_norm(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().enumerate().filter(|(m, _)| !self.selection.is_low(*m)).map(|(_, v)| v * v).sum::<f64>().sqrt()
    }
}

/// Per-mode forcing profiles `f_j(t)`.
pub fn project_modes(space: &ConeSpace, field: &ConeField) -> Result<Array2<f64>> {
    space.project_forcing(field)
}

/// Records of a linear solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiagnostics {
    pub forcing_norm: f64,
    pub forcing_decay_sup: f64,
    pub boundary_norm: f64,
    pub weighted_sup: f64,
    /// `sup_t t^-m |u|_t / (||f|| + |Pi_J psi|)`.
    pub prop1_ratio: f64,
    pub decay_class_warning: bool,
}

/// Cap above which the forcing is flagged as outside the decay class.
pub const DECAY_CAP: f64 = 1e12;

/// Solves `L u = f` with `Pi_J u(1) = Pi_J psi`; `psi` holds one coefficient per retained mode.
pub fn solve_linear(space: &ConeSpace, f: &ConeField, psi: &[f64]) -> Result<(ConeField, LinearDiagnostics)> {
    let fj = space.project_forcing(f)?;
    let sel = &space.selection;
    let rows: Vec<Result<Vec<f64>>> = (0..space.mode_count())
        .into_par_iter()
        .map(|m| {
            let alpha = if sel.is_low(m) { 0.0 } else { psi[m] };
            let opts = ModeOptions::for_selection(sel);
            solve_mode_profile(&sel.modes[m], fj.row(m).as_slice().expect("contiguous"), alpha, space.n, sel.is_low(m), &space.radial, opts)
        })
        .collect();
    let mut profiles = Array2::zeros((space.mode_count(), space.radial.count));
    for (m, row) in rows.into_iter().enumerate() {
        for (i, v) in row?.into_iter().enumerate() {
            profiles[[m, i]] = v;
        }
    }
    let u = space.field_from_profiles(profiles);
    let fnorms = weighted_norms_basic(space, f, sel.m, sel.epsilon)?;
    let unorms = weighted_norms_basic(space, &u, sel.m, sel.epsilon)?;
    let boundary_norm = space.high_norm(psi);
    let weighted_sup = space
        .radial
        .t_nodes
        .iter()
        .zip(&unorms.slice)
        .map(|(t, s)| t.powf(-sel.m) * s)
        .fold(0.0, f64::max);
    let denom = fnorms.global + boundary_norm;
    let diag = LinearDiagnostics {
        forcing_norm: fnorms.global,
        forcing_decay_sup: fnorms.decay_sup,
        boundary_norm,
        weighted_sup,
        prop1_ratio: if denom > 0.0 { weighted_sup / denom } else { 0.0 },
        decay_class_warning: fnorms.decay_sup > DECAY_CAP,
    };
    Ok((u, diag))
}

/// `H_J psi = sum_{j > J} alpha_j t^gamma_j phi_j`.
pub fn harmonic_extension(space: &ConeSpace, psi: &[f64]) -> ConeField {
    let t_max = space.radial.t_max();
    let mut profiles = Array2::zeros((space.mode_count(), space.radial.count));
    for (m, mode) in space.modes().iter().enumerate() {
        if space.selection.is_low(m) || psi[m] == 0.0 {
            continue;
        }
        for (i, t) in space.radial.t_nodes.iter().enumerate() {
            profiles[[m, i]] = psi[m] * (mode.gamma_plus * (t / t_max).ln()).exp().re;
        }
    }
    space.field_from_profiles(profiles)
}

/// Norms of the decay class and the iteration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    /// `|f|_t` at every radial node.
    pub slice: Vec<f64>,
    pub global: f64,
    pub decay_sup: f64,
    pub c2_weighted: f64,
}

/// Slice, global and decay norms; `c2_weighted` is left at zero.
pub(crate) fn weighted_norms_basic(space: &ConeSpace, field: &ConeField, m: f64, epsilon: f64) -> Result<WeightedNorms> {
    let values = field.values()?;
    let s1 = space.inv.s1;
    let slice: Vec<f64> = values
        .axis_iter(Axis(0))
        .map(|sl| space.angular_integral(sl.mapv(|v| v * v / s1).view()).max(0.0).sqrt())
        .collect();
    let integrand: Vec<f64> = space
        .radial
        .t_nodes
        .iter()
        .zip(&slice)
        .map(|(t, s)| t.powf(5.0 - 2.0 * m) * s * s)
        .collect();
    let global = simpson(&integrand, space.radial.step()).max(0.0).sqrt();
    let decay_sup = space
        .radial
        .t_nodes
        .iter()
        .zip(&slice)
        .map(|(t, s)| t.powf(2.0 - m - epsilon) * s)
        .fold(0.0, f64::max);
    Ok(WeightedNorms { slice, global, decay_sup, c2_weighted: 0.0 })
}

/// All weighted norms of a field.
pub fn weighted_norms(space: &ConeSpace, field: &ConeField, m: f64, epsilon: f64) -> Result<WeightedNorms> {
    let mut out = weighted_norms_basic(space, field, m, epsilon)?;
    out.c2_weighted = iteration_norm(space, field, m)?;
    Ok(out)
}

/// Per-slice maxima of `|v|`, `|grad v|` and `|Hess v|`.
fn slice_maxima(space: &ConeSpace, field: &ConeField) -> Result<Vec<[f64; 3]>> {
    let jets = space.jets(field)?;
    let (nt, n1, n2) = space.shape();
    let mult = space.orbit_multiplicity();
    Ok((0..nt)
        .into_par_iter()
        .map(|it| {
            let mut acc = [0.0f64; 3];
            for i in 0..n1 {
                for j in 0..n2 {
                    let fj = space.frame_jet(&jets, it, i, j);
                    let g2: f64 = fj.grad.iter().map(|g| g * g).sum();
                    let mut h2: f64 = fj.hess.iter().flatten().map(|h| h * h).sum();
                    h2 += mult[0] as f64 * fj.orbit[0].powi(2) + mult[1] as f64 * fj.orbit[1].powi(2);
                    acc[0] = acc[0].max(fj.value.abs());
                    acc[1] = acc[1].max(g2.sqrt());
                    acc[2] = acc[2].max(h2.sqrt());
                }
            }
            acc
        })
        .collect())
}

/// Discrete `sup_t t^-m (A0 + t A1 + t^2 A2)` with maxima over the annuli `[t, 2t]`.
pub fn iteration_norm(space: &ConeSpace, field: &ConeField, m: f64) -> Result<f64> {
    let maxima = slice_maxima(space, field)?;
    let t = &space.radial.t_nodes;
    let mut best = 0.0f64;
    for (i, &ti) in t.iter().enumerate() {
        if ti > 0.5 * space.radial.t_max() {
            break;
        }
        let mut a = [0.0f64; 3];
        for (k, &tk) in t.iter().enumerate().skip(i) {
            if tk > 2.0 * ti * (1.0 + 1e-12) {
                break;
            }
            for d in 0..3 {
                a[d] = a[d].max(maxima[k][d]);
            }
        }
        best = best.max(ti.powf(-m) * (a[0] + ti * a[1] + ti * ti * a[2]));
    }
    Ok(best)
}

/// Sampled Hoelder quotient of the weighted Hessian over random node pairs within one annulus.
pub fn sampled_holder_quotient(space: &ConeSpace, field: &ConeField, m: f64, alpha: f64, samples: usize, seed: u64) -> Result<f64> {
    let jets = space.jets(field)?;
    let (nt, n1, n2) = space.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |it: usize, i: usize, j: usize| -> [f64; 4] {
        let t = space.radial.t_nodes[it];
        let (th1, th2) = (space.angular.first.nodes[i], space.angular.second.nodes[j]);
        let (a1, a2) = (space.link.a1, space.link.a2);
        [t * a1 * th1.cos(), t * a1 * th1.sin(), t * a2 * th2.cos(), t * a2 * th2.sin()]
    };
    let mut best = 0.0f64;
    for _ in 0..samples {
        let it = rng.random_range(0..nt);
        let t = space.radial.t_nodes[it];
        let upper = space.radial.t_nodes.iter().rposition(|s| *s <= 2.0 * t).unwrap_or(it);
        let jt = rng.random_range(it..=upper);
        let (i, j) = (rng.random_range(0..n1), rng.random_range(0..n2));
        let (k, l) = (rng.random_range(0..n1), rng.random_range(0..n2));
        let (pa, pb) = (point(it, i, j), point(jt, k, l));
        let d = pa.iter().zip(&pb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d == 0.0 {
            continue;
        }
        let (ha, hb) = (space.frame_jet(&jets, it, i, j).hess, space.frame_jet(&jets, jt, k, l).hess);
        let diff = ha.iter().flatten().zip(hb.iter().flatten()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        best = best.max(t.powf(2.0 + alpha - m) * diff / d.powf(alpha));
    }
    Ok(best)
}
