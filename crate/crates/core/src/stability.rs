//! Stability of the cone and of its scalar-flat graphs for the first Newton functional.
//!
//! On the cone every quantity separates over the link modes: for `u = a(t) phi_j` the
//! Rayleigh quotient reduces to `int e^{cx}(a_x^2 + mu a^2) / int e^{cx} a^2` with
//! `x = ln t` and `c = n - 3`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::basis::Parity;
use crate::cone_calculus::{jacobi_apply, ConeGeometry, CurvatureOracle};
use crate::embedding::{embed_graph, graph_geometry, GraphGeometry};
use crate::error::{Error, Result};
use crate::link::CliffordLink;
use crate::quadrature::{simpson, RadialGrid};
use crate::space::{ConeField, ConeSpace};
use crate::spectrum::{enumerate_modes, mode_eigenvalue, SpectralMode};

/// Number of lattice modes scanned to confirm the constant mode minimizes `mu`.
pub const MODE_SCAN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "strictly-1-stable")]
    StrictlyStable,
    #[serde(rename = "1-stable-only")]
    StableOnly,
    #[serde(rename = "not-1-stable")]
    NotStable,
}

/// Quotient and eigenvalue data of the instability witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSummary {
    pub sigma: f64,
    pub tau: f64,
    pub quotient: f64,
    /// Lowest discrete Dirichlet eigenvalue on `[sigma / 2, 1]`.
    pub lowest_eigenvalue: f64,
    /// The same eigenvalue for the continuous problem.
    pub lowest_eigenvalue_exact: f64,
    pub radial_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub mu1: f64,
    pub mu1_minus: f64,
    #[serde(rename = "mu_M")]
    pub mu_m: f64,
    /// `min mu` over the first [`MODE_SCAN`] lattice modes.
    pub scanned_minimum: f64,
    pub classification: Classification,
    pub witness: Option<WitnessSummary>,
}

/// `mu_M = 1 - 4 max(-mu1, 0) / (n - 3)^2`.
pub fn stability_index(mu1: f64, n: usize) -> f64 {
    let c = n as f64 - 3.0;
    1.0 - 4.0 * (-mu1).max(0.0) / (c * c)
}

/// Lowest weighted link eigenvalue, `mu_M` and the resulting classification.
pub fn cone_stability(link: &CliffordLink) -> Result<StabilityReport> {
    let n = link.n;
    if n < 4 {
        return Err(Error::InvalidInput(format!("stability needs n >= 4, got {n}")));
    }
    let mu1 = mode_eigenvalue(link, 0, 0);
    let box_size = MODE_SCAN.isqrt() + 2;
    let scanned_minimum = enumerate_modes(link, n, box_size, box_size)
        .iter()
        .take(MODE_SCAN)
        .map(|m| m.mu)
        .fold(f64::INFINITY, f64::min);
    let mu1_minus = (-mu1).max(0.0);
    let mu_m = stability_index(mu1, n);
    let classification = if mu_m.abs() <= 1e-12 {
        Classification::StableOnly
    } else if mu_m > 0.0 {
        Classification::StrictlyStable
    } else {
        Classification::NotStable
    };
    Ok(StabilityReport { n, mu1, mu1_minus, mu_m, scanned_minimum, classification, witness: None })
}

/// `int f dM` over the truncated cone, `dM = t^(n-1) dt dtheta`.
fn cone_integral(space: &ConeSpace, density: &Array3<f64>) -> f64 {
    let n = space.n as i32;
    let per_slice: Vec<f64> = density
        .axis_iter(Axis(0))
        .zip(&space.radial.t_nodes)
        .map(|(sl, t)| t.powi(n) * space.angular_integral(sl))
        .collect();
    simpson(&per_slice, space.radial.step())
}

fn clamped(space: &ConeSpace, u: &ConeField, sigma: f64, tau: f64) -> Result<ConeField> {
    let mut values = match &u.values {
        Some(v) => v.clone(),
        None => space.synthesize(u.profiles()?),
    };
    let slack = 1e-12;
    for (it, t) in space.radial.t_nodes.iter().enumerate() {
        if *t < sigma * (1.0 - slack) || *t > tau * (1.0 + slack) {
            values.index_axis_mut(Axis(0), it).fill(0.0);
        }
    }
    space.complete(&ConeField::from_values(values))
}

/// `(int <T1 grad u, grad u> + 3 S3 u^2, int u^2 t^-2 S1)` over the cone.
pub fn rayleigh_parts(space: &ConeSpace, u: &ConeField) -> Result<(f64, f64)> {
    let geo = ConeGeometry::new(space.link);
    let jets = space.jets(u)?;
    let (nt, n1, n2) = space.shape();
    let mut num = Array3::zeros((nt, n1, n2));
    let mut den = Array3::zeros((nt, n1, n2));
    for it in 0..nt {
        let t = space.radial.t_nodes[it];
        let kappa = geo.shape_eigenvalues(t);
        let (s1, s3) = (geo.s_bar(1, t), geo.s_bar(3, t));
        for i in 0..n1 {
            for j in 0..n2 {
                let fj = space.frame_jet(&jets, it, i, j);
                let grad: f64 = (0..3).map(|a| (s1 - kappa[a]) * fj.grad[a] * fj.grad[a]).sum();
                num[[it, i, j]] = grad + 3.0 * s3 * fj.value * fj.value;
                den[[it, i, j]] = fj.value * fj.value * s1 / (t * t);
            }
        }
    }
    Ok((cone_integral(space, &num), cone_integral(space, &den)))
}

/// Rayleigh quotient of `u`, set to zero outside `[sigma, tau]`.
pub fn rayleigh_quotient(space: &ConeSpace, u: &ConeField, sigma: f64, tau: f64) -> Result<f64> {
    let field = clamped(space, u, sigma, tau)?;
    let (num, den) = rayleigh_parts(space, &field)?;
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// `-int u L u` over the cone.
pub fn minus_u_lu(space: &ConeSpace, u: &ConeField) -> Result<f64> {
    let full = space.complete(u)?;
    let lu = jacobi_apply(space, &full)?;
    let lu = space.complete(&lu)?;
    let density = -(full.values()? * lu.values()?);
    Ok(cone_integral(space, &density))
}

/// Both sides of the Hardy-type inequality: `int u^2 t^-2 S1` and `4/(n-3)^2 int u_t^2 S1`.
pub fn hardy_sides(space: &ConeSpace, u: &ConeField) -> Result<(f64, f64)> {
    let geo = ConeGeometry::new(space.link);
    let jets = space.jets(u)?;
    let mut lhs = Array3::zeros(space.shape());
    let mut rhs = Array3::zeros(space.shape());
    for ((it, i, j), l) in lhs.indexed_iter_mut() {
        let t = space.radial.t_nodes[it];
        let s1 = geo.s_bar(1, t);
        let u_t = jets.u_x[[it, i, j]] / t;
        *l = jets.u[[it, i, j]].powi(2) * s1 / (t * t);
        rhs[[it, i, j]] = u_t * u_t * s1;
    }
    let c = (space.n - 3) as f64;
    Ok((cone_integral(space, &lhs), 4.0 / (c * c) * cone_integral(space, &rhs)))
}

/// Ascending eigenvalues of `-(e^{cx} b_x)_x + mu e^{cx} b = lambda e^{cx} b` on
/// `[ln lo, ln hi]` with Dirichlet ends, by second-order finite differences.
pub fn dirichlet_mode_eigenvalues(mu: f64, n: usize, lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if count < 3 || !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidInput("need count >= 3 and 0 < lo < hi".into()));
    }
    let c = n as f64 - 3.0;
    let (x0, x1) = (lo.ln(), hi.ln());
    let h = (x1 - x0) / (count - 1) as f64;
    let inner = count - 2;
    let x = |i: f64| x0 + i * h;
    let mut a = DMatrix::zeros(inner, inner);
    for r in 0..inner {
        let node = (r + 1) as f64;
        let (left, right) = ((c * x(node - 0.5)).exp(), (c * x(node + 0.5)).exp());
        let rho = (c * x(node)).exp();
        a[(r, r)] = ((left + right) / (h * h) + mu * rho) / rho;
        if r + 1 < inner {
            let rho_next = (c * x(node + 1.0)).exp();
            let off = -right / (h * h) / (rho * rho_next).sqrt();
            a[(r, r + 1)] = off;
            a[(r + 1, r)] = off;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Exact lowest Dirichlet eigenvalue of one mode on `[lo, hi]`.
pub fn exact_dirichlet_eigenvalue(mu: f64, n: usize, lo: f64, hi: f64) -> f64 {
    let c = n as f64 - 3.0;
    let len = (hi / lo).ln();
    c * c / 4.0 + mu + (std::f64::consts::PI / len).powi(2)
}

/// Lowest discrete Dirichlet eigenvalue over the first `modes` link modes.
pub fn lowest_dirichlet_eigenvalue(link: &CliffordLink, lo: f64, hi: f64, count: usize, modes: usize) -> Result<(f64, SpectralMode)> {
    let mut best: Option<(f64, SpectralMode)> = None;
    for mode in enumerate_modes(link, link.n, 4, 4).into_iter().take(modes.max(1)) {
        let lowest = dirichlet_mode_eigenvalues(mode.mu, link.n, lo, hi, count)?[0];
        if best.as_ref().is_none_or(|(b, _)| lowest < *b) {
            best = Some((lowest, mode));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no modes".into()))
}

/// Witness field, its space and summary.
#[derive(Debug, Clone)]
pub struct InstabilityWitness {
    pub space: ConeSpace,
    pub field: ConeField,
    pub summary: WitnessSummary,
}

/// `Re(t^gamma phi_0)` between consecutive zeros, with its Rayleigh quotient and the
/// lowest Dirichlet eigenvalue on `[sigma / 2, 1]`.
pub fn instability_witness(link: &CliffordLink, radial_count: usize, sizes: (usize, usize)) -> Result<InstabilityWitness> {
    let report = cone_stability(link)?;
    if report.mu_m >= 0.0 {
        return Err(Error::NotUnstable { mu_m: report.mu_m });
    }
    let n = link.n;
    let c = n as f64 - 3.0;
    let beta = (-report.mu1 - c * c / 4.0).sqrt();
    let pi = std::f64::consts::PI;
    let tau = (-pi / (2.0 * beta)).exp();
    let sigma = (-3.0 * pi / (2.0 * beta)).exp();
    let radial = RadialGrid::between(sigma, tau, radial_count)?;
    let space = ConeSpace::band_limited(*link, radial, sizes, None, crate::spectrum::DEFAULT_EPSILON)?;
    let idx = space
        .selection
        .index_of((0, 0, Parity::None))
        .or_else(|| space.selection.index_of((0, 0, Parity::Cos)))
        .ok_or_else(|| Error::InvalidInput("constant mode not retained".into()))?;
    let mut profiles = Array2::zeros((space.mode_count(), radial_count));
    for (i, t) in space.radial.t_nodes.iter().enumerate() {
        profiles[[idx, i]] = t.powf(-c / 2.0) * (beta * t.ln()).cos();
    }
    profiles[[idx, 0]] = 0.0;
    profiles[[idx, radial_count - 1]] = 0.0;
    let field = space.field_from_profiles(profiles);
    let quotient = rayleigh_quotient(&space, &field, sigma, tau)?;
    let lo = sigma / 2.0;
    let (lowest_eigenvalue, mode) = lowest_dirichlet_eigenvalue(link, lo, 1.0, radial_count, 6)?;
    let summary = WitnessSummary {
        sigma,
        tau,
        quotient,
        lowest_eigenvalue,
        lowest_eigenvalue_exact: exact_dirichlet_eigenvalue(mode.mu, n, lo, 1.0),
        radial_step: space.radial.step(),
    };
    Ok(InstabilityWitness { space, field, summary })
}

/// `sup (1/lambda) t^3 |S3(graph) - S3(cone)| / |S3|` over the interior slices.
pub fn graph_s3_deviation(space: &ConeSpace, u_lambda: &ConeField, lambda: f64, oracle: &CurvatureOracle) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let values = space.complete(u_lambda)?;
    let graph = embed_graph(&space.link, values.values()?, &space.radial, &space.angular)?;
    let s3 = crate::embedding::graph_symmetric_fields(&graph)?.s3;
    let base = &oracle.base().s3;
    let scale = space.inv.s3.abs();
    let mut best = 0.0f64;
    for it in space.interior() {
        let t3 = space.radial.t_nodes[it].powi(3);
        for (a, b) in s3.index_axis(Axis(0), it).iter().zip(base.index_axis(Axis(0), it).iter()) {
            best = best.max(t3 * (a - b).abs() / scale);
        }
    }
    Ok(best / lambda)
}

/// `(int <T1 grad u, grad u> + 3 S3 u^2, int u^2 t^-2 S1)` on the graph.
pub fn graph_quadratic_form(space: &ConeSpace, geometry: &GraphGeometry, test: &ConeField) -> Result<(f64, f64)> {
    let jets = space.jets(test)?;
    let (nt, n1, n2) = space.shape();
    let mut num = Array3::zeros((nt, n1, n2));
    let mut den = Array3::zeros((nt, n1, n2));
    for ((it, i, j), out) in num.indexed_iter_mut() {
        let k = (it * n1 + i) * n2 + j;
        let du = [jets.u_x[[it, i, j]], jets.u_1[[it, i, j]], jets.u_2[[it, i, j]]];
        let w = &geometry.newton_inverse[k];
        let mut q = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                q += du[a] * w[a][b] * du[b];
            }
        }
        let u = jets.u[[it, i, j]];
        let t = space.radial.t_nodes[it];
        let vol = geometry.volume[[it, i, j]];
        *out = vol * (q + 3.0 * geometry.s3[[it, i, j]] * u * u);
        den[[it, i, j]] = vol * u * u * geometry.s1[[it, i, j]] / (t * t);
    }
    let integrate = |f: &Array3<f64>| {
        let per: Vec<f64> = f.axis_iter(Axis(0)).map(|sl| space.angular_integral(sl)).collect();
        simpson(&per, space.radial.step())
    };
    Ok((integrate(&num), integrate(&den)))
}

/// First `modes` retained modes times `bumps` overlapping `sin^2` bumps in `ln t`.
pub fn test_battery(space: &ConeSpace, modes: usize, bumps: usize) -> Vec<ConeField> {
    let nt = space.radial.count;
    let (x0, x1) = (space.radial.x(0), space.radial.x(nt - 1));
    let width = 2.0 * (x1 - x0) / (bumps + 1) as f64;
    let mut out = Vec::with_capacity(modes * bumps);
    for m in 0..modes.min(space.mode_count()) {
        for b in 0..bumps {
            let start = x0 + 0.5 * width * b as f64;
            let mut profiles = Array2::zeros((space.mode_count(), nt));
            for i in 0..nt {
                let s = (space.radial.x(i) - start) / width;
                if (0.0..=1.0).contains(&s) {
                    profiles[[m, i]] = (std::f64::consts::PI * s).sin().powi(2);
                }
            }
            out.push(space.field_from_profiles(profiles));
        }
    }
    out
}

/// Seeded random fields on the first `modes` retained modes, vanishing at both radial ends.
pub fn random_compact_fields(space: &ConeSpace, count: usize, modes: usize, seed: u64) -> Vec<ConeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = space.radial.count;
    let modes = modes.clamp(1, space.mode_count());
    let len = space.radial.x(nt - 1) - space.radial.x(0);
    (0..count)
        .map(|_| {
            let mut profiles = Array2::zeros((space.mode_count(), nt));
            for _ in 0..3 {
                let m = rng.random_range(0..modes);
                let coeffs: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                for i in 0..nt {
                    let s = (space.radial.x(i) - space.radial.x(0)) / len;
                    let v: f64 = coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::PI * s).sin()).sum();
                    profiles[[m, i]] += v;
                }
            }
            for m in 0..space.mode_count() {
                profiles[[m, 0]] = 0.0;
                profiles[[m, nt - 1]] = 0.0;
            }
            space.field_from_profiles(profiles)
        })
        .collect()
}

/// Normalized quadratic form of the graph over a test battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub values: Vec<f64>,
    pub minimum: f64,
    /// `mu_M / 2`.
    pub threshold: f64,
}

/// Evaluates [`graph_quadratic_form`] on the graph of `u_lambda` for every battery field.
pub fn graph_battery(space: &ConeSpace, u_lambda: &ConeField, battery: &[ConeField]) -> Result<BatteryReport> {
    let values = space.complete(u_lambda)?;
    let graph = embed_graph(&space.link, values.values()?, &space.radial, &space.angular)?;
    let geometry = graph_geometry(&graph)?;
    let mut out = Vec::with_capacity(battery.len());
    for test in battery {
        let (num, den) = graph_quadratic_form(space, &geometry, test)?;
        if !(den > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        out.push(num / den);
    }
    let minimum = out.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(BatteryReport { values: out, minimum, threshold: cone_stability(&space.link)?.mu_m / 2.0 })
}
