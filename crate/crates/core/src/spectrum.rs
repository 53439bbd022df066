//! Weighted link spectrum, indicial roots and the choice of weight exponent and threshold.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{FactorMode, Parity};
use crate::error::{Error, Result};
use crate::link::CliffordLink;
use crate::quadrature::{gauss_legendre, FactorKind};

/// Default decay margin.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Tolerance for coincidences between `m` and an indicial root.
const WEIGHT_TOL: f64 = 1e-9;

/// One eigenpair of the weighted link operator together with its indicial roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMode {
    pub k: usize,
    pub l: usize,
    pub parity: Parity,
    pub mu: f64,
    pub gamma_plus: Complex64,
    pub gamma_minus: Complex64,
    pub norm_const: f64,
}

impl SpectralMode {
    pub fn key(&self) -> (usize, usize, Parity) {
        (self.k, self.l, self.parity)
    }

    /// Repeated indicial root.
    pub fn is_degenerate(&self) -> bool {
        (self.gamma_plus - self.gamma_minus).norm() < 1e-12
    }

    /// Factor-wise eigenfunctions whose product is this mode (up to `norm_const`).
    pub fn factor_modes(&self, link: &CliffordLink) -> (FactorMode, FactorMode) {
        let first = FactorKind::from_dim(link.p);
        let second = FactorKind::from_dim(link.q);
        let par = |kind: FactorKind, degree: usize| match kind {
            FactorKind::Circle if degree > 0 => self.parity,
            _ => Parity::None,
        };
        (
            FactorMode { degree: self.k, parity: par(first, self.k) },
            FactorMode { degree: self.l, parity: par(second, self.l) },
        )
    }
}

/// Weight exponent, decay margin, threshold index and the retained mode list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub m: f64,
    pub epsilon: f64,
    #[serde(rename = "J")]
    pub j_threshold: usize,
    pub modes: Vec<SpectralMode>,
}

impl ThresholdSelection {
    /// Modes `0..J` carry zero boundary data; the rest are prescribed at `t = 1`.
    pub fn is_low(&self, index: usize) -> bool {
        index < self.j_threshold
    }

    pub fn index_of(&self, key: (usize, usize, Parity)) -> Option<usize> {
        self.modes.iter().position(|m| m.key() == key)
    }

    /// The first mode above the threshold.
    pub fn first_high(&self) -> Option<&SpectralMode> {
        self.modes.get(self.j_threshold)
    }
}

/// Closed-form eigenvalue of the zonal mode `(k, l)`.
pub fn mode_eigenvalue(link: &CliffordLink, k: usize, l: usize) -> f64 {
    let inv = link.invariants();
    let (kf, lf) = (k as f64, l as f64);
    let first = inv.t1_eigs.0 * kf * (kf + link.p as f64 - 1.0) / (link.a1 * link.a1);
    let second = inv.t1_eigs.1 * lf * (lf + link.q as f64 - 1.0) / (link.a2 * link.a2);
    (first + second + 3.0 * inv.s3) / inv.s1
}

/// Roots of `gamma^2 + (n - 3) gamma - mu = 0`, ordered by real part.
pub fn indicial_roots(n: usize, mu: f64) -> (Complex64, Complex64) {
    let half = (n as f64 - 3.0) / 2.0;
    let root = Complex64::new(half * half + mu, 0.0).sqrt();
    let centre = Complex64::new(-half, 0.0);
    (centre - root, centre + root)
}

fn parities(kind: FactorKind, degree: usize) -> &'static [Parity] {
    match kind {
        FactorKind::Circle if degree > 0 => &[Parity::Cos, Parity::Sin],
        _ => &[Parity::None],
    }
}

/// All modes with `k <= kmax`, `l <= lmax`, sorted by eigenvalue (ties by key).
pub fn enumerate_modes(link: &CliffordLink, n: usize, kmax: usize, lmax: usize) -> Vec<SpectralMode> {
    let inv = link.invariants();
    let (first, second) = (FactorKind::from_dim(link.p), FactorKind::from_dim(link.q));
    let n1: Vec<f64> = (0..=kmax)
        .map(|k| FactorMode { degree: k, parity: Parity::None }.norm_squared(first, link.a1))
        .collect();
    let n2: Vec<f64> = (0..=lmax)
        .map(|l| FactorMode { degree: l, parity: Parity::None }.norm_squared(second, link.a2))
        .collect();
    let mut modes = Vec::new();
    for k in 0..=kmax {
        for l in 0..=lmax {
            let mu = mode_eigenvalue(link, k, l);
            let (gm, gp) = indicial_roots(n, mu);
            let pars = if first == FactorKind::Circle { parities(first, k) } else { parities(second, l) };
            for &parity in pars {
                let norm_const = 1.0 / (inv.s1 * n1[k] * n2[l]).sqrt();
                modes.push(SpectralMode { k, l, parity, mu, gamma_plus: gp, gamma_minus: gm, norm_const });
            }
        }
    }
    modes.sort_by(|a, b| a.mu.total_cmp(&b.mu).then(a.key().cmp(&b.key())));
    modes
}

/// Shared gap logic over modes sorted by eigenvalue.
fn threshold_from_sorted(
    modes: Vec<SpectralMode>,
    m_requested: Option<f64>,
    epsilon: f64,
    budget: usize,
) -> Result<ThresholdSelection> {
    if let Some(m) = modes.iter().find(|m| m.is_degenerate()) {
        return Err(Error::DegenerateRoot { mu: m.mu });
    }
    let re: Vec<f64> = modes.iter().map(|m| m.gamma_plus.re).collect();
    let m = match m_requested {
        Some(m) => {
            if m <= 2.0 {
                return Err(Error::ForbiddenWeight { m, reason: "weight exponent must exceed 2".into() });
            }
            if re.iter().any(|g| (g - m).abs() < WEIGHT_TOL) {
                return Err(Error::ForbiddenWeight { m, reason: "coincides with an indicial root".into() });
            }
            if !re.iter().any(|g| *g > m) {
                return Err(Error::BudgetExceeded { budget });
            }
            m
        }
        None => {
            let mut chosen = None;
            for j in 0..re.len() {
                let lower = if j == 0 { 2.0 } else { re[j - 1].max(2.0) };
                let upper = re[j];
                if upper > 2.0 && upper > lower + WEIGHT_TOL {
                    chosen = Some(0.5 * (lower + upper));
                    break;
                }
            }
            chosen.ok_or(Error::BudgetExceeded { budget })?
        }
    };
    if m + 2.0 < epsilon || epsilon <= 0.0 {
        return Err(Error::ForbiddenWeight { m, reason: format!("decay margin {epsilon} incompatible") });
    }
    let j_threshold = re.iter().filter(|g| **g < m).count();
    Ok(ThresholdSelection { m, epsilon, j_threshold, modes })
}

/// Chooses `m` and `J` from the `mode_budget` lowest modes.
pub fn select_threshold(
    link: &CliffordLink,
    n: usize,
    m_requested: Option<f64>,
    mode_budget: usize,
) -> Result<ThresholdSelection> {
    select_threshold_with(link, n, m_requested, mode_budget, DEFAULT_EPSILON)
}

pub fn select_threshold_with(
    link: &CliffordLink,
    n: usize,
    m_requested: Option<f64>,
    mode_budget: usize,
    epsilon: f64,
) -> Result<ThresholdSelection> {
    // (k, 0) and (0, l) for degrees up to the budget already fill it, so the box is complete
    let side = mode_budget.max(1);
    let mut modes = enumerate_modes(link, n, side, side);
    modes.truncate(mode_budget);
    // a budget cut inside a tie would make J depend on the cut
    threshold_from_sorted(modes, m_requested, epsilon, mode_budget)
}

/// Same selection on the box `k <= kmax`, `l <= lmax` used for band-limited solves.
pub fn select_band_limited(
    link: &CliffordLink,
    n: usize,
    m_requested: Option<f64>,
    epsilon: f64,
    kmax: usize,
    lmax: usize,
) -> Result<ThresholdSelection> {
    let modes = enumerate_modes(link, n, kmax, lmax);
    let budget = modes.len();
    let sel = threshold_from_sorted(modes, m_requested, epsilon, budget)?;
    // modes outside the box must all lie above the first high mode
    let guard = sel.first_high().map(|m| m.mu).unwrap_or(f64::INFINITY);
    if mode_eigenvalue(link, kmax + 1, 0) <= guard || mode_eigenvalue(link, 0, lmax + 1) <= guard {
        return Err(Error::BudgetExceeded { budget });
    }
    Ok(sel)
}

/// Finite-volume eigenvalues of the factor Laplacian, ascending.
fn factor_laplacian_spectrum(kind: FactorKind, radius: f64, count: usize) -> Result<Vec<f64>> {
    let (stiff, mass) = match kind {
        FactorKind::Circle => {
            let h = 2.0 * std::f64::consts::PI / count as f64;
            let mut k = DMatrix::zeros(count, count);
            for j in 0..count {
                k[(j, j)] = 2.0 / (h * h);
                k[(j, (j + 1) % count)] = -1.0 / (h * h);
                k[(j, (j + count - 1) % count)] = -1.0 / (h * h);
            }
            (k, vec![1.0; count])
        }
        FactorKind::Sphere { dim } => {
            let h = std::f64::consts::PI / (count - 1) as f64;
            let w = |th: f64| th.sin().powi(dim as i32 - 1);
            let faces: Vec<f64> = (0..count - 1).map(|i| (i as f64 + 0.5) * h).collect();
            let mass: Vec<f64> = (0..count)
                .map(|i| {
                    let lo = if i == 0 { 0.0 } else { faces[i - 1] };
                    let hi = if i == count - 1 { std::f64::consts::PI } else { faces[i] };
                    gauss_legendre(16, lo, hi, w)
                })
                .collect();
            let mut k = DMatrix::zeros(count, count);
            for (f, &th) in faces.iter().enumerate() {
                let c = w(th) / h;
                k[(f, f)] += c;
                k[(f + 1, f + 1)] += c;
                k[(f, f + 1)] -= c;
                k[(f + 1, f)] -= c;
            }
            (k, mass)
        }
    };
    let n = mass.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| stiff[(i, j)] / (mass[i] * mass[j]).sqrt());
    let eig = SymmetricEigen::try_new(scaled, 1e-14, 10_000)
        .ok_or_else(|| Error::SolverFailure("factor eigenproblem did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v / (radius * radius)).collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Lowest `count` eigenvalues of the discretized weighted operator on a tensor grid.
///
/// The tensor-product operator separates, so its spectrum is assembled from the
/// two one-dimensional finite-volume problems.
pub fn discrete_spectrum_oracle(link: &CliffordLink, sizes: (usize, usize), count: usize) -> Result<Vec<f64>> {
    if sizes.0 < 17 || sizes.1 < 17 {
        return Err(Error::InvalidInput("oracle grids need at least 17 points per factor".into()));
    }
    let inv = link.invariants();
    let nu1 = factor_laplacian_spectrum(FactorKind::from_dim(link.p), link.a1, sizes.0)?;
    let nu2 = factor_laplacian_spectrum(FactorKind::from_dim(link.q), link.a2, sizes.1)?;
    let mut all: Vec<f64> = nu1
        .iter()
        .flat_map(|a| nu2.iter().map(move |b| (a, b)))
        .map(|(a, b)| (inv.t1_eigs.0 * a + inv.t1_eigs.1 * b + 3.0 * inv.s3) / inv.s1)
        .collect();
    all.sort_by(f64::total_cmp);
    all.truncate(count);
    Ok(all)
}
