//! Zonal eigenfunctions of the link factors tabulated on their grids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::{gauss_legendre, sphere_area, FactorGrid, FactorKind};

/// Fourier parity of a circle-factor mode; `None` for zonal sphere modes and constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    None,
    Cos,
    Sin,
}

impl Parity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::None => "none",
            Parity::Cos => "cos",
            Parity::Sin => "sin",
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Parity::None),
            "cos" => Ok(Parity::Cos),
            "sin" => Ok(Parity::Sin),
            other => Err(format!("unknown parity {other}")),
        }
    }
}

/// Gegenbauer polynomials `C_0..=C_kmax` with parameter `alpha` at `x`.
pub fn gegenbauer(kmax: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(kmax + 1);
    c.push(1.0);
    if kmax >= 1 {
        c.push(2.0 * alpha * x);
    }
    for k in 2..=kmax {
        let kf = k as f64;
        let next = (2.0 * x * (kf + alpha - 1.0) * c[k - 1] - (kf + 2.0 * alpha - 2.0) * c[k - 2]) / kf;
        c.push(next);
    }
    c
}

/// Value and first two polar-angle derivatives of the degree-`k` zonal harmonic on `S^dim`.
pub fn zonal_jet(dim: usize, k: usize, theta: f64) -> [f64; 3] {
    let alpha = (dim as f64 - 1.0) / 2.0;
    let (x, s) = (theta.cos(), theta.sin());
    let c0 = gegenbauer(k, alpha, x)[k];
    let c1 = if k >= 1 { 2.0 * alpha * gegenbauer(k - 1, alpha + 1.0, x)[k - 1] } else { 0.0 };
    let c2 = if k >= 2 { 4.0 * alpha * (alpha + 1.0) * gegenbauer(k - 2, alpha + 2.0, x)[k - 2] } else { 0.0 };
    [c0, -s * c1, -x * c1 + s * s * c2]
}

/// Value and derivatives of the circle mode of degree `l`.
pub fn fourier_jet(l: usize, parity: Parity, theta: f64) -> [f64; 3] {
    let lf = l as f64;
    let (c, s) = ((lf * theta).cos(), (lf * theta).sin());
    match parity {
        Parity::Sin => [s, lf * c, -lf * lf * s],
        _ => [c, -lf * s, -lf * lf * c],
    }
}

/// Eigenfunction of one factor, identified by degree and parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorMode {
    pub degree: usize,
    pub parity: Parity,
}

impl FactorMode {
    pub fn jet(&self, kind: FactorKind, theta: f64) -> [f64; 3] {
        match kind {
            FactorKind::Circle => fourier_jet(self.degree, self.parity, theta),
            FactorKind::Sphere { dim } => zonal_jet(dim, self.degree, theta),
        }
    }

    /// Eigenvalue of the factor Laplacian on the radius-`radius` factor.
    pub fn laplace_eigenvalue(&self, kind: FactorKind, radius: f64) -> f64 {
        let k = self.degree as f64;
        k * (k + kind.dim() as f64 - 1.0) / (radius * radius)
    }

    /// Continuous squared `L^2` norm over the factor of radius `radius`.
    pub fn norm_squared(&self, kind: FactorKind, radius: f64) -> f64 {
        match kind {
            FactorKind::Circle => radius * if self.degree == 0 { 2.0 * PI } else { PI },
            FactorKind::Sphere { dim } => {
                let points = 2 * self.degree + dim + 64;
                let integral = gauss_legendre(points, 0.0, PI, |th| {
                    zonal_jet(dim, self.degree, th)[0].powi(2) * th.sin().powi(dim as i32 - 1)
                });
                radius.powi(dim as i32) * sphere_area(dim - 1) * integral
            }
        }
    }
}

/// A factor mode tabulated at every node of a factor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    pub mode: FactorMode,
    pub norm_squared: f64,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl FactorTable {
    pub fn new(mode: FactorMode, grid: &FactorGrid) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut d1 = Vec::with_capacity(grid.len());
        let mut d2 = Vec::with_capacity(grid.len());
        for &th in &grid.nodes {
            let j = mode.jet(grid.kind, th);
            values.push(j[0]);
            d1.push(j[1]);
            d2.push(j[2]);
        }
        Self { mode, norm_squared: mode.norm_squared(grid.kind, grid.radius), values, d1, d2 }
    }
}
