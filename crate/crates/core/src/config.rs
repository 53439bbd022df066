//! JSON run configuration with documented defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{solve_scalar_flat_radii, CliffordLink};
use crate::quadrature::{FactorKind, RadialGrid};
use crate::radial_solver::{BoundaryData, ModeCoefficient};
use crate::nonlinear::SolverConfig;
use crate::space::ConeSpace;
use crate::spectrum::{select_band_limited, ThresholdSelection, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t_min: f64,
    pub radial: usize,
    /// Nodes on the first factor; `null` picks 33 for a sphere and 32 for a circle.
    pub first: Option<usize>,
    pub second: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_min: 1e-3, radial: 129, first: None, second: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Weight exponent; `null` takes the midpoint of the first admissible gap above 2.
    pub m: Option<f64>,
    pub epsilon: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { m: None, epsilon: DEFAULT_EPSILON }
    }
}

/// Boundary data: either the `offset`-th mode above the threshold, or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PsiConfig {
    ThresholdOffset { threshold_offset: usize },
    Coefficients { coefficients: Vec<ModeCoefficient> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda: f64,
    pub psi: PsiConfig,
    pub tol_fixed_point: f64,
    pub max_iter: usize,
    pub contraction_window: usize,
    /// Values for `lambda-scan`, ascending.
    pub lambdas: Vec<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            psi: PsiConfig::ThresholdOffset { threshold_offset: 1 },
            tol_fixed_point: 1e-10,
            max_iter: 50,
            contraction_window: 3,
            lambdas: vec![0.0, 0.005, 0.01, 0.02],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    /// Radial nodes of the witness and Dirichlet grids.
    pub witness_radial: usize,
    pub hardy_fields: usize,
    pub battery_modes: usize,
    pub battery_bumps: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self { witness_radial: 129, hardy_fields: 50, battery_modes: 20, battery_bumps: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub link: LinkConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            link: LinkConfig { p: 2, q: 1 },
            grids: GridConfig::default(),
            selection: SelectionConfig::default(),
            solver: SolverSection::default(),
            stability: StabilitySection::default(),
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.link.p == 0 || self.link.q == 0 {
            return bad("link dimensions must be positive".into());
        }
        if !(self.grids.t_min > 0.0 && self.grids.t_min < 1.0) {
            return bad(format!("grids.t_min must lie in (0, 1), got {}", self.grids.t_min));
        }
        if self.grids.radial < 5 {
            return bad("grids.radial must be at least 5".into());
        }
        if !(self.selection.epsilon > 0.0) {
            return bad("selection.epsilon must be positive".into());
        }
        if !(self.solver.lambda >= 0.0) {
            return bad("solver.lambda must be >= 0".into());
        }
        if !(self.solver.tol_fixed_point > 0.0) || self.solver.max_iter == 0 {
            return bad("solver.tol_fixed_point and solver.max_iter must be positive".into());
        }
        if self.solver.lambdas.windows(2).any(|w| w[1] < w[0]) || self.solver.lambdas.iter().any(|l| *l < 0.0) {
            return bad("solver.lambdas must be ascending and >= 0".into());
        }
        if self.stability.witness_radial < 5 {
            return bad("stability.witness_radial must be at least 5".into());
        }
        Ok(())
    }

    pub fn link(&self) -> Result<CliffordLink> {
        solve_scalar_flat_radii(self.link.p, self.link.q)
    }

    /// Angular node counts with the per-factor defaults filled in.
    pub fn angular_sizes(&self) -> (usize, usize) {
        let pick = |dim: usize, given: Option<usize>| {
            given.unwrap_or(match FactorKind::from_dim(dim) {
                FactorKind::Circle => 32,
                FactorKind::Sphere { .. } => 33,
            })
        };
        (pick(self.link.p, self.grids.first), pick(self.link.q, self.grids.second))
    }

    pub fn radial(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.grids.t_min, self.grids.radial)
    }

    /// Mode selection resolved by the angular grids.
    pub fn selection(&self, link: &CliffordLink) -> Result<ThresholdSelection> {
        let (kmax, lmax) = ConeSpace::band_limits(link, self.angular_sizes());
        select_band_limited(link, link.n, self.selection.m, self.selection.epsilon, kmax, lmax)
    }

    pub fn space(&self, link: CliffordLink, selection: ThresholdSelection) -> Result<ConeSpace> {
        ConeSpace::new(link, self.radial()?, self.angular_sizes(), selection)
    }

    /// Per-mode boundary coefficients of `psi`.
    pub fn psi(&self, space: &ConeSpace) -> Result<Vec<f64>> {
        match &self.solver.psi {
            PsiConfig::ThresholdOffset { threshold_offset } => {
                if *threshold_offset == 0 {
                    return Err(Error::InvalidInput("psi.threshold_offset counts from 1".into()));
                }
                let idx = space.selection.j_threshold + threshold_offset - 1;
                if idx >= space.mode_count() {
                    return Err(Error::InvalidInput(format!("psi.threshold_offset {threshold_offset} exceeds the retained modes")));
                }
                let mut psi = vec![0.0; space.mode_count()];
                psi[idx] = 1.0;
                Ok(psi)
            }
            PsiConfig::Coefficients { coefficients } => space.boundary_coefficients(&BoundaryData::Coefficients(coefficients.clone())),
        }
    }

    pub fn solver_config(&self, space: &ConeSpace) -> Result<SolverConfig> {
        Ok(SolverConfig {
            lambda: self.solver.lambda,
            psi: self.psi(space)?,
            tol_fixed_point: self.solver.tol_fixed_point,
            max_iter: self.solver.max_iter,
            contraction_window: self.solver.contraction_window,
        })
    }
}
