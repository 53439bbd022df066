//! Picard iteration for scalar-flat normal graphs with prescribed high-mode boundary data.
//!
//! Each step solves `L U = -Q(v)` with the high modes of `U(1)` pinned to `lambda * psi`.

use serde::{Deserialize, Serialize};

use crate::cone_calculus::{symmetric_fields, CurvatureOracle};
use crate::embedding::{residual_summary, ResidualSummary};
use crate::error::{Error, Result};
use crate::radial_solver::{harmonic_extension, iteration_norm, solve_linear, weighted_norms_basic, LinearDiagnostics};
use crate::space::{ConeField, ConeSpace};

/// Iteration parameters. Grids and the mode selection come from the [`ConeSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    /// One boundary coefficient per retained mode; only modes above the threshold are used.
    pub psi: Vec<f64>,
    pub tol_fixed_point: f64,
    pub max_iter: usize,
    pub contraction_window: usize,
}

impl SolverConfig {
    pub fn new(lambda: f64, psi: Vec<f64>) -> Self {
        Self { lambda, psi, tol_fixed_point: 1e-10, max_iter: 50, contraction_window: 3 }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    fn validate(&self, space: &ConeSpace) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.tol_fixed_point > 0.0) {
            return Err(Error::InvalidInput("tol_fixed_point must be positive".into()));
        }
        if self.psi.len() != space.mode_count() {
            return Err(Error::InvalidInput(format!(
                "psi has {} coefficients, the space retains {} modes",
                self.psi.len(),
                space.mode_count()
            )));
        }
        Ok(())
    }

    fn boundary(&self) -> Vec<f64> {
        self.psi.iter().map(|c| self.lambda * c).collect()
    }
}

/// Records of one Picard step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// `sup_t t^(2-m-eps) |Q(v)|_t`.
    pub remainder_decay_sup: f64,
    /// `remainder_decay_sup / ||v||^2`, the empirical quadratic-bound constant.
    pub prop2_ratio: f64,
    pub linear: LinearDiagnostics,
}

/// Records of a full solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub update_norms: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    /// Mean of the last `contraction_window` ratios.
    pub contraction_estimate: f64,
    pub final_update_norm: f64,
    pub embedded_residual: f64,
    pub residual: ResidualSummary,
    pub prop1_ratio: f64,
    pub prop2_ratio: f64,
    pub solution_norm: f64,
}

/// Evaluates the scalar curvature remainder of `v` and returns `U(v)`.
pub fn picard_step(
    space: &ConeSpace,
    oracle: &CurvatureOracle,
    v: &ConeField,
    config: &SolverConfig,
) -> Result<(ConeField, StepDiagnostics)> {
    let sel = &space.selection;
    let values = match &v.values {
        Some(x) => x.clone(),
        None => space.synthesize(v.profiles()?),
    };
    let q = ConeField::from_values(-oracle.remainder(space, &values)?);
    let qn = weighted_norms_basic(space, &q, sel.m, sel.epsilon)?;
    let vn = iteration_norm(space, v, sel.m)?;
    let (u, linear) = solve_linear(space, &q, &config.boundary())?;
    let diag = StepDiagnostics {
        remainder_decay_sup: qn.decay_sup,
        prop2_ratio: if vn > 0.0 { qn.decay_sup / (vn * vn) } else { 0.0 },
        linear,
    };
    Ok((u, diag))
}

fn non_convergence(updates: &[f64], ratios: &[f64]) -> Error {
    Error::NonConvergence { iterations: updates.len(), ratios: ratios.to_vec(), updates: updates.to_vec() }
}

fn diverging(updates: &[f64]) -> bool {
    let last = updates.len();
    let growing = last >= 4 && (last - 3..last).all(|k| updates[k] > updates[k - 1]);
    let blown = last >= 2 && updates[last - 1] > 10.0 * updates[0];
    growing || blown || updates.last().is_some_and(|u| !u.is_finite())
}

/// Iterates `v <- U(v)` from `v0 = H_J(lambda psi)`.
pub fn solve_graph(space: &ConeSpace, config: &SolverConfig) -> Result<(ConeField, Diagnostics)> {
    config.validate(space)?;
    let m = space.selection.m;
    let oracle = CurvatureOracle::new(space)?;
    let mut v = harmonic_extension(space, &config.boundary());
    let mut updates: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut prop1 = 0.0f64;
    let mut prop2 = 0.0f64;
    loop {
        if updates.len() >= config.max_iter {
            return Err(non_convergence(&updates, &ratios));
        }
        let (next, step) = match picard_step(space, &oracle, &v, config) {
            Ok(r) => r,
            Err(Error::ImmersionFailure(_)) | Err(Error::NormalDegeneracy(_)) => return Err(non_convergence(&updates, &ratios)),
            Err(e) => return Err(e),
        };
        prop1 = prop1.max(step.linear.prop1_ratio);
        prop2 = prop2.max(step.prop2_ratio);
        let update = iteration_norm(space, &next.axpy(-1.0, &v), m)?;
        if let Some(prev) = updates.last() {
            if *prev > 0.0 {
                ratios.push(update / prev);
            }
        }
        updates.push(update);
        v = next;
        if update <= config.tol_fixed_point {
            break;
        }
        if diverging(&updates) {
            return Err(non_convergence(&updates, &ratios));
        }
    }
    let values = v.values()?;
    let residual = residual_summary(&space.radial, &symmetric_fields(space, values)?.s2);
    let window = config.contraction_window.max(1).min(ratios.len());
    let contraction_estimate = if window == 0 { 0.0 } else { ratios[ratios.len() - window..].iter().sum::<f64>() / window as f64 };
    let diag = Diagnostics {
        iterations: updates.len(),
        final_update_norm: *updates.last().unwrap_or(&0.0),
        update_norms: updates,
        contraction_ratios: ratios,
        contraction_estimate,
        embedded_residual: residual.weighted_sup,
        residual,
        prop1_ratio: prop1,
        prop2_ratio: prop2,
        solution_norm: iteration_norm(space, &v, m)?,
    };
    Ok((v, diag))
}

/// `||picard_step(u) - u||` in the iteration norm.
pub fn fixed_point_defect(space: &ConeSpace, u: &ConeField, config: &SolverConfig) -> Result<f64> {
    let oracle = CurvatureOracle::new(space)?;
    let (next, _) = picard_step(space, &oracle, u, config)?;
    iteration_norm(space, &next.axpy(-1.0, u), space.selection.m)
}

/// Largest deviation of the high-mode coefficients of `u(1)` from `lambda * psi`.
pub fn boundary_defect(space: &ConeSpace, u: &ConeField, config: &SolverConfig) -> Result<f64> {
    let profiles = u.profiles()?;
    let last = space.radial.count - 1;
    Ok((0..space.mode_count())
        .filter(|m| !space.selection.is_low(*m))
        .map(|m| (profiles[[m, last]] - config.lambda * config.psi[m]).abs())
        .fold(0.0, f64::max))
}

/// One row of a lambda scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub contraction_ratios: Vec<f64>,
    pub embedded_residual: Option<f64>,
    pub note: Option<String>,
}

/// Scan results and the largest converging lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub rows: Vec<ScanRow>,
    pub lambda_hat: Option<f64>,
}

/// Runs [`solve_graph`] for ascending `lambdas`, stopping at the first failure.
pub fn lambda_threshold_scan(space: &ConeSpace, config: &SolverConfig, lambdas: &[f64]) -> Result<LambdaScan> {
    if lambdas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("lambdas must be ascending".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut lambda_hat = None;
    let mut failed = false;
    for &lambda in lambdas {
        if failed {
            rows.push(ScanRow {
                lambda,
                converged: false,
                iterations: 0,
                contraction_ratios: Vec::new(),
                embedded_residual: None,
                note: Some("not attempted after the first failure".into()),
            });
            continue;
        }
        match solve_graph(space, &config.with_lambda(lambda)) {
            Ok((_, d)) => {
                lambda_hat = Some(lambda);
                rows.push(ScanRow {
                    lambda,
                    converged: true,
                    iterations: d.iterations,
                    contraction_ratios: d.contraction_ratios,
                    embedded_residual: Some(d.embedded_residual),
                    note: None,
                });
            }
            Err(Error::NonConvergence { iterations, ratios, .. }) => {
                failed = true;
                rows.push(ScanRow {
                    lambda,
                    converged: false,
                    iterations,
                    contraction_ratios: ratios,
                    embedded_residual: None,
                    note: Some("did not converge".into()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LambdaScan { rows, lambda_hat })
}
