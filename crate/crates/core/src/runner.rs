//! Command pipelines behind the `scalarflat` binary.
//!
//! Every command computes its artifacts in memory first; nothing is written unless the
//! whole pipeline succeeds.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cone_calculus::{explicit_leading_q, CurvatureOracle};
use crate::config::RunConfig;
use crate::embedding::{cone_calibration, residual_summary};
use crate::error::{Error, Result};
use crate::link::CliffordLink;
use crate::nonlinear::{boundary_defect, fixed_point_defect, lambda_threshold_scan, solve_graph};
use crate::radial_solver::{solve_linear, weighted_norms};
use crate::space::{ConeField, ConeSpace};
use crate::spectrum::ThresholdSelection;
use crate::stability::{
    cone_stability, graph_battery, graph_s3_deviation, hardy_sides, instability_witness, random_compact_fields, test_battery,
    Classification,
};

/// Pipelines selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Link,
    Spectrum,
    SolveLinear,
    SolveGraph,
    Verify,
    Stability,
    LambdaScan,
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn json(name: &str, value: &impl Serialize) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Artifact(e.to_string()))?;
        bytes.push(b'\n');
        Ok(Self { name: name.into(), bytes })
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: Command,
    pub config: RunConfig,
    pub cache: Option<PathBuf>,
}

/// Full-precision float formatting for CSV cells.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Artifact(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Artifact(e.to_string()))
}

fn grid_csv(space: &ConeSpace, columns: &[&str], fields: &[&Array3<f64>]) -> Result<Vec<u8>> {
    let mut header = vec!["t", "theta1", "theta2"];
    header.extend_from_slice(columns);
    let (nt, n1, n2) = space.shape();
    let rows = (0..nt).flat_map(|it| {
        (0..n1).flat_map(move |i| {
            (0..n2).map(move |j| {
                let mut row = vec![
                    fmt_float(space.radial.t_nodes[it]),
                    fmt_float(space.angular.first.nodes[i]),
                    fmt_float(space.angular.second.nodes[j]),
                ];
                row.extend(fields.iter().map(|f| fmt_float(f[[it, i, j]])));
                row
            })
        })
    });
    csv_bytes(&header, rows)
}

fn cache_path(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let (n1, n2) = cfg.angular_sizes();
    let m = cfg.selection.m.map_or("auto".to_string(), |m| format!("{m:e}"));
    dir.join(format!("spectrum_p{}_q{}_{}x{}_m{}_eps{:e}.json", cfg.link.p, cfg.link.q, n1, n2, m, cfg.selection.epsilon))
}

/// Mode selection, read from the cache directory when present.
pub fn cached_selection(cfg: &RunConfig, link: &CliffordLink, cache: Option<&Path>) -> Result<ThresholdSelection> {
    let Some(dir) = cache else {
        return cfg.selection(link);
    };
    let path = cache_path(dir, cfg);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(sel) = serde_json::from_str::<ThresholdSelection>(&text) {
            return Ok(sel);
        }
    }
    let sel = cfg.selection(link)?;
    fs::create_dir_all(dir).map_err(|e| Error::Artifact(format!("{}: {e}", dir.display())))?;
    let text = serde_json::to_string(&sel).map_err(|e| Error::Artifact(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    Ok(sel)
}

fn spectrum_csv(sel: &ThresholdSelection) -> Result<Vec<u8>> {
    let header = ["index", "k", "l", "parity", "mu", "gamma_plus_re", "gamma_plus_im", "gamma_minus_re", "gamma_minus_im", "low"];
    let rows = sel.modes.iter().enumerate().map(|(i, m)| {
        vec![
            i.to_string(),
            m.k.to_string(),
            m.l.to_string(),
            m.parity.as_str().to_string(),
            fmt_float(m.mu),
            fmt_float(m.gamma_plus.re),
            fmt_float(m.gamma_plus.im),
            fmt_float(m.gamma_minus.re),
            fmt_float(m.gamma_minus.im),
            sel.is_low(i).to_string(),
        ]
    });
    csv_bytes(&header, rows)
}

fn field_artifacts(space: &ConeSpace, u: &ConeField) -> Result<(Vec<Artifact>, Value)> {
    let values = u.values()?;
    let s2 = crate::cone_calculus::symmetric_fields(space, values)?.s2;
    let weighted = Array3::from_shape_fn(s2.dim(), |(it, i, j)| space.radial.t_nodes[it].powi(3) * s2[[it, i, j]].abs());
    let summary = residual_summary(&space.radial, &s2);
    let arts = vec![
        Artifact { name: "u_field.csv".into(), bytes: grid_csv(space, &["u"], &[values])? },
        Artifact { name: "residual.csv".into(), bytes: grid_csv(space, &["s2", "weighted"], &[&s2, &weighted])? },
    ];
    Ok((arts, serde_json::to_value(summary).map_err(|e| Error::Artifact(e.to_string()))?))
}

/// Runs one pipeline and returns its artifacts.
pub fn execute(manifest: &RunManifest) -> Result<Vec<Artifact>> {
    let cfg = &manifest.config;
    cfg.validate()?;
    let link = cfg.link()?;
    let command = manifest.command;
    if command == Command::Link {
        let summary = json!({
            "command": command,
            "link": link,
            "invariants": link.invariants(),
            "curvatures": link.curvature_multiset(),
        });
        return Ok(vec![Artifact::json("summary.json", &summary)?]);
    }
    let sel = cached_selection(cfg, &link, manifest.cache.as_deref())?;
    if command == Command::Spectrum {
        let summary = json!({
            "command": command,
            "link": link,
            "m": sel.m,
            "epsilon": sel.epsilon,
            "J": sel.j_threshold,
            "mode_count": sel.modes.len(),
        });
        return Ok(vec![Artifact::json("summary.json", &summary)?, Artifact { name: "spectrum.csv".into(), bytes: spectrum_csv(&sel)? }]);
    }
    let space = cfg.space(link, sel)?;
    match command {
        Command::SolveLinear => {
            let solver = cfg.solver_config(&space)?;
            let boundary: Vec<f64> = solver.psi.iter().map(|c| c * solver.lambda).collect();
            let (u, diag) = solve_linear(&space, &space.zeros(), &boundary)?;
            let norms = weighted_norms(&space, &u, space.selection.m, space.selection.epsilon)?;
            let (mut arts, residual) = field_artifacts(&space, &u)?;
            let summary = json!({
                "command": command,
                "config": cfg,
                "diagnostics": diag,
                "iteration_norm": norms.c2_weighted,
                "global_norm": norms.global,
                "boundary_defect": boundary_defect(&space, &u, &solver)?,
                "residual": residual,
            });
            arts.insert(0, Artifact::json("summary.json", &summary)?);
            Ok(arts)
        }
        Command::SolveGraph => {
            let solver = cfg.solver_config(&space)?;
            let (u, diag) = solve_graph(&space, &solver)?;
            let (mut arts, _) = field_artifacts(&space, &u)?;
            let summary = json!({
                "command": command,
                "config": cfg,
                "converged": true,
                "diagnostics": diag,
                "boundary_defect": boundary_defect(&space, &u, &solver)?,
                "fixed_point_defect": fixed_point_defect(&space, &u, &solver)?,
            });
            arts.insert(0, Artifact::json("summary.json", &summary)?);
            Ok(arts)
        }
        Command::LambdaScan => {
            let solver = cfg.solver_config(&space)?;
            let scan = lambda_threshold_scan(&space, &solver, &cfg.solver.lambdas)?;
            let summary = json!({
                "command": command,
                "config": cfg,
                "rows": scan.rows,
                "empirical_lambda_hat": scan.lambda_hat,
            });
            Ok(vec![Artifact::json("summary.json", &summary)?])
        }
        Command::Verify => {
            let calibration = cone_calibration(&link, &space.radial, &space.angular)?;
            let solver = cfg.solver_config(&space)?;
            let lambda = if solver.lambda > 0.0 { solver.lambda } else { 0.01 };
            let direction = crate::radial_solver::harmonic_extension(&space, &solver.psi);
            let oracle = CurvatureOracle::new(&space)?;
            let base = direction.values()?;
            let sup = |a: &Array3<f64>| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let q_at = |s: f64| oracle.remainder(&space, &(base * (lambda * s)));
            let (q_big, q_small) = (q_at(1.0)?, q_at(0.1)?);
            let ratio = (sup(&q_big) / (lambda * lambda)) / (sup(&q_small) / (0.01 * lambda * lambda));
            let explicit = explicit_leading_q(&space, &direction.scaled(lambda * 0.1))?;
            let diff = sup(&(explicit.values()? - &q_small)) / sup(&q_small);
            let zero = Array3::zeros(space.shape());
            let s2 = crate::cone_calculus::symmetric_fields(&space, &zero)?.s2;
            let summary = json!({
                "command": command,
                "config": cfg,
                "calibration": calibration,
                "cone_residual": residual_summary(&space.radial, &s2),
                "q_scaling_ratio": ratio,
                "q_explicit_relative_difference": diff,
            });
            let weighted = Array3::from_shape_fn(s2.dim(), |(it, i, j)| space.radial.t_nodes[it].powi(3) * s2[[it, i, j]].abs());
            Ok(vec![
                Artifact::json("summary.json", &summary)?,
                Artifact { name: "residual.csv".into(), bytes: grid_csv(&space, &["s2", "weighted"], &[&s2, &weighted])? },
            ])
        }
        Command::Stability => {
            let mut report = cone_stability(&link)?;
            if report.classification == Classification::NotStable {
                let w = instability_witness(&link, cfg.stability.witness_radial, cfg.angular_sizes())?;
                report.witness = Some(w.summary);
            }
            let fields = random_compact_fields(&space, cfg.stability.hardy_fields, cfg.stability.battery_modes, cfg.seed);
            let mut hardy_max = 0.0f64;
            for f in &fields {
                let (lhs, rhs) = hardy_sides(&space, f)?;
                hardy_max = hardy_max.max(lhs / rhs);
            }
            let battery = test_battery(&space, cfg.stability.battery_modes, cfg.stability.battery_bumps);
            let cone_battery = graph_battery(&space, &space.zeros(), &battery)?;
            let graph = if report.classification == Classification::StrictlyStable && cfg.solver.lambda > 0.0 {
                let solver = cfg.solver_config(&space)?;
                let (u, _) = solve_graph(&space, &solver)?;
                let oracle = CurvatureOracle::new(&space)?;
                let rep = graph_battery(&space, &u, &battery)?;
                json!({
                    "lambda": solver.lambda,
                    "s3_deviation": graph_s3_deviation(&space, &u, solver.lambda, &oracle)?,
                    "battery_minimum": rep.minimum,
                    "threshold": rep.threshold,
                })
            } else {
                Value::Null
            };
            let stability = json!({
                "report": report,
                "hardy": {"fields": fields.len(), "max_ratio": hardy_max, "holds": hardy_max <= 1.0},
                "cone_battery": {"minimum": cone_battery.minimum, "threshold": cone_battery.threshold, "size": battery.len()},
                "graph": graph,
            });
            let summary = json!({
                "command": command,
                "config": cfg,
                "mu_M": report.mu_m,
                "classification": report.classification,
            });
            Ok(vec![Artifact::json("summary.json", &summary)?, Artifact::json("stability.json", &stability)?])
        }
        Command::Link | Command::Spectrum => unreachable!("handled above"),
    }
}

/// Writes artifacts into `dir`, creating it when needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Artifact(format!("{}: {e}", dir.display())))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Machine-readable failure record.
pub fn error_record(command: Option<Command>, kind: &str, message: &str, detail: Option<&Error>) -> Value {
    let trace = match detail {
        Some(Error::NonConvergence { iterations, ratios, updates }) => json!({"iterations": iterations, "ratios": ratios, "updates": updates}),
        _ => Value::Null,
    };
    json!({"command": command, "kind": kind, "message": message, "trace": trace})
}
