//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use scalarflat::basis::Parity;
use scalarflat::cone_calculus::{explicit_leading_q, CurvatureOracle};
use scalarflat::embedding::cone_calibration;
use scalarflat::nonlinear::{boundary_defect, solve_graph, SolverConfig};
use scalarflat::quadrature::{AngularGrid, FactorGrid, FactorKind, RadialGrid};
use scalarflat::radial_solver::{harmonic_extension, iteration_norm, solve_linear, solve_mode_profile, ModeOptions};
use scalarflat::space::{ConeField, ConeSpace};
use scalarflat::spectrum::{discrete_spectrum_oracle, enumerate_modes, indicial_roots, SpectralMode};
use scalarflat::stability::{
    cone_stability, graph_battery, graph_s3_deviation, hardy_sides, instability_witness, random_compact_fields, test_battery,
    Classification,
};
use scalarflat::{solve_scalar_flat_radii, CliffordLink};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn criterion(id: u32, name: &str, limit: Duration, body: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let (ok, detail) = match result {
        Ok((ok, detail)) => (ok && in_time, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "[{}] {id:>2} {name}: {detail}; {:.1} s (limit {} s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn worked() -> CliffordLink {
    solve_scalar_flat_radii(2, 1).expect("worked link")
}

fn balanced() -> CliffordLink {
    solve_scalar_flat_radii(4, 4).expect("balanced link")
}

fn space(link: CliffordLink, t_min: f64, nt: usize, sizes: (usize, usize)) -> ConeSpace {
    ConeSpace::band_limited(link, RadialGrid::new(t_min, nt).expect("radial grid"), sizes, None, 0.5).expect("space")
}

fn first_high_psi(sp: &ConeSpace) -> Vec<f64> {
    let mut psi = vec![0.0; sp.mode_count()];
    psi[sp.selection.j_threshold] = 1.0;
    psi
}

fn sup(a: &Array3<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn c1_invariants() -> Check {
    const TOL: f64 = 1e-12;
    let link = worked();
    let inv = link.invariants();
    let errs = [
        link.a1 - (1.0f64 / 3.0).sqrt(),
        link.a2 - (2.0f64 / 3.0).sqrt(),
        inv.s1 - (2.0 * 2.0f64.sqrt() - 0.5f64.sqrt()),
        inv.s2,
        inv.s3 + 2.0f64.sqrt(),
    ];
    let worst = errs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok((worst <= TOL, format!("max |error| {worst:.1e} (tol {TOL:.0e})")))
}

fn c2_spectrum() -> Check {
    const TOL: f64 = 0.01;
    const ORDER_RATIO: f64 = 0.3;
    let mut ok = true;
    let mut detail = Vec::new();
    for link in [worked(), balanced()] {
        let exact: Vec<f64> = enumerate_modes(&link, link.n, 6, 6).iter().take(6).map(|m| m.mu).collect();
        let err = |n: usize| -> Result<f64, scalarflat::Error> {
            let got = discrete_spectrum_oracle(&link, (n, n), 6)?;
            Ok(got.iter().zip(&exact).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max))
        };
        let (coarse, fine) = (err(65)?, err(129)?);
        ok &= fine <= TOL && fine <= ORDER_RATIO * coarse;
        detail.push(format!("({},{}) err@129 {fine:.2e} ratio {:.3}", link.p, link.q, fine / coarse));
    }
    Ok((ok, format!("{} (tol {TOL}, ratio <= {ORDER_RATIO})", detail.join(", "))))
}

fn c3_oracle() -> Check {
    const TOL: f64 = 1e-6;
    const DROP: f64 = 3.5;
    let link = worked();
    let grids = |n: usize| -> Result<(RadialGrid, AngularGrid), scalarflat::Error> {
        let ang = AngularGrid::new(
            FactorGrid::new(FactorKind::Sphere { dim: 2 }, link.a1, n)?,
            FactorGrid::new(FactorKind::Circle, link.a2, n - 1)?,
        );
        Ok((RadialGrid::new(1e-3, n)?, ang))
    };
    let (r, a) = grids(129)?;
    let coarse = cone_calibration(&link, &r, &a)?;
    let (r, a) = grids(257)?;
    let fine = cone_calibration(&link, &r, &a)?;
    let ok = fine.curvature_error <= TOL
        && fine.s2_error <= TOL
        && coarse.curvature_error >= DROP * fine.curvature_error
        && coarse.s2_error >= DROP * fine.s2_error;
    Ok((
        ok,
        format!(
            "t|k - k_exact| {:.2e}, t^2|S2| {:.2e} at 257 (tol {TOL:.0e}); drops {:.1}x, {:.1}x (>= {DROP})",
            fine.curvature_error,
            fine.s2_error,
            coarse.curvature_error / fine.curvature_error,
            coarse.s2_error / fine.s2_error
        ),
    ))
}

fn c4_linear() -> Check {
    const TOL: f64 = 1e-8;
    let sp = space(worked(), 1e-3, 257, (17, 16));
    let opts = ModeOptions::for_selection(&sp.selection);
    let mode = |mu: f64| {
        let (gm, gp) = indicial_roots(4, mu);
        SpectralMode { k: 0, l: 0, parity: Parity::None, mu, gamma_plus: gp, gamma_minus: gm, norm_const: 1.0 }
    };
    let f = vec![1.0; sp.radial.count];
    let high = solve_mode_profile(&mode(2.0), &f, 0.1, 4, false, &sp.radial, opts)?;
    let low = solve_mode_profile(&mode(0.0), &f, 0.0, 4, true, &sp.radial, opts)?;
    let err_of = |a: &[f64], d: f64| a.iter().zip(&sp.radial.t_nodes).map(|(v, t)| (v - t.powi(3) / d).abs()).fold(0.0, f64::max);
    let (e_high, e_low) = (err_of(&high, 10.0), err_of(&low, 12.0));
    let idx = sp.selection.index_of((1, 1, Parity::Cos)).ok_or("mode (1,1) missing")?;
    let phi = sp.eigenfunction(idx).insert_axis(ndarray::Axis(0));
    let forcing = ConeField::from_values(Array3::zeros(sp.shape()) + &(&phi * (10.0 * sp.inv.s1)));
    let mut psi = vec![0.0; sp.mode_count()];
    psi[idx] = 1.0;
    let (u, _) = solve_linear(&sp, &forcing, &psi)?;
    let exact = sp.tabulate(|t, _, _| t.powi(3)) * &phi;
    let e_full = sup(&(u.values()? - &exact));
    let ok = e_high <= TOL && e_low <= TOL && e_full <= TOL;
    Ok((ok, format!("t^3/10 {e_high:.1e}, t^3/12 {e_low:.1e}, full field {e_full:.1e} (tol {TOL:.0e})")))
}

fn c5_nonlinear() -> Check {
    const MAX_ITER: usize = 30;
    const BOUNDARY_TOL: f64 = 1e-8;
    const DROP: f64 = 3.5;
    const SPREAD: f64 = 2.0;
    let coarse = space(worked(), 1e-3, 129, (33, 32));
    let fine = space(worked(), 1e-3, 257, (65, 64));
    let mut ok = true;
    let mut consts = Vec::new();
    let mut lines = Vec::new();
    for lambda in [0.005, 0.01, 0.02] {
        let cfg = SolverConfig::new(lambda, first_high_psi(&coarse));
        let (u, d) = solve_graph(&coarse, &cfg)?;
        let bd = boundary_defect(&coarse, &u, &cfg)?;
        let fine_cfg = SolverConfig::new(lambda, first_high_psi(&fine));
        let (_, df) = solve_graph(&fine, &fine_cfg)?;
        let drop = d.embedded_residual / df.embedded_residual;
        let lin = harmonic_extension(&coarse, &cfg.psi).scaled(lambda);
        consts.push(iteration_norm(&coarse, &u.axpy(-1.0, &lin), coarse.selection.m)? / (lambda * lambda));
        let max_ratio = d.contraction_ratios.iter().copied().fold(0.0, f64::max);
        ok &= d.iterations <= MAX_ITER && max_ratio < 1.0 && bd <= BOUNDARY_TOL && drop >= DROP;
        lines.push(format!("l={lambda}: it {} max ratio {max_ratio:.1e} bd {bd:.1e} res drop {drop:.1}x", d.iterations));
    }
    let (lo, hi) = consts.iter().fold((f64::MAX, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    ok &= hi / lo < SPREAD;
    Ok((
        ok,
        format!(
            "{}; |u - lH|/l^2 spread {:.3} (< {SPREAD}); limits it <= {MAX_ITER}, bd <= {BOUNDARY_TOL:.0e}, drop >= {DROP}",
            lines.join("; "),
            hi / lo
        ),
    ))
}

fn c6_golden() -> Check {
    const TOL: f64 = 1e-12;
    let a = cone_stability(&worked())?;
    let b = cone_stability(&balanced())?;
    let ok = (a.mu_m + 7.0).abs() <= TOL
        && (b.mu_m - 2.0 / 9.0).abs() <= TOL
        && a.classification == Classification::NotStable
        && b.classification == Classification::StrictlyStable;
    Ok((ok, format!("mu_M = {:.15}, {:.15} (tol {TOL:.0e}); {:?}, {:?}", a.mu_m, b.mu_m, a.classification, b.classification)))
}

fn c7_witness() -> Check {
    const POINT_TOL: f64 = 1e-10;
    const QUOTIENT_FACTOR: f64 = 5.0;
    let w = instability_witness(&worked(), 129, (9, 8))?.summary;
    let root7 = 7.0f64.sqrt();
    let pi = std::f64::consts::PI;
    let point_err = (w.tau - (-pi / root7).exp()).abs().max((w.sigma - (-3.0 * pi / root7).exp()).abs());
    let q_tol = QUOTIENT_FACTOR * w.radial_step * w.radial_step;
    let ok = point_err <= POINT_TOL && w.quotient.abs() <= q_tol && w.lowest_eigenvalue < 0.0;
    Ok((
        ok,
        format!(
            "truncation error {point_err:.1e} (tol {POINT_TOL:.0e}); quotient {:.2e} (tol {QUOTIENT_FACTOR} h^2 = {q_tol:.2e}); lowest eigenvalue {:.4}",
            w.quotient, w.lowest_eigenvalue
        ),
    ))
}

fn c8_hardy() -> Check {
    const FIELDS: usize = 50;
    let mut ok = true;
    let mut detail = Vec::new();
    for (link, sizes) in [(worked(), (17, 16)), (balanced(), (17, 17))] {
        let sp = space(link, 1e-2, 129, sizes);
        let h2 = sp.radial.step().powi(2);
        let mut worst = 0.0f64;
        for f in random_compact_fields(&sp, FIELDS, 20, 7) {
            let (lhs, rhs) = hardy_sides(&sp, &f)?;
            ok &= lhs <= rhs * (1.0 + h2);
            worst = worst.max(lhs / rhs);
        }
        detail.push(format!("({},{}) max lhs/rhs {worst:.3}", link.p, link.q));
    }
    Ok((ok, format!("{} over {FIELDS} fields each (bound 1 + h^2)", detail.join(", "))))
}

fn c9_q_consistency() -> Check {
    const SCALING_TOL: f64 = 0.05;
    const AGREE_TOL: f64 = 0.05;
    const REFINE_RATIO: f64 = 2.5;
    const CUBIC_SLACK: f64 = 5.0;
    let link = worked();
    let growth = 2.5;
    let measure = |nt: usize, sizes: (usize, usize)| -> Result<[f64; 3], Box<dyn std::error::Error>> {
        let sp = space(link, 1e-2, nt, sizes);
        let j = sp.selection.j_threshold;
        let mut a = Array2::zeros((sp.mode_count(), nt));
        for (m, w) in [(j, 1.0), (3, 0.3), (0, 0.2)] {
            for (i, t) in sp.radial.t_nodes.iter().enumerate() {
                a[[m, i]] = w * t.powf(growth);
            }
        }
        let u = sp.field_from_profiles(a);
        let oracle = CurvatureOracle::new(&sp)?;
        let explicit = explicit_leading_q(&sp, &u)?;
        let ev = explicit.values()?;
        let weight = |it: usize| sp.radial.t_nodes[it].powf(4.0 - 2.0 * growth);
        let mut out = [0.0; 3];
        let mut sizes_q = [0.0; 2];
        for (k, s) in [1e-2, 1e-3].into_iter().enumerate() {
            let q = oracle.remainder(&sp, &(u.values()? * s))? / (s * s);
            let (mut diff, mut scale, mut size) = (0.0f64, 0.0f64, 0.0f64);
            for it in 2..nt - 2 {
                let w = weight(it);
                for (qv, ev) in q.index_axis(ndarray::Axis(0), it).iter().zip(ev.index_axis(ndarray::Axis(0), it).iter()) {
                    diff = diff.max(w * (qv - ev).abs());
                    scale = scale.max(w * ev.abs());
                    size = size.max(w * qv.abs());
                }
            }
            out[k] = diff / scale;
            sizes_q[k] = size;
        }
        out[2] = (sizes_q[0] / sizes_q[1] - 1.0).abs();
        Ok(out)
    };
    let coarse = measure(65, (17, 16))?;
    let fine = measure(129, (33, 32))?;
    let ok = fine[2] <= SCALING_TOL
        && fine[1] <= AGREE_TOL
        && coarse[1] >= REFINE_RATIO * fine[1]
        && (fine[0] - fine[1]).abs() <= CUBIC_SLACK * 1e-2;
    Ok((
        ok,
        format!(
            "|Q(su)|/s^2 variation {:.2e} (tol {SCALING_TOL}); explicit vs remainder {:.2e} at s=1e-3 (tol {AGREE_TOL}), refinement ratio {:.1} (>= {REFINE_RATIO}), amplitude shift {:.2e} (<= {CUBIC_SLACK} s)",
            fine[2],
            fine[1],
            coarse[1] / fine[1],
            (fine[0] - fine[1]).abs()
        ),
    ))
}

fn c10_graph_stability() -> Check {
    const SPREAD: f64 = 2.0;
    let sp = space(balanced(), 1e-3, 129, (33, 33));
    let oracle = CurvatureOracle::new(&sp)?;
    let battery = test_battery(&sp, 20, 3);
    let slack = sp.radial.step().powi(2);
    let mut devs = Vec::new();
    let mut minimum = f64::INFINITY;
    let mut threshold = 0.0;
    for lambda in [0.04, 0.02, 0.01] {
        let cfg = SolverConfig::new(lambda, first_high_psi(&sp));
        let (u, _) = solve_graph(&sp, &cfg)?;
        devs.push(graph_s3_deviation(&sp, &u, lambda, &oracle)?);
        let rep = graph_battery(&sp, &u, &battery)?;
        minimum = minimum.min(rep.minimum);
        threshold = rep.threshold;
    }
    let (lo, hi) = devs.iter().fold((f64::MAX, 0.0f64), |(a, b), c| (a.min(*c), b.max(*c)));
    let ok = hi / lo < SPREAD && minimum >= threshold - slack;
    Ok((
        ok,
        format!(
            "S3 deviation {:?} spread {:.3} (< {SPREAD}); battery of {} min {minimum:.4} (>= mu_M/2 - h^2 = {:.4})",
            devs.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>(),
            hi / lo,
            battery.len(),
            threshold - slack
        ),
    ))
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "worked-example invariants", secs(1), c1_invariants),
        criterion(2, "spectrum cross-validation", secs(30), c2_spectrum),
        criterion(3, "curvature oracle calibration", secs(120), c3_oracle),
        criterion(4, "linear manufactured solutions", secs(60), c4_linear),
        criterion(5, "nonlinear existence", secs(900), c5_nonlinear),
        criterion(6, "stability golden values", secs(1), c6_golden),
        criterion(7, "instability witness", secs(60), c7_witness),
        criterion(8, "Hardy-type inequality", secs(120), c8_hardy),
        criterion(9, "Q consistency", secs(120), c9_q_consistency),
        criterion(10, "graph stability surrogate", secs(300), c10_graph_stability),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
