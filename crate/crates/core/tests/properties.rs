//! Cross-module properties on small grids.

use approx::assert_relative_eq;
use ndarray::Array2;
use proptest::prelude::*;
use scalarflat::quadrature::RadialGrid;
use scalarflat::radial_solver::{iteration_norm, solve_linear};
use scalarflat::space::ConeSpace;
use scalarflat::stability::{rayleigh_quotient, stability_index};
use scalarflat::solve_scalar_flat_radii;

fn small_space() -> ConeSpace {
    let link = solve_scalar_flat_radii(2, 1).unwrap();
    ConeSpace::band_limited(link, RadialGrid::new(1e-2, 33).unwrap(), (9, 8), None, 0.5).unwrap()
}

fn forcing(space: &ConeSpace, coeffs: &[f64]) -> Array2<f64> {
    let nt = space.radial.count;
    Array2::from_shape_fn((space.mode_count(), nt), |(j, i)| {
        coeffs[j % coeffs.len()] * space.radial.t_nodes[i].powf(1.5)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn linear_solve_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, c in prop::collection::vec(-1.0..1.0f64, 4)) {
        let space = small_space();
        let f1 = space.field_from_profiles(forcing(&space, &c));
        let f2 = space.field_from_profiles(forcing(&space, &[1.0, -0.5]));
        let mut psi = vec![0.0; space.mode_count()];
        psi[space.selection.j_threshold] = 1.0;
        let zero = vec![0.0; space.mode_count()];
        let (u1, _) = solve_linear(&space, &f1, &psi).unwrap();
        let (u2, _) = solve_linear(&space, &f2, &zero).unwrap();
        let combined = f1.scaled(a).axpy(b, &f2);
        let scaled_psi: Vec<f64> = psi.iter().map(|p| a * p).collect();
        let (u, _) = solve_linear(&space, &combined, &scaled_psi).unwrap();
        let expected = u1.scaled(a).axpy(b, &u2);
        let diff = u.axpy(-1.0, &expected);
        let scale = 1.0 + iteration_norm(&space, &expected, space.selection.m).unwrap();
        prop_assert!(iteration_norm(&space, &diff, space.selection.m).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn rayleigh_quotient_ignores_amplitude(s in 0.1..10.0f64, c in prop::collection::vec(-1.0..1.0f64, 3)) {
        let space = small_space();
        let lo = space.radial.t_nodes[4];
        let hi = space.radial.t_nodes[28];
        let u = space.field_from_profiles(Array2::from_shape_fn((space.mode_count(), space.radial.count), |(j, i)| {
            let t = space.radial.t_nodes[i];
            if t <= lo || t >= hi { 0.0 } else { c[j % 3] * ((t / lo).ln() * std::f64::consts::PI / (hi / lo).ln()).sin() }
        }));
        prop_assume!(u.sup_abs().unwrap() > 1e-3);
        let q1 = rayleigh_quotient(&space, &u, lo, hi).unwrap();
        let q2 = rayleigh_quotient(&space, &u.scaled(s), lo, hi).unwrap();
        assert_relative_eq!(q1, q2, max_relative = 1e-10);
    }

    #[test]
    fn stability_index_crosses_zero_at_the_critical_eigenvalue(n in 4usize..12, d in 0.01..5.0f64) {
        let critical = (n as f64 - 3.0).powi(2) / 4.0;
        prop_assert!(stability_index(-critical + d, n) > 0.0);
        prop_assert!(stability_index(-critical - d, n) < 0.0);
    }
}
