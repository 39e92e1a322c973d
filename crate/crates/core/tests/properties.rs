use glc_core::diagnostics::steady_residual;
use glc_core::field::{ComplexField, ScalarField};
use glc_core::grid::{
    build_current_profile, build_grid, ContactSegment, CurrentProfile, Edge, Mesh, ProfileShape,
};
use glc_core::linsolve::{solve_singular_neumann, Constraint, SolverSettings};
use glc_core::operators::laplacian_neumann;
use glc_core::steady::{h_norm, CorrectionTriple};
use glc_core::tdgl::{evolve, gauge_defect, potential_solve, Stepper};
use num_complex::Complex64;
use proptest::prelude::*;

fn edge_of(k: usize) -> Edge {
    Edge::ALL[k % 4]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn profiles_carry_no_net_current(
        nx in 4usize..20, ny in 4usize..20,
        lx in 0.5f64..4.0, ly in 0.5f64..4.0,
        in_edge in 0usize..4, shift in 1usize..4,
        a in 0.0f64..0.45, b in 0.55f64..1.0,
        amplitude in 0.01f64..50.0, bump in any::<bool>(),
    ) {
        let mesh = Mesh::new(nx, ny, lx, ly).unwrap();
        let (e1, e2) = (edge_of(in_edge), edge_of(in_edge + shift));
        let (l1, l2) = (e1.length(&mesh), e2.length(&mesh));
        let contacts = [
            ContactSegment::new(e1, a * l1, b * l1, 1.0),
            ContactSegment::new(e2, (1.0 - b) * l2, (1.0 - a) * l2, -1.0),
        ];
        let grid = match build_grid(nx, ny, lx, ly, &contacts) {
            Ok(g) => g,
            // A segment narrower than one face is legitimately rejected.
            Err(_) => return Ok(()),
        };
        let shape = if bump { ProfileShape::Bump } else { ProfileShape::Uniform };
        let p = match build_current_profile(&grid, amplitude, shape) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        prop_assert!(p.net_flux(&grid).abs() <= 1e-12 * p.total_flux(&grid));
        prop_assert_eq!(&build_grid(nx, ny, lx, ly, &contacts).unwrap(), &grid);
    }

    #[test]
    fn neumann_solution_ignores_constant_in_guess(
        vals in proptest::collection::vec(-1f64..1.0, 48), c in -100f64..100.0,
    ) {
        let m = Mesh::new(8, 6, 1.5, 1.0).unwrap();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let rhs: Vec<f64> = vals.iter().map(|v| v - mean).collect();
        let op = laplacian_neumann(&m).matrix.scaled(-1.0);
        let s = SolverSettings { tol: 1e-14, max_iter: 5000 };
        let guess: Vec<f64> = (0..rhs.len()).map(|k| (k as f64).sin()).collect();
        let shifted: Vec<f64> = guess.iter().map(|g| g + c).collect();
        let (x, _) = solve_singular_neumann(&op, &rhs, Constraint::ZeroMean, m.cell_area(), Some(&guess), s).unwrap();
        let (y, _) = solve_singular_neumann(&op, &rhs, Constraint::ZeroMean, m.cell_area(), Some(&shifted), s).unwrap();
        let scale = x.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn h_norm_is_absolutely_homogeneous(
        vals in proptest::collection::vec(-1f64..1.0, 3 * 25), t in -8f64..8.0, eps in 0.1f64..1.0,
    ) {
        let m = Mesh::new(5, 5, 1.0, 1.0).unwrap();
        let v = CorrectionTriple::from_stacked(m, &vals);
        let (a, b) = (h_norm(&v.scale(t), eps), t.abs() * h_norm(&v, eps));
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn trivial_state_residual_is_exactly_zero(n in 4usize..12, eps in 0.05f64..1.0, sigma in 0.1f64..10.0) {
        let grid = build_grid(n, n + 1, 1.0, 1.3, &[]).unwrap();
        let m = grid.mesh;
        let r = steady_residual(
            &ScalarField::constant(m, 1.0),
            &ScalarField::zeros(m),
            &ScalarField::zeros(m),
            eps,
            sigma,
            &grid,
            &CurrentProfile::zero(&grid),
        ).unwrap();
        prop_assert_eq!(r.max(), 0.0);
        prop_assert_eq!(r.gauge_integral, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Admissible data `|u0| <= 1` with a weak current: the potential stays
    /// normalized after every step, samples advance in time, and the modulus
    /// overshoot stays within a few percent.
    #[test]
    fn tdgl_steps_respect_gauge_and_modulus(
        modulus in proptest::collection::vec(0.0f64..1.0, 100),
        angle in proptest::collection::vec(-3.2f64..3.2, 100),
        amplitude in 0.0f64..0.3,
    ) {
        let m = Mesh::new(10, 10, 2.0, 2.0).unwrap();
        let grid = build_grid(10, 10, 2.0, 2.0, &[
            ContactSegment::full(Edge::Left, &m, 1.0),
            ContactSegment::full(Edge::Right, &m, -1.0),
        ]).unwrap();
        let profile = build_current_profile(&grid, amplitude, ProfileShape::Uniform).unwrap();
        let u0 = ComplexField::new(m, modulus.iter().zip(&angle).map(|(r, a)| Complex64::from_polar(*r, *a)).collect()).unwrap();
        let settings = SolverSettings { tol: 1e-12, max_iter: 5000 };
        let stepper = Stepper::new(&grid, &profile, 0.5, 1.0, 0.025, 0.1, settings).unwrap();
        let (traj, last) = evolve(&stepper, u0, 2.0, 4, None).unwrap();
        prop_assert!(traj.blow_up.is_none());
        prop_assert!(traj.max_gauge_defect <= 1e-8);
        prop_assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(traj.max_modulus.iter().all(|m| *m <= 1.05), "{:?}", traj.max_modulus);
        let phi = potential_solve(&grid, &last.u, &profile, 1.0, settings).unwrap();
        prop_assert!(gauge_defect(&last.u, &phi) <= 1e-8);
    }
}
