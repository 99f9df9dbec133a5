mod common;

use std::sync::{Arc, OnceLock};

use common::*;
use sps_core::energy::{ray_max_energy, Functional};
use sps_core::linalg::solve_shifted_laplacian;
use sps_core::solver::default_initial_guess;
use sps_core::{
    find_ground_state, minimize_on_nehari, GradientTolerance, ps_residual, DomainSpec, Grid, GroundState, ProblemParams, ScalarField,
    SolveOptions,
};

fn ball17() -> &'static Arc<Grid> {
    static G: OnceLock<Arc<Grid>> = OnceLock::new();
    G.get_or_init(|| Grid::new(DomainSpec::ball(1.0), 17).unwrap())
}

fn ground17() -> &'static GroundState {
    static GS: OnceLock<GroundState> = OnceLock::new();
    GS.get_or_init(|| {
        find_ground_state(ball17(), &ProblemParams::new(5.0, 1.0).unwrap(), &SolveOptions::default()).unwrap()
    })
}

#[test]
fn converged_state_satisfies_certificates() {
    let gs = ground17();
    assert!(gs.converged);
    assert!(gs.m > 0.0);
    assert!(gs.nehari_residual <= 1e-10);
    assert!(gs.ps_residual <= gs.tolerance);
    assert!(gs.u.min_value() >= -1e-12 * gs.u.max_value());
    let fresh = ps_residual(&gs.u, &gs.params).unwrap();
    assert!(fresh <= 1.01 * gs.tolerance, "{fresh} vs {}", gs.tolerance);
    for w in gs.trace.windows(2) {
        assert!(w[1].energy <= w[0].energy);
    }
    let ray = ray_max_energy(&gs.u, &gs.params).unwrap();
    assert!(rel(ray, gs.m) < 1e-10);
}

#[test]
fn restart_from_minimizer_is_a_fixed_point() {
    let gs = ground17();
    // Same target as the original run: a relative tolerance would rescale
    // against the already tiny starting residual.
    let opts = SolveOptions {
        gradient_tolerance: GradientTolerance::Absolute(gs.tolerance),
        ..SolveOptions::default()
    };
    let again = minimize_on_nehari(&gs.u, &gs.params, &opts).unwrap();
    assert!(again.iterations <= 1, "{} iterations", again.iterations);
    assert!(rel(again.m, gs.m) <= 1e-12);
}

#[test]
fn amplitude_of_the_start_is_irrelevant() {
    let params = ProblemParams::new(5.0, 0.0).unwrap();
    let u0 = default_initial_guess(ball17());
    let opts = SolveOptions::default();
    let a = minimize_on_nehari(&u0, &params, &opts).unwrap();
    let b = minimize_on_nehari(&u0.scaled(1.3), &params, &opts).unwrap();
    assert!(a.converged && b.converged);
    assert!(rel(a.m, b.m) <= 1e-8, "{} vs {}", a.m, b.m);
}

#[test]
fn matches_fixed_step_descent() {
    // Plain projected descent on the nodal gradient with step 1e-3; stable
    // because 1e-3 < 2 / (12/h² + 1) at h = 1/8.
    let gs = ground17();
    let params = gs.params;
    let f = Functional::new(params).unwrap();
    let mut u = f.nehari_project(&default_initial_guess(ball17())).unwrap().tu;
    let tol = gs.tolerance;
    let mut steps = 0;
    loop {
        let g = f.gradient(&u).unwrap();
        let (w, _) = solve_shifted_laplacian(&g, 1.0, 1e-12, None).unwrap();
        if g.dot(&w).sqrt() <= tol {
            break;
        }
        u = f.nehari_project(&u.axpy(-1e-3, &g)).unwrap().tu;
        steps += 1;
        assert!(steps < 200_000, "fixed-step descent stalled");
    }
    let m = f.evaluate(&u).unwrap().energy;
    println!("fixed-step oracle: m = {m:.10} after {steps} steps; solver m = {:.10}", gs.m);
    assert!(rel(m, gs.m) <= 1e-6, "{m} vs {}", gs.m);
}

#[test]
fn energy_grows_with_coupling() {
    let opts = SolveOptions::default();
    let ms: Vec<f64> = [0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&l| find_ground_state(ball17(), &ProblemParams::new(5.0, l).unwrap(), &opts).unwrap().m)
        .collect();
    for w in ms.windows(2) {
        assert!(w[0] <= w[1], "{ms:?}");
    }
    assert!(ms[2] - ms[0] > 1e-8, "{ms:?}");
}

#[test]
fn every_ray_maximum_lies_above_the_ground_level() {
    let gs = ground17();
    for seed in 0..50 {
        let u = random_bumps(ball17(), seed, 0.5).axpy(0.05, &random_field(ball17(), seed, 0.0, 1.0));
        let e = ray_max_energy(&u, &gs.params).unwrap();
        assert!(e >= gs.m - 1e-8, "seed {seed}: {e} < {}", gs.m);
    }
}

#[test]
fn smaller_ball_has_higher_level() {
    let g = Grid::new(DomainSpec::ball(1.0), 33).unwrap();
    let small = Grid::with_spacing(DomainSpec::ball(0.4), g.spacing()).unwrap();
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    let opts = SolveOptions::default();
    let m = find_ground_state(&g, &params, &opts).unwrap().m;
    let m_r = find_ground_state(&small, &params, &opts).unwrap().m;
    assert!(m < m_r, "{m} vs {m_r}");
}

#[test]
fn resolution_17_and_33_levels_within_ten_percent() {
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    let opts = SolveOptions::default();
    let coarse = ground17().m;
    let fine = find_ground_state(&Grid::new(DomainSpec::ball(1.0), 33).unwrap(), &params, &opts)
        .unwrap()
        .m;
    assert!((coarse - fine).abs() <= 0.1 * fine, "res 17: {coarse}, res 33: {fine}");
}

#[test]
fn deterministic_for_fixed_seed() {
    let params = ProblemParams::new(5.2, 0.5).unwrap();
    let opts = SolveOptions { seed: 9, ..SolveOptions::default() };
    let g = Grid::new(DomainSpec::shell(0.5, 1.0), 17).unwrap();
    let a = find_ground_state(&g, &params, &opts).unwrap();
    let b = find_ground_state(&g, &params, &opts).unwrap();
    assert_eq!(a.m.to_bits(), b.m.to_bits());
    assert_eq!(a.u.values(), b.u.values());
}

#[test]
fn ps_residual_matches_dense_solve() {
    let g = Grid::with_spacing(DomainSpec::cube(1.0), 0.34).unwrap();
    assert_eq!(g.interior_count(), 125);
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    assert_eq!(ps_residual(&ScalarField::zeros(&g), &params).unwrap(), 0.0);
    let u = random_field(&g, 77, 0.0, 1.0);
    let grad = Functional::new(params).unwrap().gradient(&u).unwrap();
    let w = dense_solve(dense_operator(&g, 1.0), grad.values().to_vec());
    let q: f64 = grad.values().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
    let ps = ps_residual(&u, &params).unwrap();
    assert!(rel(ps, q.sqrt()) <= 1e-8, "{ps} vs {}", q.sqrt());
}
