//! Checks against independent references: a high-order integrator, closed-form
//! quadratures for the pendulum, and exhaustive searches.

mod common;

use std::f64::consts::PI;

use nalgebra::Vector3;
use tonelli::flow::{
    exact_symplecto_action_defect, first_integral_defect, flow, flow_commutator_defect, flow_system, pushforward,
    EmpiricalMeasure,
};
use tonelli::integrability::{constancy_on_graph, graph_invariance_defect, uniqueness_probe};
use tonelli::lie::{integrate_rigid_body, InertiaOperator, RigidBodyState};
use tonelli::weakkam::{
    alpha_table, energy_level_check, one_step_cost, oracle, solve_weak_kam, subcritical_check, DiscreteActionParams,
    LaxOleinik, SolverOptions,
};
use tonelli::{catalog, CohomologyClass, PhasePoint};

fn class(c: &[f64]) -> CohomologyClass {
    CohomologyClass::new(c.to_vec()).unwrap()
}

#[test]
fn pendulum_flow_matches_rk4_reference() {
    let sys = catalog::pendulum();
    let dt = 2.5e-4;
    let traj = flow_system(&sys, &PhasePoint::new(vec![0.25], vec![0.1]), 10.0, dt).unwrap();
    // reference step dt/100
    let reference = common::rk4(common::pendulum_field, &[0.25, 0.1], 10.0, 4_000_000);
    let end = traj.last();
    let dx = common::circle_distance(end.x()[0], reference[0]);
    let dp = (end.p()[0] - reference[1]).abs();
    assert!(dx < 1e-5 && dp < 1e-5, "dx = {dx:e}, dp = {dp:e}");
}

#[test]
fn non_integral_varies_along_the_pendulum_orbit() {
    let sys = catalog::pendulum();
    let traj = flow_system(&sys, &PhasePoint::new(vec![0.25], vec![0.1]), 1.0, 1e-3).unwrap();
    let f = catalog::sin_observable(1, 0);
    assert!(first_integral_defect(&f, &traj) > 0.1);
}

#[test]
fn kinetic_and_potential_flows_do_not_commute() {
    let kinetic = catalog::kinetic(2);
    let wave = catalog::sin_observable(2, 0);
    let z0 = PhasePoint::new(vec![0.1, 0.2], vec![0.3, 0.4]);
    let d = flow_commutator_defect(&kinetic, &wave, &z0, 1.0, 1.0, 1e-3).unwrap();
    // Φ_B^1 kicks p₁ by −2π cos 2πx₁; the orders differ at first order in the kick
    assert!(d > 1e-3, "{d}");
}

#[test]
fn pendulum_orbit_measure_stays_on_its_energy_level() {
    let sys = catalog::pendulum();
    let z0 = PhasePoint::new(vec![0.0], vec![2.5]);
    let e0 = sys.energy(&z0);
    let orbit = flow_system(&sys, &z0, 0.5, 1e-3).unwrap();
    let mu = EmpiricalMeasure::from_orbit(&orbit).unwrap();
    let moved = pushforward(sys.hamiltonian(), &mu, 0.3, 2e-5).unwrap();
    let worst = moved
        .points()
        .iter()
        .map(|z| (sys.energy(z) - e0).abs())
        .fold(0.0, f64::max);
    // the orbit itself carries the O(dt²) oscillation of the coarser step
    let spread = mu.points().iter().map(|z| (sys.energy(z) - e0).abs()).fold(0.0, f64::max);
    assert!(worst <= spread + 1e-8, "{worst:e} vs {spread:e}");
}

#[test]
fn hamiltonian_flow_preserves_the_action_of_its_orbit_measure() {
    let sys = catalog::mech2d(0.1);
    let orbit = flow_system(&sys, &PhasePoint::new(vec![0.1, 0.2], vec![0.7, -0.4]), 100.0, 1e-2).unwrap();
    let mu = EmpiricalMeasure::from_orbit_windowed(&orbit).unwrap();
    let d = exact_symplecto_action_defect(&sys, sys.hamiltonian(), &mu, 2.0, 1e-2).unwrap();
    assert!(d <= 1e-6, "{d:e}");
}

#[test]
fn pendulum_rotation_energy_matches_quadrature() {
    let sys = catalog::pendulum();
    let exact = common::pendulum_alpha(2.0);
    assert!((exact - 2.0637954).abs() < 1e-6);
    let wk = solve_weak_kam(&sys, &class(&[2.0]), &DiscreteActionParams::new(0.1, 4.0, 256), &SolverOptions::default())
        .unwrap();
    assert!((wk.alpha - exact).abs() < 5e-4, "{} vs {exact}", wk.alpha);
    assert!(energy_level_check(&sys, &wk) < 5e-2);
}

#[test]
fn rotation_vector_matches_the_period_and_the_slope_of_alpha() {
    let sys = catalog::pendulum();
    let params = DiscreteActionParams::new(0.1, 4.0, 256);
    let opts = SolverOptions::default();
    let omega = 1.0 / common::pendulum_period(common::pendulum_alpha(2.0));
    let wk = solve_weak_kam(&sys, &class(&[2.0]), &params, &opts).unwrap();
    let lattice = 1.0 / (params.n as f64 * params.h);
    assert!((wk.rotation_vector[0] - omega).abs() <= lattice, "{:?} vs {omega}", wk.rotation_vector);
    let table = alpha_table(&sys, &[class(&[1.9]), class(&[2.1])], &params, &opts).unwrap();
    let slope = (table.rows[1].alpha - table.rows[0].alpha) / 0.2;
    assert!((slope - omega).abs() < 1e-2, "{slope} vs {omega}");
}

#[test]
fn flat_piece_of_the_pendulum() {
    let c_star = common::pendulum_critical_class();
    assert!((c_star - 4.0 / PI).abs() < 1e-9);
    let sys = catalog::pendulum();
    let grid: Vec<_> = [0.0, 0.6, 1.2, 1.4, 1.5].iter().map(|c| class(&[*c])).collect();
    let table = alpha_table(&sys, &grid, &DiscreteActionParams::new(0.1, 4.0, 256), &SolverOptions::default()).unwrap();
    for r in &table.rows[..3] {
        assert!((r.alpha - 1.0).abs() < 2e-2, "{:?}", r);
    }
    assert!(table.rows[4].alpha > table.rows[3].alpha);
    assert!((table.rows[4].alpha - common::pendulum_alpha(1.5)).abs() < 2e-3);
}

#[test]
fn rest_class_energy_and_subsolution_defects() {
    let sys = catalog::pendulum();
    let wk = solve_weak_kam(&sys, &class(&[0.0]), &DiscreteActionParams::new(0.1, 4.0, 512), &SolverOptions::default())
        .unwrap();
    let top = wk.aubry_nodes.iter().position(|i| *i == 0).expect("x = 0 is in the Aubry estimate");
    let z = &wk.aubry_points()[top];
    assert!((sys.energy(z) - wk.alpha).abs() <= 2e-2);
    assert!(subcritical_check(&sys, &wk.u, &wk.c, wk.alpha) <= 2e-2);
}

#[test]
fn karp_critical_value_matches_the_solver_on_two_dimensional_grids() {
    let sys = catalog::mech2d(0.1);
    let params = DiscreteActionParams::new(0.25, 1.0, 12);
    let c = class(&[0.2, -0.1]);
    let op = LaxOleinik::new(&sys, &c, &params).unwrap();
    let exact = oracle::critical_value(&op).unwrap();
    let wk = solve_weak_kam(&sys, &c, &params, &SolverOptions::default()).unwrap();
    assert!((wk.alpha - exact).abs() < 1e-7, "{} vs {exact}", wk.alpha);
}

#[test]
fn operator_entries_match_an_exhaustive_scan() {
    let sys = catalog::pendulum();
    let params = DiscreteActionParams::new(0.2, 4.0, 256);
    let c = class(&[0.0]);
    let op = LaxOleinik::new(&sys, &c, &params).unwrap();
    let u = vec![0.0; 256];
    let tu = op.apply(&tonelli::weakkam::GridFunction::new(1, 256, u).unwrap());
    // every node lies within reach (vmax·h = 0.8 > ½); scan them all as predecessors of x = 0
    let mut best = f64::INFINITY;
    for j in 0..256 {
        let y = j as f64 / 256.0;
        best = best.min(one_step_cost(&sys, &[y], &[0.0], &c, &params).unwrap());
    }
    assert!((tu.values()[0] - best).abs() < 1e-12, "{} vs {best}", tu.values()[0]);
}

#[test]
fn pendulum_solution_is_unique_in_a_rotating_class() {
    let sys = catalog::pendulum();
    let probe = uniqueness_probe(
        &sys,
        &class(&[2.0]),
        &DiscreteActionParams::new(0.1, 4.0, 128),
        &SolverOptions::default(),
        5,
        11,
    )
    .unwrap();
    assert!(probe.all_converged);
    assert!(probe.spread <= 1e-6, "{:e}", probe.spread);
}

#[test]
fn free_graphs_are_exactly_invariant() {
    let free = catalog::free(1);
    let wk = solve_weak_kam(&free, &class(&[0.5]), &DiscreteActionParams::new(0.1, 4.0, 64), &SolverOptions::default())
        .unwrap();
    assert!(graph_invariance_defect(&free, &wk, 3.0, 1e-2, 16, 1).unwrap() <= 1e-8);
    assert!(constancy_on_graph(&free.hamiltonian().clone(), &wk).unwrap() <= 1e-10);

    // mech2d without coupling is free motion on T²; (0.3, 0.4) lies on the velocity lattice
    let sys = catalog::mech2d(0.0);
    let params = DiscreteActionParams::new(0.5, 0.75, 20);
    let wk = solve_weak_kam(&sys, &class(&[0.3, 0.4]), &params, &SolverOptions::default()).unwrap();
    assert!(graph_invariance_defect(&sys, &wk, 3.0, 1e-2, 16, 1).unwrap() <= 1e-8);
    assert!(constancy_on_graph(&catalog::momentum(2, 0), &wk).unwrap() <= 1e-10);
}

#[test]
fn rigid_body_matches_rk4_on_the_euler_equations() {
    let inertia = [1.0, 2.0, 3.0];
    let a = InertiaOperator::new(inertia).unwrap();
    let traj = integrate_rigid_body(&a, &RigidBodyState::at_rest_frame(Vector3::new(1.0, 0.1, 0.1)), 5.0, 1e-3).unwrap();
    let reference = common::rk4(common::euler_field(inertia), &[1.0, 0.1, 0.1], 5.0, 500_000);
    let end = traj.states.last().unwrap().body_momentum;
    let err = (0..3).map(|i| (end[i] - reference[i]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err:e}");
}

#[test]
fn free_flow_is_a_translation() {
    let p1 = catalog::momentum(2, 0);
    let traj = flow(&p1, &PhasePoint::new(vec![0.9, 0.2], vec![0.3, -0.1]), 0.3, 1e-2).unwrap();
    let end = traj.last();
    assert!(common::circle_distance(end.x()[0], 0.2) < 1e-12);
    assert_eq!(end.p(), &[0.3, -0.1]);
}
