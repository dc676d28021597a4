use wsnpl_core::experiments::random_problem;
use wsnpl_core::model::{NetworkInstance, ProblemSpec, SensorSpec};
use wsnpl_core::oracles::{grid_search, projected_descent};
use wsnpl_core::{kkt_residual_l2, solve_l1, solve_l2, solve_l2_traced, L2SolverOptions, Norm};

fn instance(specs: &[(f64, f64)], d0: f64) -> ProblemSpec<f64> {
    let sensors = specs
        .iter()
        .map(|&(s, g)| SensorSpec::new(s, g, 1e-12).unwrap())
        .collect();
    ProblemSpec::new(NetworkInstance::new(1.0, sensors, 1e4).unwrap(), d0, Norm::L2).unwrap()
}

#[test]
fn homogeneous_four_sensors_split_equally() {
    let prob = instance(&[(0.02, 1e-3); 4], 0.01);
    let alloc = solve_l2(&prob, &L2SolverOptions::default()).unwrap();
    for r in &alloc.r {
        assert!((r - 25.0).abs() <= 1e-6 * 25.0, "{r}");
    }
    assert!(kkt_residual_l2(&alloc.r, &prob).unwrap() <= 1e-12);
}

#[test]
fn two_sensors_match_fine_grid() {
    let prob = instance(&[(0.01, 1e-3), (0.04, 1e-9)], 0.02);
    let alloc = solve_l2(&prob, &L2SolverOptions::default()).unwrap();
    let grid = grid_search(&prob, Norm::L2, 1e-5).unwrap().allocation;
    for (a, b) in alloc.r.iter().zip(&grid.r) {
        assert!((a - b).abs() <= 1e-4, "solver {a} grid {b}");
    }
}

#[test]
fn three_sensors_match_coarse_grid() {
    let prob = instance(&[(0.03, 1e-3), (0.05, 2e-4), (0.02, 5e-4)], 0.015);
    let alloc = solve_l2(&prob, &L2SolverOptions::default()).unwrap();
    let grid = grid_search(&prob, Norm::L2, 2e-3).unwrap().allocation;
    for (a, b) in alloc.r.iter().zip(&grid.r) {
        assert!((a - b).abs() <= 4e-3, "solver {a} grid {b}");
    }
    assert!(alloc.objective <= grid.objective * (1.0 + 1e-12));
}

#[test]
fn random_instances_meet_kkt_tolerance() {
    let opts = L2SolverOptions::default();
    let mut worst = 0.0_f64;
    for seed in 0..300 {
        let prob = random_problem(seed, Norm::L2).unwrap();
        let sol = solve_l2_traced(&prob, &opts).unwrap();
        assert!(sol.kkt_residual <= opts.kkt_tolerance, "seed {seed}: {:e}", sol.kkt_residual);
        assert!(sol.min_curvature > 0.0, "seed {seed}");
        let total: f64 = sol.allocation.r.iter().sum();
        assert!((total * prob.d0 - 1.0).abs() <= 1e-9, "seed {seed}");
        worst = worst.max(sol.kkt_residual);
    }
    eprintln!("worst L2 residual {worst:e}");
}

#[test]
fn l2_and_l1_optimize_their_own_objectives() {
    let opts = L2SolverOptions::default();
    for seed in 0..300 {
        let prob = random_problem(seed, Norm::L2).unwrap();
        let net = &prob.network;
        let l2 = solve_l2(&prob, &opts).unwrap();
        let l1 = solve_l1(&prob.with_norm(Norm::L1)).unwrap();
        let l2_of_l1 = l1.objective_under(net, Norm::L2).unwrap();
        let l1_of_l2 = l2.objective_under(net, Norm::L1).unwrap();
        assert!(l2.objective <= l2_of_l1 * (1.0 + 1e-9), "seed {seed}");
        assert!(l1_of_l2 >= l1.objective * (1.0 - 1e-9), "seed {seed}");
    }
}

#[test]
fn l2_agrees_with_descent_oracle() {
    for seed in 0..100 {
        let prob = random_problem(seed, Norm::L2).unwrap();
        let l2 = solve_l2(&prob, &L2SolverOptions::default()).unwrap();
        let pd = projected_descent(&prob, Norm::L2, 2000, 1e-12).unwrap().allocation;
        let rel = (l2.objective - pd.objective).abs() / pd.objective;
        assert!(rel <= 1e-8, "seed {seed}: {rel:e}");
    }
}

#[test]
fn max_node_power_monitor() {
    // The L2 allocation is expected to have the smaller peak node power.
    // Counterexamples are collected and reported together.
    let opts = L2SolverOptions::default();
    let mut counterexamples = Vec::new();
    let mut compared = 0;
    for seed in 0..500 {
        let prob = random_problem(seed, Norm::L2).unwrap();
        let l2 = solve_l2(&prob, &opts).unwrap();
        let l1 = solve_l1(&prob.with_norm(Norm::L1)).unwrap();
        let differ = l1
            .alpha
            .iter()
            .zip(&l2.alpha)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.max(*b));
        if !differ {
            continue;
        }
        compared += 1;
        let peak = |p: &[f64]| p.iter().copied().fold(0.0, f64::max);
        let (p1, p2) = (peak(&l1.node_powers), peak(&l2.node_powers));
        if p2 > p1 * (1.0 + 1e-9) {
            counterexamples.push((seed, p1, p2));
        }
    }
    eprintln!("peak power compared on {compared} instances, counterexamples {counterexamples:?}");
    assert!(counterexamples.is_empty(), "{counterexamples:?}");
}

#[test]
fn iterates_are_reproducible() {
    let prob = random_problem(42, Norm::L2).unwrap();
    let a = solve_l2_traced(&prob, &L2SolverOptions::default()).unwrap();
    let b = solve_l2_traced(&prob, &L2SolverOptions::default()).unwrap();
    assert_eq!(a.iterates, b.iterates);
}
