use heapstock::analytic::{Model1aCoefficients, Model1bCoefficients};
use heapstock::bvp::{solve_bvp, GridSpec, NewtonSettings};
use heapstock::model::uniform_grid;
use heapstock::transcription::{gradient, objective, optimize, projected_gradient, TranscriptionSettings};
use heapstock::ModelInstance;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

fn max_rel_fd_error(model: &ModelInstance, m: usize, penalty: f64, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let times = uniform_grid(model.horizon, m);
    let u: Vec<f64> = times.iter().map(|&t| model.demand.at(t) + rng.random_range(0.0..60.0)).collect();
    let g = gradient(model, &u, penalty).unwrap();
    let coords: Vec<usize> = (0..20).map(|_| rng.random_range(0..=m)).collect();
    coords
        .par_iter()
        .map(|&j| {
            let delta = 1e-3;
            let (mut up, mut down) = (u.clone(), u.clone());
            up[j] += delta;
            down[j] -= delta;
            let fd = (objective(model, &up, penalty).unwrap() - objective(model, &down, penalty).unwrap()) / (2.0 * delta);
            (fd - g[j]).abs() / g[j].abs().max(1e-12)
        })
        .reduce(|| 0.0, f64::max)
}

#[test]
fn adjoint_gradient_matches_central_differences() {
    for (b1, gamma) in [(0.02, 1.0), (0.11, 1.0), (0.001, 2.0), (0.01, 1.5)] {
        let mut model = ModelInstance::baseline(b1).unwrap();
        model.breakage.gamma = gamma;
        for (seed, penalty) in [(1, 10.0), (2, 1e3), (3, 1e5)] {
            let err = max_rel_fd_error(&model, 240, penalty, seed);
            assert!(err < 1e-5, "b1={b1} gamma={gamma} mu={penalty}: {err:e}");
        }
    }
}

#[test]
fn optimum_with_breakage_tracks_closed_form() {
    let model = ModelInstance::baseline(0.02).unwrap();
    let c = Model1aCoefficients::new(&model).unwrap();
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    assert!(rep.converged && rep.feasible);
    assert!((rep.profit - c.profit(&model)).abs() < 0.01 * c.profit(&model));
    assert!(rep.initial_projected_gradient_norm / rep.projected_gradient_norm >= 100.0);
    let dev = rep
        .trajectory
        .times
        .iter()
        .zip(&rep.trajectory.u)
        .map(|(&t, &u)| (u - c.control(&model, t)).abs())
        .fold(0.0, f64::max);
    assert!(dev < 2.0, "max node deviation {dev}");
    assert!(rep.terminal_violation < 1e-3);
}

#[test]
fn optimum_without_breakage_tracks_closed_form() {
    let model = ModelInstance::baseline(0.0).unwrap();
    let c = Model1bCoefficients::new(&model).unwrap();
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    assert!(rep.converged && rep.feasible);
    assert!((rep.profit - c.profit(&model)).abs() < 0.01 * c.profit(&model));
    assert!(rep.initial_projected_gradient_norm / rep.projected_gradient_norm >= 100.0);
}

#[test]
fn closed_form_plan_is_stationary_up_to_terminal_multiplier() {
    // with b1 = 0 the final stock is sum_j w_j (u_j - d_j) for trapezoid
    // weights w, so the constrained gradient is g + nu w for one scalar nu
    let model = ModelInstance::baseline(0.0).unwrap();
    let c = Model1bCoefficients::new(&model).unwrap();
    let m = 1200;
    let h = model.horizon / m as f64;
    let times = uniform_grid(model.horizon, m);
    let w: Vec<f64> = (0..=m).map(|j| if j == 0 || j == m { h / 2.0 } else { h }).collect();
    let reduced_norm = |u: &[f64]| {
        let g = gradient(&model, u, 0.0).unwrap();
        let nu = -g.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().map(|b| b * b).sum::<f64>();
        let r: Vec<f64> = g.iter().zip(&w).map(|(a, b)| a + nu * b).collect();
        projected_gradient(u, &r).iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let at_optimum: Vec<f64> = times.iter().map(|&t| c.control(&model, t)).collect();
    let at_zero = vec![0.0; m + 1];
    let ratio = reduced_norm(&at_optimum) / reduced_norm(&at_zero);
    assert!(ratio < 1e-3, "{ratio:e}");
}

#[test]
fn quadratic_breakage_agrees_with_boundary_value_solver() {
    let mut model = ModelInstance::baseline(0.001).unwrap();
    model.breakage.gamma = 2.0;
    let sol = solve_bvp(&model, GridSpec::new(1200, 12.0).unwrap(), NewtonSettings::default()).unwrap();
    let bvp_profit = model.profit_of_trajectory(&sol.trajectory).unwrap();
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    assert!(rep.profit >= bvp_profit * (1.0 - 0.005));
    assert!((rep.profit - bvp_profit).abs() < 0.005 * bvp_profit);
    assert!(rep.converged && rep.terminal_violation < 1e-4, "{}", rep.terminal_violation);
    // three weights leave x(T) near lambda(T) / (2 mu) = 1.4e-3
    let short = TranscriptionSettings {
        penalty_schedule: vec![1e1, 1e3, 1e5],
        ..TranscriptionSettings::default()
    };
    let rep = optimize(&model, &short).unwrap();
    assert!(rep.terminal_violation > 1e-3 && !rep.converged);
    assert!((rep.profit - bvp_profit).abs() < 0.005 * bvp_profit);
}

#[test]
fn control_is_constant_without_time_variation() {
    let mut model = ModelInstance::baseline(0.0).unwrap();
    model.holding.b = 0.0;
    model.demand.d2 = 0.0;
    model.demand.d3 = 0.0;
    model.holding.a = 1e-3;
    let spread = |u: &[f64]| {
        let (lo, hi) = u.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    };
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    assert!(rep.converged);
    assert!(spread(&rep.trajectory.u) < 0.1, "{}", spread(&rep.trajectory.u));

    // a constant holding cost tilts the plan by a / (2 beta) per unit time;
    // demand is raised so the plan stays clear of u = 0
    model.holding.a = 3.0;
    model.demand.d1 = 50.0;
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    let slope = model.holding.a / (2.0 * model.econ.beta10);
    let detrended: Vec<f64> = rep.trajectory.times.iter().zip(&rep.trajectory.u).map(|(&t, &u)| u - slope * t).collect();
    assert!(spread(&detrended) < 0.1, "{}", spread(&detrended));
}

#[test]
fn objective_rises_within_stages_and_violation_falls_across_them() {
    for b1 in [0.0, 0.02, 0.11] {
        let model = ModelInstance::baseline(b1).unwrap();
        let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
        for stage in &rep.stages {
            assert!(stage.objective_trace.windows(2).all(|w| w[1] >= w[0]));
        }
        assert!(rep.stages.windows(2).all(|s| s[1].terminal_violation <= s[0].terminal_violation));
        assert_eq!(rep.iterations, rep.stages.iter().map(|s| s.iterations).sum::<usize>());
    }
}

#[test]
fn iteration_cap_is_reported() {
    let model = ModelInstance::baseline(0.02).unwrap();
    let settings = TranscriptionSettings {
        max_iters: 2,
        ..TranscriptionSettings::default()
    };
    let rep = optimize(&model, &settings).unwrap();
    assert!(!rep.converged);
    assert!(rep.stages.iter().all(|s| s.iterations <= 2));
    assert!(rep.profit.is_finite());
}

#[test]
fn negative_stock_optimum_is_flagged() {
    // holding is so expensive that the unconstrained plan runs a deficit
    let mut model = ModelInstance::baseline(0.02).unwrap();
    model.holding.a = 400.0;
    let rep = optimize(&model, &TranscriptionSettings::default()).unwrap();
    assert!(rep.trajectory.min_state() < -1e-3);
    assert!(!rep.feasible);
}
