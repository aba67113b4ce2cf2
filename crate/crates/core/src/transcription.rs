//! Direct transcription: optimize sampled production rates.
//!
//! The control is sampled on a uniform grid, the stock is integrated forward
//! with the trapezoidal rule, and the discretized profit is maximized over
//! `u >= 0` with gradients from the discrete adjoint of the stepper. The
//! terminal condition `x(T) = 0` is imposed by a quadratic penalty whose
//! weight increases stage by stage.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{uniform_grid, ModelInstance, Trajectory, TOL_FEAS};
use crate::quadrature;

/// Converged plans must end within this distance of empty stock.
pub const TERMINAL_TOL: f64 = 1e-3;

/// Stock below `-PATH_TOL` marks an optimized plan infeasible.
pub const PATH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Step contraction per rejected trial.
    pub shrink: f64,
    /// Sufficient-increase constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptionSettings {
    pub intervals: usize,
    /// Iteration cap per penalty stage.
    pub max_iters: usize,
    /// Projected-gradient norm at which a stage stops. With the largest
    /// penalty the objective stops resolving changes below about 4e-4.
    pub grad_tol: f64,
    /// Strictly increasing terminal penalty weights.
    pub penalty_schedule: Vec<f64>,
    pub line_search: LineSearch,
    /// Number of curvature pairs kept for the quasi-Newton direction.
    pub memory: usize,
}

impl Default for TranscriptionSettings {
    fn default() -> Self {
        Self {
            intervals: 1200,
            max_iters: 2000,
            grad_tol: 1e-3,
            penalty_schedule: vec![1e1, 1e3, 1e5, 1e7],
            line_search: LineSearch::default(),
            memory: 12,
        }
    }
}

impl TranscriptionSettings {
    fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.intervals < 8 {
            return bad("intervals", "need at least 8 intervals");
        }
        if !self.intervals.is_multiple_of(2) {
            return Err(Error::OddIntervals(self.intervals));
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol", "must be positive");
        }
        if self.penalty_schedule.is_empty()
            || self.penalty_schedule[0] <= 0.0
            || self.penalty_schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("penalty_schedule", "must be positive and strictly increasing");
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) || !(ls.armijo > 0.0 && ls.armijo < 1.0) {
            return bad("line_search", "shrink and armijo must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub penalty: f64,
    pub iterations: usize,
    pub terminal_violation: f64,
    pub projected_gradient_norm: f64,
    pub converged: bool,
    /// Penalized objective after each accepted step, starting value first.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub trajectory: Trajectory,
    /// Simpson profit of the final plan, without penalty.
    pub profit: f64,
    /// `|x(T)|`.
    pub terminal_violation: f64,
    pub projected_gradient_norm: f64,
    /// Projected gradient norm at the initial guess under the first penalty.
    pub initial_projected_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Stock stayed above `-PATH_TOL` along the plan.
    pub feasible: bool,
    pub stages: Vec<StageReport>,
}

/// Stock samples from [`simulate_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub x: Vec<f64>,
    /// Stock dropped below `-TOL_FEAS`; breakage was clamped to zero there.
    pub below_floor: bool,
}

fn check_controls(model: &ModelInstance, u: &[f64]) -> Result<f64> {
    let m = u.len().saturating_sub(1);
    if m < 2 {
        return Err(Error::GridTooSmall(u.len()));
    }
    if let Some(i) = u.iter().position(|v| !(*v >= -TOL_FEAS)) {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: format!("production rate {} at node {i} is negative", u[i]),
        });
    }
    Ok(model.horizon / m as f64)
}

/// Integrates `x' = u - d(t) - B(x)` from `x(0) = 0` with the trapezoidal rule.
///
/// Each step solves `y + (h/2) B(y) = r` for the new stock; breakage is taken
/// as zero for negative stock.
pub fn simulate_forward(model: &ModelInstance, u: &[f64]) -> Result<ForwardState> {
    let h = check_controls(model, u)?;
    let times = uniform_grid(model.horizon, u.len() - 1);
    let law = model.breakage;
    let half = 0.5 * h;
    let mut x = vec![0.0; u.len()];
    let mut below_floor = false;
    for i in 0..u.len() - 1 {
        let explicit = u[i] - model.demand.at(times[i]) - law.rate(x[i]);
        let r = x[i] + half * (explicit + u[i + 1] - model.demand.at(times[i + 1]));
        let y = solve_step(half * law.b1, law.gamma, r);
        below_floor |= y < -TOL_FEAS;
        x[i + 1] = y;
    }
    Ok(ForwardState { x, below_floor })
}

/// Root of `y + c max(y, 0)^gamma = r`.
fn solve_step(c: f64, gamma: f64, r: f64) -> f64 {
    if c == 0.0 || r <= 0.0 {
        return r;
    }
    if gamma == 1.0 {
        return r / (1.0 + c);
    }
    // g is increasing with g(0) < 0 < g(r); safeguarded Newton on [0, r]
    let (mut lo, mut hi) = (0.0, r);
    let mut y = r / (1.0 + c * r.powf(gamma - 1.0));
    for _ in 0..100 {
        let g = y + c * y.powf(gamma) - r;
        if g.abs() <= 1e-15 * r {
            break;
        }
        if g > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let dg = 1.0 + c * gamma * y.powf(gamma - 1.0);
        let next = y - g / dg;
        y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * r {
            break;
        }
    }
    y
}

struct Evaluation {
    objective: f64,
    x: Vec<f64>,
    gradient: Option<Vec<f64>>,
}

/// Penalized discrete objective and optionally its exact gradient.
///
/// The profit is summed with trapezoid weights, matching the stepper; a
/// Simpson-weighted control cost would make the discrete optimum alternate
/// between odd and even nodes.
fn evaluate(model: &ModelInstance, u: &[f64], penalty: f64, with_gradient: bool) -> Result<Evaluation> {
    let state = simulate_forward(model, u)?;
    let m = u.len() - 1;
    let h = model.horizon / m as f64;
    let times = uniform_grid(model.horizon, m);
    let w = quadrature::trapezoid_weights(m, h);
    let x = state.x;
    let objective = (0..=m)
        .map(|i| w[i] * model.profit_integrand(times[i], x[i], u[i]))
        .sum::<f64>()
        - penalty * x[m] * x[m];
    if !with_gradient {
        return Ok(Evaluation {
            objective,
            x,
            gradient: None,
        });
    }

    // Backward sweep over the trapezoid residuals
    //   R_i = x_{i+1} - x_i - h/2 (f_i + f_{i+1}),  f = u - d - B(x).
    let half = 0.5 * h;
    let law = model.breakage;
    let mut lambda = vec![0.0; m + 1];
    let slope_m = law.slope(x[m]);
    lambda[m] = (-w[m] * model.holding.at(times[m]) - 2.0 * penalty * x[m]) / (1.0 + half * slope_m);
    for j in (1..m).rev() {
        let s = law.slope(x[j]);
        lambda[j] = (lambda[j + 1] * (1.0 - half * s) - w[j] * model.holding.at(times[j])) / (1.0 + half * s);
    }
    let c11 = model.econ.linear_cost(model.horizon);
    let beta = model.econ.beta10;
    let gradient = (0..=m)
        .map(|j| {
            let mut g = -w[j] * (c11 + 2.0 * beta * u[j]);
            if j < m {
                g += half * lambda[j + 1];
            }
            if j > 0 {
                g += half * lambda[j];
            }
            g
        })
        .collect();
    Ok(Evaluation {
        objective,
        x,
        gradient: Some(gradient),
    })
}

/// `objective(u_new) - objective(u_old)` formed from the stock and control
/// differences, so that changes far below the objective's rounding level
/// still resolve.
fn objective_change(
    model: &ModelInstance,
    (u_old, x_old): (&[f64], &[f64]),
    (u_new, x_new): (&[f64], &[f64]),
    penalty: f64,
) -> f64 {
    let m = u_old.len() - 1;
    let h = model.horizon / m as f64;
    let times = uniform_grid(model.horizon, m);
    let w = quadrature::trapezoid_weights(m, h);
    let c11 = model.econ.linear_cost(model.horizon);
    let beta = model.econ.beta10;
    let profit: f64 = (0..=m)
        .map(|i| {
            let du = u_new[i] - u_old[i];
            let dx = x_new[i] - x_old[i];
            w[i] * (-model.holding.at(times[i]) * dx - du * (c11 + beta * (u_new[i] + u_old[i])))
        })
        .sum();
    profit - penalty * (x_new[m] - x_old[m]) * (x_new[m] + x_old[m])
}

/// Discretized profit minus `penalty * x(T)^2`.
pub fn objective(model: &ModelInstance, u: &[f64], penalty: f64) -> Result<f64> {
    Ok(evaluate(model, u, penalty, false)?.objective)
}

/// Exact gradient of [`objective`] with respect to every control sample.
pub fn gradient(model: &ModelInstance, u: &[f64], penalty: f64) -> Result<Vec<f64>> {
    Ok(evaluate(model, u, penalty, true)?.gradient.unwrap())
}

/// Clamps every sample to `u >= 0`.
pub fn project(u: &mut [f64]) {
    for v in u {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Ascent components that stay feasible: a sample at the bound with a
/// negative gradient contributes nothing.
pub fn projected_gradient(u: &[f64], g: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(g)
        .map(|(&ui, &gi)| if ui <= 0.0 && gi < 0.0 { 0.0 } else { gi })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion; `pairs` holds `(s, y)` with `y = g_old - g_new`.
fn quasi_newton_direction(pairs: &VecDeque<(Vec<f64>, Vec<f64>)>, g: &[f64], free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> {
        v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect()
    };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let (s, y) = (mask(s), mask(y));
        let rho = 1.0 / dot(&y, &s);
        let a = rho * dot(&s, &q);
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho, s, y));
    }
    if let Some((s, y)) = pairs.back() {
        let (s, y) = (mask(s), mask(y));
        let scale = dot(&s, &y) / dot(&y, &y);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for (a, rho, s, y) in alphas.into_iter().rev() {
        let b = rho * dot(&y, &q);
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += (a - b) * si;
        }
    }
    mask(&q)
}

/// Accepted iterate, the step actually taken, its evaluation and the
/// objective gain.
type Accepted = (Vec<f64>, Vec<f64>, Evaluation, f64);

/// Projected Armijo backtracking along `dir`; `None` when no step is accepted.
fn line_search(
    model: &ModelInstance,
    u: &[f64],
    dir: &[f64],
    g: &[f64],
    current: &Evaluation,
    penalty: f64,
    ls: LineSearch,
) -> Result<Option<Accepted>> {
    let mut step = 1.0;
    for _ in 0..=ls.max_backtracks {
        let mut trial: Vec<f64> = u.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        project(&mut trial);
        let moved: Vec<f64> = trial.iter().zip(u).map(|(a, b)| a - b).collect();
        let eval = evaluate(model, &trial, penalty, true)?;
        let gain = objective_change(model, (u, &current.x), (&trial, &eval.x), penalty);
        let predicted = dot(g, &moved);
        if predicted > 0.0 && gain > 0.0 && gain >= ls.armijo * predicted {
            return Ok(Some((trial, moved, eval, gain)));
        }
        step *= ls.shrink;
    }
    Ok(None)
}

struct StageOutcome {
    u: Vec<f64>,
    report: StageReport,
    initial_pg: f64,
}

fn run_stage(
    model: &ModelInstance,
    mut u: Vec<f64>,
    penalty: f64,
    settings: &TranscriptionSettings,
) -> Result<StageOutcome> {
    let ls = settings.line_search;
    let mut current = evaluate(model, &u, penalty, true)?;
    let mut g = current.gradient.take().unwrap();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut trace = vec![current.objective];
    let initial_pg = norm(&projected_gradient(&u, &g));
    let mut pg_norm = initial_pg;
    let mut iterations = 0;
    let mut converged = pg_norm <= settings.grad_tol;

    while !converged && iterations < settings.max_iters {
        let free: Vec<bool> = u.iter().zip(&g).map(|(&ui, &gi)| !(ui <= 0.0 && gi < 0.0)).collect();
        let pg = projected_gradient(&u, &g);
        let mut dir = if pairs.is_empty() {
            let scale = pg.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            pg.iter().map(|v| v / scale).collect()
        } else {
            quasi_newton_direction(&pairs, &g, &free)
        };
        if dot(&dir, &pg) <= 0.0 {
            pairs.clear();
            let scale = pg.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            dir = pg.iter().map(|v| v / scale).collect();
        }

        let mut accepted = line_search(model, &u, &dir, &g, &current, penalty, ls)?;
        if accepted.is_none() && !pairs.is_empty() {
            // stale curvature pairs; restart from the scaled gradient
            pairs.clear();
            let scale = pg.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            dir = pg.iter().map(|v| v / scale).collect();
            accepted = line_search(model, &u, &dir, &g, &current, penalty, ls)?;
        }
        let Some((trial, moved, mut eval, gain)) = accepted else {
            break;
        };
        let g_new = eval.gradient.take().unwrap();
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        if dot(&moved, &y) > 1e-12 * norm(&moved) * norm(&y) {
            pairs.push_back((moved, y));
            if pairs.len() > settings.memory {
                pairs.pop_front();
            }
        }
        u = trial;
        g = g_new;
        current = eval;
        trace.push(trace.last().unwrap() + gain);
        iterations += 1;
        pg_norm = norm(&projected_gradient(&u, &g));
        converged = pg_norm <= settings.grad_tol;
    }

    let terminal_violation = current.x.last().unwrap().abs();
    Ok(StageOutcome {
        u,
        report: StageReport {
            penalty,
            iterations,
            terminal_violation,
            projected_gradient_norm: pg_norm,
            converged,
            objective_trace: trace,
        },
        initial_pg,
    })
}

/// Maximizes the discretized profit over `u >= 0`, starting from `u = d(t)`
/// and warm-starting each penalty stage from the previous one.
pub fn optimize(model: &ModelInstance, settings: &TranscriptionSettings) -> Result<OptimizationReport> {
    model.validate()?;
    settings.validate()?;
    let times = uniform_grid(model.horizon, settings.intervals);
    let mut u: Vec<f64> = times.iter().map(|&t| model.demand.at(t)).collect();
    let mut stages = Vec::with_capacity(settings.penalty_schedule.len());
    let mut initial_pg = None;
    for &penalty in &settings.penalty_schedule {
        let outcome = run_stage(model, u, penalty, settings)?;
        initial_pg.get_or_insert(outcome.initial_pg);
        u = outcome.u;
        stages.push(outcome.report);
    }

    let state = simulate_forward(model, &u)?;
    let d = times.iter().map(|&t| model.demand.at(t)).collect();
    let trajectory = Trajectory::new(times, state.x, u, d)?;
    let profit = model.profit_of_trajectory(&trajectory)?;
    let last = stages.last().unwrap();
    let terminal_violation = last.terminal_violation;
    let feasible = trajectory.min_state() >= -PATH_TOL;
    Ok(OptimizationReport {
        profit,
        terminal_violation,
        projected_gradient_norm: last.projected_gradient_norm,
        initial_projected_gradient_norm: initial_pg.unwrap(),
        iterations: stages.iter().map(|s| s.iterations).sum(),
        converged: last.converged && terminal_violation <= TERMINAL_TOL,
        feasible,
        stages,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{Model1aCoefficients, Model1bCoefficients};

    fn samples(model: &ModelInstance, m: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        uniform_grid(model.horizon, m).into_iter().map(f).collect()
    }

    #[test]
    fn steady_plan_keeps_stock_empty() {
        for (b1, gamma) in [(0.02, 1.0), (0.3, 2.0), (0.05, 0.5)] {
            let mut m = ModelInstance::baseline(b1).unwrap();
            m.breakage.gamma = gamma;
            let u = samples(&m, 240, |t| m.demand.at(t));
            let st = simulate_forward(&m, &u).unwrap();
            assert!(st.x.iter().all(|x| x.abs() < 1e-9));
            assert!(!st.below_floor);
        }
    }

    #[test]
    fn forward_state_tracks_closed_forms() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let c = Model1aCoefficients::new(&m).unwrap();
        let u = samples(&m, 1200, |t| c.control(&m, t));
        let st = simulate_forward(&m, &u).unwrap();
        let times = uniform_grid(12.0, 1200);
        let err = times.iter().zip(&st.x).map(|(&t, x)| (x - c.state(&m, t)).abs()).fold(0.0, f64::max);
        assert!(err < 0.1, "{err}");

        let m0 = ModelInstance::baseline(0.0).unwrap();
        let c0 = Model1bCoefficients::new(&m0).unwrap();
        let u = samples(&m0, 1200, |t| c0.control(&m0, t));
        let st = simulate_forward(&m0, &u).unwrap();
        let err = times.iter().zip(&st.x).map(|(&t, x)| (x - c0.state(&m0, t)).abs()).fold(0.0, f64::max);
        // trapezoid on a quadratic rate: global error T h^2 |(u - d)''| / 12 = 3.8e-4
        assert!(err < 4e-4, "{err}");
    }

    #[test]
    fn idle_plan_is_flagged() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let u = vec![0.0; 121];
        let st = simulate_forward(&m, &u).unwrap();
        assert!(st.below_floor);
        assert!(*st.x.last().unwrap() < 0.0);
        assert!(objective(&m, &u, 10.0).unwrap().is_finite());
        assert!(simulate_forward(&m, &[1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn objective_on_closed_form_plan() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let c = Model1aCoefficients::new(&m).unwrap();
        let u = samples(&m, 1200, |t| c.control(&m, t));
        let j = objective(&m, &u, 1e5).unwrap();
        assert!((j / 180913.30 - 1.0).abs() < 0.01);
    }

    #[test]
    fn objective_is_affine_in_price() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let u = samples(&m, 240, |t| 80.0 + 5.0 * t);
        let mut rich = m;
        rich.econ.price *= 2.0;
        let gain = objective(&rich, &u, 10.0).unwrap() - objective(&m, &u, 10.0).unwrap();
        // trapezoid sum of p d(t)
        let w = quadrature::trapezoid_weights(240, 0.05);
        let expected: f64 = uniform_grid(12.0, 240).iter().zip(&w).map(|(&t, w)| w * 200.0 * m.demand.at(t)).sum();
        assert!((gain - expected).abs() < 1e-8 * expected);
    }

    #[test]
    fn solve_step_roots() {
        for (c, gamma, r) in [(0.01, 2.0, 50.0), (0.3, 0.5, 2.0), (1e-4, 3.0, 400.0)] {
            let y: f64 = solve_step(c, gamma, r);
            assert!((y + c * y.powf(gamma) - r).abs() < 1e-12 * r);
        }
        assert_eq!(solve_step(0.1, 2.0, -3.0), -3.0);
    }

    #[test]
    fn gradient_quadratic_cost_structure() {
        // with lambda frozen, raising u_j by du lowers dJ/du_j by 2 beta10 du w_j
        let m = ModelInstance::baseline(0.0).unwrap();
        let mut u = samples(&m, 120, |t| 100.0 + t);
        let j = 37;
        let g0 = gradient(&m, &u, 0.0).unwrap();
        u[j] += 2.0;
        let g1 = gradient(&m, &u, 0.0).unwrap();
        // b1 = 0 and zero penalty: lambda does not depend on u
        let expected = 2.0 * 0.5 * 2.0 * 0.1;
        assert!(((g0[j] - g1[j]) - expected).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let mut u = vec![-1.0, 0.0, 2.0, -0.5, 3.0];
        project(&mut u);
        let once = u.clone();
        project(&mut u);
        assert_eq!(u, once);
        assert_eq!(once, vec![0.0, 0.0, 2.0, 0.0, 3.0]);
        assert_eq!(projected_gradient(&[0.0, 0.0, 1.0], &[-1.0, 1.0, -1.0]), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn settings_validation() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let mut s = TranscriptionSettings {
            penalty_schedule: vec![10.0, 10.0],
            ..Default::default()
        };
        assert!(optimize(&m, &s).is_err());
        s.penalty_schedule = vec![10.0];
        s.intervals = 6;
        assert!(optimize(&m, &s).is_err());
    }

    #[test]
    fn objective_change_matches_difference() {
        for (b1, gamma) in [(0.02, 1.0), (0.001, 2.0)] {
            let mut m = ModelInstance::baseline(b1).unwrap();
            m.breakage.gamma = gamma;
            let times = uniform_grid(12.0, 240);
            let a: Vec<f64> = times.iter().map(|&t| m.demand.at(t) + 20.0).collect();
            let b: Vec<f64> = times.iter().map(|&t| m.demand.at(t) + 25.0 + t).collect();
            let (ea, eb) = (evaluate(&m, &a, 1e3, false).unwrap(), evaluate(&m, &b, 1e3, false).unwrap());
            let d = objective_change(&m, (&a, &ea.x), (&b, &eb.x), 1e3);
            assert!((d - (eb.objective - ea.objective)).abs() < 1e-6 * d.abs());
        }
    }
}
