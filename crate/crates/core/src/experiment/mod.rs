//! Runs, sweeps, comparisons and reproduction of the reference tables.

pub mod config;
pub mod csvio;
pub mod reference;

use rayon::prelude::*;

use crate::analytic::{Model1aCoefficients, Model1bCoefficients};
use crate::bvp::{solve_bvp, GridSpec, NewtonSettings};
use crate::error::Result;
use crate::model::{ModelInstance, Trajectory, TOL_FEAS};
use crate::transcription::{optimize, TranscriptionSettings};

pub use config::{parse_config, RunConfig, SolverKind, SweepSpec};

/// Largest acceptable dynamics residual on a grid of step `h`.
pub fn dynamics_bound(step: f64) -> f64 {
    100.0 * step * step
}

/// Bound for a transcribed plan. The sampled control keeps a kink of about
/// `h u' / 2` at each end of the horizon, so the central-difference residual
/// there is first order; `h / 4` times the steepest control slope covers it.
pub fn transcription_dynamics_bound(step: f64, u: &[f64]) -> f64 {
    let slope = u.windows(3).map(|w| (w[2] - w[0]).abs() / (2.0 * step)).fold(0.0, f64::max);
    dynamics_bound(step) + 0.25 * step * slope
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub solver: SolverKind,
    pub profit: f64,
    pub converged: bool,
    pub feasible: bool,
    pub max_dynamics_residual: f64,
    pub dynamics_bound: f64,
    pub iterations: usize,
    /// Solver-specific `(key, value)` diagnostics.
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl RunSummary {
    /// Converged, feasible and consistent with the dynamics.
    pub fn ok(&self) -> bool {
        self.converged && self.feasible && self.max_dynamics_residual <= self.dynamics_bound
    }

    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("solver".to_string(), self.solver.to_string()),
            ("profit".to_string(), format!("{:.6}", self.profit)),
            ("converged".to_string(), self.converged.to_string()),
            ("feasible".to_string(), self.feasible.to_string()),
            ("max_dynamics_residual".to_string(), format!("{:.6e}", self.max_dynamics_residual)),
            ("dynamics_bound".to_string(), format!("{:.6e}", self.dynamics_bound)),
            ("iterations".to_string(), self.iterations.to_string()),
        ];
        rows.extend(self.diagnostics.iter().map(|(k, v)| (k.to_string(), format!("{v:.6e}"))));
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Solution on the full grid.
    pub trajectory: Trajectory,
    /// Samples at integer report times `0, 1, ..` (plus `T`).
    pub report: Trajectory,
    pub summary: RunSummary,
}

/// `0, 1, 2, ..` up to the horizon, with `T` appended when it is fractional.
pub fn report_times(horizon: f64) -> Vec<f64> {
    let whole = (horizon + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=whole).map(|k| k as f64).collect();
    if horizon - whole as f64 > 1e-9 {
        times.push(horizon);
    }
    times
}

fn sampled_at(model: &ModelInstance, times: Vec<f64>, x: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> Result<Trajectory> {
    let xs = times.iter().map(|&t| x(t)).collect();
    let us = times.iter().map(|&t| u(t)).collect();
    let ds = times.iter().map(|&t| model.demand.at(t)).collect();
    Trajectory::new(times, xs, us, ds)
}

fn interpolated_report(model: &ModelInstance, traj: &Trajectory) -> Result<Trajectory> {
    let times = report_times(model.horizon);
    let (mut xs, mut us) = (Vec::new(), Vec::new());
    for &t in &times {
        let (x, u, _) = traj.interpolate(t);
        xs.push(x);
        us.push(u);
    }
    let ds = times.iter().map(|&t| model.demand.at(t)).collect();
    Trajectory::new(times, xs, us, ds)
}

/// Solves `model` with `solver` on `grid` uniform intervals.
pub fn solve(model: &ModelInstance, solver: SolverKind, grid: usize) -> Result<RunOutcome> {
    solver.check_compatible(model)?;
    let step = model.horizon / grid as f64;
    let (trajectory, report, profit, converged, feasible, iterations, diagnostics) = match solver {
        SolverKind::Analytic1a => {
            let c = Model1aCoefficients::new(model)?;
            let x = |t| c.state(model, t);
            let u = |t| c.control(model, t);
            let traj = Trajectory::sample(model, grid, x, u)?;
            let report = sampled_at(model, report_times(model.horizon), x, u)?;
            let feasible = traj.is_feasible(TOL_FEAS);
            let quadrature = model.profit_of_trajectory(&traj)?;
            (traj, report, c.profit(model), true, feasible, 0, vec![("quadrature_profit", quadrature)])
        }
        SolverKind::Analytic1b => {
            let c = Model1bCoefficients::new(model)?;
            let x = |t| c.state(model, t);
            let u = |t| c.control(model, t);
            let traj = Trajectory::sample(model, grid, x, u)?;
            let report = sampled_at(model, report_times(model.horizon), x, u)?;
            let feasible = traj.is_feasible(TOL_FEAS);
            let quadrature = model.profit_of_trajectory(&traj)?;
            (traj, report, c.profit(model), true, feasible, 0, vec![("quadrature_profit", quadrature)])
        }
        SolverKind::Bvp => {
            let sol = solve_bvp(model, GridSpec::for_model(model, grid)?, NewtonSettings::default())?;
            let profit = model.profit_of_trajectory(&sol.trajectory)?;
            let report = interpolated_report(model, &sol.trajectory)?;
            let diag = vec![
                ("final_residual", sol.final_residual),
                ("regularized", sol.regularized as u8 as f64),
            ];
            (sol.trajectory, report, profit, sol.converged, sol.feasible, sol.iterations, diag)
        }
        SolverKind::Transcription => {
            let settings = TranscriptionSettings {
                intervals: grid,
                ..TranscriptionSettings::default()
            };
            let rep = optimize(model, &settings)?;
            let report = interpolated_report(model, &rep.trajectory)?;
            let diag = vec![
                ("terminal_violation", rep.terminal_violation),
                ("projected_gradient_norm", rep.projected_gradient_norm),
                ("initial_projected_gradient_norm", rep.initial_projected_gradient_norm),
            ];
            (rep.trajectory, report, rep.profit, rep.converged, rep.feasible, rep.iterations, diag)
        }
    };
    let max_dynamics_residual = model.dynamics_residual(&trajectory).unwrap_or(f64::INFINITY);
    let bound = match solver {
        SolverKind::Transcription => transcription_dynamics_bound(step, &trajectory.u),
        _ => dynamics_bound(step),
    };
    Ok(RunOutcome {
        trajectory,
        report,
        summary: RunSummary {
            solver,
            profit,
            converged,
            feasible,
            max_dynamics_residual,
            dynamics_bound: bound,
            iterations,
            diagnostics,
        },
    })
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    solve(&config.model, config.solver, config.grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub profit: f64,
    pub ok: bool,
}

/// Runs the configured solver for every sweep value, in parallel; rows come
/// back ordered by value.
pub fn sweep(config: &RunConfig, spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    let values = spec.values();
    values
        .par_iter()
        .map(|&value| {
            let mut model = config.model;
            config::set_param(&mut model, &spec.param, value)?;
            model.validate()?;
            let out = solve(&model, config.solver, config.grid)?;
            Ok(SweepPoint {
                value,
                profit: out.summary.profit,
                ok: out.summary.ok(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub x_a: f64,
    pub x_b: f64,
    pub u_a: f64,
    pub u_b: f64,
}

/// Pairs two runs sample by sample. Both must share horizon and grid.
pub fn compare(a: &RunConfig, b: &RunConfig, full_grid: bool) -> Result<(Vec<ComparisonRow>, RunOutcome, RunOutcome)> {
    if (a.model.horizon - b.model.horizon).abs() > 1e-12 || a.grid != b.grid {
        return Err(crate::Error::InvalidParameter {
            name: "T",
            reason: "compared runs must share horizon and grid".into(),
        });
    }
    let (ra, rb) = rayon::join(|| run(a), || run(b));
    let (ra, rb) = (ra?, rb?);
    let (ta, tb) = if full_grid {
        (&ra.trajectory, &rb.trajectory)
    } else {
        (&ra.report, &rb.report)
    };
    let rows = ta
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| ComparisonRow {
            t,
            x_a: ta.x[i],
            x_b: tb.x[i],
            u_a: ta.u[i],
            u_b: tb.u[i],
        })
        .collect();
    Ok((rows, ra, rb))
}
