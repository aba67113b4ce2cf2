//! Finite-difference Newton solver for the general Euler-Lagrange extremal.
//!
//! For arbitrary `gamma > 0` and `n >= 0` the stock along an extremal obeys
//!
//! ```text
//! x'' = b1^2 gamma x^(2 gamma - 1)
//!     + b1 gamma x^(gamma - 1) (c10 + s2/T + 2 beta10 d(t)) / (2 beta10)
//!     + (h(t) - 2 beta10 d'(t)) / (2 beta10)
//! ```
//!
//! with `x(0) = x(T) = 0`. The interior nodes of a uniform grid are solved
//! with central differences and a damped Newton iteration on the tridiagonal
//! Jacobian; the production rate is recovered afterwards from the dynamics.

use crate::analytic::Model1bCoefficients;
use crate::error::{Error, Result};
use crate::model::{uniform_grid, ModelInstance, Trajectory};

/// Stock below `-STOCK_FLOOR_TOL` in a solution marks it infeasible.
pub const STOCK_FLOOR_TOL: f64 = 1e-6;

const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub intervals: usize,
    pub horizon: f64,
}

impl GridSpec {
    pub fn new(intervals: usize, horizon: f64) -> Result<Self> {
        if intervals < 8 {
            return Err(Error::InvalidParameter {
                name: "intervals",
                reason: format!("need at least 8 intervals, got {intervals}"),
            });
        }
        if !intervals.is_multiple_of(2) {
            return Err(Error::OddIntervals(intervals));
        }
        if !(horizon > 0.0) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok(Self { intervals, horizon })
    }

    pub fn for_model(model: &ModelInstance, intervals: usize) -> Result<Self> {
        Self::new(intervals, model.horizon)
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iters: usize,
    /// Max-norm bound on the discrete residual, units/time^2.
    pub residual_tol: f64,
    /// Initial step fraction for each Newton update.
    pub damping: f64,
    /// Floor applied to `x` inside `x^(gamma-1)`.
    pub regularization_eps: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iters: 50,
            residual_tol: 1e-8,
            damping: 1.0,
            regularization_eps: 1e-6,
        }
    }
}

impl NewtonSettings {
    fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "residual_tol",
                reason: "must be positive".into(),
            });
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: "must lie in (0, 1]".into(),
            });
        }
        if !(self.regularization_eps >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "regularization_eps",
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    pub trajectory: Trajectory,
    pub final_residual: f64,
    pub iterations: usize,
    /// Residual below tolerance and the solution is feasible.
    pub converged: bool,
    /// No stock below `-STOCK_FLOOR_TOL` and no negative production.
    pub feasible: bool,
    /// The stock floor was applied somewhere in the final residual.
    pub regularized: bool,
}

/// Right-hand side `x'' = G(t, x)` and `dG/dx`.
struct Forcing<'a> {
    model: &'a ModelInstance,
    floor: f64,
}

struct Eval {
    value: f64,
    slope: f64,
    clamped: bool,
}

impl<'a> Forcing<'a> {
    fn new(model: &'a ModelInstance, floor: f64) -> Self {
        Self { model, floor }
    }

    fn eval(&self, t: f64, x: f64) -> Result<Eval> {
        let m = self.model;
        let (b1, gamma) = (m.breakage.b1, m.breakage.gamma);
        let beta = m.econ.beta10;
        let drift = (m.holding.at(t) - 2.0 * beta * m.demand.slope(t)) / (2.0 * beta);
        if b1 == 0.0 {
            return Ok(Eval {
                value: drift,
                slope: 0.0,
                clamped: false,
            });
        }
        let needs_floor = x < 0.0 || (gamma < 1.0 && x < self.floor);
        let xe = if needs_floor { self.floor } else { x };
        if gamma < 1.0 && xe <= 0.0 {
            return Err(Error::Singularity { t, x });
        }
        let coupling = (m.econ.linear_cost(m.horizon) + 2.0 * beta * m.demand.at(t)) / (2.0 * beta);
        let value = b1 * b1 * gamma * xe.powf(2.0 * gamma - 1.0)
            + b1 * gamma * xe.powf(gamma - 1.0) * coupling
            + drift;
        let slope = if needs_floor {
            0.0
        } else {
            let quad = b1 * b1 * gamma * (2.0 * gamma - 1.0) * pow_or_zero(xe, 2.0 * gamma - 2.0);
            let lin = if gamma == 1.0 {
                0.0
            } else {
                b1 * gamma * (gamma - 1.0) * xe.powf(gamma - 2.0) * coupling
            };
            quad + lin
        };
        Ok(Eval {
            value,
            slope,
            clamped: needs_floor,
        })
    }
}

fn pow_or_zero(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

/// Euler-Lagrange residual at one point; zero along an extremal.
///
/// `regularization_eps` floors `x` inside `x^(gamma-1)` when `gamma < 1` and
/// replaces negative `x` for any `gamma`.
pub fn el_residual(
    model: &ModelInstance,
    t: f64,
    x: f64,
    xdd: f64,
    regularization_eps: f64,
) -> Result<f64> {
    Ok(xdd - Forcing::new(model, regularization_eps).eval(t, x)?.value)
}

struct Residual {
    values: Vec<f64>,
    norm: f64,
    clamped: bool,
}

fn discrete_residual(forcing: &Forcing, times: &[f64], x: &[f64], h: f64) -> Result<Residual> {
    let m = x.len() - 1;
    let inv_h2 = 1.0 / (h * h);
    let mut values = vec![0.0; m - 1];
    let mut norm = 0.0_f64;
    let mut clamped = false;
    for i in 1..m {
        let g = forcing.eval(times[i], x[i])?;
        clamped |= g.clamped;
        let r = (x[i - 1] - 2.0 * x[i] + x[i + 1]) * inv_h2 - g.value;
        norm = norm.max(r.abs());
        values[i - 1] = r;
    }
    Ok(Residual {
        values,
        norm,
        clamped,
    })
}

/// Solves `sub[i] y[i-1] + diag[i] y[i] + sup[i] y[i+1] = rhs[i]` in place.
fn solve_tridiagonal(
    sub: &[f64],
    diag: &mut [f64],
    sup: &[f64],
    rhs: &mut [f64],
    iteration: usize,
) -> Result<()> {
    let n = diag.len();
    for i in 0..n {
        if i > 0 {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        if diag[i] == 0.0 || !diag[i].is_finite() {
            return Err(Error::SingularJacobian { iteration, row: i });
        }
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Solves the extremal on `grid` starting from the no-breakage cubic.
pub fn solve_bvp(model: &ModelInstance, grid: GridSpec, settings: NewtonSettings) -> Result<BvpSolution> {
    model.validate()?;
    settings.validate()?;
    if (grid.horizon - model.horizon).abs() > 1e-12 * model.horizon {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("grid horizon {} differs from model {}", grid.horizon, model.horizon),
        });
    }
    let m = grid.intervals;
    let h = grid.step();
    let times = uniform_grid(model.horizon, m);
    let guess = Model1bCoefficients::fit(model);
    let mut x: Vec<f64> = times.iter().map(|&t| guess.state(model, t)).collect();
    x[0] = 0.0;
    x[m] = 0.0;

    let forcing = Forcing::new(model, settings.regularization_eps);
    let inv_h2 = 1.0 / (h * h);
    let mut res = discrete_residual(&forcing, &times, &x, h)?;
    let mut iterations = 0;
    let n = m - 1;
    let off = vec![inv_h2; n];

    while res.norm > settings.residual_tol && iterations < settings.max_iters {
        iterations += 1;
        let mut diag = Vec::with_capacity(n);
        for i in 1..m {
            diag.push(-2.0 * inv_h2 - forcing.eval(times[i], x[i])?.slope);
        }
        let mut delta: Vec<f64> = res.values.iter().map(|r| -r).collect();
        solve_tridiagonal(&off, &mut diag, &off, &mut delta, iterations)?;

        let mut step = settings.damping;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut trial = x.clone();
            for (xi, di) in trial[1..m].iter_mut().zip(&delta) {
                *xi += step * di;
            }
            let trial_res = discrete_residual(&forcing, &times, &trial, h)?;
            if trial_res.norm < res.norm {
                accepted = Some((trial, trial_res));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, trial_res)) => {
                x = trial;
                res = trial_res;
            }
            // no descent along the Newton direction: round-off floor or stall
            None => break,
        }
    }

    let trajectory = recover_trajectory(model, &times, &x, h)?;
    let min_x = trajectory.min_state();
    let min_u = trajectory.min_control();
    let feasible = min_x >= -STOCK_FLOOR_TOL && min_u >= -STOCK_FLOOR_TOL;
    Ok(BvpSolution {
        trajectory,
        final_residual: res.norm,
        iterations,
        converged: res.norm <= settings.residual_tol && feasible,
        feasible,
        regularized: res.clamped,
    })
}

/// `u = x' + d + B(x)` with second-order differences for `x'`.
fn recover_trajectory(model: &ModelInstance, times: &[f64], x: &[f64], h: f64) -> Result<Trajectory> {
    let m = x.len() - 1;
    let rate = |i: usize| -> f64 {
        if i == 0 {
            (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
        } else if i == m {
            (3.0 * x[m] - 4.0 * x[m - 1] + x[m - 2]) / (2.0 * h)
        } else {
            (x[i + 1] - x[i - 1]) / (2.0 * h)
        }
    };
    let d: Vec<f64> = times.iter().map(|&t| model.demand.at(t)).collect();
    let u = (0..=m)
        .map(|i| rate(i) + d[i] + model.breakage.rate(x[i].max(0.0)))
        .collect();
    Trajectory::new(times.to_vec(), x.to_vec(), u, d)
}

/// What the grid solutions are measured against.
pub enum Reference<'a> {
    /// Known exact stock profile.
    Exact(&'a dyn Fn(f64) -> f64),
    /// Solution on a finer grid whose node set contains every tested grid.
    FinestGrid(GridSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub intervals: Vec<usize>,
    /// Max-node stock error per grid.
    pub errors: Vec<f64>,
    /// Observed order between consecutive grids.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn mean_order(&self) -> f64 {
        self.orders.iter().sum::<f64>() / self.orders.len() as f64
    }

    pub fn is_monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    /// Error ratios `e(M) / e(2M)` between consecutive grids.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Solves on each grid and reports the max-node error and observed order.
pub fn grid_convergence(
    model: &ModelInstance,
    grids: &[GridSpec],
    reference: Reference<'_>,
    settings: NewtonSettings,
) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "grids",
            reason: format!("need at least 3 grids, got {}", grids.len()),
        });
    }
    let fine = match &reference {
        Reference::FinestGrid(spec) => Some((spec.intervals, solve_bvp(model, *spec, settings)?)),
        Reference::Exact(_) => None,
    };
    let mut errors = Vec::with_capacity(grids.len());
    for grid in grids {
        let sol = solve_bvp(model, *grid, settings)?;
        let traj = &sol.trajectory;
        let err = match (&reference, &fine) {
            (Reference::Exact(f), _) => traj
                .times
                .iter()
                .zip(&traj.x)
                .map(|(&t, &x)| (x - f(t)).abs())
                .fold(0.0, f64::max),
            (Reference::FinestGrid(_), Some((fine_m, fine_sol))) => {
                if fine_m % grid.intervals != 0 {
                    return Err(Error::InvalidParameter {
                        name: "grids",
                        reason: format!("{} intervals do not nest in {fine_m}", grid.intervals),
                    });
                }
                let stride = fine_m / grid.intervals;
                traj.x
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (x - fine_sol.trajectory.x[i * stride]).abs())
                    .fold(0.0, f64::max)
            }
            _ => unreachable!(),
        };
        errors.push(err);
    }
    let orders = grids
        .windows(2)
        .zip(errors.windows(2))
        .map(|(g, e)| (e[0] / e[1]).ln() / (g[1].intervals as f64 / g[0].intervals as f64).ln())
        .collect();
    Ok(ConvergenceReport {
        intervals: grids.iter().map(|g| g.intervals).collect(),
        errors,
        orders,
    })
}
