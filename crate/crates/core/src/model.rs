//! Model parameters, primitive rate functions and trajectory evaluation.
//!
//! A planning problem is a stock level `x(t)` driven by a production rate
//! `u(t)` against a quadratic demand `d(t)`, with stock lost to breakage at
//! rate `B(x) = b1 x^gamma`:
//!
//! ```text
//! x'(t) = u(t) - d(t) - B(x),    x(0) = x(T) = 0
//! ```
//!
//! The profit rate is revenue `p d(t)` minus holding cost `h(t) x`, total
//! production cost `c10 u + (N + L) + beta10 u^2` and set-up cost
//! `(s1 + s2 u) / T`.

use crate::error::{Error, Result};
use crate::quadrature;

/// Tolerance (units) for the `x >= 0`, `u >= 0` feasibility checks.
pub const TOL_FEAS: f64 = 1e-9;

/// Default number of uniform intervals used for evaluating trajectories.
pub const DEFAULT_INTERVALS: usize = 1200;

/// Quadratic demand `d(t) = d1 + d2 t + d3 t^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandPoly {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DemandPoly {
    pub fn at(&self, t: f64) -> f64 {
        self.d1 + self.d2 * t + self.d3 * t * t
    }

    /// `d'(t)`.
    pub fn slope(&self, t: f64) -> f64 {
        self.d2 + 2.0 * self.d3 * t
    }

    /// `int_0^T d(t) dt`.
    pub fn integral(&self, horizon: f64) -> f64 {
        let t = horizon;
        self.d1 * t + self.d2 * t * t / 2.0 + self.d3 * t * t * t / 3.0
    }

    /// Smallest value of the demand on `[0, horizon]`.
    fn min_on(&self, horizon: f64) -> f64 {
        let mut lo = self.at(0.0).min(self.at(horizon));
        if self.d3 != 0.0 {
            let vertex = -self.d2 / (2.0 * self.d3);
            if vertex > 0.0 && vertex < horizon {
                lo = lo.min(self.at(vertex));
            }
        }
        lo
    }
}

/// Holding cost per unit and time, `h(t) = a + b t^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldingCostLaw {
    pub a: f64,
    pub b: f64,
    pub n: f64,
}

impl HoldingCostLaw {
    /// `a + b t^n`, with `0^0 = 1`.
    pub fn at(&self, t: f64) -> f64 {
        // f64::powf already returns 1 for 0^0
        self.a + self.b * t.powf(self.n)
    }
}

/// Stock-dependent breakage rate `B(x) = b1 x^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakabilityLaw {
    pub b1: f64,
    pub gamma: f64,
}

impl BreakabilityLaw {
    /// Breakage rate at stock `x`.
    ///
    /// Stock in `[-TOL_FEAS, 0)` is treated as empty; anything lower is an
    /// infeasible state.
    pub fn at(&self, x: f64) -> Result<f64> {
        let x = feasible_stock(x)?;
        Ok(self.rate(x))
    }

    /// `dB/dx` of the rate extended by zero below empty stock.
    pub fn slope(&self, x: f64) -> f64 {
        if self.b1 == 0.0 || x <= 0.0 {
            0.0
        } else {
            self.b1 * self.gamma * x.powf(self.gamma - 1.0)
        }
    }

    /// Rate for a non-negative stock, without validation.
    pub(crate) fn rate(&self, x: f64) -> f64 {
        if self.b1 == 0.0 || x <= 0.0 {
            0.0
        } else {
            self.b1 * x.powf(self.gamma)
        }
    }
}

fn feasible_stock(x: f64) -> Result<f64> {
    if x.is_nan() || x < -TOL_FEAS {
        Err(Error::InfeasibleState(x))
    } else {
        Ok(x.max(0.0))
    }
}

/// Cost and price parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomicParams {
    /// Constant material cost per unit.
    pub c10: f64,
    /// Fixed labour and energy cost per unit time (`L`).
    pub labour: f64,
    /// Technology and design cost per unit time (`N`).
    pub technology: f64,
    /// Wear-tear coefficient; the production cost is quadratic in the rate.
    pub beta10: f64,
    /// Fixed part of the set-up cost.
    pub s1: f64,
    /// Rate-proportional part of the set-up cost.
    pub s2: f64,
    /// Selling price per unit.
    pub price: f64,
}

impl EconomicParams {
    /// Development cost `N + L`.
    pub fn development_cost(&self) -> f64 {
        self.technology + self.labour
    }

    /// Total production cost per unit time, `c10 u + (N + L) + beta10 u^2`.
    pub fn production_cost_rate(&self, u: f64) -> f64 {
        self.c10 * u + self.development_cost() + self.beta10 * u * u
    }

    /// Set-up cost per unit time, `(s1 + s2 u) / T`.
    pub fn setup_cost_rate(&self, u: f64, horizon: f64) -> Result<f64> {
        if !(horizon > 0.0) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok((self.s1 + self.s2 * u) / horizon)
    }

    /// Marginal cost coefficient `c10 + s2 / T` multiplying `u` in the profit.
    pub fn linear_cost(&self, horizon: f64) -> f64 {
        self.c10 + self.s2 / horizon
    }

    /// Rate-independent cost per unit time, `N + L + s1 / T`.
    pub fn fixed_cost_rate(&self, horizon: f64) -> f64 {
        self.development_cost() + self.s1 / horizon
    }
}

/// A fully parameterized planning problem with `x(0) = x(T) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInstance {
    pub demand: DemandPoly,
    pub holding: HoldingCostLaw,
    pub breakage: BreakabilityLaw,
    pub econ: EconomicParams,
    pub horizon: f64,
}

fn require(name: &'static str, ok: bool, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}

impl ModelInstance {
    pub fn new(
        demand: DemandPoly,
        holding: HoldingCostLaw,
        breakage: BreakabilityLaw,
        econ: EconomicParams,
        horizon: f64,
    ) -> Result<Self> {
        let model = Self {
            demand,
            holding,
            breakage,
            econ,
            horizon,
        };
        model.validate()?;
        Ok(model)
    }

    /// Twelve-period reference problem: demand `7 + 4t + 2t^2`, holding cost
    /// `3 + 0.2t`, linear breakage with coefficient `b1`, price 200.
    pub fn baseline(b1: f64) -> Result<Self> {
        Self::new(
            DemandPoly {
                d1: 7.0,
                d2: 4.0,
                d3: 2.0,
            },
            HoldingCostLaw {
                a: 3.0,
                b: 0.2,
                n: 1.0,
            },
            BreakabilityLaw { b1, gamma: 1.0 },
            EconomicParams {
                c10: 0.7,
                labour: 40.0,
                technology: 60.0,
                beta10: 0.5,
                s1: 10.0,
                s2: 3.0,
                price: 200.0,
            },
            12.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let t_end = self.horizon;
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::NonPositiveHorizon(t_end));
        }
        let finite = [
            ("d1", self.demand.d1),
            ("d2", self.demand.d2),
            ("d3", self.demand.d3),
            ("a", self.holding.a),
            ("b", self.holding.b),
            ("n", self.holding.n),
            ("b1", self.breakage.b1),
            ("gamma", self.breakage.gamma),
            ("c10", self.econ.c10),
            ("L", self.econ.labour),
            ("N", self.econ.technology),
            ("beta10", self.econ.beta10),
            ("s1", self.econ.s1),
            ("s2", self.econ.s2),
            ("p", self.econ.price),
        ];
        for (name, v) in finite {
            require(name, v.is_finite(), "must be finite")?;
        }
        require("a", self.holding.a > 0.0, "must be positive")?;
        require("n", self.holding.n >= 0.0, "must be non-negative")?;
        let h_lo = self.holding.at(0.0).min(self.holding.at(t_end));
        require("b", h_lo >= 0.0, "holding cost goes negative on [0, T]")?;
        require("b1", self.breakage.b1 >= 0.0, "must be non-negative")?;
        require("gamma", self.breakage.gamma > 0.0, "must be positive")?;
        let econ = [
            ("c10", self.econ.c10),
            ("L", self.econ.labour),
            ("N", self.econ.technology),
            ("s1", self.econ.s1),
            ("s2", self.econ.s2),
            ("p", self.econ.price),
        ];
        for (name, v) in econ {
            require(name, v >= 0.0, "must be non-negative")?;
        }
        require("beta10", self.econ.beta10 > 0.0, "must be positive")?;
        let d_lo = self.demand.min_on(t_end);
        require(
            "d1",
            d_lo >= 0.0,
            format!("demand drops to {d_lo} on [0, T]"),
        )?;
        Ok(())
    }

    /// Stock derivative `u - d(t) - B(x)`.
    pub fn state_rhs(&self, t: f64, x: f64, u: f64) -> Result<f64> {
        Ok(u - self.demand.at(t) - self.breakage.at(x)?)
    }

    /// Production rate that yields stock derivative `xdot`: `xdot + d(t) + B(x)`.
    pub fn recover_control(&self, t: f64, x: f64, xdot: f64) -> Result<f64> {
        Ok(xdot + self.demand.at(t) + self.breakage.at(x)?)
    }

    /// Instantaneous profit rate.
    pub fn profit_integrand(&self, t: f64, x: f64, u: f64) -> f64 {
        let e = &self.econ;
        e.price * self.demand.at(t)
            - self.holding.at(t) * x
            - e.production_cost_rate(u)
            - (e.s1 + e.s2 * u) / self.horizon
    }

    /// Simpson approximation of the total profit along `traj`.
    ///
    /// The trajectory must span `[0, T]` on a uniform grid with an even
    /// number of intervals.
    pub fn profit_of_trajectory(&self, traj: &Trajectory) -> Result<f64> {
        let step = traj.uniform_step()?;
        let end = *traj.times.last().unwrap();
        if (end - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::MalformedTrajectory(format!(
                "grid ends at {end}, horizon is {}",
                self.horizon
            )));
        }
        let integrand: Vec<f64> = traj
            .times
            .iter()
            .zip(traj.x.iter().zip(&traj.u))
            .map(|(&t, (&x, &u))| self.profit_integrand(t, x, u))
            .collect();
        quadrature::simpson(&integrand, step)
    }

    /// Largest interior mismatch between the central-difference stock slope
    /// and `state_rhs`.
    pub fn dynamics_residual(&self, traj: &Trajectory) -> Result<f64> {
        let n = traj.len();
        let mut worst = 0.0_f64;
        for i in 1..n.saturating_sub(1) {
            let xdot = (traj.x[i + 1] - traj.x[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
            let rhs = self.state_rhs(traj.times[i], traj.x[i], traj.u[i])?;
            worst = worst.max((xdot - rhs).abs());
        }
        Ok(worst)
    }

    pub fn uniform_times(&self, intervals: usize) -> Vec<f64> {
        uniform_grid(self.horizon, intervals)
    }
}

pub fn uniform_grid(horizon: f64, intervals: usize) -> Vec<f64> {
    let h = horizon / intervals as f64;
    (0..=intervals)
        .map(|i| if i == intervals { horizon } else { i as f64 * h })
        .collect()
}

/// Sampled state, control and demand on an increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, x: Vec<f64>, u: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let n = times.len();
        if x.len() != n || u.len() != n || d.len() != n {
            return Err(Error::MalformedTrajectory(format!(
                "column lengths differ: t={n}, x={}, u={}, d={}",
                x.len(),
                u.len(),
                d.len()
            )));
        }
        if n < 2 {
            return Err(Error::MalformedTrajectory("fewer than 2 samples".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::MalformedTrajectory(format!(
                "grid starts at {}, expected 0",
                times[0]
            )));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::MalformedTrajectory(format!(
                "times not strictly increasing at index {}",
                w + 1
            )));
        }
        Ok(Self { times, x, u, d })
    }

    /// Samples `x(t)` and `u(t)` on a uniform grid of the model horizon.
    pub fn sample(
        model: &ModelInstance,
        intervals: usize,
        mut x: impl FnMut(f64) -> f64,
        mut u: impl FnMut(f64) -> f64,
    ) -> Result<Self> {
        let times = model.uniform_times(intervals);
        let xs = times.iter().map(|&t| x(t)).collect();
        let us = times.iter().map(|&t| u(t)).collect();
        let ds = times.iter().map(|&t| model.demand.at(t)).collect();
        Self::new(times, xs, us, ds)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn min_state(&self) -> f64 {
        self.x.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_control(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `x >= -tol` and `u >= -tol` at every sample.
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.min_state() >= -tol && self.min_control() >= -tol
    }

    /// Step of a uniform grid; errors if the spacing varies.
    pub fn uniform_step(&self) -> Result<f64> {
        let n = self.len();
        if n < 3 {
            return Err(Error::GridTooSmall(n));
        }
        let step = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        for (i, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
                return Err(Error::MalformedTrajectory(format!(
                    "non-uniform spacing at index {}",
                    i + 1
                )));
            }
        }
        Ok(step)
    }

    /// Linear interpolation of `(x, u, d)` at time `t` inside the grid.
    pub fn interpolate(&self, t: f64) -> (f64, f64, f64) {
        let n = self.len();
        let k = match self.times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(k) => return (self.x[k], self.u[k], self.d[k]),
            Err(k) => k.clamp(1, n - 1),
        };
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        (lerp(&self.x), lerp(&self.u), lerp(&self.d))
    }
}
