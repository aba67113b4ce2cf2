//! Closed-form extremals for linear holding cost (`n = 1`).
//!
//! With linear breakage (`gamma = 1`, `b1 > 0`) the Euler-Lagrange equation
//! is `x'' - b1^2 x = f(t)` with quadratic forcing
//! `f(t) = (a11 + a22 t + a33 t^2) / (2 beta10)`, solved by exponentials plus a
//! quadratic particular integral. Without breakage (`b1 = 0`) it reduces to
//! `x'' = f(t)` with linear forcing and a cubic solution.
//!
//! Profits are obtained by expanding `x` and `u` into sums of `t^j e^{rt}`
//! terms and integrating each term exactly.

use crate::error::{Error, Result};
use crate::model::ModelInstance;

/// Smallest `b1 T` accepted by the exponential solution.
pub const MIN_BREAKAGE_HORIZON: f64 = 1e-6;

/// Constants of the linear-breakage solution
/// `x(t) = A1 e^{b1 t} + B1 e^{-b1 t} - f(t)/b1^2 - a33/(b1^4 beta10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model1aCoefficients {
    pub a11: f64,
    pub a22: f64,
    pub a33: f64,
    /// `c10 + s2 / T`.
    pub c11: f64,
    /// `A1`, amplitude of `e^{b1 t}`.
    pub amp_growth: f64,
    /// `B1`, amplitude of `e^{-b1 t}`.
    pub amp_decay: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

fn require_linear_holding(model: &ModelInstance) -> Result<()> {
    if model.holding.n != 1.0 {
        return Err(Error::UnsupportedModel(format!(
            "closed forms need holding exponent n = 1, got {}",
            model.holding.n
        )));
    }
    Ok(())
}

impl Model1aCoefficients {
    pub fn new(model: &ModelInstance) -> Result<Self> {
        model.validate()?;
        require_linear_holding(model)?;
        let k = model.breakage.b1;
        if model.breakage.gamma != 1.0 {
            return Err(Error::UnsupportedModel(format!(
                "linear-breakage solution needs gamma = 1, got {}",
                model.breakage.gamma
            )));
        }
        if k == 0.0 {
            return Err(Error::UnsupportedModel(
                "b1 = 0 has no exponential solution; use the no-breakage model".into(),
            ));
        }
        let t_end = model.horizon;
        if k * t_end < MIN_BREAKAGE_HORIZON {
            return Err(Error::IllConditioned {
                b1: k,
                horizon: t_end,
            });
        }

        let (d1, d2, d3) = (model.demand.d1, model.demand.d2, model.demand.d3);
        let beta = model.econ.beta10;
        let (a, b) = (model.holding.a, model.holding.b);
        let c11 = model.econ.linear_cost(t_end);

        let a11 = a + k * model.econ.c10 + k * model.econ.s2 / t_end + 2.0 * beta * k * d1
            - 2.0 * beta * d2;
        let a22 = b - 4.0 * beta * d3 + 2.0 * beta * k * d2;
        let a33 = 2.0 * beta * k * d3;

        let forcing = |t: f64| (a11 + a22 * t + a33 * t * t) / (2.0 * beta);
        let shift = a33 / (k.powi(4) * beta);
        let at_start = forcing(0.0) / (k * k) + shift;
        let at_end = forcing(t_end) / (k * k) + shift;

        // A1 + B1 = at_start,  A1 e^{kT} + B1 e^{-kT} = at_end
        let two_sinh = 2.0 * (k * t_end).sinh();
        let amp_growth = (at_end - at_start * (-k * t_end).exp()) / two_sinh;
        let amp_decay = (at_start * (k * t_end).exp() - at_end) / two_sinh;

        let m1 = a22 / (2.0 * k * k * beta) + a11 / (2.0 * k * beta) + a33 / (k.powi(3) * beta) - d1;
        let m2 = a33 / (k * k * beta) + a22 / (2.0 * k * beta) - d2;
        let m3 = -2.0 * amp_growth * k * (k * t_end).exp();

        Ok(Self {
            a11,
            a22,
            a33,
            c11,
            amp_growth,
            amp_decay,
            m1,
            m2,
            m3,
        })
    }

    /// Quadratic `q(t)` with `x(t) = A1 e^{kt} + B1 e^{-kt} - q(t)`.
    fn particular(&self, model: &ModelInstance) -> [f64; 3] {
        let k = model.breakage.b1;
        let beta = model.econ.beta10;
        let k2 = k * k;
        [
            self.a11 / (2.0 * beta * k2) + self.a33 / (k2 * k2 * beta),
            self.a22 / (2.0 * beta * k2),
            self.a33 / (2.0 * beta * k2),
        ]
    }

    /// Forcing `f(t)` of `x'' - b1^2 x = f(t)`.
    pub fn forcing(&self, model: &ModelInstance, t: f64) -> f64 {
        (self.a11 + self.a22 * t + self.a33 * t * t) / (2.0 * model.econ.beta10)
    }

    pub fn state(&self, model: &ModelInstance, t: f64) -> f64 {
        let k = model.breakage.b1;
        let q = self.particular(model);
        self.amp_growth * (k * t).exp() + self.amp_decay * (-k * t).exp()
            - (q[0] + q[1] * t + q[2] * t * t)
    }

    pub fn state_rate(&self, model: &ModelInstance, t: f64) -> f64 {
        let k = model.breakage.b1;
        let q = self.particular(model);
        k * (self.amp_growth * (k * t).exp() - self.amp_decay * (-k * t).exp())
            - (q[1] + 2.0 * q[2] * t)
    }

    pub fn state_accel(&self, model: &ModelInstance, t: f64) -> f64 {
        let k = model.breakage.b1;
        let q = self.particular(model);
        k * k * (self.amp_growth * (k * t).exp() + self.amp_decay * (-k * t).exp()) - 2.0 * q[2]
    }

    /// `u(t) = 2 A1 b1 e^{b1 t} - M1 - M2 t`; the `e^{-b1 t}` terms cancel.
    pub fn control(&self, model: &ModelInstance, t: f64) -> f64 {
        let k = model.breakage.b1;
        2.0 * self.amp_growth * k * (k * t).exp() - self.m1 - self.m2 * t
    }

    /// Exact profit of the extremal.
    pub fn profit(&self, model: &ModelInstance) -> f64 {
        let k = model.breakage.b1;
        let q = self.particular(model);
        let x = ExpPoly::exp(self.amp_growth, k)
            + ExpPoly::exp(self.amp_decay, -k)
            + ExpPoly::poly(&[-q[0], -q[1], -q[2]]);
        let u = ExpPoly::exp(2.0 * self.amp_growth * k, k) + ExpPoly::poly(&[-self.m1, -self.m2]);
        profit_from_expansion(model, &x, &u)
    }
}

/// Constants of the no-breakage cubic `x(t) = A + B t + k1 t^2/2 - k2 t^3/6`
/// with `k1 = a/(2 beta10) - d2` and `k2 = 2 d3 - b/(2 beta10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model1bCoefficients {
    pub a: f64,
    pub b: f64,
}

impl Model1bCoefficients {
    pub fn new(model: &ModelInstance) -> Result<Self> {
        model.validate()?;
        require_linear_holding(model)?;
        if model.breakage.b1 != 0.0 {
            return Err(Error::UnsupportedModel(format!(
                "no-breakage solution needs b1 = 0, got {}",
                model.breakage.b1
            )));
        }
        Ok(Self::fit(model))
    }

    /// Fits both boundary conditions ignoring breakage and treating the
    /// holding cost as `a + b t`. Serves as a starting guess elsewhere.
    pub(crate) fn fit(model: &ModelInstance) -> Self {
        let (k1, k2) = Self::curvature(model);
        let t = model.horizon;
        // x(T) = B T + k1 T^2/2 - k2 T^3/6 = 0
        Self {
            a: 0.0,
            b: -k1 * t / 2.0 + k2 * t * t / 6.0,
        }
    }

    fn curvature(model: &ModelInstance) -> (f64, f64) {
        let beta = model.econ.beta10;
        let k1 = model.holding.a / (2.0 * beta) - model.demand.d2;
        let k2 = 2.0 * model.demand.d3 - model.holding.b / (2.0 * beta);
        (k1, k2)
    }

    fn state_poly(&self, model: &ModelInstance) -> [f64; 4] {
        let (k1, k2) = Self::curvature(model);
        [self.a, self.b, k1 / 2.0, -k2 / 6.0]
    }

    /// Forcing `f(t)` of `x'' = f(t)`.
    pub fn forcing(&self, model: &ModelInstance, t: f64) -> f64 {
        let (k1, k2) = Self::curvature(model);
        k1 - k2 * t
    }

    pub fn state(&self, model: &ModelInstance, t: f64) -> f64 {
        let c = self.state_poly(model);
        c[0] + t * (c[1] + t * (c[2] + t * c[3]))
    }

    pub fn state_rate(&self, model: &ModelInstance, t: f64) -> f64 {
        let c = self.state_poly(model);
        c[1] + t * (2.0 * c[2] + t * 3.0 * c[3])
    }

    pub fn state_accel(&self, model: &ModelInstance, t: f64) -> f64 {
        let c = self.state_poly(model);
        2.0 * c[2] + 6.0 * c[3] * t
    }

    fn control_poly(&self, model: &ModelInstance) -> [f64; 3] {
        let beta = model.econ.beta10;
        [
            self.b + model.demand.d1,
            model.holding.a / (2.0 * beta),
            model.holding.b / (4.0 * beta),
        ]
    }

    /// `u(t) = B + d1 + (a/(2 beta10)) t + (b/(2 beta10)) t^2/2`.
    pub fn control(&self, model: &ModelInstance, t: f64) -> f64 {
        let c = self.control_poly(model);
        c[0] + t * (c[1] + t * c[2])
    }

    pub fn profit(&self, model: &ModelInstance) -> f64 {
        let x = ExpPoly::poly(&self.state_poly(model));
        let u = ExpPoly::poly(&self.control_poly(model));
        profit_from_expansion(model, &x, &u)
    }
}

/// `int_0^T [p d - (a + b t) x - c11 u - beta10 u^2 - (N + L + s1/T)] dt`.
fn profit_from_expansion(model: &ModelInstance, x: &ExpPoly, u: &ExpPoly) -> f64 {
    let t_end = model.horizon;
    let e = &model.econ;
    let holding = ExpPoly::poly(&[model.holding.a, model.holding.b]);
    let revenue = e.price * model.demand.integral(t_end);
    let fixed = e.fixed_cost_rate(t_end) * t_end;
    let holding_cost = (&holding * x).integrate(t_end);
    let linear = e.linear_cost(t_end) * u.integrate(t_end);
    let wear = e.beta10 * (u * u).integrate(t_end);
    revenue - fixed - holding_cost - linear - wear
}

/// Finite sum of `c t^j e^{r t}` terms.
#[derive(Debug, Clone, Default)]
struct ExpPoly {
    terms: Vec<(f64, u32, f64)>,
}

impl ExpPoly {
    fn exp(coef: f64, rate: f64) -> Self {
        Self {
            terms: vec![(coef, 0, rate)],
        }
    }

    fn poly(coeffs: &[f64]) -> Self {
        Self {
            terms: coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, &c)| (c, j as u32, 0.0))
                .collect(),
        }
    }

    fn integrate(&self, horizon: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, j, r)| c * moment(j, r, horizon))
            .sum()
    }
}

impl std::ops::Add for ExpPoly {
    type Output = ExpPoly;
    fn add(mut self, rhs: ExpPoly) -> ExpPoly {
        self.terms.extend(rhs.terms);
        self
    }
}

impl std::ops::Mul for &ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: &ExpPoly) -> ExpPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for &(c1, j1, r1) in &self.terms {
            for &(c2, j2, r2) in &rhs.terms {
                let rate = r1 + r2;
                // e^{kt} e^{-kt} must collapse to an exact polynomial term
                let rate = if rate.abs() <= 1e-15 * (r1.abs() + r2.abs()) { 0.0 } else { rate };
                terms.push((c1 * c2, j1 + j2, rate));
            }
        }
        ExpPoly { terms }
    }
}

/// `int_0^T t^j e^{r t} dt`.
fn moment(j: u32, r: f64, horizon: f64) -> f64 {
    let t = horizon;
    if r == 0.0 {
        return t.powi(j as i32 + 1) / (j as f64 + 1.0);
    }
    let rt = r * t;
    if rt.abs() < 0.5 {
        // sum_m r^m T^{j+m+1} / (m! (j+m+1))
        let mut sum = 0.0;
        let mut scale = t.powi(j as i32 + 1);
        for m in 0..60 {
            let term = scale / (j + m + 1) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            scale *= rt / (m + 1) as f64;
        }
        return sum;
    }
    // I_0 = (e^{rT} - 1)/r,  I_j = (T^j e^{rT} - j I_{j-1}) / r
    let e = rt.exp();
    let mut acc = rt.exp_m1() / r;
    for i in 1..=j {
        acc = (t.powi(i as i32) * e - i as f64 * acc) / r;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Trajectory, DEFAULT_INTERVALS};
    use crate::quadrature;
    use approx::assert_relative_eq;

    // Reference rows (t = 0..12) for the b1 = 0.02 and b1 = 0.11 extremals
    // and the no-breakage extremal.
    const U_002: [f64; 13] = [
        94.98, 100.05, 105.43, 111.16, 117.17, 123.44, 130.09, 137.08, 144.41, 152.10, 160.14,
        168.54, 177.32,
    ];
    const X_002: [f64; 13] = [
        0.0, 86.95, 169.44, 243.86, 306.76, 354.70, 384.35, 392.44, 375.77, 331.22, 255.72, 146.28,
        0.0,
    ];
    const U_011: [f64; 13] = [
        48.96, 58.04, 68.38, 80.15, 93.48, 108.58, 125.65, 144.92, 166.63, 191.09, 218.56, 249.45,
        284.18,
    ];
    const X_011: [f64; 13] = [
        0.0, 41.44, 80.15, 113.90, 140.83, 159.44, 168.59, 167.44, 155.48, 132.49, 98.59, 54.18,
        0.0,
    ];

    /// Gauss-Legendre 5-point rule on many panels: exact for degree 9 per
    /// panel, independent of the Simpson code path.
    fn gauss_profit(model: &ModelInstance, x: impl Fn(f64) -> f64, u: impl Fn(f64) -> f64) -> f64 {
        let nodes = [
            (0.0, 128.0 / 225.0),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = 240;
        let h = model.horizon / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (z, w) in nodes {
                let t = mid + 0.5 * h * z;
                total += 0.5 * h * w * model.profit_integrand(t, x(t), u(t));
            }
        }
        total
    }

    #[test]
    fn coefficients_for_reference_breakage() {
        let m = ModelInstance::baseline(0.02).unwrap();
        let c = Model1aCoefficients::new(&m).unwrap();
        assert_relative_eq!(c.a11, -0.841, epsilon = 1e-12);
        assert_relative_eq!(c.a22, -3.72, epsilon = 1e-12);
        assert_relative_eq!(c.a33, 0.04, epsilon = 1e-15);
        assert_relative_eq!(c.c11, 0.95, epsilon = 1e-15);
        // 2x2 boundary system solved by Cramer's rule on the raw equations
        let k = 0.02_f64;
        let t = 12.0_f64;
        let r = |s: f64| c.forcing(&m, s) / (k * k) + c.a33 / (k.powi(4) * 0.5);
        let det = (-k * t).exp() - (k * t).exp();
        let a1 = (r(0.0) * (-k * t).exp() - r(t)) / det;
        let b1 = (r(t) - r(0.0) * (k * t).exp()) / det;
        assert_relative_eq!(c.amp_growth, a1, max_relative = 1e-9);
        assert_relative_eq!(c.amp_decay, b1, max_relative = 1e-9);
        assert_relative_eq!(c.amp_growth, 1.865e4, max_relative = 1e-3);
        assert_relative_eq!(c.amp_decay, 4.792e5, max_relative = 1e-3);
        assert_relative_eq!(c.a33, 2.0 * 0.5 * 0.02 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn vanishing_forcing_coefficients() {
        let mut m = ModelInstance::baseline(0.05).unwrap();
        m.demand.d2 = 0.0;
        m.demand.d3 = 0.0;
        m.holding.b = 0.0;
        let c = Model1aCoefficients::new(&m).unwrap();
        assert_eq!(c.a33, 0.0);
        assert_eq!(c.a22, 0.0);
    }

    #[test]
    fn rejects_unsupported_models() {
        let m0 = ModelInstance::baseline(0.0).unwrap();
        assert!(matches!(Model1aCoefficients::new(&m0), Err(Error::UnsupportedModel(_))));
        let tiny = ModelInstance::baseline(1e-8).unwrap();
        assert!(matches!(Model1aCoefficients::new(&tiny), Err(Error::IllConditioned { .. })));
        let mut quad = ModelInstance::baseline(0.02).unwrap();
        quad.breakage.gamma = 2.0;
        assert!(Model1aCoefficients::new(&quad).is_err());
        let mut nonlinear_h = ModelInstance::baseline(0.0).unwrap();
        nonlinear_h.holding.n = 2.0;
        assert!(Model1bCoefficients::new(&nonlinear_h).is_err());
        assert!(Model1bCoefficients::new(&ModelInstance::baseline(0.02).unwrap()).is_err());
    }

    #[test]
    fn reference_rows_with_breakage() {
        for (b1, us, xs) in [(0.02, U_002, X_002), (0.11, U_011, X_011)] {
            let m = ModelInstance::baseline(b1).unwrap();
            let c = Model1aCoefficients::new(&m).unwrap();
            for i in 0..13 {
                let t = i as f64;
                assert!((c.control(&m, t) - us[i]).abs() <= 0.5, "b1={b1} u({t})");
                assert!((c.state(&m, t) - xs[i]).abs() <= 0.5, "b1={b1} x({t})");
            }
        }
    }

    #[test]
    fn reference_rows_without_breakage() {
        let m = ModelInstance::baseline(0.0).unwrap();
        let c = Model1bCoefficients::new(&m).unwrap();
        assert_eq!(c.a, 0.0);
        assert_relative_eq!(c.b, 97.2, epsilon = 1e-12);
        assert!(c.state(&m, 0.0).abs() < 1e-12);
        assert!(c.state(&m, 12.0).abs() < 1e-9);
        assert!((c.state(&m, 3.0) - 270.0).abs() <= 0.5);
        assert!((c.control(&m, 0.0) - 104.2).abs() <= 0.1);
        assert!((c.control(&m, 5.0) - 121.7).abs() <= 0.1);
    }

    #[test]
    fn flat_forcing_gives_empty_stock() {
        let mut m = ModelInstance::baseline(0.0).unwrap();
        m.demand.d2 = m.holding.a / (2.0 * m.econ.beta10);
        m.demand.d3 = m.holding.b / (4.0 * m.econ.beta10);
        let c = Model1bCoefficients::new(&m).unwrap();
        assert!(c.b.abs() < 1e-12);
        for i in 0..=24 {
            assert!(c.state(&m, i as f64 * 0.5).abs() < 1e-9);
        }
        let mut flat = ModelInstance::baseline(0.0).unwrap();
        flat.holding.b = 0.0;
        flat.demand.d2 = flat.holding.a / (2.0 * flat.econ.beta10);
        flat.demand.d3 = 0.0;
        flat.horizon = 7.3;
        let c = Model1bCoefficients::new(&flat).unwrap();
        assert!(c.state(&flat, 4.0).abs() < 1e-9);
    }

    #[test]
    fn boundary_conditions_and_el_identity() {
        for b1 in [0.005, 0.02, 0.05, 0.11, 0.3] {
            let m = ModelInstance::baseline(b1).unwrap();
            let c = Model1aCoefficients::new(&m).unwrap();
            assert!(c.state(&m, 0.0).abs() < 1e-6);
            assert!(c.state(&m, 12.0).abs() < 1e-6);
            for i in 0..=120 {
                let t = i as f64 * 0.1;
                let x = c.state(&m, t);
                let el = c.state_accel(&m, t) - b1 * b1 * x - c.forcing(&m, t);
                assert!(el.abs() < 1e-9, "b1={b1} t={t} el={el}");
                // control from the closed form equals x' + d + b1 x; at high
                // breakage the unconstrained stock dips below zero near t = 0
                if x < 0.0 {
                    continue;
                }
                let via_dynamics = m.recover_control(t, x, c.state_rate(&m, t)).unwrap();
                let direct = c.control(&m, t);
                assert!((via_dynamics - direct).abs() < 1e-9 * direct.abs().max(1.0), "b1={b1} t={t} {via_dynamics} vs {direct}");
            }
        }
        let m = ModelInstance::baseline(0.0).unwrap();
        let c = Model1bCoefficients::new(&m).unwrap();
        for i in 0..=120 {
            let t = i as f64 * 0.1;
            assert!((c.state_accel(&m, t) - c.forcing(&m, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_profit_matches_quadrature() {
        for b1 in [0.01, 0.02, 0.05, 0.08, 0.11] {
            let m = ModelInstance::baseline(b1).unwrap();
            let c = Model1aCoefficients::new(&m).unwrap();
            let closed = c.profit(&m);
            let traj = Trajectory::sample(&m, DEFAULT_INTERVALS, |t| c.state(&m, t), |t| c.control(&m, t))
                .unwrap();
            let simpson = m.profit_of_trajectory(&traj).unwrap();
            assert!(((closed - simpson) / closed).abs() < 1e-4, "b1={b1}");
            let gauss = gauss_profit(&m, |t| c.state(&m, t), |t| c.control(&m, t));
            assert_relative_eq!(closed, gauss, max_relative = 1e-10);
        }
        let m = ModelInstance::baseline(0.0).unwrap();
        let c = Model1bCoefficients::new(&m).unwrap();
        let gauss = gauss_profit(&m, |t| c.state(&m, t), |t| c.control(&m, t));
        assert_relative_eq!(c.profit(&m), gauss, max_relative = 1e-12);
        let traj =
            Trajectory::sample(&m, DEFAULT_INTERVALS, |t| c.state(&m, t), |t| c.control(&m, t)).unwrap();
        assert!(((c.profit(&m) - m.profit_of_trajectory(&traj).unwrap()) / c.profit(&m)).abs() < 1e-4);
    }

    #[test]
    fn reference_profits() {
        let profit = |b1: f64| {
            let m = ModelInstance::baseline(b1).unwrap();
            Model1aCoefficients::new(&m).unwrap().profit(&m)
        };
        assert!((profit(0.02) / 180913.30 - 1.0).abs() < 0.01);
        assert!((profit(0.11) / 153447.7 - 1.0).abs() < 0.01);
        assert!((profit(0.05) / 169431.00 - 1.0).abs() < 0.01);
        // frozen from the Gauss-Legendre oracle above
        assert_relative_eq!(profit(0.02), 180853.279_445, max_relative = 1e-9);

        let m = ModelInstance::baseline(0.0).unwrap();
        let no_breakage = Model1bCoefficients::new(&m).unwrap().profit(&m);
        // exact polynomial integral of the cubic extremal
        assert_relative_eq!(no_breakage, 189434.312, max_relative = 1e-12);
        assert!(no_breakage > profit(0.02));
    }

    #[test]
    fn profit_decreases_with_breakage() {
        let mut last = f64::INFINITY;
        for i in 1..=8 {
            let m = ModelInstance::baseline(0.01 * i as f64).unwrap();
            let p = Model1aCoefficients::new(&m).unwrap().profit(&m);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn empty_economics_has_zero_profit() {
        let mut m = ModelInstance::baseline(0.0).unwrap();
        m.econ.price = 0.0;
        m.econ.c10 = 0.0;
        m.econ.labour = 0.0;
        m.econ.technology = 0.0;
        m.econ.s1 = 0.0;
        m.econ.s2 = 0.0;
        m.econ.beta10 = 1.0;
        m.holding = crate::model::HoldingCostLaw { a: 1e-300, b: 0.0, n: 1.0 };
        m.demand = crate::model::DemandPoly { d1: 0.0, d2: 0.0, d3: 0.0 };
        let c = Model1bCoefficients::new(&m).unwrap();
        assert!(c.profit(&m).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_the_cubic_stock() {
        let m = ModelInstance::baseline(0.0).unwrap();
        let c = Model1bCoefficients::new(&m).unwrap();
        let (b, k1, k2) = (c.b, -1.0, 3.8);
        let t = 12.0_f64;
        let exact = b * t * t / 2.0 + k1 * t.powi(3) / 6.0 - k2 * t.powi(4) / 24.0;
        for intervals in [2, 4, 6, 10, 50, 1200] {
            let h = t / intervals as f64;
            let ys: Vec<f64> = (0..=intervals).map(|i| c.state(&m, i as f64 * h)).collect();
            let got = quadrature::simpson(&ys, h).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0) * intervals as f64);
        }
    }

    #[test]
    fn moments_agree_across_branches() {
        // series branch vs recurrence branch near the switch point
        for j in 0..5 {
            let below = moment(j, 0.499 / 12.0, 12.0);
            let above = moment(j, 0.501 / 12.0, 12.0);
            let ratio = above / below;
            assert!(ratio > 1.0 && ratio < 1.01);
        }
        assert_relative_eq!(moment(0, 1.0, 1.0), std::f64::consts::E - 1.0, max_relative = 1e-14);
        // int t e^t on [0,1] = 1
        assert_relative_eq!(moment(1, 1.0, 1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(moment(2, 0.0, 3.0), 9.0);
    }
}
