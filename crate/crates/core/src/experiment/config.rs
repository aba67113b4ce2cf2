//! Flat `key = value` run configuration.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    BreakabilityLaw, DemandPoly, EconomicParams, HoldingCostLaw, ModelInstance, DEFAULT_INTERVALS,
};

/// Model keys, all required.
pub const MODEL_KEYS: [&str; 16] = [
    "L", "N", "c10", "beta10", "p", "s1", "s2", "a", "b", "n", "d1", "d2", "d3", "T", "b1", "gamma",
];

/// Optional run keys.
pub const RUN_KEYS: [&str; 6] = ["solver", "grid", "sweep_param", "sweep_from", "sweep_to", "sweep_step"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Analytic1a,
    Analytic1b,
    Bvp,
    Transcription,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Analytic1a,
        SolverKind::Analytic1b,
        SolverKind::Bvp,
        SolverKind::Transcription,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Analytic1a => "analytic-1a",
            SolverKind::Analytic1b => "analytic-1b",
            SolverKind::Bvp => "bvp",
            SolverKind::Transcription => "transcription",
        }
    }

    /// Closed forms only exist for `n = 1` with either `gamma = 1, b1 > 0`
    /// or `b1 = 0`.
    pub fn check_compatible(self, model: &ModelInstance) -> Result<()> {
        let unsupported = |msg: String| Err(Error::UnsupportedModel(msg));
        match self {
            SolverKind::Analytic1a => {
                if model.breakage.gamma != 1.0 || model.holding.n != 1.0 || !(model.breakage.b1 > 0.0) {
                    return unsupported(format!(
                        "analytic-1a needs gamma = 1, n = 1, b1 > 0 (got gamma = {}, n = {}, b1 = {})",
                        model.breakage.gamma, model.holding.n, model.breakage.b1
                    ));
                }
            }
            SolverKind::Analytic1b => {
                if model.breakage.b1 != 0.0 || model.holding.n != 1.0 {
                    return unsupported(format!(
                        "analytic-1b needs b1 = 0, n = 1 (got b1 = {}, n = {})",
                        model.breakage.b1, model.holding.n
                    ));
                }
            }
            SolverKind::Bvp | SolverKind::Transcription => {}
        }
        Ok(())
    }

    /// Closed form when one applies, otherwise the BVP solver.
    pub fn default_for(model: &ModelInstance) -> Self {
        [SolverKind::Analytic1a, SolverKind::Analytic1b]
            .into_iter()
            .find(|s| s.check_compatible(model).is_ok())
            .unwrap_or(SolverKind::Bvp)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown solver `{s}` (expected one of analytic-1a, analytic-1b, bvp, transcription)"
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn new(param: &str, from: f64, to: f64, step: f64) -> Result<Self> {
        if !MODEL_KEYS.contains(&param) {
            return Err(Error::InvalidParameter {
                name: "sweep_param",
                reason: format!("`{param}` is not a model key"),
            });
        }
        if !(step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sweep_step",
                reason: format!("must be positive, got {step}"),
            });
        }
        if !(from <= to) {
            return Err(Error::InvalidParameter {
                name: "sweep_from",
                reason: format!("{from} exceeds sweep_to = {to}"),
            });
        }
        Ok(Self {
            param: param.to_string(),
            from,
            to,
            step,
        })
    }

    /// `from, from + step, ...` up to `to`, computed by index to avoid drift.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|k| self.from + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelInstance,
    pub solver: SolverKind,
    pub grid: usize,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn new(model: ModelInstance) -> Self {
        Self {
            solver: SolverKind::default_for(&model),
            model,
            grid: DEFAULT_INTERVALS,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.check_compatible(&self.model)?;
        if self.grid < 8 || !self.grid.is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need an even interval count >= 8, got {}", self.grid),
            });
        }
        Ok(())
    }
}

/// Writes one model key into `model`.
pub fn set_param(model: &mut ModelInstance, key: &str, value: f64) -> Result<()> {
    let slot = match key {
        "L" => &mut model.econ.labour,
        "N" => &mut model.econ.technology,
        "c10" => &mut model.econ.c10,
        "beta10" => &mut model.econ.beta10,
        "p" => &mut model.econ.price,
        "s1" => &mut model.econ.s1,
        "s2" => &mut model.econ.s2,
        "a" => &mut model.holding.a,
        "b" => &mut model.holding.b,
        "n" => &mut model.holding.n,
        "d1" => &mut model.demand.d1,
        "d2" => &mut model.demand.d2,
        "d3" => &mut model.demand.d3,
        "T" => &mut model.horizon,
        "b1" => &mut model.breakage.b1,
        "gamma" => &mut model.breakage.gamma,
        _ => {
            return Err(Error::InvalidParameter {
                name: "key",
                reason: format!("`{key}` is not a model key"),
            })
        }
    };
    *slot = value;
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment.
///
/// All sixteen model keys are required and unknown keys are rejected. A
/// model that fails validation is reported against the offending key's line.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Config {
                line,
                key: body.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !MODEL_KEYS.contains(&key) && !RUN_KEYS.contains(&key) {
            return Err(Error::Config {
                line,
                key: key.to_string(),
                message: "unknown key".into(),
            });
        }
        if let Some((first, _)) = entries.get(key) {
            return Err(Error::Config {
                line,
                key: key.to_string(),
                message: format!("duplicate key (first set on line {first})"),
            });
        }
        entries.insert(key.to_string(), (line, value.to_string()));
    }

    let number = |key: &str| -> Result<Option<(usize, f64)>> {
        match entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(|x| Some((*line, x)))
                .ok_or_else(|| Error::Config {
                    line: *line,
                    key: key.to_string(),
                    message: format!("`{v}` is not a finite number"),
                }),
        }
    };

    let mut values = HashMap::new();
    for key in MODEL_KEYS {
        let (_, v) = number(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))?;
        values.insert(key, v);
    }
    let model = ModelInstance {
        demand: DemandPoly {
            d1: values["d1"],
            d2: values["d2"],
            d3: values["d3"],
        },
        holding: HoldingCostLaw {
            a: values["a"],
            b: values["b"],
            n: values["n"],
        },
        breakage: BreakabilityLaw {
            b1: values["b1"],
            gamma: values["gamma"],
        },
        econ: EconomicParams {
            c10: values["c10"],
            labour: values["L"],
            technology: values["N"],
            beta10: values["beta10"],
            s1: values["s1"],
            s2: values["s2"],
            price: values["p"],
        },
        horizon: values["T"],
    };
    let at_line = |err: Error| -> Error {
        let key = match &err {
            Error::InvalidParameter { name, .. } => name.to_string(),
            Error::NonPositiveHorizon(_) => "T".to_string(),
            Error::UnsupportedModel(_) => "solver".to_string(),
            _ => return err,
        };
        match entries.get(key.as_str()) {
            Some((line, _)) => Error::Config {
                line: *line,
                key,
                message: err.to_string(),
            },
            None => err,
        }
    };
    model.validate().map_err(at_line)?;

    let mut config = RunConfig::new(model);
    if let Some((line, name)) = entries.get("solver") {
        config.solver = name.parse().map_err(|message| Error::Config {
            line: *line,
            key: "solver".into(),
            message,
        })?;
    }
    if let Some((line, grid)) = number("grid")? {
        if grid.fract() != 0.0 || grid < 0.0 {
            return Err(Error::Config {
                line,
                key: "grid".into(),
                message: "must be a non-negative integer".into(),
            });
        }
        config.grid = grid as usize;
    }
    let sweep_keys = ["sweep_from", "sweep_to", "sweep_step"];
    if let Some((line, param)) = entries.get("sweep_param") {
        let mut bounds = [0.0; 3];
        for (slot, key) in bounds.iter_mut().zip(sweep_keys) {
            *slot = number(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))?.1;
        }
        config.sweep = Some(
            SweepSpec::new(param, bounds[0], bounds[1], bounds[2]).map_err(|e| Error::Config {
                line: *line,
                key: "sweep_param".into(),
                message: e.to_string(),
            })?,
        );
    } else if let Some(key) = sweep_keys.iter().find(|k| entries.contains_key(**k)) {
        return Err(Error::Config {
            line: entries[*key].0,
            key: key.to_string(),
            message: "sweep bounds given without sweep_param".into(),
        });
    }
    config.validate().map_err(at_line)?;
    Ok(config)
}

/// Serializes the model keys of `model` in config syntax.
pub fn render_model(model: &ModelInstance) -> String {
    let mut out = String::new();
    for key in MODEL_KEYS {
        let v = get_param(model, key).unwrap_or(f64::NAN);
        out.push_str(&format!("{key} = {v}\n"));
    }
    out
}

pub fn get_param(model: &ModelInstance, key: &str) -> Option<f64> {
    let v = match key {
        "L" => model.econ.labour,
        "N" => model.econ.technology,
        "c10" => model.econ.c10,
        "beta10" => model.econ.beta10,
        "p" => model.econ.price,
        "s1" => model.econ.s1,
        "s2" => model.econ.s2,
        "a" => model.holding.a,
        "b" => model.holding.b,
        "n" => model.holding.n,
        "d1" => model.demand.d1,
        "d2" => model.demand.d2,
        "d3" => model.demand.d3,
        "T" => model.horizon,
        "b1" => model.breakage.b1,
        "gamma" => model.breakage.gamma,
        _ => return None,
    };
    Some(v)
}
