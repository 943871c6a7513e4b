//! JSON scenario files.
//!
//! ```json
//! {
//!   "id": "three-site",
//!   "system": "rfm",
//!   "n": 3,
//!   "T": 6.283185307179586,
//!   "channels": [{"mean": 3.0, "harmonics": [{"k": 1, "amplitude": 1.0, "phase": 5.0}]}, ...],
//!   "solver": {"method": "fixed_rk4"},
//!   "orbit_tol": 1e-10,
//!   "grid_M": 4096
//! }
//! ```
//!
//! `grid_M` is both the number of integrator steps per period and the number
//! of orbit samples. Optional keys: `x0` (initial state for `simulate`),
//! `condition` (a structural condition the schedule is declared to meet) and
//! `max_periods`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{check_condition, Condition};
use crate::error::{Error, Result};
use crate::integrator::{StepConfig, DEFAULT_STEPS_PER_PERIOD};
use crate::model::TanhDemo;
use crate::orbit::{OrbitConfig, DEFAULT_MAX_PERIODS, DEFAULT_ORBIT_TOL};
use crate::schedules::{normalize_phase, Channel, RateSchedule, ScalarInput};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Rfm,
    TanhDemo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub system: SystemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "T")]
    pub period: f64,
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub solver: StepConfig,
    #[serde(default = "default_orbit_tol")]
    pub orbit_tol: f64,
    #[serde(rename = "grid_M", default = "default_grid")]
    pub grid_m: usize,
    #[serde(default = "default_max_periods")]
    pub max_periods: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

fn default_orbit_tol() -> f64 {
    DEFAULT_ORBIT_TOL
}

fn default_grid() -> usize {
    DEFAULT_STEPS_PER_PERIOD
}

fn default_max_periods() -> usize {
    DEFAULT_MAX_PERIODS
}

/// A validated scenario plus any non-fatal notes produced while reading it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedScenario {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

pub fn parse_scenario(path: &Path) -> Result<ParsedScenario> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<ParsedScenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::scenario(path, e.into_inner().to_string())
    })?;
    let warnings = scenario.validate()?;
    Ok(ParsedScenario { scenario, warnings })
}

impl Scenario {
    /// Scenario for an RFM schedule with default numerics.
    pub fn rfm(id: impl Into<String>, schedule: &RateSchedule) -> Self {
        Scenario {
            id: id.into(),
            system: SystemKind::Rfm,
            n: Some(schedule.n()),
            period: schedule.period(),
            channels: schedule.channels().to_vec(),
            solver: StepConfig::default(),
            orbit_tol: DEFAULT_ORBIT_TOL,
            grid_m: DEFAULT_STEPS_PER_PERIOD,
            max_periods: DEFAULT_MAX_PERIODS,
            x0: None,
            condition: None,
        }
    }

    pub fn tanh_demo(id: impl Into<String>, input: &ScalarInput) -> Self {
        Scenario {
            system: SystemKind::TanhDemo,
            n: None,
            period: input.period,
            channels: vec![input.channel.clone()],
            ..Scenario::rfm(
                id,
                &RateSchedule::constant(1.0, &[1.0, 1.0]).expect("valid"),
            )
        }
    }

    /// Checks every field, wraps phases into `[0, 2 pi)` and aligns the
    /// solver grid with `grid_M`. Returns warnings for normalized phases.
    pub fn validate(&mut self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.id.trim().is_empty() {
            return Err(Error::scenario("id", "must not be empty"));
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::scenario(
                "T",
                format!("must be positive, got {}", self.period),
            ));
        }
        if !(self.orbit_tol > 0.0) {
            return Err(Error::scenario("orbit_tol", "must be positive"));
        }
        if self.grid_m < 2 {
            return Err(Error::scenario("grid_M", "must be >= 2"));
        }
        if self.max_periods == 0 {
            return Err(Error::scenario("max_periods", "must be >= 1"));
        }
        if self.solver.steps_per_period != DEFAULT_STEPS_PER_PERIOD
            && self.solver.steps_per_period != self.grid_m
        {
            return Err(Error::scenario(
                "solver.steps_per_period",
                format!(
                    "conflicts with grid_M = {} (the integrator grid is the orbit grid)",
                    self.grid_m
                ),
            ));
        }
        self.solver.steps_per_period = self.grid_m;
        self.solver
            .validate()
            .map_err(|e| Error::scenario("solver", e.to_string()))?;

        for (i, ch) in self.channels.iter_mut().enumerate() {
            for (j, h) in ch.harmonics.iter_mut().enumerate() {
                let field = format!("channels[{i}].harmonics[{j}]");
                if h.k == 0 {
                    return Err(Error::scenario(format!("{field}.k"), "must be >= 1"));
                }
                if !(h.amplitude >= 0.0) || !h.amplitude.is_finite() {
                    return Err(Error::scenario(
                        format!("{field}.amplitude"),
                        "must be finite and >= 0",
                    ));
                }
                if !h.phase.is_finite() {
                    return Err(Error::scenario(format!("{field}.phase"), "must be finite"));
                }
                let p = normalize_phase(h.phase);
                if p != h.phase {
                    warnings.push(format!(
                        "{field}.phase: {} normalized to {p} (phases live in [0, 2pi))",
                        h.phase
                    ));
                    h.phase = p;
                }
            }
        }

        match self.system {
            SystemKind::Rfm => self.validate_rfm()?,
            SystemKind::TanhDemo => self.validate_tanh()?,
        }
        Ok(warnings)
    }

    fn validate_rfm(&self) -> Result<()> {
        let n = self
            .n
            .ok_or_else(|| Error::scenario("n", "required for system rfm"))?;
        if n == 0 {
            return Err(Error::scenario("n", "must be >= 1"));
        }
        if self.channels.len() != n + 1 {
            return Err(Error::scenario(
                "channels",
                format!(
                    "expected n + 1 = {} channels, got {}",
                    n + 1,
                    self.channels.len()
                ),
            ));
        }
        let schedule = self.schedule()?;
        if let Some(x0) = &self.x0 {
            if x0.len() != n || x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::scenario(
                    "x0",
                    format!("must hold {n} values in [0, 1]"),
                ));
            }
        }
        if let Some(c) = self.condition {
            if !c.parity_ok(n) {
                return Err(Error::scenario(
                    "condition",
                    format!("condition {c} does not apply to n = {n} (parity)"),
                ));
            }
            if !check_condition(&schedule, c).holds {
                return Err(Error::scenario(
                    "condition",
                    format!("the schedule does not have the structure of condition {c}"),
                ));
            }
        }
        Ok(())
    }

    fn validate_tanh(&self) -> Result<()> {
        if self.n.is_some_and(|n| n != 1) {
            return Err(Error::scenario("n", "the tanh demo is one-dimensional"));
        }
        if self.channels.len() != 1 {
            return Err(Error::scenario(
                "channels",
                format!(
                    "the tanh demo takes one input channel, got {}",
                    self.channels.len()
                ),
            ));
        }
        if self.condition.is_some() {
            return Err(Error::scenario(
                "condition",
                "only meaningful for system rfm",
            ));
        }
        TanhDemo
            .equilibrium(self.channels[0].mean)
            .map_err(|e| Error::scenario("channels[0].mean", e.to_string()))?;
        if let Some(x0) = &self.x0 {
            if x0.len() != 1 || !(x0[0] >= 0.0) {
                return Err(Error::scenario("x0", "must hold one value >= 0"));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<RateSchedule> {
        if self.system != SystemKind::Rfm {
            return Err(Error::scenario("system", "not an rfm scenario"));
        }
        RateSchedule::new(self.period, self.channels.clone()).map_err(|e| match e {
            Error::NonPositiveRate { channel, t, value } if t.is_nan() => Error::scenario(
                format!("channels[{channel}].mean"),
                format!("rate must be positive, got {value}"),
            ),
            Error::NonPositiveRate { channel, t, value } => Error::scenario(
                format!("channels[{channel}]"),
                format!("rate reaches {value} at t = {t}; every rate must stay positive"),
            ),
            other => Error::scenario("channels", other.to_string()),
        })
    }

    pub fn scalar_input(&self) -> Result<ScalarInput> {
        if self.system != SystemKind::TanhDemo {
            return Err(Error::scenario("system", "not a tanh_demo scenario"));
        }
        ScalarInput::new(self.period, self.channels[0].clone())
    }

    pub fn orbit_config(&self) -> OrbitConfig {
        OrbitConfig {
            step: self.solver.clone(),
            orbit_tol: self.orbit_tol,
            max_periods: self.max_periods,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
