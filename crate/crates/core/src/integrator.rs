//! Deterministic ODE integration with running-integral accumulators.
//!
//! The default method is classical fixed-step RK4 on a grid of
//! `steps_per_period` steps per period. A Dormand–Prince 5(4) embedded pair
//! is available for validation; it lands exactly on the same sample grid.
//!
//! Accumulators (for example `∫ u_n x_n dt`) are integrated as extra ODE
//! components, so they inherit the integrator's accuracy. After every step the
//! state components are clamped to the system's forward-invariant box; the
//! largest correction is reported as `max_clamp`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dynamics;
use crate::schedules::Forcing;

pub const DEFAULT_STEPS_PER_PERIOD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedRk4,
    AdaptiveEmbedded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub method: Method,
    /// The fixed step (and the sampling grid) is `T / steps_per_period`.
    pub steps_per_period: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the adaptive step. `None` means unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            method: Method::FixedRk4,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
        }
    }
}

impl StepConfig {
    pub fn fixed_rk4(steps_per_period: usize) -> Self {
        StepConfig {
            steps_per_period,
            ..Default::default()
        }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64) -> Self {
        StepConfig {
            method: Method::AdaptiveEmbedded,
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn fixed_step(&self, period: f64) -> f64 {
        period / self.steps_per_period as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period == 0 {
            return Err(Error::InvalidArgument(
                "steps_per_period must be >= 1".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if let Some(m) = self.max_step {
            if !(m > 0.0) {
                return Err(Error::InvalidArgument("max_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// What an accumulator integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// The system output (production rate `u_n x_n` for the RFM).
    Output,
    /// State component, 0-based.
    State(usize),
    /// Input channel, 0-based.
    Input(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Accumulator {
    pub name: String,
    pub integrand: Integrand,
}

impl Accumulator {
    pub fn new(name: impl Into<String>, integrand: Integrand) -> Self {
        Accumulator {
            name: name.into(),
            integrand,
        }
    }

    pub fn output() -> Self {
        Self::new("output", Integrand::Output)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccumulatorSeries {
    pub name: String,
    pub integrand: Integrand,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accumulators: Vec<AccumulatorSeries>,
    /// Largest clamp correction applied over the run.
    pub max_clamp: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn accumulator(&self, name: &str) -> Option<&AccumulatorSeries> {
        self.accumulators.iter().find(|a| a.name == name)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrates `dynamics` driven by `forcing` from `x0` over `[t0, t1]`,
/// sampling the state on the grid `t0 + k T / steps_per_period` plus `t1`.
pub fn integrate<D, F>(
    dynamics: &D,
    forcing: &F,
    x0: &[f64],
    t_span: (f64, f64),
    cfg: &StepConfig,
    accumulators: &[Accumulator],
) -> Result<Trajectory>
where
    D: Dynamics + ?Sized,
    F: Forcing + ?Sized,
{
    let (t0, t1) = t_span;
    check_inputs(dynamics, forcing, x0, cfg, accumulators)?;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "time span must satisfy t1 > t0, got [{t0}, {t1}]"
        )));
    }
    let integrands: Vec<Integrand> = accumulators.iter().map(|a| a.integrand).collect();
    let mut engine = Engine::new(dynamics, &integrands);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut acc_values = vec![Vec::new(); accumulators.len()];
    let dim = dynamics.dim();
    let mut record = |t: f64, y: &[f64]| {
        times.push(t);
        states.push(y[..dim].to_vec());
        for (vals, v) in acc_values.iter_mut().zip(&y[dim..]) {
            vals.push(*v);
        }
    };
    let mut y = augmented(x0, accumulators.len());
    let h = cfg.fixed_step(forcing.period());
    let max_clamp = match cfg.method {
        Method::FixedRk4 => engine.fixed_rk4(
            &mut y,
            t0,
            t1,
            h,
            |_, t, u| forcing.eval_into(t, u),
            &mut record,
        ),
        Method::AdaptiveEmbedded => {
            engine.adaptive(&mut y, t0, t1, h, cfg, forcing, &mut record)?
        }
    };
    let accumulators = accumulators
        .iter()
        .zip(acc_values)
        .map(|(a, values)| AccumulatorSeries {
            name: a.name.clone(),
            integrand: a.integrand,
            values,
        })
        .collect();
    Ok(Trajectory {
        times,
        states,
        accumulators,
        max_clamp,
    })
}

/// The time-`T` map `x0 -> x(T)`, starting at phase 0.
pub fn advance_period<D, F>(
    dynamics: &D,
    forcing: &F,
    x0: &[f64],
    cfg: &StepConfig,
) -> Result<Vec<f64>>
where
    D: Dynamics + ?Sized,
    F: Forcing + ?Sized,
{
    PeriodMap::new(dynamics, forcing, cfg)?.apply(x0)
}

/// Repeated applications of the period map, with the inputs of every RK4
/// stage tabulated once.
pub struct PeriodMap<'a, D: ?Sized, F: ?Sized> {
    dynamics: &'a D,
    forcing: &'a F,
    cfg: StepConfig,
    /// Inputs at `j T / (2M)` for `j = 0..=2M`, row-major.
    table: Option<Vec<f64>>,
}

impl<'a, D, F> PeriodMap<'a, D, F>
where
    D: Dynamics + ?Sized,
    F: Forcing + ?Sized,
{
    pub fn new(dynamics: &'a D, forcing: &'a F, cfg: &StepConfig) -> Result<Self> {
        cfg.validate()?;
        if forcing.inputs() != dynamics.inputs() {
            return Err(Error::Dimension {
                what: "forcing channels",
                expected: dynamics.inputs(),
                got: forcing.inputs(),
            });
        }
        let table = (cfg.method == Method::FixedRk4).then(|| {
            let m = dynamics.inputs();
            let rows = 2 * cfg.steps_per_period + 1;
            let half = 0.5 * cfg.fixed_step(forcing.period());
            let mut table = vec![0.0; rows * m];
            for (j, row) in table.chunks_exact_mut(m).enumerate() {
                forcing.eval_into(j as f64 * half, row);
            }
            table
        });
        Ok(PeriodMap {
            dynamics,
            forcing,
            cfg: cfg.clone(),
            table,
        })
    }

    pub fn period(&self) -> f64 {
        self.forcing.period()
    }

    pub fn step_config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn apply(&self, x0: &[f64]) -> Result<Vec<f64>> {
        self.run(x0, &[], &mut |_, _| {}).map(|(y, _)| y)
    }

    /// Integrates one period from `x0`, recording every grid sample
    /// (including `t = T`).
    pub fn sample(&self, x0: &[f64], accumulators: &[Accumulator]) -> Result<Trajectory> {
        let dim = self.dynamics.dim();
        let mut times = Vec::with_capacity(self.cfg.steps_per_period + 1);
        let mut states = Vec::with_capacity(self.cfg.steps_per_period + 1);
        let mut acc_values = vec![Vec::new(); accumulators.len()];
        let (_, max_clamp) = self.run(x0, accumulators, &mut |t, y| {
            times.push(t);
            states.push(y[..dim].to_vec());
            for (vals, v) in acc_values.iter_mut().zip(&y[dim..]) {
                vals.push(*v);
            }
        })?;
        Ok(Trajectory {
            times,
            states,
            accumulators: accumulators
                .iter()
                .zip(acc_values)
                .map(|(a, values)| AccumulatorSeries {
                    name: a.name.clone(),
                    integrand: a.integrand,
                    values,
                })
                .collect(),
            max_clamp,
        })
    }

    fn run(
        &self,
        x0: &[f64],
        accumulators: &[Accumulator],
        on_sample: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<(Vec<f64>, f64)> {
        check_inputs(self.dynamics, self.forcing, x0, &self.cfg, accumulators)?;
        let integrands: Vec<Integrand> = accumulators.iter().map(|a| a.integrand).collect();
        let mut engine = Engine::new(self.dynamics, &integrands);
        let mut y = augmented(x0, accumulators.len());
        let period = self.forcing.period();
        let h = self.cfg.fixed_step(period);
        let clamp = match &self.table {
            Some(table) => {
                let m = self.dynamics.inputs();
                engine.fixed_rk4(
                    &mut y,
                    0.0,
                    period,
                    h,
                    |j, _, u| u.copy_from_slice(&table[j * m..(j + 1) * m]),
                    on_sample,
                )
            }
            None => engine.adaptive(&mut y, 0.0, period, h, &self.cfg, self.forcing, on_sample)?,
        };
        y.truncate(self.dynamics.dim());
        Ok((y, clamp))
    }
}

fn check_inputs<D, F>(
    dynamics: &D,
    forcing: &F,
    x0: &[f64],
    cfg: &StepConfig,
    accumulators: &[Accumulator],
) -> Result<()>
where
    D: Dynamics + ?Sized,
    F: Forcing + ?Sized,
{
    cfg.validate()?;
    dynamics.check_state(x0)?;
    if forcing.inputs() != dynamics.inputs() {
        return Err(Error::Dimension {
            what: "forcing channels",
            expected: dynamics.inputs(),
            got: forcing.inputs(),
        });
    }
    for a in accumulators {
        let ok = match a.integrand {
            Integrand::Output => true,
            Integrand::State(i) => i < dynamics.dim(),
            Integrand::Input(i) => i < dynamics.inputs(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "accumulator `{}` refers to a component out of range",
                a.name
            )));
        }
    }
    Ok(())
}

fn augmented(x0: &[f64], extra: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(x0.len() + extra);
    y.extend_from_slice(x0);
    y.resize(x0.len() + extra, 0.0);
    y
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Engine<'a, D: ?Sized> {
    dynamics: &'a D,
    integrands: &'a [Integrand],
    dim: usize,
    u: Vec<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y5: Vec<f64>,
}

impl<'a, D: Dynamics + ?Sized> Engine<'a, D> {
    fn new(dynamics: &'a D, integrands: &'a [Integrand]) -> Self {
        let dim = dynamics.dim();
        let len = dim + integrands.len();
        Engine {
            dynamics,
            integrands,
            dim,
            u: vec![0.0; dynamics.inputs()],
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
            y5: vec![0.0; len],
        }
    }

    #[inline]
    fn rhs(
        dynamics: &D,
        integrands: &[Integrand],
        dim: usize,
        y: &[f64],
        u: &[f64],
        dy: &mut [f64],
    ) {
        let x = &y[..dim];
        dynamics.field(x, u, &mut dy[..dim]);
        for (d, integrand) in dy[dim..].iter_mut().zip(integrands) {
            *d = match *integrand {
                Integrand::Output => dynamics.output(x, u),
                Integrand::State(i) => x[i],
                Integrand::Input(i) => u[i],
            };
        }
    }

    fn clamp(&self, y: &mut [f64]) -> f64 {
        let (lo, hi) = self.dynamics.bounds();
        let mut worst = 0.0f64;
        for v in &mut y[..self.dim] {
            let c = v.clamp(lo, hi);
            worst = worst.max((c - *v).abs());
            *v = c;
        }
        worst
    }

    /// Classical RK4. `inputs(j, t, out)` fills the inputs at half-step index
    /// `j` (time `t`); stage times are `t_k`, `t_k + h/2`, `t_{k+1}`.
    #[allow(clippy::needless_range_loop)]
    fn fixed_rk4(
        &mut self,
        y: &mut [f64],
        t0: f64,
        t1: f64,
        h: f64,
        inputs: impl Fn(usize, f64, &mut [f64]),
        on_sample: &mut dyn FnMut(f64, &[f64]),
    ) -> f64 {
        let steps = (((t1 - t0) / h) - 1e-9).ceil().max(1.0) as usize;
        let mut max_clamp = 0.0f64;
        on_sample(t0, y);
        let (dynamics, integrands, dim) = (self.dynamics, self.integrands, self.dim);
        for s in 0..steps {
            let ta = t0 + s as f64 * h;
            let tb = if s + 1 == steps {
                t1
            } else {
                t0 + (s + 1) as f64 * h
            };
            let hs = tb - ta;
            let [k1, k2, k3, k4, ..] = &mut self.k;
            let tmp = &mut self.tmp;
            let u = &mut self.u;

            inputs(2 * s, ta, u);
            Self::rhs(dynamics, integrands, dim, y, u, k1);
            inputs(2 * s + 1, ta + 0.5 * hs, u);
            for i in 0..y.len() {
                tmp[i] = y[i] + 0.5 * hs * k1[i];
            }
            Self::rhs(dynamics, integrands, dim, tmp, u, k2);
            for i in 0..y.len() {
                tmp[i] = y[i] + 0.5 * hs * k2[i];
            }
            Self::rhs(dynamics, integrands, dim, tmp, u, k3);
            inputs(2 * s + 2, tb, u);
            for i in 0..y.len() {
                tmp[i] = y[i] + hs * k3[i];
            }
            Self::rhs(dynamics, integrands, dim, tmp, u, k4);
            for i in 0..y.len() {
                y[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            max_clamp = max_clamp.max(self.clamp(y));
            on_sample(tb, y);
        }
        max_clamp
    }

    /// Dormand–Prince 5(4) with standard step control, stopping exactly at
    /// every sample point `t0 + k h_grid` and at `t1`.
    #[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
    fn adaptive<F: Forcing + ?Sized>(
        &mut self,
        y: &mut [f64],
        t0: f64,
        t1: f64,
        h_grid: f64,
        cfg: &StepConfig,
        forcing: &F,
        on_sample: &mut dyn FnMut(f64, &[f64]),
    ) -> Result<f64> {
        let samples = (((t1 - t0) / h_grid) - 1e-9).ceil().max(1.0) as usize;
        let max_step = cfg.max_step.unwrap_or(f64::INFINITY);
        let mut h = (0.25 * h_grid).min(max_step);
        let mut t = t0;
        let mut max_clamp = 0.0f64;
        let (dynamics, integrands, dim) = (self.dynamics, self.integrands, self.dim);
        let len = y.len();
        on_sample(t0, y);
        for s in 0..samples {
            let target = if s + 1 == samples {
                t1
            } else {
                t0 + (s + 1) as f64 * h_grid
            };
            while t < target {
                let last = target - t <= h * (1.0 + 1e-12);
                let hs = if last { target - t } else { h };
                if hs < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow (h = {hs:e})"),
                    });
                }
                for stage in 0..7 {
                    for i in 0..len {
                        let mut acc = y[i];
                        for (j, a) in DP_A[stage].iter().enumerate().take(stage) {
                            acc += hs * a * self.k[j][i];
                        }
                        self.tmp[i] = acc;
                    }
                    forcing.eval_into(t + DP_C[stage] * hs, &mut self.u);
                    Self::rhs(
                        dynamics,
                        integrands,
                        dim,
                        &self.tmp,
                        &self.u,
                        &mut self.k[stage],
                    );
                }
                let mut err = 0.0f64;
                for i in 0..len {
                    let mut s5 = y[i];
                    let mut s4 = y[i];
                    for j in 0..7 {
                        s5 += hs * DP_B5[j] * self.k[j][i];
                        s4 += hs * DP_B4[j] * self.k[j][i];
                    }
                    self.y5[i] = s5;
                    let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(s5.abs());
                    err = err.max(((s5 - s4) / scale).abs());
                }
                if !err.is_finite() {
                    return Err(Error::Integration {
                        t,
                        reason: "non-finite error estimate".into(),
                    });
                }
                if err <= 1.0 {
                    y.copy_from_slice(&self.y5);
                    max_clamp = max_clamp.max(self.clamp(y));
                    t = if last { target } else { t + hs };
                }
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || err > 1.0 {
                    h = (hs * factor).min(max_step);
                }
            }
            on_sample(target, y);
        }
        Ok(max_clamp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Rfm, TanhDemo};
    use crate::schedules::{Channel, Harmonic, RateSchedule, ScalarInput};

    /// x' = -x + u with u = cos(2 pi t): exact periodic solution known.
    struct Linear;
    impl Dynamics for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn inputs(&self) -> usize {
            1
        }
        fn field(&self, x: &[f64], u: &[f64], dx: &mut [f64]) {
            dx[0] = -x[0] + u[0];
        }
        fn output(&self, x: &[f64], _: &[f64]) -> f64 {
            x[0]
        }
        fn bounds(&self) -> (f64, f64) {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    fn cosine() -> ScalarInput {
        ScalarInput::new(
            1.0,
            Channel::with_harmonics(0.0, vec![Harmonic::new(1, 1.0, 0.0)]),
        )
        .unwrap()
    }

    fn exact_linear(t: f64, x0: f64) -> f64 {
        // Particular solution (cos wt + w sin wt)/(1+w^2) plus decaying homogeneous part.
        let w = std::f64::consts::TAU;
        let p = |t: f64| ((w * t).cos() + w * (w * t).sin()) / (1.0 + w * w);
        p(t) + (x0 - p(0.0)) * (-t).exp()
    }

    #[test]
    fn rk4_matches_closed_form() {
        let traj = integrate(
            &Linear,
            &cosine(),
            &[0.3],
            (0.0, 2.0),
            &StepConfig::fixed_rk4(256),
            &[],
        )
        .unwrap();
        assert_eq!(traj.len(), 513);
        assert!((traj.final_state()[0] - exact_linear(2.0, 0.3)).abs() < 1e-9);
    }

    #[test]
    fn adaptive_matches_closed_form_on_same_grid() {
        let mut cfg = StepConfig::adaptive(1e-10, 1e-12);
        cfg.steps_per_period = 64;
        let traj = integrate(&Linear, &cosine(), &[0.3], (0.0, 2.0), &cfg, &[]).unwrap();
        assert_eq!(traj.len(), 129);
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert!((x[0] - exact_linear(*t, 0.3)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn partial_last_step_lands_on_t1() {
        let traj = integrate(
            &Linear,
            &cosine(),
            &[0.0],
            (0.0, 0.3),
            &StepConfig::fixed_rk4(8),
            &[],
        )
        .unwrap();
        assert_eq!(*traj.times.last().unwrap(), 0.3);
        assert_eq!(traj.len(), 4);
    }

    #[test]
    fn accumulator_integrates_input() {
        let acc = [
            Accumulator::new("u", Integrand::Input(0)),
            Accumulator::new("one", Integrand::State(0)),
        ];
        let traj = integrate(
            &Linear,
            &cosine(),
            &[0.0],
            (0.0, 1.0),
            &StepConfig::fixed_rk4(512),
            &acc,
        )
        .unwrap();
        let u_int = traj
            .accumulator("u")
            .unwrap()
            .values
            .last()
            .copied()
            .unwrap();
        assert!(u_int.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = RateSchedule::constant(1.0, &[1.0, 1.0]).unwrap();
        let rfm = Rfm::new(1).unwrap();
        let cfg = StepConfig::default();
        assert!(integrate(&rfm, &s, &[1.5], (0.0, 1.0), &cfg, &[]).is_err());
        assert!(integrate(&rfm, &s, &[0.5], (1.0, 1.0), &cfg, &[]).is_err());
        assert!(integrate(&rfm, &s, &[0.5, 0.5], (0.0, 1.0), &cfg, &[]).is_err());
        let bad = [Accumulator::new("x", Integrand::State(3))];
        assert!(integrate(&rfm, &s, &[0.5], (0.0, 1.0), &cfg, &bad).is_err());
        let two = RateSchedule::constant(1.0, &[1.0, 1.0, 1.0]).unwrap();
        assert!(integrate(&rfm, &two, &[0.5], (0.0, 1.0), &cfg, &[]).is_err());
        assert!(integrate(&TanhDemo, &s, &[0.5], (0.0, 1.0), &cfg, &[]).is_err());
    }

    #[test]
    fn period_map_matches_integrate() {
        let s = RateSchedule::new(
            1.0,
            vec![
                Channel::with_harmonics(2.0, vec![Harmonic::new(1, 1.0, 0.3)]),
                Channel::constant(1.0),
                Channel::with_harmonics(1.5, vec![Harmonic::new(2, 0.5, 2.0)]),
            ],
        )
        .unwrap();
        let rfm = Rfm::new(2).unwrap();
        let cfg = StepConfig::fixed_rk4(1024);
        let a = advance_period(&rfm, &s, &[0.2, 0.6], &cfg).unwrap();
        let b = integrate(&rfm, &s, &[0.2, 0.6], (0.0, 1.0), &cfg, &[]).unwrap();
        for (x, y) in a.iter().zip(b.final_state()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_reports_underflow() {
        struct Blowup;
        impl Dynamics for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn inputs(&self) -> usize {
                1
            }
            fn field(&self, x: &[f64], _: &[f64], dx: &mut [f64]) {
                dx[0] = x[0] * x[0];
            }
            fn output(&self, x: &[f64], _: &[f64]) -> f64 {
                x[0]
            }
            fn bounds(&self) -> (f64, f64) {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
        }
        // x' = x^2 from x = 1 blows up at t = 1.
        let err = integrate(
            &Blowup,
            &cosine(),
            &[1.0],
            (0.0, 2.0),
            &StepConfig::adaptive(1e-8, 1e-10),
            &[],
        )
        .unwrap_err();
        match err {
            Error::Integration { t, .. } => assert!(t > 0.9 && t < 1.0 + 1e-6, "t = {t}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
