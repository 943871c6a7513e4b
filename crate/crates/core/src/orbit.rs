//! The attracting periodic orbit and its period-averaged moments.
//!
//! The orbit is found by iterating the period map from a seed (the
//! constant-rate equilibrium for the RFM) until the displacement
//! `|P(x) - x|_inf` drops below the tolerance, then sampled over one more
//! period on the integrator grid. Averages use the periodic rectangle rule on
//! that grid, which coincides with the trapezoid rule with the endpoints
//! identified.
//!
//! Moments follow the shifted variables `z = gamma - e`:
//! `eta2(i, j) = <u_i z_j>` and `eta3(i, j, k) = <u_i z_j z_k>`, with
//! `z_0 = z_{n+1} = 0`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::integrator::{PeriodMap, StepConfig};
use crate::model::{Dynamics, Rfm};
use crate::schedules::{Forcing, RateSchedule};

pub const DEFAULT_ORBIT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_PERIODS: usize = 2000;
/// A component is treated as constant when it never strays further than this
/// from its period average.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitConfig {
    pub step: StepConfig,
    pub orbit_tol: f64,
    pub max_periods: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            step: StepConfig::default(),
            orbit_tol: DEFAULT_ORBIT_TOL,
            max_periods: DEFAULT_MAX_PERIODS,
        }
    }
}

/// One period of the attracting solution, sampled at `t_k = k T / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicOrbit {
    pub period: f64,
    pub times: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    /// Inputs at each sample time.
    pub inputs: Vec<Vec<f64>>,
    /// `|P(gamma(0)) - gamma(0)|_inf`.
    pub closure_error: f64,
    /// Applications of the period map before convergence.
    pub periods_used: usize,
    /// Ratio of the last two displacements; close to 1 means weak contraction.
    pub contraction_ratio: f64,
    pub max_clamp: f64,
}

impl PeriodicOrbit {
    pub fn dim(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn initial_point(&self) -> &[f64] {
        &self.gamma[0]
    }

    /// Period averages of every state component.
    pub fn mean_state(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| period_average(self, |_, x, _| x[i]))
            .collect()
    }

    /// 0-based indices of components that are constant along the orbit.
    pub fn constant_components(&self) -> Vec<usize> {
        let mean = self.mean_state();
        (0..self.dim())
            .filter(|&i| {
                self.gamma
                    .iter()
                    .all(|x| (x[i] - mean[i]).abs() < DEGENERACY_THRESHOLD)
            })
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.constant_components().is_empty()
    }
}

/// Iterates the period map from `x0` to its fixed point and samples the
/// resulting orbit.
pub fn find_periodic_orbit<D, F>(
    dynamics: &D,
    forcing: &F,
    x0: &[f64],
    cfg: &OrbitConfig,
) -> Result<PeriodicOrbit>
where
    D: Dynamics + ?Sized,
    F: Forcing + ?Sized,
{
    if !(cfg.orbit_tol > 0.0) {
        return Err(Error::InvalidArgument("orbit_tol must be positive".into()));
    }
    if cfg.max_periods == 0 {
        return Err(Error::InvalidArgument("max_periods must be >= 1".into()));
    }
    dynamics.check_state(x0)?;
    let map = PeriodMap::new(dynamics, forcing, &cfg.step)?;
    let mut x = x0.to_vec();
    let mut prev = f64::NAN;
    let mut ratio = f64::NAN;
    let mut used = 0;
    let mut converged = false;
    while used < cfg.max_periods {
        let y = map.apply(&x)?;
        used += 1;
        let d = max_distance(&x, &y);
        ratio = d / prev;
        prev = d;
        x = y;
        if d < cfg.orbit_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::OrbitNotConverged {
            periods: used,
            last_displacement: prev,
            last_ratio: ratio,
        });
    }

    let traj = map.sample(&x, &[])?;
    let mut gamma = traj.states;
    let end = gamma.pop().expect("sampled period has at least two points");
    let mut times = traj.times;
    times.pop();
    let closure_error = max_distance(&gamma[0], &end);
    let inputs = times
        .iter()
        .map(|&t| {
            let mut u = vec![0.0; forcing.inputs()];
            forcing.eval_into(t, &mut u);
            u
        })
        .collect();
    Ok(PeriodicOrbit {
        period: forcing.period(),
        times,
        gamma,
        inputs,
        closure_error,
        periods_used: used,
        contraction_ratio: ratio,
        max_clamp: traj.max_clamp,
    })
}

/// RFM orbit seeded at the constant-rate equilibrium.
pub fn find_rfm_orbit(
    schedule: &RateSchedule,
    eq: &Equilibrium,
    cfg: &OrbitConfig,
) -> Result<PeriodicOrbit> {
    if eq.n() != schedule.n() {
        return Err(Error::Dimension {
            what: "equilibrium",
            expected: schedule.n(),
            got: eq.n(),
        });
    }
    find_periodic_orbit(&Rfm::new(schedule.n())?, schedule, &eq.e, cfg)
}

fn max_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `(1/T) ∫_0^T f(t, gamma(t), u(t)) dt` on the orbit grid.
pub fn period_average(orbit: &PeriodicOrbit, f: impl Fn(f64, &[f64], &[f64]) -> f64) -> f64 {
    let m = orbit.samples();
    let sum: f64 = orbit
        .times
        .iter()
        .zip(&orbit.gamma)
        .zip(&orbit.inputs)
        .map(|((&t, x), u)| f(t, x, u))
        .sum();
    sum / m as f64
}

/// Residuals of the moment identities. All are zero for the exact orbit; the
/// slacks are non-negative, and strictly positive for non-constant sites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `eta(0,1) + eta(n,n)`.
    pub r_flow: f64,
    /// `R_P + eta(0,1) - R_C`.
    pub r_prod: f64,
    /// Indexed by `i = 0..=n`:
    /// `eta(i,i,i+1) - eta(0,1) - eta(i,i)(1 - e_{i+1}) + eta(i,i+1) e_i`.
    pub r_eta3: Vec<f64>,
    /// Indexed by `i - 1` for `i = 1..=n`:
    /// `eta(0,1) - eta(i,i+1) e_i^2 + eta(i-1,i-1)(1 - e_i)^2`.
    pub slack: Vec<f64>,
}

impl IdentityResiduals {
    pub fn max_abs_eta3(&self) -> f64 {
        self.r_eta3.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Flattened `(name, value)` list.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("r_flow".to_string(), self.r_flow),
            ("r_prod".to_string(), self.r_prod),
        ];
        out.extend(
            self.r_eta3
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("r_eta3.{i}"), *v)),
        );
        out.extend(
            self.slack
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("slack.{}", i + 1), *v)),
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub n: usize,
    pub mean_x: Vec<f64>,
    pub mean_z: Vec<f64>,
    /// Keyed by `(i, j)`; z-slot indices are 1-based.
    pub eta2: BTreeMap<(usize, usize), f64>,
    /// Keyed by `(i, j, k)`.
    pub eta3: BTreeMap<(usize, usize, usize), f64>,
    pub r_p: f64,
    pub r_c: f64,
    pub goe_gap: f64,
    pub residuals: IdentityResiduals,
}

impl MomentReport {
    /// `eta(i, j)`; zero whenever `j` is a boundary slot.
    pub fn eta2(&self, i: usize, j: usize) -> Option<f64> {
        if j == 0 || j == self.n + 1 {
            return Some(0.0);
        }
        self.eta2.get(&(i, j)).copied()
    }

    /// `eta(i, j, k)`; zero whenever `j` or `k` is a boundary slot.
    pub fn eta3(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        let boundary = |s: usize| s == 0 || s == self.n + 1;
        if boundary(j) || boundary(k) {
            return Some(0.0);
        }
        self.eta3.get(&(i, j, k)).copied()
    }

    /// Flat JSON object with keys `eta2.i.j`, `eta3.i.j.k`, `R_P`, `R_C`,
    /// `goe_gap`, `mean_x.i`, `mean_z.i` and `residuals.*`.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("n".into(), Value::from(self.n));
        for (&(i, j), v) in &self.eta2 {
            m.insert(format!("eta2.{i}.{j}"), Value::from(*v));
        }
        for (&(i, j, k), v) in &self.eta3 {
            m.insert(format!("eta3.{i}.{j}.{k}"), Value::from(*v));
        }
        for (i, v) in self.mean_x.iter().enumerate() {
            m.insert(format!("mean_x.{}", i + 1), Value::from(*v));
        }
        for (i, v) in self.mean_z.iter().enumerate() {
            m.insert(format!("mean_z.{}", i + 1), Value::from(*v));
        }
        m.insert("R_P".into(), Value::from(self.r_p));
        m.insert("R_C".into(), Value::from(self.r_c));
        m.insert("goe_gap".into(), Value::from(self.goe_gap));
        for (name, v) in self.residuals.named() {
            m.insert(format!("residuals.{name}"), Value::from(v));
        }
        Value::Object(m)
    }
}

/// Moments needed by the identities: `(0,1)`, `(n,n)`, `(i,i)`, `(i,i+1)`,
/// `(i,i,i+1)`.
pub fn compute_moments(
    orbit: &PeriodicOrbit,
    schedule: &RateSchedule,
    eq: &Equilibrium,
) -> Result<MomentReport> {
    compute_moments_with(orbit, schedule, eq, false)
}

/// As [`compute_moments`]; with `full_table` every `eta(i, j)` for
/// `i = 0..=n`, `j = 1..=n` is included as well.
pub fn compute_moments_with(
    orbit: &PeriodicOrbit,
    schedule: &RateSchedule,
    eq: &Equilibrium,
    full_table: bool,
) -> Result<MomentReport> {
    let n = schedule.n();
    if orbit.dim() != n {
        return Err(Error::Dimension {
            what: "orbit",
            expected: n,
            got: orbit.dim(),
        });
    }
    if eq.n() != n {
        return Err(Error::Dimension {
            what: "equilibrium",
            expected: n,
            got: eq.n(),
        });
    }
    if orbit.inputs.first().map_or(0, Vec::len) != n + 1 {
        return Err(Error::Dimension {
            what: "orbit inputs",
            expected: n + 1,
            got: orbit.inputs.first().map_or(0, Vec::len),
        });
    }
    let e = &eq.e;
    // z_j with 1-based j and the boundary convention.
    let z = |x: &[f64], j: usize| -> f64 {
        if j == 0 || j == n + 1 {
            0.0
        } else {
            x[j - 1] - e[j - 1]
        }
    };
    let avg2 = |i: usize, j: usize| period_average(orbit, |_, x, u| u[i] * z(x, j));
    let avg3 =
        |i: usize, j: usize, k: usize| period_average(orbit, |_, x, u| u[i] * z(x, j) * z(x, k));

    let mut eta2 = BTreeMap::new();
    let mut put2 = |i: usize, j: usize| {
        if (1..=n).contains(&j) {
            eta2.entry((i, j)).or_insert_with(|| avg2(i, j));
        }
    };
    put2(0, 1);
    put2(n, n);
    for i in 0..=n {
        put2(i, i);
        put2(i, i + 1);
    }
    if full_table {
        for i in 0..=n {
            for j in 1..=n {
                put2(i, j);
            }
        }
    }
    // i = 0 and i = n touch a boundary slot and are exactly zero.
    let mut eta3 = BTreeMap::new();
    for i in 0..=n {
        let v = if i == 0 || i == n {
            0.0
        } else {
            avg3(i, i, i + 1)
        };
        eta3.insert((i, i, i + 1), v);
    }

    let mean_x = orbit.mean_state();
    let mean_z = mean_x.iter().zip(e).map(|(m, e)| m - e).collect();
    let r_p = period_average(orbit, |_, x, u| u[n] * x[n - 1]);
    let mut report = MomentReport {
        n,
        mean_x,
        mean_z,
        eta2,
        eta3,
        r_p,
        r_c: eq.r_c,
        goe_gap: r_p - eq.r_c,
        residuals: IdentityResiduals {
            r_flow: 0.0,
            r_prod: 0.0,
            r_eta3: Vec::new(),
            slack: Vec::new(),
        },
    };
    report.residuals = identity_residuals(&report, eq);
    Ok(report)
}

/// Evaluates the flow, production, third-moment and lower-bound identities
/// from the moments in `report`.
pub fn identity_residuals(report: &MomentReport, eq: &Equilibrium) -> IdentityResiduals {
    let n = report.n;
    let eta2 = |i, j| {
        report
            .eta2(i, j)
            .expect("moment table covers the identities")
    };
    let eta3 = |i, j, k| {
        report
            .eta3(i, j, k)
            .expect("moment table covers the identities")
    };
    // e_j with e_0 = 1, e_{n+1} = 0.
    let e = |j: usize| {
        if j == 0 {
            1.0
        } else if j == n + 1 {
            0.0
        } else {
            eq.e[j - 1]
        }
    };
    let eta01 = eta2(0, 1);
    let r_eta3 = (0..=n)
        .map(|i| eta3(i, i, i + 1) - eta01 - eta2(i, i) * (1.0 - e(i + 1)) + eta2(i, i + 1) * e(i))
        .collect();
    let slack = (1..=n)
        .map(|i| eta01 - eta2(i, i + 1) * e(i).powi(2) + eta2(i - 1, i - 1) * (1.0 - e(i)).powi(2))
        .collect();
    IdentityResiduals {
        r_flow: eta01 + eta2(n, n),
        r_prod: report.r_p + eta01 - report.r_c,
        r_eta3,
        slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_equilibrium;
    use crate::model::TanhDemo;
    use crate::reference;

    #[test]
    fn constant_schedule_orbit_is_the_equilibrium() {
        let s = RateSchedule::constant(1.0, &[3.0, 1.0, 4.0, 2.0]).unwrap();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let cfg = OrbitConfig {
            step: StepConfig::fixed_rk4(256),
            ..Default::default()
        };
        let orbit = find_rfm_orbit(&s, &eq, &cfg).unwrap();
        assert!(orbit.closure_error < 1e-12);
        assert_eq!(orbit.constant_components(), vec![0, 1, 2]);
        let report = compute_moments(&orbit, &s, &eq).unwrap();
        assert!(report.eta2.values().all(|v| v.abs() < 1e-12));
        assert!(report.goe_gap.abs() < 1e-12);
        for (_, r) in report.residuals.named() {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn example2_orbit_and_production() {
        let s = reference::example2_schedule();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let orbit = find_rfm_orbit(&s, &eq, &OrbitConfig::default()).unwrap();
        for (a, b) in orbit
            .initial_point()
            .iter()
            .zip(reference::EXAMPLE2_ORBIT_POINT)
        {
            assert!((a - b).abs() < 1e-3);
        }
        let report = compute_moments(&orbit, &s, &eq).unwrap();
        assert!((report.r_p - 0.5927).abs() < 1e-3);
        assert!((report.goe_gap + 0.0244).abs() < 2e-3);
        let r = &report.residuals;
        assert!(r.r_flow.abs() < 1e-6 && r.r_prod.abs() < 1e-6 && r.max_abs_eta3() < 1e-6);
        assert!(r.min_slack() >= 0.0);
    }

    #[test]
    fn tanh_demo_orbit_average() {
        let u = reference::example1_input();
        let x0 = TanhDemo.equilibrium(0.0).unwrap();
        let orbit = find_periodic_orbit(&TanhDemo, &u, &[x0], &OrbitConfig::default()).unwrap();
        let mean = period_average(&orbit, |_, x, _| x[0]);
        assert!((mean - 0.8127).abs() < 1e-3);
    }

    #[test]
    fn period_average_basics() {
        let s = reference::example2_schedule();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let orbit = find_rfm_orbit(&s, &eq, &OrbitConfig::default()).unwrap();
        assert_eq!(period_average(&orbit, |_, _, _| 2.5), 2.5);
        let mean = orbit.mean_state();
        for i in 0..3 {
            assert!(period_average(&orbit, |_, x, _| x[i] - mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_moments_are_zero() {
        let s = reference::example2_schedule();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let orbit = find_rfm_orbit(&s, &eq, &OrbitConfig::default()).unwrap();
        let report = compute_moments_with(&orbit, &s, &eq, true).unwrap();
        assert_eq!(report.eta2(2, 0), Some(0.0));
        assert_eq!(report.eta2(1, 4), Some(0.0));
        assert_eq!(report.eta3(3, 3, 4), Some(0.0));
        assert_eq!(report.eta3(0, 0, 1), Some(0.0));
        assert_eq!(report.eta2.len(), 4 * 3);
        let json = report.to_json();
        assert!(json.get("eta2.0.1").is_some());
        assert!(json.get("eta3.1.1.2").is_some());
        assert!(json.get("residuals.slack.3").is_some());
    }

    #[test]
    fn end_slacks_reduce_to_the_two_special_bounds() {
        let s = reference::example2_schedule();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let orbit = find_rfm_orbit(&s, &eq, &OrbitConfig::default()).unwrap();
        let rep = compute_moments(&orbit, &s, &eq).unwrap();
        let n = 3;
        let e = &eq.e;
        let first = rep.eta2(0, 1).unwrap() - rep.eta2(1, 2).unwrap() * e[0] * e[0];
        let last =
            rep.eta2(0, 1).unwrap() + rep.eta2(n - 1, n - 1).unwrap() * (1.0 - e[n - 1]).powi(2);
        assert!((rep.residuals.slack[0] - first).abs() < 1e-15);
        assert!((rep.residuals.slack[n - 1] - last).abs() < 1e-15);
    }

    #[test]
    fn non_convergence_is_reported() {
        let s = reference::example2_schedule();
        let eq = solve_equilibrium(&s.mean_rates()).unwrap();
        let cfg = OrbitConfig {
            max_periods: 2,
            ..Default::default()
        };
        match find_rfm_orbit(&s, &eq, &cfg).unwrap_err() {
            Error::OrbitNotConverged {
                periods,
                last_ratio,
                ..
            } => {
                assert_eq!(periods, 2);
                assert!(last_ratio < 1.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
