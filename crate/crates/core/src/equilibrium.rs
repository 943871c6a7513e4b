//! Constant-rate steady state of the RFM.
//!
//! At equilibrium every site flux equals the same throughput `R`:
//! `u_i e_i (1 - e_{i+1}) = R` for `i = 1..n` and `u_0 (1 - e_1) = R`.
//! Given a trial `R`, the densities follow by back-substitution from the exit
//! end; `R` itself is found by bisection on the entry-flux defect
//! `u_0 (1 - e_1(R)) - R`, which is strictly decreasing on the feasible range.

use serde::Serialize;

use crate::error::{Error, Result};

/// The constant-rate fixed point `e` and its production rate `R_C`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub e: Vec<f64>,
    #[serde(rename = "R_C")]
    pub r_c: f64,
    /// Max absolute defect of the steady-state equations.
    pub residual: f64,
}

impl Equilibrium {
    pub fn n(&self) -> usize {
        self.e.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackSubstitution {
    Feasible {
        e: Vec<f64>,
        defect: f64,
    },
    /// Some density left `(0, 1)`; `site` is 1-based.
    Infeasible {
        site: usize,
    },
}

impl BackSubstitution {
    fn defect(&self) -> Option<f64> {
        match self {
            BackSubstitution::Feasible { defect, .. } => Some(*defect),
            BackSubstitution::Infeasible { .. } => None,
        }
    }
}

/// Densities implied by throughput `r`: `e_n = r / u_n`, then
/// `e_i = r / (u_i (1 - e_{i+1}))` down to `e_1`.
pub fn back_substitute(r: f64, means: &[f64]) -> BackSubstitution {
    let n = means.len() - 1;
    let mut e = vec![0.0; n];
    let mut room_next = 1.0;
    for i in (1..=n).rev() {
        let v = r / (means[i] * room_next);
        if !(v > 0.0 && v < 1.0) {
            return BackSubstitution::Infeasible { site: i };
        }
        e[i - 1] = v;
        room_next = 1.0 - v;
    }
    let defect = means[0] * (1.0 - e[0]) - r;
    BackSubstitution::Feasible { e, defect }
}

/// Densities implied by throughput `r` from the entry end:
/// `e_1 = 1 - r / u_0`, then `e_{i+1} = 1 - r / (u_i e_i)`, for the first
/// `k` sites. `None` if any density leaves `(0, 1)`.
fn forward_prefix(r: f64, means: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut e = Vec::with_capacity(k);
    let mut v = 1.0 - r / means[0];
    for &m in &means[1..=k] {
        if !(v > 0.0 && v < 1.0) {
            return None;
        }
        e.push(v);
        v = 1.0 - r / (m * v);
    }
    Some(e)
}

/// Forward substitution for sites `1..=k`, back-substitution for the rest.
/// All fluxes but the one across the junction equal `r` by construction.
fn spliced(r: f64, means: &[f64], backward: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut e = forward_prefix(r, means, k)?;
    e.extend_from_slice(&backward[k..]);
    Some(e)
}

/// Max over `i = 1..n` of `|u_{i-1} e_{i-1} (1 - e_i) - u_i e_i (1 - e_{i+1})|`
/// with `e_0 = 1`, `e_{n+1} = 0`.
pub fn steady_state_residual(means: &[f64], e: &[f64]) -> f64 {
    let n = e.len();
    let at = |j: usize| match j {
        0 => 1.0,
        j if j == n + 1 => 0.0,
        j => e[j - 1],
    };
    (1..=n)
        .map(|i| {
            let inflow = means[i - 1] * at(i - 1) * (1.0 - at(i));
            let outflow = means[i] * at(i) * (1.0 - at(i + 1));
            (inflow - outflow).abs()
        })
        .fold(0.0, f64::max)
}

const MAX_BISECTIONS: usize = 400;

/// Solves for the unique equilibrium under constant rates `means` (`n + 1`
/// positive values).
pub fn solve_equilibrium(means: &[f64]) -> Result<Equilibrium> {
    if means.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n + 1 >= 2 mean rates, got {}",
            means.len()
        )));
    }
    if let Some(i) = means.iter().position(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::NonPositiveRate {
            channel: i,
            t: f64::NAN,
            value: means[i],
        });
    }
    let n = means.len() - 1;

    // R = u_n makes e_n = 1, so the feasible range is (0, R_hi) with R_hi < u_n.
    // Find its upper end by bisection on feasibility.
    let (mut feas, mut infeas) = (0.0, means[n]);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (feas + infeas);
        if mid <= feas || mid >= infeas {
            break;
        }
        match back_substitute(mid, means) {
            BackSubstitution::Feasible { .. } => feas = mid,
            BackSubstitution::Infeasible { .. } => infeas = mid,
        }
    }
    let r_hi = feas;
    let d_hi = back_substitute(r_hi, means).defect().ok_or_else(|| {
        Error::Bracket(format!(
            "no feasible throughput found below u_n = {}",
            means[n]
        ))
    })?;
    let r = if d_hi > 0.0 {
        // The defect is negative just past the boundary in exact arithmetic.
        // If the boundary is resolved to adjacent floats the root lies
        // within one ulp of it and r_hi is as good as R gets.
        let mid = 0.5 * (feas + infeas);
        if !(mid <= feas || mid >= infeas) {
            return Err(Error::Bracket(format!(
                "entry-flux defect is positive ({d_hi:e}) at the feasibility boundary R = {r_hi}"
            )));
        }
        r_hi
    } else {
        // Defect is positive as R -> 0+ (it tends to u_0) and non-positive at
        // r_hi. Bisect to the float resolution of R: with a tiny exit rate
        // R_C is tiny too, and an absolute stopping width would leave too
        // few digits.
        let (mut lo, mut hi) = (0.0, r_hi);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match back_substitute(mid, means).defect() {
                Some(d) if d > 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        polish(lo, hi, means)
    };
    let backward = match back_substitute(r, means) {
        BackSubstitution::Feasible { e, .. } => e,
        BackSubstitution::Infeasible { site } => {
            return Err(Error::Bracket(format!(
                "polished throughput infeasible at site {site}"
            )))
        }
    };
    // Near a slow link the defect is so steep in R that one ulp of R leaves
    // a visible flux mismatch wherever the substitution chain ends. Moving
    // the junction between forward and backward substitution moves that
    // mismatch; keep the junction that fits best.
    let (e, residual) = (0..=n)
        .filter_map(|k| spliced(r, means, &backward, k))
        .map(|e| {
            let res = steady_state_residual(means, &e);
            (e, res)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("k = 0 is the feasible back-substitution");
    Ok(Equilibrium {
        r_c: means[n] * e[n - 1],
        e,
        residual,
    })
}

/// A few secant steps inside the final bracket; keeps whichever throughput
/// has the smallest defect.
fn polish(lo: f64, hi: f64, means: &[f64]) -> f64 {
    let eval = |r: f64| back_substitute(r, means).defect().map(|d| (r, d));
    let mut candidates: Vec<(f64, f64)> = [lo, hi].into_iter().filter_map(eval).collect();
    if let [a, b] = candidates[..] {
        let (mut a, mut b) = (a, b);
        for _ in 0..3 {
            if a.1 == b.1 {
                break;
            }
            let r = b.0 - b.1 * (b.0 - a.0) / (b.1 - a.1);
            if !(r > lo.min(hi) - (hi - lo) && r < hi + (hi - lo)) {
                break;
            }
            match eval(r) {
                Some(c) => {
                    candidates.push(c);
                    a = b;
                    b = c;
                }
                None => break,
            }
        }
    }
    candidates
        .into_iter()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(r, _)| r)
        .unwrap_or(lo)
}
