//! Periodic rate schedules represented as truncated Fourier series.
//!
//! Each channel is `mean + sum_k A_k cos(2 pi k t / T + phi_k)`. Sine terms are
//! encoded as phase-shifted cosines. Keeping schedules in coefficient form
//! makes the period average exact and proportionality a coefficient check.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateValues;

/// Grid used by [`RateSchedule::new`] to certify positivity.
pub const DEFAULT_POSITIVITY_GRID: usize = 4096;
pub const MIN_POSITIVITY_GRID: usize = 256;
/// Relative tolerance for [`detect_proportional_pairs`].
pub const DEFAULT_PROPORTIONALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub k: u32,
    pub amplitude: f64,
    pub phase: f64,
}

impl Harmonic {
    pub fn new(k: u32, amplitude: f64, phase: f64) -> Self {
        Harmonic {
            k,
            amplitude,
            phase: normalize_phase(phase),
        }
    }

    /// Complex coefficient `A e^{i phi}` of this term.
    fn coefficient(&self) -> (f64, f64) {
        (
            self.amplitude * self.phase.cos(),
            self.amplitude * self.phase.sin(),
        )
    }
}

/// Wraps a phase into `[0, 2 pi)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// One Fourier channel: a constant plus a list of harmonics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel {
    pub mean: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl Channel {
    pub fn constant(mean: f64) -> Self {
        Channel {
            mean,
            harmonics: Vec::new(),
        }
    }

    pub fn with_harmonics(mean: f64, harmonics: Vec<Harmonic>) -> Self {
        Channel { mean, harmonics }
    }

    /// Value at phase fraction `s = t / T` (any real; periodic in `s`).
    #[inline]
    pub fn value_at_phase(&self, s: f64) -> f64 {
        self.harmonics.iter().fold(self.mean, |acc, h| {
            acc + h.amplitude * (TAU * h.k as f64 * s + h.phase).cos()
        })
    }

    pub fn is_constant(&self) -> bool {
        self.harmonics.iter().all(|h| h.amplitude == 0.0)
    }

    pub fn amplitude_sum(&self) -> f64 {
        self.harmonics.iter().map(|h| h.amplitude).sum()
    }

    /// Combined complex coefficient per harmonic index.
    fn coefficients(&self) -> BTreeMap<u32, (f64, f64)> {
        let mut out = BTreeMap::new();
        for h in &self.harmonics {
            let (re, im) = h.coefficient();
            let c = out.entry(h.k).or_insert((0.0, 0.0));
            c.0 += re;
            c.1 += im;
        }
        out
    }

    /// Scales the whole channel (mean and every amplitude) by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Channel {
        Channel {
            mean: self.mean * factor,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| Harmonic {
                    k: h.k,
                    amplitude: h.amplitude * factor,
                    phase: h.phase,
                })
                .collect(),
        }
    }
}

/// Time-dependent inputs consumed by the integrator.
pub trait Forcing: Sync {
    fn period(&self) -> f64;

    fn inputs(&self) -> usize;

    /// Writes the inputs at time `t` into `out`. Time is reduced modulo the
    /// period before evaluating.
    fn eval_into(&self, t: f64, out: &mut [f64]);
}

#[inline]
fn phase_fraction(t: f64, period: f64) -> f64 {
    (t / period).rem_euclid(1.0)
}

/// First grid point where a channel goes non-positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PositivityViolation {
    pub channel: usize,
    pub t: f64,
    pub value: f64,
}

impl From<PositivityViolation> for Error {
    fn from(v: PositivityViolation) -> Self {
        Error::NonPositiveRate {
            channel: v.channel,
            t: v.t,
            value: v.value,
        }
    }
}

/// Checks that every channel stays strictly positive over one period.
///
/// A channel passes immediately when `mean > sum of amplitudes`; otherwise it
/// is sampled on a uniform grid of `grid_points` points. For the first failing
/// channel the grid minimum is reported.
pub fn validate_positive(
    period: f64,
    channels: &[Channel],
    grid_points: usize,
) -> Result<std::result::Result<(), PositivityViolation>> {
    if grid_points < MIN_POSITIVITY_GRID {
        return Err(Error::InvalidArgument(format!(
            "positivity grid needs at least {MIN_POSITIVITY_GRID} points, got {grid_points}"
        )));
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "period must be positive, got {period}"
        )));
    }
    for (i, ch) in channels.iter().enumerate() {
        if ch.mean > ch.amplitude_sum() {
            continue;
        }
        let (j_min, v_min) = (0..grid_points)
            .map(|j| (j, ch.value_at_phase(j as f64 / grid_points as f64)))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
        if !(v_min > 0.0) {
            return Ok(Err(PositivityViolation {
                channel: i,
                t: period * j_min as f64 / grid_points as f64,
                value: v_min,
            }));
        }
    }
    Ok(Ok(()))
}

/// Jointly `T`-periodic, strictly positive transition rates `u_0..u_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSchedule {
    period: f64,
    channels: Vec<Channel>,
}

impl RateSchedule {
    /// Validates and builds a schedule. Phases are wrapped into `[0, 2 pi)`.
    pub fn new(period: f64, channels: Vec<Channel>) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a schedule needs n + 1 >= 2 channels, got {}",
                channels.len()
            )));
        }
        let mut channels = channels;
        for (i, ch) in channels.iter_mut().enumerate() {
            if !(ch.mean > 0.0) || !ch.mean.is_finite() {
                return Err(Error::NonPositiveRate {
                    channel: i,
                    t: f64::NAN,
                    value: ch.mean,
                });
            }
            for h in &mut ch.harmonics {
                if h.k == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "channel {i}: harmonic index must be >= 1"
                    )));
                }
                if !(h.amplitude >= 0.0) || !h.amplitude.is_finite() || !h.phase.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "channel {i}: harmonic amplitude must be finite and >= 0, phase finite"
                    )));
                }
                h.phase = normalize_phase(h.phase);
            }
        }
        validate_positive(period, &channels, DEFAULT_POSITIVITY_GRID)??;
        Ok(RateSchedule { period, channels })
    }

    /// Schedule with every rate held at `means`.
    pub fn constant(period: f64, means: &[f64]) -> Result<Self> {
        Self::new(
            period,
            means.iter().map(|&m| Channel::constant(m)).collect(),
        )
    }

    /// Number of sites.
    pub fn n(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &Channel {
        &self.channels[i]
    }

    pub fn evaluate(&self, t: f64) -> Result<RateValues> {
        let mut u = vec![0.0; self.channels.len()];
        self.eval_into(t, &mut u);
        if let Some(i) = u.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveRate {
                channel: i,
                t,
                value: u[i],
            });
        }
        RateValues::new(u)
    }

    /// Exact period averages (the constant terms).
    pub fn mean_rates(&self) -> Vec<f64> {
        self.channels.iter().map(|c| c.mean).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.channels.iter().all(Channel::is_constant)
    }

    /// Re-runs the positivity check on a caller-chosen grid.
    pub fn validate_positive(
        &self,
        grid_points: usize,
    ) -> Result<std::result::Result<(), PositivityViolation>> {
        validate_positive(self.period, &self.channels, grid_points)
    }
}

impl Forcing for RateSchedule {
    fn period(&self) -> f64 {
        self.period
    }

    fn inputs(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = phase_fraction(t, self.period);
        for (o, ch) in out.iter_mut().zip(&self.channels) {
            *o = ch.value_at_phase(s);
        }
    }
}

/// A single signed periodic input, used to drive the scalar demo system.
/// Unlike a rate it may take any sign.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarInput {
    pub period: f64,
    pub channel: Channel,
}

impl ScalarInput {
    pub fn new(period: f64, channel: Channel) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {period}"
            )));
        }
        let mut channel = channel;
        for h in &mut channel.harmonics {
            h.phase = normalize_phase(h.phase);
        }
        Ok(ScalarInput { period, channel })
    }

    pub fn mean(&self) -> f64 {
        self.channel.mean
    }
}

impl Forcing for ScalarInput {
    fn period(&self) -> f64 {
        self.period
    }

    fn inputs(&self) -> usize {
        1
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        out[0] = self.channel.value_at_phase(phase_fraction(t, self.period));
    }
}

/// Evidence that `u_i(t) = alpha_i u_{i+1}(t)` for every listed pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProportionalityMap {
    pub pairing: Vec<(usize, usize)>,
    pub alphas: Vec<f64>,
    /// Max over pairs and grid of `|u_i - alpha_i u_{i+1}| / mean_i`.
    pub residual: f64,
}

const RESIDUAL_GRID: usize = 1024;

/// Decides whether each `(i, i+1)` pair is proportional, with
/// `alpha_i = mean_i / mean_{i+1}`.
///
/// Coefficients are compared first; a pair failing that test is accepted
/// only if its sampled residual is within `tolerance`. Returns `None` on any
/// mismatch or on a malformed pair.
pub fn detect_proportional_pairs(
    schedule: &RateSchedule,
    pairing: &[(usize, usize)],
    tolerance: f64,
) -> Option<ProportionalityMap> {
    let mut alphas = Vec::with_capacity(pairing.len());
    let mut residual = 0.0f64;
    for &(i, j) in pairing {
        if j != i + 1 || j > schedule.n() {
            return None;
        }
        let (a, b) = (schedule.channel(i), schedule.channel(j));
        let alpha = a.mean / b.mean;
        let coeff_match = coefficients_match(a, b, alpha, tolerance);
        let r = pair_residual(a, b, alpha);
        if !coeff_match && r > tolerance {
            return None;
        }
        alphas.push(alpha);
        residual = residual.max(r);
    }
    Some(ProportionalityMap {
        pairing: pairing.to_vec(),
        alphas,
        residual,
    })
}

fn coefficients_match(a: &Channel, b: &Channel, alpha: f64, tolerance: f64) -> bool {
    if a.is_constant() && b.is_constant() {
        return true;
    }
    let ca = a.coefficients();
    let cb = b.coefficients();
    let scale = tolerance * a.mean;
    ca.keys().chain(cb.keys()).all(|k| {
        let (ar, ai) = ca.get(k).copied().unwrap_or((0.0, 0.0));
        let (br, bi) = cb.get(k).copied().unwrap_or((0.0, 0.0));
        (ar - alpha * br).hypot(ai - alpha * bi) <= scale
    })
}

fn pair_residual(a: &Channel, b: &Channel, alpha: f64) -> f64 {
    if a.is_constant() && b.is_constant() {
        // alpha = mean_a / mean_b makes the difference identically zero.
        return 0.0;
    }
    (0..RESIDUAL_GRID)
        .map(|j| {
            let s = j as f64 / RESIDUAL_GRID as f64;
            (a.value_at_phase(s) - alpha * b.value_at_phase(s)).abs() / a.mean
        })
        .fold(0.0, f64::max)
}
