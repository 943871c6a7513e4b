//! Gain-of-entrainment verdicts.
//!
//! A schedule shows a GOE when the period-averaged production `R_P` on the
//! entrained orbit exceeds the production `R_C` of the constant schedule with
//! the same averages. Six structural conditions on the rates are known to
//! rule this out; [`check_theorem_conditions`] reports which of them a
//! schedule meets and [`analyze_goe`] compares that with the computed gap.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::model::TanhDemo;
use crate::orbit::{
    compute_moments, find_periodic_orbit, find_rfm_orbit, period_average, MomentReport,
    OrbitConfig, PeriodicOrbit, DEGENERACY_THRESHOLD,
};
use crate::schedules::{
    detect_proportional_pairs, Channel, Harmonic, ProportionalityMap, RateSchedule, ScalarInput,
    DEFAULT_PROPORTIONALITY_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::I,
        Condition::II,
        Condition::III,
        Condition::IV,
        Condition::V,
        Condition::VI,
    ];

    pub fn requires_odd_n(self) -> bool {
        matches!(self, Condition::I | Condition::IV)
    }

    pub fn parity_ok(self, n: usize) -> bool {
        (n % 2 == 1) == self.requires_odd_n()
    }

    /// Channel pairs `(i, i+1)` that must be proportional. Empty for IV-VI.
    pub fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        let (first, last) = match self {
            Condition::I => (1, n.saturating_sub(1)),
            Condition::II => (0, n.saturating_sub(1)),
            Condition::III => (1, n),
            _ => return Vec::new(),
        };
        (first..last).step_by(2).map(|i| (i, i + 1)).collect()
    }

    /// Channels that must be constant. Empty for I-III.
    pub fn constant_channels(self, n: usize) -> Vec<usize> {
        match self {
            Condition::IV => (1..n).collect(),
            Condition::V => (0..n).collect(),
            Condition::VI => (1..=n).collect(),
            _ => Vec::new(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::I => "I",
            Condition::II => "II",
            Condition::III => "III",
            Condition::IV => "IV",
            Condition::V => "V",
            Condition::VI => "VI",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown condition `{s}` (expected I..VI)"))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// Parity of `n` rules the condition out.
    Parity,
    Proportional(ProportionalityMap),
    /// The pairing that failed the proportionality test.
    NotProportional {
        pairing: Vec<(usize, usize)>,
    },
    ConstantChannels {
        required: Vec<usize>,
        varying: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremConditionResult {
    pub condition: Condition,
    pub holds: bool,
    pub evidence: Evidence,
    pub n_odd: bool,
}

pub fn check_condition(schedule: &RateSchedule, condition: Condition) -> TheoremConditionResult {
    let n = schedule.n();
    let result = |holds, evidence| TheoremConditionResult {
        condition,
        holds,
        evidence,
        n_odd: n % 2 == 1,
    };
    if !condition.parity_ok(n) {
        return result(false, Evidence::Parity);
    }
    match condition {
        Condition::I | Condition::II | Condition::III => {
            let pairing = condition.pairs(n);
            match detect_proportional_pairs(schedule, &pairing, DEFAULT_PROPORTIONALITY_TOL) {
                Some(map) => result(true, Evidence::Proportional(map)),
                None => result(false, Evidence::NotProportional { pairing }),
            }
        }
        Condition::IV | Condition::V | Condition::VI => {
            let required = condition.constant_channels(n);
            let varying: Vec<usize> = required
                .iter()
                .copied()
                .filter(|&i| !schedule.channel(i).is_constant())
                .collect();
            result(
                varying.is_empty(),
                Evidence::ConstantChannels { required, varying },
            )
        }
    }
}

/// All six conditions, in order.
pub fn check_theorem_conditions(schedule: &RateSchedule) -> Vec<TheoremConditionResult> {
    Condition::ALL
        .into_iter()
        .map(|c| check_condition(schedule, c))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "no_goe_predicted_and_confirmed")]
    NoGoePredictedAndConfirmed,
    /// A matched condition and a positive gap: contradicts a proved result,
    /// so it signals a numerical problem.
    #[serde(rename = "no_goe_predicted_VIOLATED")]
    NoGoePredictedViolated,
    #[serde(rename = "unconstrained_no_goe_observed")]
    UnconstrainedNoGoeObserved,
    #[serde(rename = "unconstrained_goe_observed")]
    UnconstrainedGoeObserved,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NoGoePredictedAndConfirmed => "no_goe_predicted_and_confirmed",
            Classification::NoGoePredictedViolated => "no_goe_predicted_VIOLATED",
            Classification::UnconstrainedNoGoeObserved => "unconstrained_no_goe_observed",
            Classification::UnconstrainedGoeObserved => "unconstrained_goe_observed",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gap magnitude below which the sign is not trusted.
pub fn gap_tolerance(r_c: f64) -> f64 {
    1e-6 * r_c.max(1.0)
}

pub fn classify(goe_gap: f64, tolerance: f64, predicted_no_goe: bool) -> Classification {
    match (predicted_no_goe, goe_gap > tolerance) {
        (true, false) => Classification::NoGoePredictedAndConfirmed,
        (true, true) => Classification::NoGoePredictedViolated,
        (false, false) => Classification::UnconstrainedNoGoeObserved,
        (false, true) => Classification::UnconstrainedGoeObserved,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoeVerdict {
    #[serde(rename = "R_P")]
    pub r_p: f64,
    #[serde(rename = "R_C")]
    pub r_c: f64,
    pub goe_gap: f64,
    pub tolerance: f64,
    pub matched_conditions: Vec<TheoremConditionResult>,
    pub classification: Classification,
    /// Some orbit component is constant.
    pub degenerate: bool,
}

impl GoeVerdict {
    pub fn matched(&self) -> Vec<Condition> {
        self.matched_conditions
            .iter()
            .map(|c| c.condition)
            .collect()
    }
}

/// Everything produced by one run of the pipeline.
#[derive(Clone, Debug)]
pub struct GoeAnalysis {
    pub verdict: GoeVerdict,
    pub moments: MomentReport,
    pub equilibrium: Equilibrium,
    pub orbit: PeriodicOrbit,
}

impl GoeAnalysis {
    /// Sign changes of `z_n = gamma_n - e_n` around one period.
    pub fn zn_sign_changes(&self) -> usize {
        let n = self.equilibrium.n();
        let e_n = self.equilibrium.e[n - 1];
        cyclic_sign_changes(self.orbit.gamma.iter().map(|x| x[n - 1] - e_n))
    }
}

/// Number of sign changes of a periodic sample sequence, wrapping from the
/// last sample to the first. Values within the degeneracy threshold of zero
/// are skipped.
pub fn cyclic_sign_changes(values: impl IntoIterator<Item = f64>) -> usize {
    let signs: Vec<bool> = values
        .into_iter()
        .filter(|v| v.abs() >= DEGENERACY_THRESHOLD)
        .map(|v| v > 0.0)
        .collect();
    if signs.is_empty() {
        return 0;
    }
    let wrap = (signs[signs.len() - 1] != signs[0]) as usize;
    signs.windows(2).filter(|w| w[0] != w[1]).count() + wrap
}

/// Equilibrium, orbit, moments and condition check for one schedule.
pub fn analyze_goe(schedule: &RateSchedule, cfg: &OrbitConfig) -> Result<GoeAnalysis> {
    let equilibrium = solve_equilibrium(&schedule.mean_rates())?;
    let orbit = find_rfm_orbit(schedule, &equilibrium, cfg)?;
    let moments = compute_moments(&orbit, schedule, &equilibrium)?;
    let matched_conditions: Vec<_> = check_theorem_conditions(schedule)
        .into_iter()
        .filter(|c| c.holds)
        .collect();
    let tolerance = gap_tolerance(equilibrium.r_c);
    let verdict = GoeVerdict {
        r_p: moments.r_p,
        r_c: moments.r_c,
        goe_gap: moments.goe_gap,
        tolerance,
        classification: classify(moments.goe_gap, tolerance, !matched_conditions.is_empty()),
        matched_conditions,
        degenerate: orbit.is_degenerate(),
    };
    Ok(GoeAnalysis {
        verdict,
        moments,
        equilibrium,
        orbit,
    })
}

/// For `n = 1` the gap is zero exactly when `u_1` is proportional to `u_0`.
/// `None` for other `n`.
pub fn n1_equality_predicted(schedule: &RateSchedule) -> Option<bool> {
    (schedule.n() == 1).then(|| {
        detect_proportional_pairs(schedule, &[(0, 1)], DEFAULT_PROPORTIONALITY_TOL).is_some()
    })
}

/// The scalar demo compares the orbit average of `x` with the equilibrium
/// under the averaged input.
#[derive(Clone, Debug)]
pub struct TanhDemoReport {
    /// Equilibrium under the constant input `mean(u)`.
    pub r_c: f64,
    /// Period average of the orbit.
    pub r_p: f64,
    pub goe_gap: f64,
    pub orbit: PeriodicOrbit,
}

pub fn analyze_tanh_demo(input: &ScalarInput, cfg: &OrbitConfig) -> Result<TanhDemoReport> {
    let r_c = TanhDemo.equilibrium(input.mean())?;
    let orbit = find_periodic_orbit(&TanhDemo, input, &[r_c], cfg)?;
    let r_p = period_average(&orbit, |_, x, _| x[0]);
    Ok(TanhDemoReport {
        r_c,
        r_p,
        goe_gap: r_p - r_c,
        orbit,
    })
}

#[derive(Clone, Debug)]
pub struct BatchScenario {
    pub id: String,
    pub schedule: RateSchedule,
    /// Overrides the batch-wide configuration for this scenario.
    pub config: Option<OrbitConfig>,
}

impl BatchScenario {
    pub fn new(id: impl Into<String>, schedule: RateSchedule) -> Self {
        BatchScenario {
            id: id.into(),
            schedule,
            config: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BatchRow {
    pub scenario_id: String,
    pub n: usize,
    pub period: f64,
    /// The failure message when the pipeline errored.
    pub outcome: std::result::Result<Box<GoeAnalysis>, String>,
}

impl BatchRow {
    pub fn analysis(&self) -> Option<&GoeAnalysis> {
        self.outcome.as_deref().ok()
    }
}

/// Runs [`analyze_goe`] on every scenario, in parallel on `jobs` workers
/// (all cores when `None`). Failures are recorded per row. Rows come back
/// sorted by id.
pub fn run_batch(
    scenarios: &[BatchScenario],
    cfg: &OrbitConfig,
    jobs: Option<usize>,
) -> Result<Vec<BatchRow>> {
    let run = || -> Vec<BatchRow> {
        scenarios
            .par_iter()
            .map(|s| BatchRow {
                scenario_id: s.id.clone(),
                n: s.schedule.n(),
                period: s.schedule.period(),
                outcome: analyze_goe(&s.schedule, s.config.as_ref().unwrap_or(cfg))
                    .map(Box::new)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    };
    let mut rows = match jobs {
        Some(0) => return Err(Error::InvalidArgument("jobs must be >= 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    rows.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    Ok(rows)
}

pub const RANDOM_MEAN_RANGE: (f64, f64) = (0.5, 20.5);
/// Total amplitude of a channel as a fraction of its mean.
pub const RANDOM_AMPLITUDE_FRACTION: (f64, f64) = (0.05, 0.95);
const RANDOM_MAX_HARMONICS: u32 = 3;

/// A seeded random schedule with period 1. When `condition` is given, the
/// structure it demands is imposed: proportional pairs copy the scaled
/// harmonics of their partner and required-constant channels lose theirs.
/// All other channels oscillate.
pub fn random_scenario(n: usize, condition: Option<Condition>, seed: u64) -> Result<RateSchedule> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if let Some(c) = condition {
        if !c.parity_ok(n) {
            return Err(Error::InvalidArgument(format!(
                "condition {c} needs {} n, got n = {n}",
                if c.requires_odd_n() { "odd" } else { "even" }
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels: Vec<Channel> = (0..=n).map(|_| random_channel(&mut rng)).collect();
    if let Some(c) = condition {
        for (i, j) in c.pairs(n) {
            let alpha = channels[i].mean / channels[j].mean;
            channels[i] = channels[j].scaled(alpha);
        }
        for i in c.constant_channels(n) {
            channels[i].harmonics.clear();
        }
    }
    RateSchedule::new(1.0, channels)
}

fn random_channel(rng: &mut ChaCha8Rng) -> Channel {
    let mean = rng.gen_range(RANDOM_MEAN_RANGE.0..RANDOM_MEAN_RANGE.1);
    let count = rng.gen_range(1..=RANDOM_MAX_HARMONICS);
    let mut ks: Vec<u32> = (1..=RANDOM_MAX_HARMONICS).collect();
    for i in 0..count as usize {
        let j = rng.gen_range(i..ks.len());
        ks.swap(i, j);
    }
    ks.truncate(count as usize);
    ks.sort_unstable();
    let total = mean * rng.gen_range(RANDOM_AMPLITUDE_FRACTION.0..RANDOM_AMPLITUDE_FRACTION.1);
    let weights: Vec<f64> = ks.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let harmonics = ks
        .into_iter()
        .zip(weights)
        .map(|(k, w)| {
            Harmonic::new(
                k,
                total * w / wsum,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Channel::with_harmonics(mean, harmonics)
}
