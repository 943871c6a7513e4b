//! Reference scenarios and published values used by the reproduction runs.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::schedules::{Channel, Harmonic, RateSchedule, ScalarInput};

/// Equilibrium of the tanh demo under zero input, `atanh(2/3)`.
pub const EXAMPLE1_EQUILIBRIUM: f64 = 0.8047;
/// Period average of the tanh demo orbit under `u(t) = sin(2 pi t)`.
pub const EXAMPLE1_ORBIT_MEAN: f64 = 0.8127;

/// Initial condition of the three-site run.
pub const EXAMPLE2_X0: [f64; 3] = [0.3, 0.4, 0.5];
/// State at `t = 20 pi`, i.e. the orbit point at phase 0.
pub const EXAMPLE2_ORBIT_POINT: [f64; 3] = [0.7809, 0.1624, 0.3290];
pub const EXAMPLE2_R_P: f64 = 0.5927;
pub const EXAMPLE2_E3: f64 = 0.3085;
pub const EXAMPLE2_R_C: f64 = 0.6171;

/// Mean rates of the randomized four-site batch, channels `u_0..u_4`.
pub const TABLE1_MEANS: [f64; 5] = [13.56, 11.38, 3.90, 3.53, 2.34];
/// Rows of `(A, phi)` per channel `u_0..u_4`.
#[allow(clippy::approx_constant)]
pub const TABLE1: [[(f64, f64); 5]; 7] = [
    [
        (8.42, 1.18),
        (1.18, 0.17),
        (1.30, 4.03),
        (2.84, 0.08),
        (2.25, 3.42),
    ],
    [
        (6.78, 3.06),
        (4.87, 5.77),
        (3.72, 3.24),
        (0.78, 1.61),
        (1.11, 1.30),
    ],
    [
        (5.06, 5.91),
        (9.05, 4.08),
        (1.08, 5.78),
        (3.37, 4.22),
        (1.67, 5.95),
    ],
    [
        (9.43, 0.76),
        (0.88, 1.73),
        (3.46, 4.87),
        (3.15, 6.16),
        (0.87, 4.11),
    ],
    [
        (6.54, 2.02),
        (3.23, 5.92),
        (3.14, 5.57),
        (2.40, 1.09),
        (1.19, 1.64),
    ],
    [
        (6.12, 4.86),
        (1.26, 4.43),
        (1.24, 3.51),
        (1.01, 1.69),
        (2.09, 3.99),
    ],
    [
        (2.87, 0.40),
        (5.62, 3.28),
        (3.03, 5.37),
        (0.99, 1.52),
        (1.91, 1.66),
    ],
];

/// `u(t) = sin(2 pi t)` with period 1, written as `cos(2 pi t + 3 pi / 2)`.
pub fn example1_input() -> ScalarInput {
    ScalarInput::new(
        1.0,
        Channel::with_harmonics(0.0, vec![Harmonic::new(1, 1.0, 1.5 * PI)]),
    )
    .expect("period is positive")
}

/// Three-site schedule with period `2 pi`:
/// `u_0 = 3 + cos(t + 5)`, `u_1 = 1`, `u_2 = 4 + 2 sin(t - 4)`,
/// `u_3 = 2 - cos(t - 1)`.
pub fn example2_schedule() -> RateSchedule {
    RateSchedule::new(
        TAU,
        vec![
            Channel::with_harmonics(3.0, vec![Harmonic::new(1, 1.0, 5.0)]),
            Channel::constant(1.0),
            // sin(t - 4) = cos(t - 4 - pi/2)
            Channel::with_harmonics(4.0, vec![Harmonic::new(1, 2.0, -4.0 - FRAC_PI_2)]),
            // -cos(t - 1) = cos(t - 1 + pi)
            Channel::with_harmonics(2.0, vec![Harmonic::new(1, 1.0, PI - 1.0)]),
        ],
    )
    .expect("reference schedule is positive")
}

/// Scenario `row` (0-based) of the four-site batch, period 1. The published
/// table numbers rates from 1; here they map to channels `0..=4`.
pub fn table1_schedule(row: usize) -> RateSchedule {
    let channels = TABLE1_MEANS
        .iter()
        .zip(TABLE1[row])
        .map(|(&mean, (a, phi))| Channel::with_harmonics(mean, vec![Harmonic::new(1, a, phi)]))
        .collect();
    RateSchedule::new(1.0, channels).expect("reference schedule is positive")
}

pub fn table1_schedules() -> Vec<RateSchedule> {
    (0..TABLE1.len()).map(table1_schedule).collect()
}

/// Scenario files shipped with the crate, keyed by file name.
pub const BUNDLED_PAPER_N3: &str = include_str!("../scenarios/paper_n3.json");
pub const BUNDLED_TANH_DEMO: &str = include_str!("../scenarios/tanh_demo.json");
pub const BUNDLED_TABLE1: [&str; 7] = [
    include_str!("../scenarios/table1/row1.json"),
    include_str!("../scenarios/table1/row2.json"),
    include_str!("../scenarios/table1/row3.json"),
    include_str!("../scenarios/table1/row4.json"),
    include_str!("../scenarios/table1/row5.json"),
    include_str!("../scenarios/table1/row6.json"),
    include_str!("../scenarios/table1/row7.json"),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_str;

    #[test]
    fn reference_schedules_build() {
        assert_eq!(example2_schedule().n(), 3);
        let t = table1_schedules();
        assert_eq!(t.len(), 7);
        assert!(t.iter().all(|s| s.n() == 4 && s.period() == 1.0));
        assert_eq!(example1_input().mean(), 0.0);
    }

    fn same_schedule(a: &RateSchedule, b: &RateSchedule) {
        assert_eq!(a.period(), b.period());
        assert_eq!(a.n(), b.n());
        for (x, y) in a.channels().iter().zip(b.channels()) {
            assert_eq!(x.mean, y.mean);
            assert_eq!(x.harmonics.len(), y.harmonics.len());
            for (h, g) in x.harmonics.iter().zip(&y.harmonics) {
                assert_eq!((h.k, h.amplitude), (g.k, g.amplitude));
                assert!((h.phase - g.phase).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bundled_files_match_the_constructors() {
        let p = parse_scenario_str(BUNDLED_PAPER_N3).unwrap();
        assert!(p.warnings.is_empty());
        same_schedule(&p.scenario.schedule().unwrap(), &example2_schedule());
        assert_eq!(p.scenario.x0.as_deref(), Some(&EXAMPLE2_X0[..]));

        let t = parse_scenario_str(BUNDLED_TANH_DEMO).unwrap().scenario;
        let (a, b) = (t.scalar_input().unwrap(), example1_input());
        assert_eq!(a.period, b.period);
        assert!((a.channel.harmonics[0].phase - b.channel.harmonics[0].phase).abs() < 1e-14);

        for (row, text) in BUNDLED_TABLE1.iter().enumerate() {
            let s = parse_scenario_str(text).unwrap().scenario;
            same_schedule(&s.schedule().unwrap(), &table1_schedule(row));
        }
    }
}
