//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report reads top to bottom; the
//! process exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfm_goe::analysis::{
    analyze_goe, analyze_tanh_demo, gap_tolerance, random_scenario, run_batch, BatchScenario,
    Classification, Condition,
};
use rfm_goe::equilibrium::solve_equilibrium;
use rfm_goe::integrator::{advance_period, integrate, Accumulator, PeriodMap, StepConfig};
use rfm_goe::model::{Rfm, TanhDemo};
use rfm_goe::orbit::OrbitConfig;
use rfm_goe::reference;
use rfm_goe::schedules::{Channel, RateSchedule, ScalarInput};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() < tol
}

fn example1() -> Outcome {
    // Converge from both sides under u = 0.
    let zero = ScalarInput::new(1.0, Channel::constant(0.0)).unwrap();
    let cfg = StepConfig::fixed_rk4(256);
    let mut worst: f64 = 0.0;
    for x0 in [0.0, 3.0] {
        let traj = integrate(&TanhDemo, &zero, &[x0], (0.0, 40.0), &cfg, &[]).unwrap();
        worst = worst.max((traj.final_state()[0] - reference::EXAMPLE1_EQUILIBRIUM).abs());
    }
    let r = analyze_tanh_demo(&reference::example1_input(), &OrbitConfig::default()).unwrap();
    let ok = worst < 5e-4 && within(r.r_p, reference::EXAMPLE1_ORBIT_MEAN, 1e-3) && r.goe_gap > 0.0;
    check(
        ok,
        format!(
            "x(40) off by {worst:.1e}, orbit mean {:.6}, gap {:+.6}",
            r.r_p, r.goe_gap
        ),
    )
}

fn example2_3() -> Outcome {
    let s = reference::example2_schedule();
    let rfm = Rfm::new(3).unwrap();
    let step = StepConfig::default();

    // The published procedure: 10 periods from (0.3, 0.4, 0.5), then one
    // more period from the rounded end point.
    let horizon = 10.0 * s.period();
    let x20 = integrate(
        &rfm,
        &s,
        &reference::EXAMPLE2_X0,
        (0.0, horizon),
        &step,
        &[],
    )
    .unwrap();
    let x20 = x20.final_state().to_vec();
    let one = integrate(
        &rfm,
        &s,
        &reference::EXAMPLE2_ORBIT_POINT,
        (0.0, s.period()),
        &step,
        &[Accumulator::output()],
    )
    .unwrap();
    let r_p_published_route =
        one.accumulator("output").unwrap().values.last().unwrap() / s.period();

    let a = analyze_goe(&s, &OrbitConfig::default()).unwrap();
    let gamma0 = a.orbit.initial_point();
    let points_ok = x20
        .iter()
        .chain(gamma0)
        .zip(reference::EXAMPLE2_ORBIT_POINT.iter().cycle())
        .all(|(x, p)| within(*x, *p, 1e-3));
    let ok = points_ok
        && within(a.verdict.r_p, reference::EXAMPLE2_R_P, 1e-3)
        && within(r_p_published_route, reference::EXAMPLE2_R_P, 1e-3)
        && within(a.equilibrium.e[2], reference::EXAMPLE2_E3, 5e-4)
        && within(a.equilibrium.r_c, reference::EXAMPLE2_R_C, 5e-4)
        && a.verdict.goe_gap < 0.0;
    check(
        ok,
        format!(
            "x(20pi) = ({:.4}, {:.4}, {:.4}), gamma(0) = ({:.4}, {:.4}, {:.4}), R_P = {:.4}, e_3 = {:.4}, R_C = {:.4}, gap = {:+.4}",
            x20[0], x20[1], x20[2], gamma0[0], gamma0[1], gamma0[2],
            a.verdict.r_p, a.equilibrium.e[2], a.equilibrium.r_c, a.verdict.goe_gap
        ),
    )
}

fn table1() -> Outcome {
    let scenarios: Vec<_> = reference::table1_schedules()
        .into_iter()
        .enumerate()
        .map(|(i, schedule)| BatchScenario::new(format!("row{}", i + 1), schedule))
        .collect();
    let rows = run_batch(&scenarios, &OrbitConfig::default(), None).unwrap();
    let mut ok = rows.len() == 7;
    let mut parts = Vec::new();
    for row in &rows {
        match row.analysis() {
            Some(a) => {
                let sc = a.zn_sign_changes();
                ok &= a.verdict.r_p < a.verdict.r_c && sc >= 2;
                parts.push(format!("{:+.3}/{sc}", a.verdict.goe_gap));
            }
            None => {
                ok = false;
                parts.push("error".into());
            }
        }
    }
    check(ok, format!("gap/sign changes per row: {}", parts.join(" ")))
}

fn identity_suite() -> Outcome {
    let cfg = OrbitConfig::default();
    let count = 120;
    let mut worst = [0.0f64; 3];
    let mut min_slack = f64::INFINITY;
    let mut ok = true;
    let mut failures = 0;
    let scenarios: Vec<_> = (0..count)
        .map(|i| {
            BatchScenario::new(
                format!("{i:04}"),
                random_scenario(1 + i % 8, None, 10_000 + i as u64).unwrap(),
            )
        })
        .collect();
    for row in run_batch(&scenarios, &cfg, None).unwrap() {
        let Some(a) = row.analysis() else {
            failures += 1;
            ok = false;
            continue;
        };
        let m = &a.moments;
        let r = &m.residuals;
        let flow = r.r_flow.abs() / (1.0 + m.eta2(0, 1).unwrap().abs());
        worst[0] = worst[0].max(flow);
        worst[1] = worst[1].max(r.r_prod.abs());
        worst[2] = worst[2].max(r.max_abs_eta3());
        min_slack = min_slack.min(r.min_slack());
        ok &= flow < 1e-7
            && r.r_prod.abs() < 1e-7
            && r.max_abs_eta3() < 1e-6
            && r.min_slack() > -1e-7;
    }
    check(
        ok,
        format!(
            "{count} scenarios, {failures} failed runs; max flow {:.1e}, prod {:.1e}, eta3 {:.1e}; min slack {:.2e}",
            worst[0], worst[1], worst[2], min_slack
        ),
    )
}

fn conformance_suite() -> Outcome {
    let cfg = OrbitConfig::default();
    let per_condition = 100;
    let mut ok = true;
    let mut parts = Vec::new();
    let mut violated = 0;
    for c in Condition::ALL {
        let sizes: Vec<usize> = (1..=8).filter(|&n| c.parity_ok(n)).collect();
        let scenarios: Vec<_> = (0..per_condition)
            .map(|i| {
                BatchScenario::new(
                    format!("{c}-{i:03}"),
                    random_scenario(sizes[i % sizes.len()], Some(c), 1_000 * c as u64 + i as u64)
                        .unwrap(),
                )
            })
            .collect();
        let mut worst = f64::NEG_INFINITY;
        let mut not_strict = 0;
        let mut degenerate = 0;
        let mut failures = 0;
        for row in run_batch(&scenarios, &cfg, None).unwrap() {
            let Some(a) = row.analysis() else {
                failures += 1;
                continue;
            };
            let v = &a.verdict;
            worst = worst.max(v.goe_gap);
            if v.goe_gap > gap_tolerance(v.r_c) {
                ok = false;
            }
            if v.classification == Classification::NoGoePredictedViolated {
                violated += 1;
            }
            if !v.matched().contains(&c) {
                ok = false;
            }
            if v.degenerate {
                degenerate += 1;
            } else if v.goe_gap >= -1e-9 {
                not_strict += 1;
            }
        }
        ok &= failures == 0 && not_strict == 0;
        parts.push(format!(
            "{c}: max gap {worst:+.2e}, degenerate {degenerate}, non-strict {not_strict}, failed {failures}"
        ));
    }
    ok &= violated == 0;
    check(ok, format!("{violated} VIOLATED; {}", parts.join("; ")))
}

fn single_site() -> Outcome {
    let cfg = OrbitConfig::default();
    let mut scenarios = Vec::new();
    for i in 0..40u64 {
        scenarios.push(BatchScenario::new(
            format!("random-{i:02}"),
            random_scenario(1, None, 50_000 + i).unwrap(),
        ));
        let base = random_scenario(1, None, 60_000 + i).unwrap();
        let u0 = base.channel(0).clone();
        let alpha = base.channel(1).mean / u0.mean;
        let proportional = RateSchedule::new(1.0, vec![u0.clone(), u0.scaled(alpha)]).unwrap();
        let mut bent = u0.scaled(alpha);
        bent.harmonics[0].amplitude *= 1.01;
        scenarios.push(BatchScenario::new(format!("prop-{i:02}"), proportional));
        scenarios.push(BatchScenario::new(
            format!("bent-{i:02}"),
            RateSchedule::new(1.0, vec![u0, bent]).unwrap(),
        ));
    }
    let mut ok = true;
    let (mut worst_random, mut worst_prop, mut weakest_bent) =
        (f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for row in run_batch(&scenarios, &cfg, None).unwrap() {
        let Some(a) = row.analysis() else {
            ok = false;
            continue;
        };
        let v = &a.verdict;
        match row.scenario_id.split('-').next().unwrap() {
            "random" => {
                worst_random = worst_random.max(v.goe_gap);
                ok &= v.goe_gap <= gap_tolerance(v.r_c);
            }
            "prop" => {
                worst_prop = worst_prop.max(v.goe_gap.abs());
                ok &= v.goe_gap.abs() < 1e-8;
            }
            _ => {
                weakest_bent = weakest_bent.max(v.goe_gap);
                ok &= v.goe_gap < -1e-8;
            }
        }
    }
    check(
        ok,
        format!(
            "random max gap {worst_random:+.2e}; proportional max |gap| {worst_prop:.1e}; perturbed max gap {weakest_bent:+.2e}"
        ),
    )
}

fn contraction() -> Outcome {
    let s = reference::example2_schedule();
    let rfm = Rfm::new(3).unwrap();
    let map = PeriodMap::new(&rfm, &s, &StepConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ok = true;
    let mut slowest = 0;
    for _ in 0..20 {
        let mut x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut y: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let dist = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max)
        };
        let mut prev = dist(&x, &y);
        let mut reached = None;
        for k in 1..=200 {
            x = map.apply(&x).unwrap();
            y = map.apply(&y).unwrap();
            let d = dist(&x, &y);
            if !(d < prev) {
                ok = false;
                break;
            }
            prev = d;
            if d < 1e-8 {
                reached = Some(k);
                break;
            }
        }
        match reached {
            Some(k) => slowest = slowest.max(k),
            None => ok = false,
        }
    }
    check(
        ok,
        format!("20 pairs, slowest pair below 1e-8 after {slowest} periods"),
    )
}

fn equilibrium_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut means_list = Vec::new();
    for i in 0..200 {
        let n = 1 + i % 8;
        let means: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.5..20.5)).collect();
        worst = worst.max(solve_equilibrium(&means).unwrap().residual);
        means_list.push(means);
    }
    // Long-horizon integration from random states, one period map step at a
    // time until the state stops moving.
    let mut worst_dyn: f64 = 0.0;
    let step = StepConfig::fixed_rk4(128);
    for means in means_list.iter().take(24) {
        let n = means.len() - 1;
        let s = RateSchedule::constant(1.0, means).unwrap();
        let rfm = Rfm::new(n).unwrap();
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        for _ in 0..5000 {
            let y = advance_period(&rfm, &s, &x, &step).unwrap();
            let moved = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            x = y;
            if moved < 1e-14 {
                break;
            }
        }
        let e = solve_equilibrium(means).unwrap().e;
        worst_dyn = worst_dyn.max(
            x.iter()
                .zip(&e)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
    }
    check(
        worst < 1e-10 && worst_dyn < 1e-6,
        format!("200 vectors, max residual {worst:.1e}; 24 long runs, max |x - e| {worst_dyn:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 tanh demo equilibrium, orbit mean and gain",
            example1,
            Some(Duration::from_secs(2)),
        ),
        (
            "2 three-site orbit point, R_P, e_3, R_C",
            example2_3,
            Some(Duration::from_secs(5)),
        ),
        (
            "3 four-site reference batch: R_P < R_C and z_4 sign changes",
            table1,
            Some(Duration::from_secs(30)),
        ),
        (
            "4 moment identities on random scenarios",
            identity_suite,
            None,
        ),
        (
            "5 structural conditions forbid a gain",
            conformance_suite,
            None,
        ),
        ("6 single-site bound and equality case", single_site, None),
        ("7 contraction of the period map", contraction, None),
        (
            "8 equilibrium residual and dynamic agreement",
            equilibrium_suite,
            None,
        ),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} [{name}] {} ({:.2}s{budget})",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
