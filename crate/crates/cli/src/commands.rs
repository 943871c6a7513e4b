use std::collections::BTreeSet;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use rfm_goe::analysis::{
    analyze_goe, analyze_tanh_demo, random_scenario, run_batch, BatchScenario, Classification,
};
use rfm_goe::equilibrium::solve_equilibrium;
use rfm_goe::export::{
    analysis_json, batch_json, write_batch_csv, write_orbit_csv, write_trajectory_csv_every,
};
use rfm_goe::integrator::{integrate, Accumulator, Trajectory};
use rfm_goe::model::{tanh_demo_field, Rfm, TanhDemo};
use rfm_goe::orbit::{find_periodic_orbit, find_rfm_orbit, OrbitConfig, PeriodicOrbit};
use rfm_goe::scenario::{parse_scenario, Scenario, SystemKind};
use serde_json::{json, Value};

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};
use crate::{BatchArgs, EquilibriumArgs, Format, GoeArgs, Numerics, OrbitArgs, SimulateArgs};

/// Reads a scenario, reports phase warnings on stderr and applies the
/// command-line overrides.
pub fn load(path: &Path, numerics: &Numerics) -> CliResult<Scenario> {
    let parsed = parse_scenario(path)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    let mut s = parsed.scenario;
    if let Some(m) = numerics.samples {
        s.grid_m = m;
        s.solver.steps_per_period = m;
    }
    if let Some(tol) = numerics.tol {
        s.orbit_tol = tol;
    }
    s.validate()?;
    Ok(s)
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
pub fn emit(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn print_json(value: &Value) -> CliResult<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn initial_state(s: &Scenario, x0: Option<Vec<f64>>) -> CliResult<Vec<f64>> {
    if let Some(x) = x0.or_else(|| s.x0.clone()) {
        return Ok(x);
    }
    Ok(match s.system {
        SystemKind::Rfm => solve_equilibrium(&s.schedule()?.mean_rates())?.e,
        SystemKind::TanhDemo => vec![TanhDemo.equilibrium(s.scalar_input()?.mean())?],
    })
}

pub fn trajectory(s: &Scenario, x0: &[f64], periods: f64) -> CliResult<Trajectory> {
    if !(periods > 0.0) || !periods.is_finite() {
        return Err(CliError::Usage(format!(
            "--periods must be positive, got {periods}"
        )));
    }
    let span = (0.0, periods * s.period);
    let acc = [Accumulator::output()];
    Ok(match s.system {
        SystemKind::Rfm => {
            let schedule = s.schedule()?;
            integrate(
                &Rfm::new(schedule.n())?,
                &schedule,
                x0,
                span,
                &s.solver,
                &acc,
            )?
        }
        SystemKind::TanhDemo => {
            integrate(&TanhDemo, &s.scalar_input()?, x0, span, &s.solver, &acc)?
        }
    })
}

fn trajectory_json(traj: &Trajectory, stride: usize) -> Value {
    let last = traj.len().saturating_sub(1);
    let keep: Vec<usize> = (0..traj.len())
        .filter(|k| k % stride == 0 || *k == last)
        .collect();
    let mut obj = json!({
        "t": keep.iter().map(|&k| traj.times[k]).collect::<Vec<_>>(),
        "x": keep.iter().map(|&k| traj.states[k].clone()).collect::<Vec<_>>(),
    });
    for a in &traj.accumulators {
        obj[format!("acc_{}", a.name)] =
            json!(keep.iter().map(|&k| a.values[k]).collect::<Vec<_>>());
    }
    obj
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let s = load(&args.scenario, &args.numerics)?;
    if args.stride == 0 {
        return Err(CliError::Usage("--stride must be >= 1".into()));
    }
    let x0 = initial_state(&s, args.x0.clone())?;
    let traj = trajectory(&s, &x0, args.periods)?;
    let mut out = Artifacts::new(&args.out)?;
    match args.format {
        Format::Csv => out.write(&format!("{}_trajectory.csv", s.id), |w| {
            Ok(write_trajectory_csv_every(w, &traj, args.stride)?)
        })?,
        Format::Json => out.write_json(
            &format!("{}_trajectory.json", s.id),
            &trajectory_json(&traj, args.stride),
        )?,
    };
    report_written(&out.keep());
    Ok(())
}

fn parse_means(text: &str) -> CliResult<Vec<f64>> {
    let means = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--means: `{v}` is not a number")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if let Some(i) = means.iter().position(|u| !(*u > 0.0 && u.is_finite())) {
        return Err(CliError::Validation(format!(
            "--means: rate u_{i} must be positive and finite, got {}",
            means[i]
        )));
    }
    Ok(means)
}

pub fn equilibrium(args: &EquilibriumArgs) -> CliResult<()> {
    let means = match (&args.scenario, &args.means) {
        (Some(path), None) => {
            let s = load(path, &Numerics::default())?;
            if s.system == SystemKind::TanhDemo {
                let u = s.scalar_input()?.mean();
                let x = TanhDemo.equilibrium(u)?;
                return print_json(&json!({
                    "e": [x],
                    "R_C": x,
                    "residual": tanh_demo_field(x, u).abs(),
                }));
            }
            s.schedule()?.mean_rates()
        }
        (None, Some(text)) => parse_means(text)?,
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --scenario or --means".into(),
            ))
        }
    };
    let eq = solve_equilibrium(&means)?;
    print_json(&json!({ "e": eq.e, "R_C": eq.r_c, "residual": eq.residual }))
}

fn orbit_for(s: &Scenario) -> CliResult<PeriodicOrbit> {
    let cfg = s.orbit_config();
    Ok(match s.system {
        SystemKind::Rfm => {
            let schedule = s.schedule()?;
            let eq = solve_equilibrium(&schedule.mean_rates())?;
            find_rfm_orbit(&schedule, &eq, &cfg)?
        }
        SystemKind::TanhDemo => {
            let input = s.scalar_input()?;
            let x0 = TanhDemo.equilibrium(input.mean())?;
            find_periodic_orbit(&TanhDemo, &input, &[x0], &cfg)?
        }
    })
}

fn orbit_stats(orbit: &PeriodicOrbit) -> Value {
    json!({
        "closure_error": orbit.closure_error,
        "periods_used": orbit.periods_used,
        "contraction_ratio": if orbit.contraction_ratio.is_finite() { json!(orbit.contraction_ratio) } else { Value::Null },
        "max_clamp": orbit.max_clamp,
        "samples": orbit.samples(),
        "gamma0": orbit.initial_point(),
        "mean_state": orbit.mean_state(),
    })
}

pub fn orbit(args: &OrbitArgs) -> CliResult<()> {
    let s = load(&args.scenario, &args.numerics)?;
    let orbit = orbit_for(&s)?;
    let mut out = Artifacts::new(&args.out)?;
    match args.format {
        Format::Csv => out.write(&format!("{}_orbit.csv", s.id), |w| Ok(write_orbit_csv(w, &orbit)?))?,
        Format::Json => out.write_json(
            &format!("{}_orbit.json", s.id),
            &json!({ "t": orbit.times, "gamma": orbit.gamma, "u": orbit.inputs, "stats": orbit_stats(&orbit) }),
        )?,
    };
    report_written(&out.keep());
    print_json(&orbit_stats(&orbit))
}

pub fn goe(args: &GoeArgs) -> CliResult<()> {
    let s = load(&args.scenario, &args.numerics)?;
    let report = match s.system {
        SystemKind::Rfm => {
            let a = analyze_goe(&s.schedule()?, &s.orbit_config())?;
            if a.verdict.classification == Classification::NoGoePredictedViolated {
                eprintln!(
                    "warning: {}: gain exceeds tolerance although a no-gain condition holds",
                    s.id
                );
            }
            analysis_json(&a)?
        }
        SystemKind::TanhDemo => {
            let r = analyze_tanh_demo(&s.scalar_input()?, &s.orbit_config())?;
            json!({
                "verdict": { "R_P": r.r_p, "R_C": r.r_c, "goe_gap": r.goe_gap },
                "orbit": orbit_stats(&r.orbit),
            })
        }
    };
    if let Some(dir) = &args.out {
        let mut out = Artifacts::new(dir)?;
        out.write_json(&format!("{}_goe.json", s.id), &report)?;
        report_written(&out.keep());
    }
    print_json(&report)
}

/// Scenario files named on the command line; directories contribute their
/// `*.json` files in name order.
fn scenario_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            inner.retain(|f| f.is_file() && f.extension().is_some_and(|e| e == "json"));
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn batch_scenarios(args: &BatchArgs) -> CliResult<Vec<BatchScenario>> {
    if let Some(count) = args.random {
        return (0..count)
            .map(|i| {
                let schedule =
                    random_scenario(args.n, args.condition, args.seed.wrapping_add(i as u64))?;
                let mut b = BatchScenario::new(format!("random-{i:04}"), schedule);
                b.config = Some(cli_config(&args.numerics));
                Ok(b)
            })
            .collect();
    }
    let files = scenario_files(&args.scenario)?;
    if files.is_empty() {
        return Err(CliError::Usage(
            "batch needs --scenario files or --random COUNT".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let s = load(&f, &args.numerics)?;
        if s.system != SystemKind::Rfm {
            return Err(CliError::Validation(format!(
                "{}: batch runs rfm scenarios only",
                f.display()
            )));
        }
        if !seen.insert(s.id.clone()) {
            return Err(CliError::Validation(format!(
                "{}: duplicate scenario id `{}`",
                f.display(),
                s.id
            )));
        }
        let mut b = BatchScenario::new(s.id.clone(), s.schedule()?);
        b.config = Some(s.orbit_config());
        out.push(b);
    }
    Ok(out)
}

fn cli_config(numerics: &Numerics) -> OrbitConfig {
    let mut cfg = OrbitConfig::default();
    if let Some(m) = numerics.samples {
        cfg.step.steps_per_period = m;
    }
    if let Some(tol) = numerics.tol {
        cfg.orbit_tol = tol;
    }
    cfg
}

pub fn batch(args: &BatchArgs) -> CliResult<()> {
    let scenarios = batch_scenarios(args)?;
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let jobs = args.jobs.unwrap_or_else(|| scenarios.len().clamp(1, cores));
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    let rows = run_batch(&scenarios, &cli_config(&args.numerics), Some(jobs))?;
    let mut out = Artifacts::new(&args.out)?;
    match args.format {
        Format::Csv => out.write("batch.csv", |w| Ok(write_batch_csv(w, &rows)?))?,
        Format::Json => out.write_json("batch.json", &batch_json(&rows)?)?,
    };
    report_written(&out.keep());

    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    let violated = rows
        .iter()
        .filter_map(|r| r.analysis())
        .filter(|a| a.verdict.classification == Classification::NoGoePredictedViolated)
        .count();
    eprintln!(
        "{} scenarios, {failed} failed, {violated} violated",
        rows.len()
    );
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} of {} scenarios failed",
            rows.len()
        )));
    }
    Ok(())
}
