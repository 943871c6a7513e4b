//! Reruns the bundled reference scenarios and compares against the
//! published numbers.

use rfm_goe::analysis::{analyze_goe, analyze_tanh_demo, run_batch, BatchScenario};
use rfm_goe::export::{write_columns_csv, write_trajectory_csv_every};
use rfm_goe::integrator::{integrate, Accumulator, StepConfig};
use rfm_goe::model::{Rfm, TanhDemo};
use rfm_goe::reference;
use rfm_goe::scenario::{parse_scenario_str, Scenario};
use rfm_goe::schedules::{Channel, ScalarInput};

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};
use crate::{Example, ReproduceArgs};

/// Samples kept per period in the figure CSVs.
const FIGURE_SAMPLES_PER_PERIOD: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Target {
    /// `|value - expected| < tol`.
    Near(f64, f64),
    Positive,
    Negative,
    AtLeast(f64),
}

#[derive(Clone, Debug)]
struct Row {
    quantity: String,
    value: f64,
    target: Target,
}

impl Row {
    fn new(quantity: impl Into<String>, value: f64, target: Target) -> Self {
        Row {
            quantity: quantity.into(),
            value,
            target,
        }
    }

    fn pass(&self) -> bool {
        match self.target {
            Target::Near(p, tol) => (self.value - p).abs() < tol,
            Target::Positive => self.value > 0.0,
            Target::Negative => self.value < 0.0,
            Target::AtLeast(m) => self.value >= m,
        }
    }

    fn expected(&self) -> String {
        match self.target {
            Target::Near(p, _) => format!("{p:.4}"),
            Target::Positive => "> 0".into(),
            Target::Negative => "< 0".into(),
            Target::AtLeast(m) => format!(">= {m}"),
        }
    }

    fn tolerance(&self) -> String {
        match self.target {
            Target::Near(_, tol) => format!("{tol:.0e}"),
            _ => "-".into(),
        }
    }
}

fn render(title: &str, rows: &[Row]) -> String {
    let width = rows
        .iter()
        .map(|r| r.quantity.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut s = format!("{title}\n");
    s += &format!(
        "{:<width$}  {:>24}  {:>9}  {:>8}  {:>9}  status\n",
        "quantity", "value", "rounded", "expected", "tolerance"
    );
    for r in rows {
        s += &format!(
            "{:<width$}  {:>24.16e}  {:>9.4}  {:>8}  {:>9}  {}\n",
            r.quantity,
            r.value,
            r.value,
            r.expected(),
            r.tolerance(),
            if r.pass() { "PASS" } else { "FAIL" }
        );
    }
    let passed = rows.iter().filter(|r| r.pass()).count();
    s += &format!("{passed} of {} checks passed\n", rows.len());
    s
}

fn bundled(text: &str) -> CliResult<Scenario> {
    Ok(parse_scenario_str(text)?.scenario)
}

fn figure_stride(s: &Scenario) -> usize {
    (s.solver.steps_per_period / FIGURE_SAMPLES_PER_PERIOD).max(1)
}

fn example1(out: Option<&mut Artifacts>) -> CliResult<Vec<Row>> {
    let s = bundled(reference::BUNDLED_TANH_DEMO)?;
    let input = s.scalar_input()?;
    let zero = ScalarInput::new(1.0, Channel::constant(0.0))?;
    let settled = integrate(
        &TanhDemo,
        &zero,
        &[0.0],
        (0.0, 40.0),
        &StepConfig::fixed_rk4(256),
        &[],
    )?;
    let r = analyze_tanh_demo(&input, &s.orbit_config())?;
    if let Some(out) = out {
        let stride = figure_stride(&s);
        let cols = vec![
            (
                "t".to_string(),
                r.orbit.times.iter().step_by(stride).copied().collect(),
            ),
            (
                "gamma".to_string(),
                r.orbit.gamma.iter().step_by(stride).map(|x| x[0]).collect(),
            ),
            (
                "u".to_string(),
                r.orbit
                    .inputs
                    .iter()
                    .step_by(stride)
                    .map(|u| u[0])
                    .collect(),
            ),
        ];
        out.write("fig1_tanh_orbit.csv", |w| Ok(write_columns_csv(w, &cols)?))?;
    }
    Ok(vec![
        Row::new(
            "x(40) under u = 0",
            settled.final_state()[0],
            Target::Near(reference::EXAMPLE1_EQUILIBRIUM, 5e-4),
        ),
        Row::new(
            "equilibrium under mean input",
            r.r_c,
            Target::Near(reference::EXAMPLE1_EQUILIBRIUM, 5e-4),
        ),
        Row::new(
            "orbit mean of x",
            r.r_p,
            Target::Near(reference::EXAMPLE1_ORBIT_MEAN, 1e-3),
        ),
        Row::new(
            "gain (orbit mean - equilibrium)",
            r.goe_gap,
            Target::Positive,
        ),
    ])
}

fn example2_3(out: Option<&mut Artifacts>) -> CliResult<Vec<Row>> {
    let s = bundled(reference::BUNDLED_PAPER_N3)?;
    let schedule = s.schedule()?;
    let rfm = Rfm::new(schedule.n())?;
    let x0 =
        s.x0.clone()
            .unwrap_or_else(|| reference::EXAMPLE2_X0.to_vec());
    let traj = integrate(&rfm, &schedule, &x0, (0.0, 10.0 * s.period), &s.solver, &[])?;
    let a = analyze_goe(&schedule, &s.orbit_config())?;
    if let Some(out) = out {
        out.write("fig2_trajectories.csv", |w| {
            Ok(write_trajectory_csv_every(w, &traj, figure_stride(&s))?)
        })?;
    }
    let mut rows = Vec::new();
    for (i, (&x, &p)) in traj
        .final_state()
        .iter()
        .zip(&reference::EXAMPLE2_ORBIT_POINT)
        .enumerate()
    {
        rows.push(Row::new(
            format!("x{}(20 pi)", i + 1),
            x,
            Target::Near(p, 1e-3),
        ));
    }
    for (i, (&x, &p)) in a
        .orbit
        .initial_point()
        .iter()
        .zip(&reference::EXAMPLE2_ORBIT_POINT)
        .enumerate()
    {
        rows.push(Row::new(
            format!("gamma{}(0)", i + 1),
            x,
            Target::Near(p, 1e-3),
        ));
    }
    rows.extend([
        Row::new(
            "R_P",
            a.verdict.r_p,
            Target::Near(reference::EXAMPLE2_R_P, 1e-3),
        ),
        Row::new(
            "e_3",
            a.equilibrium.e[2],
            Target::Near(reference::EXAMPLE2_E3, 5e-4),
        ),
        Row::new(
            "R_C",
            a.equilibrium.r_c,
            Target::Near(reference::EXAMPLE2_R_C, 5e-4),
        ),
        Row::new("gap R_P - R_C", a.verdict.goe_gap, Target::Negative),
    ]);
    Ok(rows)
}

fn example5(out: Option<&mut Artifacts>) -> CliResult<Vec<Row>> {
    let scenarios = reference::BUNDLED_TABLE1
        .iter()
        .map(|text| {
            let s = bundled(text)?;
            let mut b = BatchScenario::new(s.id.clone(), s.schedule()?);
            b.config = Some(s.orbit_config());
            Ok((s, b))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let batch: Vec<BatchScenario> = scenarios.iter().map(|(_, b)| b.clone()).collect();
    let results = run_batch(&batch, &Default::default(), Some(1))?;

    let mut rows = Vec::new();
    let mut analyses = Vec::new();
    for r in &results {
        let a = r
            .outcome
            .as_deref()
            .map_err(|e| CliError::Numerical(format!("{}: {e}", r.scenario_id)))?;
        rows.push(Row::new(
            format!("{} gap R_P - R_C", r.scenario_id),
            a.verdict.goe_gap,
            Target::Negative,
        ));
        rows.push(Row::new(
            format!("{} z_4 sign changes", r.scenario_id),
            a.zn_sign_changes() as f64,
            Target::AtLeast(2.0),
        ));
        analyses.push(a);
    }

    if let Some(out) = out {
        // Moving average of the production rate over one period, started
        // at the constant-rate equilibrium and run for ten periods.
        let mut moving = Vec::new();
        let mut gamma = Vec::new();
        let mut times = Vec::new();
        let mut phases = Vec::new();
        for ((s, _), a) in scenarios.iter().zip(&analyses) {
            let schedule = s.schedule()?;
            let traj = integrate(
                &Rfm::new(schedule.n())?,
                &schedule,
                &a.equilibrium.e,
                (0.0, 10.0 * s.period),
                &s.solver,
                &[Accumulator::output()],
            )?;
            let acc = &traj.accumulator("output").expect("requested").values;
            let m = s.solver.steps_per_period;
            let stride = figure_stride(s);
            let keep: Vec<usize> = (0..acc.len() - m).step_by(stride).collect();
            times = keep.iter().map(|&k| traj.times[k]).collect();
            moving.push((
                s.id.clone(),
                keep.iter()
                    .map(|&k| (acc[k + m] - acc[k]) / s.period)
                    .collect::<Vec<_>>(),
            ));

            let n = schedule.n();
            phases = a.orbit.times.iter().step_by(stride).copied().collect();
            gamma.push((
                s.id.clone(),
                a.orbit
                    .gamma
                    .iter()
                    .step_by(stride)
                    .map(|x| x[n - 1])
                    .collect::<Vec<_>>(),
            ));
        }
        let r_c = analyses[0].equilibrium.r_c;
        let e_n = *analyses[0].equilibrium.e.last().expect("n >= 1");

        let mut cols = vec![("t".to_string(), times.clone())];
        cols.extend(moving);
        cols.push(("R_C".to_string(), vec![r_c; times.len()]));
        out.write("fig3_moving_average.csv", |w| {
            Ok(write_columns_csv(w, &cols)?)
        })?;

        let mut cols = vec![("t".to_string(), phases.clone())];
        cols.extend(gamma);
        cols.push(("e_4".to_string(), vec![e_n; phases.len()]));
        out.write("fig4_gamma4.csv", |w| Ok(write_columns_csv(w, &cols)?))?;
    }
    Ok(rows)
}

pub fn reproduce(args: &ReproduceArgs) -> CliResult<()> {
    let mut out = args.out.as_deref().map(Artifacts::new).transpose()?;
    let (title, rows) = match args.example {
        Example::Example1 => ("tanh demo", example1(out.as_mut())?),
        Example::Example2_3 => ("three-site entrainment", example2_3(out.as_mut())?),
        Example::Example5 => ("four-site random batch", example5(out.as_mut())?),
    };
    crate::commands::emit(&render(title, &rows))?;
    if let Some(out) = out {
        for p in out.keep() {
            eprintln!("wrote {}", p.display());
        }
    }
    let failed = rows.iter().filter(|r| !r.pass()).count();
    if failed > 0 {
        return Err(CliError::Reproduction(format!(
            "{failed} of {} checks outside tolerance",
            rows.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets() {
        assert!(Row::new("a", 0.80471, Target::Near(0.8047, 5e-4)).pass());
        assert!(!Row::new("a", 0.806, Target::Near(0.8047, 5e-4)).pass());
        assert!(Row::new("b", 2.0, Target::AtLeast(2.0)).pass());
        assert!(!Row::new("c", 0.0, Target::Negative).pass());
        assert_eq!(
            Row::new("d", 1.0, Target::Near(0.5927, 1e-3)).tolerance(),
            "1e-3"
        );
    }

    #[test]
    fn table_layout() {
        let text = render("t", &[Row::new("R_P", 0.59375, Target::Near(0.5937, 1e-3))]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains("5.9375000000000000e-1"));
        assert!(lines[2].contains("0.5938"));
        assert!(lines[2].ends_with("PASS"));
        assert_eq!(lines[3], "1 of 1 checks passed");
    }
}
