//! CSV and JSON writers for trajectories, orbits and batch tables.
//!
//! Floats are written with `{:.16e}` so every value round-trips exactly.

use std::io::Write;

use serde_json::{json, Value};

use crate::analysis::{BatchRow, GoeAnalysis};
use crate::error::Result;
use crate::integrator::Trajectory;
use crate::orbit::PeriodicOrbit;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn state_header(dim: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=dim).map(|i| format!("x{i}")))
        .collect()
}

/// Columns `t, x1..xn, acc_<name>...`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    write_trajectory_csv_every(out, traj, 1)
}

/// As [`write_trajectory_csv`], keeping every `stride`-th sample plus the
/// last one.
pub fn write_trajectory_csv_every<W: Write>(
    out: W,
    traj: &Trajectory,
    stride: usize,
) -> Result<()> {
    let stride = stride.max(1);
    let dim = traj.states.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = state_header(dim);
    header.extend(traj.accumulators.iter().map(|a| format!("acc_{}", a.name)));
    w.write_record(&header)?;
    let last = traj.len().saturating_sub(1);
    for (k, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let row = std::iter::once(*t)
            .chain(x.iter().copied())
            .chain(traj.accumulators.iter().map(|a| a.values[k]))
            .map(float);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Same layout as [`write_trajectory_csv`], one row per orbit sample.
pub fn write_orbit_csv<W: Write>(out: W, orbit: &PeriodicOrbit) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(state_header(orbit.dim()))?;
    for (t, x) in orbit.times.iter().zip(&orbit.gamma) {
        w.write_record(std::iter::once(*t).chain(x.iter().copied()).map(float))?;
    }
    w.flush()?;
    Ok(())
}

/// Equal-length named columns as CSV.
pub fn write_columns_csv<W: Write>(out: W, columns: &[(String, Vec<f64>)]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    if let Some((name, _)) = columns.iter().find(|c| c.1.len() != rows) {
        return Err(crate::Error::InvalidArgument(format!(
            "column `{name}` has the wrong length"
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|c| c.0.as_str()))?;
    for k in 0..rows {
        w.write_record(columns.iter().map(|c| float(c.1[k])))?;
    }
    w.flush()?;
    Ok(())
}

pub const BATCH_COLUMNS: [&str; 9] = [
    "scenario_id",
    "n",
    "T",
    "R_P",
    "R_C",
    "gap",
    "zn_sign_changes",
    "matched_conditions",
    "classification",
];

/// One row per scenario. Failed rows keep the id, `n` and `T`, leave the
/// numeric columns empty and put `error: <message>` in `classification`.
pub fn write_batch_csv<W: Write>(out: W, rows: &[BatchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BATCH_COLUMNS)?;
    for row in rows {
        let mut rec = vec![
            row.scenario_id.clone(),
            row.n.to_string(),
            float(row.period),
        ];
        match &row.outcome {
            Ok(a) => {
                let v = &a.verdict;
                let matched: Vec<_> = v.matched().iter().map(|c| c.name()).collect();
                rec.extend([
                    float(v.r_p),
                    float(v.r_c),
                    float(v.goe_gap),
                    a.zn_sign_changes().to_string(),
                    matched.join(";"),
                    v.classification.to_string(),
                ]);
            }
            Err(msg) => {
                rec.extend(["", "", "", "", ""].map(String::from));
                rec.push(format!("error: {msg}"));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Verdict, equilibrium, orbit diagnostics and the flat moment report.
pub fn analysis_json(a: &GoeAnalysis) -> Result<Value> {
    Ok(json!({
        "verdict": serde_json::to_value(&a.verdict)?,
        "equilibrium": serde_json::to_value(&a.equilibrium)?,
        "orbit": {
            "gamma0": a.orbit.initial_point(),
            "closure_error": a.orbit.closure_error,
            "periods_used": a.orbit.periods_used,
            "contraction_ratio": finite_or_null(a.orbit.contraction_ratio),
            "samples": a.orbit.samples(),
        },
        "zn_sign_changes": a.zn_sign_changes(),
        "moments": a.moments.to_json(),
    }))
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::Null
    }
}

/// JSON variant of the batch table with full moment reports.
pub fn batch_json(rows: &[BatchRow]) -> Result<Value> {
    let items = rows
        .iter()
        .map(|row| {
            let mut obj = json!({
                "scenario_id": row.scenario_id,
                "n": row.n,
                "T": row.period,
            });
            match &row.outcome {
                Ok(a) => obj["result"] = analysis_json(a)?,
                Err(msg) => obj["error"] = Value::from(msg.as_str()),
            }
            Ok(obj)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Value::Array(items))
}
