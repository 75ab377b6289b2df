//! CSV and JSON artifacts for runs, and readers that reload them for re-checking.
//!
//! Floats are written in Rust's shortest round-trip form, so a reloaded column is
//! bit-identical to the recorded one. Missing optional values are empty fields.

use std::io::{Read, Write};

use serde::Serialize;

use crate::diagnostics::{fejer_from_distances, residual_integral_from_series, EnvelopeReport, Location, MonitorVerdict};
use crate::discrete::IterateRecord;
use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "residual", "dist_to_solution", "objective_at_z", "gamma"];
pub const ITERATES_HEADER: [&str; 5] = ["n", "residual", "dist_to_solution", "objective_at_z", "gamma"];
pub const ENVELOPE_HEADER: [&str; 3] = ["t", "measured", "envelope"];

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidState(format!("csv: {e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(io_err)?;
    for s in &record.samples {
        w.write_record([
            s.t.to_string(),
            s.residual.to_string(),
            opt(s.dist_to_solution),
            opt(s.objective_at_z),
            s.gamma.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_iterates_csv<W: Write>(record: &IterateRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ITERATES_HEADER).map_err(io_err)?;
    for it in &record.iterates {
        w.write_record([
            it.n.to_string(),
            it.residual.to_string(),
            opt(it.dist_to_solution),
            opt(it.objective_at_z),
            it.gamma.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_envelope_csv<W: Write>(report: &EnvelopeReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ENVELOPE_HEADER).map_err(io_err)?;
    for ((t, m), e) in report.times.iter().zip(&report.measured).zip(&report.envelope) {
        w.write_record([t.to_string(), m.to_string(), e.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// One row of `trajectory.csv` or `iterates.csv`; `index` is `t` or `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub index: f64,
    pub residual: f64,
    pub dist_to_solution: Option<f64>,
    pub objective_at_z: Option<f64>,
    pub gamma: f64,
}

/// Reads a file written by [`write_trajectory_csv`] or [`write_iterates_csv`].
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names[1..] != TRAJECTORY_HEADER[1..] || !(names[0] == "t" || names[0] == "n") {
        return Err(Error::InvalidState(format!("unexpected csv header {names:?}")));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(io_err) };
    let opt_num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    r.records()
        .map(|rec| {
            let rec = rec.map_err(io_err)?;
            Ok(SeriesRow {
                index: num(&rec[0])?,
                residual: num(&rec[1])?,
                dist_to_solution: opt_num(&rec[2])?,
                objective_at_z: opt_num(&rec[3])?,
                gamma: num(&rec[4])?,
            })
        })
        .collect()
}

/// Fejér verdict recomputed from the `dist_to_solution` column.
pub fn fejer_from_rows(rows: &[SeriesRow], continuous: bool) -> Result<MonitorVerdict> {
    let dists = rows
        .iter()
        .map(|r| {
            let loc = if continuous {
                Location::Time(r.index)
            } else {
                Location::Iteration(r.index as usize)
            };
            r.dist_to_solution
                .map(|d| (loc, d))
                .ok_or_else(|| Error::InvalidState("dist_to_solution column is empty".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fejer_from_distances(&dists))
}

/// Residual-integral verdict recomputed from a trajectory CSV.
pub fn residual_integral_from_rows(rows: &[SeriesRow], beta: f64, bound: Option<f64>) -> MonitorVerdict {
    let times: Vec<f64> = rows.iter().map(|r| r.index).collect();
    let gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    let residuals: Vec<f64> = rows.iter().map(|r| r.residual).collect();
    residual_integral_from_series(&times, &gammas, &residuals, beta, bound)
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::InvalidState(format!("json: {e}")))?;
    out.write_all(b"\n").map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{fejer_monitor, residual_integral_monitor};
    use crate::dynamics::{integrate, IntegratorOptions, StepSchedule};
    use crate::discrete::{run_tseng, GammaSequence};
    use crate::linalg::state;
    use crate::problems::ProblemSpec;

    #[test]
    fn trajectory_round_trip_preserves_verdicts() {
        let p = ProblemSpec::SkewRotation { n: 2 }.build().unwrap();
        let sched = StepSchedule::constant(0.5, 1.0).unwrap();
        let rec = integrate(&p, &sched, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 5.0, 0.05)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&rec, &mut buf).unwrap();
        let rows = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), rec.samples.len());
        assert_eq!(rows[7].residual, rec.samples[7].residual);
        assert_eq!(rows[0].objective_at_z, None);

        let xbar = state(&[0.0, 0.0]);
        assert_eq!(fejer_from_rows(&rows, true).unwrap(), fejer_monitor(&rec, &xbar));
        assert_eq!(
            residual_integral_from_rows(&rows, 1.0, Some(0.5)),
            residual_integral_monitor(&rec, &sched, Some(&xbar))
        );
    }

    #[test]
    fn iterates_round_trip() {
        let p = ProblemSpec::L1PlusIdentity {
            b: crate::operators::Bound::Scalar(3.0),
        }
        .build()
        .unwrap();
        let rec = run_tseng(&p, &GammaSequence::List(vec![0.5]), &state(&[0.0]), 50, 0.0).unwrap();
        let mut buf = Vec::new();
        write_iterates_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,residual,dist_to_solution,objective_at_z,gamma\n0,"));
        let rows = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(rows[3].objective_at_z, rec.iterates[3].objective_at_z);
        assert!(fejer_from_rows(&rows, false).unwrap().holds);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_series_csv("a,b,c,d,e\n1,2,3,4,5\n".as_bytes()).is_err());
    }
}
