use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fbf_core::diagnostics::{
    ergodic_objective_monitor, exponential_envelope, fejer_monitor, inclusion_monitor,
    residual_integral_monitor, velocity_monitor, zdot_bound_monitor, EnvelopeReport, MonitorVerdict,
    Status,
};
use fbf_core::discrete::{discrete_ergodic_point, run_tseng, GammaSequence, IterateRecord};
use fbf_core::dynamics::{ergodic_point, integrate, TrajectoryRecord};
use fbf_core::export;
use fbf_core::suites::{euler_discrete_gap, probe_points, run_suite, Mutation, Suite, SuiteReport};
use fbf_core::State;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Mode, MonitorName, Prepared, RunConfig};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    Error = 1,
    Violation = 2,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousSummary {
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub ergodic_point: Option<Vec<f64>>,
    pub final_residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_state: Vec<f64>,
    pub ergodic_point: Vec<f64>,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Coincidence {
    pub steps: usize,
    pub max_relative_gap: f64,
    pub tolerance: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunVerdict {
    pub run: &'static str,
    #[serde(flatten)]
    pub verdict: MonitorVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: String,
    pub dim: usize,
    pub beta: f64,
    pub rho: Option<f64>,
    pub known_solution: Option<Vec<f64>>,
    pub mode: Mode,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub continuous: Option<ContinuousSummary>,
    pub discrete: Option<DiscreteSummary>,
    pub coincidence: Option<Coincidence>,
    pub monitors: Vec<RunVerdict>,
}

impl Summary {
    pub fn violations(&self) -> usize {
        self.monitors
            .iter()
            .filter(|m| m.verdict.status == Status::Violated)
            .count()
            + self.coincidence.iter().filter(|c| !c.holds).count()
    }

    /// Final residual of the continuous run, or of the discrete run without one.
    pub fn final_residual(&self) -> f64 {
        match (&self.continuous, &self.discrete) {
            (Some(c), _) => c.final_residual,
            (None, Some(d)) => d.final_residual,
            (None, None) => f64::NAN,
        }
    }
}

pub struct RunOutput {
    pub summary: Summary,
    pub trajectory: Option<TrajectoryRecord>,
    pub iterates: Option<IterateRecord>,
    pub envelope: Option<EnvelopeReport>,
}

const COINCIDENCE_TOL: f64 = 1e-12;

fn vec_of(x: &State) -> Vec<f64> {
    x.iter().copied().collect()
}

/// Runs the configured solves and monitors without touching the filesystem.
pub fn run(prepared: &Prepared) -> Result<RunOutput> {
    let Prepared {
        config,
        problem,
        schedule,
        x0,
    } = prepared;
    let xbar = problem.known_solution();
    let probes: Vec<State> = match &config.probes {
        Some(ps) => ps.iter().map(|p| State::from_column_slice(p)).collect(),
        None => probe_points(problem, x0, config.seed),
    };
    let wants = |m: MonitorName| config.monitors.contains(&m);
    let mut monitors = Vec::new();
    let mut envelope = None;

    let trajectory = if config.mode.continuous() {
        let rec = integrate(problem, schedule, x0, &config.integrator).context("continuous run failed")?;
        let mut push = |v: MonitorVerdict| monitors.push(RunVerdict { run: "continuous", verdict: v });
        for m in &config.monitors {
            let v = match m {
                MonitorName::Fejer => match xbar {
                    Some(xb) => fejer_monitor(&rec, xb),
                    None => MonitorVerdict::inapplicable("fejer", "no known solution"),
                },
                MonitorName::ResidualIntegral => residual_integral_monitor(&rec, schedule, xbar),
                MonitorName::Envelope => match (problem.rho(), xbar) {
                    (Some(rho), Some(xb)) => {
                        let report = exponential_envelope(&rec, schedule, rho, xb)?;
                        let v = report.verdict();
                        envelope = Some(report);
                        v
                    }
                    _ => MonitorVerdict::inapplicable(
                        "envelope",
                        "needs a strongly monotone problem with a known solution",
                    ),
                },
                MonitorName::ErgodicObjective => match problem.objective() {
                    Some(f) => ergodic_objective_monitor(&rec, f, &probes),
                    None => MonitorVerdict::inapplicable("ergodic_objective", "problem has no objective"),
                },
                MonitorName::ZdotBound => zdot_bound_monitor(&rec, schedule),
                MonitorName::Inclusion => inclusion_monitor(&rec, problem),
                MonitorName::Velocity => velocity_monitor(&rec),
            };
            push(v);
        }
        Some(rec)
    } else {
        None
    };

    let iterates = if config.mode.discrete() {
        let gammas = GammaSequence::Schedule(schedule.clone());
        let rec = run_tseng(problem, &gammas, x0, config.discrete.max_iter, config.discrete.tol)
            .context("discrete run failed")?;
        if wants(MonitorName::Fejer) {
            let v = match xbar {
                Some(xb) => fejer_monitor(&rec, xb),
                None => MonitorVerdict::inapplicable("fejer", "no known solution"),
            };
            monitors.push(RunVerdict { run: "discrete", verdict: v });
        }
        if wants(MonitorName::ErgodicObjective) {
            let v = match problem.objective() {
                Some(f) => ergodic_objective_monitor(&rec, f, &probes),
                None => MonitorVerdict::inapplicable("ergodic_objective", "problem has no objective"),
            };
            monitors.push(RunVerdict { run: "discrete", verdict: v });
        }
        Some(rec)
    } else {
        None
    };

    let coincidence = if config.mode == Mode::Both {
        let steps = iterates.as_ref().map_or(0, |r| r.iterates.len());
        let (holds, gap) = euler_discrete_gap(problem, schedule, x0, steps)?;
        Some(Coincidence {
            steps,
            max_relative_gap: gap,
            tolerance: COINCIDENCE_TOL,
            holds,
        })
    } else {
        None
    };

    let continuous = trajectory.as_ref().map(|rec| {
        let last = rec.last();
        ContinuousSummary {
            final_time: last.t,
            final_state: vec_of(&last.x),
            ergodic_point: ergodic_point(rec).ok().map(|z| vec_of(&z)),
            final_residual: last.residual,
            samples: rec.samples.len(),
        }
    });
    let discrete = match &iterates {
        Some(rec) => Some(DiscreteSummary {
            iterations: rec.iterates.len(),
            converged: rec.converged,
            final_state: vec_of(&rec.final_x),
            ergodic_point: vec_of(&discrete_ergodic_point(rec)?),
            final_residual: rec.iterates.last().map_or(f64::NAN, |it| it.residual),
        }),
        None => None,
    };

    let summary = Summary {
        problem: config.problem.name().to_string(),
        dim: problem.dim(),
        beta: problem.beta(),
        rho: problem.rho(),
        known_solution: xbar.map(vec_of),
        mode: config.mode,
        seed: config.seed,
        x0: vec_of(x0),
        continuous,
        discrete,
        coincidence,
        monitors,
    };
    Ok(RunOutput {
        summary,
        trajectory,
        iterates,
        envelope,
    })
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes every artifact of `out` into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    if let Some(rec) = &out.trajectory {
        export::write_trajectory_csv(rec, create(dir.join("trajectory.csv"))?)?;
    }
    if let Some(rec) = &out.iterates {
        export::write_iterates_csv(rec, create(dir.join("iterates.csv"))?)?;
    }
    if let Some(env) = &out.envelope {
        export::write_envelope_csv(env, create(dir.join("envelope.csv"))?)?;
    }
    if let Some(c) = &out.summary.coincidence {
        export::write_json(c, create(dir.join("coincidence.json"))?)?;
    }
    export::write_json(&out.summary, create(dir.join("summary.json"))?)?;
    Ok(())
}

fn print_monitors(summary: &Summary, out: &mut impl Write) -> Result<()> {
    for m in &summary.monitors {
        let status = match m.verdict.status {
            Status::Holds => "holds",
            Status::Violated => "VIOLATED",
            Status::Inapplicable => "inapplicable",
        };
        writeln!(out, "  {:<10} {:<18} {:<12} {}", m.run, m.verdict.name, status, m.verdict.detail)?;
    }
    if let Some(c) = &summary.coincidence {
        writeln!(
            out,
            "  {:<10} {:<18} {:<12} largest relative gap {:e} over {} steps",
            "both",
            "coincidence",
            if c.holds { "holds" } else { "VIOLATED" },
            c.max_relative_gap,
            c.steps
        )?;
    }
    Ok(())
}

pub fn solve(config_path: &Path, strict: bool, out: &mut impl Write) -> Result<Outcome> {
    let prepared = RunConfig::from_path(config_path)?.prepare()?;
    let dir = prepared.config.output_dir.clone();
    let result = run(&prepared)?;
    write_outputs(&result, &dir)?;
    writeln!(
        out,
        "{} (n = {}), final residual {:e}; artifacts in {}",
        result.summary.problem,
        result.summary.dim,
        result.summary.final_residual(),
        dir.display()
    )?;
    print_monitors(&result.summary, out)?;
    Ok(if strict && result.summary.violations() > 0 {
        Outcome::Violation
    } else {
        Outcome::Success
    })
}

pub fn check(suite: Suite, seed: u64, mutation: Option<Mutation>, out: &mut impl Write) -> Result<Outcome> {
    let reports = run_suite(suite, seed, mutation);
    print_reports(&reports, out)?;
    Ok(if reports.iter().all(SuiteReport::passed) {
        Outcome::Success
    } else {
        Outcome::Violation
    })
}

pub fn print_reports(reports: &[SuiteReport], out: &mut impl Write) -> Result<()> {
    writeln!(out, "{:<10} {:>7} {:>9}", "suite", "checks", "failures")?;
    for r in reports {
        writeln!(out, "{:<10} {:>7} {:>9}", r.suite.name(), r.checks, r.failures)?;
    }
    for r in reports {
        for f in &r.failed {
            writeln!(out, "FAIL [{}] {}: {}", r.suite.name(), f.check, f.detail)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub final_residual: f64,
    /// First time (or iteration, for discrete-only runs) with residual ≤ `discrete.tol`.
    pub time_to_tol: Option<f64>,
    pub violations: usize,
}

fn time_to_tol(out: &RunOutput, tol: f64) -> Option<f64> {
    match (&out.trajectory, &out.iterates) {
        (Some(rec), _) => rec.samples.iter().find(|s| s.residual <= tol).map(|s| s.t),
        (None, Some(rec)) => rec
            .iterates
            .iter()
            .find(|it| it.residual <= tol)
            .map(|it| it.n as f64),
        (None, None) => None,
    }
}

pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("`{s}` is not a number")))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        bail!("--values must list at least one number");
    }
    Ok(values)
}

/// One solve per value of `param`, each in `<output_dir>/<param>=<value>/`, plus
/// `sweep.csv` in `output_dir`.
pub fn sweep(
    config_path: &Path,
    param: &str,
    values: &[f64],
    strict: bool,
    out: &mut impl Write,
) -> Result<Outcome> {
    if values.is_empty() {
        bail!("--values must list at least one number");
    }
    let base = config::load_table(config_path)?;
    let base_dir = RunConfig::from_table(base.clone())?.output_dir;

    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| -> Result<SweepRow> {
            let mut table = base.clone();
            config::set_numeric(&mut table, param, value)?;
            let dir = base_dir.join(format!("{param}={value}"));
            table.insert("output_dir".into(), toml::Value::String(dir.to_string_lossy().into_owned()));
            let prepared = RunConfig::from_table(table)?
                .prepare()
                .with_context(|| format!("{param} = {value}"))?;
            let tol = prepared.config.discrete.tol;
            let result = run(&prepared).with_context(|| format!("{param} = {value}"))?;
            write_outputs(&result, &dir)?;
            Ok(SweepRow {
                value,
                final_residual: result.summary.final_residual(),
                time_to_tol: time_to_tol(&result, tol),
                violations: result.summary.violations(),
            })
        })
        .collect::<Result<_>>()?;

    fs::create_dir_all(&base_dir)?;
    let mut csv = create(base_dir.join("sweep.csv"))?;
    writeln!(csv, "value,final_residual,time_to_tol")?;
    for r in &rows {
        writeln!(
            csv,
            "{},{},{}",
            r.value,
            r.final_residual,
            r.time_to_tol.map(|t| t.to_string()).unwrap_or_default()
        )?;
    }
    csv.flush()?;

    writeln!(out, "{:>12} {:>16} {:>12}", param, "final_residual", "time_to_tol")?;
    for r in &rows {
        let ttt = r.time_to_tol.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        writeln!(out, "{:>12} {:>16.6e} {:>12}", r.value, r.final_residual, ttt)?;
    }
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    Ok(if strict && violations > 0 {
        Outcome::Violation
    } else {
        Outcome::Success
    })
}
