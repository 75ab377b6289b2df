//! Purpose-built violating records, one per monitor. A monitor that lets its own
//! control pass is broken.

use super::{
    ergodic_objective_monitor, exponential_envelope, fejer_monitor, inclusion_monitor,
    residual_integral_monitor, velocity_monitor, zdot_bound_monitor, MonitorVerdict,
};
use crate::dynamics::{Objective, StepSchedule, TrajectoryRecord};
use crate::error::Result;
use crate::linalg::{state, State};
use crate::problems::ProblemSpec;

fn line_record(xs: &[f64], zs: &[f64], gamma: f64, dt: f64) -> Result<TrajectoryRecord> {
    let samples = xs
        .iter()
        .zip(zs)
        .enumerate()
        .map(|(i, (x, z))| (i as f64 * dt, state(&[*x]), state(&[*z]), gamma))
        .collect();
    TrajectoryRecord::synthetic(samples, 1.0, dt, None)
}

/// Verdicts of every monitor on its violating record; each should be a violation.
pub fn negative_controls() -> Result<Vec<MonitorVerdict>> {
    let origin = state(&[0.0]);
    let half = StepSchedule::constant(0.5, 1.0)?;
    let mut out = Vec::new();

    // distance rises by 1e−3 at the fourth sample
    let xs = [1.0, 0.9, 0.8, 0.801, 0.7];
    out.push(fejer_monitor(&line_record(&xs, &xs, 0.5, 0.1)?, &origin));

    // residual never decays, so the integral grows linearly
    let rec = line_record(&[1.0; 161], &[0.0; 161], 0.5, 0.1)?;
    out.push(residual_integral_monitor(&rec, &half, None));

    // distance to x̄ frozen while the envelope decays like e^{−t/2}
    let rec = line_record(&[1.0; 101], &[1.0; 101], 0.5, 0.1)?;
    out.push(exponential_envelope(&rec, &half, 1.0, &origin)?.verdict());

    // ζ drifts away from the minimiser of |·| although x₀ is the minimiser
    let zs: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
    let rec = line_record(&[0.0; 10], &zs, 0.5, 0.1)?;
    let abs = Objective::new(|x: &State| x[0].abs());
    out.push(ergodic_objective_monitor(&rec, &abs, std::slice::from_ref(&origin)));

    // z moves at speed 100 while x − z = 0
    let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
    out.push(zdot_bound_monitor(&line_record(&xs, &xs, 0.5, 0.01)?, &half));

    // recorded z is not the resolvent step of the rotation
    let rotation = ProblemSpec::SkewRotation { n: 2 }.build()?;
    let samples = (0..3)
        .map(|i| (i as f64 * 0.1, state(&[1.0, 0.0]), state(&[0.0, 0.0]), 0.5))
        .collect();
    let rec = TrajectoryRecord::synthetic(samples, 1.0, 0.1, None)?;
    out.push(inclusion_monitor(&rec, &rotation));

    // x moves although it sits at z
    let xs = [0.0, 1.0, 2.0];
    out.push(velocity_monitor(&line_record(&xs, &xs, 0.5, 0.1)?));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Status;

    #[test]
    fn every_control_is_a_violation() {
        let verdicts = negative_controls().unwrap();
        let names: Vec<&str> = verdicts.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "fejer",
                "residual_integral",
                "envelope",
                "ergodic_objective",
                "zdot_bound",
                "inclusion",
                "velocity"
            ]
        );
        for v in &verdicts {
            assert_eq!(v.status, Status::Violated, "{v:?}");
        }
    }
}
