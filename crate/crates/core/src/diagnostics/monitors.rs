use super::{Location, MonitorVerdict, Stream};
use crate::dynamics::{Objective, ProblemInstance, StepSchedule, TrajectoryRecord};
use crate::linalg::State;

/// Allowed increase of the distance to a solution between consecutive samples.
pub const FEJER_SLACK: f64 = 1e-8;
/// Slack on the residual-integral bound `‖x(0) − x̄‖²/2`.
pub const RESIDUAL_INTEGRAL_TOL: f64 = 1e-6;
/// Relative slack on the ergodic objective bound.
pub const ERGODIC_REL_TOL: f64 = 1e-9;
/// Relative slack on the finite-difference `‖ż‖` bound.
pub const ZDOT_REL_TOL: f64 = 5e-2;
const ZDOT_ABS_TOL: f64 = 1e-9;
const VELOCITY_TOL: f64 = 1e-10;
const INCLUSION_TOL: f64 = 1e-12;

/// Fejér check on a distance series: `d_{i+1} ≤ d_i + FEJER_SLACK`.
pub fn fejer_from_distances(dists: &[(Location, f64)]) -> MonitorVerdict {
    let mut worst = (f64::NEG_INFINITY, None);
    for w in dists.windows(2) {
        let inc = w[1].1 - w[0].1;
        if inc > worst.0 {
            worst = (inc, Some(w[1].0));
        }
    }
    if dists.len() < 2 {
        return MonitorVerdict::decide("fejer", true, 0.0, None, "fewer than two samples");
    }
    let holds = worst.0 <= FEJER_SLACK;
    MonitorVerdict::decide(
        "fejer",
        holds,
        worst.0,
        worst.1,
        format!("largest step increase of ‖x − x̄‖: {:e}", worst.0),
    )
}

/// Distance to `xbar` must be nonincreasing across the record.
pub fn fejer_monitor<S: Stream + ?Sized>(record: &S, xbar: &State) -> MonitorVerdict {
    let dists: Vec<_> = record
        .states()
        .into_iter()
        .map(|(loc, x)| (loc, (x - xbar).norm()))
        .collect();
    fejer_from_distances(&dists)
}

/// `I(T) = ∫₀ᵀ (1 − γ/β)(γ·r)² dt` by the trapezoid rule over the samples, where `r`
/// is the recorded residual `‖x − z‖/γ`.
///
/// With `bound = Some(‖x(0) − x̄‖²/2)` the verdict compares `I(T)` with it. Without a
/// bound the verdict asks whether the increment over `[3T/4, T]` is smaller than the
/// one over `[T/2, 3T/4]`.
pub fn residual_integral_from_series(
    times: &[f64],
    gammas: &[f64],
    residuals: &[f64],
    beta: f64,
    bound: Option<f64>,
) -> MonitorVerdict {
    const NAME: &str = "residual_integral";
    if times.len() < 2 {
        return MonitorVerdict::inapplicable(NAME, "need at least two samples");
    }
    let integrand: Vec<f64> = gammas
        .iter()
        .zip(residuals)
        .map(|(g, r)| (1.0 - g / beta) * (g * r) * (g * r))
        .collect();
    let mut cumulative = vec![0.0; times.len()];
    for i in 1..times.len() {
        cumulative[i] =
            cumulative[i - 1] + 0.5 * (times[i] - times[i - 1]) * (integrand[i] + integrand[i - 1]);
    }
    let total = *cumulative.last().unwrap();
    let t_end = *times.last().unwrap();

    match bound {
        Some(b) => {
            let margin = total - b;
            MonitorVerdict::decide(
                NAME,
                margin <= RESIDUAL_INTEGRAL_TOL,
                margin,
                Some(Location::Time(t_end)),
                format!("I(T) = {total:e} against bound {b:e}"),
            )
            .with_value(total)
        }
        None => {
            let at = |frac: f64| {
                let target = frac * t_end;
                let i = times.partition_point(|t| *t < target).min(times.len() - 1);
                cumulative[i]
            };
            let earlier = at(0.75) - at(0.5);
            let later = total - at(0.75);
            let decaying = later <= earlier * (1.0 - 1e-6) || later <= 1e-14;
            MonitorVerdict::decide(
                NAME,
                decaying,
                later - earlier,
                Some(Location::Time(t_end)),
                format!("I(T) = {total:e}; increments {earlier:e} then {later:e}"),
            )
            .with_value(total)
        }
    }
}

/// Residual integral along a trajectory; see [`residual_integral_from_series`].
pub fn residual_integral_monitor(
    record: &TrajectoryRecord,
    schedule: &StepSchedule,
    xbar: Option<&State>,
) -> MonitorVerdict {
    let times: Vec<f64> = record.samples.iter().map(|s| s.t).collect();
    let gammas: Vec<f64> = record.samples.iter().map(|s| s.gamma).collect();
    let residuals: Vec<f64> = record.samples.iter().map(|s| s.residual).collect();
    let bound = xbar.map(|xb| 0.5 * (record.x0() - xb).norm_squared());
    residual_integral_from_series(&times, &gammas, &residuals, schedule.beta(), bound)
}

/// `(f + h)(ζ) ≤ (f + h)(p) + ‖x₀ − p‖²/(2Γ)` for every probe `p` at every recorded
/// `Γ > 0`. Samples with `ζ ∉ dom f` and probes outside `dom f` are skipped.
pub fn ergodic_objective_monitor<S: Stream + ?Sized>(
    record: &S,
    objective: &Objective,
    probes: &[State],
) -> MonitorVerdict {
    const NAME: &str = "ergodic_objective";
    let x0 = record.initial_state();
    let probes: Vec<(f64, f64)> = probes
        .iter()
        .filter_map(|p| {
            let v = objective.eval(p);
            v.is_finite().then(|| (v, (x0 - p).norm_squared()))
        })
        .collect();
    if probes.is_empty() {
        return MonitorVerdict::inapplicable(NAME, "no probe point lies in dom f");
    }
    let mut checked = 0usize;
    let mut skipped = 0usize;
    let mut worst = (f64::NEG_INFINITY, None);
    let mut holds = true;
    for (loc, big_gamma, zeta) in record.ergodic_points() {
        let lhs = objective.eval(zeta);
        if !lhs.is_finite() {
            skipped += 1;
            continue;
        }
        for &(fp, d2) in &probes {
            let rhs = fp + d2 / (2.0 * big_gamma);
            let excess = lhs - rhs;
            if excess > ERGODIC_REL_TOL * (1.0 + fp.abs()) {
                holds = false;
            }
            if excess > worst.0 {
                worst = (excess, Some(loc));
            }
            checked += 1;
        }
    }
    if checked == 0 {
        return MonitorVerdict::inapplicable(
            NAME,
            format!("ergodic point outside dom f at all {skipped} samples"),
        );
    }
    MonitorVerdict::decide(
        NAME,
        holds,
        worst.0,
        worst.1,
        format!("{checked} comparisons, {skipped} samples with ζ outside dom f"),
    )
}

/// `√((1 + γ̇/γ)² + γ²/β²) + (γ/β)√(1 + γ²/β²)`.
pub fn zdot_bound_coefficient(gamma: f64, gamma_dot: f64, beta: f64) -> f64 {
    let q = (gamma / beta).powi(2);
    ((1.0 + gamma_dot / gamma).powi(2) + q).sqrt() + (gamma / beta) * (1.0 + q).sqrt()
}

/// Central-difference `‖Δz/Δt‖` against the `‖ż‖` bound at interior samples.
pub fn zdot_bound_monitor(record: &TrajectoryRecord, schedule: &StepSchedule) -> MonitorVerdict {
    const NAME: &str = "zdot_bound";
    if schedule.derivative(0.0).is_none() {
        return MonitorVerdict::inapplicable(NAME, "schedule has no derivative information");
    }
    let s = &record.samples;
    if s.len() < 3 {
        return MonitorVerdict::inapplicable(NAME, "need at least three samples");
    }
    let max_gap = s.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    if max_gap > 10.0 * record.step * (1.0 + 1e-9) {
        return MonitorVerdict::inapplicable(
            NAME,
            format!("sample spacing {max_gap} exceeds 10h = {}", 10.0 * record.step),
        );
    }
    let beta = schedule.beta();
    let mut holds = true;
    let mut worst = (f64::NEG_INFINITY, None);
    // the bound's derivation drops a cross term whose sign is that of 1 + γ̇/γ
    let mut fast_decrease = 0usize;
    for i in 1..s.len() - 1 {
        let (prev, cur, next) = (&s[i - 1], &s[i], &s[i + 1]);
        let fd = (&next.z - &prev.z).norm() / (next.t - prev.t);
        let gamma_dot = schedule.derivative(cur.t).unwrap_or(0.0);
        if gamma_dot < -cur.gamma {
            fast_decrease += 1;
        }
        let bound =
            zdot_bound_coefficient(cur.gamma, gamma_dot, beta) * (&cur.x - &cur.z).norm();
        let excess = fd - bound;
        if fd > bound * (1.0 + ZDOT_REL_TOL) + ZDOT_ABS_TOL {
            holds = false;
        }
        if excess > worst.0 {
            worst = (excess, Some(Location::Time(cur.t)));
        }
    }
    MonitorVerdict::decide(
        NAME,
        holds,
        worst.0,
        worst.1,
        format!(
            "largest ‖Δz/Δt‖ − bound: {:e}; {fast_decrease} samples with γ̇ < −γ",
            worst.0
        ),
    )
}

/// Re-evaluates `z = J_{γA}(x − γBx)` at each sample, which is the inclusion
/// `(x − z)/γ − Bx ∈ Az` by definition of the resolvent.
pub fn inclusion_monitor(record: &TrajectoryRecord, problem: &ProblemInstance) -> MonitorVerdict {
    let mut worst = (0.0f64, None);
    for s in &record.samples {
        let bx = problem.b().apply(&s.x);
        let z = problem.a().resolve(s.gamma, &(&s.x - &bx * s.gamma));
        let err = (&z - &s.z).norm();
        if err > worst.0 || worst.1.is_none() {
            worst = (err, Some(Location::Time(s.t)));
        }
    }
    MonitorVerdict::decide(
        "inclusion",
        worst.0 <= INCLUSION_TOL,
        worst.0,
        worst.1,
        format!("largest ‖z_recorded − z_recomputed‖: {:e}", worst.0),
    )
}

/// `‖ẋ‖ ≤ √(1 + γ²/β²)‖x − z‖` at every integration step.
pub fn velocity_monitor(record: &TrajectoryRecord) -> MonitorVerdict {
    MonitorVerdict::decide(
        "velocity",
        record.velocity_excess <= VELOCITY_TOL,
        record.velocity_excess,
        None,
        format!("largest excess over all steps: {:e}", record.velocity_excess),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Status;
    use crate::discrete::IterateRecord;
    use crate::linalg::state;

    fn line_record(xs: &[f64], zs: &[f64], gamma: f64, dt: f64) -> TrajectoryRecord {
        let samples = xs
            .iter()
            .zip(zs)
            .enumerate()
            .map(|(i, (x, z))| (i as f64 * dt, state(&[*x]), state(&[*z]), gamma))
            .collect();
        TrajectoryRecord::synthetic(samples, 1.0, dt, None).unwrap()
    }

    #[test]
    fn fejer_constant_record_holds() {
        let xbar = state(&[1.0]);
        let rec = line_record(&[1.0; 5], &[1.0; 5], 0.5, 0.1);
        let v = fejer_monitor(&rec, &xbar);
        assert!(v.holds);
        assert_eq!(v.worst_margin, 0.0);
    }

    #[test]
    fn fejer_detects_injected_increase() {
        let xs = [1.0, 0.9, 0.8, 0.801, 0.7];
        let rec = line_record(&xs, &xs, 0.5, 0.1);
        let v = fejer_monitor(&rec, &state(&[0.0]));
        assert!(!v.holds);
        assert_eq!(v.location, Some(Location::Time(0.30000000000000004)));
        assert!((v.worst_margin - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn fejer_on_iterates_includes_final_point() {
        let rec = IterateRecord::synthetic(
            vec![(state(&[2.0]), state(&[1.0]), 0.5), (state(&[1.0]), state(&[0.5]), 0.5)],
            None,
        )
        .unwrap();
        assert!(fejer_monitor(&rec, &state(&[0.0])).holds);
        let mut bad = rec.clone();
        bad.final_x = state(&[3.0]);
        let v = fejer_monitor(&bad, &state(&[0.0]));
        assert!(!v.holds);
        assert_eq!(v.location, Some(Location::Iteration(2)));
    }

    #[test]
    fn residual_integral_zero_at_solution() {
        let rec = line_record(&[0.0; 11], &[0.0; 11], 0.5, 0.1);
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let v = residual_integral_monitor(&rec, &s, Some(&state(&[0.0])));
        assert!(v.holds);
        assert_eq!(v.value, Some(0.0));
    }

    #[test]
    fn residual_integral_constant_residual_is_not_decaying() {
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        for n in [41, 81, 161] {
            let rec = line_record(&vec![1.0; n], &vec![0.0; n], 0.5, 0.1);
            let v = residual_integral_monitor(&rec, &s, None);
            assert!(!v.holds, "n = {n}");
        }
    }

    #[test]
    fn residual_integral_decaying_residual_passes() {
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let xs: Vec<f64> = (0..101).map(|i| (-0.1 * i as f64).exp()).collect();
        let zs = vec![0.0; 101];
        let v = residual_integral_monitor(&line_record(&xs, &zs, 0.5, 0.1), &s, None);
        assert!(v.holds, "{v:?}");
    }

    #[test]
    fn ergodic_probe_at_zeta_itself_holds() {
        let xs: Vec<f64> = (0..20).map(|i| 3.0 - 0.1 * i as f64).collect();
        let rec = line_record(&xs, &xs, 0.5, 0.1);
        let objective = Objective::new(|x: &State| x[0].abs());
        let zeta = crate::dynamics::ergodic_point(&rec).unwrap();
        let v = ergodic_objective_monitor(&rec, &objective, &[zeta]);
        assert_eq!(v.status, Status::Holds);
    }

    #[test]
    fn ergodic_violation_and_inapplicable() {
        // ζ wanders away from the minimiser while x₀ = 0: an impossible record.
        let xs = vec![0.0; 10];
        let zs: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let rec = line_record(&xs, &zs, 0.5, 0.1);
        let objective = Objective::new(|x: &State| x[0].abs());
        let v = ergodic_objective_monitor(&rec, &objective, &[state(&[0.0])]);
        assert_eq!(v.status, Status::Violated);

        let boxed = Objective::new(|x: &State| if x[0] <= 0.5 { 0.0 } else { f64::INFINITY });
        let v = ergodic_objective_monitor(&rec, &boxed, &[state(&[0.0])]);
        assert_eq!(v.status, Status::Inapplicable);
    }

    #[test]
    fn zdot_coefficient_value() {
        assert!((zdot_bound_coefficient(0.5, 0.0, 1.0) - 1.6770509831248424).abs() < 1e-12);
    }

    #[test]
    fn zdot_negative_control_and_inapplicable() {
        // z jumps while x − z stays tiny
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rec = line_record(&xs, &xs, 0.5, 0.01);
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        assert!(!zdot_bound_monitor(&rec, &s).holds);

        let custom = StepSchedule::custom(|_| 0.5, None, 0.5, 0.5, 1.0, None).unwrap();
        assert_eq!(zdot_bound_monitor(&rec, &custom).status, Status::Inapplicable);
    }
}
