use serde::Serialize;

use super::{Location, MonitorVerdict};
use crate::dynamics::{StepSchedule, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg::State;

/// Relative allowance for integrator and quadrature error.
pub const ENVELOPE_REL_TOL: f64 = 1e-2;
pub const ENVELOPE_ABS_TOL: f64 = 1e-12;

/// `2ργ(β − γ) / (βργ + β − γ)`, the instantaneous decay rate of `‖x − x̄‖²`.
pub fn decay_integrand(rho: f64, beta: f64, gamma: f64) -> f64 {
    2.0 * rho * gamma * (beta - gamma) / (beta * rho * gamma + beta - gamma)
}

/// Uniform rate `2ρδε / (βρ(β − ε) + β − δ)` valid whenever `δ ≤ γ ≤ β − ε`.
pub fn corollary_rate(rho: f64, beta: f64, delta: f64, eps: f64) -> f64 {
    2.0 * rho * delta * eps / (beta * rho * (beta - eps) + beta - delta)
}

/// `d0² · exp(−corollary_rate · t)`.
pub fn corollary_envelope(d0_sq: f64, rho: f64, beta: f64, delta: f64, eps: f64, t: f64) -> f64 {
    d0_sq * (-corollary_rate(rho, beta, delta, eps) * t).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub times: Vec<f64>,
    /// `‖x(t) − x̄‖²`.
    pub measured: Vec<f64>,
    /// `‖x(0) − x̄‖² · exp(−∫₀ᵗ decay_integrand)`.
    pub envelope: Vec<f64>,
    /// `(t, measured − envelope)` where the tolerance is exceeded.
    pub violations: Vec<(f64, f64)>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn verdict(&self) -> MonitorVerdict {
        let (mut worst, mut at) = (f64::NEG_INFINITY, None);
        for ((t, m), e) in self.times.iter().zip(&self.measured).zip(&self.envelope) {
            let ratio = (m - e) / e.max(f64::MIN_POSITIVE);
            if ratio > worst {
                worst = ratio;
                at = Some(Location::Time(*t));
            }
        }
        MonitorVerdict::decide(
            "envelope",
            self.holds(),
            worst,
            at,
            format!(
                "{} violations; largest relative excess {worst:e}",
                self.violations.len()
            ),
        )
    }
}

/// Compares `‖x(t) − x̄‖²` with the exponential envelope at every sample. The
/// exponent is integrated by the trapezoid rule at the integrator's step.
pub fn exponential_envelope(
    record: &TrajectoryRecord,
    schedule: &StepSchedule,
    rho: f64,
    xbar: &State,
) -> Result<EnvelopeReport> {
    if !(rho > 0.0) {
        return Err(Error::Parameter(format!("rho must be positive, got {rho}")));
    }
    let beta = schedule.beta();
    let rate = |t: f64| decay_integrand(rho, beta, schedule.eval(t));
    let d0 = (record.x0() - xbar).norm_squared();

    let mut report = EnvelopeReport {
        times: Vec::with_capacity(record.samples.len()),
        measured: Vec::with_capacity(record.samples.len()),
        envelope: Vec::with_capacity(record.samples.len()),
        violations: Vec::new(),
        rel_tol: ENVELOPE_REL_TOL,
        abs_tol: ENVELOPE_ABS_TOL,
    };
    let mut exponent = 0.0;
    let mut prev_t = 0.0;
    for s in &record.samples {
        let span = s.t - prev_t;
        if span > 0.0 {
            let pieces = (span / record.step).round().max(1.0) as usize;
            let dt = span / pieces as f64;
            for k in 0..pieces {
                let a = prev_t + k as f64 * dt;
                exponent += 0.5 * dt * (rate(a) + rate(a + dt));
            }
        }
        prev_t = s.t;

        let measured = (&s.x - xbar).norm_squared();
        let envelope = d0 * (-exponent).exp();
        if measured > envelope * (1.0 + ENVELOPE_REL_TOL) + ENVELOPE_ABS_TOL {
            report.violations.push((s.t, measured - envelope));
        }
        report.times.push(s.t);
        report.measured.push(measured);
        report.envelope.push(envelope);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;

    #[test]
    fn integrand_example() {
        assert_eq!(decay_integrand(1.0, 1.0, 0.5), 0.5);
    }

    #[test]
    fn constant_schedule_matches_corollary() {
        for (rho, beta, c) in [(1.0, 1.0, 0.5), (0.3, 2.0, 1.1), (5.0, 0.7, 0.05)] {
            let eps = beta - c;
            let a = decay_integrand(rho, beta, c);
            let b = corollary_rate(rho, beta, c, eps);
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn envelope_at_time_zero_is_initial_distance() {
        let samples = vec![
            (0.0, state(&[2.0]), state(&[1.0]), 0.5),
            (0.01, state(&[1.99]), state(&[1.0]), 0.5),
        ];
        let rec = TrajectoryRecord::synthetic(samples, 1.0, 0.01, None).unwrap();
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let r = exponential_envelope(&rec, &s, 1.0, &state(&[0.0])).unwrap();
        assert_eq!(r.envelope[0], 4.0);
        assert_eq!(r.measured[0], 4.0);
        assert!(r.holds());
        assert!(exponential_envelope(&rec, &s, 0.0, &state(&[0.0])).is_err());
    }

    #[test]
    fn envelope_flags_slow_decay() {
        // ‖x‖² stays at 4 while the envelope predicts e^{−0.5t}·4
        let samples = (0..=100)
            .map(|k| (k as f64 * 0.1, state(&[2.0]), state(&[1.0]), 0.5))
            .collect();
        let rec = TrajectoryRecord::synthetic(samples, 1.0, 0.1, None).unwrap();
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let r = exponential_envelope(&rec, &s, 1.0, &state(&[0.0])).unwrap();
        assert!(!r.holds());
        assert!(!r.verdict().holds);
    }
}
