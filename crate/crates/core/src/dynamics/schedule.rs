//! Step-size schedules `t ↦ γ(t)` with declared bounds `δ ≤ γ(t) ≤ β − ε`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `γ(t) = value`.
    Constant { value: f64 },
    /// Oscillates between `lo` and `hi`: `mid + amp·sin(2πt/period)`.
    Sinusoidal { lo: f64, hi: f64, period: f64 },
    /// Linear from `start` at `t = 0` to `end` at `t = duration`, constant afterwards.
    Ramp { start: f64, end: f64, duration: f64 },
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Kind {
    Catalog(ScheduleSpec),
    Custom {
        eval: Arc<ScalarFn>,
        derivative: Option<Arc<ScalarFn>>,
    },
}

#[derive(Clone)]
pub struct StepSchedule {
    kind: Kind,
    beta: f64,
    delta: f64,
    eps: f64,
    deriv_bound: Option<f64>,
}

impl fmt::Debug for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Catalog(spec) => format!("{spec:?}"),
            Kind::Custom { .. } => "Custom".to_string(),
        };
        f.debug_struct("StepSchedule")
            .field("kind", &kind)
            .field("beta", &self.beta)
            .field("delta", &self.delta)
            .field("eps", &self.eps)
            .field("deriv_bound", &self.deriv_bound)
            .finish()
    }
}

fn in_open_range(v: f64, beta: f64) -> bool {
    v > 0.0 && v < beta
}

/// Builds a catalog schedule from its name and a JSON object of parameters.
pub fn schedule_catalog(name: &str, params: serde_json::Value, beta: f64) -> Result<StepSchedule> {
    const NAMES: [&str; 3] = ["constant", "sinusoidal", "ramp"];
    if !NAMES.contains(&name) {
        return Err(Error::UnknownName {
            kind: "schedule",
            name: name.to_string(),
        });
    }
    let mut obj = match params {
        serde_json::Value::Object(m) => m,
        other => {
            return Err(Error::Construction(format!(
                "schedule parameters must be an object, got {other}"
            )))
        }
    };
    obj.insert("name".into(), name.into());
    let spec: ScheduleSpec = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| Error::Construction(format!("{name}: {e}")))?;
    StepSchedule::from_spec(spec, beta)
}

impl StepSchedule {
    pub fn from_spec(spec: ScheduleSpec, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Construction(format!("beta must be positive, got {beta}")));
        }
        let range_err = |lo: f64, hi: f64| {
            Error::Construction(format!(
                "schedule range [{lo}, {hi}] must lie inside (0, beta = {beta})"
            ))
        };
        let (delta, hi, deriv_bound) = match spec {
            ScheduleSpec::Constant { value } => {
                if !in_open_range(value, beta) {
                    return Err(range_err(value, value));
                }
                (value, value, 0.0)
            }
            ScheduleSpec::Sinusoidal { lo, hi, period } => {
                if !(lo <= hi) || !in_open_range(lo, beta) || !in_open_range(hi, beta) {
                    return Err(range_err(lo, hi));
                }
                if !(period > 0.0) || !period.is_finite() {
                    return Err(Error::Construction(format!(
                        "sinusoidal period must be positive, got {period}"
                    )));
                }
                (lo, hi, 0.5 * (hi - lo) * TAU / period)
            }
            ScheduleSpec::Ramp {
                start,
                end,
                duration,
            } => {
                let (lo, hi) = (start.min(end), start.max(end));
                if !in_open_range(lo, beta) || !in_open_range(hi, beta) {
                    return Err(range_err(lo, hi));
                }
                if !(duration > 0.0) || !duration.is_finite() {
                    return Err(Error::Construction(format!(
                        "ramp duration must be positive, got {duration}"
                    )));
                }
                (lo, hi, (end - start).abs() / duration)
            }
        };
        Ok(Self {
            kind: Kind::Catalog(spec),
            beta,
            delta,
            eps: beta - hi,
            deriv_bound: Some(deriv_bound),
        })
    }

    /// A user-supplied schedule. `derivative`, when present, must be the analytic `γ̇`.
    pub fn custom<F>(
        eval: F,
        derivative: Option<Arc<ScalarFn>>,
        delta: f64,
        eps: f64,
        beta: f64,
        deriv_bound: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(delta > 0.0) || !(eps > 0.0) || !(delta <= beta - eps) {
            return Err(Error::Construction(format!(
                "need 0 < delta <= beta - eps, got delta {delta}, eps {eps}, beta {beta}"
            )));
        }
        Ok(Self {
            kind: Kind::Custom {
                eval: Arc::new(eval),
                derivative,
            },
            beta,
            delta,
            eps,
            deriv_bound,
        })
    }

    pub fn constant(value: f64, beta: f64) -> Result<Self> {
        Self::from_spec(ScheduleSpec::Constant { value }, beta)
    }

    pub fn spec(&self) -> Option<&ScheduleSpec> {
        match &self.kind {
            Kind::Catalog(s) => Some(s),
            Kind::Custom { .. } => None,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn deriv_bound(&self) -> Option<f64> {
        self.deriv_bound
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, Kind::Catalog(ScheduleSpec::Constant { .. }))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Catalog(ScheduleSpec::Constant { value }) => *value,
            Kind::Catalog(ScheduleSpec::Sinusoidal { lo, hi, period }) => {
                0.5 * (lo + hi) + 0.5 * (hi - lo) * (TAU * t / period).sin()
            }
            Kind::Catalog(ScheduleSpec::Ramp {
                start,
                end,
                duration,
            }) => {
                let s = (t / duration).clamp(0.0, 1.0);
                start + (end - start) * s
            }
            Kind::Custom { eval, .. } => eval(t),
        }
    }

    /// Analytic `γ̇(t)`, where known. The ramp reports its right derivative at the corner.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        match &self.kind {
            Kind::Catalog(ScheduleSpec::Constant { .. }) => Some(0.0),
            Kind::Catalog(ScheduleSpec::Sinusoidal { lo, hi, period }) => {
                let w = TAU / period;
                Some(0.5 * (hi - lo) * w * (w * t).cos())
            }
            Kind::Catalog(ScheduleSpec::Ramp {
                start,
                end,
                duration,
            }) => Some(if t < *duration {
                (end - start) / duration
            } else {
                0.0
            }),
            Kind::Custom { derivative, .. } => derivative.as_ref().map(|d| d(t)),
        }
    }

    /// Checks `δ ≤ γ(t) ≤ β − ε` and, when declared, the derivative bound on a uniform
    /// grid of `[0, horizon]`. Returns the first offending time.
    pub fn verify(&self, horizon: f64, samples: usize) -> std::result::Result<(), f64> {
        const TOL: f64 = 1e-12;
        let samples = samples.max(2);
        let dt = horizon / (samples - 1) as f64;
        let mut prev = self.eval(0.0);
        for k in 0..samples {
            let t = k as f64 * dt;
            let g = self.eval(t);
            if g < self.delta - TOL || g > self.beta - self.eps + TOL {
                return Err(t);
            }
            if let (Some(bound), true) = (self.deriv_bound, k > 0) {
                if (g - prev).abs() > bound * dt + TOL {
                    return Err(t);
                }
            }
            prev = g;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_schedule() {
        let s = schedule_catalog("constant", serde_json::json!({"value": 0.5}), 1.0).unwrap();
        assert_eq!(s.eval(0.0), 0.5);
        assert_eq!(s.eval(123.4), 0.5);
        assert_eq!(s.deriv_bound(), Some(0.0));
        assert_eq!(s.delta(), 0.5);
        assert_eq!(s.eps(), 0.5);
    }

    #[test]
    fn sinusoidal_schedule() {
        let s = schedule_catalog(
            "sinusoidal",
            serde_json::json!({"lo": 0.1, "hi": 0.9, "period": 2.0 * PI}),
            1.0,
        )
        .unwrap();
        for t in [0.0, 0.3, 1.7, 5.0] {
            assert!((s.eval(t) - (0.5 + 0.4 * f64::sin(t))).abs() < 1e-14);
        }
        assert!((s.deriv_bound().unwrap() - 0.4).abs() < 1e-15);
        // central difference against the analytic derivative
        let h = 1e-6;
        let fd = (s.eval(1.0 + h) - s.eval(1.0 - h)) / (2.0 * h);
        assert!((fd - s.derivative(1.0).unwrap()).abs() < 1e-8);
        assert!(s.verify(20.0, 2001).is_ok());
    }

    #[test]
    fn ramp_schedule() {
        let s = StepSchedule::from_spec(
            ScheduleSpec::Ramp {
                start: 0.2,
                end: 0.8,
                duration: 10.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(s.eval(0.0), 0.2);
        assert!((s.eval(10.0) - 0.8).abs() < 1e-15);
        assert!((s.eval(20.0) - 0.8).abs() < 1e-15);
        assert!(s.verify(30.0, 3001).is_ok());
    }

    #[test]
    fn range_violations_rejected() {
        assert!(StepSchedule::constant(1.0, 1.0).is_err());
        assert!(StepSchedule::constant(0.0, 1.0).is_err());
        assert!(schedule_catalog(
            "sinusoidal",
            serde_json::json!({"lo": 0.1, "hi": 1.2, "period": 1.0}),
            1.0
        )
        .is_err());
        assert!(schedule_catalog("wavy", serde_json::json!({}), 1.0).is_err());
    }

    #[test]
    fn verify_catches_lying_bounds() {
        let s = StepSchedule::custom(|t| 0.5 + 0.3 * t.sin(), None, 0.4, 0.4, 1.0, Some(0.3))
            .unwrap();
        assert!(s.verify(10.0, 1001).is_err());
    }
}
