use serde::{Deserialize, Serialize};

use super::{ProblemInstance, StepSchedule};
use crate::error::{Error, Result};
use crate::linalg::State;

/// Trajectories leaving this ball are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOptions {
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_h")]
    pub h: f64,
    pub horizon: f64,
    #[serde(default = "default_h")]
    pub sample_every: f64,
}

fn default_method() -> Method {
    Method::Rk4
}

fn default_h() -> f64 {
    0.01
}

impl IntegratorOptions {
    pub fn rk4(h: f64, horizon: f64, sample_every: f64) -> Self {
        Self {
            method: Method::Rk4,
            h,
            horizon,
            sample_every,
        }
    }

    pub fn euler(h: f64, horizon: f64, sample_every: f64) -> Self {
        Self {
            method: Method::Euler,
            h,
            horizon,
            sample_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Parameter(format!("h must be positive, got {}", self.h)));
        }
        if !(self.horizon >= self.h) || !self.horizon.is_finite() {
            return Err(Error::Parameter(format!(
                "horizon {} must be at least h = {}",
                self.horizon, self.h
            )));
        }
        if !(self.sample_every > 0.0) || !self.sample_every.is_finite() {
            return Err(Error::Parameter(format!(
                "sample_every must be positive, got {}",
                self.sample_every
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.h).round().max(1.0) as usize
    }

    pub fn stride(&self) -> usize {
        (self.sample_every / self.h).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: State,
    pub z: State,
    pub gamma: f64,
    pub residual: f64,
    pub dist_to_solution: Option<f64>,
    pub objective_at_z: Option<f64>,
    /// `Γ(t) = ∫₀ᵗ γ`.
    pub gamma_integral: f64,
    /// `ζ(t)`; absent at `t = 0`.
    pub ergodic: Option<State>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    /// `∫₀ᵗ γ(s) z(s) ds` at the final time.
    pub ergodic_num: State,
    /// `Γ(t)` at the final time.
    pub ergodic_den: f64,
    /// Internal integrator step.
    pub step: f64,
    pub method: Method,
    pub beta: f64,
    /// Largest `‖ẋ‖ − √(1 + γ²/β²)‖x − z‖` seen at any step.
    pub velocity_excess: f64,
}

impl TrajectoryRecord {
    pub fn x0(&self) -> &State {
        &self.samples[0].x
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("record has at least one sample")
    }

    /// Builds a record from externally produced `(t, x, z, γ)` samples, with the ergodic
    /// accumulators taken by the trapezoid rule over the given sample times.
    pub fn synthetic(
        samples: Vec<(f64, State, State, f64)>,
        beta: f64,
        step: f64,
        xbar: Option<&State>,
    ) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::EmptyRecord("synthetic trajectory has no samples"));
        };
        let n = first.1.len();
        let mut acc = Accumulator::new(n);
        let mut out = Vec::with_capacity(samples.len());
        // forward differences stand in for the velocity between samples
        let mut velocity_excess = f64::NEG_INFINITY;
        for (i, (t, x, z, gamma)) in samples.into_iter().enumerate() {
            if i > 0 {
                let dt = t - out.last().map(|s: &Sample| s.t).unwrap_or(0.0);
                if !(dt > 0.0) {
                    return Err(Error::Parameter("sample times must increase".into()));
                }
                acc.advance(dt, gamma, &z);
                let prev = out.last().expect("i > 0");
                let speed = (&x - &prev.x).norm() / dt;
                let bound = (1.0 + (prev.gamma / beta).powi(2)).sqrt() * (&prev.x - &prev.z).norm();
                velocity_excess = f64::max(velocity_excess, speed - bound);
            } else {
                acc.prime(gamma, &z);
            }
            out.push(Sample {
                t,
                residual: (&x - &z).norm() / gamma,
                dist_to_solution: xbar.map(|xb| (&x - xb).norm()),
                objective_at_z: None,
                gamma_integral: acc.den,
                ergodic: acc.point(),
                x,
                z,
                gamma,
            });
        }
        Ok(Self {
            samples: out,
            ergodic_num: acc.num,
            ergodic_den: acc.den,
            step,
            method: Method::Rk4,
            beta,
            velocity_excess,
        })
    }
}

/// Trapezoid accumulation of `∫γ z` and `∫γ`.
struct Accumulator {
    num: State,
    den: f64,
    prev_gamma: f64,
    prev_weighted: State,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            num: State::zeros(n),
            den: 0.0,
            prev_gamma: 0.0,
            prev_weighted: State::zeros(n),
        }
    }

    fn prime(&mut self, gamma: f64, z: &State) {
        self.prev_gamma = gamma;
        self.prev_weighted = z * gamma;
    }

    fn advance(&mut self, dt: f64, gamma: f64, z: &State) {
        let weighted = z * gamma;
        self.den += 0.5 * dt * (self.prev_gamma + gamma);
        self.num += (&self.prev_weighted + &weighted) * (0.5 * dt);
        self.prev_gamma = gamma;
        self.prev_weighted = weighted;
    }

    fn point(&self) -> Option<State> {
        (self.den > 0.0).then(|| &self.num / self.den)
    }
}

fn diverged(x: &State) -> bool {
    x.iter().any(|v| !v.is_finite()) || x.norm() > DIVERGENCE_NORM
}

/// Integrates `ẋ = dx(γ(t), x)` from `x0` over `[0, horizon]` with a fixed step.
///
/// Samples are taken every `round(sample_every / h)` steps and always at the final
/// step. The ergodic accumulators use the trapezoid rule at every internal step.
pub fn integrate(
    problem: &ProblemInstance,
    schedule: &StepSchedule,
    x0: &State,
    opts: &IntegratorOptions,
) -> Result<TrajectoryRecord> {
    opts.validate()?;
    problem.check_state(x0)?;
    let beta = problem.beta();
    if (schedule.beta() - beta).abs() > 1e-12 * beta {
        return Err(Error::Parameter(format!(
            "schedule beta {} does not match problem beta {beta}",
            schedule.beta()
        )));
    }

    let h = opts.h;
    let steps = opts.steps();
    let stride = opts.stride();
    let xbar = problem.known_solution();
    let objective = problem.objective();

    let mut acc = Accumulator::new(problem.dim());
    let mut samples = Vec::with_capacity(steps / stride + 2);
    let mut velocity_excess = f64::NEG_INFINITY;
    let mut x = x0.clone();

    let field_at = |t: f64, x: &State| -> Result<(State, State, f64)> {
        let gamma = schedule.eval(t);
        problem.check_gamma(gamma)?;
        let (dx, z) = problem.field(gamma, x);
        Ok((dx, z, gamma))
    };

    for n in 0..=steps {
        let t = n as f64 * h;
        let (dx, z, gamma) = field_at(t, &x)?;
        let gap = (&x - &z).norm();
        velocity_excess =
            velocity_excess.max(dx.norm() - (1.0 + (gamma / beta).powi(2)).sqrt() * gap);

        if n == 0 {
            acc.prime(gamma, &z);
        } else {
            acc.advance(h, gamma, &z);
        }

        if n % stride == 0 || n == steps {
            samples.push(Sample {
                t,
                residual: gap / gamma,
                dist_to_solution: xbar.map(|xb| (&x - xb).norm()),
                objective_at_z: objective.map(|f| f.eval(&z)),
                gamma_integral: acc.den,
                ergodic: acc.point(),
                x: x.clone(),
                z: z.clone(),
                gamma,
            });
        }
        if n == steps {
            break;
        }

        let next = match opts.method {
            Method::Euler => &x + &dx * h,
            Method::Rk4 => {
                let k1 = dx;
                let (k2, _, _) = field_at(t + 0.5 * h, &(&x + &k1 * (0.5 * h)))?;
                let (k3, _, _) = field_at(t + 0.5 * h, &(&x + &k2 * (0.5 * h)))?;
                let (k4, _, _) = field_at(t + h, &(&x + &k3 * h))?;
                &x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
            }
        };
        if diverged(&next) {
            return Err(Error::Divergence { last_good: t });
        }
        x = next;
    }

    Ok(TrajectoryRecord {
        samples,
        ergodic_num: acc.num,
        ergodic_den: acc.den,
        step: h,
        method: opts.method,
        beta,
        velocity_excess,
    })
}

/// `ζ(t) = (1/Γ(t)) ∫₀ᵗ γ(s) z(s) ds` at the final time of the record.
pub fn ergodic_point(record: &TrajectoryRecord) -> Result<State> {
    if record.samples.len() < 2 || !(record.ergodic_den > 0.0) {
        return Err(Error::EmptyRecord("ergodic point needs a record with t > 0"));
    }
    Ok(&record.ergodic_num / record.ergodic_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use crate::operators::{LipschitzOperator, MaximalOperator, ProxSpec};
    use nalgebra::DMatrix;

    fn rotation() -> ProblemInstance {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = LipschitzOperator::affine("rotation", m, None, None).unwrap();
        ProblemInstance::new("rotation", 2, MaximalOperator::zero(), b)
            .unwrap()
            .with_solution(state(&[0.0, 0.0]))
            .unwrap()
    }

    #[test]
    fn rotation_norm_decays_like_closed_form() {
        let p = rotation();
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let rec = integrate(&p, &s, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 10.0, 0.1))
            .unwrap();
        let last = rec.last();
        assert!((last.t - 10.0).abs() < 1e-12);
        let exact = (-0.25f64 * 10.0).exp();
        assert!((last.x.norm() - exact).abs() / exact < 1e-3);
        assert_eq!(rec.samples.len(), 101);
    }

    #[test]
    fn start_at_solution_stays_put() {
        let p = rotation();
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let rec = integrate(&p, &s, &state(&[0.0, 0.0]), &IntegratorOptions::rk4(0.01, 2.0, 0.5))
            .unwrap();
        for smp in &rec.samples {
            assert!(smp.x.norm() < 1e-10);
            assert!(smp.residual < 1e-10);
        }
    }

    #[test]
    fn abs_plus_identity_converges_to_zero() {
        let a = ProxSpec::L1Norm { weight: 1.0 }.build().unwrap();
        let b = LipschitzOperator::affine("id", DMatrix::identity(1, 1), None, None).unwrap();
        let p = ProblemInstance::new("abs+id", 1, a, b).unwrap();
        let s = StepSchedule::constant(0.5, 1.0).unwrap();
        let rec = integrate(&p, &s, &state(&[2.0]), &IntegratorOptions::rk4(0.01, 40.0, 1.0))
            .unwrap();
        assert!(rec.last().x[0].abs() < 1e-8);
    }

    #[test]
    fn schedule_beta_mismatch_rejected() {
        let p = rotation();
        let s = StepSchedule::constant(0.5, 2.0).unwrap();
        assert!(matches!(
            integrate(&p, &s, &state(&[1.0, 0.0]), &IntegratorOptions::rk4(0.01, 1.0, 0.1)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ergodic_point_of_linear_z() {
        // γ ≡ 0.5 and z(s) = s on [0, 2]: ζ(2) = 1
        let samples = (0..=20)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, state(&[t]), state(&[t]), 0.5)
            })
            .collect();
        let rec = TrajectoryRecord::synthetic(samples, 1.0, 0.1, None).unwrap();
        assert!((ergodic_point(&rec).unwrap()[0] - 1.0).abs() < 1e-14);
        assert!((rec.ergodic_den - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ergodic_point_of_constant_z() {
        let c = state(&[1.5, -2.0]);
        let samples = (0..=10)
            .map(|k| (k as f64 * 0.3, c.clone(), c.clone(), 0.2 + 0.05 * k as f64))
            .collect();
        let rec = TrajectoryRecord::synthetic(samples, 1.0, 0.3, None).unwrap();
        assert!((ergodic_point(&rec).unwrap() - &c).norm() < 1e-14);
    }

    #[test]
    fn ergodic_point_needs_positive_time() {
        let rec =
            TrajectoryRecord::synthetic(vec![(0.0, state(&[1.0]), state(&[1.0]), 0.5)], 1.0, 0.1, None)
                .unwrap();
        assert!(matches!(ergodic_point(&rec), Err(Error::EmptyRecord(_))));
    }

    #[test]
    fn divergence_reports_last_good_time() {
        // explicit Euler far outside its stability region
        let m = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = LipschitzOperator::affine("id", m, None, None).unwrap();
        let p = ProblemInstance::new("id", 1, MaximalOperator::zero(), b).unwrap();
        let s = StepSchedule::constant(0.9, 1.0).unwrap();
        let err = integrate(&p, &s, &state(&[1.0]), &IntegratorOptions::euler(2000.0, 1e6, 2000.0))
            .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }
}
