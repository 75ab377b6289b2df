//! The forward-backward-forward vector field and its time integration.
//!
//! For a step size `γ ∈ (0, β)` the field is
//!
//! ```text
//! z  = J_{γA}(x − γBx)
//! dx = z − x + γ(Bx − Bz)
//! ```
//!
//! and trajectories solve `ẋ(t) = dx(γ(t), x(t))`.

mod integrator;
mod schedule;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, State};
use crate::operators::{LipschitzOperator, MaximalOperator};

pub use integrator::{
    ergodic_point, integrate, IntegratorOptions, Method, Sample, TrajectoryRecord, DIVERGENCE_NORM,
};
pub use schedule::{schedule_catalog, ScheduleSpec, StepSchedule};

/// Extended-real objective `f + h`; returns `+∞` outside `dom f`.
#[derive(Clone)]
pub struct Objective(Arc<dyn Fn(&State) -> f64 + Send + Sync>);

impl Objective {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&State) -> f64 + Send + Sync + 'static,
    {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &State) -> f64 {
        (self.0)(x)
    }

    pub fn in_domain(&self, x: &State) -> bool {
        self.eval(x).is_finite()
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Objective(..)")
    }
}

/// Slack for the equilibrium check on a declared solution.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

/// `0 ∈ Ax + Bx` together with whatever is known about it.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    name: String,
    dim: usize,
    a: MaximalOperator,
    b: LipschitzOperator,
    rho: Option<f64>,
    known_solution: Option<State>,
    objective: Option<Objective>,
}

impl ProblemInstance {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        a: MaximalOperator,
        b: LipschitzOperator,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Construction("dimension must be at least 1".into()));
        }
        for (what, d) in [("A", a.dim()), ("B", b.dim())] {
            if let Some(d) = d {
                if d != dim {
                    return Err(Error::Construction(format!(
                        "{what} acts on R^{d} but the problem lives in R^{dim}"
                    )));
                }
            }
        }
        if !b.is_monotone() {
            return Err(Error::Construction(format!(
                "B (`{}`) is not monotone",
                b.name()
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            a,
            b,
            rho: None,
            known_solution: None,
            objective: None,
        })
    }

    /// Declares `A + B` to be `ρ`-strongly monotone; `ρ` may not exceed `ρ_A + ρ_B`.
    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        let cap = self.a.strong_modulus() + self.b.strong_modulus();
        if !(rho > 0.0) || rho > cap * (1.0 + 1e-12) {
            return Err(Error::Construction(format!(
                "declared rho {rho} must be positive and at most rho_A + rho_B = {cap}"
            )));
        }
        self.rho = Some(rho);
        Ok(self)
    }

    /// Declares a zero of `A + B`; it must be an equilibrium of the field.
    pub fn with_solution(mut self, xbar: State) -> Result<Self> {
        linalg::check_finite(&xbar)?;
        linalg::check_dim(&xbar, self.dim)?;
        for frac in [0.1, 0.5, 0.9] {
            let (dx, _) = self.field(frac * self.beta(), &xbar);
            let scale = 1.0 + xbar.amax();
            if dx.norm() > EQUILIBRIUM_TOL * scale {
                return Err(Error::Construction(format!(
                    "declared solution is not an equilibrium (‖dx‖ = {:e} at gamma = {})",
                    dx.norm(),
                    frac * self.beta()
                )));
            }
        }
        self.known_solution = Some(xbar);
        Ok(self)
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = Some(objective);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &MaximalOperator {
        &self.a
    }

    pub fn b(&self) -> &LipschitzOperator {
        &self.b
    }

    pub fn beta(&self) -> f64 {
        self.b.beta()
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn known_solution(&self) -> Option<&State> {
        self.known_solution.as_ref()
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    /// Unchecked field evaluation: `(dx, z)`.
    #[inline]
    pub(crate) fn field(&self, gamma: f64, x: &State) -> (State, State) {
        let bx = self.b.apply(x);
        let z = self.a.resolve(gamma, &(x - &bx * gamma));
        let bz = self.b.apply(&z);
        let dx = &z - x + (bx - bz) * gamma;
        (dx, z)
    }

    pub(crate) fn check_gamma(&self, gamma: f64) -> Result<()> {
        if gamma > 0.0 && gamma < self.beta() {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "gamma = {gamma} must lie in (0, beta = {})",
                self.beta()
            )))
        }
    }

    pub(crate) fn check_state(&self, x: &State) -> Result<()> {
        linalg::check_finite(x)?;
        linalg::check_dim(x, self.dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldEval {
    pub dx: State,
    pub z: State,
}

impl FieldEval {
    /// `‖x − z‖ / γ`.
    pub fn residual(&self, x: &State, gamma: f64) -> f64 {
        (x - &self.z).norm() / gamma
    }
}

/// Evaluates the field at `x` for a fixed step size `γ ∈ (0, β)`.
pub fn fbf_vector_field(problem: &ProblemInstance, gamma: f64, x: &State) -> Result<FieldEval> {
    problem.check_gamma(gamma)?;
    problem.check_state(x)?;
    let (dx, z) = problem.field(gamma, x);
    Ok(FieldEval { dx, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use crate::operators::ProxSpec;
    use nalgebra::DMatrix;

    fn abs_plus_identity() -> ProblemInstance {
        let a = ProxSpec::L1Norm { weight: 1.0 }.build().unwrap();
        let b = LipschitzOperator::affine("identity", DMatrix::identity(1, 1), None, None).unwrap();
        ProblemInstance::new("abs+id", 1, a, b).unwrap()
    }

    #[test]
    fn field_example_abs_plus_identity() {
        let p = abs_plus_identity();
        let f = fbf_vector_field(&p, 0.5, &state(&[2.0])).unwrap();
        // z = soft(2 − 1, 0.5) = 0.5, dx = 0.5 − 2 + 0.5·(2 − 0.5)
        assert!((f.z[0] - 0.5).abs() < 1e-15);
        assert!((f.dx[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_operators_give_zero_field() {
        let b = LipschitzOperator::zero(1.0).unwrap();
        let p = ProblemInstance::new("zero", 2, MaximalOperator::zero(), b).unwrap();
        let x = state(&[1.0, 2.0]);
        let f = fbf_vector_field(&p, 0.3, &x).unwrap();
        assert_eq!(f.dx, state(&[0.0, 0.0]));
        assert_eq!(f.z, x);
    }

    #[test]
    fn equilibrium_at_solution() {
        let p = abs_plus_identity().with_solution(state(&[0.0])).unwrap();
        let f = fbf_vector_field(&p, 0.7, &state(&[0.0])).unwrap();
        assert_eq!(f.dx[0], 0.0);
        assert_eq!(f.z[0], 0.0);
        assert!(abs_plus_identity().with_solution(state(&[1.0])).is_err());
    }

    #[test]
    fn gamma_outside_open_interval_rejected() {
        let p = abs_plus_identity();
        for g in [0.0, 1.0, 1.5, -0.1] {
            assert!(matches!(
                fbf_vector_field(&p, g, &state(&[1.0])),
                Err(Error::Parameter(_))
            ));
        }
    }

    #[test]
    fn rho_capped_by_operator_moduli() {
        assert!(abs_plus_identity().with_rho(1.0).is_ok());
        assert!(abs_plus_identity().with_rho(1.5).is_err());
    }

    #[test]
    fn non_monotone_b_rejected() {
        let b = LipschitzOperator::affine("neg", -DMatrix::identity(1, 1), None, None).unwrap();
        assert!(ProblemInstance::new("bad", 1, MaximalOperator::zero(), b).is_err());
    }
}
