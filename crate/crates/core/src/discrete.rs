//! The discrete forward-backward-forward (Tseng) iteration
//!
//! ```text
//! z_n     = J_{γ_n A}(x_n − γ_n B x_n)
//! x_{n+1} = z_n + γ_n (B x_n − B z_n)
//! ```
//!
//! with the ergodic average `ζ_n = Σ γ_k z_k / Σ γ_k`.

use serde::Serialize;

use crate::dynamics::{ProblemInstance, StepSchedule};
use crate::error::{Error, Result};
use crate::linalg::State;

/// Step sizes `γ_n`, either explicit or sampled from a schedule at `t = n`.
#[derive(Debug, Clone)]
pub enum GammaSequence {
    /// The last entry repeats once the list is exhausted.
    List(Vec<f64>),
    Schedule(StepSchedule),
}

impl GammaSequence {
    pub fn gamma(&self, n: usize) -> f64 {
        match self {
            GammaSequence::List(v) => v[n.min(v.len() - 1)],
            GammaSequence::Schedule(s) => s.eval(n as f64),
        }
    }

    fn validate(&self, beta: f64) -> Result<()> {
        match self {
            GammaSequence::List(v) if v.is_empty() => {
                Err(Error::Parameter("empty gamma list".into()))
            }
            GammaSequence::List(v) => match v.iter().find(|g| !(**g > 0.0 && **g < beta)) {
                Some(g) => Err(Error::Parameter(format!(
                    "gamma_n = {g} must lie in (0, beta = {beta})"
                ))),
                None => Ok(()),
            },
            GammaSequence::Schedule(s) if (s.beta() - beta).abs() > 1e-12 * beta => {
                Err(Error::Parameter(format!(
                    "schedule beta {} does not match problem beta {beta}",
                    s.beta()
                )))
            }
            GammaSequence::Schedule(_) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsengStep {
    pub x_next: State,
    pub z: State,
}

/// One forward-backward-forward step.
pub fn tseng_step(problem: &ProblemInstance, gamma: f64, x: &State) -> Result<TsengStep> {
    problem.check_gamma(gamma)?;
    problem.check_state(x)?;
    Ok(step(problem, gamma, x))
}

fn step(problem: &ProblemInstance, gamma: f64, x: &State) -> TsengStep {
    let b = problem.b();
    let bx = b.apply(x);
    let z = problem.a().resolve(gamma, &(x - &bx * gamma));
    let bz = b.apply(&z);
    let x_next = &z + (bx - bz) * gamma;
    TsengStep { x_next, z }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iterate {
    pub n: usize,
    pub x: State,
    pub z: State,
    pub gamma: f64,
    pub residual: f64,
    pub dist_to_solution: Option<f64>,
    pub objective_at_z: Option<f64>,
    /// `Γ_n = Σ_{k ≤ n} γ_k`.
    pub gamma_sum: f64,
    /// `ζ_n`.
    pub ergodic: State,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterateRecord {
    pub iterates: Vec<Iterate>,
    /// `x_{N+1}` after the last recorded step, or `x_N` when the run stopped on tolerance.
    pub final_x: State,
    pub ergodic_num: State,
    pub ergodic_den: f64,
    pub converged: bool,
}

impl IterateRecord {
    pub fn x0(&self) -> &State {
        &self.iterates[0].x
    }

    pub fn gamma_seq(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.gamma).collect()
    }

    /// Record built from externally produced `(x_k, z_k, γ_k)` triples.
    pub fn synthetic(entries: Vec<(State, State, f64)>, xbar: Option<&State>) -> Result<Self> {
        let Some((_, z0, _)) = entries.first() else {
            return Err(Error::EmptyRecord("synthetic iterate record has no entries"));
        };
        let mut num = State::zeros(z0.len());
        let mut den = 0.0;
        let mut iterates = Vec::with_capacity(entries.len());
        for (n, (x, z, gamma)) in entries.into_iter().enumerate() {
            num += &z * gamma;
            den += gamma;
            iterates.push(Iterate {
                n,
                residual: (&x - &z).norm() / gamma,
                dist_to_solution: xbar.map(|xb| (&x - xb).norm()),
                objective_at_z: None,
                gamma_sum: den,
                ergodic: &num / den,
                x,
                z,
                gamma,
            });
        }
        let final_x = iterates.last().map(|it| it.x.clone()).unwrap_or_default();
        Ok(Self {
            iterates,
            final_x,
            ergodic_num: num,
            ergodic_den: den,
            converged: false,
        })
    }
}

/// Runs the iteration until `‖x_n − z_n‖/γ_n ≤ tol` or `max_iter` steps.
pub fn run_tseng(
    problem: &ProblemInstance,
    gammas: &GammaSequence,
    x0: &State,
    max_iter: usize,
    tol: f64,
) -> Result<IterateRecord> {
    if max_iter == 0 {
        return Err(Error::Parameter("max_iter must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter(format!("tol must be nonnegative, got {tol}")));
    }
    problem.check_state(x0)?;
    gammas.validate(problem.beta())?;

    let xbar = problem.known_solution();
    let objective = problem.objective();
    let mut num = State::zeros(problem.dim());
    let mut den = 0.0;
    let mut iterates = Vec::with_capacity(max_iter.min(1 << 16));
    let mut x = x0.clone();
    let mut converged = false;

    for n in 0..max_iter {
        let gamma = gammas.gamma(n);
        problem.check_gamma(gamma)?;
        let TsengStep { x_next, z } = step(problem, gamma, &x);
        let residual = (&x - &z).norm() / gamma;
        num += &z * gamma;
        den += gamma;
        iterates.push(Iterate {
            n,
            x: x.clone(),
            gamma,
            residual,
            dist_to_solution: xbar.map(|xb| (&x - xb).norm()),
            objective_at_z: objective.map(|f| f.eval(&z)),
            gamma_sum: den,
            ergodic: &num / den,
            z,
        });
        if residual <= tol {
            converged = true;
            break;
        }
        if x_next.iter().any(|v| !v.is_finite())
            || x_next.norm() > crate::dynamics::DIVERGENCE_NORM
        {
            return Err(Error::Divergence {
                last_good: n as f64,
            });
        }
        x = x_next;
    }

    Ok(IterateRecord {
        iterates,
        final_x: x,
        ergodic_num: num,
        ergodic_den: den,
        converged,
    })
}

/// `ζ_n = Σ γ_k z_k / Σ γ_k` over the whole record.
pub fn discrete_ergodic_point(record: &IterateRecord) -> Result<State> {
    if record.iterates.is_empty() || !(record.ergodic_den > 0.0) {
        return Err(Error::EmptyRecord("ergodic point needs at least one iterate"));
    }
    Ok(&record.ergodic_num / record.ergodic_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use crate::operators::{LipschitzOperator, MaximalOperator, ProxSpec};
    use nalgebra::DMatrix;

    fn abs_plus_identity() -> ProblemInstance {
        let a = ProxSpec::L1Norm { weight: 1.0 }.build().unwrap();
        let b = LipschitzOperator::affine("id", DMatrix::identity(1, 1), None, None).unwrap();
        ProblemInstance::new("abs+id", 1, a, b)
            .unwrap()
            .with_solution(state(&[0.0]))
            .unwrap()
    }

    #[test]
    fn step_example() {
        let s = tseng_step(&abs_plus_identity(), 0.5, &state(&[2.0])).unwrap();
        assert!((s.z[0] - 0.5).abs() < 1e-15);
        assert!((s.x_next[0] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_and_trivial_problem() {
        let s = tseng_step(&abs_plus_identity(), 0.5, &state(&[0.0])).unwrap();
        assert_eq!((s.x_next[0], s.z[0]), (0.0, 0.0));

        let b = LipschitzOperator::zero(1.0).unwrap();
        let p = ProblemInstance::new("zero", 2, MaximalOperator::zero(), b).unwrap();
        let x = state(&[0.3, -4.0]);
        assert_eq!(tseng_step(&p, 0.9, &x).unwrap().x_next, x);
        assert!(tseng_step(&p, 1.0, &x).is_err());
    }

    #[test]
    fn start_at_solution_stops_immediately() {
        let rec = run_tseng(
            &abs_plus_identity(),
            &GammaSequence::List(vec![0.5]),
            &state(&[0.0]),
            100,
            1e-12,
        )
        .unwrap();
        assert!(rec.converged);
        assert_eq!(rec.iterates.len(), 1);
        assert_eq!(rec.iterates[0].n, 0);
    }

    #[test]
    fn ergodic_point_examples() {
        let c = state(&[2.0]);
        let rec = IterateRecord::synthetic(
            vec![(c.clone(), c.clone(), 0.3), (c.clone(), c.clone(), 0.7)],
            None,
        )
        .unwrap();
        assert_eq!(discrete_ergodic_point(&rec).unwrap(), c);

        let mk = |g1: f64| {
            IterateRecord::synthetic(
                vec![(state(&[0.0]), state(&[0.0]), 1.0), (state(&[1.0]), state(&[1.0]), g1)],
                None,
            )
            .unwrap()
        };
        assert_eq!(discrete_ergodic_point(&mk(1.0)).unwrap()[0], 0.5);
        assert_eq!(discrete_ergodic_point(&mk(3.0)).unwrap()[0], 0.75);
        assert!(IterateRecord::synthetic(vec![], None).is_err());
    }

    #[test]
    fn gamma_sum_strictly_increases() {
        let rec = run_tseng(
            &abs_plus_identity(),
            &GammaSequence::List(vec![0.2, 0.4, 0.9]),
            &state(&[5.0]),
            20,
            0.0,
        )
        .unwrap();
        for w in rec.iterates.windows(2) {
            assert!(w[1].gamma_sum > w[0].gamma_sum);
        }
        assert_eq!(rec.iterates[10].gamma, 0.9);
    }

    #[test]
    fn bad_arguments() {
        let p = abs_plus_identity();
        let x0 = state(&[1.0]);
        assert!(run_tseng(&p, &GammaSequence::List(vec![0.5]), &x0, 0, 0.0).is_err());
        assert!(run_tseng(&p, &GammaSequence::List(vec![]), &x0, 5, 0.0).is_err());
        assert!(run_tseng(&p, &GammaSequence::List(vec![1.5]), &x0, 5, 0.0).is_err());
    }
}
