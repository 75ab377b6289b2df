//! Randomised probes of the vector field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::ProblemInstance;
use crate::error::{Error, Result};
use crate::linalg::State;

/// Global Lipschitz constant of the field for every `γ ∈ (0, β)`.
pub const SQRT_6: f64 = 2.449_489_742_783_178;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub max_ratio: f64,
    pub gamma_at_max: f64,
    pub pairs: usize,
}

fn uniform_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> State {
    State::from_fn(n, |_, _| rng.random_range(-radius..=radius))
}

/// Largest `‖f(γ,x) − f(γ,y)‖ / ‖x − y‖` over `n_pairs` random pairs per `γ`.
///
/// Half the pairs are independent points of `[−radius, radius]^n`; the other half
/// are close pairs (separation about `10⁻³·radius`), which catch local slopes.
pub fn lipschitz_probe(
    problem: &ProblemInstance,
    gammas: &[f64],
    n_pairs: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<LipschitzReport> {
    if n_pairs == 0 {
        return Err(Error::Parameter("n_pairs must be at least 1".into()));
    }
    for &g in gammas {
        problem.check_gamma(g)?;
    }
    let n = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut report = LipschitzReport {
        max_ratio: 0.0,
        gamma_at_max: gammas.first().copied().unwrap_or(0.0),
        pairs: 0,
    };
    for &gamma in gammas {
        for k in 0..n_pairs {
            let x = uniform_point(&mut rng, n, radius);
            let y = if k % 2 == 0 {
                uniform_point(&mut rng, n, radius)
            } else {
                &x + uniform_point(&mut rng, n, 1e-3 * radius)
            };
            let d = (&x - &y).norm();
            if d == 0.0 {
                continue;
            }
            let (fx, _) = problem.field(gamma, &x);
            let (fy, _) = problem.field(gamma, &y);
            let ratio = (fx - fy).norm() / d;
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.gamma_at_max = gamma;
            }
            report.pairs += 1;
        }
    }
    Ok(report)
}

/// `sup ‖f(γ,x)‖ / (1 + ‖x‖)` over random points with `‖x‖∞ ≤ radius`.
pub fn growth_probe(
    problem: &ProblemInstance,
    gamma: f64,
    samples: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<f64> {
    problem.check_gamma(gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sup: f64 = 0.0;
    for _ in 0..samples {
        // log-uniform radii so that small and large points both appear
        let r = radius.powf(rng.random_range(0.0..=1.0));
        let x = uniform_point(&mut rng, problem.dim(), r);
        let (dx, _) = problem.field(gamma, &x);
        sup = sup.max(dx.norm() / (1.0 + x.norm()));
    }
    Ok(sup)
}

/// `‖f(2^{−k}, x)‖` for `k = 1..=k_max` (only values with `2^{−k} < β`).
pub fn vanishing_probe(problem: &ProblemInstance, x: &State, k_max: u32) -> Result<Vec<f64>> {
    problem.check_state(x)?;
    Ok((1..=k_max)
        .map(|k| 0.5f64.powi(k as i32))
        .filter(|g| *g < problem.beta())
        .map(|g| problem.field(g, x).0.norm())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use crate::operators::{LipschitzOperator, MaximalOperator};
    use nalgebra::DMatrix;

    fn rotation() -> ProblemInstance {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = LipschitzOperator::affine("rotation", m, None, None).unwrap();
        ProblemInstance::new("rotation", 2, MaximalOperator::zero(), b).unwrap()
    }

    #[test]
    fn zero_problem_has_zero_ratio() {
        let b = LipschitzOperator::zero(1.0).unwrap();
        let p = ProblemInstance::new("zero", 3, MaximalOperator::zero(), b).unwrap();
        let r = lipschitz_probe(&p, &[0.5], 100, 1.0, 7).unwrap();
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn rotation_ratio_is_operator_norm() {
        // f(γ,·) = −γB − γ²I, a normal map with norm √(γ² + γ⁴)
        let r = lipschitz_probe(&rotation(), &[0.5], 1000, 5.0, 3).unwrap();
        let expected = (0.25f64 + 0.0625).sqrt();
        assert!((r.max_ratio - expected).abs() < 1e-12, "{}", r.max_ratio);
        assert!(r.max_ratio <= SQRT_6);
    }

    #[test]
    fn probe_is_deterministic() {
        let a = lipschitz_probe(&rotation(), &[0.1, 0.9], 200, 3.0, 11).unwrap();
        let b = lipschitz_probe(&rotation(), &[0.1, 0.9], 200, 3.0, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_on_rotation() {
        let norms = vanishing_probe(&rotation(), &state(&[1.0, -2.0]), 30).unwrap();
        assert!(*norms.last().unwrap() < 1e-6);
    }

    #[test]
    fn growth_stable_under_radius_doubling() {
        let a = growth_probe(&rotation(), 0.5, 2000, 1e6, 1).unwrap();
        let b = growth_probe(&rotation(), 0.5, 2000, 2e6, 1).unwrap();
        assert!(a.is_finite() && b.is_finite());
        assert!(b <= 2.0 * a + 1e-12);
    }
}
