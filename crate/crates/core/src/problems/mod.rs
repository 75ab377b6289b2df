//! Built-in problem instances with certified metadata.
//!
//! Every catalog problem has an affine `B` and a separable `A`
//! (free, box-constrained, or weighted `|·|` per coordinate). That shared
//! structure is what the algebraic oracle in [`oracle`] exploits.

mod oracle;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Objective, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::{self, State};
use crate::operators::{soft_threshold, Bound, LipschitzOperator, ProxSpec};

pub use oracle::{
    algebraic_oracle, grid_oracle, oracle_solve, zoom_minimize, OracleMethod, ENUMERATION_MAX_DIM,
    GRID_MAX_DIM,
};

/// Moduli below this are treated as zero.
const RHO_FLOOR: f64 = 1e-10;

fn one() -> f64 {
    1.0
}

fn minus_one_bound() -> Bound {
    Bound::Scalar(-1.0)
}

fn one_bound() -> Bound {
    Bound::Scalar(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `min w‖x‖₁ + ½‖Mx − b‖²`: `A = ∂(w‖·‖₁)`, `B = Mᵀ(Mx − b)`.
    Lasso {
        matrix: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    /// `A = 0`, `B` a block-diagonal quarter rotation on R^n (n even).
    SkewRotation { n: usize },
    /// `min ½xᵀQx − bᵀx` over a box: `A = N_box`, `B = Qx − b`, `Q` positive definite.
    StronglyMonotoneQuadratic {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default = "minus_one_bound")]
        lo: Bound,
        #[serde(default = "one_bound")]
        hi: Bound,
    },
    /// `A = ∂‖·‖₁`, `B = x − b`.
    L1PlusIdentity { b: Bound },
    /// Saddle point of `uᵀPv + cᵀu − dᵀv` over a box in `(u, v)`:
    /// `A = N_box`, `B(u, v) = (Pv + c, −Pᵀu + d)`.
    ConstrainedSaddle {
        payoff: Vec<Vec<f64>>,
        #[serde(default)]
        c: Option<Vec<f64>>,
        #[serde(default)]
        d: Option<Vec<f64>>,
        #[serde(default = "minus_one_bound")]
        lo: Bound,
        #[serde(default = "one_bound")]
        hi: Bound,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Oracle,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    pub beta_source: Source,
    pub rho_source: Source,
    pub solution_source: Source,
}

/// Per-coordinate piece of a separable `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CoordKind {
    Free,
    Interval(f64, f64),
    Abs(f64),
}

/// `0 ∈ A x + M x + q` with `A` separable.
#[derive(Debug, Clone)]
pub(crate) struct AffineForm {
    pub m: DMatrix<f64>,
    pub q: DVector<f64>,
    pub kinds: Vec<CoordKind>,
}

fn bound_vec(b: &Bound, n: usize, what: &str) -> Result<Vec<f64>> {
    match b {
        Bound::Scalar(v) => Ok(vec![*v; n]),
        Bound::Vector(v) if v.len() == n => Ok(v.clone()),
        Bound::Vector(v) => Err(Error::Construction(format!(
            "{what} has length {} but the problem has dimension {n}",
            v.len()
        ))),
    }
}

fn check_len(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::Construction(format!(
            "{what} has length {} but {n} is required",
            v.len()
        )));
    }
    Ok(())
}

fn rotation_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for k in (0..n).step_by(2) {
        m[(k, k + 1)] = 1.0;
        m[(k + 1, k)] = -1.0;
    }
    m
}

/// Builds a catalog problem from its name and a JSON object of parameters.
pub fn build(name: &str, params: serde_json::Value) -> Result<ProblemInstance> {
    ProblemSpec::from_name(name, params)?.build()
}

impl ProblemSpec {
    pub fn from_name(name: &str, params: serde_json::Value) -> Result<Self> {
        const NAMES: [&str; 5] = [
            "lasso",
            "skew_rotation",
            "strongly_monotone_quadratic",
            "l1_plus_identity",
            "constrained_saddle",
        ];
        if !NAMES.contains(&name) {
            return Err(Error::UnknownName {
                kind: "problem",
                name: name.to_string(),
            });
        }
        let mut obj = match params {
            serde_json::Value::Object(m) => m,
            other => {
                return Err(Error::Construction(format!(
                    "problem parameters must be an object, got {other}"
                )))
            }
        };
        obj.insert("name".into(), name.into());
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Construction(format!("{name}: {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Lasso { .. } => "lasso",
            ProblemSpec::SkewRotation { .. } => "skew_rotation",
            ProblemSpec::StronglyMonotoneQuadratic { .. } => "strongly_monotone_quadratic",
            ProblemSpec::L1PlusIdentity { .. } => "l1_plus_identity",
            ProblemSpec::ConstrainedSaddle { .. } => "constrained_saddle",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::Lasso { matrix, .. } => matrix.first().map_or(0, Vec::len),
            ProblemSpec::SkewRotation { n } => *n,
            ProblemSpec::StronglyMonotoneQuadratic { b, .. } => b.len(),
            ProblemSpec::L1PlusIdentity { b } => match b {
                Bound::Scalar(_) => 1,
                Bound::Vector(v) => v.len(),
            },
            ProblemSpec::ConstrainedSaddle { payoff, .. } => {
                payoff.len() + payoff.first().map_or(0, Vec::len)
            }
        }
    }

    pub(crate) fn affine_form(&self) -> Result<AffineForm> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Construction(format!("{}: empty problem", self.name())));
        }
        match self {
            ProblemSpec::Lasso { matrix, b, weight } => {
                let mat = linalg::matrix_from_rows(matrix)?;
                check_len(b, mat.nrows(), "b")?;
                if !(*weight >= 0.0) {
                    return Err(Error::Construction(format!(
                        "lasso weight must be nonnegative, got {weight}"
                    )));
                }
                let b = DVector::from_column_slice(b);
                Ok(AffineForm {
                    m: mat.transpose() * &mat,
                    q: -(mat.transpose() * b),
                    kinds: vec![CoordKind::Abs(*weight); n],
                })
            }
            ProblemSpec::SkewRotation { n } => {
                if n % 2 != 0 {
                    return Err(Error::Construction(format!(
                        "skew_rotation needs an even dimension, got {n}"
                    )));
                }
                Ok(AffineForm {
                    m: rotation_matrix(*n),
                    q: DVector::zeros(*n),
                    kinds: vec![CoordKind::Free; *n],
                })
            }
            ProblemSpec::StronglyMonotoneQuadratic { q, b, lo, hi } => {
                let qm = linalg::matrix_from_rows(q)?;
                linalg::require_symmetric(&qm, "Q")?;
                check_len(b, qm.nrows(), "b")?;
                let (lo, hi) = (bound_vec(lo, n, "lo")?, bound_vec(hi, n, "hi")?);
                let kinds = lo
                    .iter()
                    .zip(&hi)
                    .map(|(l, h)| {
                        if l <= h && l.is_finite() && h.is_finite() {
                            Ok(CoordKind::Interval(*l, *h))
                        } else {
                            Err(Error::Construction(format!("invalid box side [{l}, {h}]")))
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(AffineForm {
                    m: qm,
                    q: -DVector::from_column_slice(b),
                    kinds,
                })
            }
            ProblemSpec::L1PlusIdentity { b } => {
                let b = bound_vec(b, n, "b")?;
                Ok(AffineForm {
                    m: DMatrix::identity(n, n),
                    q: -DVector::from_vec(b),
                    kinds: vec![CoordKind::Abs(1.0); n],
                })
            }
            ProblemSpec::ConstrainedSaddle {
                payoff,
                c,
                d,
                lo,
                hi,
            } => {
                let p = linalg::matrix_from_rows(payoff)?;
                let (mu, kv) = (p.nrows(), p.ncols());
                let c = c.clone().unwrap_or_else(|| vec![0.0; mu]);
                let d = d.clone().unwrap_or_else(|| vec![0.0; kv]);
                check_len(&c, mu, "c")?;
                check_len(&d, kv, "d")?;
                let mut m = DMatrix::zeros(n, n);
                m.view_mut((0, mu), (mu, kv)).copy_from(&p);
                m.view_mut((mu, 0), (kv, mu)).copy_from(&(-p.transpose()));
                let q = DVector::from_iterator(n, c.into_iter().chain(d));
                let (lo, hi) = (bound_vec(lo, n, "lo")?, bound_vec(hi, n, "hi")?);
                let kinds = lo
                    .iter()
                    .zip(&hi)
                    .map(|(l, h)| {
                        if l <= h && l.is_finite() && h.is_finite() {
                            Ok(CoordKind::Interval(*l, *h))
                        } else {
                            Err(Error::Construction(format!("invalid box side [{l}, {h}]")))
                        }
                    })
                    .collect::<Result<_>>()?;
                Ok(AffineForm { m, q, kinds })
            }
        }
    }

    /// Solution in closed form, where one exists.
    pub fn closed_form_solution(&self) -> Option<State> {
        let n = self.dim();
        match self {
            ProblemSpec::SkewRotation { .. } => Some(State::zeros(n)),
            ProblemSpec::L1PlusIdentity { b } => {
                let b = bound_vec(b, n, "b").ok()?;
                Some(State::from_iterator(n, b.iter().map(|v| soft_threshold(*v, 1.0))))
            }
            ProblemSpec::Lasso { weight, .. } => {
                // coordinatewise soft-threshold when the Gram matrix is diagonal
                let form = self.affine_form().ok()?;
                let off_diag = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .any(|(i, j)| i != j && form.m[(i, j)] != 0.0);
                if off_diag || (0..n).any(|i| form.m[(i, i)] <= 0.0) {
                    return None;
                }
                Some(State::from_fn(n, |i, _| {
                    soft_threshold(-form.q[i], *weight) / form.m[(i, i)]
                }))
            }
            ProblemSpec::StronglyMonotoneQuadratic { .. } | ProblemSpec::ConstrainedSaddle { .. } => {
                // interior solution of the unconstrained linear system
                let form = self.affine_form().ok()?;
                let x = form.m.clone().lu().solve(&(-&form.q))?;
                let inside = x.iter().zip(&form.kinds).all(|(v, k)| match k {
                    CoordKind::Interval(l, h) => v > l && v < h,
                    _ => true,
                });
                inside.then_some(x)
            }
        }
    }

    pub fn certification(&self) -> Certification {
        let beta_source = match self {
            ProblemSpec::SkewRotation { .. } | ProblemSpec::L1PlusIdentity { .. } => {
                Source::ClosedForm
            }
            _ => Source::Oracle,
        };
        let rho_source = match self {
            ProblemSpec::L1PlusIdentity { .. } => Source::ClosedForm,
            ProblemSpec::SkewRotation { .. } | ProblemSpec::ConstrainedSaddle { .. } => {
                Source::None
            }
            ProblemSpec::Lasso { .. } | ProblemSpec::StronglyMonotoneQuadratic { .. } => {
                match self.affine_form() {
                    Ok(f) if linalg::symmetric_eigen_range(&f.m).0 > RHO_FLOOR => Source::Oracle,
                    _ => Source::None,
                }
            }
        };
        let solution_source = if self.closed_form_solution().is_some() {
            Source::ClosedForm
        } else if self.dim() <= ENUMERATION_MAX_DIM {
            Source::Oracle
        } else {
            Source::None
        };
        Certification {
            beta_source,
            rho_source,
            solution_source,
        }
    }

    /// `f + h` for the convex-minimisation members of the catalog.
    pub fn objective(&self) -> Option<Objective> {
        match self.clone() {
            ProblemSpec::Lasso { matrix, b, weight } => {
                let mat = linalg::matrix_from_rows(&matrix).ok()?;
                let b = DVector::from_vec(b);
                Some(Objective::new(move |x: &State| {
                    weight * x.lp_norm(1) + 0.5 * (&mat * x - &b).norm_squared()
                }))
            }
            ProblemSpec::StronglyMonotoneQuadratic { q, b, lo, hi } => {
                let n = b.len();
                let qm = linalg::matrix_from_rows(&q).ok()?;
                let (lo, hi) = (bound_vec(&lo, n, "lo").ok()?, bound_vec(&hi, n, "hi").ok()?);
                let b = DVector::from_vec(b);
                Some(Objective::new(move |x: &State| {
                    let inside = x
                        .iter()
                        .enumerate()
                        .all(|(i, v)| *v >= lo[i] && *v <= hi[i]);
                    if inside {
                        0.5 * x.dot(&(&qm * x)) - b.dot(x)
                    } else {
                        f64::INFINITY
                    }
                }))
            }
            ProblemSpec::L1PlusIdentity { b } => {
                let n = self.dim();
                let b = DVector::from_vec(bound_vec(&b, n, "b").ok()?);
                Some(Objective::new(move |x: &State| {
                    x.lp_norm(1) + 0.5 * (x - &b).norm_squared()
                }))
            }
            ProblemSpec::SkewRotation { .. } | ProblemSpec::ConstrainedSaddle { .. } => None,
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        let form = self.affine_form()?;
        let n = self.dim();
        let name = self.name();

        let a = match self {
            ProblemSpec::Lasso { weight, .. } => ProxSpec::L1Norm { weight: *weight }.build()?,
            ProblemSpec::L1PlusIdentity { .. } => ProxSpec::L1Norm { weight: 1.0 }.build()?,
            ProblemSpec::SkewRotation { .. } => ProxSpec::Zero.build()?,
            ProblemSpec::StronglyMonotoneQuadratic { .. } | ProblemSpec::ConstrainedSaddle { .. } => {
                let (lo, hi): (Vec<f64>, Vec<f64>) = form
                    .kinds
                    .iter()
                    .map(|k| match k {
                        CoordKind::Interval(l, h) => (*l, *h),
                        _ => unreachable!("box problems have interval coordinates"),
                    })
                    .unzip();
                ProxSpec::BoxIndicator {
                    lo: Bound::Vector(lo),
                    hi: Bound::Vector(hi),
                }
                .build()?
            }
        };

        if let ProblemSpec::StronglyMonotoneQuadratic { .. } = self {
            let (lo, _) = linalg::symmetric_eigen_range(&form.m);
            if lo <= RHO_FLOOR {
                return Err(Error::Construction(format!(
                    "Q must be positive definite (smallest eigenvalue {lo:e})"
                )));
            }
        }

        let b_op = LipschitzOperator::affine(
            format!("{name}/B"),
            form.m.clone(),
            Some(form.q.clone()),
            None,
        )?;
        if !b_op.is_monotone() {
            return Err(Error::Construction(format!("{name}: B is not monotone")));
        }
        let rho = b_op.strong_modulus();
        let mut problem = ProblemInstance::new(name, n, a, b_op)?;
        if rho > RHO_FLOOR {
            problem = problem.with_rho(rho)?;
        }

        let solution = match self.closed_form_solution() {
            Some(x) => Some(x),
            None if n <= ENUMERATION_MAX_DIM => oracle::enumerate_active_sets(&form),
            None => None,
        };
        if let Some(x) = solution {
            problem = problem.with_solution(x)?;
        }
        if let Some(obj) = self.objective() {
            problem = problem.with_objective(obj);
        }
        Ok(problem)
    }
}

/// The built-in desk-scale catalog used by the check suites.
pub fn catalog() -> Vec<(String, ProblemSpec)> {
    let entries = [
        (
            "lasso_diag",
            ProblemSpec::Lasso {
                matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                b: vec![3.0, 0.5],
                weight: 1.0,
            },
        ),
        (
            "lasso_coupled",
            ProblemSpec::Lasso {
                matrix: vec![
                    vec![1.0, 0.5, 0.0],
                    vec![0.0, 1.0, 0.3],
                    vec![0.2, 0.0, 1.0],
                ],
                b: vec![2.0, -1.0, 0.3],
                weight: 0.5,
            },
        ),
        ("rotation_2", ProblemSpec::SkewRotation { n: 2 }),
        ("rotation_4", ProblemSpec::SkewRotation { n: 4 }),
        (
            "quadratic_interior",
            ProblemSpec::StronglyMonotoneQuadratic {
                q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                b: vec![0.5, -0.25],
                lo: Bound::Scalar(-1.0),
                hi: Bound::Scalar(1.0),
            },
        ),
        (
            "quadratic_active",
            ProblemSpec::StronglyMonotoneQuadratic {
                q: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                b: vec![3.0, -1.0],
                lo: Bound::Scalar(-1.0),
                hi: Bound::Scalar(1.0),
            },
        ),
        (
            "l1_identity_1",
            ProblemSpec::L1PlusIdentity {
                b: Bound::Scalar(3.0),
            },
        ),
        (
            "l1_identity_3",
            ProblemSpec::L1PlusIdentity {
                b: Bound::Vector(vec![3.0, -0.5, 1.5]),
            },
        ),
        (
            "saddle_interior",
            ProblemSpec::ConstrainedSaddle {
                payoff: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
                c: Some(vec![0.2, -0.1]),
                d: Some(vec![0.1, 0.3]),
                lo: Bound::Scalar(-1.0),
                hi: Bound::Scalar(1.0),
            },
        ),
        (
            "saddle_active",
            ProblemSpec::ConstrainedSaddle {
                payoff: vec![vec![1.0, 0.5], vec![-0.5, 1.0]],
                c: Some(vec![1.2, -0.3]),
                d: Some(vec![0.4, 1.8]),
                lo: Bound::Scalar(-1.0),
                hi: Bound::Scalar(1.0),
            },
        ),
    ];
    entries
        .into_iter()
        .map(|(label, spec)| (label.to_string(), spec))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;

    #[test]
    fn l1_plus_identity_solution() {
        let p = build("l1_plus_identity", serde_json::json!({"b": 3.0})).unwrap();
        assert_eq!(p.known_solution().unwrap()[0], 2.0);
        assert_eq!(p.beta(), 1.0);
        assert_eq!(p.rho(), Some(1.0));
    }

    #[test]
    fn rotation_metadata() {
        let p = build("skew_rotation", serde_json::json!({"n": 2})).unwrap();
        assert_eq!(p.known_solution().unwrap(), &state(&[0.0, 0.0]));
        assert!((p.beta() - 1.0).abs() < 1e-14);
        assert_eq!(p.rho(), None);
        let bx = p.b().apply(&state(&[1.0, 2.0]));
        assert_eq!(bx, state(&[2.0, -1.0]));
        assert!(build("skew_rotation", serde_json::json!({"n": 3})).is_err());
    }

    #[test]
    fn lasso_identity_solution() {
        let p = build(
            "lasso",
            serde_json::json!({"matrix": [[1.0, 0.0], [0.0, 1.0]], "b": [3.0, 0.5], "weight": 1.0}),
        )
        .unwrap();
        assert_eq!(p.known_solution().unwrap(), &state(&[2.0, 0.0]));
    }

    #[test]
    fn quadratic_interior_origin() {
        let p = build(
            "strongly_monotone_quadratic",
            serde_json::json!({"q": [[2.0, 0.0], [0.0, 2.0]], "b": [0.0, 0.0]}),
        )
        .unwrap();
        assert_eq!(p.known_solution().unwrap(), &state(&[0.0, 0.0]));
        assert_eq!(p.rho(), Some(2.0));
        assert!((p.beta() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            build("nope", serde_json::json!({})),
            Err(Error::UnknownName { .. })
        ));
        assert!(build("lasso", serde_json::json!({"matrix": [[1.0, 0.0]], "b": [1.0, 2.0]})).is_err());
        assert!(build(
            "strongly_monotone_quadratic",
            serde_json::json!({"q": [[1.0, 0.0], [0.0, 0.0]], "b": [0.0, 0.0]})
        )
        .is_err());
        assert!(build(
            "strongly_monotone_quadratic",
            serde_json::json!({"q": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0], "lo": [0.0]})
        )
        .is_err());
    }

    #[test]
    fn every_catalog_entry_builds_with_solution() {
        for (label, spec) in catalog() {
            let p = spec.build().unwrap_or_else(|e| panic!("{label}: {e}"));
            assert!(p.known_solution().is_some(), "{label}");
            assert_ne!(spec.certification().solution_source, Source::None);
        }
    }
}
