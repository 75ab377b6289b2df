//! Closed-form resolvents: proximal maps, projections, and linear solves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MaximalOperator;
use crate::error::{Error, Result};
use crate::linalg::{self, State};

/// Scalar bounds broadcast over every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    fn at(&self, i: usize) -> f64 {
        match self {
            Bound::Scalar(v) => *v,
            Bound::Vector(v) => v[i],
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Bound::Scalar(_) => None,
            Bound::Vector(v) => Some(v.len()),
        }
    }
}

/// Catalog of operators with closed-form resolvents.
///
/// * `l1_norm`: `∂(w‖·‖₁)`, resolvent is soft-thresholding at `γw`.
/// * `box_indicator`: normal cone of `[lo, hi]`, resolvent is clamping.
/// * `ball_indicator`: normal cone of a Euclidean ball, resolvent is radial projection.
/// * `quadratic`: `∇(½yᵀQy + bᵀy)` with `Q` symmetric PSD.
/// * `linear_monotone`: `y ↦ My` with `M + Mᵀ` PSD.
/// * `zero`: resolvent is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    L1Norm {
        weight: f64,
    },
    BoxIndicator {
        lo: Bound,
        hi: Bound,
    },
    BallIndicator {
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Quadratic {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    LinearMonotone {
        m: Vec<Vec<f64>>,
    },
    Zero,
}

/// `sign(x)·max(|x| − τ, 0)`; exactly 0 at the kink `|x| = τ`.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Builds a catalog operator from its name and a JSON object of parameters.
pub fn prox_catalog(name: &str, params: serde_json::Value) -> Result<MaximalOperator> {
    ProxSpec::from_name(name, params)?.build()
}

const NAMES: [&str; 6] = [
    "l1_norm",
    "box_indicator",
    "ball_indicator",
    "quadratic",
    "linear_monotone",
    "zero",
];

impl ProxSpec {
    pub fn from_name(name: &str, params: serde_json::Value) -> Result<Self> {
        if !NAMES.contains(&name) {
            return Err(Error::UnknownName {
                kind: "operator",
                name: name.to_string(),
            });
        }
        let mut obj = match params {
            serde_json::Value::Object(m) => m,
            serde_json::Value::Null => serde_json::Map::new(),
            other => {
                return Err(Error::Construction(format!(
                    "parameters for `{name}` must be an object, got {other}"
                )))
            }
        };
        obj.insert("name".into(), serde_json::Value::String(name.into()));
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| Error::Construction(format!("{name}: {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProxSpec::L1Norm { .. } => "l1_norm",
            ProxSpec::BoxIndicator { .. } => "box_indicator",
            ProxSpec::BallIndicator { .. } => "ball_indicator",
            ProxSpec::Quadratic { .. } => "quadratic",
            ProxSpec::LinearMonotone { .. } => "linear_monotone",
            ProxSpec::Zero => "zero",
        }
    }

    /// Fixed dimension, if the parameters pin one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            ProxSpec::L1Norm { .. } | ProxSpec::Zero => None,
            ProxSpec::BoxIndicator { lo, hi } => lo.len().or(hi.len()),
            ProxSpec::BallIndicator { center, .. } => center.as_ref().map(Vec::len),
            ProxSpec::Quadratic { b, .. } => Some(b.len()),
            ProxSpec::LinearMonotone { m } => Some(m.len()),
        }
    }

    pub fn build(&self) -> Result<MaximalOperator> {
        let name = self.name();
        match self.clone() {
            ProxSpec::L1Norm { weight } => {
                if !(weight >= 0.0) || !weight.is_finite() {
                    return Err(Error::Construction(format!(
                        "l1_norm weight must be nonnegative, got {weight}"
                    )));
                }
                Ok(MaximalOperator::new(name, None, move |gamma, x| {
                    x.map(|v| soft_threshold(v, gamma * weight))
                }))
            }
            ProxSpec::BoxIndicator { lo, hi } => {
                let dim = match (lo.len(), hi.len()) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(Error::Construction(format!(
                            "box bounds have lengths {a} and {b}"
                        )))
                    }
                    (a, b) => a.or(b),
                };
                let n_check = dim.unwrap_or(1);
                for i in 0..n_check {
                    let (l, h) = (lo.at(i), hi.at(i));
                    if !(l <= h) || l.is_nan() || h.is_nan() {
                        return Err(Error::Construction(format!(
                            "box coordinate {i}: lo {l} > hi {h}"
                        )));
                    }
                }
                let (lo2, hi2) = (lo.clone(), hi.clone());
                Ok(MaximalOperator::new(name, dim, move |_, x| {
                    DVector::from_fn(x.len(), |i, _| x[i].clamp(lo.at(i), hi.at(i)))
                })
                .with_domain(move |x| {
                    x.iter()
                        .enumerate()
                        .all(|(i, v)| *v >= lo2.at(i) && *v <= hi2.at(i))
                }))
            }
            ProxSpec::BallIndicator { radius, center } => {
                if !(radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::Construction(format!(
                        "ball radius must be nonnegative, got {radius}"
                    )));
                }
                let dim = center.as_ref().map(Vec::len);
                let center = center.map(DVector::from_vec);
                let c2 = center.clone();
                let shift = move |x: &State, c: &Option<State>| match c {
                    Some(c) => x - c,
                    None => x.clone(),
                };
                Ok(MaximalOperator::new(name, dim, move |_, x| {
                    let d = shift(x, &center);
                    let norm = d.norm();
                    if norm <= radius {
                        return x.clone();
                    }
                    let p = d * (radius / norm);
                    match &center {
                        Some(c) => p + c,
                        None => p,
                    }
                })
                .with_domain(move |x| shift(x, &c2).norm() <= radius))
            }
            ProxSpec::Quadratic { q, b } => {
                let q = linalg::matrix_from_rows(&q)?;
                linalg::require_symmetric(&q, "Q")?;
                linalg::check_dim(&DVector::from_vec(b.clone()), q.nrows())
                    .map_err(|e| Error::Construction(format!("b: {e}")))?;
                let rho = linalg::require_monotone(&q, "Q")?;
                let eig = linalg::symmetric_part(&q).symmetric_eigen();
                let basis = eig.eigenvectors;
                let values = eig.eigenvalues;
                let b = DVector::from_vec(b);
                let n = b.len();
                Ok(MaximalOperator::new(name, Some(n), move |gamma, x| {
                    let rhs = basis.transpose() * (x - &b * gamma);
                    let scaled =
                        DVector::from_fn(n, |i, _| rhs[i] / (1.0 + gamma * values[i].max(0.0)));
                    &basis * scaled
                })
                .with_strong_modulus(rho))
            }
            ProxSpec::LinearMonotone { m } => {
                let m = linalg::matrix_from_rows(&m)?;
                let rho = linalg::require_monotone(&m, "M")?;
                let n = m.nrows();
                Ok(MaximalOperator::new(name, Some(n), move |gamma, x| {
                    let system = DMatrix::identity(n, n) + &m * gamma;
                    // I + γM is invertible whenever M + Mᵀ is PSD
                    system.lu().solve(x).expect("I + γM is nonsingular")
                })
                .with_strong_modulus(rho))
            }
            ProxSpec::Zero => Ok(MaximalOperator::zero()),
        }
    }

    /// Value of the underlying convex function (`+∞` outside its domain);
    /// `None` for operators that are not subdifferentials.
    pub fn function_value(&self, y: &State) -> Option<f64> {
        match self {
            ProxSpec::L1Norm { weight } => Some(weight * y.lp_norm(1)),
            ProxSpec::BoxIndicator { lo, hi } => Some(
                if y.iter()
                    .enumerate()
                    .all(|(i, v)| *v >= lo.at(i) && *v <= hi.at(i))
                {
                    0.0
                } else {
                    f64::INFINITY
                },
            ),
            ProxSpec::BallIndicator { radius, center } => {
                let d = match center {
                    Some(c) => (y - DVector::from_column_slice(c)).norm(),
                    None => y.norm(),
                };
                Some(if d <= *radius { 0.0 } else { f64::INFINITY })
            }
            ProxSpec::Quadratic { q, b } => {
                let q = linalg::matrix_from_rows(q).ok()?;
                let b = DVector::from_column_slice(b);
                Some(0.5 * y.dot(&(&q * y)) + b.dot(y))
            }
            ProxSpec::LinearMonotone { .. } => None,
            ProxSpec::Zero => Some(0.0),
        }
    }

    /// A point of `zer A` in dimension `n`, when one is known in closed form.
    pub fn known_zero(&self, n: usize) -> Option<State> {
        match self {
            ProxSpec::L1Norm { .. } | ProxSpec::LinearMonotone { .. } | ProxSpec::Zero => {
                Some(DVector::zeros(n))
            }
            ProxSpec::BoxIndicator { lo, hi } => {
                Some(DVector::from_fn(n, |i, _| 0.5 * (lo.at(i) + hi.at(i))))
            }
            ProxSpec::BallIndicator { center, .. } => Some(match center {
                Some(c) => DVector::from_column_slice(c),
                None => DVector::zeros(n),
            }),
            ProxSpec::Quadratic { q, b } => {
                let q = linalg::matrix_from_rows(q).ok()?;
                let b = DVector::from_column_slice(b);
                q.lu().solve(&(-b))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::state;
    use proptest::prelude::*;

    /// Dense 1-D grid minimiser of `f(y) + (y − x)²/(2γ)` on [−10, 10] at spacing 1e−5.
    fn grid_prox_1d(f: impl Fn(f64) -> f64, gamma: f64, x: f64) -> f64 {
        let steps = 2_000_000;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=steps {
            let y = -10.0 + 20.0 * k as f64 / steps as f64;
            let v = f(y) + (y - x) * (y - x) / (2.0 * gamma);
            if v < best.0 {
                best = (v, y);
            }
        }
        best.1
    }

    #[test]
    fn soft_threshold_matches_grid_oracle() {
        // ∂|·| at γ = 1, x = 3 → 2
        let oracle = grid_prox_1d(f64::abs, 1.0, 3.0);
        assert!((oracle - 2.0).abs() < 1e-4);
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        // l1 weight 1, γ = 0.5, x = 0.3 → 0
        let oracle = grid_prox_1d(f64::abs, 0.5, 0.3);
        assert!(oracle.abs() < 1e-4);
        let a = ProxSpec::L1Norm { weight: 1.0 }.build().unwrap();
        assert_eq!(a.resolve(0.5, &state(&[0.3]))[0], 0.0);
    }

    #[test]
    fn soft_threshold_kink_returns_zero() {
        assert_eq!(soft_threshold(0.5, 0.5), 0.0);
        assert_eq!(soft_threshold(-0.5, 0.5), 0.0);
    }

    #[test]
    fn box_projection_clamps() {
        let a = ProxSpec::BoxIndicator {
            lo: Bound::Scalar(0.0),
            hi: Bound::Scalar(1.0),
        }
        .build()
        .unwrap();
        let z = a.resolve(3.0, &state(&[2.0, -0.5]));
        assert_eq!(z, state(&[1.0, 0.0]));
        assert!(a.in_domain(&z));
        assert!(!a.in_domain(&state(&[2.0, 0.0])));
    }

    #[test]
    fn quadratic_resolvent_is_linear_solve() {
        let a = ProxSpec::Quadratic {
            q: vec![vec![2.0]],
            b: vec![0.0],
        }
        .build()
        .unwrap();
        assert!((a.resolve(0.5, &state(&[4.0]))[0] - 2.0).abs() < 1e-14);
        assert_eq!(a.strong_modulus(), 2.0);
    }

    #[test]
    fn ball_projection_scales_radially() {
        let a = ProxSpec::BallIndicator {
            radius: 1.0,
            center: None,
        }
        .build()
        .unwrap();
        let z = a.resolve(1.0, &state(&[3.0, 4.0]));
        assert!((z - state(&[0.6, 0.8])).norm() < 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            prox_catalog("bogus", serde_json::json!({})),
            Err(Error::UnknownName { .. })
        ));
        let not_psd = ProxSpec::Quadratic {
            q: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
            b: vec![0.0, 0.0],
        };
        assert!(not_psd.build().is_err());
        let not_monotone = ProxSpec::LinearMonotone {
            m: vec![vec![-1.0]],
        };
        assert!(not_monotone.build().is_err());
        assert!(prox_catalog("box_indicator", serde_json::json!({"lo": 1.0, "hi": 0.0})).is_err());
        assert!(prox_catalog("l1_norm", serde_json::json!({"weight": 1.0, "extra": 2})).is_err());
    }

    #[test]
    fn catalog_by_name() {
        let a = prox_catalog("l1_norm", serde_json::json!({"weight": 2.0})).unwrap();
        assert_eq!(a.resolve(1.0, &state(&[3.0]))[0], 1.0);
        let z = prox_catalog("zero", serde_json::Value::Null).unwrap();
        assert_eq!(z.resolve(1.0, &state(&[3.0]))[0], 3.0);
    }

    fn firmly_nonexpansive(a: &MaximalOperator, gamma: f64, x: &State, y: &State) -> bool {
        let jx = a.resolve(gamma, x);
        let jy = a.resolve(gamma, y);
        let d = &jx - &jy;
        d.norm_squared() <= d.dot(&(x - y)) + 1e-10
    }

    proptest! {
        #[test]
        fn l1_prox_firmly_nonexpansive(
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
            gamma in 0.01f64..10.0,
            weight in 0.0f64..3.0,
        ) {
            let a = ProxSpec::L1Norm { weight }.build().unwrap();
            prop_assert!(firmly_nonexpansive(&a, gamma, &state(&x), &state(&y)));
        }

        #[test]
        fn linear_resolvent_firmly_nonexpansive(
            x in prop::collection::vec(-10.0f64..10.0, 2),
            y in prop::collection::vec(-10.0f64..10.0, 2),
            gamma in 0.01f64..10.0,
            skew in -5.0f64..5.0,
        ) {
            let a = ProxSpec::LinearMonotone { m: vec![vec![0.5, skew], vec![-skew, 0.0]] }
                .build()
                .unwrap();
            prop_assert!(firmly_nonexpansive(&a, gamma, &state(&x), &state(&y)));
        }
    }
}
