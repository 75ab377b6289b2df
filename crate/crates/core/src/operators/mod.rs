//! Monotone operators on R^n.
//!
//! The set-valued operator `A` is only ever touched through its resolvent
//! `J_{γA} = (Id + γA)^{-1}`; the single-valued operator `B` is an ordinary
//! map with a declared Lipschitz constant `1/β`.

mod prox;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, State};

pub use prox::{prox_catalog, soft_threshold, Bound, ProxSpec};

/// Absolute slack for identities that hold exactly in real arithmetic.
pub const IDENTITY_TOL: f64 = 1e-10;

type ResolventFn = dyn Fn(f64, &State) -> State + Send + Sync;
type DomainFn = dyn Fn(&State) -> bool + Send + Sync;
type MapFn = dyn Fn(&State) -> State + Send + Sync;

/// A maximally monotone operator exposed through its resolvent.
#[derive(Clone)]
pub struct MaximalOperator {
    name: String,
    dim: Option<usize>,
    resolvent: Arc<ResolventFn>,
    domain: Option<Arc<DomainFn>>,
    strong_modulus: f64,
}

impl MaximalOperator {
    /// `resolvent(γ, x)` must return `J_{γA} x`. A `dim` of `None` means the
    /// operator acts coordinatewise and accepts any dimension.
    pub fn new<F>(name: impl Into<String>, dim: Option<usize>, resolvent: F) -> Self
    where
        F: Fn(f64, &State) -> State + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            resolvent: Arc::new(resolvent),
            domain: None,
            strong_modulus: 0.0,
        }
    }

    /// The zero operator; its resolvent is the identity.
    pub fn zero() -> Self {
        Self::new("zero", None, |_, x| x.clone())
    }

    /// Membership test for the closure of the domain. Without one the domain is all of R^n.
    pub fn with_domain<F>(mut self, domain: F) -> Self
    where
        F: Fn(&State) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn with_strong_modulus(mut self, rho: f64) -> Self {
        self.strong_modulus = rho.max(0.0);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn strong_modulus(&self) -> f64 {
        self.strong_modulus
    }

    pub fn has_domain_test(&self) -> bool {
        self.domain.is_some()
    }

    pub fn in_domain(&self, x: &State) -> bool {
        self.domain.as_ref().is_none_or(|d| d(x))
    }

    /// Unchecked resolvent evaluation. Callers guarantee `γ > 0` and matching dimension.
    #[inline]
    pub fn resolve(&self, gamma: f64, x: &State) -> State {
        (self.resolvent)(gamma, x)
    }
}

impl fmt::Debug for MaximalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaximalOperator")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("strong_modulus", &self.strong_modulus)
            .finish_non_exhaustive()
    }
}

/// A single-valued monotone operator that is `1/β`-Lipschitz.
#[derive(Clone)]
pub struct LipschitzOperator {
    name: String,
    dim: Option<usize>,
    apply: Arc<MapFn>,
    beta: f64,
    monotone: bool,
    strong_modulus: f64,
}

impl LipschitzOperator {
    pub fn new<F>(
        name: impl Into<String>,
        dim: Option<usize>,
        apply: F,
        beta: f64,
        monotone: bool,
        strong_modulus: f64,
    ) -> Result<Self>
    where
        F: Fn(&State) -> State + Send + Sync + 'static,
    {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Construction(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if !(strong_modulus >= 0.0) {
            return Err(Error::Construction(format!(
                "strong modulus must be nonnegative, got {strong_modulus}"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            apply: Arc::new(apply),
            beta,
            monotone,
            strong_modulus,
        })
    }

    /// `B = 0`, which is Lipschitz with every constant; `beta` is whatever the caller declares.
    pub fn zero(beta: f64) -> Result<Self> {
        Self::new("zero", None, |x| DVector::zeros(x.len()), beta, true, 0.0)
    }

    /// `B x = M x + c`. β defaults to `1/‖M‖₂`; an explicit β must not exceed it.
    pub fn affine(
        name: impl Into<String>,
        matrix: DMatrix<f64>,
        offset: Option<State>,
        beta: Option<f64>,
    ) -> Result<Self> {
        linalg::require_square(&matrix, "linear part of B")?;
        let n = matrix.nrows();
        if let Some(c) = &offset {
            linalg::check_dim(c, n).map_err(|e| Error::Construction(e.to_string()))?;
        }
        let norm = linalg::spectral_norm(&matrix);
        let beta = match beta {
            Some(b) if b * norm > 1.0 + linalg::PSD_TOL => {
                return Err(Error::Construction(format!(
                    "declared beta {b} exceeds 1/‖M‖ = {}",
                    1.0 / norm
                )))
            }
            Some(b) => b,
            None if norm > 0.0 => 1.0 / norm,
            None => {
                return Err(Error::Construction(
                    "B = 0 is Lipschitz with every constant; declare beta explicitly".into(),
                ))
            }
        };
        let (lo, _) = linalg::symmetric_eigen_range(&linalg::symmetric_part(&matrix));
        let monotone = lo >= -linalg::PSD_TOL;
        let offset = offset.unwrap_or_else(|| DVector::zeros(n));
        Self::new(
            name,
            Some(n),
            move |x| &matrix * x + &offset,
            beta,
            monotone,
            lo.max(0.0),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lipschitz_constant(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn strong_modulus(&self) -> f64 {
        self.strong_modulus
    }

    #[inline]
    pub fn apply(&self, x: &State) -> State {
        (self.apply)(x)
    }
}

impl fmt::Debug for LipschitzOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzOperator")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("monotone", &self.monotone)
            .field("strong_modulus", &self.strong_modulus)
            .finish_non_exhaustive()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("gamma must be positive, got {gamma}")))
    }
}

fn check_input(a: &MaximalOperator, x: &State) -> Result<()> {
    linalg::check_finite(x)?;
    if let Some(n) = a.dim() {
        linalg::check_dim(x, n)?;
    }
    Ok(())
}

/// `J_{γA} x`.
pub fn resolvent(a: &MaximalOperator, gamma: f64, x: &State) -> Result<State> {
    check_gamma(gamma)?;
    check_input(a, x)?;
    Ok(a.resolve(gamma, x))
}

/// Yosida approximation `A_γ x = (x - J_{γA} x) / γ`.
pub fn yosida(a: &MaximalOperator, gamma: f64, x: &State) -> Result<State> {
    let j = resolvent(a, gamma, x)?;
    Ok((x - j) / gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ParameterInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `‖J_{λA}x − J_{μA}x‖` against `|λ − μ| ‖A_λ x‖`.
pub fn check_resolvent_parameter_inequality(
    a: &MaximalOperator,
    lambda: f64,
    mu: f64,
    x: &State,
) -> Result<ParameterInequality> {
    check_gamma(mu)?;
    let j_lambda = resolvent(a, lambda, x)?;
    let j_mu = a.resolve(mu, x);
    let lhs = (&j_lambda - &j_mu).norm();
    let rhs = (lambda - mu).abs() * ((x - &j_lambda) / lambda).norm();
    Ok(ParameterInequality {
        lhs,
        rhs,
        holds: lhs <= rhs + IDENTITY_TOL,
    })
}
