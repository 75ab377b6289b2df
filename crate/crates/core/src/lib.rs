//! Forward-backward-forward splitting for monotone inclusions `0 ∈ Ax + Bx` in R^n.
//!
//! * [`operators`]: resolvents, Yosida approximations, and a catalog of closed-form proxes.
//! * [`dynamics`]: the continuous-time vector field, step-size schedules, and integrators.
//! * [`discrete`]: the Tseng iteration and its ergodic average.
//! * [`diagnostics`]: monitors for Fejér monotonicity, rate envelopes, and ergodic bounds.
//! * [`problems`]: a catalog of certified instances with independent oracles.
//! * [`suites`]: the property suites behind `fbf check`.
//! * [`export`]: CSV and JSON artifacts.

// `!(a <= b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discrete;
pub mod dynamics;
mod error;
pub mod export;
pub mod linalg;
pub mod operators;
pub mod problems;
pub mod suites;

pub use error::{Error, Result};
pub use linalg::State;
