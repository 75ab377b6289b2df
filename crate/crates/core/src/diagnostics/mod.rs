//! Monitors that check convergence guarantees along recorded runs.
//!
//! Every monitor is a pure function of its inputs and returns a
//! [`MonitorVerdict`]. `worst_margin` is the largest excess over the nominal
//! bound before any tolerance is applied, so a verdict that holds always has
//! `worst_margin` at most the monitor's tolerance.

mod controls;
mod envelope;
mod monitors;
mod probes;

use serde::{Deserialize, Serialize};

use crate::discrete::IterateRecord;
use crate::dynamics::TrajectoryRecord;
use crate::linalg::State;

pub use controls::negative_controls;
pub use envelope::{
    corollary_envelope, corollary_rate, decay_integrand, exponential_envelope, EnvelopeReport,
    ENVELOPE_ABS_TOL, ENVELOPE_REL_TOL,
};
pub use monitors::{
    ergodic_objective_monitor, fejer_from_distances, fejer_monitor, inclusion_monitor,
    residual_integral_from_series, residual_integral_monitor, velocity_monitor,
    zdot_bound_coefficient, zdot_bound_monitor, ERGODIC_REL_TOL, FEJER_SLACK,
    RESIDUAL_INTEGRAL_TOL, ZDOT_REL_TOL,
};
pub use probes::{
    growth_probe, lipschitz_probe, vanishing_probe, LipschitzReport, SQRT_6,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Time(f64),
    Iteration(usize),
}

impl Location {
    pub fn value(&self) -> f64 {
        match self {
            Location::Time(t) => *t,
            Location::Iteration(n) => *n as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorVerdict {
    pub name: String,
    pub status: Status,
    pub holds: bool,
    pub worst_margin: f64,
    pub location: Option<Location>,
    /// Monitor-specific headline number (e.g. the residual integral).
    pub value: Option<f64>,
    pub detail: String,
}

impl MonitorVerdict {
    pub(crate) fn decide(
        name: &str,
        holds: bool,
        worst_margin: f64,
        location: Option<Location>,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.to_string(),
            status: if holds { Status::Holds } else { Status::Violated },
            holds,
            worst_margin,
            location,
            value: None,
            detail: detail.into(),
        }
    }

    pub fn inapplicable(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            status: Status::Inapplicable,
            holds: false,
            worst_margin: 0.0,
            location: None,
            value: None,
            detail: detail.into(),
        }
    }

    pub(crate) fn with_value(mut self, v: f64) -> Self {
        self.value = Some(v);
        self
    }

    pub fn is_violation(&self) -> bool {
        self.status == Status::Violated
    }
}

/// Common read access to continuous trajectories and discrete iterate records.
pub trait Stream {
    fn initial_state(&self) -> &State;
    /// States in order, each tagged with its time or iteration index.
    fn states(&self) -> Vec<(Location, &State)>;
    /// `(location, Γ, ζ)` wherever `Γ > 0`.
    fn ergodic_points(&self) -> Vec<(Location, f64, &State)>;
}

impl Stream for TrajectoryRecord {
    fn initial_state(&self) -> &State {
        self.x0()
    }

    fn states(&self) -> Vec<(Location, &State)> {
        self.samples
            .iter()
            .map(|s| (Location::Time(s.t), &s.x))
            .collect()
    }

    fn ergodic_points(&self) -> Vec<(Location, f64, &State)> {
        self.samples
            .iter()
            .filter_map(|s| {
                s.ergodic
                    .as_ref()
                    .map(|z| (Location::Time(s.t), s.gamma_integral, z))
            })
            .collect()
    }
}

impl Stream for IterateRecord {
    fn initial_state(&self) -> &State {
        self.x0()
    }

    fn states(&self) -> Vec<(Location, &State)> {
        let mut out: Vec<_> = self
            .iterates
            .iter()
            .map(|it| (Location::Iteration(it.n), &it.x))
            .collect();
        if !self.converged {
            if let Some(last) = self.iterates.last() {
                out.push((Location::Iteration(last.n + 1), &self.final_x));
            }
        }
        out
    }

    fn ergodic_points(&self) -> Vec<(Location, f64, &State)> {
        self.iterates
            .iter()
            .map(|it| (Location::Iteration(it.n), it.gamma_sum, &it.ergodic))
            .collect()
    }
}
