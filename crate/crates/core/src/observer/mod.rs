//! The passive observer: it sees only quantized samples of the output dofs
//! and must decide whether some ordinary mechanics explains them.
//!
//! Pipeline: [`observe`] → [`detect_events`] → [`estimate_derivatives`] →
//! [`infer_constraints`] → [`fit`] for every family → [`classify`].

mod classify;
mod constraints;
mod derivatives;
mod events;
mod fit;
mod sensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify, classify_with, constraints_consistent, Agreement, Evidence, Physicality, Verdict, VerdictReport,
};
pub use constraints::{
    infer_constraints, max_sample_travel, sampled_bounds, ConstraintInference, InferredWall, PairContact,
    WALL_SPREAD_QUANTA,
};
pub use derivatives::{
    estimate_derivatives, estimate_derivatives_masking, estimate_derivatives_with_window, Derivatives, SgWeights,
};
pub use events::{
    detect_events, detect_events_with_reference, jump_threshold, Event, EventList, EVENT_FIT_SAMPLES,
};
pub use fit::{fit, fit_with_derivatives, FitResult};
pub use sensor::{observe, quantize, trajectory_from_rows, SensorSpec, Trajectory, MIN_SAMPLE_PERIODS};

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObserverError {
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("invalid observer setting: {0}")]
    InvalidConfig(String),
    #[error("malformed trajectory: {0}")]
    Malformed(String),
    #[error("insufficient evidence: {samples} samples, at least {required} required")]
    InsufficientEvidence { samples: usize, required: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Tolerances of the observer, all tied to the sensor rather than to any
/// knowledge of the hidden machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverConfig {
    /// Event threshold η, in units of three velocity-noise deviations.
    pub event_threshold: f64,
    /// A family fits when its RMS residual is at most this many noise floors.
    pub fit_tolerance: f64,
    /// Relative tolerance on fitted versus declared parameters.
    pub param_tolerance: f64,
    /// Wall positions agree when within this many quanta.
    pub constraint_tolerance_quanta: f64,
    /// Widest Savitzky–Golay half-window, in samples.
    pub max_half_window: usize,
    /// Target ratio of derivative noise to signal when choosing the window.
    pub noise_target: f64,
    /// Specular events needed before a wall is accepted.
    pub min_wall_support: usize,
    pub min_segment_samples: usize,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            event_threshold: 1.5,
            fit_tolerance: 5.0,
            param_tolerance: 0.02,
            constraint_tolerance_quanta: 3.0,
            max_half_window: 50,
            noise_target: 0.01,
            min_wall_support: 1,
            min_segment_samples: 5,
        }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<(), ObserverError> {
        let bad = |m: &str| Err(ObserverError::InvalidConfig(m.to_string()));
        if !(self.event_threshold > 1.0) {
            return bad("event threshold must exceed 1");
        }
        if !(self.fit_tolerance > 0.0 && self.param_tolerance > 0.0 && self.constraint_tolerance_quanta > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.max_half_window < 1 || self.min_wall_support < 1 {
            return bad("window and wall support must be >= 1");
        }
        if !(self.noise_target > 0.0) {
            return bad("noise target must be > 0");
        }
        Ok(())
    }
}
