//! The active observer: it pushes on the input dofs and checks whether the
//! response is the one the declared system predicts.
//!
//! Every decision here is a function of a [`ProbeRecord`], i.e. of the
//! quantized output samples and of the prober's own forces. Nothing reads
//! the hidden part of the machine.

mod falsify;
mod newton;
mod plan;
mod run;
mod stop;

use thiserror::Error;

pub use falsify::{battery, evaluate, falsify, falsify_plan, falsify_with, FalsifyReport, PassState, ProbeReport};
pub use newton::{force_response_kernel, newton_residual, NewtonReport, ProbeEvent, NEWTON_NOISE_FACTOR};
pub use plan::{ForceWindow, Gains, ProbeKind, ProbePlan, Region};
pub use run::{run_probe, ProbeRecord};
pub use stop::{stop_and_release, StopOutcome, StopReport, FALSIFY_FRACTION};

use crate::calculators::{Calculator, CatalogError, Declaration};
use crate::dynamics::DynamicsError;
use crate::observer::ObserverError;
use crate::scalar::Real;
use crate::vec2::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("no controller: the calculator has no input dofs")]
    NoController,
    #[error("invalid probe plan: {0}")]
    InvalidPlan(String),
    #[error("probe not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// A machine the prober can drive: a catalog calculator, or any other
/// simulator exposing the same view (e.g. a reference implementation of a
/// declared system).
pub trait ProbeTarget: Clone {
    fn output_dofs(&self) -> Vec<String>;
    /// The two dofs (x, y) the controller pushes on; empty without one.
    fn input_dofs(&self) -> Vec<String>;
    fn declaration(&self) -> &Declaration;
    /// Exact current values of the output dofs.
    fn read_outputs(&self) -> Vec<f64>;
    /// Advances by `dt` with `force` held on the input dofs.
    fn advance(&mut self, dt: f64, force: Vec2<f64>) -> Result<(), ProbeError>;
}

impl<T: Real> ProbeTarget for Calculator<T> {
    fn output_dofs(&self) -> Vec<String> {
        self.partition.output().to_vec()
    }

    fn input_dofs(&self) -> Vec<String> {
        self.partition.input().to_vec()
    }

    fn declaration(&self) -> &Declaration {
        &self.declaration
    }

    fn read_outputs(&self) -> Vec<f64> {
        self.output_values().into_iter().map(|v| v.as_f64()).collect()
    }

    fn advance(&mut self, dt: f64, force: Vec2<f64>) -> Result<(), ProbeError> {
        let dt = T::lit(dt);
        if force == Vec2::zero() {
            self.world.step(dt, &[])?;
            return Ok(());
        }
        let body = self.controller().ok_or(ProbeError::NoController)?;
        self.world.step(dt, &[(body, force.cast())])?;
        Ok(())
    }
}
