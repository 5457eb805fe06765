//! Simulation of a controlled beam-splitter between two bosonic modes mediated
//! by a Kerr-cat ancilla: operators, parameter derivation, cat basis,
//! Lindblad dynamics and process tomography.

pub mod catbasis;
pub mod config;
mod dense;
pub mod error;
pub mod experiments;
pub mod gate;
pub mod lindblad;
pub mod ode;
pub mod operator;
pub mod output;
pub mod tomography;
pub mod params;

pub use catbasis::{CatBasis, LogicalObservables};
pub use error::{Error, Result};
pub use gate::{CpbsForm, DriveSchedule, GateContext, Scheme};
pub use ode::IntegratorSettings;
pub use operator::{AncillaBasis, HilbertSpec, Operator, C64};
pub use params::{EffectiveParams, GateTarget, ModelParams, Preset};
