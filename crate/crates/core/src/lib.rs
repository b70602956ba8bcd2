//! Simulation and friction-identification toolkit for a passive tilted
//! Furuta pendulum.
//!
//! The crate covers the full pipeline:
//!
//! - [`model`] — closed-form rigid-body dynamics with a continuous
//!   five-parameter friction model per joint;
//! - [`sim`] — fixed-step RK4 propagation, measurement noise, trajectory
//!   CSV I/O;
//! - [`uas`] — the universal-adaptive-stabilizer observer that identifies
//!   the ten friction parameters from joint measurements;
//! - [`baseline`] — a conventional grey-box simplex optimization to compare
//!   against;
//! - [`metrics`] — goodness of fit, normalized computation time, spectra.
//!
//! Everything is deterministic given the seeds; no global state.

pub use nalgebra;

pub mod baseline;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod uas;

pub use model::{
    FrictionParams, GeneralizedForces, Joint, ModelError, NormalForceModel, PhysicalParams, State,
    StaticWeights,
};
pub use sim::{Channel, SimConfig, SimError, Trajectory};
pub use uas::{
    AdaptationConfig, AdaptationLaw, IdentificationReport, NussbaumKind, NussbaumSpec,
    ObserverState, UasError,
};
