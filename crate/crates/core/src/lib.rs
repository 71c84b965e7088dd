//! Simulation and verification toolkit for the enhanced quantum energy
//! teleportation protocol: a three-qubit model in which Alice's measurement
//! and Bob's conditional pulse move energy out of a locally passive
//! "quasi-vacuum" into a storage qubit.

pub mod error;
pub mod model;
pub mod noise;
pub mod optimize;
pub mod passivity;
pub mod protocol;
pub mod qstate;
pub mod report;

pub use error::{QetError, Result};
pub use model::{DerivedConstants, QetParams};
pub use report::{RunReport, StepReport};
