//! Nonlinear dynamics of optically pumped cold atoms in a driven cavity.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: dimensionless parameters, phase shifts and the field/orientation
//!   right-hand sides.
//! - [`zeeman`]: rate equations for σ+ pumping of the Zeeman manifold and the
//!   extraction of the effective pumping coefficient.
//! - [`steady`]: all fixed points, bistability threshold, branch diagrams,
//!   linear stability and instability maps.
//! - [`dynamics`]: time-domain scans, switch and limit-cycle detection.
//! - [`units`], [`presets`], [`config`], [`emit`], [`cli`]: conversion from
//!   laboratory units, named scenarios and file output.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod emit;
pub mod error;
pub mod integrate;
pub mod model;
pub mod poly;
pub mod presets;
pub mod steady;
pub mod units;
pub mod zeeman;

pub use error::{Error, Result};
pub use model::{ModelParams, SystemState, Variant};
