//! Aerial manipulation of an extensible cable.
//!
//! * [`cable`]: finite-difference cable dynamics with vehicle and payload
//!   boundary closures and the attach/detach reset maps.
//! * [`sim`]: RK4 integration, guards, rest-to-rest reference splines.
//! * [`rom`]: POD bases from snapshots and the reduced-order models.
//! * [`mpc`]: hybrid internal model, node-level cost and the hybrid iLQR
//!   solvers used in receding horizon.
//! * [`planner`]: segmented obstacle-avoiding planner with barrier homotopy.
//! * [`metrics`], [`scenario`], [`closed_loop`], [`experiments`]: error
//!   functionals, file formats, the closed-loop harness and the experiment
//!   drivers behind the `aerocable` binary.

pub mod cable;
pub mod closed_loop;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod mpc;
pub mod obstacle;
pub mod params;
pub mod planner;
pub mod reference;
pub mod rom;
pub mod scenario;
pub mod sim;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Error, Result};
pub use params::{CableParams, Mode, Vec3};
