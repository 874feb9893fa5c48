//! Hybrid model predictive control on the reduced models.

pub mod controller;
pub mod cost;
pub mod model;
pub mod solver;

#[cfg(test)]
mod tests;

pub use controller::{MpcController, MpcSettings};
pub use cost::{CostModel, CostWeights, WeightConfig};
pub use model::{rollout, rollout_linearized, InternalModel, Rollout};
pub use solver::{solve, HorizonReference, Solution, SolveStatus, SolverConfig, SolverVariant};
