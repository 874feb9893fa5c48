//! Receding-horizon wrapper around the solvers.

use serde::{Deserialize, Serialize};

use super::cost::{CostModel, WeightConfig};
use super::model::InternalModel;
use super::solver::{shift_controls, solve, HorizonReference, Solution, SolverConfig};
use crate::cable::FullState;
use crate::error::{Error, Result};
use crate::params::Vec3;
use crate::rom::RomVariant;

/// Controller settings exposed in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSettings {
    pub horizon: usize,
    pub dt: f64,
    pub substeps: usize,
    pub rom_order: usize,
    pub variant: RomVariant,
    pub solver: SolverConfig,
    pub weights: WeightConfig,
    /// Growth of the obstacles seen by the controller (m).
    pub clearance: f64,
}

impl Default for MpcSettings {
    fn default() -> Self {
        Self {
            horizon: 32,
            dt: 0.025,
            substeps: 1,
            rom_order: 1,
            variant: RomVariant::Proposed,
            solver: SolverConfig::default(),
            weights: WeightConfig::default(),
            clearance: 0.0,
        }
    }
}

impl MpcSettings {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || !(self.dt > 0.0) || self.substeps == 0 || self.rom_order == 0 || !(self.clearance >= 0.0) {
            return Err(Error::Config("horizon, step, substeps and ROM order must be positive, clearance non-negative".into()));
        }
        self.solver.validate()
    }
}

/// Commands returned at one controller tick.
#[derive(Debug, Clone)]
pub struct Decision {
    /// First two predicted accelerations; the applied command interpolates
    /// between them over the interval.
    pub v0: Vec3,
    pub v1: Vec3,
    pub solution: Option<Solution>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MpcController {
    pub model: InternalModel,
    pub cost: CostModel,
    pub config: SolverConfig,
    pub horizon: usize,
    warm: Option<Vec<Vec3>>,
}

impl MpcController {
    pub fn new(model: InternalModel, cost: CostModel, config: SolverConfig, horizon: usize) -> Result<Self> {
        config.validate()?;
        if horizon < 2 {
            return Err(Error::Config("horizon must cover at least two intervals".into()));
        }
        Ok(Self { model, cost, config, horizon, warm: None })
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    /// Previous solution shifted by one interval, if any.
    pub fn warm_start(&self) -> Option<Vec<Vec3>> {
        self.warm.as_ref().map(|u| shift_controls(u))
    }

    /// Solves from a measured full state and returns the first two commands.
    /// On solver failure the shifted previous solution is reused.
    pub fn step(&mut self, t: f64, state: &FullState, reference: &HorizonReference) -> Result<Decision> {
        if reference.horizon() != self.horizon {
            return Err(Error::Config("reference window does not match the horizon".into()));
        }
        let z0 = self.model.model(state.mode).project_full(state)?.z;
        let init = self.warm_start().unwrap_or_else(|| reference.inputs.clone());
        match solve(&self.model, &self.cost, &self.config, t, state.mode, &z0, reference, &init) {
            Ok(sol) => {
                let (v0, v1) = (sol.controls[0], sol.controls[1]);
                self.warm = Some(sol.controls.clone());
                Ok(Decision { v0, v1, solution: Some(sol), error: None })
            }
            Err(e) => {
                self.warm = Some(init.clone());
                Ok(Decision { v0: init[0], v1: init[1], solution: None, error: Some(e.to_string()) })
            }
        }
    }
}
