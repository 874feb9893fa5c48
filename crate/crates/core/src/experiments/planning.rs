//! Planned pick-and-place: offline plan, then closed-loop execution of the
//! plan on the full model.

use std::path::Path;

use crate::closed_loop::{run_closed_loop, ClosedLoopRun};
use crate::error::Result;
use crate::planner::{load_plan, plan, Plan, PlanMeta};
use crate::reference::ReferenceTrajectory;
use crate::rom::PodBasis;
use crate::scenario::Scenario;

/// Plans the scenario; fails with a planning report if any sample of the
/// plan penetrates an obstacle.
pub fn plan_scenario(scenario: &Scenario, bases: &[PodBasis; 2]) -> Result<Plan> {
    scenario.validate()?;
    plan(&scenario.plan_spec()?, bases)
}

/// Tracks a plan, given at any step that divides the controller step.
pub fn run_plan(scenario: &Scenario, bases: &[PodBasis; 2], reference: &ReferenceTrajectory) -> Result<ClosedLoopRun> {
    run_closed_loop(scenario, bases, &reference.resample(scenario.mpc.dt)?)
}

/// Loads a plan written by [`Plan::save`] and tracks it.
pub fn run_saved_plan(scenario: &Scenario, bases: &[PodBasis; 2], dir: &Path) -> Result<(ClosedLoopRun, PlanMeta)> {
    let (reference, meta) = load_plan(dir)?;
    Ok((run_plan(scenario, bases, &reference)?, meta))
}
