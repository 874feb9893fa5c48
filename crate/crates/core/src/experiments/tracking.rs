//! Closed-loop tip tracking through a payload transition.

use crate::closed_loop::{run_closed_loop, scenario_reference, ClosedLoopRun};
use crate::error::Result;
use crate::params::{CableParams, Mode};
use crate::rom::training::{run_training, TrainingConfig};
use crate::rom::{PodBasis, RomVariant};
use crate::scenario::Scenario;

/// Untruncated bases of both modes, trained in parallel.
pub fn train_bases(params: &CableParams, cfg: &TrainingConfig, variant: RomVariant) -> Result<[PodBasis; 2]> {
    let (free, slung) = rayon::join(
        || run_training(params, Mode::FreeTip, cfg).and_then(|r| r.basis(variant)),
        || run_training(params, Mode::Slung, cfg).and_then(|r| r.basis(variant)),
    );
    Ok([free?, slung?])
}

/// Runs a scenario against its quasi-static waypoint reference.
pub fn track(scenario: &Scenario, bases: &[PodBasis; 2]) -> Result<ClosedLoopRun> {
    let reference = scenario_reference(scenario, bases[0].intervals())?;
    run_closed_loop(scenario, bases, &reference)
}
