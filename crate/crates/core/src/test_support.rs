//! Shared fixtures for unit tests.

use std::sync::OnceLock;

use crate::params::{CableParams, Mode};
use crate::rom::training::{run_training, TrainingConfig};
use crate::rom::{PodBasis, RomVariant};

/// Bases from short training runs: `[free, slung]` for each variant.
pub fn short_bases(variant: RomVariant) -> [PodBasis; 2] {
    static CACHE: OnceLock<[[PodBasis; 2]; 2]> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        let params = CableParams::default();
        let cfg = TrainingConfig { duration: 2.0, snapshot_intervals: 40, ..Default::default() };
        let free = run_training(&params, Mode::FreeTip, &cfg).unwrap();
        let slung = run_training(&params, Mode::Slung, &cfg).unwrap();
        [
            [free.basis(RomVariant::Proposed).unwrap(), slung.basis(RomVariant::Proposed).unwrap()],
            [free.basis(RomVariant::Baseline).unwrap(), slung.basis(RomVariant::Baseline).unwrap()],
        ]
    });
    match variant {
        RomVariant::Proposed => all[0].clone(),
        RomVariant::Baseline => all[1].clone(),
    }
}
