//! Proper orthogonal decomposition of the cable shape and the reduced-order
//! models built on it.

pub mod basis;
pub mod reduced;
pub mod training;

pub use basis::{
    change_basis, extract_basis, mode_energy, reconstruct, reference_segment, PodBasis, RomVariant,
    SnapshotTensor,
};
pub use reduced::{ReducedModel, ReducedState};
