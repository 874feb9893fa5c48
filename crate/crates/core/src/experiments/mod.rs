//! Experiment drivers behind the command-line tool.

pub mod planning;
pub mod release;
pub mod suite;
pub mod tracking;
