//! Snapshot collection from excited full-model runs.

use serde::{Deserialize, Serialize};

use super::basis::{extract_basis, snapshot_field, PodBasis, RomVariant, SnapshotTensor};
use super::reduced::decimate;
use crate::cable::{FullState, TopInput};
use crate::error::{Error, Result};
use crate::params::{CableParams, Mode, Vec3};
use crate::sim::rk4_step_with;

/// Excitation and sampling of a training run. The vehicle follows
/// `start + amplitude * (1 - cos(2 pi f_k t))` on each axis `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub duration: f64,
    pub amplitude: f64,
    pub frequencies: [f64; 3],
    /// Number of snapshot intervals `O`; `O + 1` snapshots are stored.
    pub snapshot_intervals: usize,
    pub decimation: usize,
    pub dt: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            duration: 10.0,
            amplitude: 0.5,
            frequencies: [0.4, 0.5, 0.6],
            snapshot_intervals: 50,
            decimation: 10,
            dt: 5e-4,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self, params: &CableParams) -> Result<()> {
        if !(self.duration > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("training duration and step must be positive".into()));
        }
        if self.decimation == 0 || params.divisions % self.decimation != 0 {
            return Err(Error::Config(format!(
                "decimation {} must divide {} divisions",
                self.decimation, params.divisions
            )));
        }
        if self.snapshot_intervals == 0 {
            return Err(Error::Config("need at least one snapshot interval".into()));
        }
        let steps = self.steps();
        if steps % self.snapshot_intervals != 0 {
            return Err(Error::Config(format!(
                "{steps} integration steps are not divisible into {} snapshot intervals",
                self.snapshot_intervals
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn coarse_intervals(&self, params: &CableParams) -> usize {
        params.divisions / self.decimation
    }

    /// Vehicle acceleration at time `t`.
    pub fn vehicle_accel(&self, t: f64) -> Vec3 {
        let tau = std::f64::consts::TAU;
        Vec3::from_fn(|k, _| {
            let w = tau * self.frequencies[k];
            self.amplitude * w * w * (w * t).cos()
        })
    }
}

/// Coarse-grid node positions recorded during a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub coarse: Vec<Vec<Vec3>>,
    pub decimation: usize,
    pub h_d: f64,
}

impl TrainingRun {
    pub fn tensor(&self, variant: RomVariant) -> SnapshotTensor {
        let m = self.coarse[0].len() - 1;
        SnapshotTensor {
            data: self.coarse.iter().map(|c| snapshot_field(c, variant)).collect(),
            grid: (0..=m).map(|j| j * self.decimation).collect(),
            times: self.times.clone(),
            h_d: self.h_d,
            variant,
            mode: self.mode,
        }
    }

    pub fn basis(&self, variant: RomVariant) -> Result<PodBasis> {
        extract_basis(&self.tensor(variant))
    }
}

/// Runs the excitation from a static hang in `mode` and samples the cable.
pub fn run_training(params: &CableParams, mode: Mode, cfg: &TrainingConfig) -> Result<TrainingRun> {
    params.validate()?;
    cfg.validate(params)?;
    let m = cfg.coarse_intervals(params);
    let mut state = FullState::hanging(Vec3::zeros(), params, mode);
    let stride = cfg.steps() / cfg.snapshot_intervals;
    let mut times = Vec::with_capacity(cfg.snapshot_intervals + 1);
    let mut coarse = Vec::with_capacity(cfg.snapshot_intervals + 1);
    let mut record = |s: &FullState, t: f64| -> Result<()> {
        times.push(t);
        coarse.push(decimate(s, cfg.decimation, m)?.0);
        Ok(())
    };
    record(&state, 0.0)?;
    let input = |t: f64| TopInput::Acceleration(cfg.vehicle_accel(t));
    for k in 0..cfg.steps() {
        let t = k as f64 * cfg.dt;
        state = rk4_step_with(&state, t, cfg.dt, params, &input)?;
        if (k + 1) % stride == 0 {
            record(&state, (k + 1) as f64 * cfg.dt)?;
        }
    }
    Ok(TrainingRun { mode, times, coarse, decimation: cfg.decimation, h_d: params.grid_step() * cfg.decimation as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vehicle_path_starts_at_rest_with_matching_acceleration() {
        let cfg = TrainingConfig::default();
        let a0 = cfg.vehicle_accel(0.0);
        let tau = std::f64::consts::TAU;
        assert!((a0.x - 0.5 * (tau * 0.4).powi(2)).abs() < 1e-12);
        assert!((a0.z - 0.5 * (tau * 0.6).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn short_training_run_yields_a_valid_basis() {
        let params = CableParams::default();
        let cfg = TrainingConfig { duration: 1.0, snapshot_intervals: 10, ..Default::default() };
        let run = run_training(&params, Mode::FreeTip, &cfg).unwrap();
        assert_eq!(run.times.len(), 11);
        assert!((run.times[10] - 1.0).abs() < 1e-12);
        let basis = run.basis(RomVariant::Proposed).unwrap();
        basis.check_invariants(1e-10).unwrap();
        assert!(basis.order() <= 9);
    }

    #[test]
    fn indivisible_sampling_is_rejected() {
        let cfg = TrainingConfig { snapshot_intervals: 7, ..Default::default() };
        assert!(cfg.validate(&CableParams::default()).is_err());
    }
}
