//! Release test: a horizontal cable at rest while the vehicle performs a
//! rest-to-rest lateral translation. Used to compare reduced models with the
//! full model in accuracy, cost and admissible step size.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cable::{FullState, TopInput};
use crate::error::{Error, Result};
use crate::metrics::{cable_error, time_rms, Table};
use crate::params::{CableParams, Mode, Vec3};
use crate::rom::{PodBasis, ReducedModel, RomVariant};
use crate::sim::{make_quintic_spline, rk4_step_with, QuinticSpline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReleaseConfig {
    pub duration: f64,
    /// Vehicle displacement of the rest-to-rest manoeuvre.
    pub displacement: Vec3,
    pub move_time: f64,
    pub fdm_dt: f64,
    pub rom_dt: f64,
    pub sample_dt: f64,
    /// Proposed-model orders to evaluate; the baseline uses one more mode.
    pub orders: Vec<usize>,
    pub bisection_iters: usize,
    /// A run counts as unstable once any node strays this many cable lengths
    /// from the vehicle.
    pub blowup_lengths: f64,
}

impl Default for ReleaseConfig {
    fn default() -> Self {
        Self {
            duration: 3.0,
            displacement: Vec3::new(0.0, 1.0, 0.0),
            move_time: 1.0,
            fdm_dt: 5e-4,
            rom_dt: 5e-3,
            sample_dt: 1e-2,
            orders: vec![1, 2, 3, 4],
            bisection_iters: 24,
            blowup_lengths: 5.0,
        }
    }
}

impl ReleaseConfig {
    pub fn path(&self) -> Result<QuinticSpline> {
        make_quintic_spline(vec![(0.0, Vec3::zeros()), (self.move_time, self.displacement)])
    }

    fn stride(&self, dt: f64) -> Result<usize> {
        let k = (self.sample_dt / dt).round();
        if k < 1.0 || (k * dt - self.sample_dt).abs() > 1e-9 * self.sample_dt {
            return Err(Error::Config(format!("sample step {} is not a multiple of {dt}", self.sample_dt)));
        }
        Ok(k as usize)
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.sample_dt).round() as usize + 1
    }
}

/// Straight horizontal cable along `+x` at rest, unstretched.
pub fn release_initial_state(params: &CableParams, mode: Mode) -> FullState {
    FullState::straight(Vec3::zeros(), Vec3::x(), 1.0, params, mode)
}

/// Sampled node positions and velocities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledRun {
    pub times: Vec<f64>,
    pub pos: Vec<Vec<Vec3>>,
    pub vel: Vec<Vec<Vec3>>,
}

impl SampledRun {
    fn push(&mut self, t: f64, pos: Vec<Vec3>, vel: Vec<Vec3>) {
        self.times.push(t);
        self.pos.push(pos);
        self.vel.push(vel);
    }
}

fn bounded(pos: &[Vec3], limit: f64) -> bool {
    pos.iter().all(|p| p.iter().all(|x| x.is_finite()) && (p - pos[0]).norm() <= limit)
}

/// Full-model release run with step `dt`, sampled every `sample_dt`.
pub fn fdm_release(params: &CableParams, mode: Mode, cfg: &ReleaseConfig, dt: f64) -> Result<SampledRun> {
    let stride = cfg.stride(dt)?;
    let path = cfg.path()?;
    let input = |t: f64| TopInput::Acceleration(path.sample(t).2);
    let mut state = release_initial_state(params, mode);
    let mut out = SampledRun::default();
    out.push(0.0, state.r.clone(), state.r_t.clone());
    let steps = (cfg.samples() - 1) * stride;
    for k in 0..steps {
        state = rk4_step_with(&state, k as f64 * dt, dt, params, &input)?;
        if (k + 1) % stride == 0 {
            out.push((k + 1) as f64 * dt, state.r.clone(), state.r_t.clone());
        }
    }
    Ok(out)
}

/// Reduced-model release run; samples are coarse-node reconstructions.
pub fn rom_release(model: &ReducedModel, cfg: &ReleaseConfig, dt: f64) -> Result<SampledRun> {
    let stride = cfg.stride(dt)?;
    let path = cfg.path()?;
    let accel = |t: f64| path.sample(t).2;
    let init = release_initial_state(&model.params, model.mode());
    let mut z = model.project_full(&init)?.z;
    let mut out = SampledRun::default();
    let (p, v) = model.nodes(&z);
    out.push(0.0, p, v);
    let steps = (cfg.samples() - 1) * stride;
    for k in 0..steps {
        z = model.rk4_step_varying(&z, k as f64 * dt, dt, &accel)?;
        if (k + 1) % stride == 0 {
            let (p, v) = model.nodes(&z);
            out.push((k + 1) as f64 * dt, p, v);
        }
    }
    Ok(out)
}

/// Time-RMS cable errors in position and velocity of a reduced run against
/// the full reference.
pub fn release_errors(fdm: &SampledRun, rom: &SampledRun) -> Result<(f64, f64)> {
    if fdm.times.len() != rom.times.len() {
        return Err(Error::GridMismatch("runs have different sample counts".into()));
    }
    let mut ep = Vec::with_capacity(fdm.times.len());
    let mut ev = Vec::with_capacity(fdm.times.len());
    for k in 0..fdm.times.len() {
        ep.push(cable_error(&fdm.pos[k], &rom.pos[k])?);
        ev.push(cable_error(&fdm.vel[k], &rom.vel[k])?);
    }
    Ok((time_rms(&ep), time_rms(&ev)))
}

/// Largest step in `[lo, hi]` for which `stable` holds, by geometric
/// bisection. Assumes `stable(lo)`; returns `hi` if that is stable too.
pub fn max_stable_step(lo: f64, hi: f64, iters: usize, stable: impl Fn(f64) -> bool) -> f64 {
    if stable(hi) {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iters {
        let mid = (a * b).sqrt();
        if stable(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    a
}

fn integrate_until(duration: f64, dt: f64, mut step: impl FnMut(f64) -> Result<bool>) -> bool {
    let steps = (duration / dt).ceil() as usize;
    for k in 0..steps {
        match step(k as f64 * dt) {
            Ok(true) => {}
            _ => return false,
        }
    }
    true
}

/// Whether the full model stays bounded on the release test at step `dt`.
pub fn fdm_stable(params: &CableParams, mode: Mode, cfg: &ReleaseConfig, dt: f64) -> bool {
    let Ok(path) = cfg.path() else { return false };
    let input = |t: f64| TopInput::Acceleration(path.sample(t).2);
    let mut state = release_initial_state(params, mode);
    let limit = cfg.blowup_lengths * params.length;
    integrate_until(cfg.duration, dt, |t| {
        state = rk4_step_with(&state, t, dt, params, &input)?;
        Ok(bounded(&state.r, limit))
    })
}

/// Whether the reduced model stays bounded on the release test at step `dt`.
pub fn rom_stable(model: &ReducedModel, cfg: &ReleaseConfig, dt: f64) -> bool {
    let Ok(path) = cfg.path() else { return false };
    let accel = |t: f64| path.sample(t).2;
    let init = release_initial_state(&model.params, model.mode());
    let Ok(rs) = model.project_full(&init) else { return false };
    let mut z = rs.z;
    let limit = cfg.blowup_lengths * model.params.length;
    integrate_until(cfg.duration, dt, |t| {
        z = model.rk4_step_varying(&z, t, dt, &accel)?;
        Ok(bounded(&model.nodes(&z).0, limit))
    })
}

/// One row of the reduced-model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomEvalRow {
    pub variant: RomVariant,
    pub mode: Mode,
    /// Number of modal coordinate blocks.
    pub order: usize,
    pub state_dim: usize,
    pub eps_p_rms: f64,
    pub eps_v_rms: f64,
    pub max_stable_dt: f64,
    /// Wall time of one release run at `rom_dt` (machine dependent).
    pub wall_ms: f64,
}

/// Bases for one mode, one per variant.
#[derive(Debug, Clone)]
pub struct ModeBases {
    pub mode: Mode,
    pub proposed: PodBasis,
    pub baseline: PodBasis,
}

/// Results of the full release-test study.
#[derive(Debug, Clone, PartialEq)]
pub struct RomEvaluation {
    pub rows: Vec<RomEvalRow>,
    /// Largest stable full-model step per mode.
    pub fdm_max_dt: Vec<(Mode, f64)>,
}

impl RomEvaluation {
    pub fn row(&self, variant: RomVariant, mode: Mode, order: usize) -> Option<&RomEvalRow> {
        self.rows.iter().find(|r| r.variant == variant && r.mode == mode && r.order == order)
    }

    pub fn fdm_max_dt(&self, mode: Mode) -> Option<f64> {
        self.fdm_max_dt.iter().find(|(m, _)| *m == mode).map(|(_, d)| *d)
    }

    /// Accuracy and stability table; deterministic.
    pub fn accuracy_table(&self) -> Table {
        let mut t = Table::new(["variant", "mode", "R", "state_dim", "eps_p_rms", "eps_v_rms", "max_stable_dt"]);
        for r in &self.rows {
            let variant = match r.variant {
                RomVariant::Proposed => 0.0,
                RomVariant::Baseline => 1.0,
            };
            t.push(vec![
                variant,
                r.mode.index() as f64,
                r.order as f64,
                r.state_dim as f64,
                r.eps_p_rms,
                r.eps_v_rms,
                r.max_stable_dt,
            ])
            .expect("row width matches header");
        }
        t
    }

    /// Wall-time table, kept apart because it varies between runs.
    pub fn timing_table(&self) -> Table {
        let mut t = Table::new(["variant", "mode", "R", "wall_ms"]);
        for r in &self.rows {
            let variant = if r.variant == RomVariant::Proposed { 0.0 } else { 1.0 };
            t.push(vec![variant, r.mode.index() as f64, r.order as f64, r.wall_ms]).expect("row width matches header");
        }
        t
    }

    pub fn fdm_table(&self) -> Table {
        let mut t = Table::new(["mode", "max_stable_dt"]);
        for (m, d) in &self.fdm_max_dt {
            t.push(vec![m.index() as f64, *d]).expect("row width matches header");
        }
        t
    }
}

fn eval_one(
    params: &CableParams,
    cfg: &ReleaseConfig,
    basis: &PodBasis,
    order: usize,
    fdm: &SampledRun,
) -> Result<RomEvalRow> {
    let model = ReducedModel::new(basis.truncated(order)?, params.clone())?;
    let rom = rom_release(&model, cfg, cfg.rom_dt)?;
    let (eps_p_rms, eps_v_rms) = release_errors(fdm, &rom)?;
    let max_stable_dt = max_stable_step(1e-4, 0.2, cfg.bisection_iters, |dt| rom_stable(&model, cfg, dt));
    Ok(RomEvalRow {
        variant: basis.variant,
        mode: basis.mode_tag,
        order,
        state_dim: model.dim(),
        eps_p_rms,
        eps_v_rms,
        max_stable_dt,
        wall_ms: 0.0,
    })
}

/// Times one reduced release run, repeating short runs to reach a stable mean.
fn time_rom(params: &CableParams, cfg: &ReleaseConfig, basis: &PodBasis, order: usize) -> Result<f64> {
    let model = ReducedModel::new(basis.truncated(order)?, params.clone())?;
    let mut reps = 0u32;
    let start = Instant::now();
    while reps < 3 || start.elapsed().as_secs_f64() < 0.2 {
        rom_release(&model, cfg, cfg.rom_dt)?;
        reps += 1;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / reps as f64)
}

/// Runs the release study for every mode and order. The proposed model of
/// order `R` is compared with the baseline of order `R + 1`, which has the
/// same state dimension.
pub fn evaluate_roms(params: &CableParams, cfg: &ReleaseConfig, bases: &[ModeBases]) -> Result<RomEvaluation> {
    let fdm: Vec<(Mode, SampledRun, f64)> = bases
        .par_iter()
        .map(|b| -> Result<(Mode, SampledRun, f64)> {
            let run = fdm_release(params, b.mode, cfg, cfg.fdm_dt)?;
            let dt = max_stable_step(1e-5, 0.2, cfg.bisection_iters, |dt| fdm_stable(params, b.mode, cfg, dt));
            Ok((b.mode, run, dt))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (b, (_, run, _)) in bases.iter().zip(&fdm) {
        for &r in &cfg.orders {
            jobs.push((&b.proposed, r, run));
            jobs.push((&b.baseline, r + 1, run));
        }
    }
    let mut rows = jobs
        .par_iter()
        .map(|(basis, r, run)| eval_one(params, cfg, basis, *r, run))
        .collect::<Result<Vec<_>>>()?;
    for (row, (basis, r, _)) in rows.iter_mut().zip(&jobs) {
        row.wall_ms = time_rom(params, cfg, basis, *r)?;
    }
    Ok(RomEvaluation { rows, fdm_max_dt: fdm.into_iter().map(|(m, _, d)| (m, d)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_threshold() {
        let dt = max_stable_step(1e-4, 1.0, 40, |x| x < 0.0123);
        assert!((dt - 0.0123).abs() < 1e-6);
        assert_eq!(max_stable_step(1e-4, 1.0, 5, |_| true), 1.0);
    }

    #[test]
    fn fdm_release_is_sampled_on_the_common_grid() {
        let cfg = ReleaseConfig { duration: 0.05, ..Default::default() };
        let run = fdm_release(&CableParams::default(), Mode::FreeTip, &cfg, cfg.fdm_dt).unwrap();
        assert_eq!(run.times.len(), 6);
        assert!((run.times[5] - 0.05).abs() < 1e-12);
        assert!(matches!(fdm_release(&CableParams::default(), Mode::FreeTip, &cfg, 3e-3), Err(Error::Config(_))));
    }
}
