//! Hybrid iterative LQR and its real-time-iteration variant.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX};
use serde::{Deserialize, Serialize};

use super::cost::CostModel;
use super::model::{rollout, rollout_linearized, InternalModel, LinearRollout, Rollout};
use crate::error::{Error, Result};
use crate::params::{Mode, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverVariant {
    #[default]
    Hilqr,
    Rti,
}

impl SolverVariant {
    pub fn name(self) -> &'static str {
        match self {
            SolverVariant::Hilqr => "hilqr",
            SolverVariant::Rti => "rti",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub variant: SolverVariant,
    pub max_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Stop once an accepted step decreases the cost by less than this
    /// fraction.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: SolverVariant::Hilqr,
            max_iters: 20,
            backtrack: 0.5,
            min_step: 1e-3,
            lambda_init: 1e-4,
            lambda_up: 10.0,
            lambda_down: 0.5,
            lambda_min: 1e-9,
            lambda_max: 1e6,
            rel_tol: 1e-4,
            abs_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn rti() -> Self {
        Self { variant: SolverVariant::Rti, ..Self::default() }.normalized()
    }

    /// The RTI variant always runs a single unregularised iteration.
    pub fn normalized(mut self) -> Self {
        if self.variant == SolverVariant::Rti {
            self.max_iters = 1;
            self.lambda_init = 0.0;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && self.min_step > 0.0
            && self.min_step <= 1.0
            && self.lambda_up > 1.0
            && self.lambda_down > 0.0
            && self.lambda_down < 1.0
            && self.lambda_init >= 0.0
            && self.lambda_max >= self.lambda_init
            && self.rel_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("inconsistent solver configuration".into()))
        }
    }
}

/// Reference over one horizon, expressed at the node level.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonReference {
    /// `H + 1` node-space targets `[positions; velocities]`.
    pub nodes: Vec<DVector<f64>>,
    /// `H` input targets.
    pub inputs: Vec<Vec3>,
    /// Scheduled modes, `H + 1` entries.
    pub modes: Vec<Mode>,
    /// Extra tip position weights, `H + 1` entries or empty for none.
    pub tip_weights: Vec<f64>,
}

impl HorizonReference {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn tip_weight(&self, k: usize) -> f64 {
        self.tip_weights.get(k).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// No step with lower cost was found at the largest regularisation.
    Stalled,
    Failed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub backward_sweeps: usize,
    pub forward_sweeps: usize,
    pub cost_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub controls: Vec<Vec3>,
    pub rollout: Rollout,
    pub cost: f64,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Total cost of a rollout.
pub fn trajectory_cost(model: &InternalModel, cost: &CostModel, r: &Rollout, controls: &[Vec3], reference: &HorizonReference) -> f64 {
    let h = controls.len();
    let mut j = 0.0;
    for k in 0..h {
        j += cost.stage(model, r.modes[k], &r.states[k], &reference.nodes[k], &controls[k], &reference.inputs[k], reference.tip_weight(k));
    }
    j + cost.terminal(model, r.modes[h], &r.states[h], &reference.nodes[h], reference.tip_weight(h))
}

struct Gains {
    ff: Vec<Vec3>,
    fb: Vec<Matrix3xX<f64>>,
    expected: f64,
}

/// Riccati sweep; `None` when the input Hessian is not positive definite.
fn backward(model: &InternalModel, cost: &CostModel, lin: &LinearRollout, controls: &[Vec3], reference: &HorizonReference, lambda: f64) -> Option<Gains> {
    let h = controls.len();
    let r = &lin.rollout;
    let term = cost.terminal_expansion(model, r.modes[h], &r.states[h], &reference.nodes[h], reference.tip_weight(h));
    let mut vx = term.lx;
    let mut vxx = term.lxx;
    let mut ff = vec![Vec3::zeros(); h];
    let mut fb = vec![Matrix3xX::zeros(model.dim()); h];
    let mut expected = 0.0;
    for k in (0..h).rev() {
        let l = cost.stage_expansion(model, r.modes[k], &r.states[k], &reference.nodes[k], &controls[k], &reference.inputs[k], reference.tip_weight(k));
        let (a, b) = (&lin.a[k], &lin.b[k]);
        let bt_vxx = b.transpose() * &vxx;
        let qx = &l.lx + a.transpose() * &vx;
        let qu: Vec3 = l.lu + Vec3::from_iterator((b.transpose() * &vx).iter().copied());
        let qxx = &l.lxx + a.transpose() * &vxx * a;
        let quu_raw = &bt_vxx * b;
        let quu: Matrix3<f64> = l.luu + Matrix3::from_iterator(quu_raw.iter().copied()) + Matrix3::identity() * lambda;
        let qux_d: DMatrix<f64> = &bt_vxx * a;
        let qux = Matrix3xX::from_iterator(model.dim(), qux_d.iter().copied());
        let chol = quu.cholesky()?;
        let kff = -chol.solve(&qu);
        let kfb = -chol.solve(&qux);
        if !kff.iter().all(|x| x.is_finite()) {
            return None;
        }
        expected += kff.dot(&qu);
        // value function update with the regularised gains
        let kt_quu = kfb.transpose() * quu;
        vx = qx + &kt_quu * kff + kfb.transpose() * qu + qux.transpose() * kff;
        let vxx_new = qxx + &kt_quu * &kfb + kfb.transpose() * &qux + qux.transpose() * &kfb;
        vxx = (&vxx_new + vxx_new.transpose()) * 0.5;
        ff[k] = kff;
        fb[k] = kfb;
    }
    Some(Gains { ff, fb, expected })
}

/// Closed-loop forward pass with step `alpha` around the nominal rollout.
fn forward(
    model: &InternalModel,
    t0: f64,
    nominal: &Rollout,
    controls: &[Vec3],
    gains: &Gains,
    alpha: f64,
) -> Result<(Vec<Vec3>, Rollout)> {
    let h = controls.len();
    let mut out = Rollout { states: vec![nominal.states[0].clone()], modes: vec![nominal.modes[0]], events: Vec::new() };
    let mut new_controls = Vec::with_capacity(h);
    for k in 0..h {
        let (q, z) = (out.modes[k], out.states[k].clone());
        let dz: DVector<f64> = model.convert(q, nominal.modes[k], &z) - &nominal.states[k];
        let v = controls[k] + alpha * gains.ff[k] + &gains.fb[k] * dz;
        let (q2, z2, tr) = model.step(q, &z, &v, t0 + (k + 1) as f64 * model.dt)?;
        if let Some(t) = tr {
            out.events.push((k, t));
        }
        new_controls.push(v);
        out.states.push(z2);
        out.modes.push(q2);
    }
    Ok((new_controls, out))
}

/// Solves the horizon problem from `(mode, z0)` at time `t0` starting from
/// the control guess `init`.
pub fn solve(
    model: &InternalModel,
    cost: &CostModel,
    config: &SolverConfig,
    t0: f64,
    mode: Mode,
    z0: &DVector<f64>,
    reference: &HorizonReference,
    init: &[Vec3],
) -> Result<Solution> {
    let start = Instant::now();
    let config = config.clone().normalized();
    config.validate()?;
    let h = reference.horizon();
    if init.len() != h || reference.nodes.len() != h + 1 {
        return Err(Error::Config(format!("horizon mismatch: {} controls for horizon {h}", init.len())));
    }
    let mut stats = SolveStats::default();
    let mut controls = init.to_vec();
    let mut lin = rollout_linearized(model, t0, mode, z0, &controls)?;
    let mut j = trajectory_cost(model, cost, &lin.rollout, &controls, reference);
    if !j.is_finite() {
        return Err(Error::SolverFailure("initial rollout has non-finite cost".into()));
    }
    stats.cost_trace.push(j);
    let mut lambda = config.lambda_init;
    let mut status = SolveStatus::MaxIterations;

    if config.variant == SolverVariant::Rti {
        stats.backward_sweeps += 1;
        let gains = backward(model, cost, &lin, &controls, reference, 0.0)
            .ok_or_else(|| Error::SolverFailure("input Hessian not positive definite".into()))?;
        stats.forward_sweeps += 1;
        let (u, r) = forward(model, t0, &lin.rollout, &controls, &gains, 1.0)?;
        let j_new = trajectory_cost(model, cost, &r, &u, reference);
        if !j_new.is_finite() {
            return Err(Error::SolverFailure("non-finite cost after the sweep".into()));
        }
        stats.iterations = 1;
        stats.cost_trace.push(j_new);
        stats.lambda_trace.push(0.0);
        stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok(Solution { controls: u, rollout: r, cost: j_new, status: SolveStatus::Converged, stats });
    }

    for _ in 0..config.max_iters {
        stats.iterations += 1;
        let gains = loop {
            stats.backward_sweeps += 1;
            match backward(model, cost, &lin, &controls, reference, lambda) {
                Some(g) => break Some(g),
                None => {
                    lambda = (lambda * config.lambda_up).max(config.lambda_min.max(1e-8));
                    if lambda > config.lambda_max {
                        break None;
                    }
                }
            }
        };
        let Some(gains) = gains else {
            status = if stats.cost_trace.len() > 1 { SolveStatus::Stalled } else { SolveStatus::Failed };
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= config.min_step {
            stats.forward_sweeps += 1;
            if let Ok((u, r)) = forward(model, t0, &lin.rollout, &controls, &gains, alpha) {
                let j_new = trajectory_cost(model, cost, &r, &u, reference);
                if j_new.is_finite() && j_new < j {
                    accepted = Some((u, j_new));
                    break;
                }
            }
            alpha *= config.backtrack;
        }
        stats.lambda_trace.push(lambda);
        match accepted {
            Some((u, j_new)) => {
                let decrease = j - j_new;
                controls = u;
                j = j_new;
                stats.cost_trace.push(j);
                lambda = (lambda * config.lambda_down).max(config.lambda_min);
                if lambda <= config.lambda_min {
                    lambda = 0.0;
                }
                lin = rollout_linearized(model, t0, mode, z0, &controls)?;
                if decrease <= config.rel_tol * j.abs() + config.abs_tol {
                    status = SolveStatus::Converged;
                    break;
                }
            }
            None => {
                if gains.expected.abs() <= config.abs_tol + config.rel_tol * j.abs() {
                    status = SolveStatus::Converged;
                    break;
                }
                lambda = (lambda * config.lambda_up).max(1e-6);
                if lambda > config.lambda_max {
                    status = SolveStatus::Stalled;
                    break;
                }
            }
        }
    }
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    if status == SolveStatus::Failed {
        return Err(Error::SolverFailure("input Hessian not positive definite at maximum regularisation".into()));
    }
    let r = lin.rollout;
    Ok(Solution { controls, rollout: r, cost: j, status, stats })
}

/// Shifts a control sequence one interval ahead, repeating the last entry.
pub fn shift_controls(controls: &[Vec3]) -> Vec<Vec3> {
    if controls.is_empty() {
        return Vec::new();
    }
    let mut out = controls[1..].to_vec();
    out.push(*controls.last().expect("non-empty"));
    out
}

/// Rollout of a given control sequence, for diagnostics and warm starts.
pub fn simulate(model: &InternalModel, t0: f64, mode: Mode, z0: &DVector<f64>, controls: &[Vec3]) -> Result<Rollout> {
    rollout(model, t0, mode, z0, controls)
}
