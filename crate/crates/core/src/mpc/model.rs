//! Hybrid internal model: reduced dynamics per mode, guards and transitions.

use nalgebra::{DMatrix, DVector};

use crate::cable::tip_lump_mass;
use crate::error::{Error, Result};
use crate::params::{CableParams, Mode, Vec3};
use crate::rom::{PodBasis, ReducedModel};
use crate::sim::{Guard, GuardKind};

/// Reduced models for both modes plus the transition logic between them.
#[derive(Debug, Clone)]
pub struct InternalModel {
    models: [ReducedModel; 2],
    pub dt: f64,
    /// RK4 steps per control interval.
    pub substeps: usize,
    /// Guards as declared by the scenario. The payload of an attach guard is
    /// assumed to rest at the guard center.
    pub guards: Vec<Guard>,
    node_maps: [DMatrix<f64>; 2],
    tip_maps: [DMatrix<f64>; 2],
    /// `transfer[q]` maps coordinates of the other mode into mode `q`.
    transfer: [DMatrix<f64>; 2],
    /// Attach: transfer into the slung basis followed by the tip impact.
    attach_map: DMatrix<f64>,
}

/// Discrete transition found after a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub kind: GuardKind,
    pub guard: usize,
}

impl InternalModel {
    pub fn new(free: PodBasis, slung: PodBasis, params: CableParams, dt: f64, substeps: usize, guards: Vec<Guard>) -> Result<Self> {
        if free.mode_tag != Mode::FreeTip || slung.mode_tag != Mode::Slung {
            return Err(Error::Config("bases must be tagged free-tip and slung".into()));
        }
        if free.variant != slung.variant || free.order() != slung.order() || free.intervals() != slung.intervals() {
            return Err(Error::GridMismatch("mode bases must share variant, order and grid".into()));
        }
        if !(dt > 0.0) || substeps == 0 {
            return Err(Error::Config("internal step and substep count must be positive".into()));
        }
        for g in &guards {
            g.validate()?;
        }
        let m0 = ReducedModel::new(free, params.clone())?;
        let m1 = ReducedModel::new(slung, params.clone())?;
        let transfer = [m0.transfer_from(&m1)?, m1.transfer_from(&m0)?];
        let m = m1.intervals();
        let lump = tip_lump_mass(&params, m1.h_d());
        let mut scale = vec![1.0; m + 1];
        // impact with a payload at rest
        scale[m] = 1.0 / (1.0 + params.payload_mass / lump);
        let attach_map = m1.velocity_scaling(&scale) * &transfer[1];
        Ok(Self {
            node_maps: [m0.node_map(), m1.node_map()],
            tip_maps: [m0.tip_map(), m1.tip_map()],
            models: [m0, m1],
            dt,
            substeps,
            guards,
            transfer,
            attach_map,
        })
    }

    pub fn model(&self, mode: Mode) -> &ReducedModel {
        &self.models[mode.index()]
    }

    pub fn params(&self) -> &CableParams {
        &self.models[0].params
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    /// Number of coarse intervals.
    pub fn intervals(&self) -> usize {
        self.models[0].intervals()
    }

    /// `6 (M + 1) x dim` map from reduced state to coarse node positions and
    /// velocities in `mode`.
    pub fn node_map(&self, mode: Mode) -> &DMatrix<f64> {
        &self.node_maps[mode.index()]
    }

    pub fn tip(&self, mode: Mode, z: &DVector<f64>) -> Vec3 {
        let p = &self.tip_maps[mode.index()] * z;
        Vec3::new(p[0], p[1], p[2])
    }

    /// Coordinates of `z` (expressed in mode `from`) in the basis of mode `to`.
    pub fn convert(&self, from: Mode, to: Mode, z: &DVector<f64>) -> DVector<f64> {
        if from == to {
            z.clone()
        } else {
            &self.transfer[to.index()] * z
        }
    }

    /// Reset map and its (constant) Jacobian.
    pub fn reset_map(&self, kind: GuardKind) -> &DMatrix<f64> {
        match kind {
            GuardKind::Attach => &self.attach_map,
            GuardKind::Detach => &self.transfer[0],
        }
    }

    /// Enabled transition for a state reached at time `t`, if any.
    pub fn check_guards(&self, mode: Mode, z: &DVector<f64>, t: f64) -> Option<Transition> {
        let tip = self.tip(mode, z);
        self.guards.iter().enumerate().find_map(|(i, g)| {
            let enabled = match (g.kind, mode) {
                (GuardKind::Attach, Mode::FreeTip) | (GuardKind::Detach, Mode::Slung) => true,
                _ => false,
            };
            (enabled && t >= g.armed_after && (tip - g.center).norm() <= g.radius).then_some(Transition { kind: g.kind, guard: i })
        })
    }

    /// One control interval without event handling.
    pub fn flow(&self, mode: Mode, z: &DVector<f64>, v: &Vec3) -> Result<DVector<f64>> {
        let model = self.model(mode);
        let h = self.dt / self.substeps as f64;
        let mut x = z.clone();
        for _ in 0..self.substeps {
            x = model.rk4_step(&x, v, h)?;
        }
        Ok(x)
    }

    /// One control interval with the Jacobians of the discrete flow.
    pub fn flow_jacobian(&self, mode: Mode, z: &DVector<f64>, v: &Vec3) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let model = self.model(mode);
        let h = self.dt / self.substeps as f64;
        let (mut x, mut a, mut b) = model.rk4_step_jacobian(z, v, h)?;
        for _ in 1..self.substeps {
            let (x2, a2, b2) = model.rk4_step_jacobian(&x, v, h)?;
            b = &a2 * b + b2;
            a = a2 * a;
            x = x2;
        }
        Ok((x, a, b))
    }

    /// Successor of `(mode, z)` under `v` over one interval ending at `t_end`,
    /// with at most one transition.
    pub fn step(&self, mode: Mode, z: &DVector<f64>, v: &Vec3, t_end: f64) -> Result<(Mode, DVector<f64>, Option<Transition>)> {
        let x = self.flow(mode, z, v)?;
        Ok(self.apply_guards(mode, x, t_end))
    }

    fn apply_guards(&self, mode: Mode, x: DVector<f64>, t_end: f64) -> (Mode, DVector<f64>, Option<Transition>) {
        match self.check_guards(mode, &x, t_end) {
            Some(tr) => {
                let next = match tr.kind {
                    GuardKind::Attach => Mode::Slung,
                    GuardKind::Detach => Mode::FreeTip,
                };
                (next, self.reset_map(tr.kind) * x, Some(tr))
            }
            None => (mode, x, None),
        }
    }

    /// Like [`InternalModel::step`] and also returns the Jacobians of the
    /// hybrid successor map, the reset Jacobian included.
    #[allow(clippy::type_complexity)]
    pub fn step_jacobian(
        &self,
        mode: Mode,
        z: &DVector<f64>,
        v: &Vec3,
        t_end: f64,
    ) -> Result<(Mode, DVector<f64>, Option<Transition>, DMatrix<f64>, DMatrix<f64>)> {
        let (x, a, b) = self.flow_jacobian(mode, z, v)?;
        let (next, x, tr) = self.apply_guards(mode, x, t_end);
        match tr {
            Some(t) => {
                let r = self.reset_map(t.kind);
                Ok((next, x, tr, r * a, r * b))
            }
            None => Ok((next, x, tr, a, b)),
        }
    }
}

/// States, modes and transitions of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<DVector<f64>>,
    pub modes: Vec<Mode>,
    /// Step index and transition for every event.
    pub events: Vec<(usize, Transition)>,
}

/// Rollout plus the linearisation along it.
#[derive(Debug, Clone)]
pub struct LinearRollout {
    pub rollout: Rollout,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
}

/// Applies `controls` from `(mode, z0)` at time `t0`.
pub fn rollout(model: &InternalModel, t0: f64, mode: Mode, z0: &DVector<f64>, controls: &[Vec3]) -> Result<Rollout> {
    let mut out = Rollout { states: vec![z0.clone()], modes: vec![mode], events: Vec::new() };
    let (mut q, mut z) = (mode, z0.clone());
    for (k, v) in controls.iter().enumerate() {
        let (q2, z2, tr) = model.step(q, &z, v, t0 + (k + 1) as f64 * model.dt)?;
        if let Some(t) = tr {
            out.events.push((k, t));
        }
        out.states.push(z2.clone());
        out.modes.push(q2);
        q = q2;
        z = z2;
    }
    Ok(out)
}

/// Rollout that also records the per-step Jacobians.
pub fn rollout_linearized(model: &InternalModel, t0: f64, mode: Mode, z0: &DVector<f64>, controls: &[Vec3]) -> Result<LinearRollout> {
    let mut out = Rollout { states: vec![z0.clone()], modes: vec![mode], events: Vec::new() };
    let mut a = Vec::with_capacity(controls.len());
    let mut b = Vec::with_capacity(controls.len());
    let (mut q, mut z) = (mode, z0.clone());
    for (k, v) in controls.iter().enumerate() {
        let (q2, z2, tr, ak, bk) = model.step_jacobian(q, &z, v, t0 + (k + 1) as f64 * model.dt)?;
        if let Some(t) = tr {
            out.events.push((k, t));
        }
        a.push(ak);
        b.push(bk);
        out.states.push(z2.clone());
        out.modes.push(q2);
        q = q2;
        z = z2;
    }
    Ok(LinearRollout { rollout: out, a, b })
}
