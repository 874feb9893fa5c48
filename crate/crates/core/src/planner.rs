//! Segmented obstacle-avoiding planner with barrier homotopy.
//!
//! The horizon is cut at the waypoint times. Each segment is solved with
//! the hybrid iLQR on the reduced model, starting from where the previous
//! segment ended: a weak quasi-static prior along the straight tip path
//! keeps the motion regular, a tip attractor pulls the tip onto the
//! segment's waypoint, and log barriers on every coarse node keep the cable
//! out of the (inflated) obstacles. A static hold is inserted after every
//! waypoint that lies inside a guard. The segment chain is re-solved for a
//! decreasing sequence of barrier weights and finally refined over the full
//! horizon.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{read_json, write_json, Table};
pub use crate::obstacle::obstacle_margin;
use crate::mpc::{solve, CostModel, CostWeights, HorizonReference, InternalModel, SolverConfig, SolverVariant};
use crate::obstacle::{Barrier, Obstacle};
use crate::params::{CableParams, Mode, Vec3};
use crate::reference::{quasi_static_reference, ModeSchedule, QuasiStaticConfig, ReferenceTrajectory};
use crate::rom::PodBasis;
use crate::cable::FullState;
use crate::sim::{make_quintic_spline, Guard, GuardKind};

pub const PLAN_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    /// Static hold inserted after each hybrid transition (s).
    pub cooldown: f64,
    /// Barrier weights per second, strictly decreasing.
    pub homotopy: Vec<f64>,
    pub rom_order: usize,
    pub plan_dt: f64,
    /// Added to every bounded semi-axis of the obstacles while planning (m).
    pub clearance: f64,
    /// Margin below which the barrier is continued quadratically.
    pub barrier_floor: f64,
    /// Margin beyond which obstacles are ignored.
    pub barrier_range: f64,
    /// Weights per second on the prior node positions and velocities.
    pub prior_position: f64,
    pub prior_velocity: f64,
    /// Weights per second on the offsets of the interior nodes from the
    /// chord between the end nodes, and on their rates.
    pub bending: f64,
    pub bending_rate: f64,
    /// Weight per second on the deviation from the prior input.
    pub input: f64,
    /// Tip position weight at every segment end.
    pub attractor: f64,
    pub segment_iters: usize,
    pub refine_iters: usize,
    /// Guard radius used while planning, so that planned transitions happen
    /// close to the guard centres (m).
    pub guard_radius: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            cooldown: 2.0,
            homotopy: vec![1.0, 0.3, 0.1, 0.03, 0.01],
            rom_order: 2,
            plan_dt: 2.5e-3,
            clearance: 0.05,
            barrier_floor: 1e-2,
            barrier_range: 3.0,
            prior_position: 2.0,
            prior_velocity: 0.2,
            bending: 0.0,
            bending_rate: 0.0,
            input: 0.05,
            attractor: 2000.0,
            segment_iters: 60,
            refine_iters: 30,
            guard_radius: 0.02,
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.cooldown < 0.0 || !(self.plan_dt > 0.0) || self.rom_order == 0 || self.homotopy.is_empty() {
            return Err(Error::Config("planner cooldown, step, order and homotopy must be set".into()));
        }
        if self.homotopy.iter().any(|m| !(*m > 0.0)) || self.homotopy.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("homotopy weights must be positive and strictly decreasing".into()));
        }
        let w = [self.clearance, self.barrier_floor, self.barrier_range, self.prior_position, self.prior_velocity, self.bending, self.bending_rate, self.input, self.attractor];
        if w.iter().any(|x| !(*x >= 0.0)) || !(self.input > 0.0) || !(self.barrier_floor > 0.0 && self.barrier_range > self.barrier_floor) {
            return Err(Error::Config("planner weights must be non-negative, floor below the barrier range".into()));
        }
        if !(self.guard_radius > 0.0) {
            return Err(Error::Config("planning guard radius must be positive".into()));
        }
        if self.segment_iters == 0 {
            return Err(Error::Config("segments need at least one solver iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Motion,
    /// Static hold after a transition.
    Cooldown,
}

/// One piece of the planning horizon, in plan steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    /// Tip target at the end of the segment.
    pub target: Vec3,
    /// Mode expected after the segment.
    pub mode_after: Mode,
}

/// Everything the planner needs besides the reduced bases.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSpec {
    pub params: CableParams,
    pub settings: PlannerSettings,
    /// Tip waypoints; the first one is the start.
    pub waypoints: Vec<(f64, Vec3)>,
    pub guards: Vec<Guard>,
    pub obstacles: Vec<Obstacle>,
    /// Fine-grid state at the start of the plan.
    pub initial: FullState,
    pub reference: QuasiStaticConfig,
}

/// Guard of `kind` containing `p`, if any.
fn guard_at(guards: &[Guard], p: &Vec3, kind: GuardKind) -> bool {
    guards.iter().any(|g| g.kind == kind && g.contains(p))
}

impl PlanSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.settings.validate()?;
        if self.waypoints.len() < 2 {
            return Err(Error::Config("planning needs a start and at least one waypoint".into()));
        }
        for w in self.waypoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config("waypoint times must be strictly increasing".into()));
            }
        }
        for g in &self.guards {
            g.validate()?;
        }
        for o in &self.obstacles {
            o.validate()?;
            for (t, p) in [self.waypoints[0], *self.waypoints.last().expect("non-empty")] {
                if o.margin(&p) <= 0.0 {
                    return Err(Error::Config(format!("waypoint at t = {t} s lies inside an obstacle")));
                }
            }
        }
        Ok(())
    }

    /// Obstacles grown by the clearance along their bounded axes.
    pub fn planning_obstacles(&self) -> Vec<Obstacle> {
        self.obstacles.iter().map(|o| o.inflated(self.settings.clearance)).collect()
    }

    /// Motion segments between waypoints, with a cooldown appended after
    /// every waypoint inside a guard; later waypoints are delayed by the
    /// cooldown. Returns the segments, the shifted waypoints and the
    /// expected mode schedule.
    pub fn timeline(&self) -> Result<(Vec<Segment>, Vec<(f64, Vec3)>, ModeSchedule)> {
        let dt = self.settings.plan_dt;
        let step = |t: f64| (t / dt).round() as usize;
        let mut shift = 0.0;
        let mut mode = self.initial.mode;
        let mut schedule = ModeSchedule::constant(mode);
        let mut shifted = vec![self.waypoints[0]];
        let mut segments = Vec::new();
        for w in self.waypoints.windows(2) {
            let (t0, t1) = (w[0].0 + shift, w[1].0 + shift);
            let target = w[1].1;
            let next = match mode {
                Mode::FreeTip if guard_at(&self.guards, &target, GuardKind::Attach) => Mode::Slung,
                Mode::Slung if guard_at(&self.guards, &target, GuardKind::Detach) => Mode::FreeTip,
                m => m,
            };
            segments.push(Segment { kind: SegmentKind::Motion, start: step(t0), end: step(t1), target, mode_after: next });
            shifted.push((t1, target));
            if next != mode {
                schedule.switches.push((t1, next));
                mode = next;
                if self.settings.cooldown > 0.0 {
                    let t2 = t1 + self.settings.cooldown;
                    segments.push(Segment { kind: SegmentKind::Cooldown, start: step(t1), end: step(t2), target, mode_after: next });
                    shifted.push((t2, target));
                    shift += self.settings.cooldown;
                }
            }
        }
        if segments.iter().any(|s| s.end <= s.start) {
            return Err(Error::Config("every segment must span at least one plan step".into()));
        }
        Ok((segments, shifted, schedule))
    }
}

/// Node-space weight `w |D y|^2 + w_rate |D y_t|^2`, where `D` maps the
/// coarse nodes to the offsets of the interior nodes from the chord between
/// the end nodes.
fn bending_weight(m: usize, w: f64, w_rate: f64) -> DMatrix<f64> {
    let n = m + 1;
    let mut d = DMatrix::zeros(3 * (m - 1), 3 * n);
    for j in 1..m {
        let s = j as f64 / m as f64;
        for k in 0..3 {
            let r = 3 * (j - 1) + k;
            d[(r, 3 * j + k)] = 1.0;
            d[(r, k)] = -(1.0 - s);
            d[(r, 3 * m + k)] = -s;
        }
    }
    let dtd = d.transpose() * d;
    let mut out = DMatrix::zeros(6 * n, 6 * n);
    out.view_mut((0, 0), (3 * n, 3 * n)).copy_from(&(&dtd * w));
    out.view_mut((3 * n, 3 * n), (3 * n, 3 * n)).copy_from(&(&dtd * w_rate));
    out
}

/// Report of one homotopy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomotopyLevel {
    pub mu: f64,
    /// Sum over samples, coarse nodes and obstacles of the negative part of
    /// the margin to the planning obstacles.
    pub violation: f64,
    pub accepted: bool,
    pub cost: f64,
}

/// Planned trajectory on the planning grid.
#[derive(Debug, Clone)]
pub struct Plan {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
    pub modes: Vec<Mode>,
    pub controls: Vec<Vec3>,
    pub segments: Vec<Segment>,
    /// Coarse node positions and velocities at every plan step.
    pub nodes: Vec<DVector<f64>>,
    pub levels: Vec<HomotopyLevel>,
    /// Smallest margin of any coarse node to the true obstacles.
    pub min_margin: f64,
    /// Times of the transitions found along the plan.
    pub events: Vec<(f64, GuardKind)>,
}

/// Sum of negative margins and the minimum margin over all node samples.
fn violation_of(nodes: &[DVector<f64>], obstacles: &[Obstacle]) -> (f64, f64) {
    let mut total = 0.0;
    let mut min = f64::INFINITY;
    for y in nodes {
        let n = y.len() / 6;
        for j in 0..n {
            let p = Vec3::new(y[3 * j], y[3 * j + 1], y[3 * j + 2]);
            for o in obstacles {
                let c = o.margin(&p);
                total += (-c).max(0.0);
                min = min.min(c);
            }
        }
    }
    (total, min)
}

struct Workspace<'a> {
    spec: &'a PlanSpec,
    model: InternalModel,
    weights: CostWeights,
    obstacles: Vec<Obstacle>,
    prior: ReferenceTrajectory,
    tip_weights: Vec<f64>,
    solver: SolverConfig,
}

impl Workspace<'_> {
    fn cost(&self, mu: f64) -> Result<CostModel> {
        let mut w = self.weights.clone();
        w.barrier = {
            let st = &self.spec.settings;
            Barrier { mu: mu * st.plan_dt, floor: st.barrier_floor * mu / st.homotopy[0], range: st.barrier_range }
        };
        CostModel::new(&self.model, w, self.obstacles.clone())
    }

    fn window(&self, start: usize, end: usize) -> HorizonReference {
        HorizonReference {
            nodes: self.prior.nodes[start..=end].to_vec(),
            inputs: self.prior.inputs[start..end].to_vec(),
            modes: self.prior.modes[start..=end].to_vec(),
            tip_weights: self.tip_weights[start..=end].to_vec(),
        }
    }

    fn nodes(&self, states: &[DVector<f64>], modes: &[Mode]) -> Vec<DVector<f64>> {
        states.iter().zip(modes).map(|(z, q)| self.model.node_map(*q) * z).collect()
    }

    /// Solves the segments one after the other at barrier weight `mu`.
    fn segment_pass(&self, segments: &[Segment], mu: f64, z0: &DVector<f64>, controls: &[Vec3]) -> Result<(Vec<Vec3>, Vec<DVector<f64>>, Vec<Mode>, f64)> {
        let cost = self.cost(mu)?;
        let mut mode = self.spec.initial.mode;
        let mut z = z0.clone();
        let mut out_u = Vec::with_capacity(controls.len());
        let mut states = vec![z.clone()];
        let mut modes = vec![mode];
        let mut total = 0.0;
        for (i, s) in segments.iter().enumerate() {
            let reference = self.window(s.start, s.end);
            let t0 = s.start as f64 * self.model.dt;
            let sol = solve(&self.model, &cost, &self.solver, t0, mode, &z, &reference, &controls[s.start..s.end])
                .map_err(|e| Error::SolverFailure(format!("segment {i}: {e}")))?;
            total += sol.cost;
            out_u.extend_from_slice(&sol.controls);
            states.extend(sol.rollout.states[1..].iter().cloned());
            modes.extend_from_slice(&sol.rollout.modes[1..]);
            z = sol.rollout.states.last().expect("non-empty").clone();
            mode = *sol.rollout.modes.last().expect("non-empty");
        }
        Ok((out_u, states, modes, total))
    }
}

/// Plans a trajectory for `spec` with the reduced bases of both modes and
/// rejects it if any coarse node touches an obstacle.
pub fn plan(spec: &PlanSpec, bases: &[PodBasis; 2]) -> Result<Plan> {
    let plan = optimize(spec, bases)?;
    if plan.min_margin <= 0.0 {
        let (segment, violation) = plan
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (i, violation_of(&plan.nodes[s.start..=s.end], &spec.obstacles).1))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        return Err(Error::PlanningFailure { segment, violation: -violation });
    }
    Ok(plan)
}

/// Runs the homotopy and the refinement without the final feasibility check.
pub fn optimize(spec: &PlanSpec, bases: &[PodBasis; 2]) -> Result<Plan> {
    spec.validate()?;
    let st = &spec.settings;
    let free = bases[0].truncated(st.rom_order)?;
    let slung = bases[1].truncated(st.rom_order)?;
    let guards = spec.guards.iter().map(|g| Guard { radius: st.guard_radius.min(g.radius), ..g.clone() }).collect();
    let model = InternalModel::new(free, slung, spec.params.clone(), st.plan_dt, 1, guards)?;
    let m = model.intervals();
    let (segments, waypoints, schedule) = spec.timeline()?;
    let horizon = segments.last().expect("non-empty").end;

    let path = make_quintic_spline(waypoints)?;
    let tip = |t: f64| path.sample(t);
    let duration = horizon as f64 * st.plan_dt;
    let cfg = QuasiStaticConfig { diff_step: st.plan_dt / (st.plan_dt / spec.reference.diff_step).ceil(), ..spec.reference.clone() };
    let prior = quasi_static_reference(&tip, &schedule, &spec.params, m, st.plan_dt, duration, &cfg)?;
    let mut tip_weights = vec![0.0; horizon + 1];
    for s in &segments {
        tip_weights[s.end] = st.attractor;
    }

    let n = 6 * (m + 1);
    let diag = DVector::from_fn(n, |i, _| if i < 3 * (m + 1) { st.prior_position } else { st.prior_velocity } * st.plan_dt);
    let stage = DMatrix::from_diagonal(&diag) + bending_weight(m, st.bending * st.plan_dt, st.bending_rate * st.plan_dt);
    let weights = CostWeights {
        terminal: stage.clone(),
        stage,
        input: nalgebra::Matrix3::identity() * (st.input * st.plan_dt),
        barrier: Barrier { mu: st.homotopy[0] * st.plan_dt, floor: st.barrier_floor, range: st.barrier_range },
    };
    weights.validate()?;
    let solver = SolverConfig { variant: SolverVariant::Hilqr, max_iters: st.segment_iters, ..SolverConfig::default() };
    let ws = Workspace { spec, model, weights, obstacles: spec.planning_obstacles(), prior, tip_weights, solver };

    let initial = ws.model.model(spec.initial.mode).project_full(&spec.initial)?.z;

    let mut controls = ws.prior.inputs[..horizon].to_vec();
    let mut best: Option<(Vec<Vec3>, Vec<DVector<f64>>, Vec<Mode>)> = None;
    let mut best_violation = f64::INFINITY;
    let mut levels = Vec::new();
    for &mu in &st.homotopy {
        let (u, states, modes, cost) = ws.segment_pass(&segments, mu, &initial, &controls)?;
        let (violation, _) = violation_of(&ws.nodes(&states, &modes), &ws.obstacles);
        let accepted = violation <= best_violation;
        levels.push(HomotopyLevel { mu, violation, accepted, cost });
        if accepted {
            best_violation = violation;
            controls = u.clone();
            best = Some((u, states, modes));
        }
    }
    let (mut controls, mut states, mut modes) = best.expect("at least one homotopy level");

    if st.refine_iters > 0 {
        let mu = *st.homotopy.last().expect("non-empty");
        let cost = ws.cost(mu)?;
        let cfg = SolverConfig { max_iters: st.refine_iters, ..ws.solver.clone() };
        let reference = ws.window(0, horizon);
        if let Ok(sol) = solve(&ws.model, &cost, &cfg, 0.0, spec.initial.mode, &initial, &reference, &controls) {
            let (violation, _) = violation_of(&ws.nodes(&sol.rollout.states, &sol.rollout.modes), &ws.obstacles);
            let accepted = violation <= best_violation;
            levels.push(HomotopyLevel { mu, violation, accepted, cost: sol.cost });
            if accepted {
                controls = sol.controls;
                states = sol.rollout.states;
                modes = sol.rollout.modes;
            }
        }
    }

    let nodes = ws.nodes(&states, &modes);
    let (_, min_margin) = violation_of(&nodes, &spec.obstacles);
    let events = modes
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(k, w)| ((k + 1) as f64 * st.plan_dt, if w[1] == Mode::Slung { GuardKind::Attach } else { GuardKind::Detach }))
        .collect();
    Ok(Plan { dt: st.plan_dt, states, modes, controls, segments, nodes, levels, min_margin, events })
}

/// Plan metadata stored next to the reference CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub schema_version: u32,
    pub plan_dt: f64,
    pub reference_dt: f64,
    pub segments: Vec<Segment>,
    pub levels: Vec<HomotopyLevel>,
    /// Absent when there are no obstacles.
    pub min_margin: Option<f64>,
    pub events: Vec<(f64, GuardKind)>,
}

impl Plan {
    /// The plan as a reference at the plan step; the last input is zero.
    pub fn trajectory(&self) -> ReferenceTrajectory {
        let m1 = self.nodes[0].len() / 6;
        let tip = |y: &DVector<f64>, o: usize| Vec3::new(y[o + 3 * (m1 - 1)], y[o + 3 * (m1 - 1) + 1], y[o + 3 * (m1 - 1) + 2]);
        let n = self.nodes.len();
        ReferenceTrajectory {
            dt: self.dt,
            tip_pos: self.nodes.iter().map(|y| tip(y, 0)).collect(),
            tip_vel: self.nodes.iter().map(|y| tip(y, 3 * m1)).collect(),
            nodes: self.nodes.clone(),
            inputs: (0..n).map(|k| self.controls.get(k).copied().unwrap_or_else(Vec3::zeros)).collect(),
            modes: self.modes.clone(),
        }
    }

    /// The plan resampled every `dt`, a multiple of the plan step.
    pub fn reference(&self, dt: f64) -> Result<ReferenceTrajectory> {
        self.trajectory().resample(dt)
    }

    pub fn meta(&self, reference_dt: f64) -> PlanMeta {
        PlanMeta {
            schema_version: PLAN_SCHEMA_VERSION,
            plan_dt: self.dt,
            reference_dt,
            segments: self.segments.clone(),
            levels: self.levels.clone(),
            min_margin: self.min_margin.is_finite().then_some(self.min_margin),
            events: self.events.clone(),
        }
    }

    /// Writes `plan.csv` (the resampled reference) and `plan.json`.
    pub fn save(&self, dir: &Path, reference_dt: f64) -> Result<()> {
        self.reference(reference_dt)?.to_table().save(&dir.join("plan.csv"))?;
        write_json(&dir.join("plan.json"), &self.meta(reference_dt))
    }
}

/// Reads a saved plan back as a reference trajectory with its metadata.
pub fn load_plan(dir: &Path) -> Result<(ReferenceTrajectory, PlanMeta)> {
    let meta: PlanMeta = read_json(&dir.join("plan.json"))?;
    if meta.schema_version != PLAN_SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported plan schema {}", meta.schema_version)));
    }
    let reference = ReferenceTrajectory::from_table(&Table::load(&dir.join("plan.csv"))?)?;
    Ok((reference, meta))
}
