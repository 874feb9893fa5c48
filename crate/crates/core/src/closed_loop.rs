//! Receding-horizon control of the full cable model.
//!
//! The controller runs every `mpc.dt` on the reduced projection of the full
//! state. Between ticks the commanded vehicle acceleration is interpolated
//! between the first two predicted inputs and converted to a thrust at the
//! inner rate; the full model is integrated with RK4 at the physics step
//! and checked against the guards after every step.

use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;

use crate::cable::{force_for_acceleration, FullState};
use crate::error::{Error, Result};
use crate::metrics::{cable_error, EventRecord, RmsAccumulator, RunSummary, SolverStats, Table};
use crate::mpc::{CostModel, CostWeights, InternalModel, MpcController, SolveStatus};
use crate::obstacle::Obstacle;
use crate::params::Vec3;
use crate::reference::{quasi_static_reference, ReferenceTrajectory};
use crate::rom::PodBasis;
use crate::scenario::{integer_ratio, Scenario};
use crate::sim::{apply_event, check_guards, rk4_step, GuardKind};

/// Builds the controller of a scenario from untruncated bases of both modes.
pub fn build_controller(scenario: &Scenario, bases: &[PodBasis; 2]) -> Result<MpcController> {
    let s = &scenario.mpc;
    let free = bases[0].truncated(s.rom_order)?;
    let slung = bases[1].truncated(s.rom_order)?;
    if free.variant != s.variant {
        return Err(Error::Config(format!("bases are {:?}, scenario asks for {:?}", free.variant, s.variant)));
    }
    let model = InternalModel::new(free, slung, scenario.params.clone(), s.dt, s.substeps, scenario.guards.clone())?;
    let weights = CostWeights::build(&s.weights, model.intervals())?;
    let obstacles = scenario.obstacles.iter().map(|o| o.inflated(scenario.mpc.clearance)).collect();
    let cost = CostModel::new(&model, weights, obstacles)?;
    MpcController::new(model, cost, s.solver.clone().normalized(), s.horizon)
}

/// Quasi-static reference through the scenario waypoints, sampled at the
/// controller rate on the coarse grid of `intervals` intervals.
pub fn scenario_reference(scenario: &Scenario, intervals: usize) -> Result<ReferenceTrajectory> {
    let path = scenario.tip_path()?;
    let tip = |t: f64| path.sample(t);
    quasi_static_reference(
        &tip,
        &scenario.schedule(),
        &scenario.params,
        intervals,
        scenario.mpc.dt,
        scenario.sim.duration,
        &scenario.reference,
    )
}

/// Logged output of a closed-loop run.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub summary: RunSummary,
    /// One row per logged sample: tip and vehicle states, references,
    /// commands, errors, reduced coordinates and reference coarse nodes.
    pub trajectory: Table,
    /// All fine-grid node positions and velocities at the logged samples.
    pub nodes: Table,
    /// One row per controller tick. Wall times live only here.
    pub timing: Table,
    pub final_state: FullState,
}

impl ClosedLoopRun {
    /// Writes `summary.json`, `trajectory.csv`, `nodes.csv` and `timing.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.trajectory.save(&dir.join("trajectory.csv"))?;
        self.nodes.save(&dir.join("nodes.csv"))?;
        self.timing.save(&dir.join("timing.csv"))?;
        self.summary.save(&dir.join("summary.json"))
    }
}

fn xyz(prefix: &str) -> [String; 3] {
    ["x", "y", "z"].map(|c| format!("{prefix}_{c}"))
}

fn trajectory_columns(dim: usize, coarse: usize) -> Vec<String> {
    let mut c = vec!["t".to_string(), "q".to_string()];
    for p in ["r0", "r0_t", "rN", "rN_t", "ref_tip", "ref_tip_vel", "v_cmd", "f_cmd"] {
        c.extend(xyz(p));
    }
    c.extend(["eps_p", "eps_v", "min_margin"].map(String::from));
    c.extend((0..dim).map(|i| format!("z{i}")));
    for part in ["pos", "vel"] {
        for j in 0..coarse {
            c.extend(xyz(&format!("ref_node{j}_{part}")));
        }
    }
    c
}

fn node_columns(nodes: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    for part in ["pos", "vel"] {
        for i in 0..nodes {
            c.extend(xyz(&format!("node{i}_{part}")));
        }
    }
    c
}

/// Smallest obstacle margin over all fine nodes, `+inf` without obstacles.
pub fn cable_margin(r: &[Vec3], obstacles: &[Obstacle]) -> f64 {
    r.iter().flat_map(|p| obstacles.iter().map(move |o| o.margin(p))).fold(f64::INFINITY, f64::min)
}

fn split_nodes(y: &DVector<f64>) -> (Vec<Vec3>, Vec<Vec3>) {
    let n = y.len() / 6;
    let at = |o: usize| Vec3::new(y[o], y[o + 1], y[o + 2]);
    ((0..n).map(|j| at(3 * j)).collect(), (0..n).map(|j| at(3 * (n + j))).collect())
}

fn status_code(s: Option<SolveStatus>) -> f64 {
    match s {
        Some(SolveStatus::Converged) => 0.0,
        Some(SolveStatus::MaxIterations) => 1.0,
        Some(SolveStatus::Stalled) => 2.0,
        Some(SolveStatus::Failed) | None => 3.0,
    }
}

/// Runs a scenario in closed loop against `reference`.
pub fn run_closed_loop(scenario: &Scenario, bases: &[PodBasis; 2], reference: &ReferenceTrajectory) -> Result<ClosedLoopRun> {
    scenario.validate()?;
    reference.validate()?;
    let mut ctrl = build_controller(scenario, bases)?;
    if (reference.dt - scenario.mpc.dt).abs() > 1e-12 || reference.intervals() != ctrl.model.intervals() {
        return Err(Error::GridMismatch("reference does not match the controller rate or grid".into()));
    }
    let sim = &scenario.sim;
    let params = &scenario.params;
    let dt = sim.dt_physics;
    let per_tick = integer_ratio(scenario.mpc.dt, dt).ok_or_else(|| Error::Config("controller step".into()))?;
    let per_inner = integer_ratio(sim.dt_inner_ctrl, dt).ok_or_else(|| Error::Config("inner step".into()))?;
    let steps = (sim.duration / dt).round() as usize;
    let coarse = ctrl.model.intervals() + 1;
    let dim = ctrl.model.dim();

    let mut state = scenario.initial_state();
    let mut summary = RunSummary::new(scenario.name.clone(), scenario.mpc.solver.variant.name());
    let mut trajectory = Table::new(trajectory_columns(dim, coarse));
    let mut nodes = Table::new(node_columns(state.r.len()));
    let mut timing = Table::new(["t", "wall_ms", "iterations", "status", "cost", "lambda"]);
    let (mut eps_p, mut eps_v, mut tip_p, mut tip_v) =
        (RmsAccumulator::default(), RmsAccumulator::default(), RmsAccumulator::default(), RmsAccumulator::default());
    let mut min_margin = f64::INFINITY;
    let mut stats = SolverStats::default();
    let mut iter_sum = 0usize;
    let mut wall_sum = 0.0;
    let (mut v0, mut v1) = (Vec3::zeros(), Vec3::zeros());
    let mut f_cmd = params.hover_force(state.mode);
    let mut failure = None;

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % per_tick == 0 && k < steps {
            let tick = k / per_tick;
            let window = reference.window(tick, ctrl.horizon);
            let clock = Instant::now();
            let decision = ctrl.step(t, &state, &window)?;
            let wall = clock.elapsed().as_secs_f64() * 1e3;
            v0 = decision.v0;
            v1 = decision.v1;
            stats.solves += 1;
            wall_sum += wall;
            stats.max_wall_ms = stats.max_wall_ms.max(wall);
            let sol = decision.solution.as_ref();
            let iterations = sol.map_or(0, |s| s.stats.iterations);
            iter_sum += iterations;
            let lambda = sol.and_then(|s| s.stats.lambda_trace.last().copied()).unwrap_or(f64::NAN);
            let cost = sol.map_or(f64::NAN, |s| s.cost);
            if let Some(s) = sol {
                stats.final_costs.push(s.cost);
                stats.lambda_trace.push(lambda);
            }
            timing.push(vec![t, wall, iterations as f64, status_code(sol.map(|s| s.status)), cost, lambda])?;
            if let Some(e) = decision.error {
                stats.failures += 1;
                if sim.abort_on_failure {
                    failure = Some(format!("solver failure at t = {t:.3} s: {e}"));
                    break;
                }
            }
        }
        if k % per_inner == 0 && k < steps {
            let s = (t - (k / per_tick * per_tick) as f64 * dt) / scenario.mpc.dt;
            let a_cmd = v0 + (v1 - v0) * s;
            f_cmd = force_for_acceleration(&state, &a_cmd, params)?;
        }
        if k % sim.log_every == 0 {
            let (ref_tip, ref_tip_vel, ref_nodes) = reference.interpolate(t);
            let (ref_pos, ref_vel) = split_nodes(&ref_nodes);
            let ep = cable_error(&state.r, &ref_pos)?;
            let ev = cable_error(&state.r_t, &ref_vel)?;
            let margin = cable_margin(&state.r, &scenario.obstacles);
            let tick = (k / per_tick * per_tick) as f64 * dt;
            let a_cmd = v0 + (v1 - v0) * ((t - tick) / scenario.mpc.dt);
            let z = ctrl.model.model(state.mode).project_full(&state)?.z;
            let mut row = vec![t, state.mode.index() as f64];
            for v in [state.r[0], state.r_t[0], state.tip(), state.tip_vel(), ref_tip, ref_tip_vel, a_cmd, f_cmd] {
                row.extend(v.iter());
            }
            row.extend([ep, ev, margin]);
            row.extend(z.iter());
            row.extend(ref_nodes.iter());
            trajectory.push(row)?;
            let mut nrow = vec![t];
            nrow.extend(state.r.iter().chain(&state.r_t).flat_map(|v| [v.x, v.y, v.z]));
            nodes.push(nrow)?;
            eps_p.push(ep);
            eps_v.push(ev);
            tip_p.push((state.tip() - ref_tip).norm());
            tip_v.push((state.tip_vel() - ref_tip_vel).norm());
            min_margin = min_margin.min(margin);
        }
        if k == steps {
            break;
        }
        match rk4_step(&state, &f_cmd, dt, params) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(format!("simulation failure at t = {t:.4} s: {e}"));
                break;
            }
        }
        if let Some(event) = check_guards(&state, &scenario.guards, t + dt) {
            state = apply_event(&state, event, params)?;
            let kind = match event.kind {
                GuardKind::Attach => "attach",
                GuardKind::Detach => "detach",
            };
            summary.events.push(EventRecord { t: t + dt, kind: kind.into() });
        }
    }

    stats.mean_iterations = if stats.solves > 0 { iter_sum as f64 / stats.solves as f64 } else { 0.0 };
    stats.mean_wall_ms = if stats.solves > 0 { wall_sum / stats.solves as f64 } else { 0.0 };
    summary.eps_p_rms = eps_p.value();
    summary.eps_v_rms = eps_v.value();
    summary.tip_pos_rms = tip_p.value();
    summary.tip_vel_rms = tip_v.value();
    summary.min_obstacle_margin = (!scenario.obstacles.is_empty()).then_some(min_margin);
    summary.stats = stats;
    summary.completed = failure.is_none();
    summary.failure = failure;
    Ok(ClosedLoopRun { summary, trajectory, nodes, timing, final_state: state })
}

/// Error metrics recomputed from the logged tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoggedMetrics {
    pub eps_p_rms: f64,
    pub eps_v_rms: f64,
    pub tip_pos_rms: f64,
    pub tip_vel_rms: f64,
    pub min_margin: f64,
}

/// Recomputes the run metrics from `trajectory.csv` and `nodes.csv` alone.
pub fn metrics_from_logs(trajectory: &Table, nodes: &Table, obstacles: &[Obstacle]) -> Result<LoggedMetrics> {
    if trajectory.rows.len() != nodes.rows.len() {
        return Err(Error::GridMismatch("trajectory and node logs differ in length".into()));
    }
    let idx = |n: &str| trajectory.column_index(n);
    let (tip, tip_vel, ref_tip, ref_tip_vel) = (idx("rN_x")?, idx("rN_t_x")?, idx("ref_tip_x")?, idx("ref_tip_vel_x")?);
    let ref0 = idx("ref_node0_pos_x")?;
    let fine = (nodes.columns.len() - 1) / 6;
    let v3 = |r: &[f64], o: usize| Vec3::new(r[o], r[o + 1], r[o + 2]);
    let (mut ep, mut ev, mut tp, mut tv) =
        (RmsAccumulator::default(), RmsAccumulator::default(), RmsAccumulator::default(), RmsAccumulator::default());
    let mut margin = f64::INFINITY;
    for (row, nrow) in trajectory.rows.iter().zip(&nodes.rows) {
        let (ref_pos, ref_vel) = split_nodes(&DVector::from_column_slice(&row[ref0..]));
        let pos: Vec<Vec3> = (0..fine).map(|i| v3(nrow, 1 + 3 * i)).collect();
        let vel: Vec<Vec3> = (0..fine).map(|i| v3(nrow, 1 + 3 * (fine + i))).collect();
        ep.push(cable_error(&pos, &ref_pos)?);
        ev.push(cable_error(&vel, &ref_vel)?);
        tp.push((v3(row, tip) - v3(row, ref_tip)).norm());
        tv.push((v3(row, tip_vel) - v3(row, ref_tip_vel)).norm());
        margin = margin.min(cable_margin(&pos, obstacles));
    }
    Ok(LoggedMetrics { eps_p_rms: ep.value(), eps_v_rms: ev.value(), tip_pos_rms: tp.value(), tip_vel_rms: tv.value(), min_margin: margin })
}
