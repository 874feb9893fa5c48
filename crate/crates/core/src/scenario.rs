//! Scenario files: physical parameters, timing, controller settings, tip
//! waypoints, mode schedule, guards and obstacles.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cable::{FreePayload, FullState};
use crate::error::{Error, Result};
use crate::mpc::{MpcSettings, SolverVariant};
use crate::obstacle::Obstacle;
use crate::params::{CableParams, Mode, Vec3};
use crate::planner::{PlanSpec, PlannerSettings};
use crate::reference::{ModeSchedule, QuasiStaticConfig};
use crate::rom::training::TrainingConfig;
use crate::sim::{make_quintic_spline, Guard, QuinticSpline};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt_physics: f64,
    pub dt_inner_ctrl: f64,
    pub duration: f64,
    pub seed: u64,
    /// Physics steps between logged samples.
    pub log_every: usize,
    /// Amplitude of a seeded uniform perturbation of the initial node
    /// velocities (m/s).
    pub initial_noise: f64,
    /// Stop the run at the first solver failure instead of holding the
    /// previous solution.
    pub abort_on_failure: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt_physics: 5e-4, dt_inner_ctrl: 5e-3, duration: 10.0, seed: 0, log_every: 10, initial_noise: 0.0, abort_on_failure: false }
    }
}

/// Ratio `a / b` when it is a positive integer.
pub fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = (a / b).round();
    (r >= 1.0 && (r * b - a).abs() <= 1e-9 * a.abs()).then_some(r as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    /// Vehicle position; the cable starts hanging at rest below it.
    pub vehicle: Vec3,
    pub mode: Mode,
    /// Position of a payload resting on its stand (free-tip starts only).
    #[serde(default)]
    pub payload: Option<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub pos: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub params: CableParams,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub mpc: MpcSettings,
    #[serde(default)]
    pub training: TrainingConfig,
    pub initial: InitialCondition,
    /// Tip waypoints.
    pub waypoints: Vec<Waypoint>,
    /// Scheduled mode changes of the reference.
    #[serde(default)]
    pub mode_switches: Vec<(f64, Mode)>,
    #[serde(default)]
    pub guards: Vec<Guard>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub reference: QuasiStaticConfig,
    #[serde(default)]
    pub planner: Option<PlannerSettings>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported scenario schema {}", self.schema_version)));
        }
        self.params.validate()?;
        self.mpc.validate()?;
        self.training.validate(&self.params)?;
        if self.waypoints.is_empty() {
            return Err(Error::Config("waypoint list is empty".into()));
        }
        let s = &self.sim;
        if integer_ratio(s.dt_inner_ctrl, s.dt_physics).is_none() || integer_ratio(self.mpc.dt, s.dt_inner_ctrl).is_none() {
            return Err(Error::Config("controller periods must be integer multiples of the physics step".into()));
        }
        if !(s.duration > 0.0) || s.log_every == 0 || s.initial_noise < 0.0 {
            return Err(Error::Config("duration, log interval and noise must be positive".into()));
        }
        if self.params.divisions % self.training.decimation != 0 {
            return Err(Error::Config("decimation must divide the grid".into()));
        }
        if self.initial.mode == Mode::Slung && self.initial.payload.is_some() {
            return Err(Error::Config("a slung start cannot also have a payload on a stand".into()));
        }
        for g in &self.guards {
            g.validate()?;
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        self.schedule().validate()?;
        self.tip_path()?;
        if let Some(p) = &self.planner {
            p.validate()?;
            if self.mpc.solver.variant == SolverVariant::Rti {
                return Err(Error::Config("planned scenarios require the full HiLQR solver; RTI is not supported".into()));
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> ModeSchedule {
        ModeSchedule { initial: self.initial.mode, switches: self.mode_switches.clone() }
    }

    /// Rest-to-rest tip path through the waypoints.
    pub fn tip_path(&self) -> Result<QuinticSpline> {
        let mut w: Vec<(f64, Vec3)> = self.waypoints.iter().map(|w| (w.t, w.pos)).collect();
        if w.len() == 1 {
            w.push((w[0].0 + 1.0, w[0].1));
        }
        make_quintic_spline(w)
    }

    pub fn initial_state(&self) -> FullState {
        let mut s = FullState::hanging(self.initial.vehicle, &self.params, self.initial.mode);
        s.payload = self.initial.payload.map(|pos| FreePayload { pos, vel: Vec3::zeros(), supported: true });
        if self.sim.initial_noise > 0.0 {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.sim.seed);
            let a = self.sim.initial_noise;
            for v in s.r_t.iter_mut().skip(1) {
                *v += Vec3::from_fn(|_, _| rng.random_range(-a..=a));
            }
        }
        s
    }

    /// Planning problem of a scenario with planner settings.
    pub fn plan_spec(&self) -> Result<PlanSpec> {
        let settings = self.planner.clone().ok_or_else(|| Error::Config(format!("scenario {} has no planner settings", self.name)))?;
        Ok(PlanSpec {
            params: self.params.clone(),
            settings,
            waypoints: self.waypoints.iter().map(|w| (w.t, w.pos)).collect(),
            guards: self.guards.clone(),
            obstacles: self.obstacles.clone(),
            initial: self.initial_state(),
            reference: self.reference.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Tip waypoint path shared by the two tracking presets, relative to the
/// initial tip position.
const TRACKING_PATH: [(f64, [f64; 3]); 4] = [(0.0, [0.0, 0.0, 0.0]), (2.5, [1.0, 1.0, 0.3]), (5.0, [2.0, 0.0, 0.0]), (7.5, [3.0, 0.5, -0.3])];

fn tracking(name: &str, mode: Mode) -> Scenario {
    let params = CableParams::default();
    let vehicle = Vec3::new(0.0, 0.0, 2.0);
    let tip0 = FullState::hanging(vehicle, &params, mode).tip();
    let waypoints: Vec<Waypoint> = TRACKING_PATH.iter().map(|(t, d)| Waypoint { t: *t, pos: tip0 + Vec3::from(*d) }).collect();
    let goal = waypoints.last().expect("non-empty").pos;
    let arrival = waypoints.last().expect("non-empty").t;
    let (payload, guard, next) = match mode {
        Mode::FreeTip => (Some(goal), Guard::attach(goal, 0.05), Mode::Slung),
        Mode::Slung => (None, Guard::detach(goal, 0.05, arrival - 0.5), Mode::FreeTip),
    };
    Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: name.into(),
        params,
        sim: SimConfig::default(),
        mpc: MpcSettings::default(),
        training: TrainingConfig::default(),
        initial: InitialCondition { vehicle, mode, payload },
        waypoints,
        mode_switches: vec![(arrival, next)],
        guards: vec![guard],
        obstacles: vec![],
        reference: QuasiStaticConfig::default(),
        planner: None,
    }
}

/// Window edges: two bars along x at y = 5 m leaving a 0.5 m gap centred
/// at this height.
const WINDOW_CENTER_Z: f64 = 1.5;
const WINDOW_BAR_SEMI_AXES: [f64; 2] = [0.05, 2.0];
/// Tip waypoints of the pick-and-place run (times exclude the cooldowns).
const PICK_PLACE_PATH: [(f64, [f64; 2]); 5] = [(0.0, [0.0, 0.0]), (4.0, [6.5, 0.0]), (8.0, [10.0, 0.0]), (12.0, [3.5, 0.0]), (16.0, [0.0, 0.0])];

/// Pick-and-place through a window: pick up at y = 10 m, return and set
/// down at the start.
pub fn pick_and_place() -> Scenario {
    let params = CableParams::default();
    let vehicle = Vec3::new(0.0, 0.0, 2.0);
    let tip0 = FullState::hanging(vehicle, &params, Mode::FreeTip).tip();
    let mut waypoints: Vec<Waypoint> =
        PICK_PLACE_PATH.iter().map(|(t, [y, dz])| Waypoint { t: *t, pos: tip0 + Vec3::new(0.0, *y, *dz) }).collect();
    let pickup = waypoints[2].pos;
    let dropoff = FullState::hanging(vehicle, &params, Mode::Slung).tip();
    waypoints.last_mut().expect("non-empty").pos = dropoff;
    let settings = PlannerSettings { clearance: 0.15, bending: 500.0, ..PlannerSettings::default() };
    let cooldown = settings.cooldown;
    let [a, b] = WINDOW_BAR_SEMI_AXES;
    let bar = |dz: f64| Obstacle {
        center: Vec3::new(0.0, 5.0, WINDOW_CENTER_Z + dz),
        semi_axes: Vec3::new(1.0, a, b),
        infinite_axes: [true, false, false],
    };
    Scenario {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: "pick_and_place".into(),
        params,
        sim: SimConfig { duration: 16.0 + 2.0 * cooldown, ..SimConfig::default() },
        mpc: MpcSettings::default(),
        training: TrainingConfig::default(),
        initial: InitialCondition { vehicle, mode: Mode::FreeTip, payload: Some(pickup) },
        waypoints,
        mode_switches: vec![(8.0, Mode::Slung), (16.0 + cooldown, Mode::FreeTip)],
        guards: vec![Guard::attach(pickup, 0.1), Guard::detach(dropoff, 0.1, 12.0)],
        obstacles: vec![bar(0.25 + b), bar(-0.25 - b)],
        reference: QuasiStaticConfig::default(),
        planner: Some(settings),
    }
}

/// Tip tracking with the payload waiting at the last waypoint.
pub fn tracking_free_start() -> Scenario {
    tracking("tracking_free_start", Mode::FreeTip)
}

/// Tip tracking with the payload attached and released at the last waypoint.
pub fn tracking_slung_start() -> Scenario {
    tracking("tracking_slung_start", Mode::Slung)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for s in [tracking_free_start(), tracking_slung_start()] {
            s.validate().unwrap();
            assert_eq!(Scenario::from_json(&s.to_json().unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn empty_waypoints_are_rejected() {
        let mut s = tracking_free_start();
        s.waypoints.clear();
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let text = "{\n  \"schema_version\": 1,\n  \"name\": 3\n}";
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&tracking_free_start().to_json().unwrap()).unwrap();
        v["sim"]["dt_physic"] = serde_json::json!(1e-3);
        assert!(Scenario::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let mut s = tracking_free_start();
        s.sim.initial_noise = 0.01;
        s.sim.seed = 7;
        assert_eq!(s.initial_state(), s.initial_state());
        let mut t = s.clone();
        t.sim.seed = 8;
        assert_ne!(s.initial_state(), t.initial_state());
    }

    #[test]
    fn integer_ratio_examples() {
        assert_eq!(integer_ratio(0.025, 5e-4), Some(50));
        assert_eq!(integer_ratio(0.025, 0.01), None);
    }
}
