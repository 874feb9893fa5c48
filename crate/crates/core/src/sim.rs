//! Fixed-step integration of the full model and hybrid event handling.

use serde::{Deserialize, Serialize};

use crate::cable::{self, full_rhs_with, FullState, StateDerivative, TopInput};
use crate::error::{Error, Result};
use crate::params::{CableParams, Mode, Vec3};

fn advance(state: &FullState, d: &StateDerivative, dt: f64) -> FullState {
    let mut next = state.clone();
    for i in 0..next.r.len() {
        next.r[i] += dt * d.r_t[i];
        next.r_t[i] += dt * d.r_tt[i];
    }
    if let Some(p) = next.payload.as_mut() {
        p.pos += dt * d.payload_vel;
        p.vel += dt * d.payload_acc;
    }
    next
}

/// One classic RK4 step of the full model with a constant control force.
pub fn rk4_step(state: &FullState, f_cmd: &Vec3, dt: f64, params: &CableParams) -> Result<FullState> {
    rk4_step_with(state, 0.0, dt, params, &|_| TopInput::Force(*f_cmd))
}

/// One RK4 step with a time-dependent vehicle input evaluated at the stage
/// times. The discrete mode is held for the whole step.
pub fn rk4_step_with(
    state: &FullState,
    t: f64,
    dt: f64,
    params: &CableParams,
    top: &dyn Fn(f64) -> TopInput,
) -> Result<FullState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {dt}")));
    }
    let eval = |s: &FullState, time: f64| -> Result<StateDerivative> {
        if let Some(node) = s.first_non_finite() {
            return Err(Error::Divergence { node, time });
        }
        full_rhs_with(s, top(time), params)
    };
    let k1 = eval(state, t)?;
    let k2 = eval(&advance(state, &k1, 0.5 * dt), t + 0.5 * dt)?;
    let k3 = eval(&advance(state, &k2, 0.5 * dt), t + 0.5 * dt)?;
    let k4 = eval(&advance(state, &k3, dt), t + dt)?;
    let mut next = state.clone();
    let w = dt / 6.0;
    for i in 0..next.r.len() {
        next.r[i] += w * (k1.r_t[i] + 2.0 * k2.r_t[i] + 2.0 * k3.r_t[i] + k4.r_t[i]);
        next.r_t[i] += w * (k1.r_tt[i] + 2.0 * k2.r_tt[i] + 2.0 * k3.r_tt[i] + k4.r_tt[i]);
    }
    if let Some(p) = next.payload.as_mut() {
        p.pos += w * (k1.payload_vel + 2.0 * k2.payload_vel + 2.0 * k3.payload_vel + k4.payload_vel);
        p.vel += w * (k1.payload_acc + 2.0 * k2.payload_acc + 2.0 * k3.payload_acc + k4.payload_acc);
    }
    if let Some(node) = next.first_non_finite() {
        return Err(Error::Divergence { node, time: t + dt });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardKind {
    Attach,
    Detach,
}

/// Ball-shaped region that triggers a hybrid transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Guard {
    pub kind: GuardKind,
    pub center: Vec3,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub armed_after: f64,
}

fn default_radius() -> f64 {
    0.05
}

impl Guard {
    pub fn attach(center: Vec3, radius: f64) -> Self {
        Self { kind: GuardKind::Attach, center, radius, armed_after: 0.0 }
    }

    pub fn detach(center: Vec3, radius: f64, armed_after: f64) -> Self {
        Self { kind: GuardKind::Detach, center, radius, armed_after }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Config(format!("guard radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardEvent {
    pub kind: GuardKind,
    pub guard: usize,
}

/// Tests the guard set against the tip of `tip` in mode `mode`. Attachment
/// needs the tip to reach a payload lying inside an attach guard; release
/// needs the tip inside an armed detach guard. At most one event is returned.
pub fn check_guards_at(mode: Mode, tip: &Vec3, payload: Option<&Vec3>, guards: &[Guard], t: f64) -> Option<GuardEvent> {
    for (k, g) in guards.iter().enumerate() {
        match (g.kind, mode) {
            (GuardKind::Attach, Mode::FreeTip) if t >= g.armed_after => {
                if let Some(p) = payload {
                    if g.contains(p) && (tip - p).norm() <= g.radius {
                        return Some(GuardEvent { kind: g.kind, guard: k });
                    }
                }
            }
            (GuardKind::Detach, Mode::Slung) if t >= g.armed_after => {
                if g.contains(tip) {
                    return Some(GuardEvent { kind: g.kind, guard: k });
                }
            }
            _ => {}
        }
    }
    None
}

pub fn check_guards(state: &FullState, guards: &[Guard], t: f64) -> Option<GuardEvent> {
    let payload = state.payload.as_ref().map(|p| &p.pos);
    check_guards_at(state.mode, &state.tip(), payload, guards, t)
}

/// Applies the reset map of `event`.
pub fn apply_event(state: &FullState, event: GuardEvent, params: &CableParams) -> Result<FullState> {
    match event.kind {
        GuardKind::Attach => cable::attach_reset(state, params),
        GuardKind::Detach => cable::detach_reset(state),
    }
}

/// Piecewise rest-to-rest motion through timed waypoints: each segment is a
/// straight line traversed with the quintic time law `6s^5 - 15s^4 + 10s^3`,
/// so velocity and acceleration vanish at every waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuinticSpline {
    waypoints: Vec<(f64, Vec3)>,
}

impl QuinticSpline {
    pub fn new(waypoints: Vec<(f64, Vec3)>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config("a spline needs at least two waypoints".into()));
        }
        for w in waypoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(format!(
                    "waypoint times must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[(f64, Vec3)] {
        &self.waypoints
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].0
    }

    /// Position, velocity and acceleration at `t`; held at rest outside the
    /// waypoint range.
    pub fn sample(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let w = &self.waypoints;
        if t <= w[0].0 {
            return (w[0].1, Vec3::zeros(), Vec3::zeros());
        }
        if t >= w[w.len() - 1].0 {
            return (w[w.len() - 1].1, Vec3::zeros(), Vec3::zeros());
        }
        let k = w.partition_point(|(tk, _)| *tk <= t) - 1;
        let (t0, p0) = w[k];
        let (t1, p1) = w[k + 1];
        let dur = t1 - t0;
        let s = (t - t0) / dur;
        let (pos, vel, acc) = quintic(s);
        let delta = p1 - p0;
        (p0 + pos * delta, vel / dur * delta, acc / (dur * dur) * delta)
    }
}

/// Quintic rest-to-rest law and its first two derivatives on `[0, 1]`.
pub fn quintic(s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        s3 * (10.0 - 15.0 * s + 6.0 * s2),
        30.0 * s2 * (1.0 - s) * (1.0 - s),
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
    )
}

pub fn make_quintic_spline(waypoints: Vec<(f64, Vec3)>) -> Result<QuinticSpline> {
    QuinticSpline::new(waypoints)
}
