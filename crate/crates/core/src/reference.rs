//! Node-level reference trajectories for the controller.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cable::hanging_profile_with_tip_mass;
use crate::error::{Error, Result};
use crate::metrics::Table;
use crate::mpc::HorizonReference;
use crate::params::{e_z, CableParams, Mode, Vec3};
use crate::sim::quintic;

/// Piecewise-constant mode schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSchedule {
    pub initial: Mode,
    /// Switch times with the mode entered, increasing in time.
    #[serde(default)]
    pub switches: Vec<(f64, Mode)>,
}

impl ModeSchedule {
    pub fn constant(mode: Mode) -> Self {
        Self { initial: mode, switches: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = (f64::NEG_INFINITY, self.initial);
        for &(t, q) in &self.switches {
            if !(t > prev.0) {
                return Err(Error::Config("mode switches must be strictly increasing in time".into()));
            }
            if q == prev.1 {
                return Err(Error::Config(format!("mode switch at {t} s does not change the mode")));
            }
            prev = (t, q);
        }
        Ok(())
    }

    pub fn mode_at(&self, t: f64) -> Mode {
        self.switches.iter().take_while(|(ts, _)| *ts <= t).last().map_or(self.initial, |(_, q)| *q)
    }

    /// Share of the payload weight carried by the reference at `t`, blended
    /// over `blend` seconds after each switch.
    pub fn payload_share(&self, t: f64, blend: f64) -> f64 {
        let mut share = if self.initial == Mode::Slung { 1.0 } else { 0.0 };
        for &(ts, q) in &self.switches {
            if t < ts {
                break;
            }
            let target = if q == Mode::Slung { 1.0 } else { 0.0 };
            let s = if blend > 0.0 { quintic(((t - ts) / blend).min(1.0)).0 } else { 1.0 };
            share += (target - share) * s;
        }
        share
    }
}

/// Reference sampled at the controller rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub dt: f64,
    pub tip_pos: Vec<Vec3>,
    pub tip_vel: Vec<Vec3>,
    /// Coarse node targets `[positions; velocities]`.
    pub nodes: Vec<DVector<f64>>,
    /// Vehicle acceleration targets.
    pub inputs: Vec<Vec3>,
    pub modes: Vec<Mode>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes[0].len() / 6 - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 || !(self.dt > 0.0) {
            return Err(Error::Config("reference needs two samples and a positive step".into()));
        }
        if [self.tip_pos.len(), self.tip_vel.len(), self.inputs.len(), self.modes.len()].iter().any(|&l| l != n) {
            return Err(Error::GridMismatch("reference columns have different lengths".into()));
        }
        let w = self.nodes[0].len();
        if w % 6 != 0 || self.nodes.iter().any(|y| y.len() != w) {
            return Err(Error::GridMismatch("reference node blocks are inconsistent".into()));
        }
        Ok(())
    }

    /// Horizon of `h` intervals starting at sample `k`, held at the last
    /// sample past the end.
    pub fn window(&self, k: usize, h: usize) -> HorizonReference {
        let last = self.len() - 1;
        let at = |i: usize| i.min(last);
        HorizonReference {
            nodes: (k..=k + h).map(|i| self.nodes[at(i)].clone()).collect(),
            inputs: (k..k + h).map(|i| if i > last { Vec3::zeros() } else { self.inputs[i] }).collect(),
            modes: (k..=k + h).map(|i| self.modes[at(i)]).collect(),
            tip_weights: Vec::new(),
        }
    }

    /// Keeps every sample that falls on a multiple of `dt`, which must be a
    /// multiple of the current step. Input targets become interval means.
    pub fn resample(&self, dt: f64) -> Result<Self> {
        let ratio = crate::scenario::integer_ratio(dt, self.dt).ok_or_else(|| Error::Config("resampling step must be a multiple of the reference step".into()))?;
        let idx: Vec<usize> = (0..self.len()).step_by(ratio).collect();
        let mean = |k: usize| {
            let span = &self.inputs[k..(k + ratio).min(self.len())];
            span.iter().sum::<Vec3>() / span.len() as f64
        };
        Ok(Self {
            dt,
            tip_pos: idx.iter().map(|&k| self.tip_pos[k]).collect(),
            tip_vel: idx.iter().map(|&k| self.tip_vel[k]).collect(),
            nodes: idx.iter().map(|&k| self.nodes[k].clone()).collect(),
            inputs: idx.iter().map(|&k| mean(k)).collect(),
            modes: idx.iter().map(|&k| self.modes[k]).collect(),
        })
    }

    /// Linear interpolation of tip position, tip velocity and node targets.
    pub fn interpolate(&self, t: f64) -> (Vec3, Vec3, DVector<f64>) {
        let last = self.len() - 1;
        let x = (t / self.dt).max(0.0);
        let k = (x.floor() as usize).min(last);
        if k >= last {
            return (self.tip_pos[last], self.tip_vel[last], self.nodes[last].clone());
        }
        let s = x - k as f64;
        let lerp3 = |a: &Vec3, b: &Vec3| a + (b - a) * s;
        (
            lerp3(&self.tip_pos[k], &self.tip_pos[k + 1]),
            lerp3(&self.tip_vel[k], &self.tip_vel[k + 1]),
            &self.nodes[k] + (&self.nodes[k + 1] - &self.nodes[k]) * s,
        )
    }

    pub fn to_table(&self) -> Table {
        let m1 = self.intervals() + 1;
        let mut cols = vec!["t".to_string(), "q".to_string()];
        for name in ["tip", "tip_vel", "v_ref"] {
            cols.extend(["x", "y", "z"].iter().map(|c| format!("{name}_{c}")));
        }
        for part in ["pos", "vel"] {
            for j in 0..m1 {
                cols.extend(["x", "y", "z"].iter().map(|c| format!("node{j}_{part}_{c}")));
            }
        }
        let mut t = Table::new(cols);
        for k in 0..self.len() {
            let mut row = vec![k as f64 * self.dt, self.modes[k].index() as f64];
            for v in [&self.tip_pos[k], &self.tip_vel[k], &self.inputs[k]] {
                row.extend(v.iter());
            }
            row.extend(self.nodes[k].iter());
            t.push(row).expect("row width matches header");
        }
        t
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let w = table.columns.len();
        if w < 11 + 12 || (w - 11) % 6 != 0 {
            return Err(Error::Parse("reference table has an unexpected column count".into()));
        }
        let times = table.column("t")?;
        if times.len() < 2 {
            return Err(Error::Parse("reference table needs two rows".into()));
        }
        let dt = times[1] - times[0];
        let v3 = |r: &[f64], o: usize| Vec3::new(r[o], r[o + 1], r[o + 2]);
        let mut out = ReferenceTrajectory { dt, tip_pos: vec![], tip_vel: vec![], nodes: vec![], inputs: vec![], modes: vec![] };
        for (i, r) in table.rows.iter().enumerate() {
            out.modes.push(Mode::from_index(r[1] as usize).ok_or_else(|| Error::Parse(format!("row {i}: bad mode {}", r[1])))?);
            out.tip_pos.push(v3(r, 2));
            out.tip_vel.push(v3(r, 5));
            out.inputs.push(v3(r, 8));
            out.nodes.push(DVector::from_column_slice(&r[11..]));
        }
        out.validate()?;
        Ok(out)
    }
}

/// Quasi-static shape following a tip path: the cable hangs straight from
/// the vehicle along the effective gravity seen by an observer moving with
/// the tip, stretched by its own weight and the scheduled payload. The tip
/// acceleration that sets the tilt is passed through a critically damped
/// second-order lag, which keeps the vehicle targets smooth across the jerk
/// steps of piecewise quintic paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasiStaticConfig {
    /// Seconds over which the payload weight is blended in or out after a
    /// scheduled switch.
    pub payload_blend: f64,
    /// Time constant of the tilt lag (s); zero tilts with the raw tip
    /// acceleration.
    pub tilt_lag: f64,
    /// Time step of the lag filter and of the finite differences.
    pub diff_step: f64,
}

impl Default for QuasiStaticConfig {
    fn default() -> Self {
        Self { payload_blend: 1.0, tilt_lag: 0.15, diff_step: 1e-3 }
    }
}

/// Coarse node positions of a straight hang ending at `tip`, aligned with
/// the effective gravity `accel + g e_z` and loaded by `tip_mass`.
pub fn quasi_static_shape(tip: &Vec3, accel: &Vec3, tip_mass: f64, params: &CableParams, intervals: usize) -> Vec<Vec3> {
    let g_eff = accel + params.gravity * e_z();
    let g = g_eff.norm().max(1e-6);
    let up = g_eff / g;
    let profile = hanging_profile_with_tip_mass(Vec3::zeros(), params, tip_mass, intervals, g);
    let depth: Vec<f64> = profile.iter().map(|x| -x.z).collect();
    let top = tip + up * depth[intervals];
    depth.iter().map(|d| top - up * *d).collect()
}

/// Tip acceleration passed through the tilt lag, sampled every `step` on
/// `[0, end]`. The path is taken to be at rest before `t = 0`.
pub fn lagged_acceleration(tip: &dyn Fn(f64) -> (Vec3, Vec3, Vec3), lag: f64, step: f64, samples: usize) -> Vec<Vec3> {
    let acc = |t: f64| tip(t).2;
    if lag <= 0.0 {
        return (0..samples).map(|k| acc(k as f64 * step)).collect();
    }
    let w = 1.0 / lag;
    // state (a_f, da_f)
    let f = |t: f64, x: &(Vec3, Vec3)| (x.1, w * w * (acc(t) - x.0) - 2.0 * w * x.1);
    let mut x = (acc(0.0), Vec3::zeros());
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        out.push(x.0);
        let t = k as f64 * step;
        let h = step;
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &(x.0 + k1.0 * (h / 2.0), x.1 + k1.1 * (h / 2.0)));
        let k3 = f(t + h / 2.0, &(x.0 + k2.0 * (h / 2.0), x.1 + k2.1 * (h / 2.0)));
        let k4 = f(t + h, &(x.0 + k3.0 * h, x.1 + k3.1 * h));
        x = (
            x.0 + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0),
            x.1 + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0),
        );
    }
    out
}

/// Samples the quasi-static reference over `[0, duration]` every `dt`,
/// which must be a multiple of the configured difference step.
pub fn quasi_static_reference(
    tip: &dyn Fn(f64) -> (Vec3, Vec3, Vec3),
    schedule: &ModeSchedule,
    params: &CableParams,
    intervals: usize,
    dt: f64,
    duration: f64,
    cfg: &QuasiStaticConfig,
) -> Result<ReferenceTrajectory> {
    schedule.validate()?;
    let d = cfg.diff_step;
    if !(dt > 0.0 && duration > 0.0 && d > 0.0 && cfg.tilt_lag >= 0.0) {
        return Err(Error::Config("reference step, duration and lag must be positive".into()));
    }
    let ratio = (dt / d).round();
    if ratio < 1.0 || (ratio * d - dt).abs() > 1e-9 * dt {
        return Err(Error::Config("reference step must be a multiple of the difference step".into()));
    }
    let ratio = ratio as usize;
    let samples = (duration / dt).round() as usize + 1;
    let fine = (samples - 1) * ratio + 2;
    let lagged = lagged_acceleration(tip, cfg.tilt_lag, d, fine);
    // fine index j stands for t = (j - 1) d; index 0 repeats the rest state
    let nodes_at = |j: usize| {
        let k = j.saturating_sub(1);
        let t = k as f64 * d;
        let mass = params.payload_mass * schedule.payload_share(t, cfg.payload_blend);
        quasi_static_shape(&tip(t).0, &lagged[k], mass, params, intervals)
    };
    let mut out = ReferenceTrajectory { dt, tip_pos: vec![], tip_vel: vec![], nodes: vec![], inputs: vec![], modes: vec![] };
    for i in 0..samples {
        let t = i as f64 * dt;
        let j = i * ratio + 1;
        let (p, v, _) = tip(t);
        let (before, now, after) = (nodes_at(j - 1), nodes_at(j), nodes_at(j + 1));
        let vel: Vec<Vec3> = before.iter().zip(&after).map(|(a, b)| (b - a) / (2.0 * d)).collect();
        let input = (after[0] - 2.0 * now[0] + before[0]) / (d * d);
        out.tip_pos.push(p);
        out.tip_vel.push(v);
        out.inputs.push(input);
        out.modes.push(schedule.mode_at(t));
        out.nodes.push(DVector::from_iterator(
            6 * (intervals + 1),
            now.iter().chain(vel.iter()).flat_map(|x| [x.x, x.y, x.z]),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::make_quintic_spline;

    #[test]
    fn static_tip_gives_the_hanging_shape() {
        let params = CableParams::default();
        let tip = |_: f64| (Vec3::new(1.0, 2.0, 0.5), Vec3::zeros(), Vec3::zeros());
        let r = quasi_static_reference(&tip, &ModeSchedule::constant(Mode::Slung), &params, 10, 0.025, 0.1, &Default::default()).unwrap();
        let len = params.hanging_length(Mode::Slung, params.gravity);
        let y = &r.nodes[2];
        assert!((y[2] - (0.5 + len)).abs() < 1e-12);
        assert!((y[32] - 0.5).abs() < 1e-12);
        assert!(y.rows(33, 33).amax() < 1e-9);
        assert!(r.inputs[1].norm() < 1e-6);
    }

    #[test]
    fn accelerating_tip_tilts_the_cable_backwards() {
        let params = CableParams::default();
        let spline = make_quintic_spline(vec![(0.0, Vec3::zeros()), (2.0, Vec3::new(2.0, 0.0, 0.0))]).unwrap();
        let tip = |t: f64| spline.sample(t);
        let a = tip(0.4).2;
        let nodes = quasi_static_shape(&tip(0.4).0, &a, 0.0, &params, 10);
        // accelerating along +x: the vehicle leads the tip
        assert!(nodes[0].x > nodes[10].x);
    }

    #[test]
    fn schedule_and_payload_blend() {
        let s = ModeSchedule { initial: Mode::FreeTip, switches: vec![(2.0, Mode::Slung), (5.0, Mode::FreeTip)] };
        s.validate().unwrap();
        assert_eq!(s.mode_at(1.9), Mode::FreeTip);
        assert_eq!(s.mode_at(2.0), Mode::Slung);
        assert_eq!(s.mode_at(6.0), Mode::FreeTip);
        assert_eq!(s.payload_share(1.0, 1.0), 0.0);
        assert!((s.payload_share(2.5, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(s.payload_share(3.5, 1.0), 1.0);
        assert_eq!(s.payload_share(9.0, 1.0), 0.0);
        let bad = ModeSchedule { initial: Mode::FreeTip, switches: vec![(2.0, Mode::FreeTip)] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn table_round_trip_and_window_clamping() {
        let params = CableParams::default();
        let spline = make_quintic_spline(vec![(0.0, Vec3::zeros()), (0.2, Vec3::new(0.1, 0.0, 0.0))]).unwrap();
        let tip = |t: f64| spline.sample(t);
        let r = quasi_static_reference(&tip, &ModeSchedule::constant(Mode::FreeTip), &params, 10, 0.025, 0.25, &Default::default()).unwrap();
        let back = ReferenceTrajectory::from_table(&Table::from_csv(&r.to_table().to_csv()).unwrap()).unwrap();
        assert_eq!(back, r);
        let w = r.window(8, 5);
        assert_eq!(w.nodes.len(), 6);
        assert_eq!(w.nodes[5], r.nodes[10]);
        assert_eq!(w.inputs[4], Vec3::zeros());
    }

    #[test]
    fn tilt_lag_removes_input_spikes_at_waypoints() {
        let params = CableParams::default();
        let spline = make_quintic_spline(vec![(0.0, Vec3::zeros()), (2.5, Vec3::new(1.0, 1.0, 0.3)), (5.0, Vec3::new(2.0, 0.0, 0.0))]).unwrap();
        let tip = |t: f64| spline.sample(t);
        let schedule = ModeSchedule::constant(Mode::FreeTip);
        let peak = |lag: f64| {
            let cfg = QuasiStaticConfig { tilt_lag: lag, ..Default::default() };
            let r = quasi_static_reference(&tip, &schedule, &params, 10, 0.025, 5.0, &cfg).unwrap();
            r.inputs.iter().map(|v| v.norm()).fold(0.0, f64::max)
        };
        assert!(peak(0.0) > 100.0);
        assert!(peak(0.15) < 10.0);
    }
}
