//! Finite-difference equations of motion of the extensible cable.
//!
//! The cable is a chain of `n + 1` nodes with spacing `h`. Interior nodes obey
//! the discretised momentum balance with gravity and quadratic drag; node 0 is
//! coupled to the vehicle (point mass driven by a force, or a prescribed
//! acceleration), and the last node is either a free end (ghost-node
//! condition) or carries the payload.
//!
//! All grid-level functions take the node arrays and the spacing explicitly so
//! that the same stencil serves the fine simulation grid and the decimated
//! grid used by the reduced-order models.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{e_z, CableParams, Mode, Vec3};

/// Payload that is not attached to the cable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreePayload {
    pub pos: Vec3,
    pub vel: Vec3,
    /// A supported payload rests on its pickup stand and does not move.
    pub supported: bool,
}

/// Nodal positions and velocities on the fine grid plus the discrete state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub r: Vec<Vec3>,
    pub r_t: Vec<Vec3>,
    pub mode: Mode,
    /// Detached payload, if any. Must be `None` in [`Mode::Slung`], where the
    /// payload coincides with the last node.
    pub payload: Option<FreePayload>,
}

/// How the vehicle end of the cable is driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopInput {
    /// Control force on the vehicle point mass.
    Force(Vec3),
    /// Vehicle acceleration imposed directly.
    Acceleration(Vec3),
}

/// Time derivative of a [`FullState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub r_t: Vec<Vec3>,
    pub r_tt: Vec<Vec3>,
    pub payload_vel: Vec3,
    pub payload_acc: Vec3,
}

impl FullState {
    /// Straight cable from `top` along `direction` with uniform stretch, at rest.
    pub fn straight(top: Vec3, direction: Vec3, stretch: f64, params: &CableParams, mode: Mode) -> Self {
        let n = params.divisions;
        let dir = direction.normalize();
        let h = params.grid_step() * stretch;
        let r = (0..=n).map(|i| top + dir * (h * i as f64)).collect();
        Self {
            r,
            r_t: vec![Vec3::zeros(); n + 1],
            mode,
            payload: None,
        }
    }

    /// Static vertical hang below `top` with the stretch profile produced by
    /// the cable weight and the tip load of `mode`.
    pub fn hanging(top: Vec3, params: &CableParams, mode: Mode) -> Self {
        Self {
            r: hanging_profile(top, params, mode, params.divisions, params.gravity),
            r_t: vec![Vec3::zeros(); params.divisions + 1],
            mode,
            payload: None,
        }
    }

    pub fn nodes(&self) -> usize {
        self.r.len()
    }

    pub fn tip(&self) -> Vec3 {
        self.r[self.r.len() - 1]
    }

    pub fn tip_vel(&self) -> Vec3 {
        self.r_t[self.r_t.len() - 1]
    }

    pub fn check_shape(&self, params: &CableParams) -> Result<()> {
        let expected = params.divisions + 1;
        if self.r.len() != expected || self.r_t.len() != expected {
            return Err(Error::GridMismatch(format!(
                "state has {} positions and {} velocities, expected {expected}",
                self.r.len(),
                self.r_t.len()
            )));
        }
        if self.mode == Mode::Slung && self.payload.is_some() {
            return Err(Error::Config("slung state must not carry a detached payload".into()));
        }
        Ok(())
    }

    /// Index of the first node with a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let bad = |v: &Vec3| !v.iter().all(|x| x.is_finite());
        (0..self.r.len()).find(|&i| bad(&self.r[i]) || bad(&self.r_t[i])).or_else(|| {
            self.payload
                .filter(|p| bad(&p.pos) || bad(&p.vel))
                .map(|_| self.r.len())
        })
    }
}

/// Positions of a cable hanging at rest along `-E_z` below `top`, sampled on
/// `n + 1` equally spaced material points. Exact for the continuum model.
pub fn hanging_profile(top: Vec3, params: &CableParams, mode: Mode, n: usize, gravity: f64) -> Vec<Vec3> {
    hanging_profile_with_tip_mass(top, params, params.tip_mass(mode), n, gravity)
}

/// [`hanging_profile`] for an arbitrary point mass at the tip.
pub fn hanging_profile_with_tip_mass(top: Vec3, params: &CableParams, tip_mass: f64, n: usize, gravity: f64) -> Vec<Vec3> {
    let l = params.length;
    let lambda = params.linear_density();
    let ea = params.axial_stiffness();
    let tip_load = tip_mass * gravity;
    (0..=n)
        .map(|i| {
            let s = l * i as f64 / n as f64;
            // depth(s) = int_0^s (1 + T(sigma)/EA) dsigma, T(sigma) = lambda g (L - sigma) + tip load
            let depth = s + (lambda * gravity * (l * s - s * s / 2.0) + tip_load * s) / ea;
            top - e_z() * depth
        })
        .collect()
}

fn unit(e: &Vec3, i: usize, j: usize) -> Result<(Vec3, f64)> {
    let norm = e.norm();
    if norm <= f64::MIN_POSITIVE || !norm.is_finite() {
        return Err(Error::SingularConfiguration(i, j));
    }
    Ok((e / norm, norm))
}

/// Contact force for a tangent vector `r_s`: `EA (1 - 1/|r_s|) r_s`.
pub fn contact_force(r_s: &Vec3, params: &CableParams) -> Result<Vec3> {
    let (_, norm) = unit(r_s, 0, 0)?;
    Ok(params.axial_stiffness() * (1.0 - 1.0 / norm) * r_s)
}

/// Force carried by the link `e = r^{i+1} - r^i` of a grid with spacing `h`.
fn link_force(e: &Vec3, h: f64, ea: f64, i: usize) -> Result<Vec3> {
    let (u, _) = unit(e, i, i + 1)?;
    Ok(ea * (e / h - u))
}

/// Derivative of [`link_force`] with respect to the link vector.
fn link_stiffness(e: &Vec3, h: f64, ea: f64) -> Matrix3<f64> {
    let norm = e.norm();
    let u = e / norm;
    ea * (Matrix3::identity() / h - (Matrix3::identity() - u * u.transpose()) / norm)
}

fn quad_drag(v: &Vec3) -> Vec3 {
    v.norm() * v
}

fn quad_drag_jacobian(v: &Vec3) -> Matrix3<f64> {
    let speed = v.norm();
    if speed == 0.0 {
        return Matrix3::zeros();
    }
    speed * Matrix3::identity() + v * v.transpose() / speed
}

/// Nodal contact force from the central-difference tangent at node `i`.
pub fn nodal_contact_force(r: &[Vec3], i: usize, h: f64, params: &CableParams) -> Result<Vec3> {
    let r_s = (r[i + 1] - r[i - 1]) / (2.0 * h);
    let (_, norm) = unit(&r_s, i - 1, i + 1)?;
    Ok(params.axial_stiffness() * (1.0 - 1.0 / norm) * r_s)
}

fn nodal_contact_jacobian(r_s: &Vec3, ea: f64) -> Matrix3<f64> {
    let norm = r_s.norm();
    let u = r_s / norm;
    ea * (Matrix3::identity() - (Matrix3::identity() - u * u.transpose()) / norm)
}

/// Fictitious node beyond the free tip that makes the tip strain vanish.
pub fn ghost_node(r: &[Vec3], h: f64) -> Result<Vec3> {
    let n = r.len() - 1;
    let (u, _) = unit(&(r[n] - r[n - 1]), n - 1, n)?;
    Ok(r[n - 1] + 2.0 * h * u)
}

/// Interior accelerations of a grid with spacing `h`; entries 0 and n are zero.
pub fn grid_interior_accels(r: &[Vec3], v: &[Vec3], h: f64, params: &CableParams) -> Result<Vec<Vec3>> {
    let n = r.len() - 1;
    let lambda = params.linear_density();
    let ea = params.axial_stiffness();
    let gravity = params.gravity * e_z();
    let mut acc = vec![Vec3::zeros(); n + 1];
    let mut back = link_force(&(r[1] - r[0]), h, ea, 0)?;
    for i in 1..n {
        let front = link_force(&(r[i + 1] - r[i]), h, ea, i)?;
        acc[i] = -gravity + (-params.cable_drag * quad_drag(&v[i]) + (front - back) / h) / lambda;
        back = front;
    }
    Ok(acc)
}

/// Vehicle-node acceleration from the integral balance over the first
/// half-cell combined with the point-mass vehicle.
pub fn grid_top_accel(r: &[Vec3], v: &[Vec3], a1: &Vec3, force: &Vec3, h: f64, params: &CableParams) -> Result<Vec3> {
    let lambda = params.linear_density();
    let mb = params.uav_mass;
    let n1 = nodal_contact_force(r, 1, h, params)?;
    let drag = params.cable_drag * (quad_drag(&v[0]) + quad_drag(&v[1]));
    let rhs = force - (mb + lambda * h) * params.gravity * e_z() - 0.5 * h * (drag + lambda * a1) + n1;
    Ok(rhs / (mb + 0.5 * lambda * h))
}

/// Tip acceleration for the given mode. `a_prev` is the acceleration of the
/// node before the tip (only used when a payload is attached).
pub fn grid_tip_accel(r: &[Vec3], v: &[Vec3], a_prev: &Vec3, mode: Mode, h: f64, params: &CableParams) -> Result<Vec3> {
    let n = r.len() - 1;
    let lambda = params.linear_density();
    let ea = params.axial_stiffness();
    let g = params.gravity;
    match mode {
        Mode::FreeTip => {
            let ghost = ghost_node(r, h)?;
            let back = link_force(&(r[n] - r[n - 1]), h, ea, n - 1)?;
            let front = link_force(&(ghost - r[n]), h, ea, n)?;
            Ok(-g * e_z() + (-params.cable_drag * quad_drag(&v[n]) + (front - back) / h) / lambda)
        }
        Mode::Slung => {
            let mp = params.payload_mass;
            let n_prev = nodal_contact_force(r, n - 1, h, params)?;
            let rhs = -n_prev
                - (0.5 * h * params.cable_drag + params.payload_drag) * quad_drag(&v[n])
                - 0.5 * h * (params.cable_drag * quad_drag(&v[n - 1]) + lambda * a_prev)
                - (mp + lambda * h) * g * e_z();
            Ok(rhs / (mp + 0.5 * lambda * h))
        }
    }
}

/// All nodal accelerations of a grid. Interior nodes are evaluated first since
/// both boundary closures consume them.
pub fn grid_accels(r: &[Vec3], v: &[Vec3], h: f64, mode: Mode, top: TopInput, params: &CableParams) -> Result<Vec<Vec3>> {
    let n = r.len() - 1;
    let mut acc = grid_interior_accels(r, v, h, params)?;
    acc[n] = grid_tip_accel(r, v, &acc[n - 1], mode, h, params)?;
    acc[0] = match top {
        TopInput::Acceleration(a) => a,
        TopInput::Force(f) => grid_top_accel(r, v, &acc[1], &f, h, params)?,
    };
    Ok(acc)
}

/// Accelerations of nodes `1..=n` and their Jacobian with respect to the
/// stacked grid state `[r^0 .. r^n, v^0 .. v^n]`.
///
/// The vehicle node is excluded: in the reduced models its acceleration is the
/// control input. Row block `i - 1` of the Jacobian belongs to node `i`.
pub fn grid_accels_jacobian(
    r: &[Vec3],
    v: &[Vec3],
    h: f64,
    mode: Mode,
    params: &CableParams,
) -> Result<(Vec<Vec3>, DMatrix<f64>)> {
    let n = r.len() - 1;
    let lambda = params.linear_density();
    let ea = params.axial_stiffness();
    let vel = 3 * (n + 1);
    let mut jac = DMatrix::<f64>::zeros(3 * n, 6 * (n + 1));
    let acc = grid_interior_accels(r, v, h, params)?;
    let mut acc = acc;

    let set = |jac: &mut DMatrix<f64>, row_node: usize, col: usize, m: &Matrix3<f64>| {
        let mut block = jac.fixed_view_mut::<3, 3>(3 * (row_node - 1), col);
        block += m;
    };

    for i in 1..n {
        let k_back = link_stiffness(&(r[i] - r[i - 1]), h, ea) / (lambda * h);
        let k_front = link_stiffness(&(r[i + 1] - r[i]), h, ea) / (lambda * h);
        set(&mut jac, i, 3 * (i - 1), &k_back);
        set(&mut jac, i, 3 * i, &(-k_back - k_front));
        set(&mut jac, i, 3 * (i + 1), &k_front);
        let dv = -params.cable_drag / lambda * quad_drag_jacobian(&v[i]);
        set(&mut jac, i, vel + 3 * i, &dv);
    }

    acc[n] = grid_tip_accel(r, v, &acc[n - 1], mode, h, params)?;
    match mode {
        Mode::FreeTip => {
            let e = r[n] - r[n - 1];
            let (u, norm) = unit(&e, n - 1, n)?;
            let ghost_link = 2.0 * h * u - e;
            unit(&ghost_link, n, n + 1)?;
            let du = (Matrix3::identity() - u * u.transpose()) / norm;
            let d_ghost = 2.0 * h * du - Matrix3::identity();
            let d_e = (link_stiffness(&ghost_link, h, ea) * d_ghost - link_stiffness(&e, h, ea)) / (lambda * h);
            set(&mut jac, n, 3 * n, &d_e);
            set(&mut jac, n, 3 * (n - 1), &(-d_e));
            let dv = -params.cable_drag / lambda * quad_drag_jacobian(&v[n]);
            set(&mut jac, n, vel + 3 * n, &dv);
        }
        Mode::Slung => {
            let scale = 1.0 / (params.payload_mass + 0.5 * lambda * h);
            let r_s = (r[n] - r[n - 2]) / (2.0 * h);
            let dn = nodal_contact_jacobian(&r_s, ea) / (2.0 * h);
            set(&mut jac, n, 3 * n, &(-dn * scale));
            set(&mut jac, n, 3 * (n - 2), &(dn * scale));
            // -h/2 * lambda * d a_{n-1}
            let coupling = -0.5 * h * lambda * scale;
            let prev_row = jac.rows(3 * (n - 2), 3).clone_owned();
            let mut tip_rows = jac.rows_mut(3 * (n - 1), 3);
            tip_rows += prev_row * coupling;
            let dv_tip = -(0.5 * h * params.cable_drag + params.payload_drag) * scale * quad_drag_jacobian(&v[n]);
            set(&mut jac, n, vel + 3 * n, &dv_tip);
            let dv_prev = -0.5 * h * params.cable_drag * scale * quad_drag_jacobian(&v[n - 1]);
            set(&mut jac, n, vel + 3 * (n - 1), &dv_prev);
        }
    }
    Ok((acc, jac))
}

// ---------------------------------------------------------------------------
// Fine-grid operations on a full state.

fn check_grid(state: &FullState, params: &CableParams) -> Result<f64> {
    state.check_shape(params)?;
    Ok(params.grid_step())
}

/// Accelerations of interior nodes `1..N-1` (length `N - 1`).
pub fn interior_accel(state: &FullState, params: &CableParams) -> Result<Vec<Vec3>> {
    let h = check_grid(state, params)?;
    let acc = grid_interior_accels(&state.r, &state.r_t, h, params)?;
    Ok(acc[1..state.r.len() - 1].to_vec())
}

/// Acceleration of the vehicle node given the acceleration of node 1.
pub fn top_boundary_accel(state: &FullState, r_tt_1: &Vec3, f_cmd: &Vec3, params: &CableParams) -> Result<Vec3> {
    let h = check_grid(state, params)?;
    grid_top_accel(&state.r, &state.r_t, r_tt_1, f_cmd, h, params)
}

/// Acceleration of the distal node given the acceleration of node `N - 1`.
pub fn tip_boundary_accel(state: &FullState, r_tt_nm1: &Vec3, params: &CableParams) -> Result<Vec3> {
    let h = check_grid(state, params)?;
    grid_tip_accel(&state.r, &state.r_t, r_tt_nm1, state.mode, h, params)
}

/// Contact force at the free tip computed from the ghost-node stencil.
pub fn free_tip_contact_force(state: &FullState, params: &CableParams) -> Result<Vec3> {
    let h = check_grid(state, params)?;
    let n = state.r.len() - 1;
    let ghost = ghost_node(&state.r, h)?;
    let r_s = (ghost - state.r[n - 1]) / (2.0 * h);
    contact_force(&r_s, params)
}

fn payload_accel(p: &FreePayload, params: &CableParams) -> Vec3 {
    if p.supported {
        return Vec3::zeros();
    }
    -params.gravity * e_z() - params.payload_drag / params.payload_mass * quad_drag(&p.vel)
}

/// Right-hand side of the full hybrid model for a force-driven vehicle.
pub fn full_rhs(state: &FullState, f_cmd: &Vec3, params: &CableParams) -> Result<StateDerivative> {
    full_rhs_with(state, TopInput::Force(*f_cmd), params)
}

/// Right-hand side of the full hybrid model.
pub fn full_rhs_with(state: &FullState, top: TopInput, params: &CableParams) -> Result<StateDerivative> {
    let h = check_grid(state, params)?;
    let r_tt = grid_accels(&state.r, &state.r_t, h, state.mode, top, params)?;
    let (payload_vel, payload_acc) = match &state.payload {
        Some(p) if !p.supported => (p.vel, payload_accel(p, params)),
        _ => (Vec3::zeros(), Vec3::zeros()),
    };
    Ok(StateDerivative {
        r_t: state.r_t.clone(),
        r_tt,
        payload_vel,
        payload_acc,
    })
}

/// Contact force the cable exerts on the vehicle, from the integral balance
/// over the first half-cell, given the vehicle acceleration `a0`.
pub fn vehicle_contact_force(state: &FullState, a0: &Vec3, params: &CableParams) -> Result<Vec3> {
    let h = check_grid(state, params)?;
    let lambda = params.linear_density();
    let acc = grid_interior_accels(&state.r, &state.r_t, h, params)?;
    let n1 = nodal_contact_force(&state.r, 1, h, params)?;
    let drag = params.cable_drag * (quad_drag(&state.r_t[0]) + quad_drag(&state.r_t[1]));
    Ok(n1 - lambda * h * params.gravity * e_z() - 0.5 * h * (lambda * (a0 + acc[1]) + drag))
}

/// Force that produces vehicle acceleration `a0` in the current state, from
/// inverting the point-mass vehicle equation.
pub fn force_for_acceleration(state: &FullState, a0: &Vec3, params: &CableParams) -> Result<Vec3> {
    let n0 = vehicle_contact_force(state, a0, params)?;
    Ok(params.uav_mass * (a0 + params.gravity * e_z()) - n0)
}

/// Lumped mass of the tip half-cell on a grid with spacing `h`.
pub fn tip_lump_mass(params: &CableParams, h: f64) -> f64 {
    0.5 * params.linear_density() * h
}

/// Post-impact tip velocity of an inelastic attachment between a payload
/// moving at `payload_vel` and the tip lump of a grid with spacing `h`.
pub fn attach_velocity(payload_vel: &Vec3, tip_vel: &Vec3, h: f64, params: &CableParams) -> Vec3 {
    let lump = tip_lump_mass(params, h);
    let mp = params.payload_mass;
    payload_vel / (1.0 + lump / mp) + tip_vel / (1.0 + mp / lump)
}

/// Payload attachment: momentum-conserving velocity reset of the tip node.
pub fn attach_reset(state: &FullState, params: &CableParams) -> Result<FullState> {
    if state.mode != Mode::FreeTip {
        return Err(Error::InvalidTransition("attach requires a free tip"));
    }
    let payload = state
        .payload
        .ok_or(Error::InvalidTransition("attach requires a detached payload"))?;
    let h = check_grid(state, params)?;
    let n = state.r.len() - 1;
    let mut next = state.clone();
    next.r_t[n] = attach_velocity(&payload.vel, &state.r_t[n], h, params);
    next.mode = Mode::Slung;
    next.payload = None;
    Ok(next)
}

/// Payload release: the continuous state is unchanged and the payload
/// continues from the tip position and velocity.
pub fn detach_reset(state: &FullState) -> Result<FullState> {
    if state.mode != Mode::Slung {
        return Err(Error::InvalidTransition("detach requires an attached payload"));
    }
    let mut next = state.clone();
    next.mode = Mode::FreeTip;
    next.payload = Some(FreePayload {
        pos: state.tip(),
        vel: state.tip_vel(),
        supported: false,
    });
    Ok(next)
}

/// Kinetic plus elastic energy, with the cable mass lumped on the trapezoid
/// weights and the elastic energy summed over links.
pub fn mechanical_energy(state: &FullState, params: &CableParams) -> f64 {
    let n = state.r.len() - 1;
    let h = params.length / n as f64;
    let lambda = params.linear_density();
    let ea = params.axial_stiffness();
    let mut kinetic = 0.0;
    for i in 0..=n {
        let mut mass = if i == 0 || i == n { 0.5 * lambda * h } else { lambda * h };
        if i == 0 {
            mass += params.uav_mass;
        }
        if i == n && state.mode == Mode::Slung {
            mass += params.payload_mass;
        }
        kinetic += 0.5 * mass * state.r_t[i].norm_squared();
    }
    let elastic: f64 = (0..n)
        .map(|i| {
            let strain = (state.r[i + 1] - state.r[i]).norm() / h - 1.0;
            0.5 * ea * strain * strain * h
        })
        .sum();
    let potential: f64 = {
        let z: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * lambda * h * state.r[i].z
            })
            .sum();
        let tip = if state.mode == Mode::Slung { params.payload_mass * state.r[n].z } else { 0.0 };
        params.gravity * (z + tip + params.uav_mass * state.r[0].z)
    };
    kinetic + elastic + potential
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn no_gravity() -> CableParams {
        CableParams {
            gravity: 0.0,
            ..CableParams::default()
        }
    }

    #[test]
    fn contact_force_examples() {
        let p = CableParams::default();
        assert_relative_eq!(p.axial_stiffness(), 7.85, epsilon = 1e-12);
        let f = contact_force(&Vec3::new(1.0, 0.0, 0.0), &p).unwrap();
        assert_eq!(f, Vec3::zeros());
        let f = contact_force(&Vec3::new(2.0, 0.0, 0.0), &p).unwrap();
        assert_relative_eq!(f, Vec3::new(7.85, 0.0, 0.0), epsilon = 1e-12);
        let f = contact_force(&Vec3::new(0.5, 0.0, 0.0), &p).unwrap();
        assert_relative_eq!(f, Vec3::new(-3.925, 0.0, 0.0), epsilon = 1e-12);
        assert!(matches!(
            contact_force(&Vec3::zeros(), &p),
            Err(Error::SingularConfiguration(..))
        ));
    }

    #[test]
    fn unstretched_cable_at_rest_has_no_interior_acceleration() {
        let p = no_gravity();
        let s = FullState::straight(Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), 1.0, &p, Mode::FreeTip);
        for a in interior_accel(&s, &p).unwrap() {
            assert!(a.norm() < 1e-9, "{a}");
        }
    }

    #[test]
    fn only_drag_survives_for_moving_unstretched_cable() {
        let p = no_gravity();
        let mut s = FullState::straight(Vec3::zeros(), Vec3::x(), 1.0, &p, Mode::FreeTip);
        for (i, v) in s.r_t.iter_mut().enumerate() {
            *v = Vec3::new(0.1 * i as f64, -0.3, 0.2 * (i as f64).sin());
        }
        let acc = interior_accel(&s, &p).unwrap();
        let lambda = p.linear_density();
        for (k, a) in acc.iter().enumerate() {
            let v = s.r_t[k + 1];
            let expected = -p.cable_drag * v.norm() * v / lambda;
            assert_relative_eq!(*a, expected, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    #[test]
    fn coincident_nodes_are_rejected() {
        let p = CableParams::default();
        let mut s = FullState::straight(Vec3::zeros(), Vec3::x(), 1.0, &p, Mode::FreeTip);
        s.r[5] = s.r[4];
        assert!(matches!(interior_accel(&s, &p), Err(Error::SingularConfiguration(4, 5))));
    }

    #[test]
    fn free_tip_examples() {
        let p = no_gravity();
        let s = FullState::straight(Vec3::zeros(), -Vec3::z(), 1.0, &p, Mode::FreeTip);
        let inner = interior_accel(&s, &p).unwrap();
        let a = tip_boundary_accel(&s, inner.last().unwrap(), &p).unwrap();
        assert!(a.norm() < 1e-9);

        let p = CableParams::default();
        let s = FullState::straight(Vec3::zeros(), -Vec3::z(), 1.0, &p, Mode::FreeTip);
        let inner = interior_accel(&s, &p).unwrap();
        let a = tip_boundary_accel(&s, inner.last().unwrap(), &p).unwrap();
        assert_relative_eq!(a, -p.gravity * e_z(), epsilon = 1e-9);
    }

    #[test]
    fn free_tip_force_vanishes_for_any_shape() {
        let p = CableParams::default();
        let mut s = FullState::hanging(Vec3::zeros(), &p, Mode::FreeTip);
        let n = s.r.len() - 1;
        s.r[n] += Vec3::new(0.003, -0.002, -0.001);
        let f = free_tip_contact_force(&s, &p).unwrap();
        assert!(f.norm() < 1e-10 * p.axial_stiffness());
    }

    #[test]
    fn top_boundary_examples() {
        // Free fall from rest with zero strain.
        let p = CableParams::default();
        let s = FullState::straight(Vec3::zeros(), -Vec3::z(), 1.0, &p, Mode::FreeTip);
        let inner = interior_accel(&s, &p).unwrap();
        let a = top_boundary_accel(&s, &inner[0], &Vec3::zeros(), &p).unwrap();
        // n^1 = 0 and r_tt^1 = -g E_z; the half-cell inertia term cancels
        // half of the extra cell weight, leaving plain free fall.
        assert_relative_eq!(inner[0], -p.gravity * e_z(), epsilon = 1e-9);
        let lambda_h = p.linear_density() * p.grid_step();
        let expected = (-(p.uav_mass + lambda_h) * p.gravity * e_z() - 0.5 * lambda_h * inner[0])
            / (p.uav_mass + lambda_h / 2.0);
        assert_relative_eq!(a, expected, epsilon = 1e-9);
        assert_relative_eq!(a, -p.gravity * e_z(), epsilon = 1e-9);

        // Control force only.
        let p = no_gravity();
        let s = FullState::straight(Vec3::zeros(), -Vec3::z(), 1.0, &p, Mode::FreeTip);
        let inner = interior_accel(&s, &p).unwrap();
        let a = top_boundary_accel(&s, &inner[0], &Vec3::x(), &p).unwrap();
        let m = p.uav_mass + p.linear_density() * p.grid_step() / 2.0;
        assert_relative_eq!(a, Vec3::x() / m, epsilon = 1e-9);
    }

    #[test]
    fn hovering_equilibrium_is_nearly_static() {
        let p = CableParams::default();
        for mode in [Mode::FreeTip, Mode::Slung] {
            let s = FullState::hanging(Vec3::new(0.0, 0.0, 2.0), &p, mode);
            let d = full_rhs(&s, &p.hover_force(mode), &p).unwrap();
            let worst = d.r_tt.iter().map(|a| a.norm()).fold(0.0, f64::max);
            assert!(worst < 0.05, "mode {mode:?}: residual {worst}");
            assert_eq!(d.r_t, s.r_t);
        }
    }

    #[test]
    fn detached_payload_falls() {
        let p = CableParams::default();
        let mut s = FullState::hanging(Vec3::zeros(), &p, Mode::FreeTip);
        s.payload = Some(FreePayload {
            pos: Vec3::new(3.0, 0.0, 0.0),
            vel: Vec3::zeros(),
            supported: false,
        });
        let d = full_rhs(&s, &p.hover_force(Mode::FreeTip), &p).unwrap();
        assert_eq!(d.payload_acc, -p.gravity * e_z());
        s.payload.as_mut().unwrap().supported = true;
        let d = full_rhs(&s, &Vec3::zeros(), &p).unwrap();
        assert_eq!(d.payload_acc, Vec3::zeros());
    }

    #[test]
    fn attach_reset_examples() {
        let p = CableParams::default();
        let mut s = FullState::hanging(Vec3::zeros(), &p, Mode::FreeTip);
        let v = Vec3::new(0.3, -0.2, 0.1);
        let n = s.r.len() - 1;
        s.r_t[n] = v;
        s.payload = Some(FreePayload { pos: s.r[n], vel: v, supported: false });
        let out = attach_reset(&s, &p).unwrap();
        assert_relative_eq!(out.r_t[n], v, epsilon = 1e-15);
        assert_eq!(out.mode, Mode::Slung);
        assert_eq!(out.r, s.r);

        s.r_t[n] = Vec3::zeros();
        s.payload = Some(FreePayload { pos: s.r[n], vel: Vec3::x(), supported: false });
        let out = attach_reset(&s, &p).unwrap();
        // m_p / (m_p + rho A h / 2) = 0.1 / (0.1 + 4.98475e-4)
        let lump = 0.5 * 1.27e3 * 7.85e-5 * 0.01;
        assert_relative_eq!(lump, 4.98475e-4, epsilon = 1e-12);
        assert_relative_eq!(out.r_t[n].x, 0.1 / (0.1 + lump), epsilon = 1e-14);
        assert_relative_eq!(out.r_t[n].x, 0.99504, epsilon = 1e-5);

        assert!(matches!(attach_reset(&out, &p), Err(Error::InvalidTransition(_))));
    }

    #[test]
    fn detach_then_attach_keeps_tip_velocity() {
        let p = CableParams::default();
        let mut s = FullState::hanging(Vec3::zeros(), &p, Mode::Slung);
        let n = s.r.len() - 1;
        s.r_t[n] = Vec3::new(0.5, 0.1, -0.7);
        let d = detach_reset(&s).unwrap();
        assert_eq!(d.r, s.r);
        assert_eq!(d.r_t, s.r_t);
        assert_eq!(d.payload.unwrap().vel, s.r_t[n]);
        assert!(matches!(detach_reset(&d), Err(Error::InvalidTransition(_))));
        let back = attach_reset(&d, &p).unwrap();
        assert_relative_eq!(back.r_t[n], s.r_t[n], epsilon = 1e-15);
    }

    #[test]
    fn force_inversion_reproduces_acceleration() {
        let p = CableParams::default();
        let mut s = FullState::hanging(Vec3::zeros(), &p, Mode::Slung);
        for (i, v) in s.r_t.iter_mut().enumerate() {
            *v = Vec3::new(0.01 * i as f64, 0.2, -0.1);
        }
        let target = Vec3::new(1.0, -2.0, 0.5);
        let f = force_for_acceleration(&s, &target, &p).unwrap();
        let d = full_rhs(&s, &f, &p).unwrap();
        assert_relative_eq!(d.r_tt[0], target, epsilon = 1e-9);
    }

    fn random_grid(n: usize, seed: u64) -> (Vec<Vec3>, Vec<Vec3>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = 1.0 / n as f64;
        let r = (0..=n)
            .map(|i| {
                Vec3::new(0.3 * (i as f64 * 0.7).sin(), 0.1 * i as f64 * h, -(i as f64) * h * 1.1)
                    + Vec3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02))
            })
            .collect();
        let v = (0..=n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        (r, v)
    }

    #[test]
    fn grid_jacobian_matches_central_differences() {
        let p = CableParams::default();
        let n = 10;
        let h = 0.1;
        for mode in [Mode::FreeTip, Mode::Slung] {
            let (r, v) = random_grid(n, 7 + mode.index() as u64);
            let (acc, jac) = grid_accels_jacobian(&r, &v, h, mode, &p).unwrap();
            let eval = |r: &[Vec3], v: &[Vec3]| -> Vec<f64> {
                let a = grid_accels(r, v, h, mode, TopInput::Acceleration(Vec3::zeros()), &p).unwrap();
                a[1..].iter().flat_map(|x| x.iter().copied().collect::<Vec<_>>()).collect()
            };
            let base = eval(&r, &v);
            for (k, a) in acc[1..].iter().enumerate() {
                for c in 0..3 {
                    assert_relative_eq!(a[c], base[3 * k + c], epsilon = 1e-12);
                }
            }
            let eps = 1e-6;
            for col in 0..6 * (n + 1) {
                let (node, comp, is_vel) = if col < 3 * (n + 1) {
                    (col / 3, col % 3, false)
                } else {
                    ((col - 3 * (n + 1)) / 3, col % 3, true)
                };
                let (mut rp, mut vp) = (r.clone(), v.clone());
                let (mut rm, mut vm) = (r.clone(), v.clone());
                if is_vel {
                    vp[node][comp] += eps;
                    vm[node][comp] -= eps;
                } else {
                    rp[node][comp] += eps;
                    rm[node][comp] -= eps;
                }
                let fp = eval(&rp, &vp);
                let fm = eval(&rm, &vm);
                for row in 0..3 * n {
                    let fd = (fp[row] - fm[row]) / (2.0 * eps);
                    let an = jac[(row, col)];
                    let scale = fd.abs().max(an.abs()).max(1.0);
                    assert!((fd - an).abs() / scale < 1e-4, "mode {mode:?} ({row},{col}): fd {fd} vs {an}");
                }
            }
        }
    }
}
