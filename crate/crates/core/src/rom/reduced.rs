//! Reduced-order dynamics on the decimated grid.
//!
//! The reduced state stacks coordinate blocks (each a `Vec3`) as
//! `z = [q_0 .. q_{K-1}, dq_0 .. dq_{K-1}]`. For the proposed variant the
//! coordinates are `[r^0, a_1 .. a_R, r^N]`; for the baseline variant they are
//! `[r^0, b_1 .. b_K]` with the whole cable expanded relative to the vehicle.
//!
//! Node positions follow from the coordinates through a fixed linear map
//! (`expansion`), and coordinates from nodes through its left inverse
//! (`projection`). Accelerations of the coarse nodes come from the cable
//! stencil with spacing `h_d`; the vehicle acceleration is the input.

use nalgebra::{DMatrix, DVector};

use super::basis::{PodBasis, RomVariant};
use crate::cable::{self, FullState, TopInput};
use crate::error::{Error, Result};
use crate::params::{CableParams, Mode, Vec3};

/// Reduced state: stacked coordinates plus the discrete mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub z: DVector<f64>,
    pub mode: Mode,
}

impl ReducedState {
    pub fn coords(&self) -> usize {
        self.z.len() / 6
    }

    pub fn block(&self, k: usize) -> Vec3 {
        Vec3::new(self.z[3 * k], self.z[3 * k + 1], self.z[3 * k + 2])
    }

    pub fn vel_block(&self, k: usize) -> Vec3 {
        self.block(self.coords() + k)
    }

    pub fn set_block(&mut self, k: usize, v: &Vec3) {
        self.z.fixed_rows_mut::<3>(3 * k).copy_from(v);
    }

    /// Vehicle position.
    pub fn r0(&self) -> Vec3 {
        self.block(0)
    }

    pub fn r0_t(&self) -> Vec3 {
        self.vel_block(0)
    }
}

/// Reduced model for one discrete mode.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub basis: PodBasis,
    pub params: CableParams,
    /// `(M + 1) x K` scalar map from coordinates to node positions.
    expansion: DMatrix<f64>,
    /// `K x (M + 1)` left inverse of `expansion`.
    projection: DMatrix<f64>,
    /// Componentwise versions of the two maps.
    expansion3: DMatrix<f64>,
    projection3: DMatrix<f64>,
}

fn kron3(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(3 * m.nrows(), 3 * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                for c in 0..3 {
                    out[(3 * i + c, 3 * j + c)] = v;
                }
            }
        }
    }
    out
}

/// Linearisation of the reduced right-hand side.
#[derive(Debug, Clone)]
pub struct RhsJacobian {
    pub f: DVector<f64>,
    pub dz: DMatrix<f64>,
    pub dv: DMatrix<f64>,
}

impl ReducedModel {
    pub fn new(basis: PodBasis, params: CableParams) -> Result<Self> {
        let m = basis.intervals();
        if m < 2 {
            return Err(Error::Config("reduced grid needs at least two intervals".into()));
        }
        let r = basis.order();
        let (expansion, projection) = match basis.variant {
            RomVariant::Proposed => {
                let mut q = DMatrix::zeros(m + 1, r + 2);
                for j in 0..=m {
                    let s = j as f64 / m as f64;
                    q[(j, 0)] = 1.0 - s;
                    q[(j, r + 1)] = s;
                    for k in 0..r {
                        q[(j, 1 + k)] = basis.modes[(j, k)];
                    }
                }
                // fluctuation operator: node - segment(node_0, node_M)
                let mut d = DMatrix::<f64>::identity(m + 1, m + 1);
                for j in 0..=m {
                    let s = j as f64 / m as f64;
                    d[(j, 0)] -= 1.0 - s;
                    d[(j, m)] -= s;
                }
                let modal = basis.pinv() * d;
                let mut p = DMatrix::zeros(r + 2, m + 1);
                p[(0, 0)] = 1.0;
                p[(r + 1, m)] = 1.0;
                p.rows_mut(1, r).copy_from(&modal);
                (q, p)
            }
            RomVariant::Baseline => {
                let mut q = DMatrix::zeros(m + 1, r + 1);
                for j in 0..=m {
                    q[(j, 0)] = 1.0;
                    for k in 0..r {
                        q[(j, 1 + k)] = basis.modes[(j, k)];
                    }
                }
                let mut d = DMatrix::<f64>::identity(m + 1, m + 1);
                for j in 0..=m {
                    d[(j, 0)] -= 1.0;
                }
                let modal = basis.pinv() * d;
                let mut p = DMatrix::zeros(r + 1, m + 1);
                p[(0, 0)] = 1.0;
                p.rows_mut(1, r).copy_from(&modal);
                (q, p)
            }
        };
        let expansion3 = kron3(&expansion);
        let projection3 = kron3(&projection);
        Ok(Self { basis, params, expansion, projection, expansion3, projection3 })
    }

    pub fn mode(&self) -> Mode {
        self.basis.mode_tag
    }

    /// Number of coordinate blocks `K`.
    pub fn coords(&self) -> usize {
        self.expansion.ncols()
    }

    /// Dimension of the reduced state, `6 K`.
    pub fn dim(&self) -> usize {
        6 * self.coords()
    }

    pub fn intervals(&self) -> usize {
        self.basis.intervals()
    }

    pub fn h_d(&self) -> f64 {
        self.basis.h_d
    }

    /// Index of the tip coordinate block, when the tip is a coordinate.
    pub fn tip_block(&self) -> Option<usize> {
        match self.basis.variant {
            RomVariant::Proposed => Some(self.coords() - 1),
            RomVariant::Baseline => None,
        }
    }

    pub fn expansion(&self) -> &DMatrix<f64> {
        &self.expansion
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    fn apply(m: &DMatrix<f64>, blocks: &[Vec3]) -> Vec<Vec3> {
        (0..m.nrows())
            .map(|i| blocks.iter().enumerate().map(|(j, b)| m[(i, j)] * b).sum())
            .collect()
    }

    fn blocks(z: &DVector<f64>, offset: usize, count: usize) -> Vec<Vec3> {
        (0..count)
            .map(|k| Vec3::new(z[offset + 3 * k], z[offset + 3 * k + 1], z[offset + 3 * k + 2]))
            .collect()
    }

    /// Coarse node positions and velocities of a reduced state.
    pub fn nodes(&self, z: &DVector<f64>) -> (Vec<Vec3>, Vec<Vec3>) {
        let k = self.coords();
        let pos = Self::apply(&self.expansion, &Self::blocks(z, 0, k));
        let vel = Self::apply(&self.expansion, &Self::blocks(z, 3 * k, k));
        (pos, vel)
    }

    /// Reduced state of a coarse-grid configuration.
    pub fn project_nodes(&self, pos: &[Vec3], vel: &[Vec3]) -> Result<DVector<f64>> {
        let m1 = self.intervals() + 1;
        if pos.len() != m1 || vel.len() != m1 {
            return Err(Error::GridMismatch(format!(
                "expected {m1} coarse nodes, got {} / {}",
                pos.len(),
                vel.len()
            )));
        }
        let qp = Self::apply(&self.projection, pos);
        let qv = Self::apply(&self.projection, vel);
        Ok(DVector::from_iterator(
            self.dim(),
            qp.iter().chain(qv.iter()).flat_map(|x| [x.x, x.y, x.z]),
        ))
    }

    /// Reduced state of a fine-grid state, sampled every `decimation` nodes.
    pub fn project_full(&self, state: &FullState) -> Result<ReducedState> {
        let (pos, vel) = decimate(state, self.basis.decimation, self.intervals())?;
        Ok(ReducedState { z: self.project_nodes(&pos, &vel)?, mode: state.mode })
    }

    /// Accelerations of all coarse nodes for vehicle acceleration `v`.
    pub fn node_accels(&self, z: &DVector<f64>, v: &Vec3) -> Result<Vec<Vec3>> {
        let (pos, vel) = self.nodes(z);
        cable::grid_accels(&pos, &vel, self.h_d(), self.mode(), TopInput::Acceleration(*v), &self.params)
    }

    /// Time derivative of the reduced state.
    pub fn rhs(&self, z: &DVector<f64>, v: &Vec3) -> Result<DVector<f64>> {
        let k = self.coords();
        let acc = self.node_accels(z, v)?;
        let coord_acc = Self::apply(&self.projection, &acc);
        let mut out = DVector::zeros(6 * k);
        out.rows_mut(0, 3 * k).copy_from(&z.rows(3 * k, 3 * k));
        for (i, a) in coord_acc.iter().enumerate() {
            out.fixed_rows_mut::<3>(3 * k + 3 * i).copy_from(a);
        }
        Ok(out)
    }

    /// Right-hand side with its Jacobians with respect to `z` and `v`.
    pub fn rhs_jacobian(&self, z: &DVector<f64>, v: &Vec3) -> Result<RhsJacobian> {
        let k = self.coords();
        let m = self.intervals();
        let (pos, vel) = self.nodes(z);
        let (mut acc, jac_grid) = cable::grid_accels_jacobian(&pos, &vel, self.h_d(), self.mode(), &self.params)?;
        acc[0] = *v;
        let coord_acc = Self::apply(&self.projection, &acc);
        let mut f = DVector::zeros(6 * k);
        f.rows_mut(0, 3 * k).copy_from(&z.rows(3 * k, 3 * k));
        for (i, a) in coord_acc.iter().enumerate() {
            f.fixed_rows_mut::<3>(3 * k + 3 * i).copy_from(a);
        }

        let qk = &self.expansion3;
        let pk = &self.projection3;
        // d(grid state)/dz is block diagonal in (positions, velocities)
        let n_grid = 3 * (m + 1);
        let jp = jac_grid.columns(0, n_grid) * qk;
        let jv = jac_grid.columns(n_grid, n_grid) * qk;
        let p_inner = pk.columns(3, 3 * m);
        let mut dz = DMatrix::zeros(6 * k, 6 * k);
        for i in 0..3 * k {
            dz[(i, 3 * k + i)] = 1.0;
        }
        dz.view_mut((3 * k, 0), (3 * k, 3 * k)).copy_from(&(&p_inner * jp));
        dz.view_mut((3 * k, 3 * k), (3 * k, 3 * k)).copy_from(&(&p_inner * jv));
        let mut dv = DMatrix::zeros(6 * k, 3);
        dv.view_mut((3 * k, 0), (3 * k, 3)).copy_from(&pk.columns(0, 3));
        Ok(RhsJacobian { f, dz, dv })
    }

    /// One RK4 step of length `dt` with constant vehicle acceleration.
    pub fn rk4_step(&self, z: &DVector<f64>, v: &Vec3, dt: f64) -> Result<DVector<f64>> {
        self.rk4_step_varying(z, 0.0, dt, &|_| *v)
    }

    /// One RK4 step with the vehicle acceleration sampled at the stage times.
    pub fn rk4_step_varying(&self, z: &DVector<f64>, t: f64, dt: f64, v: &dyn Fn(f64) -> Vec3) -> Result<DVector<f64>> {
        let k1 = self.rhs(z, &v(t))?;
        let k2 = self.rhs(&(z + 0.5 * dt * &k1), &v(t + 0.5 * dt))?;
        let k3 = self.rhs(&(z + 0.5 * dt * &k2), &v(t + 0.5 * dt))?;
        let k4 = self.rhs(&(z + dt * &k3), &v(t + dt))?;
        let next = z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { node: 0, time: t + dt });
        }
        Ok(next)
    }

    /// RK4 step with the Jacobians of the discrete map.
    pub fn rk4_step_jacobian(&self, z: &DVector<f64>, v: &Vec3, dt: f64) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let n = z.len();
        let eye = DMatrix::<f64>::identity(n, n);
        let s1 = self.rhs_jacobian(z, v)?;
        let (k1, dk1z, dk1v) = (s1.f, s1.dz, s1.dv);

        let z2 = z + 0.5 * dt * &k1;
        let s2 = self.rhs_jacobian(&z2, v)?;
        let dz2 = &eye + 0.5 * dt * &dk1z;
        let dk2z = &s2.dz * &dz2;
        let dk2v = &s2.dz * (0.5 * dt * &dk1v) + &s2.dv;
        let k2 = s2.f;

        let z3 = z + 0.5 * dt * &k2;
        let s3 = self.rhs_jacobian(&z3, v)?;
        let dz3 = &eye + 0.5 * dt * &dk2z;
        let dk3z = &s3.dz * &dz3;
        let dk3v = &s3.dz * (0.5 * dt * &dk2v) + &s3.dv;
        let k3 = s3.f;

        let z4 = z + dt * &k3;
        let s4 = self.rhs_jacobian(&z4, v)?;
        let dz4 = &eye + dt * &dk3z;
        let dk4z = &s4.dz * &dz4;
        let dk4v = &s4.dz * (dt * &dk3v) + &s4.dv;
        let k4 = s4.f;

        let w = dt / 6.0;
        let next = z + w * (&k1 + 2.0 * &k2 + 2.0 * &k3 + &k4);
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { node: 0, time: dt });
        }
        let a = eye + w * (dk1z + 2.0 * dk2z + 2.0 * dk3z + dk4z);
        let b = w * (dk1v + 2.0 * dk2v + 2.0 * dk3v + dk4v);
        Ok((next, a, b))
    }

    /// Linear map taking coordinates of `from` into coordinates of `self`
    /// (node-level transfer, identity on the boundary blocks).
    pub fn transfer_from(&self, from: &ReducedModel) -> Result<DMatrix<f64>> {
        if from.intervals() != self.intervals() || from.basis.variant != self.basis.variant {
            return Err(Error::GridMismatch("incompatible reduced models".into()));
        }
        let t = kron3(&(&self.projection * &from.expansion));
        let (a, b) = (t.nrows(), t.ncols());
        let mut out = DMatrix::zeros(2 * a, 2 * b);
        out.view_mut((0, 0), (a, b)).copy_from(&t);
        out.view_mut((a, b), (a, b)).copy_from(&t);
        Ok(out)
    }

    /// Node-space map `y = P z` with `y = [positions; velocities]`.
    pub fn node_map(&self) -> DMatrix<f64> {
        let q = &self.expansion3;
        let (a, b) = (q.nrows(), q.ncols());
        let mut out = DMatrix::zeros(2 * a, 2 * b);
        out.view_mut((0, 0), (a, b)).copy_from(q);
        out.view_mut((a, b), (a, b)).copy_from(q);
        out
    }

    /// `3 x dim` map from the reduced state to the tip position.
    pub fn tip_map(&self) -> DMatrix<f64> {
        let q = &self.expansion3;
        let mut out = DMatrix::zeros(3, self.dim());
        out.view_mut((0, 0), (3, q.ncols())).copy_from(&q.rows(q.nrows() - 3, 3));
        out
    }

    /// Reduced-state map applying a node-level velocity change: node `j`'s
    /// velocity is multiplied by `scale[j]`, positions are unchanged.
    pub fn velocity_scaling(&self, scale: &[f64]) -> DMatrix<f64> {
        let k = self.coords();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(scale));
        let t = kron3(&(&self.projection * d * &self.expansion));
        let mut out = DMatrix::identity(6 * k, 6 * k);
        out.view_mut((3 * k, 3 * k), (3 * k, 3 * k)).copy_from(&t);
        out
    }
}

/// Decimated positions and velocities of a fine-grid state.
pub fn decimate(state: &FullState, d: usize, m: usize) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let n = state.r.len() - 1;
    if d * m != n {
        return Err(Error::GridMismatch(format!(
            "decimation {d} x {m} intervals does not match {n} fine intervals"
        )));
    }
    let pos = (0..=m).map(|j| state.r[j * d]).collect();
    let vel = (0..=m).map(|j| state.r_t[j * d]).collect();
    Ok((pos, vel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::basis::{extract_basis, SnapshotTensor};
    use approx::assert_relative_eq;

    pub(crate) fn synthetic_basis(variant: RomVariant, mode: Mode, full_rank: bool) -> PodBasis {
        let m = 10;
        let cap = variant.max_modes(m);
        let data: Vec<Vec<Vec3>> = (0..60)
            .map(|t| {
                let t = t as f64 * 0.31;
                (0..=m)
                    .map(|j| {
                        let s = j as f64 / m as f64;
                        let mut x = Vec3::zeros();
                        let count = if full_rank { cap + 2 } else { 4 };
                        for f in 1..=count {
                            let w = 0.2 / (f * f) as f64;
                            let shape = match variant {
                                RomVariant::Proposed => (std::f64::consts::PI * f as f64 * s).sin(),
                                RomVariant::Baseline => s.powi(f as i32) + 0.1 * (f as f64 * s * 3.0).sin(),
                            };
                            x += Vec3::new(w * (t * f as f64).sin(), w * (1.7 * t + f as f64).cos(), w * (0.5 * t * f as f64).cos()) * shape;
                        }
                        let boundary = j == 0 || (variant == RomVariant::Proposed && j == m);
                        if boundary { Vec3::zeros() } else { x }
                    })
                    .collect()
            })
            .collect();
        let t = SnapshotTensor {
            data,
            grid: (0..=m).map(|j| 10 * j).collect(),
            times: (0..60).map(|j| j as f64).collect(),
            h_d: 0.1,
            variant,
            mode,
        };
        extract_basis(&t).unwrap()
    }

    fn hanging_z(model: &ReducedModel, mode: Mode) -> DVector<f64> {
        let p = &model.params;
        let fine = FullState::hanging(Vec3::new(0.0, 0.0, 1.5), p, mode);
        model.project_full(&fine).unwrap().z
    }

    #[test]
    fn projection_is_left_inverse_of_expansion() {
        for variant in [RomVariant::Proposed, RomVariant::Baseline] {
            let basis = synthetic_basis(variant, Mode::FreeTip, false).truncated(2).unwrap();
            let model = ReducedModel::new(basis, CableParams::default()).unwrap();
            let prod = model.projection() * model.expansion();
            let k = model.coords();
            assert_relative_eq!(prod, DMatrix::identity(k, k), epsilon = 1e-10);
            assert_eq!(model.dim(), 6 * (2 + variant.boundary_nodes()));
        }
    }

    #[test]
    fn reduced_jacobian_matches_central_differences() {
        for variant in [RomVariant::Proposed, RomVariant::Baseline] {
            for mode in [Mode::FreeTip, Mode::Slung] {
                let basis = synthetic_basis(variant, mode, false).truncated(3).unwrap();
                let model = ReducedModel::new(basis, CableParams::default()).unwrap();
                let mut z = hanging_z(&model, mode);
                for i in 0..z.len() {
                    z[i] += 0.01 * ((i * 7 % 5) as f64 - 2.0);
                }
                let v = Vec3::new(0.4, -0.3, 1.1);
                let jac = model.rhs_jacobian(&z, &v).unwrap();
                assert_relative_eq!(jac.f, model.rhs(&z, &v).unwrap(), epsilon = 1e-10);
                let eps = 1e-6;
                for c in 0..z.len() {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[c] += eps;
                    zm[c] -= eps;
                    let fd = (model.rhs(&zp, &v).unwrap() - model.rhs(&zm, &v).unwrap()) / (2.0 * eps);
                    for r in 0..z.len() {
                        let an = jac.dz[(r, c)];
                        let scale = an.abs().max(fd[r].abs()).max(1.0);
                        assert!((an - fd[r]).abs() / scale < 1e-4, "{variant:?} {mode:?} ({r},{c}) {an} vs {}", fd[r]);
                    }
                }
                for c in 0..3 {
                    let mut vp = v;
                    let mut vm = v;
                    vp[c] += eps;
                    vm[c] -= eps;
                    let fd = (model.rhs(&z, &vp).unwrap() - model.rhs(&z, &vm).unwrap()) / (2.0 * eps);
                    for r in 0..z.len() {
                        assert!((jac.dv[(r, c)] - fd[r]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn discrete_jacobian_matches_central_differences() {
        let basis = synthetic_basis(RomVariant::Proposed, Mode::Slung, false).truncated(2).unwrap();
        let model = ReducedModel::new(basis, CableParams::default()).unwrap();
        let mut z = hanging_z(&model, Mode::Slung);
        z[3] += 0.02;
        let last = z.len() - 2;
        z[last] += 0.3;
        let v = Vec3::new(1.0, 0.0, -0.5);
        let dt = 0.0125;
        let (next, a, b) = model.rk4_step_jacobian(&z, &v, dt).unwrap();
        assert_relative_eq!(next, model.rk4_step(&z, &v, dt).unwrap(), epsilon = 1e-12);
        let eps = 1e-6;
        for c in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += eps;
            zm[c] -= eps;
            let fd = (model.rk4_step(&zp, &v, dt).unwrap() - model.rk4_step(&zm, &v, dt).unwrap()) / (2.0 * eps);
            for r in 0..z.len() {
                let scale = a[(r, c)].abs().max(fd[r].abs()).max(1.0);
                assert!((a[(r, c)] - fd[r]).abs() / scale < 1e-4);
            }
        }
        for c in 0..3 {
            let mut vp = v;
            let mut vm = v;
            vp[c] += eps;
            vm[c] -= eps;
            let fd = (model.rk4_step(&z, &vp, dt).unwrap() - model.rk4_step(&z, &vm, dt).unwrap()) / (2.0 * eps);
            for r in 0..z.len() {
                let scale = b[(r, c)].abs().max(fd[r].abs()).max(1.0);
                assert!((b[(r, c)] - fd[r]).abs() / scale < 1e-4);
            }
        }
    }

    #[test]
    fn coarse_hang_is_a_reduced_equilibrium() {
        for mode in [Mode::FreeTip, Mode::Slung] {
            let basis = synthetic_basis(RomVariant::Proposed, mode, true);
            let model = ReducedModel::new(basis, CableParams::default()).unwrap();
            // The continuum hang sampled at spacing h_d is an exact static
            // solution of the coarse stencil.
            let pos = cable::hanging_profile(Vec3::new(0.0, 0.0, 1.0), &model.params, mode, 10, model.params.gravity);
            let z = model.project_nodes(&pos, &vec![Vec3::zeros(); 11]).unwrap();
            let f = model.rhs(&z, &Vec3::zeros()).unwrap();
            assert!(f.amax() < 1e-9, "{mode:?} {}", f.amax());
        }
    }

    #[test]
    fn full_rank_reduced_rhs_reproduces_coarse_accelerations() {
        for mode in [Mode::FreeTip, Mode::Slung] {
            let basis = synthetic_basis(RomVariant::Proposed, mode, true);
            assert_eq!(basis.order(), 9);
            let model = ReducedModel::new(basis, CableParams::default()).unwrap();
            let pos: Vec<Vec3> = (0..=10)
                .map(|j| Vec3::new(0.05 * (j as f64).sin(), 0.01 * j as f64, -0.11 * j as f64))
                .collect();
            let vel: Vec<Vec3> = (0..=10).map(|j| Vec3::new(0.1, -0.2 * j as f64 / 10.0, 0.0)).collect();
            let z = model.project_nodes(&pos, &vel).unwrap();
            let (p2, v2) = model.nodes(&z);
            for j in 0..=10 {
                assert_relative_eq!(p2[j], pos[j], epsilon = 1e-10);
                assert_relative_eq!(v2[j], vel[j], epsilon = 1e-10);
            }
            let v = Vec3::new(0.3, 0.2, -1.0);
            let direct = cable::grid_accels(&pos, &vel, 0.1, mode, TopInput::Acceleration(v), &model.params).unwrap();
            let zdot = model.rhs(&z, &v).unwrap();
            let k = model.coords();
            let mut acc_z = DVector::zeros(3 * k);
            acc_z.copy_from(&zdot.rows(3 * k, 3 * k));
            let acc_nodes = ReducedModel::apply(model.expansion(), &ReducedModel::blocks(&acc_z, 0, k));
            for j in 0..=10 {
                assert_relative_eq!(acc_nodes[j], direct[j], epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }
}
