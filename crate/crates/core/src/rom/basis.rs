//! Snapshot tensors, POD bases, projection and reconstruction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Mode, Vec3};

/// Which decomposition the basis was trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RomVariant {
    /// Fluctuations about the straight segment joining vehicle and tip; both
    /// ends are kept as full states.
    #[default]
    Proposed,
    /// Displacements relative to the vehicle node; the tip (and payload) are
    /// part of the projected field.
    Baseline,
}

impl RomVariant {
    /// Number of node positions carried outside the modal expansion.
    pub fn boundary_nodes(self) -> usize {
        match self {
            RomVariant::Proposed => 2,
            RomVariant::Baseline => 1,
        }
    }

    /// Upper bound on the number of independent modes on `m + 1` samples.
    pub fn max_modes(self, m: usize) -> usize {
        m + 1 - self.boundary_nodes()
    }
}

/// Point `i` of `0..=n` on the straight segment from `r0` to `r_n`.
pub fn reference_segment(r0: &Vec3, r_n: &Vec3, i: usize, n: usize) -> Vec3 {
    let s = i as f64 / n as f64;
    (1.0 - s) * r0 + s * r_n
}

/// Field sampled by the POD for one decimated configuration.
pub fn snapshot_field(coarse: &[Vec3], variant: RomVariant) -> Vec<Vec3> {
    let m = coarse.len() - 1;
    match variant {
        RomVariant::Proposed => (0..=m)
            .map(|j| coarse[j] - reference_segment(&coarse[0], &coarse[m], j, m))
            .collect(),
        RomVariant::Baseline => coarse.iter().map(|r| r - coarse[0]).collect(),
    }
}

/// Snapshots of the sampled field: `data[j][i]` is sample `i` of snapshot `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTensor {
    pub data: Vec<Vec<Vec3>>,
    /// Fine-grid node indices of the samples (`0, d, ..., N`).
    pub grid: Vec<usize>,
    pub times: Vec<f64>,
    pub h_d: f64,
    pub variant: RomVariant,
    pub mode: Mode,
}

impl SnapshotTensor {
    pub fn samples(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m1 = self.samples();
        if m1 < 3 {
            return Err(Error::Config("snapshots need at least three spatial samples".into()));
        }
        if self.data.is_empty() || self.data.iter().any(|s| s.len() != m1) {
            return Err(Error::GridMismatch("snapshot lengths differ from the sample grid".into()));
        }
        if 3 * self.data.len() < m1 {
            return Err(Error::Config(format!(
                "{} snapshots cannot span {m1} spatial samples",
                self.data.len()
            )));
        }
        for s in &self.data {
            let tail_free = self.variant == RomVariant::Baseline;
            if s[0] != Vec3::zeros() || (!tail_free && s[m1 - 1] != Vec3::zeros()) {
                return Err(Error::Config("fluctuation snapshots must vanish at the boundary".into()));
            }
        }
        Ok(())
    }

    /// Mode-2 unfolding: one row per spatial sample, one column per
    /// (component, snapshot) pair.
    pub fn unfolding(&self) -> DMatrix<f64> {
        let m1 = self.samples();
        let o1 = self.data.len();
        DMatrix::from_fn(m1, 3 * o1, |i, col| {
            let (c, j) = (col / o1, col % o1);
            self.data[j][i][c]
        })
    }
}

/// Orthonormal spatial modes sampled on the decimated grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `(M + 1) x R` samples; columns satisfy `h_d * Phi^T Phi = I`.
    pub modes: DMatrix<f64>,
    /// All nontrivial singular values of the training set, descending.
    pub singular_values: Vec<f64>,
    pub h_d: f64,
    pub mode_tag: Mode,
    pub variant: RomVariant,
    /// Spatial decimation factor relative to the fine grid.
    pub decimation: usize,
    pinv: DMatrix<f64>,
}

impl PodBasis {
    pub fn new(
        modes: DMatrix<f64>,
        singular_values: Vec<f64>,
        h_d: f64,
        mode_tag: Mode,
        variant: RomVariant,
        decimation: usize,
    ) -> Result<Self> {
        let pinv = pseudo_inverse(&modes)?;
        let basis = Self { modes, singular_values, h_d, mode_tag, variant, decimation, pinv };
        basis.check_invariants(1e-10)?;
        Ok(basis)
    }

    /// Number of retained modes.
    pub fn order(&self) -> usize {
        self.modes.ncols()
    }

    /// Number of coarse intervals `M`.
    pub fn intervals(&self) -> usize {
        self.modes.nrows() - 1
    }

    /// Leading `order` modes of this basis.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order == 0 || order > self.order() {
            return Err(Error::Config(format!(
                "requested {order} modes but the basis retains {}",
                self.order()
            )));
        }
        Self::new(
            self.modes.columns(0, order).into_owned(),
            self.singular_values.clone(),
            self.h_d,
            self.mode_tag,
            self.variant,
            self.decimation,
        )
    }

    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let r = self.order();
        let gram = self.h_d * self.modes.transpose() * &self.modes;
        let err = (gram - DMatrix::<f64>::identity(r, r)).abs().max();
        if err > tol {
            return Err(Error::Config(format!("basis is not orthonormal (error {err:.3e})")));
        }
        let last = self.modes.nrows() - 1;
        for k in 0..r {
            let tail_free = self.variant == RomVariant::Baseline;
            if self.modes[(0, k)].abs() > tol || (!tail_free && self.modes[(last, k)].abs() > tol) {
                return Err(Error::Config(format!("mode {k} does not vanish at the boundary")));
            }
        }
        if self.singular_values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("singular values must be non-increasing".into()));
        }
        Ok(())
    }

    /// Moore-Penrose pseudoinverse of the sampled modes (`R x (M + 1)`).
    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Modal coefficients of a sampled field (one `Vec3` per mode).
    pub fn project(&self, field: &[Vec3]) -> Result<Vec<Vec3>> {
        if field.len() != self.modes.nrows() {
            return Err(Error::GridMismatch(format!(
                "field has {} samples, basis expects {}",
                field.len(),
                self.modes.nrows()
            )));
        }
        Ok((0..self.order())
            .map(|k| field.iter().enumerate().map(|(i, x)| self.pinv[(k, i)] * x).sum())
            .collect())
    }

    /// Field described by modal coefficients `a`.
    pub fn expand(&self, a: &[Vec3]) -> Vec<Vec3> {
        (0..self.modes.nrows())
            .map(|i| a.iter().enumerate().map(|(k, ak)| self.modes[(i, k)] * ak).sum())
            .collect()
    }

    fn same_grid(&self, other: &PodBasis) -> Result<()> {
        if self.modes.nrows() != other.modes.nrows() || (self.h_d - other.h_d).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "bases sampled on {} and {} points",
                self.modes.nrows(),
                other.modes.nrows()
            )));
        }
        Ok(())
    }

    /// Matrix mapping coefficients in `from` to coefficients in `self`.
    pub fn transfer_matrix(&self, from: &PodBasis) -> Result<DMatrix<f64>> {
        self.same_grid(from)?;
        Ok(&self.pinv * &from.modes)
    }
}

fn pseudo_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::DegenerateTraining);
    }
    svd.pseudo_inverse(1e-10 * smax).map_err(|e| Error::Config(e.to_string()))
}

/// POD modes from the SVD of the mode-2 unfolding, normalised with
/// `(1/h_d)^(1/2)` and with numerically null directions dropped.
pub fn extract_basis(snapshots: &SnapshotTensor) -> Result<PodBasis> {
    snapshots.validate()?;
    let x = snapshots.unfolding();
    let m1 = x.nrows();
    let svd = x.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma1 = svd.singular_values[order[0]];
    if !(sigma1 > 0.0) {
        return Err(Error::DegenerateTraining);
    }
    let cap = snapshots.variant.max_modes(m1 - 1);
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| svd.singular_values[k] >= 1e-12 * sigma1)
        .take(cap)
        .collect();
    let scale = (1.0 / snapshots.h_d).sqrt();
    let mut modes = DMatrix::<f64>::zeros(m1, kept.len());
    for (c, &k) in kept.iter().enumerate() {
        let mut col = u.column(k).into_owned();
        // Fixed sign: largest-magnitude sample positive.
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        modes.set_column(c, &(col * scale));
    }
    // Boundary samples of the singular vectors are zero up to round-off.
    modes.row_mut(0).fill(0.0);
    if snapshots.variant == RomVariant::Proposed {
        modes.row_mut(m1 - 1).fill(0.0);
    }
    let singular_values = kept.iter().map(|&k| svd.singular_values[k]).collect();
    let mut grid_d = 1;
    if snapshots.grid.len() >= 2 {
        grid_d = snapshots.grid[1] - snapshots.grid[0];
    }
    PodBasis::new(modes, singular_values, snapshots.h_d, snapshots.mode, snapshots.variant, grid_d)
}

/// Relative energy `sigma_m^2 / sum sigma_j^2` of each retained singular value.
pub fn mode_energy(basis: &PodBasis) -> Vec<f64> {
    energy_fractions(&basis.singular_values)
}

pub fn energy_fractions(sigma: &[f64]) -> Vec<f64> {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    sigma.iter().map(|s| s * s / total).collect()
}

/// Coarse-grid node positions from modal coefficients and boundary positions.
pub fn reconstruct(a: &[Vec3], r0: &Vec3, r_n: &Vec3, basis: &PodBasis) -> Vec<Vec3> {
    let m = basis.intervals();
    let fluct = basis.expand(a);
    (0..=m)
        .map(|j| match basis.variant {
            RomVariant::Proposed => reference_segment(r0, r_n, j, m) + fluct[j],
            RomVariant::Baseline => r0 + fluct[j],
        })
        .collect()
}

/// Coefficients in `to` of the field described by `a_prime` in `from`.
pub fn change_basis(a_prime: &[Vec3], from: &PodBasis, to: &PodBasis) -> Result<Vec<Vec3>> {
    let t = to.transfer_matrix(from)?;
    if a_prime.len() != from.order() {
        return Err(Error::GridMismatch("coefficient count differs from basis order".into()));
    }
    Ok((0..to.order())
        .map(|k| a_prime.iter().enumerate().map(|(m, a)| t[(k, m)] * a).sum())
        .collect())
}

/// Flattened persistence layout of a basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFile {
    pub schema_version: u32,
    pub variant: RomVariant,
    pub mode: Mode,
    pub decimation: usize,
    /// Number of coarse intervals `M`.
    pub m: usize,
    /// Number of stored modes `R`.
    pub r: usize,
    pub h_d: f64,
    /// `(M + 1) x R` mode samples, row-major.
    pub modes: Vec<f64>,
    pub singular_values: Vec<f64>,
}

pub const BASIS_SCHEMA_VERSION: u32 = 1;

impl PodBasis {
    pub fn to_file(&self) -> BasisFile {
        let m1 = self.modes.nrows();
        let r = self.order();
        let modes = (0..m1).flat_map(|i| (0..r).map(move |k| (i, k))).map(|(i, k)| self.modes[(i, k)]).collect();
        BasisFile {
            schema_version: BASIS_SCHEMA_VERSION,
            variant: self.variant,
            mode: self.mode_tag,
            decimation: self.decimation,
            m: m1 - 1,
            r,
            h_d: self.h_d,
            modes,
            singular_values: self.singular_values.clone(),
        }
    }

    pub fn from_file(file: &BasisFile) -> Result<Self> {
        if file.schema_version != BASIS_SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported basis schema {}", file.schema_version)));
        }
        if file.modes.len() != (file.m + 1) * file.r {
            return Err(Error::GridMismatch("mode sample count does not match dimensions".into()));
        }
        let modes = DMatrix::from_row_slice(file.m + 1, file.r, &file.modes);
        Self::new(modes, file.singular_values.clone(), file.h_d, file.mode, file.variant, file.decimation)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::metrics::write_atomic(path, serde_json::to_string_pretty(&self.to_file())?.as_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: BasisFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }
}

/// Column vector helper used by tests and the reduced models.
pub fn flatten(v: &[Vec3]) -> DVector<f64> {
    DVector::from_iterator(3 * v.len(), v.iter().flat_map(|x| [x.x, x.y, x.z]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shape(j: usize, m: usize, freq: f64) -> f64 {
        (std::f64::consts::PI * freq * j as f64 / m as f64).sin()
    }

    fn tensor(data: Vec<Vec<Vec3>>, m: usize) -> SnapshotTensor {
        let o = data.len();
        SnapshotTensor {
            data,
            grid: (0..=m).map(|j| 10 * j).collect(),
            times: (0..o).map(|j| j as f64).collect(),
            h_d: 1.0 / m as f64,
            variant: RomVariant::Proposed,
            mode: Mode::FreeTip,
        }
    }

    #[test]
    fn segment_endpoints() {
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-1.0, 0.0, 5.0);
        assert_eq!(reference_segment(&a, &b, 0, 10), a);
        assert_relative_eq!(reference_segment(&a, &b, 10, 10), b, epsilon = 1e-15);
        assert_relative_eq!(
            reference_segment(&Vec3::zeros(), &Vec3::x(), 5, 10),
            Vec3::new(0.5, 0.0, 0.0),
            epsilon = 1e-15
        );
        let coarse: Vec<Vec3> = (0..=10).map(|j| Vec3::new(j as f64, (j as f64).sin(), 0.0)).collect();
        let f = snapshot_field(&coarse, RomVariant::Proposed);
        assert_eq!(f[0], Vec3::zeros());
        assert!(f[10].norm() < 1e-15);
    }

    #[test]
    fn rank_one_snapshots_give_one_mode() {
        let m = 10;
        let psi: Vec<f64> = (0..=m).map(|j| shape(j, m, 1.0)).collect();
        let data = (0..20)
            .map(|t| {
                let amp = Vec3::new(0.1 * t as f64, -0.05 * t as f64, 0.02);
                let mut s: Vec<Vec3> = psi.iter().map(|p| amp * *p).collect();
                s[m] = Vec3::zeros();
                s
            })
            .collect();
        let basis = extract_basis(&tensor(data, m)).unwrap();
        assert_eq!(basis.order(), 1);
        assert_eq!(mode_energy(&basis), vec![1.0]);
        let col = basis.modes.column(0);
        let ratio = col[3] / psi[3];
        for j in 1..m {
            assert_relative_eq!(col[j], ratio * psi[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_training_is_rejected() {
        let data = vec![vec![Vec3::zeros(); 11]; 10];
        assert!(matches!(extract_basis(&tensor(data, 10)), Err(Error::DegenerateTraining)));
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_fractions(&[3.0]), vec![1.0]);
        let e = energy_fractions(&[2.0, 1.0]);
        assert_relative_eq!(e[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(e[1], 0.2, epsilon = 1e-15);
    }

    fn rich_basis() -> (SnapshotTensor, PodBasis) {
        let m = 10;
        let data: Vec<Vec<Vec3>> = (0..40)
            .map(|t| {
                let t = t as f64 * 0.37;
                (0..=m)
                    .map(|j| {
                        let mut x = Vec3::zeros();
                        for f in 1..6 {
                            let w = 1.0 / (f * f) as f64;
                            x += Vec3::new(
                                w * (t * f as f64).sin(),
                                w * (1.3 * t + f as f64).cos(),
                                w * (0.7 * t * f as f64).sin(),
                            ) * shape(j, m, f as f64);
                        }
                        if j == m {
                            Vec3::zeros()
                        } else {
                            x
                        }
                    })
                    .collect()
            })
            .collect();
        let t = tensor(data, m);
        let b = extract_basis(&t).unwrap();
        (t, b)
    }

    #[test]
    fn basis_is_orthonormal_and_vanishes_at_ends() {
        let (_, b) = rich_basis();
        assert!(b.order() <= 9);
        b.check_invariants(1e-10).unwrap();
        let e = mode_energy(&b);
        assert_relative_eq!(e.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn project_expand_round_trips() {
        let (t, b) = rich_basis();
        assert_eq!(b.project(&vec![Vec3::zeros(); 11]).unwrap(), vec![Vec3::zeros(); b.order()]);
        let a0: Vec<Vec3> = (0..b.order()).map(|k| Vec3::new(k as f64, 1.0 - k as f64, 0.5)).collect();
        let back = b.project(&b.expand(&a0)).unwrap();
        for (x, y) in a0.iter().zip(&back) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
        // full retained rank reproduces every training snapshot
        for snap in &t.data {
            let rec = b.expand(&b.project(snap).unwrap());
            for (x, y) in snap.iter().zip(&rec) {
                assert_relative_eq!(x, y, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn reconstruction_error_non_increasing_in_order() {
        let (t, b) = rich_basis();
        for snap in &t.data {
            let mut prev = f64::INFINITY;
            for r in 1..=b.order() {
                let br = b.truncated(r).unwrap();
                let rec = br.expand(&br.project(snap).unwrap());
                let err: f64 = snap.iter().zip(&rec).map(|(x, y)| (x - y).norm_squared()).sum();
                assert!(err <= prev + 1e-12);
                prev = err;
            }
        }
    }

    #[test]
    fn reconstruct_keeps_boundaries_and_is_idempotent() {
        let (_, b) = rich_basis();
        let b = b.truncated(3).unwrap();
        let r0 = Vec3::new(0.0, 0.0, 2.0);
        let rn = Vec3::new(0.2, 0.1, 0.9);
        let straight = reconstruct(&vec![Vec3::zeros(); 3], &r0, &rn, &b);
        for (j, x) in straight.iter().enumerate() {
            assert_relative_eq!(*x, reference_segment(&r0, &rn, j, 10), epsilon = 1e-15);
        }
        let a = vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, -0.2, 0.1), Vec3::new(0.03, 0.0, 0.0)];
        let nodes = reconstruct(&a, &r0, &rn, &b);
        assert_eq!(nodes[0], r0);
        assert_eq!(nodes[10], rn);

        let wiggly: Vec<Vec3> = (0..=10)
            .map(|j| reference_segment(&r0, &rn, j, 10) + Vec3::new((j as f64).sin(), 0.0, (j * j) as f64 * 0.01))
            .collect();
        let once = reconstruct(&b.project(&snapshot_field(&wiggly, RomVariant::Proposed)).unwrap(), &r0, &rn, &b);
        let twice = reconstruct(&b.project(&snapshot_field(&once, RomVariant::Proposed)).unwrap(), &r0, &rn, &b);
        for (x, y) in once.iter().zip(&twice) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn change_basis_identity_and_mismatch() {
        let (_, b) = rich_basis();
        let a: Vec<Vec3> = (0..b.order()).map(|k| Vec3::new(0.1 * k as f64, 0.2, -0.3)).collect();
        let same = change_basis(&a, &b, &b).unwrap();
        for (x, y) in a.iter().zip(&same) {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
        let mut other = b.clone();
        other.h_d = 0.2;
        assert!(change_basis(&a, &b, &other).is_err());
    }

    #[test]
    fn persistence_round_trip() {
        let (_, b) = rich_basis();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.json");
        b.save(&path).unwrap();
        let loaded = PodBasis::load(&path).unwrap();
        assert_eq!(loaded.modes, b.modes);
        assert_eq!(loaded.singular_values, b.singular_values);
        assert_eq!(loaded.mode_tag, b.mode_tag);
    }
}
