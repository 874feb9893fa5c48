//! Node-level tracking cost with obstacle barriers.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use super::model::InternalModel;
use crate::error::{Error, Result};
use crate::obstacle::{Barrier, Obstacle};
use crate::params::{Mode, Vec3};

/// Diagonal-default weight description, expanded to matrices by
/// [`CostWeights::build`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub position: f64,
    pub velocity: f64,
    pub terminal_scale: f64,
    pub input: f64,
    /// Optional per-node multipliers (length `M + 1`).
    pub node_scale: Option<Vec<f64>>,
    pub barrier: Barrier,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { position: 20.0, velocity: 2.0, terminal_scale: 10.0, input: 1.0, node_scale: None, barrier: Barrier::default() }
    }
}

/// Quadratic weights in node space and on the input.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub stage: DMatrix<f64>,
    pub terminal: DMatrix<f64>,
    pub input: Matrix3<f64>,
    pub barrier: Barrier,
}

impl CostWeights {
    pub fn build(cfg: &WeightConfig, intervals: usize) -> Result<Self> {
        let n = intervals + 1;
        let scale = cfg.node_scale.clone().unwrap_or_else(|| vec![1.0; n]);
        if scale.len() != n {
            return Err(Error::Config(format!("node_scale needs {n} entries, got {}", scale.len())));
        }
        let diag = DVector::from_fn(6 * n, |i, _| {
            let node = (i % (3 * n)) / 3;
            let w = if i < 3 * n { cfg.position } else { cfg.velocity };
            w * scale[node]
        });
        let w = Self {
            stage: DMatrix::from_diagonal(&diag),
            terminal: DMatrix::from_diagonal(&(diag * cfg.terminal_scale)),
            input: Matrix3::identity() * cfg.input,
            barrier: cfg.barrier,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("stage", &self.stage), ("terminal", &self.terminal)] {
            if !s.is_square() || (s - s.transpose()).amax() > 1e-12 * s.amax().max(1.0) {
                return Err(Error::Config(format!("{name} weight must be square and symmetric")));
            }
            let min = s.clone().symmetric_eigen().eigenvalues.min();
            if min < -1e-12 {
                return Err(Error::Config(format!("{name} weight is not positive semidefinite")));
            }
        }
        if (self.input - self.input.transpose()).amax() > 1e-12 || self.input.cholesky().is_none() {
            return Err(Error::Config("input weight must be symmetric positive definite".into()));
        }
        if !(self.barrier.mu >= 0.0 && self.barrier.floor > 0.0 && self.barrier.range > self.barrier.floor) {
            return Err(Error::Config("barrier gain must be non-negative and 0 < floor < range".into()));
        }
        Ok(())
    }
}

/// Quadratic model of a stage cost.
#[derive(Debug, Clone)]
pub struct CostExpansion {
    pub value: f64,
    pub lx: DVector<f64>,
    pub lu: Vec3,
    pub lxx: DMatrix<f64>,
    pub luu: Matrix3<f64>,
}

/// Evaluates stage and terminal costs for an internal model.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub weights: CostWeights,
    pub obstacles: Vec<Obstacle>,
    /// Precomputed `P^T S P` and `P^T S_H P` per mode.
    hess: [DMatrix<f64>; 2],
    hess_terminal: [DMatrix<f64>; 2],
}

impl CostModel {
    pub fn new(model: &InternalModel, weights: CostWeights, obstacles: Vec<Obstacle>) -> Result<Self> {
        let n = 6 * (model.intervals() + 1);
        if weights.stage.nrows() != n || weights.terminal.nrows() != n {
            return Err(Error::GridMismatch(format!("node weights must be {n} x {n}")));
        }
        for o in &obstacles {
            o.validate()?;
        }
        let h = |m: Mode, s: &DMatrix<f64>| {
            let p = model.node_map(m);
            p.transpose() * s * p * 2.0
        };
        Ok(Self {
            hess: [h(Mode::FreeTip, &weights.stage), h(Mode::Slung, &weights.stage)],
            hess_terminal: [h(Mode::FreeTip, &weights.terminal), h(Mode::Slung, &weights.terminal)],
            weights,
            obstacles,
        })
    }

    fn barrier_terms(&self, model: &InternalModel, mode: Mode, y: &DVector<f64>, grad: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>) -> f64 {
        if self.obstacles.is_empty() {
            return 0.0;
        }
        let nodes = model.intervals() + 1;
        let p = model.node_map(mode);
        let mut value = 0.0;
        let mut acc: Option<(DVector<f64>, DMatrix<f64>)> = grad.as_ref().map(|_| {
            (DVector::zeros(3 * nodes), DMatrix::zeros(3 * nodes, 3 * nodes))
        });
        for j in 0..nodes {
            let x = Vec3::new(y[3 * j], y[3 * j + 1], y[3 * j + 2]);
            for o in &self.obstacles {
                let (b, db, ddb) = self.weights.barrier.eval(o.margin(&x));
                value += b;
                if let Some((gy, hy)) = acc.as_mut() {
                    let dc = o.margin_gradient(&x);
                    for r in 0..3 {
                        gy[3 * j + r] += db * dc[r];
                        for c in 0..3 {
                            hy[(3 * j + r, 3 * j + c)] += ddb * dc[r] * dc[c];
                        }
                    }
                }
            }
        }
        if let (Some((gx, hx)), Some((gy, hy))) = (grad, acc) {
            let pp = p.rows(0, 3 * nodes);
            *gx += pp.transpose() * gy;
            *hx += pp.transpose() * hy * pp;
        }
        value
    }

    /// Minimum obstacle margin over coarse nodes, or `+inf` without obstacles.
    pub fn min_margin(&self, model: &InternalModel, mode: Mode, z: &DVector<f64>) -> f64 {
        let y = model.node_map(mode) * z;
        let nodes = model.intervals() + 1;
        (0..nodes)
            .flat_map(|j| {
                let x = Vec3::new(y[3 * j], y[3 * j + 1], y[3 * j + 2]);
                self.obstacles.iter().map(move |o| o.margin(&x))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Extra weight `tip_w` on the tip position error, with its gradient and
    /// Hessian added to `grad` when given.
    fn tip_terms(&self, model: &InternalModel, mode: Mode, e: &DVector<f64>, tip_w: f64, grad: Option<(&mut DVector<f64>, &mut DMatrix<f64>)>) -> f64 {
        if tip_w == 0.0 {
            return 0.0;
        }
        let o = 3 * model.intervals();
        let et = e.rows(o, 3);
        if let Some((gx, hx)) = grad {
            let pt = model.node_map(mode).rows(o, 3);
            *gx += pt.transpose() * et * (2.0 * tip_w);
            *hx += pt.transpose() * pt * (2.0 * tip_w);
        }
        tip_w * et.norm_squared()
    }

    /// Stage cost value; `tip_w` adds a weight on the tip position error.
    pub fn stage(&self, model: &InternalModel, mode: Mode, z: &DVector<f64>, y_ref: &DVector<f64>, v: &Vec3, v_ref: &Vec3, tip_w: f64) -> f64 {
        let y = model.node_map(mode) * z;
        let e = &y - y_ref;
        let du = v - v_ref;
        e.dot(&(&self.weights.stage * &e))
            + du.dot(&(self.weights.input * du))
            + self.barrier_terms(model, mode, &y, None)
            + self.tip_terms(model, mode, &e, tip_w, None)
    }

    pub fn terminal(&self, model: &InternalModel, mode: Mode, z: &DVector<f64>, y_ref: &DVector<f64>, tip_w: f64) -> f64 {
        let y = model.node_map(mode) * z;
        let e = &y - y_ref;
        e.dot(&(&self.weights.terminal * &e)) + self.barrier_terms(model, mode, &y, None) + self.tip_terms(model, mode, &e, tip_w, None)
    }

    /// Value, gradient and Gauss-Newton Hessian of the stage cost.
    pub fn stage_expansion(&self, model: &InternalModel, mode: Mode, z: &DVector<f64>, y_ref: &DVector<f64>, v: &Vec3, v_ref: &Vec3, tip_w: f64) -> CostExpansion {
        let p = model.node_map(mode);
        let y = p * z;
        let e = &y - y_ref;
        let se = &self.weights.stage * &e;
        let du = v - v_ref;
        let wu = self.weights.input * du;
        let mut lx = p.transpose() * &se * 2.0;
        let mut lxx = self.hess[mode.index()].clone();
        let b = self.barrier_terms(model, mode, &y, Some((&mut lx, &mut lxx)));
        let tip = self.tip_terms(model, mode, &e, tip_w, Some((&mut lx, &mut lxx)));
        CostExpansion {
            value: e.dot(&se) + du.dot(&wu) + b + tip,
            lx,
            lu: wu * 2.0,
            lxx,
            luu: self.weights.input * 2.0,
        }
    }

    pub fn terminal_expansion(&self, model: &InternalModel, mode: Mode, z: &DVector<f64>, y_ref: &DVector<f64>, tip_w: f64) -> CostExpansion {
        let p = model.node_map(mode);
        let y = p * z;
        let e = &y - y_ref;
        let se = &self.weights.terminal * &e;
        let mut lx = p.transpose() * &se * 2.0;
        let mut lxx = self.hess_terminal[mode.index()].clone();
        let b = self.barrier_terms(model, mode, &y, Some((&mut lx, &mut lxx)));
        let tip = self.tip_terms(model, mode, &e, tip_w, Some((&mut lx, &mut lxx)));
        CostExpansion { value: e.dot(&se) + b + tip, lx, lu: Vec3::zeros(), lxx, luu: Matrix3::zeros() }
    }
}
