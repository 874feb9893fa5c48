//! Ellipsoidal exclusion regions and the smooth barrier used to avoid them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Vec3;

/// Axis-aligned ellipsoid, optionally unbounded along some axes (a cylinder
/// when one axis is unbounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: Vec3,
    pub semi_axes: Vec3,
    /// `true` for axes along which the region extends without bound.
    #[serde(default)]
    pub infinite_axes: [bool; 3],
}

impl Obstacle {
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !self.infinite_axes[k] && !(self.semi_axes[k] > 0.0) {
                return Err(Error::Config(format!("obstacle semi-axis {k} must be positive")));
            }
        }
        if self.infinite_axes.iter().all(|&b| b) {
            return Err(Error::Config("obstacle must be bounded along at least one axis".into()));
        }
        Ok(())
    }

    /// Copy grown by `clearance` along every bounded axis.
    pub fn inflated(&self, clearance: f64) -> Self {
        let mut o = self.clone();
        for k in 0..3 {
            if !o.infinite_axes[k] {
                o.semi_axes[k] += clearance;
            }
        }
        o
    }

    /// Signed margin: negative inside, zero on the surface, positive outside.
    pub fn margin(&self, p: &Vec3) -> f64 {
        obstacle_margin(p, self)
    }

    /// Gradient of [`Obstacle::margin`].
    pub fn margin_gradient(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|k, _| {
            if self.infinite_axes[k] {
                0.0
            } else {
                2.0 * (p[k] - self.center[k]) / (self.semi_axes[k] * self.semi_axes[k])
            }
        })
    }
}

/// `sum over bounded axes of ((p - c) / a)^2 - 1`.
pub fn obstacle_margin(p: &Vec3, obstacle: &Obstacle) -> f64 {
    (0..3)
        .filter(|&k| !obstacle.infinite_axes[k])
        .map(|k| ((p[k] - obstacle.center[k]) / obstacle.semi_axes[k]).powi(2))
        .sum::<f64>()
        - 1.0
}

/// Log barrier `mu (c/range - 1 - log(c/range))`, zero with zero slope at
/// and beyond `range`, continued by its second-order Taylor expansion below
/// `floor` so it stays finite for any `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Barrier {
    pub mu: f64,
    pub floor: f64,
    /// Margin beyond which the barrier vanishes.
    pub range: f64,
}

impl Default for Barrier {
    fn default() -> Self {
        Self { mu: 1e-2, floor: 1e-2, range: 3.0 }
    }
}

impl Barrier {
    /// Value, first and second derivative with respect to `c`.
    pub fn eval(&self, c: f64) -> (f64, f64, f64) {
        let (mu, r) = (self.mu, self.range);
        let log = |c: f64| (mu * (c / r - 1.0 - (c / r).ln()), mu * (1.0 / r - 1.0 / c), mu / (c * c));
        if c >= r {
            (0.0, 0.0, 0.0)
        } else if c >= self.floor {
            log(c)
        } else {
            let e = self.floor;
            let (b0, b1, b2) = log(e);
            let d = c - e;
            (b0 + b1 * d + 0.5 * b2 * d * d, b1 + b2 * d, b2)
        }
    }
}
