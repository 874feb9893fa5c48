//! Physical constants of the cable, the UAV and the payload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Unit vector along the world vertical.
pub fn e_z() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Discrete state of the hybrid system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nothing attached to the distal end.
    #[default]
    FreeTip,
    /// Payload rigidly attached to the distal node.
    Slung,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::FreeTip => 0,
            Mode::Slung => 1,
        }
    }

    pub fn from_index(q: usize) -> Option<Mode> {
        match q {
            0 => Some(Mode::FreeTip),
            1 => Some(Mode::Slung),
            _ => None,
        }
    }
}

/// Cable, UAV and payload constants. Defaults are the reference system used
/// throughout the experiments (1 m cable, 0.3 kg vehicle, 0.1 kg payload).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CableParams {
    /// Rest length (m).
    pub length: f64,
    /// Number of intervals of the fine grid.
    pub divisions: usize,
    /// Cable density (kg/m^3).
    pub density: f64,
    /// Cross-section area (m^2).
    pub area: f64,
    /// Young modulus (Pa).
    pub young_modulus: f64,
    /// Cable drag coefficient, force per unit length per squared speed (kg/m^2).
    pub cable_drag: f64,
    /// UAV mass (kg).
    pub uav_mass: f64,
    /// Payload mass (kg).
    pub payload_mass: f64,
    /// Payload drag coefficient (kg/m).
    pub payload_drag: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
}

impl Default for CableParams {
    fn default() -> Self {
        Self {
            length: 1.0,
            divisions: 100,
            density: 1.27e3,
            area: 7.85e-5,
            young_modulus: 1e5,
            cable_drag: 1.29e-2,
            uav_mass: 0.3,
            payload_mass: 0.1,
            payload_drag: 1.29e-2,
            gravity: 9.81,
        }
    }
}

impl CableParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("density", self.density),
            ("area", self.area),
            ("young_modulus", self.young_modulus),
            ("uav_mass", self.uav_mass),
            ("payload_mass", self.payload_mass),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        // Drag and gravity may be switched off for conservative checks.
        let non_negative = [
            ("cable_drag", self.cable_drag),
            ("payload_drag", self.payload_drag),
            ("gravity", self.gravity),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {value}")));
            }
        }
        if self.divisions < 2 {
            return Err(Error::Config(format!(
                "divisions must be at least 2, got {}",
                self.divisions
            )));
        }
        Ok(())
    }

    /// Fine grid step `L / N`.
    pub fn grid_step(&self) -> f64 {
        self.length / self.divisions as f64
    }

    /// Mass per unit length `rho * A`.
    pub fn linear_density(&self) -> f64 {
        self.density * self.area
    }

    /// Axial stiffness `E * A`.
    pub fn axial_stiffness(&self) -> f64 {
        self.young_modulus * self.area
    }

    pub fn cable_mass(&self) -> f64 {
        self.linear_density() * self.length
    }

    /// Mass carried at the tip in mode `mode` (payload or nothing).
    pub fn tip_mass(&self, mode: Mode) -> f64 {
        match mode {
            Mode::FreeTip => 0.0,
            Mode::Slung => self.payload_mass,
        }
    }

    /// Total weight the vehicle must carry to hover in `mode`.
    pub fn hover_force(&self, mode: Mode) -> Vec3 {
        (self.uav_mass + self.cable_mass() + self.tip_mass(mode)) * self.gravity * e_z()
    }

    /// Length of the cable hanging at rest under gravity, including the
    /// stretch from its own weight and the tip load.
    pub fn hanging_length(&self, mode: Mode, gravity: f64) -> f64 {
        let l = self.length;
        let ea = self.axial_stiffness();
        l + (self.linear_density() * gravity * l * l / 2.0 + self.tip_mass(mode) * gravity * l) / ea
    }
}
