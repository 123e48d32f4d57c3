//! Physical constants (CODATA 2018, exact SI where defined) and unit helpers.
//!
//! Everything inside the crate is SI with angular frequencies in rad/s.
//! Conversion to Hz happens only at I/O boundaries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK / (2.0 * PI);
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Atomic mass of 88Sr used for the singly charged ion.
pub const SR88_ATOMIC_MASS_U: f64 = 87.905;

#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

#[inline]
pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Energy in J to the equivalent frequency in Hz.
#[inline]
pub fn joule_to_hz(e: f64) -> f64 {
    e / PLANCK
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ion mass must be positive, got {mass}"
            )));
        }
        if !(charge.is_finite() && charge > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ion charge must be positive, got {charge}"
            )));
        }
        Ok(Self { mass, charge })
    }

    /// Singly ionised atom of the given atomic mass (in u).
    pub fn singly_charged(atomic_mass_u: f64) -> Result<Self> {
        Self::new(
            atomic_mass_u * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            ELEMENTARY_CHARGE,
        )
    }

    pub fn sr88_plus() -> Self {
        Self {
            mass: SR88_ATOMIC_MASS_U * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            charge: ELEMENTARY_CHARGE,
        }
    }
}
