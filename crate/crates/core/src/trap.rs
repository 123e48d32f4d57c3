//! Linear Paul trap description.
//!
//! The trap potential near the centre is
//! `Phi(t) = A cos(Omega t)(x^2 - y^2) - B((1+eps)(x-x_dc)^2 + (1-eps)(y-y_dc)^2 - 2z^2)`
//! and the secular motion is described by the harmonic pseudopotential.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::units::{IonSpecies, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Drive frequency Omega, rad/s.
    pub drive_freq: f64,
    /// Oscillating quadrupole gradient A, V/m^2.
    pub grad_rf: f64,
    /// Static quadrupole gradient B, V/m^2.
    pub grad_dc: f64,
    /// Radial asymmetry eps.
    pub asymmetry: f64,
    pub species: IonSpecies,
}

impl TrapConfig {
    /// Builds a configuration and checks that every axis is confining.
    pub fn new(
        drive_freq: f64,
        grad_rf: f64,
        grad_dc: f64,
        asymmetry: f64,
        species: IonSpecies,
    ) -> Result<Self> {
        let cfg = Self {
            drive_freq,
            grad_rf,
            grad_dc,
            asymmetry,
            species,
        };
        cfg.secular()?;
        Ok(cfg)
    }

    pub fn secular(&self) -> Result<SecularFrequencies> {
        secular_from_gradients(self)
    }

    pub fn mathieu_q(&self) -> f64 {
        mathieu_q(self)
    }

    /// `1 + 3q^2/16`, the intrinsic-micromotion enhancement of the mean square field.
    pub fn micromotion_factor(&self) -> f64 {
        micromotion_factor(self.mathieu_q())
    }
}

/// Secular (pseudopotential) angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularFrequencies {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SecularFrequencies {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        for (axis, w) in [(Axis::X, x), (Axis::Y, y), (Axis::Z, z)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "secular frequency along {axis} must be positive, got {w}"
                )));
            }
        }
        Ok(Self { x, y, z })
    }

    pub fn from_hz(fx: f64, fy: f64, fz: f64) -> Result<Self> {
        Self::new(2.0 * PI * fx, 2.0 * PI * fy, 2.0 * PI * fz)
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }
}

/// Static offset field (z component is zero).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OffsetField {
    /// V/m
    pub ex: f64,
    /// V/m
    pub ey: f64,
}

impl OffsetField {
    pub fn new(ex: f64, ey: f64) -> Result<Self> {
        if !(ex.is_finite() && ey.is_finite()) {
            return Err(Error::InvalidInput("offset field must be finite".into()));
        }
        Ok(Self { ex, ey })
    }

    /// Field that moves the static quadrupole null to `(x_dc, y_dc)`.
    pub fn from_dc_null(cfg: &TrapConfig, x_dc: f64, y_dc: f64) -> Self {
        let b = cfg.grad_dc;
        Self {
            ex: -2.0 * b * (1.0 + cfg.asymmetry) * x_dc,
            ey: -2.0 * b * (1.0 - cfg.asymmetry) * y_dc,
        }
    }

    /// Position of the static quadrupole null produced by this field.
    pub fn dc_null(&self, cfg: &TrapConfig) -> (f64, f64) {
        let b = cfg.grad_dc;
        (
            -self.ex / (2.0 * b * (1.0 + cfg.asymmetry)),
            -self.ey / (2.0 * b * (1.0 - cfg.asymmetry)),
        )
    }
}

/// Radial equilibrium position (z is always zero).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPosition {
    /// m
    pub x: f64,
    /// m
    pub y: f64,
}

impl EquilibriumPosition {
    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => 0.0,
        }
    }
}

/// Squared secular frequencies straight from the gradients, without the stability check.
pub fn secular_squared(cfg: &TrapConfig) -> [f64; 3] {
    let m = cfg.species.mass;
    let e = cfg.species.charge;
    let (a, b, eps, omega) = (cfg.grad_rf, cfg.grad_dc, cfg.asymmetry, cfg.drive_freq);
    let rf = 2.0 * e * e * a * a / (m * m * omega * omega);
    [
        rf - 2.0 * e * b * (1.0 + eps) / m,
        rf - 2.0 * e * b * (1.0 - eps) / m,
        4.0 * e * b / m,
    ]
}

pub fn secular_from_gradients(cfg: &TrapConfig) -> Result<SecularFrequencies> {
    if !(cfg.drive_freq.is_finite() && cfg.drive_freq > 0.0) {
        return Err(Error::InvalidInput(format!(
            "drive frequency must be positive, got {}",
            cfg.drive_freq
        )));
    }
    if ![cfg.grad_rf, cfg.grad_dc, cfg.asymmetry]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::InvalidInput("trap gradients must be finite".into()));
    }
    let sq = secular_squared(cfg);
    // axial first: B <= 0 means no axial confinement regardless of the radial terms
    for (axis, w2) in [(Axis::Z, sq[2]), (Axis::X, sq[0]), (Axis::Y, sq[1])] {
        if !(w2 > 0.0) {
            return Err(Error::Unstable { axis, omega_sq: w2 });
        }
    }
    Ok(SecularFrequencies {
        x: sq[0].sqrt(),
        y: sq[1].sqrt(),
        z: sq[2].sqrt(),
    })
}

pub fn gradients_from_secular(
    freqs: &SecularFrequencies,
    drive_freq: f64,
    species: IonSpecies,
) -> Result<TrapConfig> {
    let freqs = SecularFrequencies::new(freqs.x, freqs.y, freqs.z)?;
    if !(drive_freq.is_finite() && drive_freq > 0.0) {
        return Err(Error::InvalidInput(format!(
            "drive frequency must be positive, got {drive_freq}"
        )));
    }
    let m = species.mass;
    let e = species.charge;
    let (wx2, wy2, wz2) = (freqs.x.powi(2), freqs.y.powi(2), freqs.z.powi(2));
    Ok(TrapConfig {
        drive_freq,
        grad_rf: m * drive_freq / (2.0 * e) * (wx2 + wy2 + wz2).sqrt(),
        grad_dc: m * wz2 / (4.0 * e),
        asymmetry: (wy2 - wx2) / wz2,
        species,
    })
}

/// Mathieu q along x; q_y = -q_x.
pub fn mathieu_q(cfg: &TrapConfig) -> f64 {
    4.0 * cfg.species.charge * cfg.grad_rf / (cfg.species.mass * cfg.drive_freq.powi(2))
}

pub fn micromotion_factor(q: f64) -> f64 {
    1.0 + 3.0 * q * q / 16.0
}

/// Pseudopotential equilibrium under a static offset field: `x_eq = e E_x / (M omega_x^2)`.
pub fn equilibrium_from_offset(
    cfg: &TrapConfig,
    offset: &OffsetField,
) -> Result<EquilibriumPosition> {
    let w = secular_from_gradients(cfg)?;
    let k = cfg.species.charge / cfg.species.mass;
    Ok(EquilibriumPosition {
        x: k * offset.ex / (w.x * w.x),
        y: k * offset.ey / (w.y * w.y),
    })
}

/// Time-averaged `<E(r,t)^2>` of the rf quadrupole at a static position, including
/// the intrinsic-micromotion factor. The static-gradient contribution is neglected
/// (A^2 >> B^2).
pub fn mean_square_field(cfg: &TrapConfig, at: &EquilibriumPosition) -> f64 {
    let c = cfg.micromotion_factor();
    2.0 * cfg.grad_rf.powi(2) * (at.x * at.x * c + at.y * at.y * c)
}

/// Same as [`mean_square_field`] with the micromotion factor optional.
pub fn mean_square_field_with(
    cfg: &TrapConfig,
    at: &EquilibriumPosition,
    micromotion_correction: bool,
) -> f64 {
    if micromotion_correction {
        mean_square_field(cfg, at)
    } else {
        2.0 * cfg.grad_rf.powi(2) * (at.x * at.x + at.y * at.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamGeometry {
    Counterpropagating,
    Copropagating,
}

/// Lamb-Dicke parameter of a two-photon excitation along one mode.
pub fn effective_lamb_dicke(
    wavelength_1: f64,
    wavelength_2: f64,
    geometry: BeamGeometry,
    mode_freq: f64,
    species: IonSpecies,
) -> Result<f64> {
    if !(wavelength_1 > 0.0 && wavelength_2 > 0.0) {
        return Err(Error::InvalidInput("wavelengths must be positive".into()));
    }
    if !(mode_freq > 0.0) {
        return Err(Error::InvalidInput(
            "mode frequency must be positive".into(),
        ));
    }
    let (k1, k2) = (2.0 * PI / wavelength_1, 2.0 * PI / wavelength_2);
    let k_eff = match geometry {
        BeamGeometry::Counterpropagating => k1 - k2,
        BeamGeometry::Copropagating => k1 + k2,
    };
    Ok(k_eff.abs() * (HBAR / (2.0 * species.mass * mode_freq)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::hz_to_angular;

    fn reference_trap() -> TrapConfig {
        let w = SecularFrequencies::from_hz(1.76e6, 1.70e6, 0.87e6).unwrap();
        gradients_from_secular(&w, hz_to_angular(18.1e6), IonSpecies::sr88_plus()).unwrap()
    }

    #[test]
    fn forward_matches_quoted_frequencies() {
        let cfg = TrapConfig::new(
            hz_to_angular(18.1e6),
            8.5e8,
            6.8e6,
            -0.26,
            IonSpecies::sr88_plus(),
        )
        .unwrap();
        let w = cfg.secular().unwrap();
        // quoted values are rounded to two digits
        for (got, want) in [(w.x, 1.76e6), (w.y, 1.70e6), (w.z, 0.87e6)] {
            let f = got / (2.0 * PI);
            assert!((f / want - 1.0).abs() < 0.02, "{f} vs {want}");
        }
    }

    #[test]
    fn inverse_values() {
        let cfg = reference_trap();
        assert!(
            (cfg.grad_rf / 8.4534e8 - 1.0).abs() < 1e-4,
            "{}",
            cfg.grad_rf
        );
        assert!(
            (cfg.grad_dc / 6.8059e6 - 1.0).abs() < 1e-4,
            "{}",
            cfg.grad_dc
        );
        assert!((cfg.asymmetry + 0.27428).abs() < 1e-4, "{}", cfg.asymmetry);
        assert!((cfg.mathieu_q() - 0.28696).abs() < 1e-4);
    }

    #[test]
    fn zero_axial_gradient_is_unstable() {
        let err = TrapConfig::new(
            hz_to_angular(18.1e6),
            8.5e8,
            0.0,
            0.0,
            IonSpecies::sr88_plus(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unstable { axis: Axis::Z, .. }));
    }

    #[test]
    fn weak_rf_is_radially_unstable() {
        let err = TrapConfig::new(
            hz_to_angular(18.1e6),
            1.0e7,
            6.8e6,
            -0.26,
            IonSpecies::sr88_plus(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unstable { axis: Axis::X, .. }));
    }

    #[test]
    fn symmetric_radial_gives_zero_asymmetry() {
        let w = SecularFrequencies::from_hz(1.7e6, 1.7e6, 0.8e6).unwrap();
        let cfg =
            gradients_from_secular(&w, hz_to_angular(18.1e6), IonSpecies::sr88_plus()).unwrap();
        assert_eq!(cfg.asymmetry, 0.0);
    }

    #[test]
    fn doubling_frequencies_scales_gradients() {
        let sp = IonSpecies::sr88_plus();
        let om = hz_to_angular(18.1e6);
        let w = SecularFrequencies::from_hz(1.76e6, 1.70e6, 0.87e6).unwrap();
        let w2 = SecularFrequencies::new(2.0 * w.x, 2.0 * w.y, 2.0 * w.z).unwrap();
        let a = gradients_from_secular(&w, om, sp).unwrap();
        let b = gradients_from_secular(&w2, om, sp).unwrap();
        assert!((b.grad_rf / a.grad_rf - 2.0).abs() < 1e-14);
        assert!((b.grad_dc / a.grad_dc - 4.0).abs() < 1e-14);
        assert!((b.asymmetry - a.asymmetry).abs() < 1e-14);
    }

    #[test]
    fn micromotion_factor_at_reference_q() {
        assert!((micromotion_factor(0.29) - 1.015_768_75).abs() < 1e-12);
        let f = reference_trap().micromotion_factor();
        assert!((f - 1.0154).abs() < 1e-3);
    }

    #[test]
    fn q_vanishes_without_rf() {
        let mut cfg = reference_trap();
        cfg.grad_rf = 0.0;
        assert_eq!(mathieu_q(&cfg), 0.0);
    }

    #[test]
    fn equilibrium_under_offset() {
        let cfg = reference_trap();
        let r0 = equilibrium_from_offset(&cfg, &OffsetField::default()).unwrap();
        assert_eq!(r0, EquilibriumPosition { x: 0.0, y: 0.0 });

        let r1 = equilibrium_from_offset(&cfg, &OffsetField::new(1.0, 0.0).unwrap()).unwrap();
        assert!((r1.x - 8.9756e-9).abs() < 1e-12, "{}", r1.x);
        let r2 = equilibrium_from_offset(&cfg, &OffsetField::new(2.0, 0.0).unwrap()).unwrap();
        assert!((r2.x / r1.x - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dc_null_mapping_matches_equilibrium_formula() {
        // x_eq = -2 e B (1+eps) x_dc / (M w_x^2)
        let cfg = reference_trap();
        let w = cfg.secular().unwrap();
        let (x_dc, y_dc) = (3.0e-7, -1.0e-7);
        let off = OffsetField::from_dc_null(&cfg, x_dc, y_dc);
        let r = equilibrium_from_offset(&cfg, &off).unwrap();
        let e = cfg.species.charge;
        let m = cfg.species.mass;
        let xe = -2.0 * e * cfg.grad_dc * (1.0 + cfg.asymmetry) * x_dc / (m * w.x * w.x);
        let ye = -2.0 * e * cfg.grad_dc * (1.0 - cfg.asymmetry) * y_dc / (m * w.y * w.y);
        assert!((r.x - xe).abs() < 1e-22);
        assert!((r.y - ye).abs() < 1e-22);
        let (bx, by) = off.dc_null(&cfg);
        assert!((bx - x_dc).abs() < 1e-20 && (by - y_dc).abs() < 1e-20);
    }

    #[test]
    fn mean_square_field_values() {
        let cfg = TrapConfig::new(
            hz_to_angular(18.1e6),
            8.5e8,
            6.8e6,
            -0.26,
            IonSpecies::sr88_plus(),
        )
        .unwrap();
        assert_eq!(
            mean_square_field(&cfg, &EquilibriumPosition::default()),
            0.0
        );
        let one = mean_square_field(&cfg, &EquilibriumPosition { x: 1e-6, y: 0.0 });
        assert!((one / 1.468e6 - 1.0).abs() < 1e-3, "{one}");
        let two = mean_square_field(&cfg, &EquilibriumPosition { x: 2e-6, y: 0.0 });
        assert!((two / one - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lamb_dicke() {
        let sp = IonSpecies::sr88_plus();
        let wz = hz_to_angular(800e3);
        let eta =
            effective_lamb_dicke(243e-9, 306e-9, BeamGeometry::Counterpropagating, wz, sp).unwrap();
        assert!((eta - 0.045).abs() < 1e-3, "{eta}");
        let zero =
            effective_lamb_dicke(306e-9, 306e-9, BeamGeometry::Counterpropagating, wz, sp).unwrap();
        assert_eq!(zero, 0.0);
        let quad = effective_lamb_dicke(
            243e-9,
            306e-9,
            BeamGeometry::Counterpropagating,
            4.0 * wz,
            sp,
        )
        .unwrap();
        assert!((quad / eta - 0.5).abs() < 1e-14);
        let co = effective_lamb_dicke(243e-9, 306e-9, BeamGeometry::Copropagating, wz, sp).unwrap();
        assert!(co > 5.0 * eta);
    }
}
