//! Quadratic Stark effect on the trapping potential of a polarizable ion.
//!
//! Averaged over the drive period, the rf field adds `dU = -alpha A^2 c (x^2 + y^2)`
//! to the pseudopotential, with `c = 1 + 3q^2/16` when intrinsic micromotion is
//! accounted for and `c = 1` otherwise. Everything below follows from that term.

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result, Warning};
use crate::trap::{
    equilibrium_from_offset, mean_square_field_with, secular_from_gradients, EquilibriumPosition,
    OffsetField, SecularFrequencies, TrapConfig,
};
use crate::units::HBAR;

/// Threshold on `|alpha A^2 c| / (M omega^2 / 2)` above which the perturbative
/// treatment is flagged.
pub const PERTURBATION_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizableState {
    pub label: String,
    /// Scalar polarizability, C m^2 / V. May be negative.
    pub polarizability: f64,
}

impl PolarizableState {
    pub fn new(label: impl Into<String>, polarizability: f64) -> Result<Self> {
        if !polarizability.is_finite() {
            return Err(Error::InvalidInput("polarizability must be finite".into()));
        }
        Ok(Self {
            label: label.into(),
            polarizability,
        })
    }
}

/// Harmonic potential seen by one electronic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapPotential {
    pub frequencies: SecularFrequencies,
    pub equilibrium: EquilibriumPosition,
    /// Offset of the potential minimum relative to the unperturbed one, J.
    pub minimum_offset: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhononOccupation {
    pub nx: u32,
    pub ny: u32,
}

impl PhononOccupation {
    pub fn new(nx: u32, ny: u32) -> Self {
        Self { nx, ny }
    }
}

/// Minimum-energy shift `delta`: the exact value and the leading-order Stark form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkDelta {
    /// J
    pub exact: f64,
    /// `-alpha <E(r_eq,t)^2> / 2`, J
    pub approximate: f64,
}

fn correction(cfg: &TrapConfig, on: bool) -> f64 {
    if on {
        cfg.micromotion_factor()
    } else {
        1.0
    }
}

/// `2 alpha A^2 c / M`, the reduction of the squared radial frequencies.
fn stiffness_shift(
    cfg: &TrapConfig,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> f64 {
    2.0 * state.polarizability * cfg.grad_rf.powi(2) * correction(cfg, micromotion_correction)
        / cfg.species.mass
}

fn radial_squared(
    cfg: &TrapConfig,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<(SecularFrequencies, [f64; 2])> {
    let w = secular_from_gradients(cfg)?;
    let k = stiffness_shift(cfg, state, micromotion_correction);
    let sq = [w.x * w.x - k, w.y * w.y - k];
    for (axis, w2) in [(Axis::X, sq[0]), (Axis::Y, sq[1])] {
        if !(w2 > 0.0) {
            return Err(Error::AntiTrapped {
                label: state.label.clone(),
                axis,
                omega_sq: w2,
            });
        }
    }
    Ok((w, sq))
}

pub fn stark_frequencies(
    cfg: &TrapConfig,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<SecularFrequencies> {
    let (w, sq) = radial_squared(cfg, state, micromotion_correction)?;
    Ok(SecularFrequencies {
        x: sq[0].sqrt(),
        y: sq[1].sqrt(),
        z: w.z,
    })
}

/// Flags states whose Stark term is not small next to the radial stiffness.
pub fn perturbation_warnings(
    cfg: &TrapConfig,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<Vec<Warning>> {
    let w = secular_from_gradients(cfg)?;
    let stark =
        (state.polarizability * cfg.grad_rf.powi(2) * correction(cfg, micromotion_correction))
            .abs();
    let mut out = Vec::new();
    for (axis, wi) in [(Axis::X, w.x), (Axis::Y, w.y)] {
        let ratio = stark / (0.5 * cfg.species.mass * wi * wi);
        if ratio > PERTURBATION_THRESHOLD {
            out.push(Warning::PerturbationInvalid {
                label: state.label.clone(),
                axis,
                ratio,
                threshold: PERTURBATION_THRESHOLD,
            });
        }
    }
    Ok(out)
}

pub fn stark_equilibrium(
    cfg: &TrapConfig,
    offset: &OffsetField,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<EquilibriumPosition> {
    let r = equilibrium_from_offset(cfg, offset)?;
    let (w, _) = radial_squared(cfg, state, micromotion_correction)?;
    let k = stiffness_shift(cfg, state, micromotion_correction);
    Ok(EquilibriumPosition {
        x: r.x / (1.0 - k / (w.x * w.x)),
        y: r.y / (1.0 - k / (w.y * w.y)),
    })
}

/// Shift of the potential minimum,
/// `delta = M/2 (w_x^2 x_eq^2 + w_y^2 y_eq^2 - w_x'^2 x_eq'^2 - w_y'^2 y_eq'^2)`.
///
/// The exact value is evaluated in the algebraically equivalent form
/// `-M/2 sum_i w_i^2 x_i^2 (w_i^2 - w_i'^2) / w_i'^2`, which avoids the
/// cancellation between the four terms for small polarizabilities.
pub fn stark_delta(
    cfg: &TrapConfig,
    offset: &OffsetField,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<StarkDelta> {
    let r = equilibrium_from_offset(cfg, offset)?;
    let (w, sq) = radial_squared(cfg, state, micromotion_correction)?;
    let k = stiffness_shift(cfg, state, micromotion_correction);
    let m = cfg.species.mass;
    let exact = -0.5 * m * (r.x * r.x * w.x * w.x * k / sq[0] + r.y * r.y * w.y * w.y * k / sq[1]);
    let approximate =
        -0.5 * state.polarizability * mean_square_field_with(cfg, &r, micromotion_correction);
    Ok(StarkDelta { exact, approximate })
}

pub fn trap_potential(
    cfg: &TrapConfig,
    offset: &OffsetField,
    state: &PolarizableState,
    micromotion_correction: bool,
) -> Result<TrapPotential> {
    Ok(TrapPotential {
        frequencies: stark_frequencies(cfg, state, micromotion_correction)?,
        equilibrium: stark_equilibrium(cfg, offset, state, micromotion_correction)?,
        minimum_offset: stark_delta(cfg, offset, state, micromotion_correction)?.exact,
    })
}

/// Radial frequency changes `(w_x'(a2) - w_x'(a1), w_y'(a2) - w_y'(a1))` in rad/s.
pub fn mode_shifts(
    cfg: &TrapConfig,
    from: &PolarizableState,
    to: &PolarizableState,
    micromotion_correction: bool,
) -> Result<(f64, f64)> {
    let a = stark_frequencies(cfg, from, micromotion_correction)?;
    let b = stark_frequencies(cfg, to, micromotion_correction)?;
    Ok((b.x - a.x, b.y - a.y))
}

/// Phonon-number dependent change of the transition energy between two states, J.
pub fn transition_shift(
    cfg: &TrapConfig,
    from: &PolarizableState,
    to: &PolarizableState,
    n: PhononOccupation,
    micromotion_correction: bool,
) -> Result<f64> {
    let (dx, dy) = mode_shifts(cfg, from, to, micromotion_correction)?;
    Ok(HBAR * ((n.nx as f64 + 0.5) * dx + (n.ny as f64 + 0.5) * dy))
}

/// `(alpha <E^2> / 2) / (hbar 2 Omega)`. Stark sidebands at even multiples of the
/// drive frequency are negligible when this is much smaller than one. Signed, so
/// linear in the polarizability.
pub fn sideband_ratio_from_field(
    polarizability: f64,
    mean_square_field: f64,
    drive_freq: f64,
) -> f64 {
    0.5 * polarizability * mean_square_field / (HBAR * 2.0 * drive_freq)
}

/// Stark-sideband criterion at the equilibrium position set by `offset`, with the
/// micromotion factor included in the mean square field.
pub fn stark_sideband_ratio(
    cfg: &TrapConfig,
    offset: &OffsetField,
    state: &PolarizableState,
) -> Result<f64> {
    let r = equilibrium_from_offset(cfg, offset)?;
    let msq = mean_square_field_with(cfg, &r, true);
    Ok(sideband_ratio_from_field(
        state.polarizability,
        msq,
        cfg.drive_freq,
    ))
}
