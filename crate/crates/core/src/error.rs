use std::fmt;

use serde::{Deserialize, Serialize};

/// Spatial axis of the trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("trap is unstable along {axis}: squared secular frequency {omega_sq:.6e} rad^2/s^2 is not positive")]
    Unstable { axis: Axis, omega_sq: f64 },

    #[error("state {label:?} is anti-trapped along {axis}: Stark-modified squared frequency {omega_sq:.6e} rad^2/s^2 is not positive")]
    AntiTrapped {
        label: String,
        axis: Axis,
        omega_sq: f64,
    },

    #[error("oscillators have different masses ({0:.6e} kg vs {1:.6e} kg)")]
    MassMismatch(f64, f64),

    #[error("overlap truncation too small: {0}")]
    TruncationTooSmall(String),

    #[error("phonon cutoff too small: truncated probability {truncated:.3e} exceeds {limit:.1e}")]
    CutoffTooSmall { truncated: f64, limit: f64 },

    #[error("fit did not converge within {iterations} iterations")]
    FitDiverged { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("integrator failure at t = {t:.6e} s: {reason}")]
    IntegratorFailure { t: f64, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Unstable { .. } => "Unstable",
            Error::AntiTrapped { .. } => "AntiTrapped",
            Error::MassMismatch(..) => "MassMismatch",
            Error::TruncationTooSmall(_) => "TruncationTooSmall",
            Error::CutoffTooSmall { .. } => "CutoffTooSmall",
            Error::FitDiverged { .. } => "FitDiverged",
            Error::DegenerateData(_) => "DegenerateData",
            Error::IntegratorFailure { .. } => "IntegratorFailure",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal diagnostics. The formulas stay evaluable when these are raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Warning {
    /// The Stark term is no longer small next to the trap stiffness.
    PerturbationInvalid {
        label: String,
        axis: Axis,
        /// |alpha A^2 c| / (M omega^2 / 2)
        ratio: f64,
        threshold: f64,
    },
    /// Fitted curvature has the opposite sign to the one implied by the polarizability.
    SignMismatch { curvature: f64, expected_sign: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::PerturbationInvalid {
                label,
                axis,
                ratio,
                threshold,
            } => write!(
                f,
                "state {label:?}: Stark term is {ratio:.3} of the {axis} trap stiffness (threshold {threshold})"
            ),
            Warning::SignMismatch {
                curvature,
                expected_sign,
            } => write!(
                f,
                "fitted curvature {curvature:.4e} does not have the expected sign {expected_sign:+}"
            ),
        }
    }
}
