//! Trapping potentials, excitation spectra and coherent dynamics of highly
//! polarizable ions in linear Paul traps.
//!
//! Units are SI throughout, with angular frequencies in rad/s.

pub mod dynamics;
pub mod error;
pub mod gauss_hermite;
pub mod lsq;
pub mod ode;
pub mod overlap;
pub mod spectra;
pub mod stark;
pub mod trap;
pub mod units;

pub use dynamics::{
    contrast, evolve, monte_carlo_band, phonon_detuning, propagate, thermal_distribution,
    weighted_population, BandPoint, DensityState, Level, LevelScheme, ModeShifts,
    ParameterEnsemble, PhononDistribution, Uncertain,
};
pub use error::{Axis, Error, Result, Warning};
pub use overlap::{
    line_weights, overlap, overlap_matrix, overlap_matrix_with, LineWeights, OscillatorSpec,
    OverlapMatrix, OverlapOptions,
};
pub use spectra::{
    center_correction, find_peaks, fit_quadratic_turning_point, fit_spectrum, residual_field_limit,
    scattering_rate, survival_probability, synthesize_scan, CenterShiftLines, FreeParameters,
    LineModel, QuadraticScan, SignalKind, SpectrumFit, SpectrumModel, SpectrumParams, SpectrumScan,
    TrapTransition, TurningPoint, TurningPointErrors,
};
pub use stark::{
    mode_shifts, perturbation_warnings, stark_delta, stark_equilibrium, stark_frequencies,
    stark_sideband_ratio, transition_shift, trap_potential, PhononOccupation, PolarizableState,
    StarkDelta, TrapPotential,
};
pub use trap::{
    effective_lamb_dicke, equilibrium_from_offset, gradients_from_secular, mathieu_q,
    mean_square_field, secular_from_gradients, BeamGeometry, EquilibriumPosition, OffsetField,
    SecularFrequencies, TrapConfig,
};
pub use units::IonSpecies;
