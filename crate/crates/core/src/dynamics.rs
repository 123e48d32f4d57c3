//! Four-level dynamics of two-photon Rydberg excitation.
//!
//! Levels are `|0>` (qubit), `|e>` (intermediate), `|r>` (Rydberg) and an
//! absorbing sink `|g>` that collects all decay. In the frame rotating with the
//! lasers and with `hbar = 1`,
//!
//! `H = D_e |e><e| + D_2 |r><r| + W_1/2 (|0><e| + h.c.) + W_2/2 (|e><r| + h.c.)`
//!
//! with detunings counted as transition minus laser frequency, and collapse
//! operators `sqrt(G_e) |g><e|`, `sqrt(G_r) |g><r|`.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerances};
use crate::stark::PhononOccupation;

pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;
/// Largest probability that may be discarded when truncating a thermal distribution.
pub const THERMAL_TRUNCATION_LIMIT: f64 = 1e-6;
pub const MIN_ENSEMBLE_SAMPLES: usize = 25;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Qubit = 0,
    Intermediate = 1,
    Rydberg = 2,
    Sink = 3,
}

/// Couplings and detunings in rad/s, decay rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    /// `|0> <-> |e>`
    pub rabi1: f64,
    /// `|e> <-> |r>`
    pub rabi2: f64,
    pub intermediate_detuning: f64,
    pub two_photon_detuning: f64,
    pub decay_intermediate: f64,
    pub decay_rydberg: f64,
}

impl LevelScheme {
    pub fn new(
        rabi1: f64,
        rabi2: f64,
        intermediate_detuning: f64,
        two_photon_detuning: f64,
        decay_intermediate: f64,
        decay_rydberg: f64,
    ) -> Result<Self> {
        let s = Self {
            rabi1,
            rabi2,
            intermediate_detuning,
            two_photon_detuning,
            decay_intermediate,
            decay_rydberg,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rabi1,
            self.rabi2,
            self.intermediate_detuning,
            self.two_photon_detuning,
            self.decay_intermediate,
            self.decay_rydberg,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "level scheme entries must be finite".into(),
            ));
        }
        if self.rabi1 < 0.0 || self.rabi2 < 0.0 {
            return Err(Error::InvalidInput(
                "Rabi frequencies must be non-negative".into(),
            ));
        }
        if self.decay_intermediate < 0.0 || self.decay_rydberg < 0.0 {
            return Err(Error::InvalidInput(
                "decay rates must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Two-photon Rabi frequency after eliminating `|e>`, `W_1 W_2 / (2 |D_e|)`.
    pub fn effective_rabi(&self) -> f64 {
        self.rabi1 * self.rabi2 / (2.0 * self.intermediate_detuning.abs())
    }

    pub fn hamiltonian(&self) -> Matrix4<Complex64> {
        let mut h = Matrix4::zeros();
        h[(1, 1)] = self.intermediate_detuning.into();
        h[(2, 2)] = self.two_photon_detuning.into();
        h[(0, 1)] = (0.5 * self.rabi1).into();
        h[(1, 0)] = (0.5 * self.rabi1).into();
        h[(1, 2)] = (0.5 * self.rabi2).into();
        h[(2, 1)] = (0.5 * self.rabi2).into();
        h
    }

    /// `H - i K / 2` restricted to `{|0>, |e>, |r>}`, with `K` the total decay.
    fn effective_block(&self) -> Matrix3<Complex64> {
        let h = self.hamiltonian();
        let mut b = h.fixed_view::<3, 3>(0, 0).into_owned();
        b[(1, 1)] -= I * (0.5 * self.decay_intermediate);
        b[(2, 2)] -= I * (0.5 * self.decay_rydberg);
        b
    }

    /// `d rho / dt` of the Lindblad equation.
    pub fn lindblad_rhs(&self, rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
        let mut heff = self.hamiltonian();
        heff[(1, 1)] -= I * (0.5 * self.decay_intermediate);
        heff[(2, 2)] -= I * (0.5 * self.decay_rydberg);
        let a = heff * rho;
        let mut d = (a - a.adjoint()) * -I;
        d[(3, 3)] += self.decay_intermediate * rho[(1, 1)] + self.decay_rydberg * rho[(2, 2)];
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn is_physical(&self) -> bool {
        self.hermiticity < HERMITICITY_TOLERANCE
            && self.trace_error < TRACE_TOLERANCE
            && self.min_eigenvalue > -POSITIVITY_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState(Matrix4<Complex64>);

impl DensityState {
    /// Checks hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let s = Self(rho);
        let d = s.diagnostics();
        if !d.is_physical() {
            return Err(Error::InvalidInput(format!(
                "not a density matrix: hermiticity {:.1e}, trace error {:.1e}, min eigenvalue {:.1e}",
                d.hermiticity, d.trace_error, d.min_eigenvalue
            )));
        }
        Ok(s)
    }

    pub fn pure(level: Level) -> Self {
        let mut m = Matrix4::zeros();
        m[(level as usize, level as usize)] = 1.0.into();
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn population(&self, level: Level) -> f64 {
        self.0[(level as usize, level as usize)].re
    }

    pub fn populations(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        let m = &self.0;
        let hermiticity = (m - m.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let trace_error = (m.trace() - Complex64::new(1.0, 0.0)).norm();
        let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let min_eigenvalue = SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        DensityDiagnostics {
            hermiticity,
            trace_error,
            min_eigenvalue,
        }
    }
}

fn to_real(m: &Matrix4<Complex64>, out: &mut [f64]) {
    for (i, z) in m.iter().enumerate() {
        out[2 * i] = z.re;
        out[2 * i + 1] = z.im;
    }
}

fn from_real(v: &[f64]) -> Matrix4<Complex64> {
    Matrix4::from_iterator((0..16).map(|i| Complex64::new(v[2 * i], v[2 * i + 1])))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidInput(
            "times must be finite, non-negative and non-decreasing".into(),
        ));
    }
    Ok(())
}

/// Integrates the Lindblad equation from `rho0` at `t = 0` with the default tolerances.
pub fn evolve(
    scheme: &LevelScheme,
    rho0: &DensityState,
    times: &[f64],
) -> Result<Vec<DensityState>> {
    evolve_with(scheme, rho0, times, Tolerances::default())
}

pub fn evolve_with(
    scheme: &LevelScheme,
    rho0: &DensityState,
    times: &[f64],
    tol: Tolerances,
) -> Result<Vec<DensityState>> {
    scheme.validate()?;
    check_times(times)?;
    let mut y0 = vec![0.0; 32];
    to_real(rho0.matrix(), &mut y0);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        to_real(&scheme.lindblad_rhs(&from_real(y)), dy);
    };
    let out = ode::integrate(rhs, 0.0, &y0, times, tol)?;
    Ok(out.iter().map(|y| DensityState(from_real(y))).collect())
}

/// Exact solution of the same master equation. The sink is fed but never
/// drained, so the `{0, e, r}` block evolves as `U rho U^dag` with
/// `U = exp(-i (H - i K/2) t)`, sink coherences pick up `U^dag` from the right,
/// and the sink population takes up the lost trace.
pub fn propagate(
    scheme: &LevelScheme,
    rho0: &DensityState,
    times: &[f64],
) -> Result<Vec<DensityState>> {
    scheme.validate()?;
    check_times(times)?;
    let block = scheme.effective_block();
    let r0 = rho0.matrix();
    let sub0 = r0.fixed_view::<3, 3>(0, 0).into_owned();
    let row0 = r0.fixed_view::<1, 3>(3, 0).into_owned();
    let total = r0.trace();
    let mut out = Vec::with_capacity(times.len());
    for_each_propagator(&block, times, |u| {
        let sub = u * sub0 * u.adjoint();
        let row = row0 * u.adjoint();
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&sub);
        m.fixed_view_mut::<1, 3>(3, 0).copy_from(&row);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&row.adjoint());
        m[(3, 3)] = total - sub.trace();
        out.push(DensityState(m));
    });
    Ok(out)
}

/// Calls `f(U(t))` for each time. `exp(-i B h)` is reused while the spacing
/// repeats to within rounding of `t`; `u` tracks the time it actually
/// represents, so the mismatch never accumulates beyond a few ulps of `t`.
fn for_each_propagator(
    block: &Matrix3<Complex64>,
    times: &[f64],
    mut f: impl FnMut(&Matrix3<Complex64>),
) {
    let mut u = Matrix3::identity();
    let mut tau = 0.0;
    let mut step: Option<(f64, Matrix3<Complex64>)> = None;
    for &t in times {
        let dt = t - tau;
        if dt > 0.0 {
            match step {
                Some((h, s)) if (dt - h).abs() <= 16.0 * f64::EPSILON * t => {
                    u = s * u;
                    tau += h;
                }
                _ => {
                    let s = (block * (-I * dt)).exp();
                    step = Some((dt, s));
                    u = s * u;
                    tau = t;
                }
            }
        }
        f(&u);
    }
}

/// `|<0| U(t) |0>|^2` for a system starting in `|0>`. Only the column `U |0>`
/// is carried, with the same step reuse as [`for_each_propagator`].
fn qubit_population(scheme: &LevelScheme, times: &[f64]) -> Vec<f64> {
    let block = scheme.effective_block();
    let mut out = Vec::with_capacity(times.len());
    let mut psi = Vector3::new(Complex64::new(1.0, 0.0), ZERO, ZERO);
    let mut tau = 0.0;
    let mut step: Option<(f64, Matrix3<Complex64>)> = None;
    for &t in times {
        let dt = t - tau;
        if dt > 0.0 {
            match step {
                Some((h, s)) if (dt - h).abs() <= 16.0 * f64::EPSILON * t => {
                    psi = s * psi;
                    tau += h;
                }
                _ => {
                    let s = (block * (-I * dt)).exp();
                    step = Some((dt, s));
                    psi = s * psi;
                    tau = t;
                }
            }
        }
        out.push(psi[0].norm_sqr());
    }
    out
}

/// Per-phonon changes of the two radial mode frequencies between the coupled
/// states, rad/s, and the occupation the laser is locked to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeShifts {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub reference: PhononOccupation,
}

impl ModeShifts {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            reference: PhononOccupation::default(),
        }
    }

    /// Transition-frequency change at `n` relative to the reference occupation.
    pub fn detuning_offset(&self, n: PhononOccupation) -> f64 {
        let dn = |a: u32, b: u32| f64::from(a) - f64::from(b);
        dn(n.nx, self.reference.nx) * self.x + dn(n.ny, self.reference.ny) * self.y
    }
}

/// The scheme seen by an ion with `n` radial phonons: the Rydberg level moves by
/// `(n_x + 1/2) dw_x + (n_y + 1/2) dw_y`, counted from the reference occupation.
pub fn phonon_detuning(
    base: &LevelScheme,
    n: PhononOccupation,
    shifts: &ModeShifts,
) -> LevelScheme {
    LevelScheme {
        two_photon_detuning: base.two_photon_detuning + shifts.detuning_offset(n),
        ..*base
    }
}

/// Probabilities over radial occupations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhononDistribution {
    pub entries: Vec<(PhononOccupation, f64)>,
}

impl PhononDistribution {
    pub fn new(entries: Vec<(PhononOccupation, f64)>) -> Result<Self> {
        if entries.is_empty() || entries.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput(
                "distribution needs non-negative probabilities".into(),
            ));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
        }
        Ok(Self { entries })
    }

    pub fn single(n: PhononOccupation) -> Self {
        Self {
            entries: vec![(n, 1.0)],
        }
    }

    pub fn mean(&self) -> (f64, f64) {
        self.entries.iter().fold((0.0, 0.0), |(x, y), (n, p)| {
            (x + p * f64::from(n.nx), y + p * f64::from(n.ny))
        })
    }
}

fn geometric(nbar: f64, cutoff: u32) -> (Vec<f64>, f64) {
    if nbar == 0.0 {
        return (vec![1.0], 0.0);
    }
    let ratio = nbar / (nbar + 1.0);
    let p: Vec<f64> = (0..=cutoff)
        .map(|n| ratio.powi(n as i32) / (nbar + 1.0))
        .collect();
    (p, ratio.powi(cutoff as i32 + 1))
}

/// Product of geometric distributions `p(n) = nbar^n / (nbar + 1)^(n + 1)` on
/// `0..=cutoff` per mode, renormalized.
pub fn thermal_distribution(nbar_x: f64, nbar_y: f64, cutoff: u32) -> Result<PhononDistribution> {
    for nbar in [nbar_x, nbar_y] {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "mean occupation must be non-negative, got {nbar}"
            )));
        }
    }
    let (px, tx) = geometric(nbar_x, cutoff);
    let (py, ty) = geometric(nbar_y, cutoff);
    let truncated = 1.0 - (1.0 - tx) * (1.0 - ty);
    if truncated > THERMAL_TRUNCATION_LIMIT {
        return Err(Error::CutoffTooSmall {
            truncated,
            limit: THERMAL_TRUNCATION_LIMIT,
        });
    }
    let kept = (1.0 - tx) * (1.0 - ty);
    let mut entries = Vec::with_capacity(px.len() * py.len());
    for (nx, a) in px.iter().enumerate() {
        for (ny, b) in py.iter().enumerate() {
            entries.push((PhononOccupation::new(nx as u32, ny as u32), a * b / kept));
        }
    }
    Ok(PhononDistribution { entries })
}

/// Smallest per-mode cutoff that keeps the truncated probability within the limit.
pub fn thermal_cutoff(nbar_x: f64, nbar_y: f64) -> u32 {
    let mut n = 0;
    while thermal_distribution(nbar_x, nbar_y, n).is_err() {
        n += 1;
    }
    n
}

/// Population of `|0>` after starting in `|0>`, averaged over the phonon
/// distribution with the detuning of each occupation shifted accordingly.
pub fn weighted_population(
    scheme: &LevelScheme,
    dist: &PhononDistribution,
    shifts: &ModeShifts,
    times: &[f64],
) -> Result<Vec<f64>> {
    scheme.validate()?;
    check_times(times)?;
    let parts: Vec<Vec<f64>> = dist
        .entries
        .par_iter()
        .map(|(n, p)| {
            let mut pop = qubit_population(&phonon_detuning(scheme, *n, shifts), times);
            pop.iter_mut().for_each(|v| *v *= p);
            pop
        })
        .collect();
    let mut total = vec![0.0; times.len()];
    for part in &parts {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertain {
    pub value: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl Uncertain {
    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Normally distributed scheme parameters for Monte Carlo bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterEnsemble {
    pub rabi1: Uncertain,
    pub rabi2: Uncertain,
    pub intermediate_detuning: Uncertain,
    pub two_photon_detuning: Uncertain,
    pub decay_intermediate: Uncertain,
    pub decay_rydberg: Uncertain,
    pub samples: usize,
    pub seed: u64,
}

impl ParameterEnsemble {
    pub fn around(scheme: &LevelScheme, samples: usize, seed: u64) -> Self {
        Self {
            rabi1: Uncertain::exact(scheme.rabi1),
            rabi2: Uncertain::exact(scheme.rabi2),
            intermediate_detuning: Uncertain::exact(scheme.intermediate_detuning),
            two_photon_detuning: Uncertain::exact(scheme.two_photon_detuning),
            decay_intermediate: Uncertain::exact(scheme.decay_intermediate),
            decay_rydberg: Uncertain::exact(scheme.decay_rydberg),
            samples,
            seed,
        }
    }

    fn fields(&self) -> [Uncertain; 6] {
        [
            self.rabi1,
            self.rabi2,
            self.intermediate_detuning,
            self.two_photon_detuning,
            self.decay_intermediate,
            self.decay_rydberg,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidInput(
                "an ensemble needs at least 2 samples".into(),
            ));
        }
        if self
            .fields()
            .iter()
            .any(|u| !(u.value.is_finite() && u.sigma.is_finite() && u.sigma >= 0.0))
        {
            return Err(Error::InvalidInput(
                "ensemble values must be finite with sigma >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Sample `index`, drawn from its own generator stream. Rabi frequencies are
    /// folded to non-negative values and decay rates clipped at zero.
    pub fn sample(&self, index: u64) -> Result<LevelScheme> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let mut v = [0.0; 6];
        for (out, u) in v.iter_mut().zip(self.fields()) {
            let normal = Normal::new(u.value, u.sigma)
                .map_err(|e| Error::InvalidInput(format!("ensemble parameter: {e}")))?;
            *out = normal.sample(&mut rng);
        }
        LevelScheme::new(
            v[0].abs(),
            v[1].abs(),
            v[2],
            v[3],
            v[4].max(0.0),
            v[5].max(0.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub time: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// Linear interpolation between order statistics at fractional rank `q (N - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 16th, 50th and 84th percentiles of the weighted `|0>` population over the
/// ensemble. Each sample has its own generator and results are reduced in
/// sample order, so the band does not depend on thread scheduling.
pub fn monte_carlo_band(
    ensemble: &ParameterEnsemble,
    dist: &PhononDistribution,
    shifts: &ModeShifts,
    times: &[f64],
) -> Result<Vec<BandPoint>> {
    ensemble.validate()?;
    if ensemble.samples < MIN_ENSEMBLE_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "percentile bands need at least {MIN_ENSEMBLE_SAMPLES} samples, got {}",
            ensemble.samples
        )));
    }
    check_times(times)?;
    let runs: Vec<Vec<f64>> = (0..ensemble.samples as u64)
        .into_par_iter()
        .map(|i| weighted_population(&ensemble.sample(i)?, dist, shifts, times))
        .collect::<Result<_>>()?;
    let mut column = vec![0.0; runs.len()];
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            for (c, run) in column.iter_mut().zip(&runs) {
                *c = run[k];
            }
            column.sort_by(f64::total_cmp);
            BandPoint {
                time,
                lower: percentile(&column, 0.16),
                median: percentile(&column, 0.5),
                upper: percentile(&column, 0.84),
            }
        })
        .collect())
}

/// `max - min` of `values` over samples with `start <= t <= end`.
pub fn contrast(times: &[f64], values: &[f64], start: f64, end: f64) -> Option<f64> {
    let window = times
        .iter()
        .zip(values)
        .filter(|(t, _)| (start..=end).contains(*t))
        .map(|(_, v)| *v);
    let (lo, hi) = window.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    (hi >= lo).then_some(hi - lo)
}
