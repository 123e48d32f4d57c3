//! Excitation spectra as sums of Lorentzian lines, their synthesis with
//! projection noise, and the fits used to analyse them.
//!
//! The scattering rate out of the probed state is
//! `R(w) = sum_r weight(r) W^2 G / (G^2 + 4 (w - w_c - r w')^2) + R_bg`
//! and an exposure of duration `T` leaves `exp(-R T)` of the population behind.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::lsq::{self, LmOptions, Problem};
use crate::overlap::{
    line_weights, overlap_matrix_with, LineWeights, OscillatorSpec, OverlapOptions, DEFAULT_MARGIN,
    DEFAULT_TAIL_TOLERANCE,
};
use crate::stark::{
    mode_shifts, stark_delta, stark_equilibrium, stark_frequencies, PhononOccupation,
    PolarizableState,
};
use crate::trap::{OffsetField, TrapConfig};
use crate::units::{HBAR, PLANCK};

/// Lines lighter than this fraction of the total weight are dropped when evaluating.
const LINE_CUTOFF: f64 = 1e-15;

/// Displacement scan step before a center-shift fit, in oscillator lengths.
const SHIFT_SCAN_DIVISIONS: f64 = 40.0;

/// Scan points used to rank line assignments when estimating a start.
const ESTIMATE_POINTS: usize = 256;
const REWEIGHT_PASSES: usize = 6;

/// Which population a scan records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// `exp(-R T)`: population left in the probed state.
    Survival,
    /// `1 - exp(-R T)`: population pumped out of it.
    #[default]
    Depletion,
}

impl SignalKind {
    fn of_survival(self, s: f64) -> f64 {
        match self {
            SignalKind::Survival => s,
            SignalKind::Depletion => 1.0 - s,
        }
    }

    /// `d signal / d R` at fixed exposure.
    fn rate_derivative(self, rate: f64, exposure: f64) -> f64 {
        let d = -exposure * (-rate * exposure).exp();
        match self {
            SignalKind::Survival => d,
            SignalKind::Depletion => -d,
        }
    }
}

/// Rabi amplitude, linewidth, center and background of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    /// Effective two-photon Rabi frequency, rad/s.
    pub rabi: f64,
    /// rad/s
    pub linewidth: f64,
    /// Phonon-preserving line center relative to the bare resonance, rad/s.
    pub center: f64,
    /// 1/s
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub rabi: f64,
    pub linewidth: f64,
    pub center: f64,
    pub background: f64,
    /// Spacing between phonon-changing lines, `(w_x' + w_y') / 2`, rad/s.
    pub mode_spacing: f64,
    pub weights: LineWeights,
}

impl SpectrumModel {
    pub fn new(params: SpectrumParams, mode_spacing: f64, weights: LineWeights) -> Result<Self> {
        let SpectrumParams {
            rabi,
            linewidth,
            center,
            background,
        } = params;
        if !(linewidth.is_finite() && linewidth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "linewidth must be positive, got {linewidth}"
            )));
        }
        if !(background.is_finite() && background >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "background rate must be non-negative, got {background}"
            )));
        }
        if !(rabi.is_finite() && center.is_finite() && mode_spacing.is_finite()) {
            return Err(Error::InvalidInput(
                "spectrum parameters must be finite".into(),
            ));
        }
        if weights
            .weights
            .values()
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::InvalidInput(
                "line weights must be non-negative".into(),
            ));
        }
        Ok(Self {
            rabi,
            linewidth,
            center,
            background,
            mode_spacing,
            weights,
        })
    }

    pub fn params(&self) -> SpectrumParams {
        SpectrumParams {
            rabi: self.rabi,
            linewidth: self.linewidth,
            center: self.center,
            background: self.background,
        }
    }

    pub fn scattering_rate(&self, detuning: f64) -> f64 {
        line_rate(&self.params(), self.mode_spacing, &self.weights, detuning)
    }

    pub fn survival_probability(&self, detuning: f64, exposure: f64) -> f64 {
        (-self.scattering_rate(detuning) * exposure).exp()
    }

    pub fn depletion_probability(&self, detuning: f64, exposure: f64) -> f64 {
        -(-self.scattering_rate(detuning) * exposure).exp_m1()
    }

    pub fn signal(&self, kind: SignalKind, detuning: f64, exposure: f64) -> f64 {
        match kind {
            SignalKind::Survival => self.survival_probability(detuning, exposure),
            SignalKind::Depletion => self.depletion_probability(detuning, exposure),
        }
    }

    /// Detunings of the individual lines, `w_c + r w'`, with their weights.
    pub fn line_positions(&self) -> Vec<(f64, f64)> {
        self.weights
            .weights
            .iter()
            .map(|(&r, &w)| (self.center + r as f64 * self.mode_spacing, w))
            .collect()
    }
}

fn significant_lines(weights: &LineWeights) -> impl Iterator<Item = (f64, f64)> + '_ {
    let floor = LINE_CUTOFF * weights.total();
    weights
        .weights
        .iter()
        .filter(move |(_, w)| **w > floor)
        .map(|(&r, &w)| (r as f64, w))
}

fn line_rate(p: &SpectrumParams, spacing: f64, weights: &LineWeights, detuning: f64) -> f64 {
    let g = p.linewidth;
    let amp = p.rabi * p.rabi * g;
    let lines: f64 = significant_lines(weights)
        .map(|(r, w)| {
            let d = detuning - p.center - r * spacing;
            w * amp / (g * g + 4.0 * d * d)
        })
        .sum();
    lines + p.background
}

/// Rate and its gradient with respect to `(rabi, linewidth, center, background)`.
fn line_rate_gradient(
    p: &SpectrumParams,
    spacing: f64,
    weights: &LineWeights,
    detuning: f64,
) -> (f64, [f64; 4]) {
    let (o, g) = (p.rabi, p.linewidth);
    let mut rate = p.background;
    let mut grad = [0.0, 0.0, 0.0, 1.0];
    for (r, w) in significant_lines(weights) {
        let d = detuning - p.center - r * spacing;
        let den = g * g + 4.0 * d * d;
        rate += w * o * o * g / den;
        grad[0] += w * 2.0 * o * g / den;
        grad[1] += w * o * o * (4.0 * d * d - g * g) / (den * den);
        grad[2] += w * o * o * g * 8.0 * d / (den * den);
    }
    (rate, grad)
}

pub fn scattering_rate(model: &SpectrumModel, detuning: f64) -> f64 {
    model.scattering_rate(detuning)
}

pub fn survival_probability(model: &SpectrumModel, detuning: f64, exposure: f64) -> f64 {
    model.survival_probability(detuning, exposure)
}

/// Measured or synthetic spectrum. `trials[i] == 0` marks an exact, noise-free point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan {
    /// Two-photon detuning from the bare resonance, rad/s.
    pub detunings: Vec<f64>,
    /// s
    pub exposure: f64,
    pub signal: Vec<f64>,
    pub trials: Vec<u32>,
    #[serde(default)]
    pub kind: SignalKind,
}

impl SpectrumScan {
    pub fn validate(&self) -> Result<()> {
        let n = self.detunings.len();
        if self.signal.len() != n || self.trials.len() != n {
            return Err(Error::InvalidInput(format!(
                "scan columns differ in length: {} detunings, {} signals, {} trial counts",
                n,
                self.signal.len(),
                self.trials.len()
            )));
        }
        if !(self.exposure.is_finite() && self.exposure > 0.0) {
            return Err(Error::InvalidInput("exposure must be positive".into()));
        }
        if self.detunings.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidInput("detunings must be finite".into()));
        }
        if self.signal.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::InvalidInput(
                "signal values must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `signal[i] ~ Binomial(trials[i], p_i) / trials[i]`. `trials` is either one
/// count for every point or one per point; a count of zero yields the exact
/// probability.
pub fn synthesize_scan(
    model: &SpectrumModel,
    detunings: &[f64],
    exposure: f64,
    trials: &[u32],
    seed: u64,
    kind: SignalKind,
) -> Result<SpectrumScan> {
    if !(exposure.is_finite() && exposure >= 0.0) {
        return Err(Error::InvalidInput("exposure must be non-negative".into()));
    }
    let trials: Vec<u32> = match trials.len() {
        1 => vec![trials[0]; detunings.len()],
        n if n == detunings.len() => trials.to_vec(),
        n => {
            return Err(Error::InvalidInput(format!(
                "{n} trial counts for {} detunings",
                detunings.len()
            )))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signal = Vec::with_capacity(detunings.len());
    for (&d, &n) in detunings.iter().zip(&trials) {
        let p = model.signal(kind, d, exposure).clamp(0.0, 1.0);
        if n == 0 {
            signal.push(p);
        } else {
            let dist = Binomial::new(u64::from(n), p)
                .map_err(|e| Error::InvalidInput(format!("binomial draw: {e}")))?;
            signal.push(dist.sample(&mut rng) as f64 / f64::from(n));
        }
    }
    Ok(SpectrumScan {
        detunings: detunings.to_vec(),
        exposure,
        signal,
        trials,
        kind,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeParameters {
    pub rabi: bool,
    pub linewidth: bool,
    pub center: bool,
    pub background: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        Self {
            rabi: true,
            linewidth: true,
            center: true,
            background: true,
        }
    }
}

impl FreeParameters {
    fn flags(&self) -> [bool; 4] {
        [self.rabi, self.linewidth, self.center, self.background]
    }
}

/// Lines whose weights follow from displacing the upper-state x potential by a
/// free amount `s = x_eq - x_eq'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterShiftLines {
    pub x_from: OscillatorSpec,
    pub x_to: OscillatorSpec,
    pub y_from: OscillatorSpec,
    pub y_to: OscillatorSpec,
    pub occupation: PhononOccupation,
    pub tolerance: f64,
}

impl CenterShiftLines {
    /// The shift implied by the oscillator centers as given.
    pub fn nominal_shift(&self) -> f64 {
        self.x_from.center - self.x_to.center
    }

    pub fn weights(&self, shift: f64) -> Result<LineWeights> {
        let opts = OverlapOptions {
            tolerance: self.tolerance,
            margin: DEFAULT_MARGIN,
        };
        let x_to = OscillatorSpec {
            center: self.x_from.center - shift,
            ..self.x_to
        };
        let mx = overlap_matrix_with(&self.x_from, &x_to, self.occupation.nx as usize, opts)?;
        let my = overlap_matrix_with(&self.y_from, &self.y_to, self.occupation.ny as usize, opts)?;
        line_weights(&mx, &my, self.occupation, self.tolerance)
    }
}

/// How line weights are treated during a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LineModel {
    /// Weights held at theoretical values.
    Fixed(LineWeights),
    /// Weights recomputed from a fitted x-center shift.
    CenterShift(CenterShiftLines),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub model: SpectrumModel,
    /// Fitted `x_eq - x_eq'` in the center-shift mode, m.
    pub center_shift: Option<f64>,
    /// Free parameters in fit order, with 1 sigma uncertainties.
    pub parameters: Vec<FittedParameter>,
    pub covariance: Vec<Vec<f64>>,
    /// Root of the summed squared signal residuals.
    pub residual_norm: f64,
    pub chi_squared: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl SpectrumFit {
    pub fn parameter(&self, name: &str) -> Option<&FittedParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

const PARAM_NAMES: [&str; 4] = ["rabi", "linewidth", "center", "background"];

struct SpectrumProblem<'a> {
    scan: &'a SpectrumScan,
    lines: &'a LineModel,
    spacing: f64,
    base: [f64; 4],
    free: [bool; 4],
    sigma: Vec<f64>,
    scales: Vec<f64>,
}

impl SpectrumProblem<'_> {
    fn n_base_free(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    fn unpack(&self, p: &[f64]) -> (SpectrumParams, Option<f64>) {
        let mut full = self.base;
        let mut k = 0;
        for (i, free) in self.free.iter().enumerate() {
            if *free {
                full[i] = p[k];
                k += 1;
            }
        }
        let shift = matches!(self.lines, LineModel::CenterShift(_)).then(|| p[k]);
        (
            SpectrumParams {
                rabi: full[0],
                linewidth: full[1],
                center: full[2],
                background: full[3],
            },
            shift,
        )
    }

    fn weights_at(&self, shift: Option<f64>) -> Option<LineWeights> {
        match (self.lines, shift) {
            (LineModel::Fixed(w), _) => Some(w.clone()),
            (LineModel::CenterShift(c), Some(s)) => c.weights(s).ok(),
            (LineModel::CenterShift(_), None) => None,
        }
    }

    fn raw_residuals(&self, p: &[f64]) -> Vec<f64> {
        let (params, shift) = self.unpack(p);
        let n = self.scan.detunings.len();
        let Some(weights) = self.weights_at(shift) else {
            return vec![f64::NAN; n];
        };
        let t = self.scan.exposure;
        self.scan
            .detunings
            .iter()
            .zip(&self.scan.signal)
            .map(|(&d, &y)| {
                let rate = line_rate(&params, self.spacing, &weights, d);
                self.scan.kind.of_survival((-rate * t).exp()) - y
            })
            .collect()
    }
}

impl Problem for SpectrumProblem<'_> {
    fn residuals(&self, p: &[f64]) -> Vec<f64> {
        self.raw_residuals(p)
            .into_iter()
            .zip(&self.sigma)
            .map(|(r, s)| r / s)
            .collect()
    }

    fn scales(&self) -> Vec<f64> {
        self.scales.clone()
    }

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        let (params, shift) = self.unpack(p);
        let n = self.scan.detunings.len();
        let mut jac = DMatrix::zeros(n, p.len());
        let Some(weights) = self.weights_at(shift) else {
            return jac.add_scalar(f64::NAN);
        };
        let t = self.scan.exposure;
        for (i, &d) in self.scan.detunings.iter().enumerate() {
            let (rate, grad) = line_rate_gradient(&params, self.spacing, &weights, d);
            let ds = self.scan.kind.rate_derivative(rate, t) / self.sigma[i];
            let mut k = 0;
            for (j, free) in self.free.iter().enumerate() {
                if *free {
                    jac[(i, k)] = ds * grad[j];
                    k += 1;
                }
            }
        }
        if shift.is_some() {
            let k = self.n_base_free();
            let h = 1e-4 * self.scales[k];
            let mut q = p.to_vec();
            q[k] = p[k] + h;
            let up = self.residuals(&q);
            q[k] = p[k] - h;
            let dn = self.residuals(&q);
            for i in 0..n {
                jac[(i, k)] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        jac
    }
}

/// Coarse scan of the unweighted cost over the displacement. The line weights
/// oscillate with it, so the cost has many local minima and a local fit needs
/// to start in the right basin.
fn profile_shift(
    scan: &SpectrumScan,
    lines: &CenterShiftLines,
    spacing: f64,
    guess: Option<SpectrumParams>,
    start: f64,
) -> Result<f64> {
    let len = lines.x_from.characteristic_length();
    let step = len / SHIFT_SCAN_DIVISIONS;
    let reach = (2.0 * start.abs()).max(4.0 * len);
    let count = (reach / step).ceil() as usize;
    let cost = |s: f64| -> Result<f64> {
        let weights = lines.weights(s)?;
        let p = match guess {
            Some(g) => g,
            None => estimate_params(scan, &weights, spacing)?,
        };
        Ok(scan
            .detunings
            .iter()
            .zip(&scan.signal)
            .map(|(&d, &y)| {
                let rate = line_rate(&p, spacing, &weights, d);
                (scan.kind.of_survival((-rate * scan.exposure).exp()) - y).powi(2)
            })
            .sum())
    };
    let mut best = (cost(start.abs())?, start.abs());
    for k in 1..=count {
        let s = k as f64 * step;
        let c = cost(s)?;
        if c < best.0 {
            best = (c, s);
        }
    }
    Ok(best.1)
}

/// Starting values read off the data: background from the lowest rate, width
/// from the half maximum around the tallest point, and the center from the line
/// assignment of that point that best reproduces the scan.
pub fn estimate_params(
    scan: &SpectrumScan,
    weights: &LineWeights,
    spacing: f64,
) -> Result<SpectrumParams> {
    scan.validate()?;
    let t = scan.exposure;
    let rates: Vec<f64> = scan
        .signal
        .iter()
        .map(|&s| {
            let surv = match scan.kind {
                SignalKind::Survival => s,
                SignalKind::Depletion => 1.0 - s,
            };
            -surv.clamp(1e-9, 1.0).ln() / t
        })
        .collect();
    let (imax, &rmax) = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::DegenerateData("empty scan".into()))?;
    let bg = rates.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let height = rmax - bg;
    if !(height > 0.0) {
        return Err(Error::DegenerateData("signal is flat".into()));
    }

    let mut order: Vec<usize> = (0..rates.len()).collect();
    order.sort_by(|&a, &b| scan.detunings[a].total_cmp(&scan.detunings[b]));
    let pos = order.iter().position(|&i| i == imax).unwrap_or(0);
    let half = bg + 0.5 * height;
    let x = |k: usize| scan.detunings[order[k]];
    let y = |k: usize| rates[order[k]];
    let crossing = |k_in: usize, k_out: usize| {
        let (y0, y1) = (y(k_in), y(k_out));
        x(k_in) + (x(k_out) - x(k_in)) * (y0 - half) / (y0 - y1)
    };
    let left = (0..pos)
        .rev()
        .find(|&k| y(k) < half)
        .map(|k| crossing(k + 1, k))
        .unwrap_or_else(|| x(0));
    let right = (pos + 1..order.len())
        .find(|&k| y(k) < half)
        .map(|k| crossing(k - 1, k))
        .unwrap_or_else(|| x(order.len() - 1));
    let min_step = order
        .windows(2)
        .map(|w| scan.detunings[w[1]] - scan.detunings[w[0]])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut width = right - left;
    if !(width > 0.0) || !width.is_finite() {
        width = min_step;
    }
    if !width.is_finite() {
        return Err(Error::DegenerateData("cannot estimate a linewidth".into()));
    }

    // assign the tallest point to whichever line best explains the whole scan,
    // judged by a linear fit of amplitude and background for each assignment
    let w_max = weights.weights.values().copied().fold(0.0, f64::max);
    // heaviest lines first; a lighter assignment has to halve the residual to win,
    // since a lone line on the grid fits equally well as any of them
    let mut candidates: Vec<(i64, f64)> = weights
        .weights
        .iter()
        .filter(|(_, w)| **w >= 1e-3 * w_max)
        .map(|(&r, &w)| (r, w))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    // a thinned scan and the visible lines are enough to rank the assignments
    let strong = LineWeights {
        weights: candidates.iter().copied().collect(),
        tail_bound: 0.0,
    };
    let stride = rates.len().div_ceil(ESTIMATE_POINTS).max(1);
    let sample: Vec<(f64, f64)> = scan
        .detunings
        .iter()
        .zip(&rates)
        .step_by(stride)
        .map(|(&d, &r)| (d, r))
        .collect();
    let ys: Vec<f64> = sample.iter().map(|p| p.1).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for (r, _) in candidates {
        let center = scan.detunings[imax] - r as f64 * spacing;
        let unit = SpectrumParams {
            rabi: 1.0,
            linewidth: width,
            center,
            background: 0.0,
        };
        let template: Vec<f64> = sample
            .iter()
            .map(|&(d, _)| line_rate(&unit, spacing, &strong, d))
            .collect();
        let n = ys.len() as f64;
        let (st, sy) = (template.iter().sum::<f64>(), ys.iter().sum::<f64>());
        let stt = template.iter().map(|t| t * t).sum::<f64>();
        let sty = template.iter().zip(&ys).map(|(t, y)| t * y).sum::<f64>();
        let det = n * stt - st * st;
        if !(det > 0.0) {
            continue;
        }
        let amp = (n * sty - st * sy) / det;
        let bg = (sy - amp * st) / n;
        let rss: f64 = template
            .iter()
            .zip(&ys)
            .map(|(t, y)| (amp * t + bg - y).powi(2))
            .sum();
        if amp > 0.0 && best.is_none_or(|(b, _, _)| rss < 0.5 * b) {
            best = Some((rss, center, amp));
        }
    }
    let (center, rabi) = match best {
        Some((_, c, amp)) => (c, amp.sqrt()),
        None => {
            let w = weights.get(0).max(1e-12);
            (scan.detunings[imax], (height * width / w).sqrt())
        }
    };
    Ok(SpectrumParams {
        rabi,
        linewidth: width,
        center,
        background: bg,
    })
}

/// Nonlinear least squares on the recorded signal.
///
/// Points with projection noise are weighted by the binomial variance, first
/// estimated from the data and then from the model of a preliminary fit. Exact
/// points (zero trials) are fitted unweighted, with the covariance scaled by the
/// residual variance. Parameters not marked free stay at `guess` (or at the
/// estimate from the data when no guess is given).
pub fn fit_spectrum(
    scan: &SpectrumScan,
    lines: &LineModel,
    mode_spacing: f64,
    free: FreeParameters,
    guess: Option<SpectrumParams>,
) -> Result<SpectrumFit> {
    fit_spectrum_with(scan, lines, mode_spacing, free, guess, LmOptions::default())
}

pub fn fit_spectrum_with(
    scan: &SpectrumScan,
    lines: &LineModel,
    mode_spacing: f64,
    free: FreeParameters,
    guess: Option<SpectrumParams>,
    opts: LmOptions,
) -> Result<SpectrumFit> {
    scan.validate()?;
    let lo = scan.signal.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scan
        .signal
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-12) {
        return Err(Error::DegenerateData("signal is flat".into()));
    }

    let (shift0, shift_scale) = match lines {
        LineModel::Fixed(_) => (None, None),
        LineModel::CenterShift(c) => {
            let s = c.nominal_shift();
            let len = c.x_from.characteristic_length();
            // weights are even in the shift; start away from the stationary point
            let s = if s.abs() < 1e-3 * len { 0.5 * len } else { s };
            (Some(s), Some(len))
        }
    };
    let shift0 = match (lines, shift0) {
        (LineModel::CenterShift(c), Some(s)) => {
            Some(profile_shift(scan, c, mode_spacing, guess, s)?)
        }
        _ => shift0,
    };
    let start_weights = match lines {
        LineModel::Fixed(w) => w.clone(),
        LineModel::CenterShift(c) => c.weights(shift0.unwrap_or(0.0))?,
    };
    let start = match guess {
        Some(g) => g,
        None => estimate_params(scan, &start_weights, mode_spacing)?,
    };
    let base = [start.rabi, start.linewidth, start.center, start.background];
    let flags = free.flags();
    let peak_rate = start.rabi * start.rabi / start.linewidth.abs().max(f64::MIN_POSITIVE);
    let base_scales = [
        start.rabi.abs(),
        start.linewidth.abs(),
        start.linewidth.abs(),
        1e-3 * peak_rate,
    ];
    let mut p0: Vec<f64> = Vec::new();
    let mut scales = Vec::new();
    for i in 0..4 {
        if flags[i] {
            p0.push(base[i]);
            scales.push(base_scales[i].max(f64::MIN_POSITIVE));
        }
    }
    if let (Some(s), Some(len)) = (shift0, shift_scale) {
        p0.push(s);
        scales.push(len);
    }
    if p0.is_empty() {
        return Err(Error::InvalidInput("no free parameters".into()));
    }

    let noisy = scan.trials.iter().any(|&n| n > 0);
    let variance = |p: f64, n: u32| {
        if n == 0 {
            1.0
        } else {
            let nf = f64::from(n);
            let pc = p.clamp(0.5 / nf, 1.0 - 0.5 / nf);
            (pc * (1.0 - pc) / nf).sqrt()
        }
    };
    let sigma: Vec<f64> = scan
        .signal
        .iter()
        .zip(&scan.trials)
        .map(|(&s, &n)| variance(s, n))
        .collect();

    let mut problem = SpectrumProblem {
        scan,
        lines,
        spacing: mode_spacing,
        base,
        free: flags,
        sigma,
        scales,
    };
    let mut out = lsq::levenberg_marquardt(&problem, &p0, opts)?;
    let mut iterations = out.iterations;
    // reweight with the model variance until the weights settle
    for _ in 0..REWEIGHT_PASSES * usize::from(noisy) {
        let model_signal: Vec<f64> = problem
            .raw_residuals(&out.params)
            .iter()
            .zip(&scan.signal)
            .map(|(r, y)| r + y)
            .collect();
        problem.sigma = model_signal
            .iter()
            .zip(&scan.trials)
            .map(|(&p, &n)| variance(p, n))
            .collect();
        let previous = out.params.clone();
        out = lsq::levenberg_marquardt(&problem, &out.params, opts)?;
        iterations += out.iterations;
        let settled = previous
            .iter()
            .zip(&out.params)
            .zip(&problem.scales)
            .all(|((a, b), s)| (a - b).abs() <= 1e-4 * b.abs().max(*s));
        if settled {
            break;
        }
    }

    let n = scan.detunings.len();
    let np = out.params.len();
    let dof = n.saturating_sub(np);
    let mut cov = out.inverse_hessian.clone();
    if !noisy {
        let s2 = if dof > 0 { out.cost / dof as f64 } else { 0.0 };
        cov *= s2;
    }
    let (mut params, shift) = problem.unpack(&out.params);
    params.rabi = params.rabi.abs();
    params.linewidth = params.linewidth.abs();
    let weights = problem.weights_at(shift.map(f64::abs)).ok_or_else(|| {
        Error::DegenerateData("line weights undefined at the fitted shift".into())
    })?;
    let residual_norm = problem
        .raw_residuals(&out.params)
        .iter()
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt();

    let mut names: Vec<String> = PARAM_NAMES
        .iter()
        .zip(flags)
        .filter(|(_, f)| *f)
        .map(|(n, _)| n.to_string())
        .collect();
    if shift.is_some() {
        names.push("center_shift".into());
    }
    let values: Vec<f64> = {
        let mut v = Vec::new();
        let full = [
            params.rabi,
            params.linewidth,
            params.center,
            params.background,
        ];
        for i in 0..4 {
            if flags[i] {
                v.push(full[i]);
            }
        }
        if let Some(s) = shift {
            v.push(s.abs());
        }
        v
    };
    let parameters = names
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(i, (name, value))| FittedParameter {
            name,
            value,
            sigma: cov[(i, i)].max(0.0).sqrt(),
        })
        .collect();
    let covariance = (0..np)
        .map(|i| (0..np).map(|j| cov[(i, j)]).collect())
        .collect();

    Ok(SpectrumFit {
        model: SpectrumModel {
            rabi: params.rabi,
            linewidth: params.linewidth,
            center: params.center,
            background: params.background,
            mode_spacing,
            weights,
        },
        center_shift: shift.map(f64::abs),
        parameters,
        covariance,
        residual_norm,
        chi_squared: out.cost,
        dof,
        iterations,
    })
}

/// Resonance shifts recorded against a control setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticScan {
    pub control: Vec<f64>,
    /// rad/s
    pub shift: Vec<f64>,
    /// Optional 1 sigma errors of `shift`, rad/s.
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurningPointErrors {
    pub control: f64,
    pub shift: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub control: f64,
    pub shift: f64,
    /// `a` in `shift = a x^2 + b x + c`.
    pub curvature: f64,
    /// `[a, b, c]`
    pub coefficients: [f64; 3],
    /// Absent when the errors cannot be estimated (three unweighted points).
    pub errors: Option<TurningPointErrors>,
    pub warnings: Vec<Warning>,
}

/// Weighted quadratic least squares and the vertex `-b / 2a` with delta-method
/// errors. With `polarizability_difference` given, a curvature whose sign differs
/// from that of `-delta_alpha` raises a `SignMismatch` warning.
pub fn fit_quadratic_turning_point(
    scan: &QuadraticScan,
    polarizability_difference: Option<f64>,
) -> Result<TurningPoint> {
    let n = scan.control.len();
    if scan.shift.len() != n {
        return Err(Error::InvalidInput(
            "control and shift lengths differ".into(),
        ));
    }
    if let Some(s) = &scan.sigma {
        if s.len() != n || s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(
                "sigma must be positive, one per point".into(),
            ));
        }
    }
    if scan
        .control
        .iter()
        .chain(&scan.shift)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("scan values must be finite".into()));
    }
    let mut distinct = scan.control.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 distinct control values, got {}",
            distinct.len()
        )));
    }

    // centred, rescaled abscissa keeps the normal equations well conditioned
    let mean = scan.control.iter().sum::<f64>() / n as f64;
    let scale = scan
        .control
        .iter()
        .map(|x| (x - mean).abs())
        .fold(0.0, f64::max);
    let w: Vec<f64> = match &scan.sigma {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; n],
    };
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for i in 0..n {
        let u = (scan.control[i] - mean) / scale;
        let row = Vector3::new(u * u, u, 1.0);
        normal += w[i] * row * row.transpose();
        rhs += w[i] * scan.shift[i] * row;
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::DegenerateData("singular normal equations".into()))?;
    let coef = inv * rhs;
    let (a, b, c) = (coef[0], coef[1], coef[2]);

    let y_mean = scan.shift.iter().sum::<f64>() / n as f64;
    let y_spread = scan
        .shift
        .iter()
        .map(|y| (y - y_mean).abs())
        .fold(0.0, f64::max);
    if !(a.abs() > 1e-9 * y_spread) {
        return Err(Error::DegenerateData("no curvature in the data".into()));
    }

    let u0 = -b / (2.0 * a);
    let y0 = c - b * b / (4.0 * a);
    let curvature = a / (scale * scale);
    let coefficients = [
        curvature,
        b / scale - 2.0 * a * mean / (scale * scale),
        c - b * mean / scale + a * mean * mean / (scale * scale),
    ];

    let rss: f64 = (0..n)
        .map(|i| {
            let u = (scan.control[i] - mean) / scale;
            let r = a * u * u + b * u + c - scan.shift[i];
            w[i] * r * r
        })
        .sum();
    let cov = match &scan.sigma {
        Some(_) => Some(inv),
        None if n > 3 => Some(inv * (rss / (n - 3) as f64)),
        None => None,
    };
    let errors = cov.map(|cov| {
        let gu = Vector3::new(b / (2.0 * a * a), -1.0 / (2.0 * a), 0.0);
        let gy = Vector3::new(b * b / (4.0 * a * a), -b / (2.0 * a), 1.0);
        TurningPointErrors {
            control: scale * (gu.transpose() * cov * gu)[0].max(0.0).sqrt(),
            shift: (gy.transpose() * cov * gy)[0].max(0.0).sqrt(),
            curvature: cov[(0, 0)].max(0.0).sqrt() / (scale * scale),
        }
    });

    let mut warnings = Vec::new();
    if let Some(da) = polarizability_difference {
        if da != 0.0 && curvature.signum() != (-da).signum() {
            warnings.push(Warning::SignMismatch {
                curvature,
                expected_sign: (-da).signum(),
            });
        }
    }
    Ok(TurningPoint {
        control: mean + scale * u0,
        shift: y0,
        curvature,
        coefficients,
        errors,
        warnings,
    })
}

/// Smallest field whose quadratic Stark shift equals the fraction `F` of the
/// linewidth: `F h dnu = alpha E^2 / 2`. Returns V/m.
pub fn residual_field_limit(polarizability: f64, linewidth_hz: f64, fraction: f64) -> Result<f64> {
    if !(polarizability.is_finite() && polarizability > 0.0) {
        return Err(Error::InvalidInput(
            "polarizability must be positive".into(),
        ));
    }
    if !(linewidth_hz.is_finite() && linewidth_hz > 0.0) {
        return Err(Error::InvalidInput("linewidth must be positive".into()));
    }
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::InvalidInput(
            "resolution fraction must be non-negative".into(),
        ));
    }
    Ok((2.0 * fraction * PLANCK * linewidth_hz / polarizability).sqrt())
}

/// Change of the phonon-preserving line center between a scan taken at
/// occupation `from` and one at `to`, rad/s, given the per-phonon mode shifts.
pub fn center_correction(
    from: PhononOccupation,
    to: PhononOccupation,
    mode_shift_x: f64,
    mode_shift_y: f64,
) -> f64 {
    (f64::from(to.nx) - f64::from(from.nx)) * mode_shift_x
        + (f64::from(to.ny) - f64::from(from.ny)) * mode_shift_y
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

/// Local maxima of a sampled curve, refined by a parabola through the three
/// samples around each. Peaks must rise above the curve minimum by at least
/// `min_fraction` of the full range.
pub fn find_peaks(x: &[f64], y: &[f64], min_fraction: f64) -> Vec<Peak> {
    if x.len() != y.len() || x.len() < 3 {
        return Vec::new();
    }
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = lo + min_fraction * (hi - lo);
    let mut peaks = Vec::new();
    for i in 1..x.len() - 1 {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > floor) {
            continue;
        }
        let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
        let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        if a < 0.0 {
            let b = d01 - a * (x0 + x1);
            let xp = -b / (2.0 * a);
            let yp = y1 + (xp - x1) * (d01 + a * (xp - x0));
            peaks.push(Peak {
                position: xp,
                height: yp,
            });
        } else {
            peaks.push(Peak {
                position: x1,
                height: y1,
            });
        }
    }
    peaks
}

/// A transition between two polarizable states of an ion at a given phonon
/// occupation, from which line positions and weights follow.
#[derive(Debug, Clone)]
pub struct TrapTransition<'a> {
    pub trap: &'a TrapConfig,
    pub offset: OffsetField,
    pub lower: &'a PolarizableState,
    pub upper: &'a PolarizableState,
    pub occupation: PhononOccupation,
    pub micromotion_correction: bool,
}

impl TrapTransition<'_> {
    /// `(from, to)` oscillators for the x and y modes.
    pub fn oscillators(&self) -> Result<[(OscillatorSpec, OscillatorSpec); 2]> {
        let corr = self.micromotion_correction;
        let m = self.trap.species.mass;
        let wl = stark_frequencies(self.trap, self.lower, corr)?;
        let wu = stark_frequencies(self.trap, self.upper, corr)?;
        let rl = stark_equilibrium(self.trap, &self.offset, self.lower, corr)?;
        let ru = stark_equilibrium(self.trap, &self.offset, self.upper, corr)?;
        Ok([
            (
                OscillatorSpec::new(wl.x, rl.x, m)?,
                OscillatorSpec::new(wu.x, ru.x, m)?,
            ),
            (
                OscillatorSpec::new(wl.y, rl.y, m)?,
                OscillatorSpec::new(wu.y, ru.y, m)?,
            ),
        ])
    }

    pub fn line_weights(&self, tolerance: f64) -> Result<LineWeights> {
        let [(xa, xb), (ya, yb)] = self.oscillators()?;
        let opts = OverlapOptions {
            tolerance,
            margin: DEFAULT_MARGIN,
        };
        let mx = overlap_matrix_with(&xa, &xb, self.occupation.nx as usize, opts)?;
        let my = overlap_matrix_with(&ya, &yb, self.occupation.ny as usize, opts)?;
        line_weights(&mx, &my, self.occupation, tolerance)
    }

    pub fn center_shift_lines(&self, tolerance: f64) -> Result<CenterShiftLines> {
        let [(x_from, x_to), (y_from, y_to)] = self.oscillators()?;
        Ok(CenterShiftLines {
            x_from,
            x_to,
            y_from,
            y_to,
            occupation: self.occupation,
            tolerance,
        })
    }

    /// Phonon-preserving line center relative to the bare resonance:
    /// `sum_i (n_i + 1/2)(w_i' - w_i) + (delta_upper - delta_lower) / hbar`, rad/s.
    pub fn line_center(&self) -> Result<f64> {
        let corr = self.micromotion_correction;
        let (dx, dy) = mode_shifts(self.trap, self.lower, self.upper, corr)?;
        let phonons =
            (f64::from(self.occupation.nx) + 0.5) * dx + (f64::from(self.occupation.ny) + 0.5) * dy;
        let du = stark_delta(self.trap, &self.offset, self.upper, corr)?.exact;
        let dl = stark_delta(self.trap, &self.offset, self.lower, corr)?.exact;
        Ok(phonons + (du - dl) / HBAR)
    }

    /// `(w_x' + w_y') / 2` of the upper state.
    pub fn mode_spacing(&self) -> Result<f64> {
        let w = stark_frequencies(self.trap, self.upper, self.micromotion_correction)?;
        Ok(0.5 * (w.x + w.y))
    }

    pub fn spectrum_model(
        &self,
        rabi: f64,
        linewidth: f64,
        background: f64,
    ) -> Result<SpectrumModel> {
        SpectrumModel::new(
            SpectrumParams {
                rabi,
                linewidth,
                center: self.line_center()?,
                background,
            },
            self.mode_spacing()?,
            self.line_weights(DEFAULT_TAIL_TOLERANCE)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn single_line(rabi: f64, linewidth: f64, background: f64) -> SpectrumModel {
        SpectrumModel::new(
            SpectrumParams {
                rabi,
                linewidth,
                center: 0.0,
                background,
            },
            2.0 * PI * 1.7e6,
            LineWeights::carrier_only(),
        )
        .unwrap()
    }

    #[test]
    fn peak_and_far_wing_rates() {
        let m = single_line(2.0 * PI * 50e3, 2.0 * PI * 100e3, 300.0);
        let peak = m.rabi * m.rabi / m.linewidth + 300.0;
        assert!((m.scattering_rate(0.0) / peak - 1.0).abs() < 1e-14);
        assert!((m.scattering_rate(1e12) - 300.0).abs() < 1e-3);
    }

    #[test]
    fn survival_limits() {
        let m = single_line(2.0 * PI * 50e3, 2.0 * PI * 100e3, 0.0);
        assert_eq!(m.survival_probability(0.0, 0.0), 1.0);
        let t = 2f64.ln() / m.scattering_rate(0.0);
        assert!((m.survival_probability(0.0, t) - 0.5).abs() < 1e-14);
        assert!((m.depletion_probability(0.0, t) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn analytic_synthesis_is_exact_and_seeded_draws_repeat() {
        let m = single_line(2.0 * PI * 50e3, 2.0 * PI * 100e3, 0.0);
        let d: Vec<f64> = (-10..=10).map(|i| i as f64 * 2.0 * PI * 20e3).collect();
        let exact = synthesize_scan(&m, &d, 20e-6, &[0], 1, SignalKind::Depletion).unwrap();
        for (x, s) in d.iter().zip(&exact.signal) {
            assert_eq!(*s, m.depletion_probability(*x, 20e-6));
        }
        let a = synthesize_scan(&m, &d, 20e-6, &[100], 7, SignalKind::Survival).unwrap();
        let b = synthesize_scan(&m, &d, 20e-6, &[100], 7, SignalKind::Survival).unwrap();
        assert_eq!(a, b);
        let c = synthesize_scan(&m, &d, 20e-6, &[100], 8, SignalKind::Survival).unwrap();
        assert_ne!(a.signal, c.signal);
    }

    #[test]
    fn noiseless_lorentzian_fit_recovers_parameters() {
        let truth = SpectrumParams {
            rabi: 2.0 * PI * 60e3,
            linewidth: 2.0 * PI * 150e3,
            center: 2.0 * PI * 30e3,
            background: 2000.0,
        };
        let m = SpectrumModel::new(truth, 1.0, LineWeights::carrier_only()).unwrap();
        let d: Vec<f64> = (-40..=40).map(|i| i as f64 * 2.0 * PI * 15e3).collect();
        let scan = synthesize_scan(&m, &d, 30e-6, &[0], 0, SignalKind::Depletion).unwrap();
        let fit = fit_spectrum(
            &scan,
            &LineModel::Fixed(LineWeights::carrier_only()),
            1.0,
            FreeParameters::default(),
            None,
        )
        .unwrap();
        let got = fit.model.params();
        assert!((got.rabi / truth.rabi - 1.0).abs() < 1e-6);
        assert!((got.linewidth / truth.linewidth - 1.0).abs() < 1e-6);
        assert!((got.center - truth.center).abs() < 1e-6 * truth.linewidth);
        assert!((got.background / truth.background - 1.0).abs() < 1e-6);
        assert_eq!(fit.parameters.len(), 4);
    }

    #[test]
    fn fixed_parameters_stay_put() {
        let truth = SpectrumParams {
            rabi: 2.0 * PI * 60e3,
            linewidth: 2.0 * PI * 150e3,
            center: 0.0,
            background: 0.0,
        };
        let m = SpectrumModel::new(truth, 1.0, LineWeights::carrier_only()).unwrap();
        let d: Vec<f64> = (-30..=30).map(|i| i as f64 * 2.0 * PI * 20e3).collect();
        let scan = synthesize_scan(&m, &d, 30e-6, &[0], 0, SignalKind::Survival).unwrap();
        let free = FreeParameters {
            background: false,
            ..FreeParameters::default()
        };
        let fit = fit_spectrum(
            &scan,
            &LineModel::Fixed(LineWeights::carrier_only()),
            1.0,
            free,
            Some(truth),
        )
        .unwrap();
        assert_eq!(fit.model.background, 0.0);
        assert!(fit.parameter("background").is_none());
        assert_eq!(fit.parameters.len(), 3);
    }

    #[test]
    fn flat_signal_is_degenerate() {
        let scan = SpectrumScan {
            detunings: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            exposure: 1e-5,
            signal: vec![0.2; 5],
            trials: vec![0; 5],
            kind: SignalKind::Depletion,
        };
        let r = fit_spectrum(
            &scan,
            &LineModel::Fixed(LineWeights::carrier_only()),
            1.0,
            FreeParameters::default(),
            None,
        );
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn parabola_vertex() {
        let control = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let shift = control
            .iter()
            .map(|x: &f64| -(x - 2.0).powi(2) + 5.0)
            .collect();
        let tp = fit_quadratic_turning_point(
            &QuadraticScan {
                control,
                shift,
                sigma: None,
            },
            None,
        )
        .unwrap();
        assert!((tp.control - 2.0).abs() < 1e-12);
        assert!((tp.shift - 5.0).abs() < 1e-12);
        assert!((tp.curvature + 1.0).abs() < 1e-12);
        let [a, b, c] = tp.coefficients;
        assert!((a + 1.0).abs() < 1e-12 && (b - 4.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
        assert!(tp.errors.unwrap().control < 1e-6);
    }

    #[test]
    fn linear_data_is_degenerate() {
        let control: Vec<f64> = (0..6).map(f64::from).collect();
        let shift = control.iter().map(|x| 3.0 * x - 1.0).collect();
        let r = fit_quadratic_turning_point(
            &QuadraticScan {
                control,
                shift,
                sigma: None,
            },
            None,
        );
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn curvature_sign_is_checked_against_polarizability() {
        let control = vec![-2.0, -1.0, 0.0, 1.0, 2.0];
        let shift: Vec<f64> = control.iter().map(|x| x * x).collect();
        let scan = QuadraticScan {
            control,
            shift,
            sigma: None,
        };
        // positive alpha lowers the energy quadratically: negative curvature expected
        let tp = fit_quadratic_turning_point(&scan, Some(5.6e-31)).unwrap();
        assert!(matches!(tp.warnings[..], [Warning::SignMismatch { .. }]));
        let tp = fit_quadratic_turning_point(&scan, Some(-5.6e-31)).unwrap();
        assert!(tp.warnings.is_empty());
    }

    #[test]
    fn residual_field_hand_value() {
        let e = residual_field_limit(5.6e-31, 100e3, 0.1).unwrap();
        assert!((e - 4.8646).abs() < 1e-3, "{e}");
        let e100 = residual_field_limit(5.6e-29, 100e3, 0.1).unwrap();
        assert!((e / e100 - 10.0).abs() < 1e-12);
        assert_eq!(residual_field_limit(5.6e-31, 100e3, 0.0).unwrap(), 0.0);
        assert!(residual_field_limit(-1.0, 100e3, 0.1).is_err());
    }

    #[test]
    fn center_correction_is_linear_in_phonons() {
        let dw = -2.0 * PI * 41.9e3;
        let c = center_correction(
            PhononOccupation::new(0, 0),
            PhononOccupation::new(20, 0),
            dw,
            0.0,
        );
        assert!((c - 20.0 * dw).abs() < 1e-9);
    }

    #[test]
    fn peaks_at_line_positions() {
        let spacing = 2.0 * PI * 1.7e6;
        let weights = LineWeights {
            weights: BTreeMap::from([(-1, 0.3), (0, 0.5), (1, 0.2)]),
            tail_bound: 0.0,
        };
        let m = SpectrumModel::new(
            SpectrumParams {
                rabi: 1e5,
                linewidth: 2.0 * PI * 100e3,
                center: 2.0 * PI * 0.3e6,
                background: 0.0,
            },
            spacing,
            weights,
        )
        .unwrap();
        let x: Vec<f64> = (-400..=400).map(|i| i as f64 * 2.0 * PI * 7e3).collect();
        let y: Vec<f64> = x.iter().map(|&d| m.scattering_rate(d)).collect();
        let peaks = find_peaks(&x, &y, 0.05);
        assert_eq!(peaks.len(), 3);
        for (p, (pos, _)) in peaks.iter().zip(m.line_positions()) {
            assert!((p.position - pos).abs() < 0.01 * m.linewidth);
        }
    }
}
