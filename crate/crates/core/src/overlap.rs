//! Franck-Condon factors between eigenstates of two displaced, rescaled
//! one-dimensional harmonic oscillators.
//!
//! The product `psi_m(b) psi_n(a)` is a polynomial of degree `n + m` times a single
//! Gaussian, so a Gauss-Hermite rule centred on that Gaussian with more than
//! `(n + m) / 2` nodes integrates it exactly. Hermite functions are carried with
//! the square root of the scaled weight folded in, which keeps every term O(1)
//! and the absolute rounding error near machine precision for all entries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss_hermite::{fill_hermite_recurrence, GaussHermite};
use crate::stark::PhononOccupation;
use crate::units::HBAR;

/// Default certification level for truncated rows.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;
/// Extra columns beyond the requested phonon number before adaptive growth.
pub const DEFAULT_MARGIN: usize = 40;
const MAX_COLUMNS: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    /// rad/s
    pub freq: f64,
    /// m
    pub center: f64,
    /// kg
    pub mass: f64,
}

impl OscillatorSpec {
    pub fn new(freq: f64, center: f64, mass: f64) -> Result<Self> {
        if !(freq.is_finite() && freq > 0.0) {
            return Err(Error::InvalidInput(format!(
                "oscillator frequency must be positive, got {freq}"
            )));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidInput(format!(
                "oscillator mass must be positive, got {mass}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::InvalidInput(
                "oscillator center must be finite".into(),
            ));
        }
        Ok(Self { freq, center, mass })
    }

    /// `sqrt(hbar / (M omega))`
    pub fn characteristic_length(&self) -> f64 {
        (HBAR / (self.mass * self.freq)).sqrt()
    }

    /// `M omega / hbar`, 1/m^2
    fn inverse_area(&self) -> f64 {
        self.mass * self.freq / HBAR
    }
}

fn check_mass(a: &OscillatorSpec, b: &OscillatorSpec) -> Result<()> {
    if (a.mass - b.mass).abs() > 1e-12 * a.mass.max(b.mass) {
        return Err(Error::MassMismatch(a.mass, b.mass));
    }
    Ok(())
}

/// Signed overlaps `<m_b|n_a>` for `n <= rows`, `m <= cols`, row-major by `n`.
fn signed_table(
    a: &OscillatorSpec,
    b: &OscillatorSpec,
    rows: usize,
    cols: usize,
) -> Result<Vec<f64>> {
    let (aa, ab) = (a.inverse_area(), b.inverse_area());
    let beta = 0.5 * (aa + ab);
    let x0 = (aa * a.center + ab * b.center) / (aa + ab);
    let rule = GaussHermite::new((rows + cols) / 2 + 1);
    let k = rule.len();

    // Hermite functions of each oscillator at the nodes, times sqrt(scaled weight)
    let weighted = |alpha: f64, center: f64, n: usize| -> Result<Vec<f64>> {
        let sa = alpha.sqrt();
        let mut out = vec![0.0; (n + 1) * k];
        let mut col = vec![0.0; n + 1];
        for (i, (&t, &lw)) in rule.nodes.iter().zip(&rule.log_scaled_weights).enumerate() {
            let xi = sa * (x0 - center + t / beta.sqrt());
            col[0] = (-0.25 * std::f64::consts::PI.ln() - 0.5 * xi * xi + 0.5 * lw).exp();
            if !col[0].is_finite() {
                return Err(Error::InvalidInput(
                    "oscillator displacement out of numerical range".into(),
                ));
            }
            fill_hermite_recurrence(&mut col, xi);
            for (j, v) in col.iter().enumerate() {
                out[j * k + i] = *v;
            }
        }
        Ok(out)
    };
    let ga = weighted(aa, a.center, rows)?;
    let gb = weighted(ab, b.center, cols)?;
    let norm = (aa * ab).powf(0.25) / beta.sqrt();

    let mut table = vec![0.0; (rows + 1) * (cols + 1)];
    for n in 0..=rows {
        let ra = &ga[n * k..(n + 1) * k];
        for m in 0..=cols {
            let rb = &gb[m * k..(m + 1) * k];
            let s: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
            table[n * (cols + 1) + m] = norm * s;
        }
    }
    Ok(table)
}

/// `|<m_b|n_a>|`, symmetric under `(a, n) <-> (b, m)`.
pub fn overlap(a: &OscillatorSpec, n: usize, b: &OscillatorSpec, m: usize) -> Result<f64> {
    check_mass(a, b)?;
    let t = signed_table(a, b, n, m)?;
    Ok(t[n * (m + 1) + m].abs())
}

/// Franck-Condon table from the eigenstates of `from` (rows `n`) to those of
/// `to` (columns `m`).
///
/// Columns extend past `n_max` until every row's squared sum is within the
/// tolerance of one, so `tail_bound` certifies each row independently of how
/// close it is to the last requested phonon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub from: OscillatorSpec,
    pub to: OscillatorSpec,
    pub n_max: usize,
    pub m_max: usize,
    values: Vec<f64>,
    /// `max_n (1 - sum_m |<m|n>|^2)`
    pub tail_bound: f64,
}

impl OverlapMatrix {
    pub fn get(&self, n: usize, m: usize) -> f64 {
        assert!(
            n <= self.n_max && m <= self.m_max,
            "index ({n},{m}) out of range"
        );
        self.values[n * (self.m_max + 1) + m]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let w = self.m_max + 1;
        &self.values[n * w..(n + 1) * w]
    }

    pub fn row_deficit(&self, n: usize) -> f64 {
        row_deficit(self.row(n))
    }

    /// Square block with `n, m <= n_max`.
    pub fn square(&self) -> Vec<Vec<f64>> {
        (0..=self.n_max)
            .map(|n| self.row(n)[..=self.n_max].to_vec())
            .collect()
    }
}

fn row_deficit(row: &[f64]) -> f64 {
    let s: f64 = row.iter().map(|v| v * v).sum();
    (1.0 - s).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapOptions {
    pub tolerance: f64,
    pub margin: usize,
}

impl Default for OverlapOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TAIL_TOLERANCE,
            margin: DEFAULT_MARGIN,
        }
    }
}

pub fn overlap_matrix(
    a: &OscillatorSpec,
    b: &OscillatorSpec,
    n_max: usize,
) -> Result<OverlapMatrix> {
    overlap_matrix_with(a, b, n_max, OverlapOptions::default())
}

pub fn overlap_matrix_with(
    a: &OscillatorSpec,
    b: &OscillatorSpec,
    n_max: usize,
    opts: OverlapOptions,
) -> Result<OverlapMatrix> {
    check_mass(a, b)?;
    let mut m_max = n_max + opts.margin.max(1);
    loop {
        let signed = signed_table(a, b, n_max, m_max)?;
        let values: Vec<f64> = signed.into_iter().map(f64::abs).collect();
        let w = m_max + 1;
        let tail_bound = (0..=n_max)
            .map(|n| row_deficit(&values[n * w..(n + 1) * w]))
            .fold(0.0, f64::max);
        if tail_bound <= opts.tolerance || m_max >= MAX_COLUMNS {
            return Ok(OverlapMatrix {
                from: *a,
                to: *b,
                n_max,
                m_max,
                values,
                tail_bound,
            });
        }
        m_max = (2 * m_max).min(MAX_COLUMNS);
    }
}

/// Combined strengths of the lines in which the radial phonon number changes by `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineWeights {
    pub weights: BTreeMap<i64, f64>,
    /// Upper bound on the probability missing from `weights`.
    pub tail_bound: f64,
}

impl LineWeights {
    /// A single phonon-preserving line.
    pub fn carrier_only() -> Self {
        Self {
            weights: BTreeMap::from([(0, 1.0)]),
            tail_bound: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    pub fn get(&self, r: i64) -> f64 {
        self.weights.get(&r).copied().unwrap_or(0.0)
    }

    /// Total weight in phonon-number changing lines.
    pub fn sideband_weight(&self) -> f64 {
        self.weights
            .iter()
            .filter(|(r, _)| **r != 0)
            .map(|(_, w)| w)
            .sum()
    }
}

/// `weight(r) = sum_s I_{x,r-s}^2 I_{y,s}^2`, with `I_{x,j} = |<n_x + j|n_x>|` taken
/// from row `n_x` of `matrix_x` (and likewise for y). Only admissible final
/// states (`n + j >= 0`) appear since columns start at zero.
pub fn line_weights(
    matrix_x: &OverlapMatrix,
    matrix_y: &OverlapMatrix,
    n: PhononOccupation,
    tolerance: f64,
) -> Result<LineWeights> {
    let (nx, ny) = (n.nx as usize, n.ny as usize);
    if nx > matrix_x.n_max || ny > matrix_y.n_max {
        return Err(Error::TruncationTooSmall(format!(
            "occupation ({nx},{ny}) outside matrices with n_max ({},{})",
            matrix_x.n_max, matrix_y.n_max
        )));
    }
    let (tx, ty) = (matrix_x.row_deficit(nx), matrix_y.row_deficit(ny));
    let tail_bound = 1.0 - (1.0 - tx) * (1.0 - ty);
    if tail_bound > tolerance {
        return Err(Error::TruncationTooSmall(format!(
            "combined tail bound {tail_bound:.3e} exceeds {tolerance:.1e}"
        )));
    }
    let mut weights = BTreeMap::new();
    for (mx, ix) in matrix_x.row(nx).iter().enumerate() {
        let px = ix * ix;
        for (my, iy) in matrix_y.row(ny).iter().enumerate() {
            let r = (mx as i64 - nx as i64) + (my as i64 - ny as i64);
            *weights.entry(r).or_insert(0.0) += px * iy * iy;
        }
    }
    Ok(LineWeights {
        weights,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::IonSpecies;

    fn osc(freq: f64, center: f64) -> OscillatorSpec {
        OscillatorSpec::new(freq, center, IonSpecies::sr88_plus().mass).unwrap()
    }

    const W: f64 = 2.0 * std::f64::consts::PI * 1.76e6;

    #[test]
    fn identical_oscillators_give_kronecker_delta() {
        let a = osc(W, 0.0);
        let m = overlap_matrix(&a, &a, 30).unwrap();
        for n in 0..=30 {
            for k in 0..=m.m_max {
                let want = if n == k { 1.0 } else { 0.0 };
                assert!((m.get(n, k) - want).abs() < 1e-12, "({n},{k})");
            }
        }
        assert!(m.tail_bound < 1e-12);
    }

    #[test]
    fn displaced_ground_states() {
        let a = osc(W, 0.0);
        let b = osc(W, a.characteristic_length());
        let v = overlap(&a, 0, &b, 0).unwrap();
        assert!((v - (-0.25f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn squeezed_ground_states() {
        let a = osc(W, 0.0);
        let b = osc(0.974 * W, 0.0);
        let r = 0.974f64;
        let want = (2.0 * r.sqrt() / (1.0 + r)).sqrt();
        let v = overlap(&a, 0, &b, 0).unwrap();
        assert!((v - want).abs() < 1e-14);
        assert!((v - 0.99996).abs() < 1e-5);
    }

    #[test]
    fn mass_mismatch() {
        let a = osc(W, 0.0);
        let b = OscillatorSpec::new(W, 0.0, 2.0 * a.mass).unwrap();
        assert!(matches!(
            overlap(&a, 0, &b, 0),
            Err(Error::MassMismatch(..))
        ));
    }

    #[test]
    fn parity_zeros_without_displacement() {
        let a = osc(W, 0.0);
        let b = osc(0.974 * W, 0.0);
        let m = overlap_matrix(&a, &b, 30).unwrap();
        for n in 0..=30 {
            for k in 0..=m.m_max {
                if (n + k) % 2 == 1 {
                    assert!(m.get(n, k) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn carrier_and_identity_weights() {
        let a = osc(W, 0.0);
        let mx = overlap_matrix(&a, &a, 25).unwrap();
        let lw = line_weights(&mx, &mx, PhononOccupation::new(20, 0), 1e-8).unwrap();
        assert!((lw.get(0) - 1.0).abs() < 1e-12);
        assert!(lw.sideband_weight() < 1e-20);
    }

    #[test]
    fn occupation_outside_matrix() {
        let a = osc(W, 0.0);
        let mx = overlap_matrix(&a, &a, 5).unwrap();
        let err = line_weights(&mx, &mx, PhononOccupation::new(6, 0), 1e-8).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall(_)));
    }

    #[test]
    fn tail_growth_certifies_every_row() {
        let a = osc(W, 0.0);
        let b = osc(0.974 * W, 3.0 * a.characteristic_length());
        let m = overlap_matrix(&a, &b, 60).unwrap();
        assert!(m.tail_bound < 1e-8, "{}", m.tail_bound);
        assert!(m.m_max > 60);
        for n in 0..=60 {
            let s: f64 = m.row(n).iter().map(|v| v * v).sum();
            assert!(s <= 1.0 + 1e-12);
        }
    }
}
