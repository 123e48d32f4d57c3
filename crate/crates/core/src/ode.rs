//! Adaptive Dormand-Prince 5(4) integrator for real vector systems.
//!
//! Step control uses the max norm of the scaled error estimate, so every
//! component individually meets `atol + rtol |y|`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `dy/dt = f(t, y)` from `t0`, returning the state at each of `times`
/// (non-decreasing, none before `t0`). The integrator lands exactly on every
/// output time.
pub fn integrate<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    times: &[f64],
    tol: Tolerances,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.first().is_some_and(|&t| !(t >= t0)) {
        return Err(Error::InvalidInput(
            "output times must be non-decreasing and not before the start".into(),
        ));
    }
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k[0]);

    let span = times.last().map_or(0.0, |&tl| tl - t0);
    let mut h = initial_step(&f, t, &y, &k[0], tol, span);
    let mut steps = 0usize;
    let mut out = Vec::with_capacity(times.len());

    for &target in times {
        while t < target {
            if steps >= tol.max_steps {
                return Err(Error::IntegratorFailure {
                    t,
                    reason: format!("exceeded {} steps", tol.max_steps),
                });
            }
            let last = h >= target - t;
            let hs = if last { target - t } else { h };
            if hs <= 1e-14 * t.abs().max(span) {
                if last {
                    // remaining gap is below rounding; snap to the output time
                    t = target;
                    break;
                }
                return Err(Error::IntegratorFailure {
                    t,
                    reason: format!("step size underflow (h = {hs:e})"),
                });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for j in 0..s {
                        acc += hs * A[s][j] * k[j][i];
                    }
                    tmp[i] = acc;
                }
                f(t + C[s] * hs, &tmp, &mut k[s]);
                if s == 6 {
                    y_new.copy_from_slice(&tmp);
                }
            }

            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for j in 0..7 {
                    e += E[j] * k[j][i];
                }
                let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                err = f64::max(err, (hs * e / sc).abs());
            }
            steps += 1;

            if err.is_finite() && err <= 1.0 {
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h = hs * grow;
                } else {
                    h = h.max(hs * grow);
                }
            } else {
                let shrink = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.1
                };
                h = hs * shrink;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step<F>(f: &F, t: f64, y: &[f64], f0: &[f64], tol: Tolerances, span: f64) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len().max(1) as f64;
    let scale = |i: usize| tol.atol + tol.rtol * y[i].abs();
    let d0 = (y
        .iter()
        .enumerate()
        .map(|(i, v)| (v / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = (f0
        .iter()
        .enumerate()
        .map(|(i, v)| (v / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = if span > 0.0 { h0.min(span) } else { h0 };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1);
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let out = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &times,
            Tolerances::default(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_many_periods() {
        let w = 2.0 * std::f64::consts::PI;
        let times = [0.0, 0.25, 10.0, 20.125];
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -w * w * y[0];
            },
            0.0,
            &[1.0, 0.0],
            &times,
            Tolerances::default(),
        )
        .unwrap();
        for (t, y) in times.iter().zip(&out) {
            assert!((y[0] - (w * t).cos()).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn repeated_output_times_and_start_time() {
        let out = integrate(
            |_, y, dy| dy[0] = y[0],
            0.0,
            &[1.0],
            &[0.0, 1.0, 1.0],
            Tolerances::default(),
        )
        .unwrap();
        assert_eq!(out[0][0], 1.0);
        assert_eq!(out[1], out[2]);
    }

    #[test]
    fn blow_up_fails_cleanly() {
        let tol = Tolerances {
            max_steps: 100_000,
            ..Tolerances::default()
        };
        let r = integrate(|_, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], &[2.0], tol);
        assert!(matches!(r, Err(Error::IntegratorFailure { .. })));
    }

    #[test]
    fn decreasing_times_rejected() {
        let r = integrate(
            |_, _, dy| dy[0] = 0.0,
            0.0,
            &[1.0],
            &[1.0, 0.5],
            Tolerances::default(),
        );
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
