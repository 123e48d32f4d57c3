//! Gauss-Hermite nodes with log-scaled weights, and normalized Hermite functions.
//!
//! Weights are returned as `ln(w_i e^{t_i^2})` so that rules with several hundred
//! nodes stay representable: the plain weights underflow long before the nodes do.

use std::f64::consts::PI;

const RESCALE: f64 = 1e150;

/// Normalized Hermite functions `h_0(t) ..= h_n(t)`,
/// `h_k(t) = (2^k k! sqrt(pi))^{-1/2} H_k(t) e^{-t^2/2}`.
pub fn hermite_functions(n: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    out[0] = PI.powf(-0.25) * (-0.5 * t * t).exp();
    fill_hermite_recurrence(&mut out, t);
    out
}

/// Runs the three-term recurrence in place, starting from whatever is in `out[0]`.
pub(crate) fn fill_hermite_recurrence(out: &mut [f64], t: f64) {
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * t * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * t * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `(h_k(t), h_{k-1}(t))` up to a common factor `e^{scale}`, plus `scale` itself.
/// The Gaussian factor is left out and rescaling keeps the values finite.
fn scaled_pair(k: usize, t: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    for j in 0..k {
        let jf = j as f64;
        let next = if j == 0 {
            std::f64::consts::SQRT_2 * t * cur
        } else {
            (2.0 / (jf + 1.0)).sqrt() * t * cur - (jf / (jf + 1.0)).sqrt() * prev
        };
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (cur, prev, log_scale)
}

#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    /// `ln(w_i) + t_i^2`
    pub log_scaled_weights: Vec<f64>,
}

impl GaussHermite {
    /// `k`-point rule for `int e^{-t^2} f(t) dt`, exact for polynomials of degree < 2k.
    pub fn new(k: usize) -> Self {
        assert!(k > 0, "rule needs at least one node");
        let kf = k as f64;
        let half = k.div_ceil(2);
        let mut roots: Vec<f64> = Vec::with_capacity(half);
        let mut z = 0.0f64;
        for i in 0..half {
            // initial guesses for the roots in decreasing order
            z = match i {
                0 => (2.0 * kf + 1.0).sqrt() - 1.85575 * (2.0 * kf + 1.0).powf(-0.16667),
                1 => z - 1.14 * kf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * roots[0],
                3 => 1.91 * z - 0.91 * roots[1],
                _ => 2.0 * z - roots[i - 2],
            };
            if k % 2 == 1 && i == half - 1 {
                z = 0.0;
            } else {
                for _ in 0..100 {
                    let (hk, hk1, _) = scaled_pair(k, z);
                    // d/dt h_k = sqrt(2k) h_{k-1} - t h_k
                    let deriv = (2.0 * kf).sqrt() * hk1 - z * hk;
                    let step = hk / deriv;
                    z -= step;
                    if step.abs() <= 1e-15 * z.abs().max(1.0) {
                        break;
                    }
                }
            }
            roots.push(z);
        }

        let mut nodes = Vec::with_capacity(k);
        let mut logw = Vec::with_capacity(k);
        let log_weight = |t: f64| {
            // w e^{t^2} = 1 / (k h_{k-1}(t)^2)
            let (_, hk1, s) = scaled_pair(k, t);
            let ln_h = hk1.abs().ln() + s - 0.5 * t * t - 0.25 * PI.ln();
            -kf.ln() - 2.0 * ln_h
        };
        for &r in &roots {
            nodes.push(-r);
            logw.push(log_weight(r));
        }
        let mirrored = if k % 2 == 1 { half - 1 } else { half };
        for i in (0..mirrored).rev() {
            nodes.push(roots[i]);
            logw.push(logw[i]);
        }
        // nodes ascend: -r_0 < -r_1 < ... < r_1 < r_0
        let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(logw).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, log_scaled_weights) = pairs.into_iter().unzip();
        Self {
            nodes,
            log_scaled_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
