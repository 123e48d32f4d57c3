//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use rydion::units::hz_to_angular;
use rydion::{gradients_from_secular, IonSpecies, SecularFrequencies, TrapConfig};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
pub const ALPHA_46S: f64 = 5.6e-31;

/// Trap reconstructed from the measured secular frequencies and drive.
pub fn reference_trap() -> TrapConfig {
    let w = SecularFrequencies::from_hz(1.76e6, 1.70e6, 0.87e6).unwrap();
    gradients_from_secular(&w, hz_to_angular(18.1e6), IonSpecies::sr88_plus()).unwrap()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64, &mut [f64])>(f: &F, dim: usize, a: f64, b: f64) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for i in 0..8 {
        let nodes: &[f64] = if i == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in nodes {
            f(c + s * h * XGK[i], &mut buf);
            for d in 0..dim {
                k[d] += WGK[i] * buf[d];
                if i % 2 == 1 {
                    g[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    (k, err)
}

/// Adaptive Gauss-Kronrod (7, 15) quadrature of a vector-valued integrand,
/// bisecting until every panel's worst component error is below its share of `tol`.
pub fn integrate_vec<F: Fn(f64, &mut [f64])>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    tol: f64,
) -> Vec<f64> {
    let mut total = vec![0.0; dim];
    let mut stack = vec![(a, b, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(&f, dim, lo, hi);
        let share = tol * (hi - lo) / (b - a);
        if err <= share.max(1e-15 * v.iter().fold(0.0f64, |m, x| m.max(x.abs()))) || depth > 50 {
            for d in 0..dim {
                total[d] += v[d];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_vec(|x, out| out[0] = f(x), 1, a, b, tol)[0]
}

/// Normalized oscillator eigenfunctions `phi_0..=phi_n` in dimensionless units,
/// built from physicists' Hermite polynomials with explicit normalization.
pub fn oscillator_states(n: usize, xi: f64) -> Vec<f64> {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    if n >= 1 {
        h[1] = 2.0 * xi;
    }
    for k in 1..n {
        h[k + 1] = 2.0 * xi * h[k] - 2.0 * k as f64 * h[k - 1];
    }
    let gauss = (-0.5 * xi * xi).exp();
    let mut log_norm = 0.25 * std::f64::consts::PI.ln();
    (0..=n)
        .map(|k| {
            if k > 0 {
                log_norm += 0.5 * (2.0 * k as f64).ln();
            }
            h[k] * gauss * (-log_norm).exp()
        })
        .collect()
}

/// Golden-section search for a minimum of a unimodal function on `[a, b]`.
pub fn golden_minimize<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a).abs() <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
