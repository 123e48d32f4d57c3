//! Damped nonlinear least squares (Levenberg-Marquardt with Marquardt scaling).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged once `max_j |dp_j| / max(|p_j|, scale_j)` drops below this.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `(J^T J)^{-1}` at the solution; multiply by the residual variance for
    /// unweighted problems.
    pub inverse_hessian: DMatrix<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
}

/// A least-squares problem with residuals `r(p)` and Jacobian `dr/dp`.
pub trait Problem {
    fn residuals(&self, p: &[f64]) -> Vec<f64>;

    /// Typical magnitude of each parameter, for relative steps and finite differences.
    fn scales(&self) -> Vec<f64>;

    fn jacobian(&self, p: &[f64]) -> DMatrix<f64> {
        finite_difference_jacobian(self, p)
    }
}

/// Central differences with steps relative to `max(|p_j|, scale_j)`.
pub fn finite_difference_jacobian<P: Problem + ?Sized>(problem: &P, p: &[f64]) -> DMatrix<f64> {
    let scales = problem.scales();
    let r0 = problem.residuals(p);
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(scales[j]);
        q[j] = p[j] + h;
        let up = problem.residuals(&q);
        q[j] = p[j] - h;
        let dn = problem.residuals(&q);
        q[j] = p[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    jac
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<P: Problem + ?Sized>(
    problem: &P,
    start: &[f64],
    opts: LmOptions,
) -> Result<LmOutcome> {
    let np = start.len();
    let scales = problem.scales();
    let mut p = start.to_vec();
    let mut r = problem.residuals(&p);
    if r.len() < np {
        return Err(Error::DegenerateData(format!(
            "{} residuals for {np} free parameters",
            r.len()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite residuals at the start point".into(),
        ));
    }
    let mut cost = sum_sq(&r);
    let mut lambda = opts.initial_damping;

    for iter in 1..=opts.max_iterations {
        let jac = problem.jacobian(&p);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);

        let mut accepted = None;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for j in 0..np {
                let d = jtj[(j, j)];
                a[(j, j)] = d + lambda * if d > 0.0 { d } else { 1.0 };
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let rt = problem.residuals(&trial);
            let ct = sum_sq(&rt);
            if ct.is_finite() && ct <= cost {
                accepted = Some((trial, rt, ct, step));
                break;
            }
            lambda *= 10.0;
        }

        let Some((trial, rt, ct, step)) = accepted else {
            // no downhill step at any damping: numerically at the minimum
            return finish(problem, p, cost, iter);
        };
        let rel = step
            .iter()
            .enumerate()
            .map(|(j, d)| d.abs() / p[j].abs().max(scales[j]))
            .fold(0.0, f64::max);
        p = trial;
        r = rt;
        cost = ct;
        lambda = (lambda / 10.0).max(1e-12);
        if rel < opts.step_tolerance {
            return finish(problem, p, cost, iter);
        }
    }
    Err(Error::FitDiverged {
        iterations: opts.max_iterations,
    })
}

fn finish<P: Problem + ?Sized>(
    problem: &P,
    p: Vec<f64>,
    cost: f64,
    iterations: usize,
) -> Result<LmOutcome> {
    let jac = problem.jacobian(&p);
    let jtj = jac.transpose() * &jac;
    let inverse_hessian = jtj.clone().try_inverse().ok_or_else(|| {
        Error::DegenerateData("parameters are not identifiable from the data".into())
    })?;
    Ok(LmOutcome {
        params: p,
        inverse_hessian,
        cost,
        iterations,
    })
}
