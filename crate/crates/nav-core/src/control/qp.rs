//! Dense box-constrained quadratic programming.
//!
//! Minimizes `1/2 z' H z + g' z` subject to `lower <= z <= upper` with an
//! accelerated projected-gradient method. Convergence is certified by the
//! projected-gradient fixed-point residual
//! `|| z - proj(z - (H z + g)) ||_inf <= tol`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
}

/// A box-constrained QP. `hessian` must be symmetric PSD; bounds may be
/// infinite.
#[derive(Clone, Debug)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.gradient.len();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(QpError::InvalidProblem(format!(
                "hessian is {}x{}, gradient has {n} entries",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(QpError::InvalidProblem("bound dimension mismatch".into()));
        }
        let max_diff = (&self.hessian - self.hessian.transpose()).abs().max();
        if max_diff > 1e-12 {
            return Err(QpError::InvalidProblem(format!(
                "hessian asymmetric by {max_diff:.3e}"
            )));
        }
        for i in 0..n {
            if self.lower[i] > self.upper[i] {
                return Err(QpError::InvalidProblem(format!(
                    "bounds crossed at index {i}: [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    fn project(&self, z: &mut DVector<f64>) {
        for i in 0..z.len() {
            z[i] = z[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Projected-gradient KKT residual at `z` (unit step).
    pub fn residual(&self, z: &DVector<f64>) -> f64 {
        let grad = &self.hessian * z + &self.gradient;
        let mut step = z - grad;
        self.project(&mut step);
        (z - step).abs().max()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (z.transpose() * &self.hessian * z)[(0, 0)] + self.gradient.dot(z)
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Largest eigenvalue estimate via power iteration, padded slightly so the
/// projected-gradient step `1/L` stays contractive.
fn lipschitz_bound(h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda: f64 = 0.0;
    for _ in 0..60 {
        let w = h * &v;
        let norm = w.norm();
        if norm <= 1e-300 {
            break;
        }
        lambda = norm;
        v = w / norm;
    }
    // Fall back to the Gershgorin bound if the iteration stalled.
    if lambda <= 0.0 {
        lambda = (0..n)
            .map(|i| h.row(i).abs().sum())
            .fold(0.0, f64::max)
            .max(1e-12);
    }
    lambda * 1.02 + 1e-12
}

/// Solve a box QP with Nesterov-accelerated projected gradient descent and
/// adaptive restarts. Returns the solution with box constraints satisfied
/// exactly.
pub fn qp_solve(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    p.validate()?;
    let step = 1.0 / lipschitz_bound(&p.hessian);

    let mut z = DVector::zeros(p.gradient.len());
    p.project(&mut z);
    let mut y = z.clone();
    let mut t = 1.0_f64;
    let mut residual = p.residual(&z);
    if residual <= tol {
        return Ok(QpSolution {
            z,
            iterations: 0,
            residual,
        });
    }

    for iter in 1..=max_iter {
        let grad = &p.hessian * &y + &p.gradient;
        let mut z_next = &y - step * grad;
        p.project(&mut z_next);

        residual = p.residual(&z_next);
        if residual <= tol {
            return Ok(QpSolution {
                z: z_next,
                iterations: iter,
                residual,
            });
        }

        // Gradient-mapping restart: drop momentum when it points uphill.
        let momentum = &z_next - &z;
        if (&y - &z_next).dot(&momentum) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &z_next + (momentum * ((t - 1.0) / t_next));
        p.project(&mut y);
        t = t_next;
        z = z_next;
    }

    Err(QpError::NonConvergence {
        residual,
        iterations: max_iter,
    })
}
