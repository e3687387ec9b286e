//! Newton-Raphson mode finding with numerical derivatives.

use nalgebra::{DMatrix, DVector};

use super::TargetModel;
use crate::error::{invalid, Error, Result};
use crate::linalg::{floor_eigenvalues, is_well_conditioned_spd, symmetrize};

#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub mode: DVector<f64>,
    /// Inverse of the negated Hessian at the mode.
    pub neg_inv_hessian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// True when the Hessian was not negative definite and had to be repaired.
    pub repaired: bool,
}

const MAX_ITERATIONS: usize = 200;
const GRADIENT_TOLERANCE: f64 = 1e-6;

fn step_size(x: f64) -> f64 {
    1e-4 * (1.0 + x.abs())
}

/// Central-difference gradient.
pub fn numerical_gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut y = x.clone();
    for i in 0..x.len() {
        let h = step_size(x[i]);
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian.
pub fn numerical_hessian(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(d, d);
    let mut y = x.clone();
    for i in 0..d {
        let hi = step_size(x[i]);
        y[i] = x[i] + hi;
        let fp = f(&y);
        y[i] = x[i] - hi;
        let fm = f(&y);
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = step_size(x[j]);
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * hi;
                y[j] = x[j] + sj * hj;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Finds a mode of `target` from `start` and returns the Gaussian approximation there.
///
/// Newton steps use the negated Hessian with eigenvalues floored to positive values, and a
/// backtracking line search guarantees the log density does not decrease.
pub fn laplace_approx(target: &dyn TargetModel, start: &DVector<f64>) -> Result<LaplaceResult> {
    if start.len() != target.dimension() {
        return Err(Error::DimensionMismatch { expected: target.dimension(), got: start.len() });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(invalid("Laplace start must be finite"));
    }
    let f = |x: &DVector<f64>| target.log_density(x);
    let mut x = start.clone();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::Numerical("log density is not finite at the Laplace start".into()));
    }
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        iterations = it;
        let g = numerical_gradient(&f, &x);
        if g.norm() < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let neg_h = floor_eigenvalues(&symmetrize(&(-numerical_hessian(&f, &x))), 1e-8, 1e-12);
        let Some(dir) = neg_h.clone().cholesky().map(|c| c.solve(&g)) else {
            return Err(Error::Numerical("Newton system could not be solved".into()));
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let cand = &x + &dir * t;
            let fc = f(&cand);
            if fc.is_finite() && fc >= fx {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // no ascent along the Newton direction at finite-difference resolution
            converged = g.norm() < 1e-3;
            break;
        }
        if (&dir * t).norm() < 1e-12 * (1.0 + x.norm()) {
            converged = numerical_gradient(&f, &x).norm() < 1e-3;
            break;
        }
    }
    let neg_h = symmetrize(&(-numerical_hessian(&f, &x)));
    let mut repaired = false;
    let mut cov = neg_h.clone().try_inverse().map(|m| symmetrize(&m)).unwrap_or_else(|| DMatrix::zeros(x.len(), x.len()));
    if !is_well_conditioned_spd(&cov) {
        repaired = true;
        let fixed = floor_eigenvalues(&neg_h, 1e-8, 1e-12);
        cov = symmetrize(&fixed.try_inverse().ok_or_else(|| Error::Numerical("singular Hessian".into()))?);
        if !is_well_conditioned_spd(&cov) {
            cov = floor_eigenvalues(&cov, 1e-8, 1e-12);
        }
    }
    Ok(LaplaceResult { mode: x, neg_inv_hessian: cov, iterations, converged, repaired })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::toy_mixture_1d;

    struct Quadratic {
        center: DVector<f64>,
        precision: DMatrix<f64>,
    }

    impl TargetModel for Quadratic {
        fn dimension(&self) -> usize {
            self.center.len()
        }
        fn log_density(&self, theta: &DVector<f64>) -> f64 {
            let d = theta - &self.center;
            -0.5 * (d.transpose() * &self.precision * &d)[(0, 0)]
        }
    }

    #[test]
    fn exact_quadratic_in_one_dimension() {
        let t = Quadratic { center: DVector::from_element(1, 3.0), precision: DMatrix::identity(1, 1) };
        let r = laplace_approx(&t, &DVector::from_element(1, -2.0)).unwrap();
        assert!(r.converged);
        assert!((r.mode[0] - 3.0).abs() < 1e-6);
        assert!((r.neg_inv_hessian[(0, 0)] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn correlated_gaussian_covariance_is_recovered() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]);
        let t = Quadratic { center: DVector::from_vec(vec![1.0, -1.0]), precision: cov.clone().try_inverse().unwrap() };
        let r = laplace_approx(&t, &DVector::from_vec(vec![4.0, 4.0])).unwrap();
        assert!((r.neg_inv_hessian - cov).abs().max() < 1e-4);
    }

    #[test]
    fn toy_mixture_from_minus_five_finds_a_local_mode() {
        let t = toy_mixture_1d();
        let r = laplace_approx(&t, &DVector::from_element(1, -5.0)).unwrap();
        let x = r.mode[0];
        let g = numerical_gradient(&|v: &DVector<f64>| t.log_density(v), &r.mode);
        assert!(g.norm() < 1e-4);
        // grid map of the stationary points of the log density
        let dens = |z: f64| t.log_density(&DVector::from_element(1, z));
        let grid: Vec<f64> = (0..=20_000).map(|i| -10.0 + i as f64 * 1e-3).collect();
        let maxima: Vec<f64> = grid
            .windows(3)
            .filter(|w| dens(w[1]) > dens(w[0]) && dens(w[1]) > dens(w[2]))
            .map(|w| w[1])
            .collect();
        assert!(maxima.iter().any(|m| (m - x).abs() < 2e-3), "mode {x} not among {maxima:?}");
    }
}
