//! Small dense linear-algebra helpers shared by the samplers and the clustering code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Lower Cholesky factor, or `None` when the matrix is not numerically SPD.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() != m.ncols() || m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let l = m.clone().cholesky()?.unpack();
    if l.diagonal().iter().all(|&v| v > 0.0 && v.is_finite()) {
        Some(l)
    } else {
        None
    }
}

/// Average `m` with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// SPD in the sense used for covariance repair: Cholesky succeeds and the smallest
/// eigenvalue is at least `1e-10` times the trace.
pub fn is_well_conditioned_spd(m: &DMatrix<f64>) -> bool {
    if cholesky_lower(m).is_none() {
        return false;
    }
    let trace = m.trace();
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    min >= 1e-10 * trace
}

/// Floors the eigenvalues of a symmetric matrix at `floor_rel * trace` (or at `floor_abs`
/// when the trace is not positive).
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor_rel: f64, floor_abs: f64) -> DMatrix<f64> {
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym);
    let trace: f64 = eig.eigenvalues.iter().map(|v| v.abs()).sum();
    let floor = if trace > 0.0 { (floor_rel * trace).max(floor_abs) } else { floor_abs };
    let vals = eig.eigenvalues.map(|v| if v.is_finite() && v > floor { v } else { floor });
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    symmetrize(&out)
}

/// Solves `L y = b` for lower-triangular `L`, writing into `out`.
pub(crate) fn forward_solve_into(l: &DMatrix<f64>, b: &[f64], out: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * out[k];
        }
        out[i] = s / l[(i, i)];
    }
}

/// Sample mean and unbiased covariance of row vectors.
pub fn sample_mean_cov(data: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.len();
    let d = data.first().map_or(0, |x| x.len());
    let mut mean = DVector::zeros(d);
    for x in data {
        mean += x;
    }
    if n > 0 {
        mean /= n as f64;
    }
    let mut cov = DMatrix::zeros(d, d);
    for x in data {
        let c = x - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    // syger only fills the lower triangle
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    if n > 1 {
        cov /= (n - 1) as f64;
    }
    (mean, cov)
}

/// Weighted mean and weighted covariance (normalized by the weight sum).
pub fn weighted_mean_cov(data: &[DVector<f64>], weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = data.first().map_or(0, |x| x.len());
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(d);
    for (x, &w) in data.iter().zip(weights) {
        mean.axpy(w, x, 1.0);
    }
    mean /= total;
    let mut cov = DMatrix::zeros(d, d);
    for (x, &w) in data.iter().zip(weights) {
        let c = x - &mean;
        cov.ger(w, &c, &c, 1.0);
    }
    cov /= total;
    (mean, cov)
}

/// Natural log of the determinant of an SPD matrix from its lower Cholesky factor.
pub fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
}
