//! Truncated quadratic power basis `(x − x̃_j)²₊` with knots at equal-count quantiles.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct SplineDesign {
    pub knots: Vec<f64>,
    /// `n × J` matrix of truncated columns; the linear term `x` is not included.
    pub basis: DMatrix<f64>,
    /// True when fewer knots than requested could be placed.
    pub reduced: bool,
}

/// Value of the truncated quadratic `(x − knot)²₊`.
pub fn truncated_square(x: f64, knot: f64) -> f64 {
    let d = x - knot;
    if d > 0.0 { d * d } else { 0.0 }
}

/// Knots splitting the sorted sample into `n_knots + 1` intervals of equal counts. Each knot
/// sits halfway between the two order statistics around its quantile position, so all knots
/// lie strictly inside `(min x, max x)`.
pub fn equal_count_knots(x: &[f64], n_knots: usize) -> Result<(Vec<f64>, bool)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("spline covariate contains non-finite values"));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(invalid("spline covariate needs at least 3 distinct values"));
    }
    let mut reduced = false;
    let mut j_count = n_knots;
    if distinct.len() < n_knots + 2 {
        j_count = distinct.len() - 2;
        reduced = true;
    }
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let mut knots: Vec<f64> = Vec::with_capacity(j_count);
    for j in 1..=j_count {
        let pos = ((j * n) as f64 / (j_count + 1) as f64).round() as usize;
        let pos = pos.clamp(1, n - 1);
        let k = 0.5 * (sorted[pos - 1] + sorted[pos]);
        if k > lo && k < hi && knots.last().is_none_or(|&last| k > last) {
            knots.push(k);
        }
    }
    if knots.len() < j_count {
        reduced = true;
    }
    if knots.is_empty() {
        return Err(invalid("could not place any knot inside the covariate range"));
    }
    Ok((knots, reduced))
}

/// Truncated quadratic basis for `x` with `n_knots` equal-count knots.
pub fn build_spline_design(x: &[f64], n_knots: usize) -> Result<SplineDesign> {
    if n_knots == 0 {
        return Err(invalid("n_knots must be positive"));
    }
    let (knots, reduced) = equal_count_knots(x, n_knots)?;
    let basis = DMatrix::from_fn(x.len(), knots.len(), |i, j| truncated_square(x[i], knots[j]));
    Ok(SplineDesign { knots, basis, reduced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn knot_intervals_hold_equal_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..310).map(|_| rng.random::<f64>()).collect();
        let d = build_spline_design(&x, 30).unwrap();
        assert_eq!(d.knots.len(), 30);
        assert!(!d.reduced);
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend(&d.knots);
        edges.push(f64::INFINITY);
        for w in edges.windows(2) {
            let count = x.iter().filter(|&&v| v > w[0] && v <= w[1]).count();
            assert_eq!(count, 10);
        }
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(d.knots.windows(2).all(|w| w[0] < w[1]));
        assert!(d.knots[0] > lo && *d.knots.last().unwrap() < hi);
        assert!(d.basis.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn below_first_knot_all_truncated_terms_vanish() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let d = build_spline_design(&x, 5).unwrap();
        for j in 0..d.knots.len() {
            assert_eq!(d.basis[(0, j)], 0.0);
        }
    }

    #[test]
    fn truncated_square_is_c1_at_the_knot() {
        let k = 0.37;
        let h = 1e-6;
        let (l, r) = (truncated_square(k - h, k), truncated_square(k + h, k));
        assert!(l.abs() < 1e-11 && r.abs() < 1e-11);
        let slope_left = (truncated_square(k, k) - truncated_square(k - h, k)) / h;
        let slope_right = (truncated_square(k + h, k) - truncated_square(k, k)) / h;
        assert!((slope_left - slope_right).abs() < 1e-5);
    }

    #[test]
    fn too_few_distinct_values_reduce_the_knot_count() {
        let x: Vec<f64> = (0..200).map(|i| (i % 8) as f64).collect();
        let d = build_spline_design(&x, 30).unwrap();
        assert!(d.reduced);
        assert!(d.knots.len() <= 6);
        assert!(build_spline_design(&[1.0, 1.0, 2.0], 3).is_err());
    }
}
