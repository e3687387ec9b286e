use nalgebra::{DMatrix, DVector};

use super::TargetModel;
use crate::mixture::{GaussianComponent, MixtureOfNormals};

/// A target that is itself a mixture of normals.
#[derive(Debug, Clone)]
pub struct MixtureTarget {
    mixture: MixtureOfNormals,
}

impl MixtureTarget {
    pub fn new(mixture: MixtureOfNormals) -> Self {
        Self { mixture }
    }

    pub fn mixture(&self) -> &MixtureOfNormals {
        &self.mixture
    }
}

impl TargetModel for MixtureTarget {
    fn dimension(&self) -> usize {
        self.mixture.dimension()
    }

    fn log_density(&self, theta: &DVector<f64>) -> f64 {
        if theta.len() != self.mixture.dimension() || theta.iter().any(|v| v.is_nan()) {
            return f64::NEG_INFINITY;
        }
        self.mixture.log_density_unchecked(theta.as_slice())
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.dimension()).map(|i| format!("z{i}")).collect()
    }

    fn marginal_log_density(&self, coord: usize, z: f64) -> Option<f64> {
        let m = self.mixture.marginal(&[coord]).ok()?;
        Some(m.log_density_unchecked(&[z]))
    }
}

/// `0.5 φ(z; 0, 1) + 0.3 φ(z; −3, 4) + 0.2 φ(z; 6, 0.5)`, second argument a variance.
pub fn toy_mixture_1d() -> MixtureTarget {
    MixtureTarget::new(
        MixtureOfNormals::univariate(&[(0.5, 0.0, 1.0), (0.3, -3.0, 4.0), (0.2, 6.0, 0.5)])
            .expect("valid constant mixture"),
    )
}

/// `0.7 φ(z; 0, I) + 0.3 φ(z; μ₂, 2I)` in 15 dimensions with `μ₂ = (0, ..., 0, −3)`.
pub fn toy_mixture_15d() -> MixtureTarget {
    let d = 15;
    let mut mu2 = DVector::zeros(d);
    mu2[d - 1] = -3.0;
    let comps = vec![
        GaussianComponent::new(0.7, DVector::zeros(d), DMatrix::identity(d, d)).expect("valid"),
        GaussianComponent::new(0.3, mu2, DMatrix::identity(d, d) * 2.0).expect("valid"),
    ];
    MixtureTarget::new(MixtureOfNormals::new(comps).expect("valid constant mixture"))
}
