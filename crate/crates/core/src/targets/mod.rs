//! Target distributions: the model interface, toy mixtures, the TVP-AR(1) model and the
//! additive semiparametric regression.

use nalgebra::DVector;

mod laplace;
mod priors;
pub mod semiparam;
pub mod spline;
mod toy;
pub mod tvp;

pub use laplace::{laplace_approx, numerical_gradient, numerical_hessian, LaplaceResult};
pub use priors::{inverse_gamma_log_density_log_scale, log_normal_log_density_log_scale};
pub use semiparam::{semiparam_synthetic, SemiparamModel, TauPrior, DEFAULT_KNOTS, V_GAMMA};
pub use spline::{build_spline_design, SplineDesign};
pub use toy::{toy_mixture_15d, toy_mixture_1d, MixtureTarget};
pub use tvp::{kalman_loglik, tvp_synthetic, TvpAr1Model, TvpSeries};

/// Unnormalized log posterior over a real parameter vector.
///
/// `log_density` returns `-inf` outside the support and must never return NaN.
pub trait TargetModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn log_density(&self, theta: &DVector<f64>) -> f64;

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.dimension()).map(|i| format!("theta{i}")).collect()
    }

    /// Starting point for Newton-Raphson, if the model has a natural one.
    fn laplace_start(&self) -> Option<DVector<f64>> {
        None
    }

    /// Exact marginal log density of coordinate `coord` at `z`, when available.
    fn marginal_log_density(&self, _coord: usize, _z: f64) -> Option<f64> {
        None
    }
}
