//! Random operators, the streaming estimator `M̄^t` and the sample schedule.

mod distribution;
mod estimator;
mod extend;
mod regime;
pub mod spectral;

pub use distribution::{DistributionKind, MatrixDistribution};
pub use estimator::{draw_round, estimation_error, ErrorReport, MatrixEstimator};
pub use extend::{extend_to_square, sample_sphere_vectors};
pub use regime::{theta, SamplingRegime};
pub use spectral::min_eig_gram;
