//! Objective pieces: the smooth part `h`, the prox-friendly part `P` and
//! the Bregman generator `φ` of the x-update.

mod bregman;
mod prox;
mod smooth;

use std::sync::Arc;

use nalgebra::DVector;

pub use bregman::{bregman, BoundedHessianGenerator, BregmanGenerator, HalfSquaredNorm};
pub use prox::{prox, CoordinateDrop, IrlPenalty, NegLogSquaredNorm, ProxFunction, ProxPoint, SquaredOffset, ZeroProx};
pub use smooth::{LogSquaredNorm, LogisticLoss, Quadratic, SmoothFunction, TikhonovPenalty, ZeroSmooth};

use crate::error::{IsadError, Result};

/// `h`, `P` and `φ` for one problem, plus `γ` when the bounded-Hessian
/// variant is in use.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    h: Arc<dyn SmoothFunction>,
    p: Arc<dyn ProxFunction>,
    phi: Arc<dyn BregmanGenerator>,
    gamma: Option<f64>,
}

impl ObjectiveModel {
    /// Bounded-Hessian variant: `φ = (γ/2)‖x‖² − h` with `γ` from `h`
    /// unless overridden.
    pub fn bounded(h: Arc<dyn SmoothFunction>, p: Arc<dyn ProxFunction>, gamma: Option<f64>) -> Result<Self> {
        let generator = match gamma {
            Some(g) => BoundedHessianGenerator::with_gamma(h.clone(), g)?,
            None => BoundedHessianGenerator::new(h.clone())?,
        };
        let gamma = generator.gamma();
        Self::checked(h, p, Arc::new(generator), Some(gamma))
    }

    /// General variant with an arbitrary convex `φ`.
    pub fn general(
        h: Arc<dyn SmoothFunction>,
        p: Arc<dyn ProxFunction>,
        phi: Arc<dyn BregmanGenerator>,
    ) -> Result<Self> {
        Self::checked(h, p, phi, None)
    }

    fn checked(
        h: Arc<dyn SmoothFunction>,
        p: Arc<dyn ProxFunction>,
        phi: Arc<dyn BregmanGenerator>,
        gamma: Option<f64>,
    ) -> Result<Self> {
        if h.dim() == 0 || h.dim() != p.dim() || h.dim() != phi.dim() {
            return Err(IsadError::DimensionMismatch {
                expected: format!("h, P and phi of one positive dimension (h has {})", h.dim()),
                found: format!("P: {}, phi: {}", p.dim(), phi.dim()),
                context: "objective model",
            });
        }
        if !phi.is_convex() {
            return Err(IsadError::Config(format!(
                "Bregman generator {} is not convex",
                phi.name()
            )));
        }
        Ok(Self { h, p, phi, gamma })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn h(&self) -> &dyn SmoothFunction {
        self.h.as_ref()
    }

    pub fn p(&self) -> &dyn ProxFunction {
        self.p.as_ref()
    }

    pub fn phi(&self) -> &dyn BregmanGenerator {
        self.phi.as_ref()
    }

    /// `γ` of the bounded-Hessian variant; `None` for the general variant.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// `h(x) + P(y)`, the objective at a feasible pair `y = E[M]x`.
    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.h.value(x) + self.p.value(y)
    }

    /// `∇(h+φ)(a) − ∇(h+φ)(b)`, exactly `γ(a − b)` for the bounded variant.
    pub fn h_phi_gradient_difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self.phi.paired_quadratic_scale() {
            Some(gamma) => (a - b) * gamma,
            None => self.h.gradient(a) - self.h.gradient(b) + self.phi.gradient_difference(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn bounded_model_carries_gamma() {
        let h = Arc::new(TikhonovPenalty::new(nalgebra::DMatrix::identity(2, 2)));
        let m = ObjectiveModel::bounded(h, Arc::new(ZeroProx::new(2)), None).unwrap();
        assert_eq!(m.gamma(), Some(2.0));
        let d = m.h_phi_gradient_difference(&dvector![1.0, 0.0], &dvector![0.0, 0.0]);
        assert_eq!(d, dvector![2.0, 0.0]);
    }

    #[test]
    fn mismatched_dims_are_rejected() {
        let h = Arc::new(ZeroSmooth::new(2));
        assert!(ObjectiveModel::bounded(h, Arc::new(ZeroProx::new(3)), None).is_err());
    }

    #[test]
    fn log_norm_has_no_bounded_variant() {
        let h = Arc::new(LogSquaredNorm::new(2));
        let p = Arc::new(NegLogSquaredNorm::new(2));
        assert!(ObjectiveModel::bounded(h.clone(), p.clone(), None).is_err());
        let phi = Arc::new(HalfSquaredNorm::new(2, 1.0).unwrap());
        assert!(ObjectiveModel::general(h, p, phi).unwrap().gamma().is_none());
    }
}
