use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;

use super::smooth::SmoothFunction;
use crate::error::{check_len, IsadError, Result};

/// Generator `φ` of the Bregman proximal term `D_φ(x, x_t)`.
pub trait BregmanGenerator: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn is_convex(&self) -> bool;

    /// `∇φ(a) − ∇φ(b)`.
    fn gradient_difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        self.gradient(a) - self.gradient(b)
    }

    /// `Some(γ)` when `h + φ = (γ/2)‖·‖²` for the `h` this generator was
    /// built from, so `∇(h+φ)` differences are exactly `γ(a − b)`.
    fn paired_quadratic_scale(&self) -> Option<f64> {
        None
    }
}

/// `φ(x) = (μ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct HalfSquaredNorm {
    dim: usize,
    mu: f64,
}

impl HalfSquaredNorm {
    pub fn new(dim: usize, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(IsadError::Config(format!("phi scale must be positive, got {mu}")));
        }
        Ok(Self { dim, mu })
    }

    pub fn scale(&self) -> f64 {
        self.mu
    }
}

impl BregmanGenerator for HalfSquaredNorm {
    fn name(&self) -> &'static str {
        "half_squared_norm"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.mu * x.norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.mu
    }
    fn is_convex(&self) -> bool {
        true
    }
    fn gradient_difference(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        (a - b) * self.mu
    }
}

/// `φ(x) = (γ/2)‖x‖² − h(x)`, convex whenever `∇²h ⪯ γI`.
#[derive(Debug, Clone)]
pub struct BoundedHessianGenerator {
    gamma: f64,
    h: Arc<dyn SmoothFunction>,
}

impl BoundedHessianGenerator {
    /// Uses `h`'s own Hessian bound.
    pub fn new(h: Arc<dyn SmoothFunction>) -> Result<Self> {
        let gamma = h
            .hessian_bound()
            .ok_or_else(|| IsadError::Precondition(format!("{} has no Hessian bound", h.name())))?;
        Ok(Self { gamma, h })
    }

    /// Uses an explicit `γ`, which must dominate `h`'s bound.
    pub fn with_gamma(h: Arc<dyn SmoothFunction>, gamma: f64) -> Result<Self> {
        let bound = h
            .hessian_bound()
            .ok_or_else(|| IsadError::Precondition(format!("{} has no Hessian bound", h.name())))?;
        if !(gamma.is_finite() && gamma >= bound) {
            return Err(IsadError::Config(format!(
                "gamma {gamma} is below the Hessian bound {bound} of {}",
                h.name()
            )));
        }
        Ok(Self { gamma, h })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl BregmanGenerator for BoundedHessianGenerator {
    fn name(&self) -> &'static str {
        "bounded_hessian"
    }
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.gamma * x.norm_squared() - self.h.value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * self.gamma - self.h.gradient(x)
    }
    fn is_convex(&self) -> bool {
        true
    }
    fn paired_quadratic_scale(&self) -> Option<f64> {
        Some(self.gamma)
    }
}

/// `D_φ(x1, x2) = φ(x1) − φ(x2) − ⟨∇φ(x2), x1 − x2⟩`.
pub fn bregman(phi: &dyn BregmanGenerator, x1: &DVector<f64>, x2: &DVector<f64>) -> Result<f64> {
    check_len(phi.dim(), x1.len(), "bregman first argument")?;
    check_len(phi.dim(), x2.len(), "bregman second argument")?;
    if x1 == x2 {
        return Ok(0.0);
    }
    Ok(phi.value(x1) - phi.value(x2) - phi.gradient(x2).dot(&(x1 - x2)))
}
