use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_len, IsadError, Result};

/// Output of a proximal step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxPoint {
    pub point: DVector<f64>,
    /// The prox was set-valued at this input and a deterministic
    /// representative was returned.
    pub degenerate: bool,
}

impl ProxPoint {
    fn unique(point: DVector<f64>) -> Self {
        Self {
            point,
            degenerate: false,
        }
    }
}

/// The nonsmooth part `P`, accessed through its proximal map
/// `prox_{τP}(u) ∈ argmin_y τP(y) + ½‖y − u‖²`.
pub trait ProxFunction: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// May be `+∞` outside the effective domain.
    fn value(&self, y: &DVector<f64>) -> f64;
    fn prox(&self, tau: f64, u: &DVector<f64>) -> ProxPoint;
    /// Some point with finite value.
    fn feasible_point(&self) -> DVector<f64>;
}

/// `prox_{τP}(u)` with argument checks.
pub fn prox(p: &dyn ProxFunction, tau: f64, u: &DVector<f64>) -> Result<ProxPoint> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(IsadError::Precondition(format!(
            "prox step must be positive, got {tau}"
        )));
    }
    check_len(p.dim(), u.len(), "prox argument")?;
    Ok(p.prox(tau, u))
}

/// `P ≡ 0`.
#[derive(Debug, Clone)]
pub struct ZeroProx {
    dim: usize,
}

impl ZeroProx {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ProxFunction for ZeroProx {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _y: &DVector<f64>) -> f64 {
        0.0
    }
    fn prox(&self, _tau: f64, u: &DVector<f64>) -> ProxPoint {
        ProxPoint::unique(u.clone())
    }
    fn feasible_point(&self) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// `P(y) = ‖y − g‖²`.
#[derive(Debug, Clone)]
pub struct SquaredOffset {
    offset: DVector<f64>,
}

impl SquaredOffset {
    pub fn new(offset: DVector<f64>) -> Self {
        Self { offset }
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }
}

impl ProxFunction for SquaredOffset {
    fn name(&self) -> &'static str {
        "squared_offset"
    }
    fn dim(&self) -> usize {
        self.offset.len()
    }
    fn value(&self, y: &DVector<f64>) -> f64 {
        (y - &self.offset).norm_squared()
    }
    fn prox(&self, tau: f64, u: &DVector<f64>) -> ProxPoint {
        ProxPoint::unique((u + &self.offset * (2.0 * tau)) / (1.0 + 2.0 * tau))
    }
    fn feasible_point(&self) -> DVector<f64> {
        self.offset.clone()
    }
}

/// `P(y) = −ln ‖y‖²`, `+∞` at the origin.
#[derive(Debug, Clone)]
pub struct NegLogSquaredNorm {
    dim: usize,
}

impl NegLogSquaredNorm {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ProxFunction for NegLogSquaredNorm {
    fn name(&self) -> &'static str {
        "neg_log_squared_norm"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &DVector<f64>) -> f64 {
        let sq = y.norm_squared();
        if sq > 0.0 {
            -sq.ln()
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, tau: f64, u: &DVector<f64>) -> ProxPoint {
        // Minimizers are radial: radius s solves s² − ‖u‖s − 2τ = 0.
        let r = u.norm();
        let s = 0.5 * (r + (r * r + 8.0 * tau).sqrt());
        if r > 0.0 {
            ProxPoint::unique(u * (s / r))
        } else {
            // every direction is optimal; pick e₁
            let mut point = DVector::zeros(self.dim);
            point[0] = s;
            ProxPoint {
                point,
                degenerate: true,
            }
        }
    }
    fn feasible_point(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[0] = 1.0;
        v
    }
}

/// Penalty of the inverse-reinforcement-learning reformulation on
/// `y = (u, w) ∈ R^N × R^N`: `(1/N)‖u‖₁` plus the indicator of `w = −1`.
#[derive(Debug, Clone)]
pub struct IrlPenalty {
    pairs: usize,
}

impl IrlPenalty {
    pub fn new(pairs: usize) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }
}

impl ProxFunction for IrlPenalty {
    fn name(&self) -> &'static str {
        "irl"
    }
    fn dim(&self) -> usize {
        2 * self.pairs
    }
    fn value(&self, y: &DVector<f64>) -> f64 {
        let n = self.pairs;
        if y.rows(n, n).iter().any(|&w| w != -1.0) {
            return f64::INFINITY;
        }
        y.rows(0, n).iter().map(|v| v.abs()).sum::<f64>() / n as f64
    }
    fn prox(&self, tau: f64, u: &DVector<f64>) -> ProxPoint {
        let n = self.pairs;
        let k = tau / n as f64;
        let point = DVector::from_fn(2 * n, |i, _| {
            if i < n {
                u[i].signum() * (u[i].abs() - k).max(0.0)
            } else {
                -1.0
            }
        });
        ProxPoint::unique(point)
    }
    fn feasible_point(&self) -> DVector<f64> {
        DVector::from_fn(2 * self.pairs, |i, _| if i < self.pairs { 0.0 } else { -1.0 })
    }
}

/// Lift of a penalty on the first `m` coordinates to `R^n`, ignoring the rest.
/// Used when a rectangular operator has been padded to a square one.
#[derive(Debug, Clone)]
pub struct CoordinateDrop {
    inner: Arc<dyn ProxFunction>,
    total: usize,
}

impl CoordinateDrop {
    pub fn new(inner: Arc<dyn ProxFunction>, total: usize) -> Result<Self> {
        if inner.dim() > total {
            return Err(IsadError::Config(format!(
                "cannot lift a {}-dimensional penalty into R^{total}",
                inner.dim()
            )));
        }
        Ok(Self { inner, total })
    }
}

impl ProxFunction for CoordinateDrop {
    fn name(&self) -> &'static str {
        "coordinate_drop"
    }
    fn dim(&self) -> usize {
        self.total
    }
    fn value(&self, y: &DVector<f64>) -> f64 {
        self.inner.value(&y.rows(0, self.inner.dim()).into_owned())
    }
    fn prox(&self, tau: f64, u: &DVector<f64>) -> ProxPoint {
        let m = self.inner.dim();
        let head = self.inner.prox(tau, &u.rows(0, m).into_owned());
        let mut point = u.clone();
        point.rows_mut(0, m).copy_from(&head.point);
        ProxPoint {
            point,
            degenerate: head.degenerate,
        }
    }
    fn feasible_point(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.total);
        v.rows_mut(0, self.inner.dim()).copy_from(&self.inner.feasible_point());
        v
    }
}
