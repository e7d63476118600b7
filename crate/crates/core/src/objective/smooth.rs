use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, IsadError, Result};
use crate::sampling::spectral::{max_eig_gram, op_norm, symmetric_eigenvalues};

/// The differentiable part `h` of the objective.
pub trait SmoothFunction: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `γ` with `−γI ⪯ ∇²h ⪯ γI` everywhere, when one is known.
    fn hessian_bound(&self) -> Option<f64> {
        None
    }

    /// Distance from `x` that a single inner step may travel. Finite for
    /// functions with singularities so a line search cannot jump into them.
    fn step_radius(&self, _x: &DVector<f64>) -> f64 {
        f64::INFINITY
    }

    /// Reject points where `h` is undefined.
    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        check_len(self.dim(), x.len(), "smooth function argument")
    }
}

/// `h ≡ 0`.
#[derive(Debug, Clone)]
pub struct ZeroSmooth {
    dim: usize,
}

impl ZeroSmooth {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl SmoothFunction for ZeroSmooth {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `h(x) = xᵀQx + bᵀx + c`, with `γ = 2‖Q‖`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    sym: DMatrix<f64>,
    gamma: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, c: f64) -> Result<Self> {
        if !q.is_square() {
            return Err(IsadError::Config("quadratic Q must be square".into()));
        }
        check_len(q.nrows(), b.len(), "quadratic linear term")?;
        let sym = &q + q.transpose();
        let gamma = 2.0 * op_norm(&q);
        Ok(Self { q, b, c, sym, gamma })
    }

    /// `½xᵀQx + bᵀx` for a symmetric `Q`.
    pub fn half(q: &DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(q * 0.5, b, 0.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothFunction for Quadratic {
    fn name(&self) -> &'static str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + self.b.dot(x) + self.c
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.sym * x + &self.b
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(self.gamma)
    }
}

/// `h(x) = ln ‖x‖²`. No global Hessian bound; undefined at the origin.
#[derive(Debug, Clone)]
pub struct LogSquaredNorm {
    dim: usize,
}

impl LogSquaredNorm {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl SmoothFunction for LogSquaredNorm {
    fn name(&self) -> &'static str {
        "log_squared_norm"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.norm_squared().ln()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * (2.0 / x.norm_squared())
    }
    fn step_radius(&self, x: &DVector<f64>) -> f64 {
        // keeps the curvature within a factor 4 of its value at x
        0.5 * x.norm()
    }
    fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        check_len(self.dim, x.len(), "smooth function argument")?;
        if x.norm_squared() > 0.0 {
            Ok(())
        } else {
            Err(IsadError::Domain("ln‖x‖² is undefined at x = 0".into()))
        }
    }
}

/// `h(f) = ‖Γf‖²`, with `γ = 2‖Γ‖²`.
#[derive(Debug, Clone)]
pub struct TikhonovPenalty {
    gram: DMatrix<f64>,
    gamma_mat: DMatrix<f64>,
    bound: f64,
}

impl TikhonovPenalty {
    pub fn new(gamma_mat: DMatrix<f64>) -> Self {
        let gram = gamma_mat.transpose() * &gamma_mat;
        let bound = 2.0 * max_eig_gram(&gamma_mat);
        Self { gram, gamma_mat, bound }
    }

    pub fn regularizer(&self) -> &DMatrix<f64> {
        &self.gamma_mat
    }
}

impl SmoothFunction for TikhonovPenalty {
    fn name(&self) -> &'static str {
        "tikhonov"
    }
    fn dim(&self) -> usize {
        self.gamma_mat.ncols()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.gamma_mat * x).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.gram * x * 2.0
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

/// Negative log-likelihood of binary logistic regression.
///
/// `value(θ) = Σ softplus(xᵢᵀθ) − yᵢ xᵢᵀθ`, `∇ = Σ xᵢ(σ(xᵢᵀθ) − yᵢ)`,
/// `∇² ⪯ ¼ λ_max(Σ xᵢxᵢᵀ) I`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    bound: f64,
}

pub(crate) fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

impl LogisticLoss {
    /// `features` holds one observation per row.
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(IsadError::Config("logistic loss needs at least one observation".into()));
        }
        check_len(features.nrows(), labels.len(), "logistic labels")?;
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(IsadError::Config(format!("logistic label {bad} is not in {{0, 1}}")));
        }
        let scatter = features.transpose() * &features;
        let bound = 0.25 * symmetric_eigenvalues(&scatter).last().copied().unwrap_or(0.0).max(0.0);
        Ok(Self {
            features,
            labels,
            bound,
        })
    }
}

impl SmoothFunction for LogisticLoss {
    fn name(&self) -> &'static str {
        "logistic"
    }
    fn dim(&self) -> usize {
        self.features.ncols()
    }
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let scores = &self.features * theta;
        scores
            .iter()
            .zip(self.labels.iter())
            .map(|(&s, &y)| softplus(s) - y * s)
            .sum()
    }
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let scores = &self.features * theta;
        let resid = DVector::from_iterator(
            scores.len(),
            scores.iter().zip(self.labels.iter()).map(|(&s, &y)| sigmoid(s) - y),
        );
        self.features.transpose() * resid
    }
    fn hessian_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}
