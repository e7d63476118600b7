//! The augmented Lagrangian, the x-surrogate and the three primal/dual steps.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_len, check_shape, IsadError, Result};
use crate::objective::{bregman, prox, ObjectiveModel, ProxPoint};

/// Iterate `(x_t, y_t, z_t)` with the penalty `β_t` in force at round `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub beta: f64,
    pub t: usize,
}

impl SolverState {
    pub fn new(x: DVector<f64>, y: DVector<f64>, z: DVector<f64>, beta: f64) -> Result<Self> {
        check_len(x.len(), y.len(), "state y")?;
        check_len(x.len(), z.len(), "state z")?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(IsadError::Config(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { x, y, z, beta, t: 0 })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `‖x‖ + ‖y‖ + ‖z‖`.
    pub fn magnitude(&self) -> f64 {
        self.x.norm() + self.y.norm() + self.z.norm()
    }
}

/// `L_β(x, y, z; A) = h(x) + P(y) − ⟨z, Ax − y⟩ + (β/2)‖Ax − y‖²`.
/// `+∞` when `P(y) = +∞`.
pub fn eval_lagrangian(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    beta: f64,
    a: &DMatrix<f64>,
    model: &ObjectiveModel,
) -> f64 {
    let p = model.p().value(y);
    if p == f64::INFINITY {
        return f64::INFINITY;
    }
    let r = a * x - y;
    model.h().value(x) + p - z.dot(&r) + 0.5 * beta * r.norm_squared()
}

/// `g^{t+1}(x) = h(x) − ⟨z_t, M̄^t x⟩ + (β_t/2)‖M̄^{t+1}x − y_{t+1}‖² + D_φ(x, x_t)`.
///
/// The linear term uses the previous estimate and the quadratic term the
/// current one.
#[derive(Debug, Clone, Copy)]
pub struct Surrogate<'a> {
    model: &'a ObjectiveModel,
    anchor: &'a DVector<f64>,
    z: &'a DVector<f64>,
    beta: f64,
    m_prev: &'a DMatrix<f64>,
    m_curr: &'a DMatrix<f64>,
    y_next: &'a DVector<f64>,
}

// 8-point Gauss–Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl<'a> Surrogate<'a> {
    pub fn new(
        state: &'a SolverState,
        m_prev: &'a DMatrix<f64>,
        m_curr: &'a DMatrix<f64>,
        y_next: &'a DVector<f64>,
        model: &'a ObjectiveModel,
    ) -> Result<Self> {
        let n = state.dim();
        check_len(model.dim(), n, "state vs model")?;
        check_shape((n, n), m_prev.shape(), "previous estimate")?;
        check_shape((n, n), m_curr.shape(), "current estimate")?;
        check_len(n, y_next.len(), "y_{t+1}")?;
        Ok(Self {
            model,
            anchor: &state.x,
            z: &state.z,
            beta: state.beta,
            m_prev,
            m_curr,
            y_next,
        })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let r = self.m_curr * x - self.y_next;
        let coupling = -self.z.dot(&(self.m_prev * x)) + 0.5 * self.beta * r.norm_squared();
        let h = self.model.h();
        match self.model.phi().paired_quadratic_scale() {
            // h + D_φ(·, x_t) collapses to h(x_t) + ⟨∇h(x_t), x − x_t⟩ + (γ/2)‖x − x_t‖²
            Some(gamma) => {
                let d = x - self.anchor;
                h.value(self.anchor) + h.gradient(self.anchor).dot(&d) + 0.5 * gamma * d.norm_squared() + coupling
            }
            None => {
                let d = bregman(self.model.phi(), x, self.anchor).unwrap_or(f64::NAN);
                h.value(x) + d + coupling
            }
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let r = self.m_curr * x - self.y_next;
        self.smooth_gradient(x) - self.m_prev.tr_mul(self.z) + self.m_curr.tr_mul(&r) * self.beta
    }

    /// `∇h(x) + ∇φ(x) − ∇φ(x_t)`.
    fn smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.model.h();
        match self.model.phi().paired_quadratic_scale() {
            Some(gamma) => h.gradient(self.anchor) + (x - self.anchor) * gamma,
            None => h.gradient(x) + self.model.phi().gradient_difference(x, self.anchor),
        }
    }

    /// `g(a) − g(b)` without the cancellation of subtracting two large values.
    ///
    /// Integrates `⟨∇g, a − b⟩` along the segment (exact for quadratic `g`)
    /// unless the direct difference is already well resolved.
    pub fn increment(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        if a == b {
            return 0.0;
        }
        if self.model.phi().paired_quadratic_scale().is_none() {
            let (ga, gb) = (self.value(a), self.value(b));
            let direct = ga - gb;
            if !direct.is_finite() || direct.abs() > 1e-6 * (ga.abs() + gb.abs()) {
                return direct;
            }
        }
        let d = a - b;
        let mut sum = 0.0;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            for s in [0.5 * (1.0 - node), 0.5 * (1.0 + node)] {
                sum += weight * self.gradient(&(b + &d * s)).dot(&d);
            }
        }
        0.5 * sum
    }
}

pub fn eval_surrogate_g(
    x: &DVector<f64>,
    state: &SolverState,
    m_prev: &DMatrix<f64>,
    m_curr: &DMatrix<f64>,
    y_next: &DVector<f64>,
    model: &ObjectiveModel,
) -> Result<f64> {
    check_len(state.dim(), x.len(), "surrogate argument")?;
    Ok(Surrogate::new(state, m_prev, m_curr, y_next, model)?.value(x))
}

/// `y_{t+1} = prox_{P/β_t}(M̄^{t+1}x_t − z_t/β_t)`.
pub fn y_update(state: &SolverState, m_curr: &DMatrix<f64>, model: &ObjectiveModel) -> Result<ProxPoint> {
    let n = state.dim();
    check_shape((n, n), m_curr.shape(), "current estimate")?;
    let u = m_curr * &state.x - &state.z / state.beta;
    prox(model.p(), 1.0 / state.beta, &u)
}

/// Solves `(β M̄ᵀM̄ + γI) x = M̄_prevᵀz + β M̄ᵀy + γx_t − ∇h(x_t)`, the exact
/// minimizer of the surrogate in the bounded-Hessian variant.
pub fn x_update_closed_form(
    state: &SolverState,
    m_prev: &DMatrix<f64>,
    m_curr: &DMatrix<f64>,
    y_next: &DVector<f64>,
    model: &ObjectiveModel,
) -> Result<DVector<f64>> {
    let gamma = model
        .gamma()
        .ok_or_else(|| IsadError::Precondition("closed-form x-update needs the bounded-Hessian model".into()))?;
    let surrogate = Surrogate::new(state, m_prev, m_curr, y_next, model)?;
    let n = state.dim();
    let beta = state.beta;
    let lhs = m_curr.tr_mul(m_curr) * beta + DMatrix::identity(n, n) * gamma;
    let rhs = m_prev.tr_mul(&state.z) + m_curr.tr_mul(y_next) * beta + &state.x * gamma - model.h().gradient(&state.x);
    let chol = Cholesky::new(lhs.clone())
        .ok_or_else(|| IsadError::Singular(format!("β M̄ᵀM̄ + γI at round {} is not positive definite", state.t)))?;
    let mut x = chol.solve(&rhs);
    // one step of iterative refinement
    let resid = &rhs - &lhs * &x;
    x += chol.solve(&resid);
    debug_assert!(surrogate.gradient(&x).norm() <= 1e-6 * (1.0 + rhs.norm()));
    Ok(x)
}

/// Outcome of the iterative x-update.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// `false` when `max_inner` ran out before `‖∇g‖ ≤ inner_tol`.
    pub converged: bool,
}

const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-300;

/// Gradient descent with Armijo backtracking on `g^{t+1}` from `x_t`.
///
/// Trial steps follow the Barzilai-Borwein rule, capped by the step radius of
/// `h`. Candidates outside the domain of `h` count as failed trials.
pub fn x_update_general(
    state: &SolverState,
    m_prev: &DMatrix<f64>,
    m_curr: &DMatrix<f64>,
    y_next: &DVector<f64>,
    model: &ObjectiveModel,
    inner_tol: f64,
    max_inner: usize,
) -> Result<InnerSolve> {
    if !(inner_tol > 0.0) {
        return Err(IsadError::Config(format!(
            "inner_tol must be positive, got {inner_tol}"
        )));
    }
    let g = Surrogate::new(state, m_prev, m_curr, y_next, model)?;
    let mut x = state.x.clone();
    let mut grad = g.gradient(&x);
    let mut grad_norm = grad.norm();
    let mut step = initial_step(state, m_curr, model);
    let mut iterations = 0;
    while grad_norm > inner_tol && iterations < max_inner {
        let slope = grad_norm * grad_norm;
        step = step.min(model.h().step_radius(&x) / grad_norm);
        let accepted = loop {
            let cand = &x - &grad * step;
            if model.h().check_domain(&cand).is_ok() {
                let dec = g.increment(&cand, &x);
                if dec.is_finite() && dec <= -ARMIJO_SLOPE * step * slope {
                    break Some(cand);
                }
            }
            step *= BACKTRACK;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(cand) = accepted else { break };
        let next_grad = g.gradient(&cand);
        let s = &cand - &x;
        let curvature = s.dot(&(&next_grad - &grad));
        // Barzilai-Borwein trial step; doubling when curvature is not positive.
        step = if curvature > 0.0 {
            s.norm_squared() / curvature
        } else {
            2.0 * step
        };
        x = cand;
        grad = next_grad;
        grad_norm = grad.norm();
        iterations += 1;
    }
    Ok(InnerSolve {
        converged: grad_norm <= inner_tol,
        x,
        iterations,
        gradient_norm: grad_norm,
    })
}

/// Reciprocal of a curvature estimate of `g` at `x_t`.
fn initial_step(state: &SolverState, m_curr: &DMatrix<f64>, model: &ObjectiveModel) -> f64 {
    let coupling = state.beta * m_curr.norm_squared();
    let local = model.gamma().unwrap_or(1.0);
    1.0 / (coupling + local).max(1e-12)
}

/// `z_{t+1} = z_t − β_t(M̄^{t+1}x_{t+1} − y_{t+1})`.
pub fn z_update(
    state: &SolverState,
    m_curr: &DMatrix<f64>,
    y_next: &DVector<f64>,
    x_next: &DVector<f64>,
) -> DVector<f64> {
    &state.z - (m_curr * x_next - y_next) * state.beta
}

/// Distance from the first-order conditions of the true problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `‖y − prox_P(y − z)‖`, zero iff `−z ∈ ∂P(y)`.
    pub r_prox: f64,
    /// `‖∇h(x) − E[M]ᵀz‖`.
    pub r_grad: f64,
    /// `‖E[M]x − y‖`.
    pub r_feas: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.r_prox.max(self.r_grad).max(self.r_feas)
    }
}

pub fn kkt_residual(state: &SolverState, true_mean: &DMatrix<f64>, model: &ObjectiveModel) -> Result<KktResidual> {
    let n = state.dim();
    check_shape((n, n), true_mean.shape(), "true mean")?;
    let p = prox(model.p(), 1.0, &(&state.y - &state.z))?;
    Ok(KktResidual {
        r_prox: (&state.y - p.point).norm(),
        r_grad: (model.h().gradient(&state.x) - true_mean.tr_mul(&state.z)).norm(),
        r_feas: (true_mean * &state.x - &state.y).norm(),
    })
}

/// Per-round checks of the identities linking consecutive iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepIdentities {
    /// `‖y⁺ − prox_{P/β}(y⁺ − (z⁺ + βM̄(x⁺ − x_t))/β)‖`.
    pub y_inclusion: f64,
    /// `‖∇g^{t+1}(x⁺)‖`.
    pub x_stationarity: f64,
    /// `‖M̄x⁺ − y⁺ − (z − z⁺)/β‖` relative to the operand magnitudes.
    pub z_identity: f64,
    /// `‖∇h(x⁺) − M̄ᵀz⁺ + ∇φ(x⁺) − ∇φ(x_t)‖` with `M̄ = M̄^{t+1}`. Exact only
    /// when the estimate did not move during the round.
    pub dual_gradient: f64,
}

/// Evaluates [`StepIdentities`] for the step `state → (x_next, y_next, z_next)`.
#[allow(clippy::too_many_arguments)]
pub fn step_identities(
    state: &SolverState,
    m_prev: &DMatrix<f64>,
    m_curr: &DMatrix<f64>,
    x_next: &DVector<f64>,
    y_next: &DVector<f64>,
    z_next: &DVector<f64>,
    model: &ObjectiveModel,
) -> Result<StepIdentities> {
    let g = Surrogate::new(state, m_prev, m_curr, y_next, model)?;
    let beta = state.beta;
    let mx = m_curr * x_next;

    let u = y_next - (z_next + m_curr * (x_next - &state.x) * beta) / beta;
    let y_inclusion = (y_next - prox(model.p(), 1.0 / beta, &u)?.point).norm();

    let grad = g.gradient(x_next);

    let lhs = &mx - y_next;
    let rhs = (&state.z - z_next) / beta;
    let scale = mx.norm() + y_next.norm() + (state.z.norm() + z_next.norm()) / beta;
    let z_identity = (lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE);

    let dual_gradient = (g.smooth_gradient(x_next) - m_curr.tr_mul(z_next)).norm();

    Ok(StepIdentities {
        y_inclusion,
        x_stationarity: grad.norm(),
        z_identity,
        dual_gradient,
    })
}
