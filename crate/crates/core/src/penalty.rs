//! Adaptive penalty oracles: the closed-form rule for bounded-Hessian
//! problems and the doubling rule driven by empirical Lipschitz trackers.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, IsadError, Result};
use crate::sampling::min_eig_gram;

/// Below this `λ_min(M̄ᵀM̄)` counts as singular and `β` is left alone.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Steps shorter than this (relative to `max(1, ‖x‖)`) carry no usable
/// curvature information and are treated as `x_{t+1} = x_t`.
pub const STALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApoKind {
    Bounded,
    General,
}

impl fmt::Display for ApoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApoKind::Bounded => "bounded",
            ApoKind::General => "general",
        })
    }
}

impl FromStr for ApoKind {
    type Err = IsadError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded" => Ok(ApoKind::Bounded),
            "general" => Ok(ApoKind::General),
            other => Err(IsadError::Config(format!(
                "unknown apo.kind '{other}' (bounded|general)"
            ))),
        }
    }
}

/// Largest difference quotient `‖F(x') − F(x)‖ / ‖x' − x‖` seen along a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ELipEstimate {
    pub value: f64,
}

/// `(F(x_{t+1}), F(x_t), x_{t+1}, x_t)`.
pub type ELipPair = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

/// Pairs with `x_{t+1} = x_t` are skipped.
pub fn empirical_lipschitz(pairs: &[ELipPair]) -> ELipEstimate {
    let value = pairs
        .iter()
        .filter(|(_, _, a, b)| a != b)
        .map(|(fa, fb, a, b)| (fa - fb).norm() / (a - b).norm())
        .fold(0.0, f64::max);
    ELipEstimate { value }
}

/// Closed-form penalty rule for `−γI ⪯ ∇²h ⪯ γI`.
///
/// Keeps `β` while `σ̃β + γ` lies strictly inside
/// `((1+ε/2)·24γ/(σ̃β), (1+2ε)·24γ/(σ̃β))`; otherwise returns the positive
/// root of `σ̃β² + γβ = (1+ε)·24γ/σ̃`.
pub fn apo_b(beta: f64, m_curr: &DMatrix<f64>, gamma: f64, eps: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(IsadError::Precondition(format!(
            "bounded oracle needs gamma > 0, got {gamma}"
        )));
    }
    if !(eps > 0.0) {
        return Err(IsadError::Precondition(format!(
            "oracle eps must be positive, got {eps}"
        )));
    }
    let sigma = min_eig_gram(m_curr);
    Ok(apo_b_with_sigma(beta, sigma, gamma, eps))
}

pub(crate) fn apo_b_with_sigma(beta: f64, sigma: f64, gamma: f64, eps: f64) -> f64 {
    if sigma <= SIGMA_FLOOR {
        return beta;
    }
    let reach = sigma * beta + gamma;
    let unit = 24.0 * gamma / (sigma * beta);
    if (1.0 + 0.5 * eps) * unit < reach && reach < (1.0 + 2.0 * eps) * unit {
        return beta;
    }
    (-gamma + (gamma * gamma + (1.0 + eps) * 96.0 * gamma).sqrt()) / (2.0 * sigma)
}

/// Running state of a penalty oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState {
    pub beta: f64,
    /// `ζ`: running max of `‖Δ(∇h+∇φ)‖² / ‖Δx‖²`.
    pub zeta: f64,
    /// `ξ`: running max of `‖Δ∇φ‖² / ‖Δx‖²`.
    pub xi: f64,
    /// Unsquared companion of `ζ` (an empirical Lipschitz constant).
    pub zeta_lip: f64,
    /// Unsquared companion of `ξ`.
    pub xi_lip: f64,
    pub update_count: usize,
    pub last_update_round: Option<usize>,
}

impl OracleState {
    pub fn new(beta0: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(IsadError::Config(format!("beta0 must be positive, got {beta0}")));
        }
        Ok(Self {
            beta: beta0,
            zeta: 0.0,
            xi: 0.0,
            zeta_lip: 0.0,
            xi_lip: 0.0,
            update_count: 0,
            last_update_round: None,
        })
    }

    /// Folds one step into the trackers. Returns `false` when the step was
    /// treated as stationary and nothing changed.
    pub fn track(&mut self, obs: &ApoObservation<'_>) -> bool {
        let Some(dx2) = obs.step_norm_squared() else {
            return false;
        };
        let hp = obs.grad_h_phi_delta.norm_squared() / dx2;
        let p = obs.grad_phi_delta.norm_squared() / dx2;
        self.zeta = self.zeta.max(hp);
        self.xi = self.xi.max(p);
        self.zeta_lip = self.zeta_lip.max(hp.sqrt());
        self.xi_lip = self.xi_lip.max(p.sqrt());
        true
    }

    fn set_beta(&mut self, beta: f64, round: usize) -> bool {
        if beta == self.beta {
            return false;
        }
        self.beta = beta;
        self.update_count += 1;
        self.last_update_round = Some(round);
        true
    }
}

/// What the oracle sees of round `t`.
#[derive(Debug, Clone, Copy)]
pub struct ApoObservation<'a> {
    pub x_next: &'a DVector<f64>,
    pub x_prev: &'a DVector<f64>,
    /// `g^{t+1}(x_{t+1}) − g^{t+1}(x_t)`.
    pub g_delta: f64,
    /// `∇(h+φ)(x_{t+1}) − ∇(h+φ)(x_t)`.
    pub grad_h_phi_delta: &'a DVector<f64>,
    /// `∇φ(x_{t+1}) − ∇φ(x_t)`.
    pub grad_phi_delta: &'a DVector<f64>,
}

impl ApoObservation<'_> {
    /// `‖Δx‖²`, or `None` for a step below [`STALL_TOL`].
    fn step_norm_squared(&self) -> Option<f64> {
        let dx = (self.x_next - self.x_prev).norm();
        (dx > STALL_TOL * self.x_prev.norm().max(1.0)).then_some(dx * dx)
    }

    fn validate(&self) -> Result<()> {
        let n = self.x_prev.len();
        check_len(n, self.x_next.len(), "oracle x_next")?;
        check_len(n, self.grad_h_phi_delta.len(), "oracle grad (h+phi) difference")?;
        check_len(n, self.grad_phi_delta.len(), "oracle grad phi difference")?;
        if self.x_next == self.x_prev && self.g_delta != 0.0 {
            return Err(IsadError::InconsistentInput(format!(
                "x did not move but the surrogate changed by {}",
                self.g_delta
            )));
        }
        Ok(())
    }
}

/// Result of one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub struct ApoStep {
    pub state: OracleState,
    pub sigma_tilde: f64,
    /// `ρ_t = −2Δg/‖Δx‖²`, absent when the step was stationary.
    pub rho: Option<f64>,
    pub updated: bool,
}

/// Doubling rule: keeps `β` when `ρ_t/4 > 8(ζ+ξ+ε)/(βσ̃)`, else doubles it.
pub fn general_apo(
    state: &OracleState,
    obs: &ApoObservation<'_>,
    eps: f64,
    m_curr: &DMatrix<f64>,
    round: usize,
) -> Result<ApoStep> {
    if !(eps > 0.0) {
        return Err(IsadError::Precondition(format!(
            "oracle eps must be positive, got {eps}"
        )));
    }
    obs.validate()?;
    let sigma = min_eig_gram(m_curr);
    general_apo_with_sigma(state, obs, eps, sigma, round)
}

pub(crate) fn general_apo_with_sigma(
    state: &OracleState,
    obs: &ApoObservation<'_>,
    eps: f64,
    sigma: f64,
    round: usize,
) -> Result<ApoStep> {
    let mut next = state.clone();
    let Some(dx2) = obs.step_norm_squared() else {
        return Ok(ApoStep {
            state: next,
            sigma_tilde: sigma,
            rho: None,
            updated: false,
        });
    };
    next.track(obs);
    let rho = -2.0 * obs.g_delta / dx2;
    if sigma <= SIGMA_FLOOR {
        return Ok(ApoStep {
            state: next,
            sigma_tilde: sigma,
            rho: Some(rho),
            updated: false,
        });
    }
    let keep = rho / 4.0 > 8.0 * (next.zeta + next.xi + eps) / (next.beta * sigma);
    let updated = !keep && next.set_beta(2.0 * next.beta, round);
    Ok(ApoStep {
        state: next,
        sigma_tilde: sigma,
        rho: Some(rho),
        updated,
    })
}

/// Bounded-Hessian oracle step with the trackers run alongside.
pub(crate) fn bounded_step(
    state: &OracleState,
    obs: &ApoObservation<'_>,
    gamma: f64,
    eps: f64,
    sigma: f64,
    round: usize,
) -> ApoStep {
    let mut next = state.clone();
    let rho = obs.step_norm_squared().map(|dx2| -2.0 * obs.g_delta / dx2);
    next.track(obs);
    let beta = apo_b_with_sigma(next.beta, sigma, gamma, eps);
    let updated = next.set_beta(beta, round);
    ApoStep {
        state: next,
        sigma_tilde: sigma,
        rho,
        updated,
    }
}
