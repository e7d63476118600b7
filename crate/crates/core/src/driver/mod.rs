//! The outer loop: sample, refresh `M̄`, update `y`, `x`, `z`, then ask the
//! penalty oracle for the next `β`.

pub mod config;
mod trace;

use nalgebra::{DMatrix, DVector};

pub use trace::{write_trace, TraceRow};

use crate::error::{check_len, IsadError, Result};
use crate::lagrangian::{
    eval_lagrangian, kkt_residual, step_identities, x_update_closed_form, x_update_general, y_update, z_update,
    SolverState, Surrogate,
};
use crate::objective::ObjectiveModel;
use crate::penalty::{bounded_step, general_apo_with_sigma, ApoKind, ApoObservation, OracleState};
use crate::sampling::{min_eig_gram, MatrixDistribution, MatrixEstimator, SamplingRegime};

/// Solver settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Starting point; zeros when absent.
    pub x0: Option<DVector<f64>>,
    /// Starting multiplier; zeros when absent.
    pub z0: Option<DVector<f64>>,
    pub beta0: f64,
    pub regime: SamplingRegime,
    pub apo: ApoKind,
    pub apo_eps: f64,
    pub max_rounds: usize,
    pub tol_dx: f64,
    pub tol_kkt: f64,
    /// Consecutive rounds under both tolerances needed to stop.
    pub stop_window: usize,
    pub seed: u64,
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Abort once `‖x‖ + ‖y‖ + ‖z‖` exceeds this.
    pub bound_guard: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x0: None,
            z0: None,
            beta0: 1.0,
            regime: SamplingRegime::new(0.5, true).expect("valid default regime"),
            apo: ApoKind::Bounded,
            apo_eps: 0.1,
            max_rounds: 2000,
            tol_dx: 1e-10,
            tol_kkt: 1e-10,
            stop_window: 5,
            seed: 0,
            inner_tol: 1e-8,
            max_inner: 10_000,
            bound_guard: 1e8,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta0", self.beta0),
            ("apo.eps", self.apo_eps),
            ("inner_tol", self.inner_tol),
            ("bound_guard", self.bound_guard),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IsadError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_rounds == 0 {
            return Err(IsadError::Config("max_rounds must be at least 1".into()));
        }
        if self.stop_window == 0 {
            return Err(IsadError::Config("stop_window must be at least 1".into()));
        }
        if self.tol_dx < 0.0 || self.tol_kkt < 0.0 {
            return Err(IsadError::Config("stopping tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: SolverState,
    pub oracle: OracleState,
    pub estimator: MatrixEstimator,
    pub trace: Vec<TraceRow>,
    /// Stopped by the tolerance rule rather than `max_rounds`.
    pub converged: bool,
}

/// `true` when the window is nonempty and every row has `dx ≤ tol_dx` and
/// `feas ≤ tol_kkt`.
pub fn stopping_check(window: &[TraceRow], tol_dx: f64, tol_kkt: f64) -> bool {
    !window.is_empty() && window.iter().all(|r| r.dx <= tol_dx && r.feas <= tol_kkt)
}

pub fn run(config: &RunConfig, dist: &MatrixDistribution, model: &ObjectiveModel) -> Result<RunOutcome> {
    config.validate()?;
    let n = model.dim();
    check_len(n, dist.dim(), "distribution vs model")?;
    let gamma = model.gamma();
    if config.apo == ApoKind::Bounded {
        match gamma {
            Some(g) if g > 0.0 => {}
            _ => {
                return Err(IsadError::Config(
                    "the bounded oracle needs a model with a positive Hessian bound".into(),
                ))
            }
        }
    }
    let x0 = config.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    let z0 = config.z0.clone().unwrap_or_else(|| DVector::zeros(n));
    check_len(n, x0.len(), "x0")?;
    check_len(n, z0.len(), "z0")?;
    model.h().check_domain(&x0)?;

    let true_mean = dist.base_mean();
    let mut estimator = MatrixEstimator::new(n);
    let mut oracle = OracleState::new(config.beta0)?;
    let mut state = SolverState::new(x0, DVector::zeros(n), z0, config.beta0)?;
    let mut trace = Vec::with_capacity(config.max_rounds);
    let mut converged = false;

    for t in 0..config.max_rounds {
        state.t = t;
        let m_prev = estimator.mean_estimate().clone();
        estimator.advance_round(dist, &config.regime, config.seed)?;
        let m_curr = estimator.mean_estimate();
        // θ_0 = 0 leaves M̄^0 undefined; round 0 uses M̄^1 in both slots.
        let m_prev: &DMatrix<f64> = if t == 0 { m_curr } else { &m_prev };

        let y_step = y_update(&state, m_curr, model)?;
        if t == 0 {
            state.y = y_step.point.clone();
        }
        let y_next = y_step.point;

        let (x_next, inner_iterations, inner_converged) = match gamma {
            Some(_) => (x_update_closed_form(&state, m_prev, m_curr, &y_next, model)?, 0, true),
            None => {
                let out = x_update_general(
                    &state,
                    m_prev,
                    m_curr,
                    &y_next,
                    model,
                    config.inner_tol,
                    config.max_inner,
                )?;
                (out.x, out.iterations, out.converged)
            }
        };
        let z_next = z_update(&state, m_curr, &y_next, &x_next);

        let surrogate = Surrogate::new(&state, m_prev, m_curr, &y_next, model)?;
        let g_delta = surrogate.increment(&x_next, &state.x);
        let h_phi_delta = model.h_phi_gradient_difference(&x_next, &state.x);
        let phi_delta = model.phi().gradient_difference(&x_next, &state.x);
        let obs = ApoObservation {
            x_next: &x_next,
            x_prev: &state.x,
            g_delta,
            grad_h_phi_delta: &h_phi_delta,
            grad_phi_delta: &phi_delta,
        };
        let sigma = min_eig_gram(m_curr);
        let step = match (config.apo, gamma) {
            (ApoKind::Bounded, Some(g)) => bounded_step(&oracle, &obs, g, config.apo_eps, sigma, t),
            _ => general_apo_with_sigma(&oracle, &obs, config.apo_eps, sigma, t)?,
        };

        let ids = step_identities(&state, m_prev, m_curr, &x_next, &y_next, &z_next, model)?;
        let beta = state.beta;
        let next = SolverState {
            x: x_next,
            y: y_next,
            z: z_next,
            beta: step.state.beta,
            t: t + 1,
        };
        let kkt = kkt_residual(&next, true_mean, model)?;
        let row = TraceRow {
            t,
            beta,
            beta_next: step.state.beta,
            dx: (&next.x - &state.x).norm(),
            dy: (&next.y - &state.y).norm(),
            dz: (&next.z - &state.z).norm(),
            feas: (m_curr * &next.x - &next.y).norm(),
            lagrangian: eval_lagrangian(&next.x, &next.y, &next.z, beta, m_curr, model),
            sigma_tilde: step.sigma_tilde,
            zeta: step.state.zeta,
            xi: step.state.xi,
            zeta_lip: step.state.zeta_lip,
            xi_lip: step.state.xi_lip,
            samples_total: estimator.total_samples(),
            r_prox: kkt.r_prox,
            r_grad: kkt.r_grad,
            r_feas: kkt.r_feas,
            g_delta,
            rho: step.rho,
            y_inclusion: ids.y_inclusion,
            x_stationarity: ids.x_stationarity,
            z_identity: ids.z_identity,
            dual_gradient: ids.dual_gradient,
            inner_iterations,
            inner_converged,
            prox_degenerate: y_step.degenerate,
            apo_updated: step.updated,
        };
        trace.push(row);
        oracle = step.state;
        state = next;

        let magnitude = state.magnitude();
        if !(magnitude <= config.bound_guard) {
            return Err(IsadError::Unbounded {
                round: t,
                norm: magnitude,
                guard: config.bound_guard,
            });
        }
        if trace.len() >= config.stop_window
            && stopping_check(
                &trace[trace.len() - config.stop_window..],
                config.tol_dx,
                config.tol_kkt,
            )
        {
            converged = true;
            break;
        }
    }

    Ok(RunOutcome {
        state,
        oracle,
        estimator,
        trace,
        converged,
    })
}
