//! Monte-Carlo checks of the estimator's concentration, the eigenvalue
//! sandwich around `λ_min(E[M]ᵀE[M])`, and the bias of the sampled Lagrangian.
//!
//! Trial `i` draws from its own stream `derive_seed(seed, TRIAL, i)`, trials
//! run on the rayon pool and are reduced in index order, so every report is a
//! pure function of its inputs.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_len, IsadError, Result};
use crate::lagrangian::eval_lagrangian;
use crate::objective::ObjectiveModel;
use crate::rng::{derive_seed, domain, stream};
use crate::sampling::spectral::l1_norm;
use crate::sampling::{min_eig_gram, MatrixDistribution, MatrixEstimator, SamplingRegime};

/// Fewest trials accepted by [`concentration_experiment`].
pub const MIN_CONCENTRATION_TRIALS: usize = 100;

fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, domain::TRIAL, trial as u64)
}

/// `‖δ_t‖` for `t = 1..=t_max` along one estimator path.
fn error_path(dist: &MatrixDistribution, regime: &SamplingRegime, t_max: usize, seed: u64) -> Result<Vec<f64>> {
    let mut est = MatrixEstimator::new(dist.dim());
    let mut out = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        est.advance_round(dist, regime, seed)?;
        out.push(l1_norm(&(est.mean_estimate() - dist.base_mean())));
    }
    Ok(out)
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub trials: usize,
    /// Scale `c` of the threshold `c·n²/t^{1/2 + ε/4}`.
    pub c: f64,
    /// Threshold for `t = 1..=t_max`.
    pub thresholds: Vec<f64>,
    /// Fraction of trials with `‖δ_t‖` strictly above the threshold.
    pub q: Vec<f64>,
    /// Median over trials of `‖δ_t‖`.
    pub median_error: Vec<f64>,
    /// Median over trials of `Σ_{s≤t} ‖δ_s‖²`.
    pub median_cumulative: Vec<f64>,
    /// `Σ_{t≤t_max} ‖δ_t‖²` for each trial.
    pub trial_sums: Vec<f64>,
}

impl ConcentrationReport {
    /// First `t` (1-based) with `q_t < level`.
    pub fn first_below(&self, level: f64) -> Option<usize> {
        self.q.iter().position(|&q| q < level).map(|i| i + 1)
    }

    /// `q_t` never increases for `t ≥ from` (1-based).
    pub fn nonincreasing_from(&self, from: usize) -> bool {
        let start = from.max(1) - 1;
        self.q
            .get(start..)
            .is_some_and(|tail| tail.windows(2).all(|w| w[1] <= w[0]))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,threshold,q,median_error,median_cumulative")?;
        for t in 0..self.q.len() {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                t + 1,
                self.thresholds[t],
                self.q[t],
                self.median_error[t],
                self.median_cumulative[t]
            )?;
        }
        out.flush()
    }
}

/// Tail frequencies of `‖M̄^t − E[M]‖` against a `t^{-(1/2 + ε/4)}` envelope.
///
/// `c` is the median of `‖δ_1‖ / n²`, which puts `q_1` near one half.
pub fn concentration_experiment(
    dist: &MatrixDistribution,
    regime: &SamplingRegime,
    t_max: usize,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if trials < MIN_CONCENTRATION_TRIALS {
        return Err(IsadError::Precondition(format!(
            "concentration needs at least {MIN_CONCENTRATION_TRIALS} trials, got {trials}"
        )));
    }
    if t_max == 0 {
        return Err(IsadError::Config("t_max must be at least 1".into()));
    }
    let paths = (0..trials)
        .into_par_iter()
        .map(|i| error_path(dist, regime, t_max, trial_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;

    let n2 = (dist.dim() * dist.dim()) as f64;
    let first: Vec<f64> = paths.iter().map(|p| p[0]).collect();
    let c = median(&first) / n2;
    let decay = 0.5 + 0.25 * regime.epsilon();
    let thresholds: Vec<f64> = (1..=t_max).map(|t| c * n2 / (t as f64).powf(decay)).collect();

    let mut q = Vec::with_capacity(t_max);
    let mut median_error = Vec::with_capacity(t_max);
    let mut median_cumulative = Vec::with_capacity(t_max);
    let mut cumulative = vec![0.0; trials];
    for t in 0..t_max {
        let column: Vec<f64> = paths.iter().map(|p| p[t]).collect();
        let above = column.iter().filter(|&&e| e > thresholds[t]).count();
        q.push(above as f64 / trials as f64);
        median_error.push(median(&column));
        for (acc, e) in cumulative.iter_mut().zip(&column) {
            *acc += e * e;
        }
        median_cumulative.push(median(&cumulative));
    }
    Ok(ConcentrationReport {
        trials,
        c,
        thresholds,
        q,
        median_error,
        median_cumulative,
        trial_sums: cumulative,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    /// `λ_min(E[M]ᵀE[M])`.
    pub sigma: f64,
    pub eps_prime: f64,
    pub t_max: usize,
    /// First round from which the sandwich holds through `t_max`, per trial.
    pub k_stable: Vec<Option<usize>>,
}

impl SandwichReport {
    pub fn fraction_stable(&self) -> f64 {
        if self.k_stable.is_empty() {
            return 0.0;
        }
        self.k_stable.iter().filter(|k| k.is_some()).count() as f64 / self.k_stable.len() as f64
    }

    /// Median of `K`, counting trials that never settle as `t_max + 1`.
    pub fn median_k(&self) -> f64 {
        let ks: Vec<f64> = self
            .k_stable
            .iter()
            .map(|k| k.unwrap_or(self.t_max + 1) as f64)
            .collect();
        median(&ks)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trial,k_stable")?;
        for (i, k) in self.k_stable.iter().enumerate() {
            writeln!(out, "{i},{}", k.map(|k| k.to_string()).unwrap_or_default())?;
        }
        out.flush()
    }
}

/// Per trial, the first `K` with `(1−ε′)σ ≤ λ_min(M̄^kᵀM̄^k) ≤ (1+ε′)σ` for all
/// `k` in `K..=t_max`.
pub fn eig_sandwich_experiment(
    dist: &MatrixDistribution,
    regime: &SamplingRegime,
    eps_prime: f64,
    t_max: usize,
    trials: usize,
    seed: u64,
) -> Result<SandwichReport> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(IsadError::Precondition(format!(
            "eps_prime must lie in (0, 1), got {eps_prime}"
        )));
    }
    if t_max == 0 {
        return Err(IsadError::Config("t_max must be at least 1".into()));
    }
    let sigma = min_eig_gram(dist.base_mean());
    let (lo, hi) = ((1.0 - eps_prime) * sigma, (1.0 + eps_prime) * sigma);
    let k_stable = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = trial_seed(seed, i);
            let mut est = MatrixEstimator::new(dist.dim());
            let mut k = None;
            for t in 1..=t_max {
                est.advance_round(dist, regime, trial)?;
                let lambda = min_eig_gram(est.mean_estimate());
                if lambda >= lo && lambda <= hi {
                    k.get_or_insert(t);
                } else {
                    k = None;
                }
            }
            Ok(k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SandwichReport {
        sigma,
        eps_prime,
        t_max,
        k_stable,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub trials: usize,
    /// Monte-Carlo mean of `L_β(x,y,z;M̄) − L_β(x,y,z;E[M])`.
    pub gap_mean: f64,
    /// Standard error of `gap_mean`.
    pub gap_se: f64,
    /// Monte-Carlo mean of `(β/2)‖(M̄ − E[M])x‖²`.
    pub penalty_mean: f64,
    /// `(β/2)E‖(M̄ − E[M])x‖²` from the entry variances.
    pub penalty_exact: f64,
}

impl BiasReport {
    /// `|gap_mean − penalty_exact|` in standard errors; zero when both the
    /// discrepancy and the error bar vanish.
    pub fn z_score(&self) -> f64 {
        let d = (self.gap_mean - self.penalty_exact).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.gap_se
        }
    }

    /// Discrepancy relative to the exact penalty term.
    pub fn relative_gap(&self) -> f64 {
        let d = (self.gap_mean - self.penalty_exact).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.penalty_exact.abs()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trials,gap_mean,gap_se,penalty_mean,penalty_exact,z_score")?;
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.trials,
            self.gap_mean,
            self.gap_se,
            self.penalty_mean,
            self.penalty_exact,
            self.z_score()
        )?;
        out.flush()
    }
}

/// Bias of the Lagrangian evaluated at an average of `samples_per_estimate`
/// draws, compared with `(β/2)E‖δx‖²`.
#[allow(clippy::too_many_arguments)]
pub fn bias_identity_check(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    beta: f64,
    dist: &MatrixDistribution,
    model: &ObjectiveModel,
    samples_per_estimate: usize,
    trials: usize,
    seed: u64,
) -> Result<BiasReport> {
    let n = dist.dim();
    for (v, name) in [(x, "x"), (y, "y"), (z, "z")] {
        check_len(n, v.len(), name)?;
    }
    check_len(n, model.dim(), "model vs distribution")?;
    if !model.p().value(y).is_finite() {
        return Err(IsadError::Precondition("P(y) must be finite".into()));
    }
    if !(beta > 0.0) || samples_per_estimate == 0 || trials < 2 {
        return Err(IsadError::Config(
            "bias check needs beta > 0, at least one sample per estimate and two trials".into(),
        ));
    }
    let mean = dist.base_mean();
    let base = eval_lagrangian(x, y, z, beta, mean, model);
    let draws: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(trial_seed(seed, i), domain::ROUND, 0);
            let mut m_bar = DMatrix::zeros(n, n);
            for _ in 0..samples_per_estimate {
                m_bar += dist.sample(&mut rng);
            }
            m_bar /= samples_per_estimate as f64;
            let gap = eval_lagrangian(x, y, z, beta, &m_bar, model) - base;
            let penalty = 0.5 * beta * ((&m_bar - mean) * x).norm_squared();
            (gap, penalty)
        })
        .collect();

    let count = trials as f64;
    let gap_mean = draws.iter().map(|d| d.0).sum::<f64>() / count;
    let penalty_mean = draws.iter().map(|d| d.1).sum::<f64>() / count;
    let var = draws.iter().map(|d| (d.0 - gap_mean).powi(2)).sum::<f64>() / (count - 1.0);
    let x2 = x.map(|v| v * v);
    let penalty_exact = 0.5 * beta * (dist.variance_matrix() * x2).sum() / samples_per_estimate as f64;
    Ok(BiasReport {
        trials,
        gap_mean,
        gap_se: (var / count).sqrt(),
        penalty_mean,
        penalty_exact,
    })
}
