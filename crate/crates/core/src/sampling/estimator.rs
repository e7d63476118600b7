use nalgebra::DMatrix;

use super::distribution::MatrixDistribution;
use super::regime::SamplingRegime;
use super::spectral::{l1_norm, op_norm};
use crate::error::{check_shape, IsadError, Result};
use crate::rng::{domain, stream};

/// Streaming unbiased estimate of `E[M]` built from all matrices drawn so far.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimator {
    mean_estimate: DMatrix<f64>,
    total_samples: u64,
    round_index: usize,
    last_round_mean: DMatrix<f64>,
    last_round_fraction: f64,
}

impl MatrixEstimator {
    pub fn new(n: usize) -> Self {
        Self {
            mean_estimate: DMatrix::zeros(n, n),
            total_samples: 0,
            round_index: 0,
            last_round_mean: DMatrix::zeros(n, n),
            last_round_fraction: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_estimate.nrows()
    }

    /// `M̄^t`.
    pub fn mean_estimate(&self) -> &DMatrix<f64> {
        &self.mean_estimate
    }

    /// `θ_t`.
    pub fn total_samples(&self) -> u64 {
        self.total_samples
    }

    /// `t`.
    pub fn round_index(&self) -> usize {
        self.round_index
    }

    /// `M̂^t`, the mean of the matrices drawn in the latest round.
    pub fn last_round_mean(&self) -> &DMatrix<f64> {
        &self.last_round_mean
    }

    /// `s_t = (θ_t − θ_{t−1}) / θ_t`.
    pub fn last_round_fraction(&self) -> f64 {
        self.last_round_fraction
    }

    /// Draw `θ(t+1) − θ(t)` matrices from the round stream `(seed, t+1)` and
    /// fold them into the estimate. Returns the number of matrices drawn.
    pub fn advance_round(&mut self, dist: &MatrixDistribution, regime: &SamplingRegime, seed: u64) -> Result<u64> {
        check_shape(
            self.mean_estimate.shape(),
            dist.base_mean().shape(),
            "distribution vs estimator",
        )?;
        let next = self.round_index + 1;
        let target = regime.theta(next);
        if target < self.total_samples {
            return Err(IsadError::Precondition(format!(
                "sample schedule decreased at round {next}: {} -> {target}",
                self.total_samples
            )));
        }
        let count = target - self.total_samples;
        let n = self.dim();
        let mut sum = DMatrix::zeros(n, n);
        let mut rng = stream(seed, domain::ROUND, next as u64);
        for _ in 0..count {
            dist.add_sample_to(&mut sum, &mut rng, true);
        }
        self.fold(sum, count);
        Ok(count)
    }

    /// Fold an explicit batch of matrices in as the next round.
    pub fn absorb_round(&mut self, samples: &[DMatrix<f64>]) -> Result<()> {
        let n = self.dim();
        let mut sum = DMatrix::zeros(n, n);
        for s in samples {
            check_shape((n, n), s.shape(), "sample vs estimator")?;
            sum += s;
        }
        self.fold(sum, samples.len() as u64);
        Ok(())
    }

    fn fold(&mut self, round_sum: DMatrix<f64>, count: u64) {
        self.round_index += 1;
        if count == 0 {
            self.last_round_mean = self.mean_estimate.clone();
            self.last_round_fraction = 0.0;
            return;
        }
        let prev = self.total_samples as f64;
        let next_total = self.total_samples + count;
        let next = next_total as f64;
        // M̄^{t+1} = (θ_t/θ_{t+1}) M̄^t + (1/θ_{t+1}) Σ_new M^i
        self.mean_estimate = &self.mean_estimate * (prev / next) + &round_sum * (1.0 / next);
        self.last_round_mean = round_sum / count as f64;
        self.last_round_fraction = count as f64 / next;
        self.total_samples = next_total;
    }
}

/// Matrices drawn in round `round` (1-based) of a run seeded with `seed`.
/// Reproduces exactly what [`MatrixEstimator::advance_round`] folds in.
pub fn draw_round(dist: &MatrixDistribution, regime: &SamplingRegime, seed: u64, round: usize) -> Vec<DMatrix<f64>> {
    let count = regime.theta(round) - regime.theta(round - 1);
    let mut rng = stream(seed, domain::ROUND, round as u64);
    (0..count)
        .map(|_| {
            let mut m = DMatrix::zeros(dist.dim(), dist.dim());
            dist.add_sample_to(&mut m, &mut rng, true);
            m
        })
        .collect()
}

/// Deviation of the estimator from the true mean, with its norms.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// `δ_t = M̄^t − E[M]`
    pub delta: DMatrix<f64>,
    /// `δ̂_t = M̂^t − E[M]`
    pub delta_round: DMatrix<f64>,
    pub op_norm: f64,
    pub l1_norm: f64,
}

pub fn estimation_error(est: &MatrixEstimator, true_mean: &DMatrix<f64>) -> Result<ErrorReport> {
    check_shape(est.mean_estimate().shape(), true_mean.shape(), "estimator vs true mean")?;
    let delta = est.mean_estimate() - true_mean;
    let delta_round = est.last_round_mean() - true_mean;
    Ok(ErrorReport {
        op_norm: op_norm(&delta),
        l1_norm: l1_norm(&delta),
        delta,
        delta_round,
    })
}
