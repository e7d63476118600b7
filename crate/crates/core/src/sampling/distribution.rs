use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{IsadError, Result};

/// Degrees of freedom of the heavy-tailed noise used by `FixedPlusNoise`.
const STUDENT_DOF: f64 = 5.0;

/// Entry law of a random matrix `M = E[M] + noise`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    /// Student-t (5 dof) noise scaled to unit variance: finite variance, not sub-Gaussian.
    FixedPlusNoise,
    /// Uniform noise on `[-√3, √3]` (unit variance), bounded.
    BoundedUniform,
    /// Standard normal noise.
    Gaussian,
    /// Each entry kept with probability `p = 1/(1 + noise_scale)` and rescaled by `1/p`.
    BernoulliMask,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::FixedPlusNoise,
        DistributionKind::BoundedUniform,
        DistributionKind::Gaussian,
        DistributionKind::BernoulliMask,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DistributionKind::FixedPlusNoise => "fixed_plus_noise",
            DistributionKind::BoundedUniform => "uniform",
            DistributionKind::Gaussian => "gaussian",
            DistributionKind::BernoulliMask => "bernoulli_mask",
        }
    }

    /// Whether entries of this kind may be declared sub-Gaussian.
    pub fn admits_subgaussian(&self) -> bool {
        !matches!(self, DistributionKind::FixedPlusNoise)
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = IsadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fixed_plus_noise" | "fixed-matrix-plus-noise" | "fixed" => Ok(Self::FixedPlusNoise),
            "uniform" | "entrywise-bounded-uniform" => Ok(Self::BoundedUniform),
            "gaussian" | "entrywise-gaussian" => Ok(Self::Gaussian),
            "bernoulli_mask" | "bernoulli-mask-of-base-matrix" => Ok(Self::BernoulliMask),
            other => Err(IsadError::Config(format!("unknown dist.kind '{other}'"))),
        }
    }
}

/// Immutable law of the random square operator. Samples are i.i.d. with
/// entrywise mean `base_mean`; entries outside `noise_support` are
/// deterministic.
#[derive(Debug, Clone)]
pub struct MatrixDistribution {
    kind: DistributionKind,
    base_mean: DMatrix<f64>,
    noise_scale: f64,
    subgaussian: bool,
    noise_support: Option<DMatrix<bool>>,
}

impl MatrixDistribution {
    pub fn new(kind: DistributionKind, base_mean: DMatrix<f64>, noise_scale: f64, subgaussian: bool) -> Result<Self> {
        if !base_mean.is_square() || base_mean.nrows() == 0 {
            return Err(IsadError::Config(format!(
                "dist.mean must be a nonempty square matrix, got {}x{}",
                base_mean.nrows(),
                base_mean.ncols()
            )));
        }
        if base_mean.iter().any(|v| !v.is_finite()) {
            return Err(IsadError::Config("dist.mean has non-finite entries".into()));
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(IsadError::Config(format!(
                "dist.noise_scale must be finite and nonnegative, got {noise_scale}"
            )));
        }
        if subgaussian && !kind.admits_subgaussian() && noise_scale > 0.0 {
            return Err(IsadError::Config(format!(
                "dist.kind '{kind}' has heavy-tailed entries and cannot be declared sub-Gaussian"
            )));
        }
        Ok(Self {
            kind,
            base_mean,
            noise_scale,
            subgaussian,
            noise_support: None,
        })
    }

    /// Deterministic operator: every sample equals `base_mean`.
    pub fn deterministic(base_mean: DMatrix<f64>) -> Result<Self> {
        Self::new(DistributionKind::FixedPlusNoise, base_mean, 0.0, true)
    }

    /// Restrict the noise to the entries flagged `true`.
    pub fn with_noise_support(mut self, support: DMatrix<bool>) -> Result<Self> {
        if support.shape() != self.base_mean.shape() {
            return Err(IsadError::DimensionMismatch {
                expected: format!("{:?}", self.base_mean.shape()),
                found: format!("{:?}", support.shape()),
                context: "noise support",
            });
        }
        self.noise_support = Some(support);
        Ok(self)
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.base_mean.nrows()
    }

    pub fn base_mean(&self) -> &DMatrix<f64> {
        &self.base_mean
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn subgaussian(&self) -> bool {
        self.subgaussian
    }

    fn is_noisy(&self, i: usize, j: usize) -> bool {
        self.noise_scale > 0.0 && self.noise_support.as_ref().is_none_or(|s| s[(i, j)])
    }

    pub fn is_deterministic(&self) -> bool {
        let n = self.dim();
        !(0..n).any(|i| (0..n).any(|j| self.is_noisy(i, j) && self.entry_variance(i, j) > 0.0))
    }

    /// Exact variance of entry `(i, j)`.
    pub fn entry_variance(&self, i: usize, j: usize) -> f64 {
        if !self.is_noisy(i, j) {
            return 0.0;
        }
        match self.kind {
            DistributionKind::BernoulliMask => self.base_mean[(i, j)].powi(2) * self.noise_scale,
            _ => self.noise_scale * self.noise_scale,
        }
    }

    pub fn variance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.entry_variance(i, j))
    }

    /// One draw of the random operator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut out = self.base_mean.clone();
        self.add_sample_to(&mut out, rng, false);
        out
    }

    /// Add one draw to `acc`; without `accumulate_base` only the zero-mean
    /// noise part is added.
    pub(crate) fn add_sample_to<R: Rng + ?Sized>(&self, acc: &mut DMatrix<f64>, rng: &mut R, accumulate_base: bool) {
        let n = self.dim();
        let student = StudentT::new(STUDENT_DOF).expect("valid dof");
        let student_scale = ((STUDENT_DOF - 2.0) / STUDENT_DOF).sqrt();
        let keep = 1.0 / (1.0 + self.noise_scale);
        for j in 0..n {
            for i in 0..n {
                let mean = self.base_mean[(i, j)];
                let base = if accumulate_base { mean } else { 0.0 };
                if !self.is_noisy(i, j) {
                    acc[(i, j)] += base;
                    continue;
                }
                let noise = match self.kind {
                    DistributionKind::FixedPlusNoise => self.noise_scale * student_scale * student.sample(rng),
                    DistributionKind::BoundedUniform => self.noise_scale * rng.random_range(-3f64.sqrt()..3f64.sqrt()),
                    DistributionKind::Gaussian => {
                        let z: f64 = StandardNormal.sample(rng);
                        self.noise_scale * z
                    }
                    DistributionKind::BernoulliMask => {
                        // draw = mean * B / p, so noise = draw - mean
                        let kept = rng.random::<f64>() < keep;
                        let draw = if kept { mean / keep } else { 0.0 };
                        draw - mean
                    }
                };
                acc[(i, j)] += base + noise;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream};

    fn base() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0])
    }

    #[test]
    fn heavy_tailed_kind_cannot_be_subgaussian() {
        let err = MatrixDistribution::new(DistributionKind::FixedPlusNoise, base(), 0.1, true);
        assert!(err.is_err());
        assert!(MatrixDistribution::new(DistributionKind::FixedPlusNoise, base(), 0.1, false).is_ok());
        assert!(MatrixDistribution::deterministic(base()).is_ok());
    }

    #[test]
    fn rejects_bad_shapes_and_scales() {
        let rect = DMatrix::zeros(2, 3);
        assert!(MatrixDistribution::new(DistributionKind::Gaussian, rect, 0.1, true).is_err());
        assert!(MatrixDistribution::new(DistributionKind::Gaussian, base(), -0.1, true).is_err());
        assert!(MatrixDistribution::new(DistributionKind::Gaussian, base(), f64::NAN, true).is_err());
    }

    #[test]
    fn zero_noise_returns_mean() {
        for kind in DistributionKind::ALL {
            let d = MatrixDistribution::new(kind, base(), 0.0, kind.admits_subgaussian()).unwrap();
            let mut rng = stream(1, domain::ROUND, 0);
            assert_eq!(d.sample(&mut rng), base());
            assert!(d.is_deterministic());
        }
    }

    #[test]
    fn empirical_moments_match_declared() {
        let draws = 40_000;
        for kind in DistributionKind::ALL {
            let d = MatrixDistribution::new(kind, base(), 0.5, kind.admits_subgaussian()).unwrap();
            let mut rng = stream(11, domain::ROUND, kind as u64);
            let mut sum = DMatrix::zeros(2, 2);
            let mut sum_sq = DMatrix::zeros(2, 2);
            for _ in 0..draws {
                let s = d.sample(&mut rng);
                sum_sq += s.component_mul(&s);
                sum += s;
            }
            let mean = &sum / draws as f64;
            let var = &sum_sq / draws as f64 - mean.component_mul(&mean);
            for i in 0..2 {
                for j in 0..2 {
                    let v = d.entry_variance(i, j);
                    let se = (v / draws as f64).sqrt();
                    assert!((mean[(i, j)] - base()[(i, j)]).abs() < 5.0 * se + 1e-12, "{kind} mean");
                    assert!(
                        (var[(i, j)] - v).abs() < 0.1 * v + 1e-12,
                        "{kind} var {} vs {}",
                        var[(i, j)],
                        v
                    );
                }
            }
        }
    }

    #[test]
    fn support_restricts_noise() {
        let support = DMatrix::from_row_slice(2, 2, &[false, true, false, false]);
        let d = MatrixDistribution::new(DistributionKind::Gaussian, base(), 1.0, true)
            .unwrap()
            .with_noise_support(support)
            .unwrap();
        let mut rng = stream(3, domain::ROUND, 0);
        let s = d.sample(&mut rng);
        assert_eq!(s[(0, 0)], 1.0);
        assert_eq!(s[(1, 0)], 0.5);
        assert_eq!(s[(1, 1)], 3.0);
        assert_ne!(s[(0, 1)], -2.0);
        assert_eq!(d.entry_variance(0, 0), 0.0);
        assert_eq!(d.entry_variance(0, 1), 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in DistributionKind::ALL {
            assert_eq!(kind.name().parse::<DistributionKind>().unwrap(), kind);
        }
        assert!("cauchy".parse::<DistributionKind>().is_err());
    }
}
