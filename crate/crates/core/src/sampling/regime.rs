use crate::error::{IsadError, Result};

/// Cumulative sample schedule `θ_t = ceil(a · t^p)`, with `p = 1 + ε` under
/// sub-Gaussian entries and `p = 2 + ε` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingRegime {
    epsilon: f64,
    subgaussian: bool,
    theta_scale: f64,
}

impl SamplingRegime {
    pub fn new(epsilon: f64, subgaussian: bool) -> Result<Self> {
        Self::with_scale(epsilon, subgaussian, 1.0)
    }

    pub fn with_scale(epsilon: f64, subgaussian: bool, theta_scale: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(IsadError::Config(format!(
                "regime epsilon must be positive, got {epsilon}"
            )));
        }
        if !(theta_scale > 0.0 && theta_scale.is_finite()) {
            return Err(IsadError::Config(format!(
                "theta_scale must be positive, got {theta_scale}"
            )));
        }
        Ok(Self {
            epsilon,
            subgaussian,
            theta_scale,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn subgaussian(&self) -> bool {
        self.subgaussian
    }

    pub fn theta_scale(&self) -> f64 {
        self.theta_scale
    }

    pub fn exponent(&self) -> f64 {
        if self.subgaussian {
            1.0 + self.epsilon
        } else {
            2.0 + self.epsilon
        }
    }

    /// Total number of matrices drawn by the end of round `t`; `θ_0 = 0`.
    pub fn theta(&self, t: usize) -> u64 {
        if t == 0 {
            return 0;
        }
        let p = self.exponent();
        let base = t as f64;
        let power = if p.fract() == 0.0 && p <= i32::MAX as f64 {
            base.powi(p as i32)
        } else {
            base.powf(p)
        };
        let scaled = self.theta_scale * power;
        (scaled.ceil() as u64).max(1)
    }
}

/// Free-function form of [`SamplingRegime::theta`].
pub fn theta(t: usize, regime: &SamplingRegime) -> u64 {
    regime.theta(t)
}
