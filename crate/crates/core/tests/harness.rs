use nalgebra::DMatrix;

use isad::sampling::{DistributionKind, MatrixDistribution, SamplingRegime};
use isad::verify::{concentration_experiment, eig_sandwich_experiment};

fn bounded_uniform() -> MatrixDistribution {
    let mean = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.8 } else { 0.3 / (1 + i + j) as f64 });
    MatrixDistribution::new(DistributionKind::BoundedUniform, mean, 0.5, true).unwrap()
}

#[test]
fn cumulative_squared_error_has_shrinking_increments() {
    let regime = SamplingRegime::new(0.5, true).unwrap();
    let rep = concentration_experiment(&bounded_uniform(), &regime, 30, 200, 3).unwrap();
    assert!(rep.trial_sums.iter().all(|s| s.is_finite()));
    let increments: Vec<f64> = rep.median_cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(increments.iter().all(|&d| d >= 0.0));
    let k = increments.len() / 3;
    let early: f64 = increments[..k].iter().sum();
    let late: f64 = increments[increments.len() - k..].iter().sum();
    assert!(late < early, "late {late:e} vs early {early:e}");
}

#[test]
fn tighter_sandwich_takes_longer_to_settle() {
    let regime = SamplingRegime::new(0.5, true).unwrap();
    let dist = bounded_uniform();
    let loose = eig_sandwich_experiment(&dist, &regime, 0.25, 50, 200, 8).unwrap();
    let tight = eig_sandwich_experiment(&dist, &regime, 0.05, 50, 200, 8).unwrap();
    assert!(tight.median_k() > loose.median_k(), "{} vs {}", tight.median_k(), loose.median_k());
}

#[test]
fn reports_are_reproducible() {
    let regime = SamplingRegime::new(0.5, true).unwrap();
    let a = eig_sandwich_experiment(&bounded_uniform(), &regime, 0.2, 20, 150, 4).unwrap();
    let b = eig_sandwich_experiment(&bounded_uniform(), &regime, 0.2, 20, 150, 4).unwrap();
    assert_eq!(a, b);
}
