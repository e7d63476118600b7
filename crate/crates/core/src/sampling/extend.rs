use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{IsadError, Result};

const UNIT_TOL: f64 = 1e-12;

/// `count` vectors uniform on the unit sphere of `R^n` (normalized Gaussians).
pub fn sample_sphere_vectors<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..count)
        .map(|_| loop {
            let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut *rng));
            let norm = v.norm();
            if norm > 1e-300 {
                break v / norm;
            }
        })
        .collect()
}

/// Stack the fixed unit rows under an `m × n` sample to get an `n × n` operator.
/// The same `rows` must be reused for every sample.
pub fn extend_to_square(m_rect: &DMatrix<f64>, rows: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let (m, n) = m_rect.shape();
    if m > n {
        return Err(IsadError::Precondition(format!(
            "sample has more rows than columns ({m}x{n})"
        )));
    }
    if m + rows.len() != n {
        return Err(IsadError::DimensionMismatch {
            expected: format!("{} extension rows", n - m),
            found: format!("{}", rows.len()),
            context: "extend_to_square",
        });
    }
    for (k, v) in rows.iter().enumerate() {
        if v.len() != n {
            return Err(IsadError::DimensionMismatch {
                expected: n.to_string(),
                found: v.len().to_string(),
                context: "extension row length",
            });
        }
        if (v.norm() - 1.0).abs() > UNIT_TOL {
            return Err(IsadError::Precondition(format!(
                "extension row {k} has norm {} (must be unit)",
                v.norm()
            )));
        }
    }
    let mut out = DMatrix::zeros(n, n);
    out.rows_mut(0, m).copy_from(m_rect);
    for (k, v) in rows.iter().enumerate() {
        out.row_mut(m + k).copy_from(&v.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, stream};
    use crate::sampling::spectral::numerical_rank;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn square_input_is_unchanged() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(extend_to_square(&a, &[]).unwrap(), a);
    }

    #[test]
    fn canonical_extension() {
        let a = dmatrix![1.0, 0.0];
        let out = extend_to_square(&a, &[dvector![0.0, 1.0]]).unwrap();
        assert_eq!(out, DMatrix::identity(2, 2));
        assert_eq!(numerical_rank(&out, 1e-10), 2);
    }

    #[test]
    fn rejects_non_unit_rows() {
        let a = dmatrix![1.0, 0.0];
        assert!(matches!(
            extend_to_square(&a, &[dvector![0.0, 2.0]]),
            Err(IsadError::Precondition(_))
        ));
        assert!(extend_to_square(&a, &[]).is_err());
    }

    #[test]
    fn random_surjective_extension_is_full_rank() {
        let mut full = 0;
        for trial in 0..1000u64 {
            let mut rng = stream(41, domain::EXTENSION, trial);
            let a = DMatrix::from_fn(2, 3, |_, _| StandardNormal.sample(&mut rng));
            if numerical_rank(&a, 1e-10) < 2 {
                continue;
            }
            let rows = sample_sphere_vectors(3, 1, &mut rng);
            let ext = extend_to_square(&a, &rows).unwrap();
            assert_eq!(ext.rows(0, 2), a.rows(0, 2));
            if numerical_rank(&ext, 1e-10) == 3 {
                full += 1;
            }
        }
        assert!(full >= 999, "full rank in {full}/1000 trials");
    }

    #[test]
    fn sphere_vectors_are_unit() {
        let mut rng = stream(5, domain::EXTENSION, 0);
        for v in sample_sphere_vectors(7, 20, &mut rng) {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }
}
