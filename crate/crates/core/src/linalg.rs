//! Small dense helpers built on `nalgebra` storage.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivots at or below this value are treated as a failed factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.ncols(),
            });
        }
        let mut l = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if diag.is_nan() || diag <= PIVOT_FLOOR {
                return Err(Error::NotPositiveDefinite { index: j, pivot: diag });
            }
            let pivot = diag.sqrt();
            l[(j, j)] = pivot;
            for i in (j + 1)..d {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / pivot;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `ln |A|`, twice the sum of the log pivots.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|p| p.ln()).sum::<f64>()
    }

    /// Solve `L y = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let d = self.dim();
        let mut y = b.clone();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_inv(&self, b: &DVector<f64>) -> f64 {
        self.forward(b).norm_squared()
    }

    /// `trace(A⁻¹ B)` for symmetric `B`, as `‖L⁻¹ M‖_F²` where `B = M Mᵀ`.
    pub fn trace_inv_times(&self, b: &Cholesky) -> f64 {
        let mut total = 0.0;
        for c in 0..b.dim() {
            total += self.forward(&b.l.column(c).into_owned()).norm_squared();
        }
        total
    }
}

/// Largest absolute asymmetry `|a_ij - a_ji|`.
pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factor_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 3.0, 0.5, 0.4, 0.5, 2.0]);
        let chol = Cholesky::new(&a).unwrap();
        let l = chol.factor();
        let back = l * l.transpose();
        for (x, y) in back.iter().zip(a.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
        let det = a.determinant();
        assert_relative_eq!(chol.log_det(), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            Cholesky::new(&a),
            Err(Error::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn quad_and_trace_match_dense_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, -0.2, 0.5]);
        let ca = Cholesky::new(&a).unwrap();
        let cb = Cholesky::new(&b).unwrap();
        let inv = a.clone().try_inverse().unwrap();
        let v = DVector::from_vec(vec![0.7, -1.1]);
        assert_relative_eq!(ca.quad_inv(&v), (v.transpose() * &inv * &v)[(0, 0)], epsilon = 1e-12);
        assert_relative_eq!(ca.trace_inv_times(&cb), (&inv * &b).trace(), epsilon = 1e-12);
    }
}
