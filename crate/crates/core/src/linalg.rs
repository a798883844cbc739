//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Smallest squared Cholesky pivot accepted for a correlation matrix.
pub const PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor of a symmetric matrix, rejecting near-singular input.
///
/// Fails when the factorization breaks down or any squared pivot `L_ii²`
/// drops below `PIVOT_TOL`.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    for i in 0..m.nrows() {
        let p = l[(i, i)];
        if !(p * p > PIVOT_TOL) {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Symmetric inverse from a Cholesky factor.
pub fn inverse(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    let inv = chol.inverse();
    (&inv + inv.transpose()) * 0.5
}

/// Quadratic form `xᵀ A x`.
pub fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let q = x.len();
    let mut s = 0.0;
    for i in 0..q {
        let mut row = 0.0;
        for j in 0..q {
            row += a[(i, j)] * x[j];
        }
        s += x[i] * row;
    }
    s
}

/// `y = L z` for a lower-triangular `L`.
pub fn lower_mul(l: &DMatrix<f64>, z: &[f64], out: &mut [f64]) {
    let q = z.len();
    for i in 0..q {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[(i, j)] * z[j];
        }
        out[i] = s;
    }
}

/// Lower Cholesky factor as a plain matrix (upper triangle zeroed).
pub fn lower_factor(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    chol.l()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

pub fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_identities() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.2, 0.3, 1.0, -0.1, 0.2, -0.1, 1.0]);
        let c = cholesky(&m).unwrap();
        let det = m.determinant();
        assert!((log_det(&c) - det.ln()).abs() < 1e-13);
        let inv = inverse(&c);
        assert!(((&inv * &m) - DMatrix::identity(3, 3)).norm() < 1e-13);
        assert!((quad_form(&m, &[1.0, 2.0, 3.0]) - (1.0 + 4.0 + 9.0 + 2.0 * (0.6 + 0.6 - 0.6))).abs() < 1e-13);
    }

    #[test]
    fn near_singular_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0 - 1e-14, 1.0 - 1e-14, 1.0]);
        assert_eq!(cholesky(&m).err(), Some(Error::NotPositiveDefinite));
    }
}
