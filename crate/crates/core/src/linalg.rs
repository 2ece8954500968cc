//! Dense complex linear-algebra helpers shared by the weight optimizer and
//! the inference engines.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Sum of moduli.
pub fn l1_norm<'a, I>(values: I) -> f64
where
    I: IntoIterator<Item = &'a Complex64>,
{
    values.into_iter().map(|z| z.norm()).sum()
}

pub fn l2_norm_sqr<'a, I>(values: I) -> f64
where
    I: IntoIterator<Item = &'a Complex64>,
{
    values.into_iter().map(|z| z.norm_sqr()).sum()
}

/// Moore-Penrose pseudoinverse through the SVD.
///
/// Singular values at or below `sigma_max * max(rows, cols) * eps` are
/// treated as zero.
pub fn pseudoinverse(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(CMatrix::zeros(cols, rows));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::numerical("pseudoinverse of a non-finite matrix"));
    }
    let svd = SVD::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("SVD failed to converge"))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = sigma_max * rows.max(cols) as f64 * f64::EPSILON;

    // A+ = V diag(1/s) U^H over the retained singular triplets.
    let rank = sigma.len();
    let mut pinv = CMatrix::zeros(cols, rows);
    for k in 0..rank {
        let s = sigma[k];
        if s <= cutoff {
            continue;
        }
        let inv = 1.0 / s;
        for j in 0..rows {
            let uc = u[(j, k)].conj() * inv;
            if uc == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..cols {
                pinv[(i, j)] += v_t[(k, i)].conj() * uc;
            }
        }
    }
    Ok(pinv)
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration, stopped at the given relative tolerance.
pub fn largest_eigenvalue_psd(a: &CMatrix, rtol: f64) -> Result<f64> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::dims("power iteration needs a non-empty square matrix"));
    }
    // Deterministic start with a little spread so it is not orthogonal to
    // the dominant eigenvector in symmetric cases.
    let mut v = CVector::from_iterator(
        n,
        (0..n).map(|j| Complex64::new(1.0 + 0.01 * j as f64, 0.001 * j as f64)),
    );
    v /= Complex64::new(v.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = a * &v;
        let next = w.norm();
        if next == 0.0 {
            return Ok(0.0);
        }
        let converged = (next - lambda).abs() <= rtol * next;
        lambda = next;
        v = w / Complex64::new(next, 0.0);
        if converged {
            return Ok(lambda);
        }
    }
    Err(Error::NonConvergence(
        "power iteration did not reach its tolerance".into(),
    ))
}

/// Scale every column to unit l2 norm. Fails on a zero column.
pub fn normalize_columns(m: &mut CMatrix) -> Result<()> {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::numerical(format!(
                "column {j} has norm {norm} and cannot be normalized"
            )));
        }
        col.unscale_mut(norm);
    }
    Ok(())
}

/// Squared Frobenius norm of `M^H M - I` computed through the smaller Gram
/// matrix `M M^H`, which has the same Frobenius norm as `M^H M`.
pub fn gram_deviation_sqr(m: &CMatrix) -> f64 {
    let small = m * m.adjoint();
    let gram_fro = l2_norm_sqr(small.iter());
    let trace: f64 = m.column_iter().map(|c| c.norm_squared()).sum();
    let value = gram_fro - 2.0 * trace + m.ncols() as f64;
    value.max(0.0)
}

/// Hex SHA-256 of a matrix's container encoding.
pub fn matrix_digest(m: &CMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update(crate::io::encode_matrix(m));
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let eye = CMatrix::identity(4, 4);
        let p = pseudoinverse(&eye).unwrap();
        assert!((p - eye).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_zero_matrix_is_zero() {
        let z = CMatrix::zeros(3, 5);
        let p = pseudoinverse(&z).unwrap();
        assert_eq!(p.shape(), (5, 3));
        assert_eq!(p.norm(), 0.0);
    }

    #[test]
    fn pinv_rejects_nan() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(pseudoinverse(&m).is_err());
    }

    #[test]
    fn power_iteration_on_rank_one_gram() {
        // Two identical unit columns: Gram = [[1,1],[1,1]], eigenvalues {2, 0}.
        let g = CMatrix::from_element(2, 2, c(1.0, 0.0));
        let lambda = largest_eigenvalue_psd(&g, 1e-12).unwrap();
        assert_relative_eq!(lambda, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn gram_deviation_matches_direct() {
        let m = CMatrix::from_fn(3, 5, |i, j| c((i * 7 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.3));
        let direct = (m.adjoint() * &m - CMatrix::identity(5, 5)).norm_squared();
        assert_relative_eq!(gram_deviation_sqr(&m), direct, max_relative = 1e-12);
    }
}
