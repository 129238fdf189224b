//! Dense symmetric linear algebra on top of faer, single-threaded for reproducibility.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector of `values[j]`.
    pub vectors: Mat<f64>,
}

pub(crate) fn sym_eigen(s: &Mat<f64>) -> Result<SymEigen> {
    let dim = s.nrows();
    if dim == 0 {
        return Err(Error::Eigensolver("empty matrix".into()));
    }
    let evd = s
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let ascending = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..dim).rev().map(|j| ascending[j]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let vectors = Mat::from_fn(dim, dim, |i, j| u[(i, dim - 1 - j)]);
    Ok(SymEigen { values, vectors })
}

/// `B Bᵀ`, symmetrized so the result is exactly symmetric.
pub(crate) fn gram_bbt(b: &Mat<f64>) -> Mat<f64> {
    let rows = b.nrows();
    let mut s = Mat::<f64>::zeros(rows, rows);
    matmul(
        s.as_mut(),
        Accum::Replace,
        b.as_ref(),
        b.transpose(),
        1.0,
        Par::Seq,
    );
    for i in 0..rows {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_small_matrix() {
        // (1/18)[[11,5,2],[5,8,5],[2,5,11]] has eigenvalues 1, 1/2, 1/6.
        let rows = [[11.0, 5.0, 2.0], [5.0, 8.0, 5.0], [2.0, 5.0, 11.0]];
        let s = Mat::from_fn(3, 3, |i, j| rows[i][j] / 18.0);
        let e = sym_eigen(&s).unwrap();
        for (got, want) in e.values.iter().zip([1.0, 0.5, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let v0: Vec<f64> = (0..3).map(|i| e.vectors[(i, 0)]).collect();
        let c = 1.0 / 3f64.sqrt();
        assert!(v0.iter().all(|x| (x.abs() - c).abs() < 1e-12));
    }

    #[test]
    fn gram_is_symmetric() {
        let b = Mat::from_fn(4, 7, |i, j| ((i * 7 + j) as f64).sin());
        let s = gram_bbt(&b);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s[(i, j)], s[(j, i)]);
                let direct: f64 = (0..7).map(|k| b[(i, k)] * b[(j, k)]).sum();
                assert!((s[(i, j)] - direct).abs() < 1e-12);
            }
        }
    }
}
