//! Dense eigensolvers used by the propagator and the spectral analysis.
//!
//! Hermitian and real-symmetric problems go through nalgebra's symmetric
//! QR iteration. General complex matrices are reduced to Schur form and the
//! eigenvectors recovered by back-substitution on the triangular factor.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 0; // nalgebra: 0 = iterate until convergence

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a real
/// symmetric matrix.
pub fn symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m, EPS, MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("symmetric eigensolver did not converge (dim {dim})")))?;
    Ok(sorted_pairs(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m, EPS, MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("Hermitian eigensolver did not converge (dim {dim})")))?;
    Ok(sorted_pairs(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

fn sorted_pairs<T: nalgebra::Scalar + Copy>(values: Vec<f64>, vectors: DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, order[c])]);
    (sorted_values, sorted_vectors)
}

/// Largest `|m_ij - conj(m_ji)|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenpairs of a general square complex matrix. Eigenvectors are
/// unit-norm columns but not orthogonal in general.
pub fn general_eigen(m: DMatrix<C64>) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let dim = m.nrows();
    if dim == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let schur = Schur::try_new(m, EPS, MAX_ITER)
        .ok_or_else(|| Error::Numerical(format!("complex Schur iteration did not converge (dim {dim})")))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..dim).map(|i| t[(i, i)]).collect();

    // Solve (T - λ_k) y = 0 with y_k = 1 and y_j = 0 for j > k.
    let guard = scale * f64::EPSILON;
    let mut vectors = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let lambda = values[k];
        let mut y = DVector::<C64>::zeros(dim);
        y[k] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < guard {
                denom = C64::new(guard, 0.0);
            }
            y[i] = -acc / denom;
        }
        let v = &q * y;
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical(format!("eigenvector {k} could not be recovered")));
        }
        vectors.set_column(k, &v.unscale(norm));
    }
    Ok((values, vectors))
}

/// Modified Gram-Schmidt (two passes) over `vectors`, in place.
///
/// Returns an error when the set is numerically rank-deficient.
pub fn orthonormalize(vectors: &mut [DVector<C64>]) -> Result<()> {
    for i in 0..vectors.len() {
        for _pass in 0..2 {
            for j in 0..i {
                let (head, tail) = vectors.split_at_mut(i);
                let proj = head[j].dotc(&tail[0]);
                tail[0] -= &head[j] * proj;
            }
        }
        let norm = vectors[i].norm();
        if norm < 1e-10 {
            return Err(Error::Numerical("eigenvectors in a degenerate cluster are linearly dependent".into()));
        }
        vectors[i].unscale_mut(norm);
    }
    Ok(())
}
