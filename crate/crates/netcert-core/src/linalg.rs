//! Dense symmetric linear algebra shared by every test in the crate.
//!
//! All matrices here are desk scale (total dimension well under a hundred),
//! so everything goes through dense symmetric eigendecompositions. Inputs
//! are symmetrized as `(X + X^T)/2` before any eigenanalysis so that
//! rounding asymmetry cannot leak into verdicts. Singular values and
//! matrix absolute values are computed from the eigendecomposition of the
//! Gram matrix, clamping negative rounding noise at [`GRAM_EIG_CLAMP`].

use alloc::vec::Vec;
use nalgebra::{Complex, ComplexField, DMatrix, DVector};

/// Dense real matrix: covariance matrices, witnesses, factors.
pub type Mat = DMatrix<f64>;
/// Dense complex matrix: states and measurement effects.
pub type CMat = DMatrix<Complex<f64>>;

/// Eigenvalues of a Gram matrix below this magnitude are rounding noise
/// and are clamped to zero before taking square roots.
pub const GRAM_EIG_CLAMP: f64 = 1e-14;

/// Largest absolute entry, zero for empty matrices.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Scale-aware default tolerance for semidefiniteness verdicts:
/// `1e-9 * max(1, |X|_max)`.
pub fn psd_tolerance(m: &Mat) -> f64 {
    1e-9 * max_abs(m).max(1.0)
}

/// `(X + X^T)/2`.
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()).scale(0.5)
}

/// Eigenvalues of the symmetrized input, ascending.
pub fn sym_eigenvalues(m: &Mat) -> Vec<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals
}

/// Smallest eigenvalue of the symmetrized input.
pub fn min_eigenvalue(m: &Mat) -> f64 {
    let eig = symmetrize(m).symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Eigendecomposition of the symmetrized input with eigenvalues ascending;
/// the returned matrix holds the matching eigenvectors as columns.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let eig = symmetrize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Euclidean projection onto the positive semidefinite cone: clamp
/// negative eigenvalues of the symmetrized input to zero.
pub fn psd_project(m: &Mat) -> Mat {
    rebuild_with(m, |x| x.max(0.0))
}

/// Square root of a positive semidefinite matrix. Eigenvalues above
/// `-GRAM_EIG_CLAMP` are treated as exact zeros; the caller is expected to
/// pass a matrix that is PSD up to rounding.
pub fn psd_sqrt(m: &Mat) -> Mat {
    rebuild_with(m, |x| if x > GRAM_EIG_CLAMP { ComplexField::sqrt(x) } else { 0.0 })
}

fn rebuild_with(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let vals = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&x| f(x)));
    &eig.eigenvectors * Mat::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Singular values, descending, via the eigendecomposition of `X^T X`.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let gram = m.transpose() * m;
    let mut vals: Vec<f64> = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&x| if x > GRAM_EIG_CLAMP { ComplexField::sqrt(x) } else { 0.0 })
        .collect();
    vals.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    vals
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Sum of singular values.
pub fn trace_norm(m: &Mat) -> f64 {
    singular_values(m).iter().sum()
}

/// Largest modulus of an entry of a complex matrix.
pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(ComplexField::modulus(*z)))
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    max_abs_c(&(m - m.adjoint()))
}

/// Smallest eigenvalue of `(M + M^dag)/2`.
pub fn hermitian_min_eigenvalue(m: &CMat) -> f64 {
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}
