//! Sign-flip test for block matrices with non-scalar blocks.
//!
//! Any matrix that splits into PSD parts supported on block pairs stays
//! PSD when the off-diagonal blocks of any pair subset are negated: each
//! pair term absorbs its own flip as a congruence. A sign pattern whose
//! flipped matrix has a negative eigenvalue therefore refutes every
//! pairwise topology. Patterns related by per-block sign changes are
//! congruent, so only the quotient is enumerated: signs against block 0
//! are fixed to +1 and the remaining `(n-1)(n-2)/2` pair signs run free.

use alloc::vec::Vec;
use nalgebra::DVector;

use super::{CriteriaError, Verdict, VerdictStatus};
use crate::covariance::BlockMatrix;
use crate::linalg::{self, Mat};

/// Hard cap on the block count; the pattern count grows as
/// `2^((n-1)(n-2)/2)` and is already millions at 8 blocks.
pub const MAX_SIGN_FLIP_BLOCKS: usize = 12;

/// Negates every off-diagonal block `(a,b)` with `flip[a] != flip[b]`.
/// This is a congruence, so spectra are unchanged; useful for checking
/// gauge invariance of consumers.
pub fn conjugate_block_signs(cov: &BlockMatrix, flip: &[bool]) -> BlockMatrix {
    assert_eq!(flip.len(), cov.num_blocks(), "one flag per block");
    let partition = cov.partition();
    let mut signs = DVector::<f64>::zeros(cov.dim());
    for a in 0..cov.num_blocks() {
        let s = if flip[a] { -1.0 } else { 1.0 };
        for i in partition.block_range(a) {
            signs[i] = s;
        }
    }
    let entries = Mat::from_fn(cov.dim(), cov.dim(), |i, j| signs[i] * signs[j] * cov.entries()[(i, j)]);
    BlockMatrix::new(partition.clone(), entries).expect("congruence keeps symmetry")
}

/// Smallest eigenvalue over the sign-pattern quotient, together with the
/// eigenvector and the block sign matrix that achieve it.
pub(crate) fn minimal_signed_eigenpair(
    cov: &BlockMatrix,
) -> Result<(f64, DVector<f64>, Mat), CriteriaError> {
    let n = cov.num_blocks();
    if n > MAX_SIGN_FLIP_BLOCKS {
        return Err(CriteriaError::TooManyBlocks { blocks: n, max: MAX_SIGN_FLIP_BLOCKS });
    }
    // free pairs exclude block 0 (star gauge)
    let free_pairs: Vec<(usize, usize)> = (1..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let patterns: u64 = 1 << free_pairs.len();
    let mut best = (f64::INFINITY, 0u64);
    for mask in 0..patterns {
        let signed = apply_pattern(cov, &free_pairs, mask);
        let min_eig = linalg::min_eigenvalue(&signed);
        if min_eig < best.0 {
            best = (min_eig, mask);
        }
    }
    let signed = apply_pattern(cov, &free_pairs, best.1);
    let (vals, vecs) = linalg::sym_eigen(&signed);
    debug_assert!((vals[0] - best.0).abs() < 1e-12);
    let mut signs = Mat::from_element(n, n, 1.0);
    for (bit, &(a, b)) in free_pairs.iter().enumerate() {
        if best.1 & (1 << bit) != 0 {
            signs[(a, b)] = -1.0;
            signs[(b, a)] = -1.0;
        }
    }
    Ok((best.0, vecs.column(0).into_owned(), signs))
}

fn apply_pattern(cov: &BlockMatrix, free_pairs: &[(usize, usize)], mask: u64) -> Mat {
    let mut entries = cov.entries().clone();
    let partition = cov.partition();
    for (bit, &(a, b)) in free_pairs.iter().enumerate() {
        if mask & (1 << bit) == 0 {
            continue;
        }
        for i in partition.block_range(a) {
            for j in partition.block_range(b) {
                entries[(i, j)] = -entries[(i, j)];
                entries[(j, i)] = -entries[(j, i)];
            }
        }
    }
    entries
}

/// Enumerates the sign-pattern quotient and reports the most negative
/// eigenvalue found. `INCOMPATIBLE` refutes every pairwise topology.
pub fn sign_flip_test(cov: &BlockMatrix, tol: f64) -> Result<Verdict, CriteriaError> {
    let n = cov.num_blocks();
    let (min_eig, _, _) = minimal_signed_eigenpair(cov)?;
    let free = (n - 1) * (n.saturating_sub(2)) / 2;
    let status = if min_eig < -tol {
        VerdictStatus::Incompatible
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict::new(
        "signflip",
        2,
        status,
        alloc::vec![("min_signed_eig", min_eig), ("patterns", (1u64 << free) as f64)],
    ))
}
