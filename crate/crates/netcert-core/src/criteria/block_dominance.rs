//! Block-level membership certificates.
//!
//! These generalize the scalar comparison matrix to genuine blocks: the
//! diagonal is summarized by its smallest eigenvalue, couplings by their
//! spectral norm. When the resulting small matrix is PSD, an explicit
//! pairwise decomposition exists and [`bc2_decomposition`] constructs it.

use alloc::vec::Vec;

use super::{CriteriaError, Verdict, VerdictStatus};
use crate::covariance::BlockMatrix;
use crate::linalg::{self, Mat};

/// Residual budget for reconstructing the input from a decomposition.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// Diagonal blocks with a smaller eigenvalue are treated as singular.
const DIAGONAL_EIG_FLOOR: f64 = 1e-12;
/// Slack allowed when checking strict diagonal dominance.
const DOMINANCE_SLACK: f64 = 1e-12;

/// Condensed matrix with `lambda_min` of each diagonal block on the
/// diagonal and `-sigma_max` of each coupling block elsewhere. Reduces to
/// the scalar comparison matrix when every block is 1x1 with positive
/// diagonal.
pub fn block_comparison_matrix(x: &BlockMatrix) -> Result<Mat, CriteriaError> {
    let n = x.num_blocks();
    let mut condensed = Mat::zeros(n, n);
    for a in 0..n {
        let min_eig = linalg::min_eigenvalue(&x.block(a, a));
        if min_eig <= DIAGONAL_EIG_FLOOR {
            return Err(CriteriaError::SingularDiagonalBlock { block: a, min_eig });
        }
        condensed[(a, a)] = min_eig;
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let sigma = linalg::spectral_norm(&x.block(a, b));
            condensed[(a, b)] = -sigma;
            condensed[(b, a)] = -sigma;
        }
    }
    Ok(condensed)
}

/// Membership through the condensed matrix: PSD within `tol` certifies a
/// pairwise decomposition of the full block matrix.
pub fn membership_block_comparison(x: &BlockMatrix, tol: f64) -> Result<Verdict, CriteriaError> {
    let condensed = block_comparison_matrix(x)?;
    let min_eig = linalg::min_eigenvalue(&condensed);
    let status = if min_eig >= -tol { VerdictStatus::Member } else { VerdictStatus::Inconclusive };
    Ok(Verdict::new(
        "membership_block_comparison",
        2,
        status,
        alloc::vec![("min_eig", min_eig)],
    ))
}

/// True when every diagonal block dominates the summed spectral norms of
/// its row: `lambda_min(X_aa) >= sum_b sigma_max(X_ab) - slack`.
pub fn is_block_diagonally_dominant(x: &BlockMatrix, slack: f64) -> bool {
    dominance_deficit(x).iter().all(|&d| d <= slack)
}

fn dominance_deficit(x: &BlockMatrix) -> Vec<f64> {
    let n = x.num_blocks();
    (0..n)
        .map(|a| {
            let mut coupling = 0.0;
            for b in 0..n {
                if b != a {
                    coupling += linalg::spectral_norm(&x.block(a, b));
                }
            }
            coupling - linalg::min_eigenvalue(&x.block(a, a))
        })
        .collect()
}

/// One PSD term of a pairwise decomposition, supported on two blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerm {
    pub blocks: (usize, usize),
    /// Full-size matrix, exactly zero outside the two supporting blocks.
    pub matrix: Mat,
}

/// Constructive pairwise decomposition `X = D + sum of pair terms` with a
/// block-diagonal PSD remainder `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bc2Decomposition {
    pub diagonal: BlockMatrix,
    pub pair_terms: Vec<PairTerm>,
}

impl Bc2Decomposition {
    pub fn reconstruct(&self) -> Mat {
        let mut acc = self.diagonal.entries().clone();
        for term in &self.pair_terms {
            acc += &term.matrix;
        }
        acc
    }
}

/// Builds the explicit pairwise decomposition of a block diagonally
/// dominant matrix: each coupling block `A = X_ab` contributes the PSD
/// term with `sqrt(A A^T)` and `sqrt(A^T A)` on the diagonal and `A` off
/// it; the dominant diagonal absorbs the remainder.
pub fn bc2_decomposition(x: &BlockMatrix) -> Result<Bc2Decomposition, CriteriaError> {
    let deficits = dominance_deficit(x);
    if let Some((block, &deficit)) =
        deficits.iter().enumerate().find(|(_, &d)| d > DOMINANCE_SLACK)
    {
        return Err(CriteriaError::NotDominant { block, deficit });
    }
    let n = x.num_blocks();
    let dim = x.dim();
    let partition = x.partition();
    let mut pair_terms = Vec::new();
    let mut diag_remainder: Vec<Mat> = (0..n).map(|a| x.block(a, a)).collect();
    for a in 0..n {
        for b in (a + 1)..n {
            let coupling = x.block(a, b);
            if linalg::max_abs(&coupling) == 0.0 {
                continue;
            }
            let left = linalg::psd_sqrt(&(&coupling * coupling.transpose()));
            let right = linalg::psd_sqrt(&(coupling.transpose() * &coupling));
            let mut term = Mat::zeros(dim, dim);
            let ra = partition.block_range(a);
            let rb = partition.block_range(b);
            term.view_mut((ra.start, ra.start), (ra.len(), ra.len())).copy_from(&left);
            term.view_mut((rb.start, rb.start), (rb.len(), rb.len())).copy_from(&right);
            term.view_mut((ra.start, rb.start), (ra.len(), rb.len())).copy_from(&coupling);
            term.view_mut((rb.start, ra.start), (rb.len(), ra.len()))
                .copy_from(&coupling.transpose());
            diag_remainder[a] -= &left;
            diag_remainder[b] -= &right;
            pair_terms.push(PairTerm { blocks: (a, b), matrix: term });
        }
    }
    let mut diag_entries = Mat::zeros(dim, dim);
    for (a, block) in diag_remainder.iter().enumerate() {
        let ra = partition.block_range(a);
        diag_entries
            .view_mut((ra.start, ra.start), (ra.len(), ra.len()))
            .copy_from(&linalg::symmetrize(block));
    }
    let diagonal = BlockMatrix::new(partition.clone(), diag_entries)
        .expect("assembled from symmetric blocks");
    Ok(Bc2Decomposition { diagonal, pair_terms })
}
