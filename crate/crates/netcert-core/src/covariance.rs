//! Block covariance matrices of joint outcome distributions.
//!
//! Each node contributes one block of feature coordinates; the covariance
//! of the stacked feature vector is the object every compatibility test
//! consumes. Two feature maps are supported: the full indicator vector of
//! each outcome (canonical) and the same vector with the last outcome
//! dropped (reduced). The canonical map keeps the per-node blocks singular
//! (indicator entries sum to one), the reduced map removes exactly that
//! degeneracy; both are exposed so their behaviour downstream can be
//! compared on equal footing.

use alloc::vec::Vec;
use thiserror::Error;

use crate::distribution::OutcomeDistribution;
use crate::linalg::{self, Mat};
use crate::topology::BlockPartition;

/// Residual accepted when checking the dichotomic tensor factorization.
pub const FACTOR_RESIDUAL_TOL: f64 = 1e-10;
/// Relative asymmetry accepted before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CovarianceError {
    #[error("entries are {rows}x{cols} but the partition spans dimension {expected}")]
    ShapeMismatch { rows: usize, cols: usize, expected: usize },
    #[error("matrix deviates from symmetry by {deviation}")]
    NotSymmetric { deviation: f64 },
    #[error("block {block} has dimension {dim}; the dichotomic factorization needs 2")]
    NotDichotomic { block: usize, dim: usize },
    #[error("blocks ({row_block},{col_block}) deviate from the rank-one dichotomic pattern by {deviation}")]
    FactorizationViolated { row_block: usize, col_block: usize, deviation: f64 },
}

/// Per-node feature coordinates used to build the covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// Full outcome indicator vector; block dimension equals cardinality.
    Canonical,
    /// Indicator vector with the last outcome dropped; block dimension is
    /// cardinality minus one, which removes the forced block singularity.
    Reduced,
}

impl FeatureMap {
    pub fn block_dims(&self, cardinalities: &[usize]) -> Vec<usize> {
        match self {
            FeatureMap::Canonical => cardinalities.to_vec(),
            FeatureMap::Reduced => cardinalities.iter().map(|&c| c - 1).collect(),
        }
    }
}

/// Symmetric matrix with a per-node block structure attached.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    partition: BlockPartition,
    entries: Mat,
}

impl BlockMatrix {
    /// Wraps entries under a partition. The input must match the partition
    /// dimension and be symmetric up to rounding; it is symmetrized on the
    /// way in so downstream eigenanalysis sees an exactly symmetric matrix.
    pub fn new(partition: BlockPartition, entries: Mat) -> Result<Self, CovarianceError> {
        let expected = partition.total_dim();
        if entries.nrows() != expected || entries.ncols() != expected {
            return Err(CovarianceError::ShapeMismatch {
                rows: entries.nrows(),
                cols: entries.ncols(),
                expected,
            });
        }
        let deviation = linalg::max_abs(&(&entries - entries.transpose()));
        if deviation > SYMMETRY_TOL * linalg::max_abs(&entries).max(1.0) {
            return Err(CovarianceError::NotSymmetric { deviation });
        }
        Ok(Self { partition, entries: linalg::symmetrize(&entries) })
    }

    /// Treats a plain symmetric matrix as having one scalar block per row.
    pub fn from_scalar_matrix(entries: Mat) -> Result<Self, CovarianceError> {
        let partition = BlockPartition::scalar(entries.nrows().max(1))
            .expect("scalar partition of positive size");
        Self::new(partition, entries)
    }

    pub(crate) fn from_parts_unchecked(partition: BlockPartition, entries: Mat) -> Self {
        debug_assert_eq!(partition.total_dim(), entries.nrows());
        Self { partition, entries }
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    pub fn dim(&self) -> usize {
        self.partition.total_dim()
    }

    /// Copy of block `(a, b)`.
    pub fn block(&self, a: usize, b: usize) -> Mat {
        let ra = self.partition.block_range(a);
        let rb = self.partition.block_range(b);
        self.entries
            .view((ra.start, rb.start), (ra.len(), rb.len()))
            .into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries)
    }

    pub fn is_psd_within(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
}

/// Covariance matrix of the stacked per-node feature vectors.
pub fn covariance_matrix(dist: &OutcomeDistribution, map: FeatureMap) -> BlockMatrix {
    let cards = dist.cardinalities();
    let n = cards.len();
    let partition =
        BlockPartition::new(map.block_dims(cards)).expect("cardinalities are at least 2");
    let mut entries = Mat::zeros(partition.total_dim(), partition.total_dim());
    let marginals: Vec<Vec<f64>> = (0..n).map(|node| dist.marginal(node)).collect();
    for a in 0..n {
        let da = partition.block_dim(a);
        let oa = partition.offset(a);
        for i in 0..da {
            for j in 0..da {
                let joint = if i == j { marginals[a][i] } else { 0.0 };
                entries[(oa + i, oa + j)] = joint - marginals[a][i] * marginals[a][j];
            }
        }
        for b in (a + 1)..n {
            let db = partition.block_dim(b);
            let ob = partition.offset(b);
            let joint = dist.pair_joint(a, b);
            for i in 0..da {
                for j in 0..db {
                    let v = joint[(i, j)] - marginals[a][i] * marginals[b][j];
                    entries[(oa + i, ob + j)] = v;
                    entries[(ob + j, oa + i)] = v;
                }
            }
        }
    }
    BlockMatrix::from_parts_unchecked(partition, entries)
}

/// Covariance under the reduced feature map. Diagonal blocks can still be
/// singular (a deterministic node has zero variance); tests that need to
/// invert them should check [`singular_diagonal_blocks`] first.
pub fn reduced_covariance(dist: &OutcomeDistribution) -> BlockMatrix {
    covariance_matrix(dist, FeatureMap::Reduced)
}

/// Diagonal blocks whose smallest eigenvalue is at or below `floor`.
pub fn singular_diagonal_blocks(cov: &BlockMatrix, floor: f64) -> Vec<usize> {
    (0..cov.num_blocks())
        .filter(|&a| linalg::min_eigenvalue(&cov.block(a, a)) <= floor)
        .collect()
}

/// Extracts the scalar factor `C` of a dichotomic covariance matrix, which
/// always has the tensor form `C (x) [[1,-1],[-1,1]]` when every node is
/// binary under the canonical map. Each block is checked against that
/// pattern within [`FACTOR_RESIDUAL_TOL`].
pub fn dichotomic_factor(cov: &BlockMatrix) -> Result<Mat, CovarianceError> {
    let partition = cov.partition();
    for a in 0..partition.num_blocks() {
        if partition.block_dim(a) != 2 {
            return Err(CovarianceError::NotDichotomic { block: a, dim: partition.block_dim(a) });
        }
    }
    let n = partition.num_blocks();
    let mut factor = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            factor[(a, b)] = cov.entries()[(partition.offset(a), partition.offset(b))];
        }
    }
    let scale = linalg::max_abs(cov.entries()).max(1.0);
    for a in 0..n {
        for b in 0..n {
            let block = cov.block(a, b);
            let c = factor[(a, b)];
            let pattern = Mat::from_row_slice(2, 2, &[c, -c, -c, c]);
            let deviation = linalg::max_abs(&(block - pattern));
            if deviation > FACTOR_RESIDUAL_TOL * scale {
                return Err(CovarianceError::FactorizationViolated {
                    row_block: a,
                    col_block: b,
                    deviation,
                });
            }
        }
    }
    Ok(factor)
}
