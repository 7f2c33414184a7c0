//! Seeded instance generators for verification suites and sweeps.
//!
//! Everything here is deterministic in the seed, so fuzz-style tests can
//! be replayed from a single integer.

use alloc::vec::Vec;
use nalgebra::ComplexField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariance::BlockMatrix;
use crate::distribution::OutcomeDistribution;
use crate::linalg::{spectral_norm, Mat};
use crate::topology::BlockPartition;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniformly random probability table (Dirichlet with unit weights).
pub fn random_distribution(rng: &mut impl Rng, cardinalities: &[usize]) -> OutcomeDistribution {
    let len: usize = cardinalities.iter().product();
    let mut draws: Vec<f64> = (0..len)
        .map(|_| -ComplexField::ln(1.0 - rng.random::<f64>()))
        .collect();
    let sum: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= sum;
    }
    OutcomeDistribution::new(cardinalities.to_vec(), draws)
        .expect("normalized nonnegative table")
}

/// Random sorted subset of `0..n` of the given size.
fn random_subset(rng: &mut impl Rng, n: usize, size: usize) -> Vec<usize> {
    debug_assert!(size <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    let mut subset = pool[..size].to_vec();
    subset.sort_unstable();
    subset
}

/// PSD matrix built as a sum of rank-one terms, each supported on at most
/// `k` blocks. Such a matrix is compatible with any topology whose sources
/// cover all occurring `k`-subsets, by construction.
pub fn k_decomposable_matrix(
    rng: &mut impl Rng,
    partition: &BlockPartition,
    k: usize,
    num_terms: usize,
) -> BlockMatrix {
    let n = partition.num_blocks();
    let total = partition.total_dim();
    let k = k.min(n);
    let mut acc = Mat::zeros(total, total);
    for _ in 0..num_terms {
        let blocks = random_subset(rng, n, k);
        let mut v = nalgebra::DVector::<f64>::zeros(total);
        for &b in &blocks {
            for i in partition.block_range(b) {
                v[i] = rng.random_range(-1.0..1.0);
            }
        }
        let weight = rng.random_range(0.2..1.0);
        acc += (&v * v.transpose()).scale(weight);
    }
    BlockMatrix::new(partition.clone(), acc).expect("symmetric by construction")
}

/// Block matrix whose diagonal blocks strictly dominate the spectral norms
/// of their off-diagonal rows: for every block `a`,
/// `lambda_min(X_aa) >= sum_b sigma_max(X_ab) + margin * max(1, sum)`.
pub fn block_dominant_matrix(
    rng: &mut impl Rng,
    partition: &BlockPartition,
    margin: f64,
) -> BlockMatrix {
    let n = partition.num_blocks();
    let total = partition.total_dim();
    let mut entries = Mat::zeros(total, total);
    for a in 0..n {
        for b in (a + 1)..n {
            let ra = partition.block_range(a);
            let rb = partition.block_range(b);
            for i in ra.clone() {
                for j in rb.clone() {
                    let v = rng.random_range(-0.5..0.5);
                    entries[(i, j)] = v;
                    entries[(j, i)] = v;
                }
            }
        }
    }
    for a in 0..n {
        let ra = partition.block_range(a);
        let da = ra.len();
        let mut offdiag_weight = 0.0;
        for b in 0..n {
            if b != a {
                let rb = partition.block_range(b);
                let block = entries
                    .view((ra.start, rb.start), (da, rb.len()))
                    .into_owned();
                offdiag_weight += spectral_norm(&block);
            }
        }
        let shift = offdiag_weight + margin * offdiag_weight.max(1.0);
        let bump = Mat::from_fn(da, da, |_, _| rng.random_range(-0.5..0.5));
        let gram = &bump * bump.transpose();
        for (local_i, i) in ra.clone().enumerate() {
            for (local_j, j) in ra.clone().enumerate() {
                entries[(i, j)] = gram[(local_i, local_j)] + if i == j { shift } else { 0.0 };
            }
        }
    }
    BlockMatrix::new(partition.clone(), entries).expect("symmetric by construction")
}
