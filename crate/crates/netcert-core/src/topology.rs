//! Network topologies and the block index bookkeeping they induce.
//!
//! A topology lists which nodes each hidden source feeds, as a hypergraph
//! on node indices. Hyperedges are stored sorted, both internally and as a
//! list, so that a given topology always enumerates its sources in the
//! same order.

use alloc::vec::Vec;
use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("a network needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("source arity {k} out of range for {num_nodes} nodes; need 2 <= k < num_nodes")]
    InvalidArity { k: usize, num_nodes: usize },
    #[error("sources of size {0} spanning all {0} nodes impose no constraint (trivial topology)")]
    TrivialTopology(usize),
    #[error("source {index} must list at least 2 distinct nodes")]
    DegenerateSource { index: usize },
    #[error("source {index} references node {node}, but the network has {num_nodes} nodes")]
    NodeOutOfRange { index: usize, node: usize, num_nodes: usize },
    #[error("sources {first} and {second} feed identical node sets")]
    DuplicateSource { first: usize, second: usize },
    #[error("node {0} is fed by no source")]
    UncoveredNode(usize),
    #[error("source index {index} out of range; topology has {num_sources} sources")]
    SourceOutOfRange { index: usize, num_sources: usize },
    #[error("partition has {blocks} blocks but the topology has {num_nodes} nodes")]
    PartitionMismatch { blocks: usize, num_nodes: usize },
    #[error("block {0} has zero dimension")]
    ZeroBlockDim(usize),
    #[error("partition must have at least one block")]
    EmptyPartition,
}

/// Hypergraph of sources over `num_nodes` nodes.
///
/// Each source is the set of nodes it feeds. Construction canonicalizes:
/// nodes within a source are sorted and the source list itself is sorted
/// lexicographically, so equal topologies compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    num_nodes: usize,
    sources: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology from an explicit source list. Every node must be
    /// fed by at least one source and each source must name at least two
    /// distinct nodes; duplicated sources are rejected rather than counted
    /// with multiplicity.
    pub fn new(num_nodes: usize, sources: Vec<Vec<usize>>) -> Result<Self, TopologyError> {
        if num_nodes < 2 {
            return Err(TopologyError::TooFewNodes(num_nodes));
        }
        let mut canonical: Vec<Vec<usize>> = Vec::with_capacity(sources.len());
        for (index, mut source) in sources.into_iter().enumerate() {
            source.sort_unstable();
            if let Some(&node) = source.iter().find(|&&n| n >= num_nodes) {
                return Err(TopologyError::NodeOutOfRange { index, node, num_nodes });
            }
            let distinct = source.windows(2).all(|w| w[0] != w[1]);
            if source.len() < 2 || !distinct {
                return Err(TopologyError::DegenerateSource { index });
            }
            canonical.push(source);
        }
        canonical.sort();
        if let Some(pos) = canonical.windows(2).position(|w| w[0] == w[1]) {
            return Err(TopologyError::DuplicateSource { first: pos, second: pos + 1 });
        }
        let mut covered = alloc::vec![false; num_nodes];
        for source in &canonical {
            for &n in source {
                covered[n] = true;
            }
        }
        if let Some(node) = covered.iter().position(|&c| !c) {
            return Err(TopologyError::UncoveredNode(node));
        }
        Ok(Self { num_nodes, sources: canonical })
    }

    /// The complete `k`-uniform topology: one source per `k`-subset of
    /// nodes, in lexicographic order. `k = num_nodes` is rejected as the
    /// trivial (unconstrained) topology.
    pub fn k_complete(num_nodes: usize, k: usize) -> Result<Self, TopologyError> {
        if num_nodes < 2 {
            return Err(TopologyError::TooFewNodes(num_nodes));
        }
        if k == num_nodes {
            return Err(TopologyError::TrivialTopology(k));
        }
        if k < 2 || k > num_nodes {
            return Err(TopologyError::InvalidArity { k, num_nodes });
        }
        let sources: Vec<Vec<usize>> = (0..num_nodes).combinations(k).collect();
        Ok(Self { num_nodes, sources })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    /// Sources in canonical (lexicographic) order.
    pub fn sources(&self) -> &[Vec<usize>] {
        &self.sources
    }

    pub fn source(&self, index: usize) -> Result<&[usize], TopologyError> {
        self.sources
            .get(index)
            .map(Vec::as_slice)
            .ok_or(TopologyError::SourceOutOfRange { index, num_sources: self.sources.len() })
    }

    /// Largest number of nodes any single source feeds.
    pub fn max_source_arity(&self) -> usize {
        self.sources.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// True when every source feeds exactly two nodes.
    pub fn is_pairwise(&self) -> bool {
        self.sources.iter().all(|s| s.len() == 2)
    }

    /// Global row/column indices a source touches under a block partition:
    /// the concatenated index ranges of the blocks of its nodes, ascending.
    pub fn support_indices(
        &self,
        source: usize,
        partition: &BlockPartition,
    ) -> Result<Vec<usize>, TopologyError> {
        if partition.num_blocks() != self.num_nodes {
            return Err(TopologyError::PartitionMismatch {
                blocks: partition.num_blocks(),
                num_nodes: self.num_nodes,
            });
        }
        let nodes = self.source(source)?;
        let mut indices = Vec::new();
        for &n in nodes {
            indices.extend(partition.block_range(n));
        }
        Ok(indices)
    }
}

/// Partition of `0..total_dim` into contiguous per-node blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    block_dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(block_dims: Vec<usize>) -> Result<Self, TopologyError> {
        if block_dims.is_empty() {
            return Err(TopologyError::EmptyPartition);
        }
        if let Some(i) = block_dims.iter().position(|&d| d == 0) {
            return Err(TopologyError::ZeroBlockDim(i));
        }
        let mut offsets = Vec::with_capacity(block_dims.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &d in &block_dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { block_dims, offsets })
    }

    /// `num_blocks` blocks of equal dimension `dim`.
    pub fn uniform(num_blocks: usize, dim: usize) -> Result<Self, TopologyError> {
        Self::new(alloc::vec![dim; num_blocks])
    }

    /// One-dimensional blocks, for matrices whose "blocks" are scalars.
    pub fn scalar(num_blocks: usize) -> Result<Self, TopologyError> {
        Self::uniform(num_blocks, 1)
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn block_dim(&self, block: usize) -> usize {
        self.block_dims[block]
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().expect("offsets never empty")
    }

    pub fn block_range(&self, block: usize) -> core::ops::Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Block containing a global index.
    pub fn block_of(&self, index: usize) -> usize {
        debug_assert!(index < self.total_dim());
        // offsets is sorted; partition_point returns the first offset > index
        self.offsets.partition_point(|&o| o <= index) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_sources() {
        let t = NetworkTopology::k_complete(3, 2).unwrap();
        assert_eq!(t.sources(), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert!(t.is_pairwise());
        assert_eq!(t.max_source_arity(), 2);
    }

    #[test]
    fn four_choose_three_sources() {
        let t = NetworkTopology::k_complete(4, 3).unwrap();
        assert_eq!(
            t.sources(),
            &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]
        );
    }

    #[test]
    fn five_choose_four_matches_brute_force() {
        let t = NetworkTopology::k_complete(5, 4).unwrap();
        // independent enumeration: all sorted 4-subsets of 0..5 by bitmask
        let mut expected: Vec<Vec<usize>> = Vec::new();
        for mask in 0u32..32 {
            if mask.count_ones() == 4 {
                expected.push((0..5).filter(|&i| mask & (1 << i) != 0).collect());
            }
        }
        expected.sort();
        assert_eq!(t.sources(), expected.as_slice());
        assert_eq!(t.num_sources(), 5);
    }

    #[test]
    fn arity_bounds() {
        assert_eq!(
            NetworkTopology::k_complete(3, 1),
            Err(TopologyError::InvalidArity { k: 1, num_nodes: 3 })
        );
        assert_eq!(NetworkTopology::k_complete(3, 3), Err(TopologyError::TrivialTopology(3)));
        assert_eq!(
            NetworkTopology::k_complete(3, 4),
            Err(TopologyError::InvalidArity { k: 4, num_nodes: 3 })
        );
    }

    #[test]
    fn explicit_list_is_canonicalized() {
        let t = NetworkTopology::new(3, vec![vec![2, 1], vec![1, 0], vec![2, 0]]).unwrap();
        assert_eq!(t, NetworkTopology::k_complete(3, 2).unwrap());
    }

    #[test]
    fn construction_rejects_bad_sources() {
        assert_eq!(
            NetworkTopology::new(3, vec![vec![0, 1], vec![2]]),
            Err(TopologyError::DegenerateSource { index: 1 })
        );
        assert_eq!(
            NetworkTopology::new(3, vec![vec![0, 1], vec![1, 1]]),
            Err(TopologyError::DegenerateSource { index: 1 })
        );
        assert_eq!(
            NetworkTopology::new(3, vec![vec![0, 1], vec![1, 3]]),
            Err(TopologyError::NodeOutOfRange { index: 1, node: 3, num_nodes: 3 })
        );
        assert_eq!(
            NetworkTopology::new(4, vec![vec![0, 1], vec![1, 0], vec![2, 3]]),
            Err(TopologyError::DuplicateSource { first: 0, second: 1 })
        );
        assert_eq!(
            NetworkTopology::new(3, vec![vec![0, 1]]),
            Err(TopologyError::UncoveredNode(2))
        );
    }

    #[test]
    fn k_complete_covers_every_pair() {
        for n in 2..7usize {
            for k in 2..n {
                let t = NetworkTopology::k_complete(n, k).unwrap();
                for a in 0..n {
                    for b in (a + 1)..n {
                        assert!(
                            t.sources().iter().any(|s| s.contains(&a) && s.contains(&b)),
                            "pair ({a},{b}) uncovered for n={n}, k={k}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn support_indices_concatenate_block_ranges() {
        let t = NetworkTopology::k_complete(3, 2).unwrap();
        let p = BlockPartition::uniform(3, 2).unwrap();
        assert_eq!(t.support_indices(0, &p).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(t.support_indices(1, &p).unwrap(), vec![0, 1, 4, 5]);
        assert_eq!(t.support_indices(2, &p).unwrap(), vec![2, 3, 4, 5]);

        let t4 = NetworkTopology::k_complete(4, 3).unwrap();
        let scalar = BlockPartition::scalar(4).unwrap();
        // source {0,2,3} sits at index 2 of the lexicographic list
        assert_eq!(t4.support_indices(2, &scalar).unwrap(), vec![0, 2, 3]);
    }

    #[test]
    fn support_union_covers_everything() {
        let t = NetworkTopology::k_complete(5, 3).unwrap();
        let p = BlockPartition::new(vec![1, 2, 3, 1, 2]).unwrap();
        let mut seen = vec![false; p.total_dim()];
        for m in 0..t.num_sources() {
            for i in t.support_indices(m, &p).unwrap() {
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn partition_bookkeeping() {
        let p = BlockPartition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(p.total_dim(), 6);
        assert_eq!(p.block_range(0), 0..2);
        assert_eq!(p.block_range(1), 2..3);
        assert_eq!(p.block_range(2), 3..6);
        assert_eq!(p.block_of(0), 0);
        assert_eq!(p.block_of(2), 1);
        assert_eq!(p.block_of(5), 2);
        assert_eq!(BlockPartition::new(vec![]), Err(TopologyError::EmptyPartition));
        assert_eq!(BlockPartition::new(vec![1, 0]), Err(TopologyError::ZeroBlockDim(1)));
    }
}
