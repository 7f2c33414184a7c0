//! Joint outcome distributions and an exact small-network simulator.
//!
//! Distributions are stored flat in lexicographic outcome order with the
//! last node's outcome varying fastest. The two built-in families share
//! that convention: the first entry is the all-zeros outcome, the entry at
//! the opposite corner is the all-max outcome.

use alloc::vec::Vec;
use nalgebra::Complex;
use thiserror::Error;

use crate::linalg::{hermitian_deviation, hermitian_min_eigenvalue, max_abs_c, CMat, Mat};
use crate::topology::NetworkTopology;

/// Normalization slack accepted on construction.
pub const PROB_SUM_TOL: f64 = 1e-12;
/// Entries above `-PROB_NEG_TOL` are clamped to zero; anything lower is an error.
pub const PROB_NEG_TOL: f64 = 1e-12;
/// Hermiticity, positivity and completeness slack for states and effects.
pub const QUANTUM_INPUT_TOL: f64 = 1e-10;
/// Default bound on the total Hilbert space dimension of a simulation.
pub const DEFAULT_DIM_CAP: usize = 4096;

const MAX_OUTCOME_ENTRIES: usize = 1 << 24;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("need at least one node")]
    NoNodes,
    #[error("node {0} has cardinality {1}; need at least 2 outcomes per node")]
    BadCardinality(usize, usize),
    #[error("outcome table would hold {0} entries, over the {MAX_OUTCOME_ENTRIES} limit")]
    TooLarge(u128),
    #[error("expected {expected} probabilities, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("probability at flat index {index} is {value}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("family parameters p={p}, q={q}, r={r} must be nonnegative with sum at most 1")]
    BadFamilyParameters { p: f64, q: f64, r: f64 },
    #[error("family needs between 2 and 20 nodes, got {0}")]
    BadFamilySize(usize),
}

/// Joint distribution of one outcome per node, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    cardinalities: Vec<usize>,
    strides: Vec<usize>,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates cardinalities, nonnegativity (entries within
    /// `-PROB_NEG_TOL` of zero are clamped) and normalization.
    pub fn new(cardinalities: Vec<usize>, probabilities: Vec<f64>) -> Result<Self, DistributionError> {
        if cardinalities.is_empty() {
            return Err(DistributionError::NoNodes);
        }
        if let Some((node, &card)) = cardinalities.iter().enumerate().find(|(_, &c)| c < 2) {
            return Err(DistributionError::BadCardinality(node, card));
        }
        let total: u128 = cardinalities.iter().map(|&c| c as u128).product();
        if total > MAX_OUTCOME_ENTRIES as u128 {
            return Err(DistributionError::TooLarge(total));
        }
        let total = total as usize;
        if probabilities.len() != total {
            return Err(DistributionError::LengthMismatch { expected: total, got: probabilities.len() });
        }
        let mut probabilities = probabilities;
        let mut sum = 0.0;
        for (index, p) in probabilities.iter_mut().enumerate() {
            if *p < -PROB_NEG_TOL {
                return Err(DistributionError::NegativeProbability { index, value: *p });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(DistributionError::NotNormalized(sum));
        }
        let strides = strides_for(&cardinalities);
        Ok(Self { cardinalities, strides, probabilities })
    }

    /// Dichotomic family: probability `p` on the all-zeros outcome, `q` on
    /// the all-ones outcome, and the remaining mass spread uniformly over
    /// the other `2^n - 2` outcomes.
    pub fn ghz_dichotomic(num_nodes: usize, p: f64, q: f64) -> Result<Self, DistributionError> {
        if !(2..=20).contains(&num_nodes) {
            return Err(DistributionError::BadFamilySize(num_nodes));
        }
        check_family_params(p, q, 0.0)?;
        let total = 1usize << num_nodes;
        let noise = ((1.0 - p - q) / (total - 2) as f64).max(0.0);
        let mut probabilities = alloc::vec![noise; total];
        probabilities[0] = p;
        probabilities[total - 1] = q;
        Self::new(alloc::vec![2; num_nodes], probabilities)
    }

    /// Three-node, three-outcome family: probability `p` on (0,0,0), `q`
    /// on (1,1,1), `r` on (2,2,2), remainder uniform over the other 24
    /// outcomes.
    pub fn ghz_three_outcome(p: f64, q: f64, r: f64) -> Result<Self, DistributionError> {
        check_family_params(p, q, r)?;
        let noise = ((1.0 - p - q - r) / 24.0).max(0.0);
        let mut probabilities = alloc::vec![noise; 27];
        probabilities[0] = p;
        probabilities[13] = q;
        probabilities[26] = r;
        Self::new(alloc::vec![3; 3], probabilities)
    }

    pub fn num_nodes(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// Flat probability table, lexicographic with the last node fastest.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Flat index of an outcome tuple. Panics if the tuple length or any
    /// entry is out of range.
    pub fn index_of(&self, outcome: &[usize]) -> usize {
        assert_eq!(outcome.len(), self.num_nodes(), "outcome arity mismatch");
        outcome
            .iter()
            .zip(&self.cardinalities)
            .zip(&self.strides)
            .map(|((&x, &card), &stride)| {
                assert!(x < card, "outcome value out of range");
                x * stride
            })
            .sum()
    }

    pub fn prob(&self, outcome: &[usize]) -> f64 {
        self.probabilities[self.index_of(outcome)]
    }

    /// Single-node marginal distribution.
    pub fn marginal(&self, node: usize) -> Vec<f64> {
        let card = self.cardinalities[node];
        let stride = self.strides[node];
        let mut out = alloc::vec![0.0; card];
        for (index, &p) in self.probabilities.iter().enumerate() {
            out[(index / stride) % card] += p;
        }
        out
    }

    /// Two-node joint marginal as a `card_a x card_b` matrix.
    pub(crate) fn pair_joint(&self, a: usize, b: usize) -> Mat {
        let (ca, cb) = (self.cardinalities[a], self.cardinalities[b]);
        let (sa, sb) = (self.strides[a], self.strides[b]);
        let mut out = Mat::zeros(ca, cb);
        for (index, &p) in self.probabilities.iter().enumerate() {
            out[((index / sa) % ca, (index / sb) % cb)] += p;
        }
        out
    }
}

fn strides_for(cardinalities: &[usize]) -> Vec<usize> {
    let n = cardinalities.len();
    let mut strides = alloc::vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * cardinalities[i + 1];
    }
    strides
}

fn check_family_params(p: f64, q: f64, r: f64) -> Result<(), DistributionError> {
    let ok = p >= 0.0 && q >= 0.0 && r >= 0.0 && p + q + r <= 1.0 + PROB_SUM_TOL;
    if ok {
        Ok(())
    } else {
        Err(DistributionError::BadFamilyParameters { p, q, r })
    }
}

/// State emitted by one source, one tensor factor per fed node, factors
/// ordered like the node list. Validated inside [`simulate_network`].
#[derive(Debug, Clone)]
pub struct SourceSpec {
    /// Nodes this source feeds, ascending; must match the topology entry.
    pub nodes: Vec<usize>,
    /// Local dimension sent to each node, aligned with `nodes`.
    pub dims: Vec<usize>,
    /// Density matrix on the tensor product of `dims`.
    pub state: CMat,
}

/// Measurement of one node over everything it receives. Factors of the
/// node's space are ordered by source index.
#[derive(Debug, Clone)]
pub struct MeasurementSpec {
    pub node: usize,
    /// One PSD effect per outcome, summing to the identity.
    pub effects: Vec<CMat>,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("topology has {expected} sources but {got} source specs were given")]
    SourceCountMismatch { expected: usize, got: usize },
    #[error("source {index} feeds different nodes than the topology entry")]
    SourceNodesMismatch { index: usize },
    #[error("source {index}: {nodes} nodes but {dims} local dimensions")]
    SourceShapeMismatch { index: usize, nodes: usize, dims: usize },
    #[error("source {index}: state is {got}x{got}, expected dimension {expected}")]
    StateDimMismatch { index: usize, expected: usize, got: usize },
    #[error("source {index}: state deviates from Hermitian by {deviation}")]
    StateNotHermitian { index: usize, deviation: f64 },
    #[error("source {index}: state has eigenvalue {min_eig}")]
    StateNotPsd { index: usize, min_eig: f64 },
    #[error("source {index}: state trace is {trace}")]
    StateTraceOff { index: usize, trace: f64 },
    #[error("need one measurement per node; node {0} is missing or duplicated")]
    MeasurementCoverage(usize),
    #[error("node {node} has {got} effects; need at least 2")]
    TooFewEffects { node: usize, got: usize },
    #[error("node {node}: effect {outcome} is {got}x{got}, node space has dimension {expected}")]
    EffectDimMismatch { node: usize, outcome: usize, expected: usize, got: usize },
    #[error("node {node}: effect {outcome} deviates from Hermitian by {deviation}")]
    EffectNotHermitian { node: usize, outcome: usize, deviation: f64 },
    #[error("node {node}: effect {outcome} has eigenvalue {min_eig}")]
    EffectNotPsd { node: usize, outcome: usize, min_eig: f64 },
    #[error("node {node}: effects sum deviates from identity by {deviation}")]
    IncompleteEffects { node: usize, deviation: f64 },
    #[error("total dimension {dim} exceeds the cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },
    #[error("outcome {index} came out at {value}; contraction is numerically inconsistent")]
    NegativeProbability { index: usize, value: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Exact Born-rule evaluation of a network with [`DEFAULT_DIM_CAP`].
pub fn simulate_network(
    topology: &NetworkTopology,
    sources: &[SourceSpec],
    measurements: &[MeasurementSpec],
) -> Result<OutcomeDistribution, SimulationError> {
    simulate_network_with_cap(topology, sources, measurements, DEFAULT_DIM_CAP)
}

/// Exact Born-rule evaluation of a network.
///
/// The global state is the tensor product of the source states in topology
/// order; each node then measures the factors addressed to it, ordered by
/// source index. Probabilities are extracted for every joint outcome, so
/// the cost is proportional to `dim^2` per outcome tuple.
pub fn simulate_network_with_cap(
    topology: &NetworkTopology,
    sources: &[SourceSpec],
    measurements: &[MeasurementSpec],
    dim_cap: usize,
) -> Result<OutcomeDistribution, SimulationError> {
    let num_nodes = topology.num_nodes();
    if sources.len() != topology.num_sources() {
        return Err(SimulationError::SourceCountMismatch {
            expected: topology.num_sources(),
            got: sources.len(),
        });
    }
    for (index, spec) in sources.iter().enumerate() {
        let edge = topology.source(index).expect("index in range");
        if spec.nodes != edge {
            return Err(SimulationError::SourceNodesMismatch { index });
        }
        if spec.nodes.len() != spec.dims.len() {
            return Err(SimulationError::SourceShapeMismatch {
                index,
                nodes: spec.nodes.len(),
                dims: spec.dims.len(),
            });
        }
        let expected: usize = spec.dims.iter().product();
        if spec.state.nrows() != spec.state.ncols() || spec.state.nrows() != expected {
            return Err(SimulationError::StateDimMismatch {
                index,
                expected,
                got: spec.state.nrows(),
            });
        }
        let herm = hermitian_deviation(&spec.state);
        if herm > QUANTUM_INPUT_TOL {
            return Err(SimulationError::StateNotHermitian { index, deviation: herm });
        }
        let min_eig = hermitian_min_eigenvalue(&spec.state);
        if min_eig < -QUANTUM_INPUT_TOL {
            return Err(SimulationError::StateNotPsd { index, min_eig });
        }
        let trace = spec.state.trace().re;
        if (trace - 1.0).abs() > QUANTUM_INPUT_TOL {
            return Err(SimulationError::StateTraceOff { index, trace });
        }
    }

    // Factor slots in source-major order; each slot is one local space.
    let mut slot_dims: Vec<usize> = Vec::new();
    let mut slot_node: Vec<usize> = Vec::new();
    for spec in sources {
        for (&node, &dim) in spec.nodes.iter().zip(&spec.dims) {
            slot_dims.push(dim);
            slot_node.push(node);
        }
    }
    let total_dim: usize = slot_dims.iter().product();
    if total_dim > dim_cap {
        return Err(SimulationError::DimensionCapExceeded { dim: total_dim, cap: dim_cap });
    }

    // Node-major slot order: stable sort keeps each node's factors in
    // source order, which is the convention measurements are written in.
    let num_slots = slot_dims.len();
    let mut order: Vec<usize> = (0..num_slots).collect();
    order.sort_by_key(|&s| slot_node[s]);
    let mut node_dims = alloc::vec![1usize; num_nodes];
    for &s in &order {
        node_dims[slot_node[s]] *= slot_dims[s];
    }

    let mut meas_by_node: Vec<Option<&MeasurementSpec>> = alloc::vec![None; num_nodes];
    for meas in measurements {
        if meas.node >= num_nodes || meas_by_node[meas.node].is_some() {
            return Err(SimulationError::MeasurementCoverage(meas.node.min(num_nodes - 1)));
        }
        meas_by_node[meas.node] = Some(meas);
    }
    let mut cards = Vec::with_capacity(num_nodes);
    for node in 0..num_nodes {
        let meas = meas_by_node[node].ok_or(SimulationError::MeasurementCoverage(node))?;
        if meas.effects.len() < 2 {
            return Err(SimulationError::TooFewEffects { node, got: meas.effects.len() });
        }
        let expected = node_dims[node];
        let mut sum = CMat::zeros(expected, expected);
        for (outcome, effect) in meas.effects.iter().enumerate() {
            if effect.nrows() != effect.ncols() || effect.nrows() != expected {
                return Err(SimulationError::EffectDimMismatch {
                    node,
                    outcome,
                    expected,
                    got: effect.nrows(),
                });
            }
            let herm = hermitian_deviation(effect);
            if herm > QUANTUM_INPUT_TOL {
                return Err(SimulationError::EffectNotHermitian { node, outcome, deviation: herm });
            }
            let min_eig = hermitian_min_eigenvalue(effect);
            if min_eig < -QUANTUM_INPUT_TOL {
                return Err(SimulationError::EffectNotPsd { node, outcome, min_eig });
            }
            sum += effect;
        }
        let deviation = max_abs_c(&(&sum - CMat::identity(expected, expected)));
        if deviation > QUANTUM_INPUT_TOL {
            return Err(SimulationError::IncompleteEffects { node, deviation });
        }
        cards.push(meas.effects.len());
    }

    // Global state in source-major order, then re-indexed to node-major.
    let mut rho = CMat::from_element(1, 1, Complex::new(1.0, 0.0));
    for spec in sources {
        rho = rho.kronecker(&spec.state);
    }
    let perm = global_permutation(&slot_dims, &order);
    let mut rho_nm_t = CMat::zeros(total_dim, total_dim);
    for i in 0..total_dim {
        for j in 0..total_dim {
            // transpose stored directly; the contraction below reads tr(E rho)
            rho_nm_t[(perm[i], perm[j])] = rho[(j, i)];
        }
    }

    let total_outcomes: usize = cards.iter().product();
    let mut probabilities = Vec::with_capacity(total_outcomes);
    let mut outcome = alloc::vec![0usize; num_nodes];
    for flat in 0..total_outcomes {
        let mut effect = CMat::from_element(1, 1, Complex::new(1.0, 0.0));
        for node in 0..num_nodes {
            let meas = meas_by_node[node].expect("validated above");
            effect = effect.kronecker(&meas.effects[outcome[node]]);
        }
        let p = effect.component_mul(&rho_nm_t).sum().re;
        if p < -PROB_NEG_TOL {
            return Err(SimulationError::NegativeProbability { index: flat, value: p });
        }
        probabilities.push(p.max(0.0));
        // odometer: last node fastest
        for node in (0..num_nodes).rev() {
            outcome[node] += 1;
            if outcome[node] < cards[node] {
                break;
            }
            outcome[node] = 0;
        }
    }
    Ok(OutcomeDistribution::new(cards, probabilities)?)
}

/// Maps source-major flat indices to node-major flat indices, where
/// `order[t]` is the source-major slot placed at node-major position `t`.
fn global_permutation(slot_dims: &[usize], order: &[usize]) -> Vec<usize> {
    let num_slots = slot_dims.len();
    let total: usize = slot_dims.iter().product();
    // node-major strides, big-endian over the reordered slots
    let mut new_strides = alloc::vec![1usize; num_slots];
    for t in (0..num_slots.saturating_sub(1)).rev() {
        new_strides[t] = new_strides[t + 1] * slot_dims[order[t + 1]];
    }
    let mut stride_of_slot = alloc::vec![1usize; num_slots];
    for (t, &s) in order.iter().enumerate() {
        stride_of_slot[s] = new_strides[t];
    }
    let mut map = alloc::vec![0usize; total];
    for (g, entry) in map.iter_mut().enumerate() {
        let mut rem = g;
        let mut new_index = 0;
        for s in (0..num_slots).rev() {
            let digit = rem % slot_dims[s];
            rem /= slot_dims[s];
            new_index += digit * stride_of_slot[s];
        }
        *entry = new_index;
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn dichotomic_family_extremes_and_noise() {
        let d = OutcomeDistribution::ghz_dichotomic(3, 0.5, 0.5).unwrap();
        assert_eq!(d.prob(&[0, 0, 0]), 0.5);
        assert_eq!(d.prob(&[1, 1, 1]), 0.5);
        assert_eq!(d.prob(&[0, 1, 0]), 0.0);

        let u = OutcomeDistribution::ghz_dichotomic(3, 0.125, 0.125).unwrap();
        assert!(u.probabilities().iter().all(|&p| (p - 0.125).abs() < 1e-15));

        let d4 = OutcomeDistribution::ghz_dichotomic(4, 0.7, 0.1).unwrap();
        assert_eq!(d4.prob(&[0, 0, 0, 0]), 0.7);
        assert_eq!(d4.prob(&[1, 1, 1, 1]), 0.1);
        let noise = 0.2 / 14.0;
        assert!((d4.prob(&[0, 1, 1, 0]) - noise).abs() < 1e-15);

        assert!(OutcomeDistribution::ghz_dichotomic(3, 0.8, 0.4).is_err());
        assert!(OutcomeDistribution::ghz_dichotomic(1, 0.5, 0.5).is_err());
    }

    #[test]
    fn three_outcome_family_corners() {
        let d = OutcomeDistribution::ghz_three_outcome(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(d.cardinalities(), &[3, 3, 3]);
        assert!((d.prob(&[0, 0, 0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(&[1, 1, 1]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.prob(&[2, 2, 2]) - 1.0 / 3.0).abs() < 1e-15);
        // 1 - 1/3 - 1/3 - 1/3 leaves ~1e-16 of float residue in the noise
        assert!(d.prob(&[0, 1, 2]).abs() < 1e-16);

        let u = OutcomeDistribution::ghz_three_outcome(1.0 / 27.0, 1.0 / 27.0, 1.0 / 27.0).unwrap();
        assert!(u.probabilities().iter().all(|&p| (p - 1.0 / 27.0).abs() < 1e-15));

        let mixed = OutcomeDistribution::ghz_three_outcome(0.5, 0.2, 0.1).unwrap();
        assert!((mixed.prob(&[0, 2, 1]) - 0.2 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn construction_guards() {
        assert_eq!(
            OutcomeDistribution::new(vec![2, 1], vec![0.5, 0.5]),
            Err(DistributionError::BadCardinality(1, 1))
        );
        assert_eq!(
            OutcomeDistribution::new(vec![2], vec![0.5, 0.4]),
            Err(DistributionError::NotNormalized(0.9))
        );
        assert!(matches!(
            OutcomeDistribution::new(vec![2], vec![1.2, -0.2]),
            Err(DistributionError::NegativeProbability { index: 1, .. })
        ));
        // tiny negatives are clamped, not rejected
        let d = OutcomeDistribution::new(vec![2], vec![1.0 + 1e-13, -1e-13]).unwrap();
        assert_eq!(d.probabilities()[1], 0.0);
    }

    #[test]
    fn marginals_of_dichotomic_family() {
        let (n, p, q) = (4usize, 0.6, 0.2);
        let d = OutcomeDistribution::ghz_dichotomic(n, p, q).unwrap();
        let total = (1usize << n) as f64;
        // outcome 0 at a node: all-zeros plus half-minus-one of the noise outcomes
        let noise = (1.0 - p - q) / (total - 2.0);
        let expect0 = p + noise * (total / 2.0 - 1.0);
        for node in 0..n {
            let m = d.marginal(node);
            assert!((m[0] - expect0).abs() < 1e-14);
            assert!((m[0] + m[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn index_layout_is_last_node_fastest() {
        let d = OutcomeDistribution::new(
            vec![2, 3],
            vec![0.1, 0.2, 0.05, 0.15, 0.3, 0.2],
        )
        .unwrap();
        assert_eq!(d.index_of(&[0, 2]), 2);
        assert_eq!(d.index_of(&[1, 0]), 3);
        assert_eq!(d.prob(&[1, 1]), 0.3);
        let mb = d.marginal(1);
        assert!((mb[1] - (0.2 + 0.3)).abs() < 1e-15);
    }

    // --- simulator ---

    fn qubit_pair_state(theta: f64) -> CMat {
        // cos t |00> + sin t |11>
        let v = DVector::from_vec(vec![
            c(theta.cos(), 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(theta.sin(), 0.0),
        ]);
        &v * v.adjoint()
    }

    fn parity_effects(dim_qubits: usize) -> Vec<CMat> {
        let dim = 1usize << dim_qubits;
        let mut even = CMat::zeros(dim, dim);
        let mut odd = CMat::zeros(dim, dim);
        for b in 0..dim {
            if (b as u32).count_ones() % 2 == 0 {
                even[(b, b)] = c(1.0, 0.0);
            } else {
                odd[(b, b)] = c(1.0, 0.0);
            }
        }
        vec![even, odd]
    }

    fn triangle_network(thetas: [f64; 3]) -> (NetworkTopology, Vec<SourceSpec>, Vec<MeasurementSpec>) {
        let topo = NetworkTopology::k_complete(3, 2).unwrap();
        let sources = topo
            .sources()
            .iter()
            .zip(thetas)
            .map(|(nodes, t)| SourceSpec { nodes: nodes.clone(), dims: vec![2, 2], state: qubit_pair_state(t) })
            .collect();
        let measurements = (0..3)
            .map(|node| MeasurementSpec { node, effects: parity_effects(2) })
            .collect();
        (topo, sources, measurements)
    }

    #[test]
    fn maximally_mixed_triangle_with_parity_readout_is_uniform() {
        let topo = NetworkTopology::k_complete(3, 2).unwrap();
        let mixed = CMat::identity(4, 4).map(|z| z * 0.25);
        let sources: Vec<SourceSpec> = topo
            .sources()
            .iter()
            .map(|nodes| SourceSpec { nodes: nodes.clone(), dims: vec![2, 2], state: mixed.clone() })
            .collect();
        let measurements: Vec<MeasurementSpec> =
            (0..3).map(|node| MeasurementSpec { node, effects: parity_effects(2) }).collect();
        let d = simulate_network(&topo, &sources, &measurements).unwrap();
        assert!(d.probabilities().iter().all(|&p| (p - 0.125).abs() < 1e-13));
    }

    /// Contraction oracle that never builds the permuted state: decodes
    /// source-major indices digit by digit and reassembles per-node local
    /// indices directly.
    fn born_by_index_mapping(
        sources: &[SourceSpec],
        measurements: &[MeasurementSpec],
        num_nodes: usize,
        outcome: &[usize],
    ) -> f64 {
        let mut slot_dims = Vec::new();
        let mut slot_node = Vec::new();
        for s in sources {
            for (&node, &dim) in s.nodes.iter().zip(&s.dims) {
                slot_dims.push(dim);
                slot_node.push(node);
            }
        }
        let total: usize = slot_dims.iter().product();
        let mut rho = CMat::from_element(1, 1, c(1.0, 0.0));
        for s in sources {
            rho = rho.kronecker(&s.state);
        }
        // local strides within each node's space, node slots in source order
        let mut node_slots: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for (slot, &node) in slot_node.iter().enumerate() {
            node_slots[node].push(slot);
        }
        let local_index = |g: usize| -> Vec<usize> {
            let mut digits = vec![0usize; slot_dims.len()];
            let mut rem = g;
            for s in (0..slot_dims.len()).rev() {
                digits[s] = rem % slot_dims[s];
                rem /= slot_dims[s];
            }
            (0..num_nodes)
                .map(|n| {
                    node_slots[n]
                        .iter()
                        .fold(0usize, |acc, &s| acc * slot_dims[s] + digits[s])
                })
                .collect()
        };
        let mut p = c(0.0, 0.0);
        for g in 0..total {
            let gl = local_index(g);
            for h in 0..total {
                let hl = local_index(h);
                let mut amp = c(1.0, 0.0);
                for n in 0..num_nodes {
                    amp *= measurements[n].effects[outcome[n]][(hl[n], gl[n])];
                }
                p += amp * rho[(g, h)];
            }
        }
        assert!(p.im.abs() < 1e-12);
        p.re
    }

    #[test]
    fn entangled_triangle_matches_index_mapping_oracle() {
        let (topo, sources, measurements) = triangle_network([0.3, 0.7, 1.1]);
        let d = simulate_network(&topo, &sources, &measurements).unwrap();
        for x0 in 0..2 {
            for x1 in 0..2 {
                for x2 in 0..2 {
                    let expect =
                        born_by_index_mapping(&sources, &measurements, 3, &[x0, x1, x2]);
                    assert!((d.prob(&[x0, x1, x2]) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn relabeling_nodes_permutes_outcome_axes() {
        // single source feeding all three nodes with an asymmetric pure state
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v = DVector::from_fn(8, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        v /= c(v.norm(), 0.0);
        let rho = &v * v.adjoint();
        let topo = NetworkTopology::new(3, vec![vec![0, 1, 2]]).unwrap();
        let biased = |u: f64, w: f64| {
            vec![
                CMat::from_diagonal(&DVector::from_vec(vec![c(u, 0.0), c(w, 0.0)])),
                CMat::from_diagonal(&DVector::from_vec(vec![c(1.0 - u, 0.0), c(1.0 - w, 0.0)])),
            ]
        };
        let meas: Vec<MeasurementSpec> = [(0.9, 0.2), (0.6, 0.3), (0.8, 0.5)]
            .iter()
            .enumerate()
            .map(|(node, &(u, w))| MeasurementSpec { node, effects: biased(u, w) })
            .collect();
        let src = SourceSpec { nodes: vec![0, 1, 2], dims: vec![2, 2, 2], state: rho.clone() };
        let base = simulate_network(&topo, &[src], &meas).unwrap();

        // relabel n -> perm[n]: factor i of the state must move to position perm[i]
        let perm = [1usize, 2, 0];
        let mut pmat = CMat::zeros(8, 8);
        for g in 0..8usize {
            let digits = [(g >> 2) & 1, (g >> 1) & 1, g & 1];
            let mut h = 0usize;
            for (i, &d) in digits.iter().enumerate() {
                h |= d << (2 - perm[i]);
            }
            pmat[(h, g)] = c(1.0, 0.0);
        }
        let rho_p = &pmat * &rho * pmat.adjoint();
        let src_p = SourceSpec { nodes: vec![0, 1, 2], dims: vec![2, 2, 2], state: rho_p };
        let mut meas_p: Vec<MeasurementSpec> = meas
            .iter()
            .enumerate()
            .map(|(n, m)| MeasurementSpec { node: perm[n], effects: m.effects.clone() })
            .collect();
        meas_p.sort_by_key(|m| m.node);
        let moved = simulate_network(&topo, &[src_p], &meas_p).unwrap();

        for y0 in 0..2usize {
            for y1 in 0..2usize {
                for y2 in 0..2usize {
                    let y = [y0, y1, y2];
                    let x = [y[perm[0]], y[perm[1]], y[perm[2]]];
                    assert!((moved.prob(&y) - base.prob(&x)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn simulator_input_validation() {
        let (topo, sources, mut measurements) = triangle_network([0.3, 0.7, 1.1]);

        let mut bad_effects = measurements[0].effects.clone();
        bad_effects[0][(0, 0)] = c(1.5, 0.0); // breaks completeness
        let bad = MeasurementSpec { node: 0, effects: bad_effects };
        let saved = core::mem::replace(&mut measurements[0], bad);
        assert!(matches!(
            simulate_network(&topo, &sources, &measurements),
            Err(SimulationError::IncompleteEffects { node: 0, .. })
        ));
        measurements[0] = saved;

        assert!(matches!(
            simulate_network_with_cap(&topo, &sources, &measurements, 32),
            Err(SimulationError::DimensionCapExceeded { dim: 64, cap: 32 })
        ));

        let mut wrong_nodes = sources.clone();
        wrong_nodes[0].nodes = vec![0, 2];
        assert!(matches!(
            simulate_network(&topo, &wrong_nodes, &measurements),
            Err(SimulationError::SourceNodesMismatch { index: 0 })
        ));

        let mut unnormalized = sources.clone();
        unnormalized[0].state = unnormalized[0].state.map(|z| z * 2.0);
        assert!(matches!(
            simulate_network(&topo, &unnormalized, &measurements),
            Err(SimulationError::StateTraceOff { index: 0, .. })
        ));
    }
}
