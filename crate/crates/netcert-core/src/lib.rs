//! Topology certification for network-generated outcome statistics.
//!
//! Given the joint outcome distribution of an `N`-node network in which
//! hidden sources each feed a subset of the nodes, this crate decides
//! whether the statistics are consistent with a hypothesized topology.
//! The pipeline is:
//!
//! 1. [`distribution`]: represent or simulate the joint distribution,
//! 2. [`covariance`]: build a block covariance matrix, one block per node,
//! 3. [`criteria`]: run fast analytic necessary or sufficient conditions,
//! 4. [`feasibility`]: decide the block-decomposition relaxation by
//!    alternating projections, returning a machine-checkable certificate.
//!
//! A topology with sources of size at most `k` constrains the covariance
//! matrix to split into positive semidefinite parts, each supported on at
//! most `k` blocks. Refuting that splitting refutes the topology; all
//! tests report [`criteria::Verdict`]s that say which side of the argument
//! they carry.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command-line
//! driver live in the companion `netcert` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod covariance;
pub mod criteria;
pub mod distribution;
pub mod feasibility;
pub mod linalg;
pub mod sampling;
pub mod topology;

pub use covariance::{covariance_matrix, dichotomic_factor, reduced_covariance, BlockMatrix, FeatureMap};
pub use criteria::{Verdict, VerdictStatus};
pub use distribution::{simulate_network, MeasurementSpec, OutcomeDistribution, SourceSpec};
pub use feasibility::{certify, decompose, find_witness, Certificate, FeasibilityOptions};
pub use topology::{BlockPartition, NetworkTopology};
