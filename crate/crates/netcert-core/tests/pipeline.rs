//! End-to-end runs through the public API: simulator output into
//! covariance assembly into certification, and agreement between the two
//! feature maps on the final verdict.

use nalgebra::Complex;

use netcert_core::covariance::{covariance_matrix, reduced_covariance, FeatureMap};
use netcert_core::criteria::VerdictStatus;
use netcert_core::distribution::{simulate_network, MeasurementSpec, OutcomeDistribution, SourceSpec};
use netcert_core::feasibility::{certify, FeasibilityOptions};
use netcert_core::linalg::CMat;
use netcert_core::topology::NetworkTopology;

fn computational_measurements(n: usize) -> Vec<MeasurementSpec> {
    (0..n)
        .map(|node| MeasurementSpec {
            node,
            effects: (0..2)
                .map(|outcome| {
                    CMat::from_fn(2, 2, |i, j| {
                        if i == j && i == outcome {
                            Complex::new(1.0, 0.0)
                        } else {
                            Complex::new(0.0, 0.0)
                        }
                    })
                })
                .collect(),
        })
        .collect()
}

#[test]
fn feature_maps_agree_on_family_verdicts() {
    let topo = NetworkTopology::k_complete(3, 2).unwrap();
    let opts = FeasibilityOptions::default();
    for (p, q, expected) in [
        (0.5, 0.5, VerdictStatus::Incompatible),
        (0.125, 0.125, VerdictStatus::Member),
        (0.3, 0.1, VerdictStatus::Member),
    ] {
        let dist = OutcomeDistribution::ghz_dichotomic(3, p, q).unwrap();
        let canonical = covariance_matrix(&dist, FeatureMap::Canonical);
        let reduced = reduced_covariance(&dist);
        let canonical_verdict = certify(&canonical, &topo, &opts).unwrap();
        let reduced_verdict = certify(&reduced, &topo, &opts).unwrap();
        assert_eq!(canonical_verdict.status, expected, "canonical map at ({p},{q})");
        assert_eq!(reduced_verdict.status, expected, "reduced map at ({p},{q})");
    }
}

#[test]
fn simulated_ghz_network_is_refuted_end_to_end() {
    let n = 3;
    let all_nodes = NetworkTopology::new(n, vec![(0..n).collect()]).unwrap();
    let dim = 1usize << n;
    let mut state = CMat::zeros(dim, dim);
    for &i in &[0, dim - 1] {
        for &j in &[0, dim - 1] {
            state[(i, j)] = Complex::new(0.5, 0.0);
        }
    }
    let dist = simulate_network(
        &all_nodes,
        &[SourceSpec { nodes: (0..n).collect(), dims: vec![2; n], state }],
        &computational_measurements(n),
    )
    .unwrap();

    let cov = covariance_matrix(&dist, FeatureMap::Canonical);
    let triangle = NetworkTopology::k_complete(3, 2).unwrap();
    let verdict = certify(&cov, &triangle, &FeasibilityOptions::default()).unwrap();
    assert_eq!(verdict.status, VerdictStatus::Incompatible);
}

#[test]
fn simulated_product_network_is_member_end_to_end() {
    let n = 3;
    let triangle = NetworkTopology::k_complete(3, 2).unwrap();
    // each pair source is a maximally mixed two-qubit state
    let sources: Vec<SourceSpec> = triangle
        .sources()
        .iter()
        .map(|nodes| SourceSpec {
            nodes: nodes.clone(),
            dims: vec![2; 2],
            state: CMat::from_fn(4, 4, |i, j| {
                if i == j {
                    Complex::new(0.25, 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                }
            }),
        })
        .collect();
    // each node sees two qubits; measure the parity of the pair
    let measurements: Vec<MeasurementSpec> = (0..n)
        .map(|node| MeasurementSpec {
            node,
            effects: (0..2)
                .map(|outcome| {
                    CMat::from_fn(4, 4, |i, j| {
                        let parity = (i ^ (i >> 1)) & 1;
                        if i == j && parity == outcome {
                            Complex::new(1.0, 0.0)
                        } else {
                            Complex::new(0.0, 0.0)
                        }
                    })
                })
                .collect(),
        })
        .collect();
    let dist = simulate_network(&triangle, &sources, &measurements).unwrap();
    let cov = covariance_matrix(&dist, FeatureMap::Canonical);
    let verdict = certify(&cov, &triangle, &FeasibilityOptions::default()).unwrap();
    assert_eq!(verdict.status, VerdictStatus::Member);
}
