//! Analytic compatibility criteria.
//!
//! Every test returns a [`Verdict`] that names the completeness level `k`
//! it speaks about and which side of the argument it carries:
//! `INCOMPATIBLE` verdicts refute every topology whose sources feed at
//! most `k` nodes, `MEMBER` verdicts certify that the covariance matrix
//! admits the block decomposition such a topology enforces, and anything
//! inside the tolerance band stays `INCONCLUSIVE`. A test never claims
//! the direction it cannot prove.

mod block_dominance;
mod sign_flip;

pub use block_dominance::{
    bc2_decomposition, block_comparison_matrix, is_block_diagonally_dominant,
    membership_block_comparison, Bc2Decomposition, PairTerm, RECONSTRUCTION_TOL,
};
pub use sign_flip::{conjugate_block_signs, sign_flip_test, MAX_SIGN_FLIP_BLOCKS};
pub(crate) use sign_flip::minimal_signed_eigenpair;

use alloc::vec::Vec;
use nalgebra::ComplexField;
use thiserror::Error;

use crate::covariance::BlockMatrix;
use crate::linalg::{self, Mat};

#[derive(Debug, Error, PartialEq)]
pub enum CriteriaError {
    #[error("matrix is {rows}x{cols}, need square")]
    NotSquare { rows: usize, cols: usize },
    #[error("level k={k} out of range for {n} nodes")]
    InvalidLevel { k: usize, n: usize },
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("family parameters p={p}, q={q} out of range")]
    BadFamilyParameters { p: f64, q: f64 },
    #[error("family needs between 2 and 20 nodes, got {0}")]
    BadFamilySize(usize),
    #[error("state coefficients are empty or all zero")]
    EmptyState,
    #[error("matrix trace {0} is too close to zero to normalize")]
    ZeroTrace(f64),
    #[error("pivot {pivot} out of range for {blocks} blocks")]
    PivotOutOfRange { pivot: usize, blocks: usize },
    #[error("sign-flip enumeration over {blocks} blocks exceeds the {max}-block limit")]
    TooManyBlocks { blocks: usize, max: usize },
    #[error("diagonal block {block} is singular (smallest eigenvalue {min_eig})")]
    SingularDiagonalBlock { block: usize, min_eig: f64 },
    #[error("block row {block} violates diagonal dominance by {deficit}")]
    NotDominant { block: usize, deficit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    /// The statistics cannot come from any topology at this level.
    Incompatible,
    /// The covariance matrix admits the level-`k` block decomposition.
    Member,
    /// Neither direction established.
    Inconclusive,
}

impl VerdictStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictStatus::Incompatible => "INCOMPATIBLE",
            VerdictStatus::Member => "MEMBER",
            VerdictStatus::Inconclusive => "INCONCLUSIVE",
        }
    }
}

impl core::fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one test at one completeness level.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub test: &'static str,
    pub k: usize,
    pub status: VerdictStatus,
    /// Named scalar evidence, e.g. the eigenvalue or margin that decided
    /// the status. Kept as a list so serialization order is stable.
    pub evidence: Vec<(&'static str, f64)>,
}

impl Verdict {
    pub fn new(
        test: &'static str,
        k: usize,
        status: VerdictStatus,
        evidence: Vec<(&'static str, f64)>,
    ) -> Self {
        Self { test, k, status, evidence }
    }

    pub fn evidence_value(&self, name: &str) -> Option<f64> {
        self.evidence.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }

    pub fn is_incompatible(&self) -> bool {
        self.status == VerdictStatus::Incompatible
    }

    pub fn is_member(&self) -> bool {
        self.status == VerdictStatus::Member
    }
}

fn require_square(c: &Mat) -> Result<usize, CriteriaError> {
    if c.nrows() != c.ncols() {
        return Err(CriteriaError::NotSquare { rows: c.nrows(), cols: c.ncols() });
    }
    Ok(c.nrows())
}

fn normalized_trace(c: &Mat) -> Result<f64, CriteriaError> {
    let trace = c.trace();
    if trace <= 1e-12 * linalg::max_abs(c).max(1.0) {
        return Err(CriteriaError::ZeroTrace(trace));
    }
    Ok(trace)
}

/// Comparison matrix: keep absolute values on the diagonal, negate them
/// off the diagonal. A PSD comparison matrix certifies that the entry
/// pattern can be split into PSD pieces supported on index pairs.
pub fn comparison_matrix(c: &Mat) -> Mat {
    assert_eq!(c.nrows(), c.ncols(), "comparison matrix needs a square input");
    Mat::from_fn(c.nrows(), c.ncols(), |i, j| {
        if i == j {
            c[(i, j)].abs()
        } else {
            -c[(i, j)].abs()
        }
    })
}

/// Pairwise-source test on a scalar-block covariance factor. For such
/// factors the criterion is two-sided: a negative eigenvalue of the
/// comparison matrix refutes every pairwise topology, a strictly positive
/// spectrum certifies the pairwise decomposition exists.
pub fn test_bipartite_comparison(c: &Mat, tol: f64) -> Verdict {
    let min_eig = linalg::min_eigenvalue(&comparison_matrix(c));
    let status = if min_eig < -tol {
        VerdictStatus::Incompatible
    } else if min_eig >= tol {
        VerdictStatus::Member
    } else {
        VerdictStatus::Inconclusive
    };
    Verdict::new("comparison", 2, status, alloc::vec![("min_eig", min_eig)])
}

/// Coefficients of the two-parameter family factor `C = a*I + b*J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhzFactorParams {
    /// Coefficient of the identity.
    pub identity_coeff: f64,
    /// Coefficient of the all-ones matrix.
    pub all_ones_coeff: f64,
}

impl GhzFactorParams {
    pub fn matrix(&self, n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| {
            self.all_ones_coeff + if i == j { self.identity_coeff } else { 0.0 }
        })
    }
}

/// Closed-form covariance factor of the dichotomic family: mass `p` on
/// all-zeros, `q` on all-ones, uniform noise elsewhere.
pub fn ghz_factor_parameters(
    num_nodes: usize,
    p: f64,
    q: f64,
) -> Result<GhzFactorParams, CriteriaError> {
    if !(2..=20).contains(&num_nodes) {
        return Err(CriteriaError::BadFamilySize(num_nodes));
    }
    if p < 0.0 || q < 0.0 || p + q > 1.0 + 1e-12 {
        return Err(CriteriaError::BadFamilyParameters { p, q });
    }
    let pow_half = (1u64 << (num_nodes - 2)) as f64; // 2^(n-2)
    let denom = ((1u64 << num_nodes) - 2) as f64;
    let identity_coeff = pow_half * (1.0 - p - q) / denom;
    let all_ones_coeff = 0.25 * (1.0 - (p - q) * (p - q)) - identity_coeff;
    Ok(GhzFactorParams { identity_coeff, all_ones_coeff })
}

/// Noise threshold of the dichotomic family: for fixed `p`, the witness at
/// level `k` starts firing once `q` exceeds the returned value.
pub fn ghz_threshold(num_nodes: usize, k: usize, p: f64) -> Result<f64, CriteriaError> {
    if !(2..=20).contains(&num_nodes) {
        return Err(CriteriaError::BadFamilySize(num_nodes));
    }
    if !(2..num_nodes).contains(&k) {
        return Err(CriteriaError::InvalidLevel { k, n: num_nodes });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(CriteriaError::BadFamilyParameters { p, q: 0.0 });
    }
    let n = num_nodes as f64;
    let pow_half = (1u64 << (num_nodes - 2)) as f64;
    let eta = (n - 1.0) * pow_half / ((n - k as f64) * ((1u64 << (num_nodes - 1)) as f64 - 1.0));
    Ok(p + eta - ComplexField::sqrt(4.0 * eta * p + (eta - 1.0) * (eta - 1.0)))
}

/// Witness matrix `I - psi psi^T / s` where `s` is the sum of the `k`
/// largest squared amplitudes of the normalized state. Nonnegative on
/// every matrix admitting a level-`k` split, strictly negative somewhere
/// beyond.
pub fn witness_from_state(coeffs: &[f64], k: usize) -> Result<Mat, CriteriaError> {
    let n = coeffs.len();
    if !(1..=n).contains(&k) {
        return Err(CriteriaError::InvalidLevel { k, n });
    }
    let norm_sq: f64 = coeffs.iter().map(|&c| c * c).sum();
    if n == 0 || norm_sq <= 0.0 {
        return Err(CriteriaError::EmptyState);
    }
    let mut sq: Vec<f64> = coeffs.iter().map(|&c| c * c / norm_sq).collect();
    sq.sort_by(|a, b| b.partial_cmp(a).expect("finite coefficients"));
    let s: f64 = sq[..k].iter().sum();
    let psi = Mat::from_fn(n, 1, |i, _| coeffs[i] / ComplexField::sqrt(norm_sq));
    Ok(Mat::identity(n, n) - (&psi * psi.transpose()).scale(1.0 / s))
}

/// Applies the uniform-amplitude witness `I - J/k` to a scalar covariance
/// factor. The evidence value is `tr(W C)` divided by the node count, so
/// it is comparable across sizes; a value below `-tol` refutes every
/// level-`k` topology.
pub fn witness_test(c: &Mat, k: usize, tol: f64) -> Result<Verdict, CriteriaError> {
    let n = require_square(c)?;
    if !(2..=n).contains(&k) {
        return Err(CriteriaError::InvalidLevel { k, n });
    }
    let witness = witness_from_state(&alloc::vec![1.0; n], k)?;
    let value = witness.dot(c) / n as f64;
    let status = if value < -tol {
        VerdictStatus::Incompatible
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict::new("witness", k, status, alloc::vec![("witness_value", value)]))
}

/// Monogamy of the pivot row: under a level-`k` split, the summed trace
/// norms of the pivot's off-diagonal blocks of `X / tr X` are bounded by
/// `sqrt(k-1) * sqrt(t (1 - t))` with `t` the pivot's normalized diagonal
/// trace. Exceeding the bound refutes the level.
pub fn monogamy_test(
    x: &BlockMatrix,
    k: usize,
    pivot: usize,
    tol: f64,
) -> Result<Verdict, CriteriaError> {
    let blocks = x.num_blocks();
    if pivot >= blocks {
        return Err(CriteriaError::PivotOutOfRange { pivot, blocks });
    }
    if !(2..=blocks).contains(&k) {
        return Err(CriteriaError::InvalidLevel { k, n: blocks });
    }
    let trace = normalized_trace(x.entries())?;
    let mut coherence_sum = 0.0;
    for b in 0..blocks {
        if b != pivot {
            coherence_sum += linalg::trace_norm(&x.block(pivot, b)) / trace;
        }
    }
    let t = x.block(pivot, pivot).trace() / trace;
    let bound = ComplexField::sqrt((k - 1) as f64) * ComplexField::sqrt((t * (1.0 - t)).max(0.0));
    let slack = coherence_sum - bound;
    let status = if slack > tol {
        VerdictStatus::Incompatible
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict::new(
        "monogamy",
        k,
        status,
        alloc::vec![
            ("slack", slack),
            ("coherence_sum", coherence_sum),
            ("bound", bound),
            ("pivot", pivot as f64),
        ],
    ))
}

/// Runs [`monogamy_test`] for every pivot and keeps the strongest verdict
/// (largest slack; ties go to the lowest pivot).
pub fn monogamy_test_best_pivot(
    x: &BlockMatrix,
    k: usize,
    tol: f64,
) -> Result<Verdict, CriteriaError> {
    let mut best: Option<Verdict> = None;
    for pivot in 0..x.num_blocks() {
        let verdict = monogamy_test(x, k, pivot, tol)?;
        let slack = verdict.evidence_value("slack").expect("monogamy always reports slack");
        let replace = match &best {
            None => true,
            Some(b) => slack > b.evidence_value("slack").expect("slack present"),
        };
        if replace {
            best = Some(verdict);
        }
    }
    Ok(best.expect("at least one block"))
}

/// Diagonal-compression bound: with `D` the diagonal part of `C / tr C`,
/// positivity of `C/tr C - (n-k)/(n-1) * D` certifies a level-`k` split
/// of the scalar factor.
pub fn membership_lambda_bound(c: &Mat, k: usize, tol: f64) -> Result<Verdict, CriteriaError> {
    let n = require_square(c)?;
    if !(2..=n).contains(&k) {
        return Err(CriteriaError::InvalidLevel { k, n });
    }
    let trace = normalized_trace(c)?;
    let coeff = (n - k) as f64 / (n - 1) as f64;
    let shifted = Mat::from_fn(n, n, |i, j| {
        let v = c[(i, j)] / trace;
        if i == j {
            v * (1.0 - coeff)
        } else {
            v
        }
    });
    let min_eig = linalg::min_eigenvalue(&shifted);
    let status = if min_eig >= -tol { VerdictStatus::Member } else { VerdictStatus::Inconclusive };
    Ok(Verdict::new("membership_lambda", k, status, alloc::vec![("min_eig", min_eig)]))
}

/// Purity bound: `tr(C^2) / (tr C)^2 <= 1/(n-1)` certifies a pairwise
/// split of the scalar factor.
pub fn membership_purity(c: &Mat, tol: f64) -> Result<Verdict, CriteriaError> {
    let n = require_square(c)?;
    if n < 2 {
        return Err(CriteriaError::TooFewNodes(n));
    }
    let trace = normalized_trace(c)?;
    let sym = linalg::symmetrize(c);
    let ratio = sym.dot(&sym) / (trace * trace);
    let threshold = 1.0 / (n - 1) as f64;
    let status = if ratio <= threshold + tol {
        VerdictStatus::Member
    } else {
        VerdictStatus::Inconclusive
    };
    Ok(Verdict::new(
        "membership_purity",
        2,
        status,
        alloc::vec![("purity_ratio", ratio), ("threshold", threshold)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{covariance_matrix, dichotomic_factor, FeatureMap};
    use crate::distribution::OutcomeDistribution;
    use crate::sampling;
    use rand::Rng;

    fn ghz_factor(n: usize, p: f64, q: f64) -> Mat {
        ghz_factor_parameters(n, p, q).unwrap().matrix(n)
    }

    #[test]
    fn comparison_matrix_patterns() {
        let id = Mat::identity(3, 3);
        assert_eq!(comparison_matrix(&id), id);

        let c = Mat::from_element(3, 3, 0.25);
        let m = comparison_matrix(&c);
        let vals = linalg::sym_eigenvalues(&m);
        assert!((vals[0] + 0.25).abs() < 1e-12);
        assert!((vals[1] - 0.5).abs() < 1e-12);
        assert!((vals[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn comparison_on_family_points() {
        let tol = 1e-9;
        let detected = test_bipartite_comparison(&ghz_factor(3, 0.5, 0.5), tol);
        assert_eq!(detected.status, VerdictStatus::Incompatible);
        assert!((detected.evidence_value("min_eig").unwrap() + 0.25).abs() < 1e-12);

        let uniform = test_bipartite_comparison(&ghz_factor(3, 0.125, 0.125), tol);
        assert_eq!(uniform.status, VerdictStatus::Member);

        let below = test_bipartite_comparison(&ghz_factor(3, 0.5, 1.0 / 6.0 - 0.01), tol);
        assert_eq!(below.status, VerdictStatus::Member);

        // p = 1/2, q = 1/6 sits exactly on the boundary
        let boundary = test_bipartite_comparison(&ghz_factor(3, 0.5, 1.0 / 6.0), tol);
        assert_eq!(boundary.status, VerdictStatus::Inconclusive);
        assert!(boundary.evidence_value("min_eig").unwrap().abs() < 1e-12);

        // pure noise has a negative all-ones coefficient and stays compatible
        let noise = test_bipartite_comparison(&ghz_factor(3, 0.0, 0.0), tol);
        assert_eq!(noise.status, VerdictStatus::Member);
    }

    #[test]
    fn factor_parameters_match_covariance_factor() {
        let params = ghz_factor_parameters(3, 0.5, 0.5).unwrap();
        assert!(params.identity_coeff.abs() < 1e-15);
        assert!((params.all_ones_coeff - 0.25).abs() < 1e-15);

        let uniform = ghz_factor_parameters(3, 0.125, 0.125).unwrap();
        assert!((uniform.identity_coeff - 0.25).abs() < 1e-15);
        assert!(uniform.all_ones_coeff.abs() < 1e-15);

        for &(n, p, q) in &[(3usize, 0.3, 0.2), (4, 0.6, 0.05), (5, 0.7, 0.1)] {
            let dist = OutcomeDistribution::ghz_dichotomic(n, p, q).unwrap();
            let cov = covariance_matrix(&dist, FeatureMap::Canonical);
            let factor = dichotomic_factor(&cov).unwrap();
            let closed_form = ghz_factor(n, p, q);
            assert!(linalg::max_abs(&(factor - closed_form)) < 1e-12);
        }
    }

    #[test]
    fn threshold_values_and_guards() {
        assert!((ghz_threshold(3, 2, 0.5).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((ghz_threshold(3, 2, 0.0).unwrap() - 1.0).abs() < 1e-12);
        // closed form at p = 1/2 via the level-2 coefficient 4/3
        let kappa: f64 = 4.0 / 3.0;
        let expect = 0.5 + kappa - (2.0 * kappa + (kappa - 1.0) * (kappa - 1.0)).sqrt();
        assert!((ghz_threshold(3, 2, 0.5).unwrap() - expect).abs() < 1e-12);

        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let q = ghz_threshold(5, 3, i as f64 / 10.0).unwrap();
            assert!(q <= prev + 1e-12, "threshold must fall as p grows");
            prev = q;
        }

        assert!(matches!(ghz_threshold(3, 1, 0.5), Err(CriteriaError::InvalidLevel { .. })));
        assert!(matches!(ghz_threshold(3, 3, 0.5), Err(CriteriaError::InvalidLevel { .. })));
        assert!(matches!(ghz_threshold(3, 2, 1.5), Err(CriteriaError::BadFamilyParameters { .. })));
    }

    #[test]
    fn witness_construction() {
        // uniform amplitudes at level k give I - J/k
        let n = 4;
        let w = witness_from_state(&vec![1.0; n], 2).unwrap();
        let expect = Mat::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - 0.5);
        assert!(linalg::max_abs(&(&w - expect)) < 1e-14);

        // amplitudes (2,1,1), k = 1: the largest squared amplitude is 4/6
        let w1 = witness_from_state(&[2.0, 1.0, 1.0], 1).unwrap();
        let frozen = Mat::from_row_slice(
            3,
            3,
            &[0.0, -0.5, -0.5, -0.5, 0.75, -0.25, -0.5, -0.25, 0.75],
        );
        assert!(linalg::max_abs(&(&w1 - frozen)) < 1e-14);

        // unsorted input: the two largest of (1,2) at k=1 is 4/5
        let w2 = witness_from_state(&[1.0, 2.0], 1).unwrap();
        assert!((w2[(0, 0)] - (1.0 - (1.0 / 5.0) / (4.0 / 5.0))).abs() < 1e-14);

        // k = n gives a PSD witness (scaled projector complement)
        let wn = witness_from_state(&[2.0, 1.0, 1.0], 3).unwrap();
        assert!(linalg::min_eigenvalue(&wn) > -1e-12);

        assert!(matches!(witness_from_state(&[], 1), Err(CriteriaError::InvalidLevel { .. })));
        assert!(matches!(witness_from_state(&[0.0, 0.0], 1), Err(CriteriaError::EmptyState)));
        assert!(matches!(
            witness_from_state(&[1.0, 1.0], 3),
            Err(CriteriaError::InvalidLevel { .. })
        ));
    }

    #[test]
    fn witness_values_on_flagship_points() {
        let c = ghz_factor(5, 0.5, 0.5);
        let at3 = witness_test(&c, 3, 1e-9).unwrap();
        assert_eq!(at3.status, VerdictStatus::Incompatible);
        assert!((at3.evidence_value("witness_value").unwrap() + 1.0 / 6.0).abs() < 1e-12);

        let at4 = witness_test(&c, 4, 1e-9).unwrap();
        assert_eq!(at4.status, VerdictStatus::Incompatible);
        assert!((at4.evidence_value("witness_value").unwrap() + 1.0 / 16.0).abs() < 1e-12);

        let uniform = witness_test(&ghz_factor(5, 1.0 / 32.0, 1.0 / 32.0), 3, 1e-9).unwrap();
        assert_eq!(uniform.status, VerdictStatus::Inconclusive);
    }

    #[test]
    fn witness_value_matches_closed_form() {
        for &(n, k, p, q) in &[(4usize, 2usize, 0.55, 0.2), (5, 3, 0.4, 0.35), (6, 4, 0.3, 0.6)] {
            let params = ghz_factor_parameters(n, p, q).unwrap();
            let verdict = witness_test(&params.matrix(n), k, 1e-9).unwrap();
            let expect = (1.0 - 1.0 / k as f64) * params.identity_coeff
                + (1.0 - n as f64 / k as f64) * params.all_ones_coeff;
            assert!((verdict.evidence_value("witness_value").unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn monogamy_on_flagship_point() {
        let x = crate::covariance::BlockMatrix::from_scalar_matrix(ghz_factor(3, 0.5, 0.5)).unwrap();
        let verdict = monogamy_test(&x, 2, 0, 1e-9).unwrap();
        assert_eq!(verdict.status, VerdictStatus::Incompatible);
        assert!((verdict.evidence_value("coherence_sum").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((verdict.evidence_value("bound").unwrap() - 2.0_f64.sqrt() / 3.0).abs() < 1e-12);

        let best = monogamy_test_best_pivot(&x, 2, 1e-9).unwrap();
        assert_eq!(best.evidence_value("pivot").unwrap(), 0.0);
        assert_eq!(best.status, VerdictStatus::Incompatible);
    }

    #[test]
    fn monogamy_is_silent_on_diagonal_input() {
        let x = crate::covariance::BlockMatrix::from_scalar_matrix(Mat::identity(4, 4).scale(0.3))
            .unwrap();
        let verdict = monogamy_test(&x, 2, 1, 1e-9).unwrap();
        assert_eq!(verdict.status, VerdictStatus::Inconclusive);
        assert_eq!(verdict.evidence_value("coherence_sum").unwrap(), 0.0);
    }

    #[test]
    fn monogamy_sign_matches_closed_form_on_family() {
        // for C = a I + b J with b >= 0 the slack has the sign of
        // (sqrt(n-1) - 1) b - a (here k = 2)
        let n = 3;
        for i in 0..20 {
            for j in 0..20 {
                let p = i as f64 / 20.0;
                let q = j as f64 / 20.0;
                if p + q > 1.0 {
                    continue;
                }
                let params = ghz_factor_parameters(n, p, q).unwrap();
                if params.all_ones_coeff < 0.0 {
                    continue;
                }
                let predictor = ((n - 1) as f64).sqrt() - 1.0;
                let closed = predictor * params.all_ones_coeff - params.identity_coeff;
                if closed.abs() < 1e-9 {
                    continue;
                }
                let x = crate::covariance::BlockMatrix::from_scalar_matrix(params.matrix(n)).unwrap();
                let verdict = monogamy_test(&x, 2, 0, 1e-9).unwrap();
                let slack = verdict.evidence_value("slack").unwrap();
                assert_eq!(slack > 0.0, closed > 0.0, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn monogamy_guards() {
        let x = crate::covariance::BlockMatrix::from_scalar_matrix(Mat::zeros(3, 3)).unwrap();
        assert!(matches!(monogamy_test(&x, 2, 0, 1e-9), Err(CriteriaError::ZeroTrace(_))));
        let y = crate::covariance::BlockMatrix::from_scalar_matrix(Mat::identity(3, 3)).unwrap();
        assert!(matches!(
            monogamy_test(&y, 2, 5, 1e-9),
            Err(CriteriaError::PivotOutOfRange { .. })
        ));
        assert!(matches!(monogamy_test(&y, 1, 0, 1e-9), Err(CriteriaError::InvalidLevel { .. })));
    }

    #[test]
    fn lambda_bound_membership() {
        // diagonal factors are products, member at every level
        let diag = Mat::from_fn(4, 4, |i, j| if i == j { 0.2 + 0.1 * i as f64 } else { 0.0 });
        let v = membership_lambda_bound(&diag, 2, 1e-9).unwrap();
        assert_eq!(v.status, VerdictStatus::Member);

        // fully coherent factor: bound is silent at k = 2
        let j3 = Mat::from_element(3, 3, 1.0 / 3.0);
        let v2 = membership_lambda_bound(&j3, 2, 1e-9).unwrap();
        assert_eq!(v2.status, VerdictStatus::Inconclusive);
        assert!((v2.evidence_value("min_eig").unwrap() + 1.0 / 6.0).abs() < 1e-12);

        // k = n never shifts anything, so PSD inputs always pass
        let mut rng = sampling::rng(31);
        for _ in 0..10 {
            let g = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let psd = &g * g.transpose();
            let v3 = membership_lambda_bound(&psd, 4, 1e-9).unwrap();
            assert_eq!(v3.status, VerdictStatus::Member);
        }
    }

    #[test]
    fn purity_membership() {
        let v = membership_purity(&Mat::identity(3, 3).scale(1.0 / 3.0), 1e-9).unwrap();
        assert_eq!(v.status, VerdictStatus::Member);
        assert!((v.evidence_value("purity_ratio").unwrap() - 1.0 / 3.0).abs() < 1e-12);

        let coherent = membership_purity(&Mat::from_element(3, 3, 1.0 / 3.0), 1e-9).unwrap();
        assert_eq!(coherent.status, VerdictStatus::Inconclusive);
        assert!((coherent.evidence_value("purity_ratio").unwrap() - 1.0).abs() < 1e-12);

        // family point p = q = 0.3: ratio ((a+b)^2 + 2 b^2) / (3 (a+b)^2)
        let params = ghz_factor_parameters(3, 0.3, 0.3).unwrap();
        let (a, b) = (params.identity_coeff, params.all_ones_coeff);
        let expect = ((a + b) * (a + b) + 2.0 * b * b) / (3.0 * (a + b) * (a + b));
        let v3 = membership_purity(&params.matrix(3), 1e-9).unwrap();
        assert_eq!(v3.status, VerdictStatus::Member);
        assert!((v3.evidence_value("purity_ratio").unwrap() - expect).abs() < 1e-12);

        assert!(matches!(
            membership_purity(&Mat::zeros(3, 3), 1e-9),
            Err(CriteriaError::ZeroTrace(_))
        ));
    }

    #[test]
    fn membership_is_sound_against_comparison() {
        // sufficient conditions must never contradict the necessary one
        let mut rng = sampling::rng(77);
        for _ in 0..50 {
            let p: f64 = rng.random_range(0.0..1.0);
            let q: f64 = rng.random_range(0.0..(1.0 - p));
            let c = ghz_factor(3, p, q);
            let comparison = test_bipartite_comparison(&c, 1e-9);
            let purity = membership_purity(&c, 1e-9).unwrap();
            let lambda = membership_lambda_bound(&c, 2, 1e-9).unwrap();
            if comparison.status == VerdictStatus::Incompatible {
                assert_ne!(purity.status, VerdictStatus::Member, "p={p} q={q}");
                assert_ne!(lambda.status, VerdictStatus::Member, "p={p} q={q}");
            }
        }
    }
}
