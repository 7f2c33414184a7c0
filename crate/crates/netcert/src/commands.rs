//! The four subcommands. Verdict outcomes never map to failure exit
//! codes; only unusable input does.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use netcert_core::covariance::{
    covariance_matrix, dichotomic_factor, singular_diagonal_blocks, BlockMatrix, FeatureMap,
};
use netcert_core::criteria::{
    ghz_threshold, membership_block_comparison, membership_lambda_bound, membership_purity,
    monogamy_test_best_pivot, sign_flip_test, test_bipartite_comparison, witness_test,
    CriteriaError, Verdict, VerdictStatus,
};
use netcert_core::distribution::{simulate_network, OutcomeDistribution};
use netcert_core::feasibility::{certify_with_certificate, Certificate, FeasibilityOptions};
use netcert_core::linalg::Mat;

use crate::formats::{
    parse_topology_spec, read_json, write_json, BlockMatrixFile, CertificateFile,
    DistributionFile, FormatError, NetworkFile, ReportFile, VerdictRecord,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Input(String),
}

fn input<E: std::fmt::Display>(what: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{what}: {e}"))
}

/// Execution order is fixed; a selection only filters it.
pub const TEST_ORDER: [&str; 6] =
    ["comparison", "witness", "monogamy", "signflip", "membership", "feasibility"];

pub fn parse_test_list(
    list: Option<&str>,
    allowed: &[&'static str],
) -> Result<Vec<&'static str>, CliError> {
    let Some(list) = list else {
        return Ok(allowed.to_vec());
    };
    let mut selected: Vec<&'static str> = Vec::new();
    for raw in list.split(',') {
        let name = raw.trim();
        let canonical = allowed
            .iter()
            .find(|t| **t == name)
            .ok_or_else(|| {
                CliError::Input(format!(
                    "unknown test {name:?}; available here: {}",
                    allowed.join(", ")
                ))
            })?;
        if !selected.contains(canonical) {
            selected.push(canonical);
        }
    }
    if selected.is_empty() {
        return Err(CliError::Input("empty test selection".into()));
    }
    Ok(allowed.iter().filter(|t| selected.contains(t)).copied().collect())
}

pub fn cmd_simulate(network: &Path, out: &Path) -> Result<(), CliError> {
    let file: NetworkFile = read_json(network)?;
    let (topology, sources, measurements) = file.to_parts()?;
    let dist = simulate_network(&topology, &sources, &measurements)
        .map_err(input("simulation"))?;
    write_json(out, &DistributionFile::from_distribution(&dist))?;
    println!("wrote {} outcome probabilities to {}", dist.len(), out.display());
    Ok(())
}

pub fn cmd_covariance(dist: &Path, map: FeatureMap, out: &Path) -> Result<(), CliError> {
    let dist = read_json::<DistributionFile>(dist)?.to_distribution()?;
    let cov = covariance_matrix(&dist, map);
    write_json(out, &BlockMatrixFile::from_block_matrix(&cov))?;
    println!(
        "wrote {}x{} covariance ({} blocks) to {}",
        cov.dim(),
        cov.dim(),
        cov.num_blocks(),
        out.display()
    );
    Ok(())
}

pub struct CertifySettings {
    pub tol: f64,
    pub seed: u64,
    pub max_iterations: usize,
}

/// Scalar correlation factor, when one exists: directly for scalar blocks,
/// through the rank-one parity factorization for dichotomic blocks.
fn scalar_factor(cov: &BlockMatrix) -> Option<Mat> {
    let dims = cov.partition().block_dims();
    if dims.iter().all(|&d| d == 1) {
        Some(cov.entries().clone())
    } else if dims.iter().all(|&d| d == 2) {
        dichotomic_factor(cov).ok()
    } else {
        None
    }
}

fn skipped(test: &'static str, k: usize) -> Verdict {
    Verdict::new(test, k, VerdictStatus::Inconclusive, vec![])
}

pub fn cmd_certify(
    dist_path: &Path,
    topology_spec: &str,
    tests: &[&'static str],
    map: FeatureMap,
    settings: &CertifySettings,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let dist = read_json::<DistributionFile>(dist_path)?.to_distribution()?;
    let topology = parse_topology_spec(topology_spec)?;
    if topology.num_nodes() != dist.num_nodes() {
        return Err(CliError::Input(format!(
            "distribution has {} nodes but the topology has {}",
            dist.num_nodes(),
            topology.num_nodes()
        )));
    }
    let cov = covariance_matrix(&dist, map);
    let level = topology.max_source_arity();
    let tol = settings.tol;
    let mut warnings: Vec<String> = Vec::new();
    let singular = singular_diagonal_blocks(&cov, 1e-12);
    if !singular.is_empty() {
        warnings.push(format!(
            "diagonal blocks {singular:?} are singular; block-wise membership tests will refuse them"
        ));
    }

    let factor = scalar_factor(&cov);
    let need_factor = |warnings: &mut Vec<String>, test: &str| {
        warnings.push(format!(
            "{test} skipped: needs a scalar correlation factor (all-binary outcomes or scalar blocks)"
        ));
    };

    let mut verdicts: Vec<Verdict> = Vec::new();
    let mut certificate: Option<Certificate> = None;
    for &test in tests {
        match test {
            "comparison" => match &factor {
                Some(c) => verdicts.push(test_bipartite_comparison(c, tol)),
                None => {
                    need_factor(&mut warnings, "comparison");
                    verdicts.push(skipped("comparison", 2));
                }
            },
            "witness" => match &factor {
                Some(c) => verdicts.push(witness_test(c, level, tol).map_err(input("witness"))?),
                None => {
                    need_factor(&mut warnings, "witness");
                    verdicts.push(skipped("witness", level));
                }
            },
            "monogamy" => match monogamy_test_best_pivot(&cov, level, tol) {
                Ok(v) => verdicts.push(v),
                Err(CriteriaError::ZeroTrace(_)) => {
                    warnings.push("monogamy skipped: covariance trace is zero".into());
                    verdicts.push(skipped("monogamy", level));
                }
                Err(e) => return Err(CliError::Input(format!("monogamy: {e}"))),
            },
            "signflip" => match sign_flip_test(&cov, tol) {
                Ok(v) => verdicts.push(v),
                Err(CriteriaError::TooManyBlocks { blocks, max }) => {
                    warnings.push(format!(
                        "signflip skipped: {blocks} blocks exceed the exhaustive limit {max}"
                    ));
                    verdicts.push(skipped("signflip", 2));
                }
                Err(e) => return Err(CliError::Input(format!("signflip: {e}"))),
            },
            "membership" => {
                match &factor {
                    Some(c) => {
                        verdicts.push(
                            membership_lambda_bound(c, level, tol)
                                .map_err(input("membership_lambda"))?,
                        );
                        verdicts
                            .push(membership_purity(c, tol).map_err(input("membership_purity"))?);
                    }
                    None => {
                        need_factor(&mut warnings, "membership_lambda");
                        verdicts.push(skipped("membership_lambda", level));
                        verdicts.push(skipped("membership_purity", 2));
                    }
                }
                match membership_block_comparison(&cov, tol) {
                    Ok(v) => verdicts.push(v),
                    Err(CriteriaError::SingularDiagonalBlock { block, min_eig }) => {
                        warnings.push(format!(
                            "membership_block_comparison skipped: block {block} is singular (min eigenvalue {min_eig:.3e})"
                        ));
                        verdicts.push(skipped("membership_block_comparison", 2));
                    }
                    Err(e) => {
                        return Err(CliError::Input(format!("membership_block_comparison: {e}")))
                    }
                }
            }
            "feasibility" => {
                let opts = FeasibilityOptions {
                    max_iterations: settings.max_iterations,
                    seed: settings.seed,
                    ..FeasibilityOptions::default()
                };
                let (verdict, cert) = certify_with_certificate(&cov, &topology, &opts)
                    .map_err(input("feasibility"))?;
                verdicts.push(verdict);
                certificate = cert;
            }
            other => unreachable!("unvalidated test name {other}"),
        }
    }

    // a refutation only counts against this topology if its level covers
    // the topology's arity; a membership certificate only counts if its
    // level is within it
    let aggregate = if verdicts.iter().any(|v| v.is_incompatible() && v.k >= level) {
        "INCOMPATIBLE"
    } else if verdicts.iter().any(|v| v.is_member() && v.k <= level) {
        "MEMBER"
    } else {
        "INCONCLUSIVE"
    };

    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    for v in &verdicts {
        let evidence: String = v
            .evidence
            .iter()
            .map(|(name, value)| format!(" {name}={value:.6e}"))
            .collect();
        println!("test={} k={} status={}{}", v.test, v.k, v.status, evidence);
    }
    println!("aggregate: {aggregate}");

    if let Some(out) = out {
        let report = ReportFile {
            verdicts: verdicts.iter().map(VerdictRecord::from_verdict).collect(),
            aggregate: aggregate.to_string(),
            warnings,
            certificate: CertificateFile::from_certificate(&certificate),
        };
        write_json(out, &report)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFamily {
    Ghz2,
    Ghz3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Input(format!("range {text:?} is not start:stop:step")));
        }
        let number = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("range {text:?} has a non-numeric part")))
        };
        let range =
            Self { start: number(parts[0])?, stop: number(parts[1])?, step: number(parts[2])? };
        range.validate()?;
        Ok(range)
    }

    pub fn unit_grid(points: usize) -> Result<Self, CliError> {
        if points < 2 {
            return Err(CliError::Input(format!("grid needs at least 2 points, got {points}")));
        }
        Ok(Self { start: 0.0, stop: 1.0, step: 1.0 / (points - 1) as f64 })
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.step > 0.0) {
            return Err(CliError::Input(format!("range step {} must be positive", self.step)));
        }
        if self.stop < self.start {
            return Err(CliError::Input(format!(
                "range stop {} is below start {}",
                self.stop, self.start
            )));
        }
        if self.stop > self.start && self.step > self.stop - self.start {
            return Err(CliError::Input(format!(
                "range step {} exceeds the range {}..{}",
                self.step, self.start, self.stop
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

pub struct SweepConfig {
    pub family: SweepFamily,
    pub num_nodes: usize,
    pub witness_level: usize,
    pub tests: Vec<&'static str>,
    pub p: Range,
    pub q: Range,
    pub r: Option<Range>,
    pub tol: f64,
    pub format: SweepFormat,
}

struct Cell {
    status: &'static str,
    evidence: f64,
}

fn evidence_of(v: &Verdict, name: &str) -> f64 {
    v.evidence_value(name).unwrap_or(f64::NAN)
}

/// Headline evidence scalar of each sweep test.
fn headline(test: &str) -> &'static str {
    match test {
        "comparison" => "min_eig",
        "witness" => "witness_value",
        "monogamy" => "slack",
        "signflip" => "min_signed_eig",
        other => unreachable!("no headline for {other}"),
    }
}

pub fn cmd_sweep(config: &SweepConfig, out: &Path) -> Result<(), CliError> {
    match config.family {
        SweepFamily::Ghz2 => sweep_ghz2(config, out),
        SweepFamily::Ghz3 => sweep_ghz3(config, out),
    }
}

fn sweep_ghz2(config: &SweepConfig, out: &Path) -> Result<(), CliError> {
    let n = config.num_nodes;
    if n < 3 {
        return Err(CliError::Input(format!("ghz2 sweeps need at least 3 nodes, got {n}")));
    }
    let k = config.witness_level;
    if config.tests.contains(&"witness") && !(2..n).contains(&k) {
        return Err(CliError::Input(format!(
            "witness level {k} out of range for {n} nodes (need 2 <= k < n)"
        )));
    }
    // overlay thresholds, one per level among the selected tests
    let mut levels: Vec<usize> = config
        .tests
        .iter()
        .map(|&t| if t == "witness" { k } else { 2 })
        .collect();
    levels.sort_unstable();
    levels.dedup();

    let mut header: Vec<String> = vec!["p".into(), "q".into()];
    for &test in &config.tests {
        header.push(format!("{test}_status"));
        header.push(format!("{test}_{}", headline(test)));
    }
    for &level in &levels {
        header.push(format!("qstar_k{level}"));
    }

    let points: Vec<(f64, f64)> = config
        .p
        .values()
        .into_iter()
        .flat_map(|p| config.q.values().into_iter().map(move |q| (p, q)))
        .filter(|&(p, q)| p + q <= 1.0 + 1e-12)
        .collect();
    let tol = config.tol;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(p, q)| {
            let dist = OutcomeDistribution::ghz_dichotomic(n, p, q)
                .expect("grid points are filtered to the simplex");
            let cov = covariance_matrix(&dist, FeatureMap::Reduced);
            let factor = cov.entries().clone();
            let mut row: Vec<String> = vec![number(p), number(q)];
            for &test in &config.tests {
                let cell = match test {
                    "comparison" => {
                        let v = test_bipartite_comparison(&factor, tol);
                        Cell { status: v.status.as_str(), evidence: evidence_of(&v, "min_eig") }
                    }
                    "witness" => {
                        let v = witness_test(&factor, k, tol).expect("level validated");
                        Cell {
                            status: v.status.as_str(),
                            evidence: evidence_of(&v, "witness_value"),
                        }
                    }
                    "monogamy" => match monogamy_test_best_pivot(&cov, 2, tol) {
                        Ok(v) => {
                            Cell { status: v.status.as_str(), evidence: evidence_of(&v, "slack") }
                        }
                        Err(_) => Cell { status: "INCONCLUSIVE", evidence: f64::NAN },
                    },
                    "signflip" => {
                        let v = sign_flip_test(&cov, tol).expect("few blocks");
                        Cell {
                            status: v.status.as_str(),
                            evidence: evidence_of(&v, "min_signed_eig"),
                        }
                    }
                    other => unreachable!("unvalidated sweep test {other}"),
                };
                row.push(cell.status.to_string());
                row.push(number(cell.evidence));
            }
            for &level in &levels {
                let qstar = ghz_threshold(n, level, p).expect("level validated");
                row.push(number(qstar));
            }
            row
        })
        .collect();

    write_rows(out, &header, &rows, config.format)
}

fn sweep_ghz3(config: &SweepConfig, out: &Path) -> Result<(), CliError> {
    let r = config
        .r
        .ok_or_else(|| CliError::Input("ghz3 sweeps need an r range (<--r-range> or --grid)".into()))?;
    let mut header: Vec<String> = vec!["p".into(), "q".into(), "r".into()];
    for &test in &config.tests {
        header.push(format!("{test}_status"));
        header.push(format!("{test}_{}", headline(test)));
    }

    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for p in config.p.values() {
        for q in config.q.values() {
            for rv in r.values() {
                if p + q + rv <= 1.0 + 1e-12 {
                    points.push((p, q, rv));
                }
            }
        }
    }
    let tol = config.tol;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(p, q, rv)| {
            let dist = OutcomeDistribution::ghz_three_outcome(p, q, rv)
                .expect("grid points are filtered to the simplex");
            let cov = covariance_matrix(&dist, FeatureMap::Reduced);
            let mut row: Vec<String> = vec![number(p), number(q), number(rv)];
            for &test in &config.tests {
                let cell = match test {
                    "signflip" => {
                        let v = sign_flip_test(&cov, tol).expect("three blocks");
                        Cell {
                            status: v.status.as_str(),
                            evidence: evidence_of(&v, "min_signed_eig"),
                        }
                    }
                    "monogamy" => match monogamy_test_best_pivot(&cov, 2, tol) {
                        Ok(v) => {
                            Cell { status: v.status.as_str(), evidence: evidence_of(&v, "slack") }
                        }
                        Err(_) => Cell { status: "INCONCLUSIVE", evidence: f64::NAN },
                    },
                    other => unreachable!("unvalidated sweep test {other}"),
                };
                row.push(cell.status.to_string());
                row.push(number(cell.evidence));
            }
            row
        })
        .collect();

    write_rows(out, &header, &rows, config.format)
}

/// Full round-trip precision: 17 significant decimal digits.
fn number(value: f64) -> String {
    format!("{value:.16e}")
}

fn write_rows(
    out: &Path,
    header: &[String],
    rows: &[Vec<String>],
    format: SweepFormat,
) -> Result<(), CliError> {
    let mut buffer: Vec<u8> = Vec::new();
    match format {
        SweepFormat::Csv => {
            writeln!(buffer, "{}", header.join(",")).expect("vec write");
            for row in rows {
                writeln!(buffer, "{}", row.join(",")).expect("vec write");
            }
        }
        SweepFormat::Json => {
            let objects: Vec<serde_json::Map<String, serde_json::Value>> = rows
                .iter()
                .map(|row| {
                    header
                        .iter()
                        .zip(row)
                        .map(|(name, cell)| {
                            (name.clone(), serde_json::Value::String(cell.clone()))
                        })
                        .collect()
                })
                .collect();
            serde_json::to_writer_pretty(&mut buffer, &objects).expect("vec write");
            buffer.push(b'\n');
        }
    }
    std::fs::write(out, buffer).map_err(|source| {
        CliError::Format(FormatError::Io { path: out.display().to_string(), source })
    })?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}
