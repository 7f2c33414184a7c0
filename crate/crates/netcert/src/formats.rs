//! JSON schemas for every artifact the CLI reads or writes, plus the
//! conversions into core types. Parsing is strict: anything the core
//! constructors reject surfaces as a format error with the file path.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use netcert_core::covariance::BlockMatrix;
use netcert_core::criteria::Verdict;
use netcert_core::distribution::{MeasurementSpec, OutcomeDistribution, SourceSpec};
use netcert_core::feasibility::Certificate;
use netcert_core::linalg::{CMat, Mat};
use netcert_core::topology::{BlockPartition, NetworkTopology};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyFile {
    pub num_nodes: usize,
    pub sources: Vec<Vec<usize>>,
}

impl TopologyFile {
    pub fn to_topology(&self) -> Result<NetworkTopology, FormatError> {
        NetworkTopology::new(self.num_nodes, self.sources.clone())
            .map_err(|e| FormatError::Invalid(format!("topology: {e}")))
    }
}

/// Accepts either the `k-complete:N,k` shorthand or a path to a topology
/// JSON file.
pub fn parse_topology_spec(spec: &str) -> Result<NetworkTopology, FormatError> {
    if let Some(rest) = spec.strip_prefix("k-complete:") {
        let (n, k) = rest
            .split_once(',')
            .ok_or_else(|| FormatError::Invalid(format!("bad topology shorthand {spec:?}")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| FormatError::Invalid(format!("bad topology shorthand {spec:?}")))
        };
        return NetworkTopology::k_complete(parse(n)?, parse(k)?)
            .map_err(|e| FormatError::Invalid(format!("topology: {e}")));
    }
    let file: TopologyFile = read_json(Path::new(spec))?;
    file.to_topology()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionFile {
    pub cardinalities: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl DistributionFile {
    pub fn to_distribution(&self) -> Result<OutcomeDistribution, FormatError> {
        OutcomeDistribution::new(self.cardinalities.clone(), self.probabilities.clone())
            .map_err(|e| FormatError::Invalid(format!("distribution: {e}")))
    }

    pub fn from_distribution(dist: &OutcomeDistribution) -> Self {
        Self {
            cardinalities: dist.cardinalities().to_vec(),
            probabilities: dist.probabilities().to_vec(),
        }
    }
}

/// Row-major complex matrix; each entry is an `[re, im]` pair.
pub type ComplexRows = Vec<Vec<[f64; 2]>>;
/// Row-major real matrix.
pub type RealRows = Vec<Vec<f64>>;

pub fn complex_from_rows(rows: &ComplexRows, what: &str) -> Result<CMat, FormatError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(FormatError::Invalid(format!("{what}: not a rectangular matrix")));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| {
        Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn real_from_rows(rows: &RealRows, what: &str) -> Result<Mat, FormatError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(FormatError::Invalid(format!("{what}: not a rectangular matrix")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn rows_from_real(m: &Mat) -> RealRows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceFile {
    pub nodes: Vec<usize>,
    pub dims: Vec<usize>,
    pub state: ComplexRows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementFile {
    pub node: usize,
    pub effects: Vec<ComplexRows>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub topology: TopologyFile,
    pub sources: Vec<SourceFile>,
    pub measurements: Vec<MeasurementFile>,
}

impl NetworkFile {
    pub fn to_parts(
        &self,
    ) -> Result<(NetworkTopology, Vec<SourceSpec>, Vec<MeasurementSpec>), FormatError> {
        let topology = self.topology.to_topology()?;
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Ok(SourceSpec {
                    nodes: s.nodes.clone(),
                    dims: s.dims.clone(),
                    state: complex_from_rows(&s.state, &format!("source {i} state"))?,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        let measurements = self
            .measurements
            .iter()
            .map(|m| {
                Ok(MeasurementSpec {
                    node: m.node,
                    effects: m
                        .effects
                        .iter()
                        .enumerate()
                        .map(|(x, e)| {
                            complex_from_rows(e, &format!("node {} effect {x}", m.node))
                        })
                        .collect::<Result<Vec<_>, FormatError>>()?,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Ok((topology, sources, measurements))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockMatrixFile {
    pub block_dims: Vec<usize>,
    pub entries: RealRows,
}

impl BlockMatrixFile {
    pub fn to_block_matrix(&self) -> Result<BlockMatrix, FormatError> {
        let partition = BlockPartition::new(self.block_dims.clone())
            .map_err(|e| FormatError::Invalid(format!("block partition: {e}")))?;
        let entries = real_from_rows(&self.entries, "block matrix")?;
        BlockMatrix::new(partition, entries)
            .map_err(|e| FormatError::Invalid(format!("block matrix: {e}")))
    }

    pub fn from_block_matrix(m: &BlockMatrix) -> Self {
        Self {
            block_dims: m.partition().block_dims().to_vec(),
            entries: rows_from_real(m.entries()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub test: String,
    pub k: usize,
    pub status: String,
    pub evidence: BTreeMap<String, f64>,
}

impl VerdictRecord {
    pub fn from_verdict(v: &Verdict) -> Self {
        Self {
            test: v.test.to_string(),
            k: v.k,
            status: v.status.as_str().to_string(),
            evidence: v
                .evidence
                .iter()
                .map(|&(name, value)| (name.to_string(), value))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertificateFile {
    Feasible {
        components: Vec<RealRows>,
        residual: f64,
        iterations: usize,
    },
    Witness {
        matrix: RealRows,
        margin: f64,
    },
    None,
}

impl CertificateFile {
    pub fn from_certificate(certificate: &Option<Certificate>) -> Self {
        match certificate {
            Some(Certificate::Feasible(dec)) => CertificateFile::Feasible {
                components: dec.components.iter().map(rows_from_real).collect(),
                residual: dec.residual,
                iterations: dec.iterations,
            },
            Some(Certificate::Witness(w)) => CertificateFile::Witness {
                matrix: rows_from_real(&w.matrix),
                margin: w.margin,
            },
            None => CertificateFile::None,
        }
    }
}

/// Full output of a `certify` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub verdicts: Vec<VerdictRecord>,
    pub aggregate: String,
    pub warnings: Vec<String>,
    pub certificate: CertificateFile,
}
