//! Command line front end: turns files into core calls and back.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use netcert::commands::{
    cmd_certify, cmd_covariance, cmd_simulate, cmd_sweep, parse_test_list, CertifySettings,
    CliError, Range, SweepConfig, SweepFamily, SweepFormat, TEST_ORDER,
};
use netcert_core::covariance::FeatureMap;

#[derive(Parser)]
#[command(
    name = "netcert",
    version,
    about = "Covariance-based compatibility certification for network outcome statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Canonical,
    Reduced,
}

impl From<MapArg> for FeatureMap {
    fn from(arg: MapArg) -> Self {
        match arg {
            MapArg::Canonical => FeatureMap::Canonical,
            MapArg::Reduced => FeatureMap::Reduced,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Ghz2,
    Ghz3,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a quantum network model into its exact outcome distribution
    Simulate {
        /// Network JSON: topology, source states, per-node measurements
        #[arg(long)]
        network: PathBuf,
        /// Output distribution JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble the block covariance matrix of a distribution file
    Covariance {
        /// Distribution JSON
        #[arg(long)]
        dist: PathBuf,
        /// Feature map: canonical keeps all outcome indicators, reduced
        /// drops one per node
        #[arg(long, value_enum, default_value_t = MapArg::Canonical)]
        map: MapArg,
        /// Output block matrix JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Run compatibility tests of a distribution against a source topology
    Certify {
        /// Distribution JSON
        #[arg(long)]
        dist: PathBuf,
        /// Topology: `k-complete:N,k` or a path to topology JSON
        #[arg(long)]
        topology: String,
        /// Comma-separated subset of: comparison, witness, monogamy,
        /// signflip, membership, feasibility (default: all, fixed order)
        #[arg(long)]
        tests: Option<String>,
        #[arg(long, value_enum, default_value_t = MapArg::Reduced)]
        map: MapArg,
        /// Verdict tolerance for the analytic tests
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Seed for the feasibility witness search
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Iteration cap for the feasibility solver
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        /// Optional JSON report (verdicts, aggregate, certificate)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate test outcomes for a noise family over a parameter grid
    Sweep {
        /// ghz2: correlated dichotomic family over (p, q);
        /// ghz3: three-outcome family over (p, q, r)
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Node count (ghz2 only)
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Witness level for the witness test (ghz2 only)
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Comma-separated tests; ghz2 allows comparison, witness,
        /// monogamy, signflip (default comparison); ghz3 allows signflip,
        /// monogamy (default signflip)
        #[arg(long)]
        tests: Option<String>,
        /// Uniform grid with this many points per axis over [0, 1]
        #[arg(long)]
        grid: Option<usize>,
        /// Explicit `start:stop:step` ranges, overriding --grid per axis
        #[arg(long)]
        p_range: Option<String>,
        #[arg(long)]
        q_range: Option<String>,
        #[arg(long)]
        r_range: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { network, out } => cmd_simulate(&network, &out),
        Command::Covariance { dist, map, out } => cmd_covariance(&dist, map.into(), &out),
        Command::Certify { dist, topology, tests, map, tol, seed, max_iters, out } => {
            let tests = parse_test_list(tests.as_deref(), &TEST_ORDER)?;
            let settings = CertifySettings { tol, seed, max_iterations: max_iters };
            cmd_certify(&dist, &topology, &tests, map.into(), &settings, out.as_deref())
        }
        Command::Sweep { family, n, k, tests, grid, p_range, q_range, r_range, tol, out, format } => {
            let family = match family {
                FamilyArg::Ghz2 => SweepFamily::Ghz2,
                FamilyArg::Ghz3 => SweepFamily::Ghz3,
            };
            let (allowed, default): (&[&'static str], &str) = match family {
                SweepFamily::Ghz2 => {
                    (&["comparison", "witness", "monogamy", "signflip"], "comparison")
                }
                SweepFamily::Ghz3 => (&["signflip", "monogamy"], "signflip"),
            };
            let tests = parse_test_list(Some(tests.as_deref().unwrap_or(default)), allowed)?;
            let axis = |explicit: &Option<String>| -> Result<Option<Range>, CliError> {
                match (explicit, grid) {
                    (Some(text), _) => Range::parse(text).map(Some),
                    (None, Some(points)) => Range::unit_grid(points).map(Some),
                    (None, None) => Ok(None),
                }
            };
            let missing = |name: &str| {
                CliError::Input(format!("missing {name} range: pass --grid or --{name}-range"))
            };
            let config = SweepConfig {
                family,
                num_nodes: n,
                witness_level: k,
                tests,
                p: axis(&p_range)?.ok_or_else(|| missing("p"))?,
                q: axis(&q_range)?.ok_or_else(|| missing("q"))?,
                r: match family {
                    SweepFamily::Ghz3 => Some(axis(&r_range)?.ok_or_else(|| missing("r"))?),
                    SweepFamily::Ghz2 => None,
                },
                tol,
                format: match format {
                    FormatArg::Csv => SweepFormat::Csv,
                    FormatArg::Json => SweepFormat::Json,
                },
            };
            cmd_sweep(&config, &out)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(2);
    }
}
