//! Command-line front end: validate tree models, compute bound tables and
//! conditionally-independent probabilities, run the band experiments, sweep
//! order-statistic grids, and query the exponential oracle on small
//! instances. Output is CSV (full precision, byte-deterministic under a fixed
//! seed) or a 4-decimal table.
//!
//! Exit codes: 0 ok, 1 usage or I/O or parse error, 2 invalid/infeasible
//! model, 3 size cap, 4 internal invariant breach.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use treebound::bounds::{
    band_nesting_ok, bound_table, univariate_lower, univariate_upper, BoundsError, Direction,
};
use treebound::ci::ci_tail;
use treebound::gen::experiment_bands;
use treebound::lp::{LpError, SolveStatus, SolverConfig};
use treebound::oracle::{oracle_bound, GeneralMarginalModel, OracleError, OracleObjective};
use treebound::orderstats::{grid_from_json_str, sweep_with, CdfGrid, CopulaKind};
use treebound::tree::{self, topology_from_json_str, TreeJsonError, TreeModel};

const EXIT_USAGE_IO: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_SIZE_CAP: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "treebound",
    version,
    about = "Tail-probability bounds for sums of \
dependent Bernoulli variables with bivariate information on a tree"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Base seed for experiment generation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Solver feasibility tolerance override.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Dir {
    Upper,
    Lower,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Direction {
        match d {
            Dir::Upper => Direction::Upper,
            Dir::Lower => Direction::Lower,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model file: structure, probability ranges, Fréchet slacks.
    Validate { model: PathBuf },
    /// Bound table (k, U, L, P_ci, U_uv, L_uv) over a threshold range.
    Bound {
        model: PathBuf,
        /// Threshold or inclusive range, e.g. "2" or "1..4". Default 1..n.
        #[arg(long)]
        k: Option<String>,
    },
    /// Conditionally independent tail probabilities (k, p_ci).
    Ci {
        model: PathBuf,
        #[arg(long)]
        k: Option<String>,
    },
    /// Bounds from univariate information alone (k, U_uv, L_uv).
    Univariate {
        model: PathBuf,
        #[arg(long)]
        k: Option<String>,
    },
    /// Exact bound from the exponential LP (n <= 20; graph may have cycles).
    Oracle {
        model: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Dir::Upper)]
        direction: Dir,
    },
    /// Random-tree band experiment: (run, k, U, U_uv, P_ci).
    ExperimentBands {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        runs: usize,
        /// independence | comonotone | anti-comonotone
        #[arg(long)]
        copula: String,
    },
    /// Order-statistic CDF bands over a grid: (x, U, L, CI, U_uv, L_uv).
    Orderstats {
        /// Topology JSON (root, nodes, edges without probabilities).
        #[arg(long)]
        topology: PathBuf,
        /// CDF grid JSON with marginals and bivariates (or a copula).
        #[arg(long, conflicts_with_all = ["gaussian_means", "x_range"])]
        grid: Option<PathBuf>,
        /// Comma-separated Gaussian means, one per node, to generate a grid.
        #[arg(long, allow_hyphen_values = true)]
        gaussian_means: Option<String>,
        /// Common standard deviation for generated Gaussian marginals.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Copula for generated bivariates.
        #[arg(long)]
        copula: Option<String>,
        /// Grid for generated marginals, "start:end:step", e.g. "-3:3:0.1".
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        #[arg(long)]
        k: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE_IO,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.global.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if cli.global.jobs.is_some() {
        eprintln!("note: built without the parallel feature; --jobs ignored");
    }

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn solver_config(global: &Global) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(tol) = global.tolerance {
        cfg.feas_tol = tol;
    }
    cfg
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE_IO, format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<TreeModel, Failure> {
    let text = read_file(path)?;
    tree::from_json_str(&text).map_err(|e| match e {
        TreeJsonError::Parse(p) => Failure::new(EXIT_USAGE_IO, format!("parse error: {p}")),
        TreeJsonError::Tree(t) => Failure::new(EXIT_INVALID, t.to_string()),
    })
}

fn bounds_failure(e: BoundsError) -> Failure {
    match e {
        BoundsError::Solver(LpError::NumericalFailure(msg)) => {
            Failure::new(EXIT_INVARIANT, format!("solver failure: {msg}"))
        }
        other => Failure::new(EXIT_INVARIANT, other.to_string()),
    }
}

/// Parses "3" or "1..5" (inclusive).
fn parse_k_range(spec: Option<&str>, n: usize) -> Result<Vec<usize>, Failure> {
    let Some(spec) = spec else {
        return Ok((1..=n).collect());
    };
    let bad = || Failure::new(EXIT_USAGE_IO, format!("bad k range '{spec}'"));
    if let Some((a, b)) = spec.split_once("..") {
        let lo: usize = a.trim().parse().map_err(|_| bad())?;
        let hi: usize = b.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok((lo..=hi).collect())
    } else {
        Ok(vec![spec.trim().parse().map_err(|_| bad())?])
    }
}

/// Parses "start:end:step" into an inclusive grid.
fn parse_x_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::new(EXIT_USAGE_IO, format!("bad x range '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let step: f64 = parts[2].trim().parse().map_err(|_| bad())?;
    if step.is_nan() || step <= 0.0 || b < a {
        return Err(bad());
    }
    let count = ((b - a) / step).round() as usize + 1;
    if count > 1_000_000 {
        return Err(Failure::new(
            EXIT_USAGE_IO,
            format!("x range '{spec}' would produce {count} grid points"),
        ));
    }
    Ok((0..count).map(|i| a + step * i as f64).collect())
}

/// Rows of named f64 columns rendered as CSV (full precision) or a table
/// (4 decimals, matching the usual report formatting).
struct TableOut {
    header: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl TableOut {
    fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                let _ = writeln!(s, "{}", self.header.join(","));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
            }
            Format::Table => {
                let width = 10usize;
                for h in &self.header {
                    let _ = write!(s, "{h:>width$}");
                }
                let _ = writeln!(s);
                for row in &self.rows {
                    for v in row {
                        if v.fract() == 0.0 && v.abs() < 1e9 {
                            let _ = write!(s, "{:>width$}", *v as i64);
                        } else {
                            let _ = write!(s, "{v:>width$.4}");
                        }
                    }
                    let _ = writeln!(s);
                }
            }
        }
        s
    }
}

fn emit(global: &Global, text: &str) -> Result<(), Failure> {
    match &global.output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_USAGE_IO, format!("{}: {e}", path.display()))),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = solver_config(&cli.global);
    match &cli.cmd {
        Cmd::Validate { model } => {
            let t = load_model(model)?;
            let report = t.validate_marginals();
            emit(&cli.global, &report.to_string())?;
            if report.ok {
                Ok(())
            } else {
                Err(Failure::new(EXIT_INVALID, "Fréchet violation"))
            }
        }

        Cmd::Bound { model, k } => {
            let t = load_model(model)?;
            let ks = parse_k_range(k.as_deref(), t.n())?;
            let rows = bound_table(&t, &ks, &cfg).map_err(bounds_failure)?;
            for r in &rows {
                if !band_nesting_ok(r.uv_lower, r.lower, r.ci, r.upper, r.uv_upper, 1e-7) {
                    return Err(Failure::new(
                        EXIT_INVARIANT,
                        format!(
                            "band nesting violated at k={}: {} {} {} {} {}",
                            r.k, r.uv_lower, r.lower, r.ci, r.upper, r.uv_upper
                        ),
                    ));
                }
            }
            let out = TableOut {
                header: vec!["k", "U", "L", "P_ci", "U_uv", "L_uv"],
                rows: rows
                    .iter()
                    .map(|r| vec![r.k as f64, r.upper, r.lower, r.ci, r.uv_upper, r.uv_lower])
                    .collect(),
            };
            emit(&cli.global, &out.render(cli.global.format))
        }

        Cmd::Ci { model, k } => {
            let t = load_model(model)?;
            let ks = parse_k_range(k.as_deref(), t.n())?;
            let mut rows = Vec::new();
            for &k in &ks {
                let v = ci_tail(&t, k).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
                rows.push(vec![k as f64, v]);
            }
            let out = TableOut {
                header: vec!["k", "p_ci"],
                rows,
            };
            emit(&cli.global, &out.render(cli.global.format))
        }

        Cmd::Univariate { model, k } => {
            // Only the node marginals are needed; edges are parsed but unused.
            let text = read_file(model)?;
            let doc: tree::TreeJson = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_USAGE_IO, format!("parse error: {e}")))?;
            let p: Vec<f64> = doc.nodes.iter().map(|nd| nd.p).collect();
            let ks = parse_k_range(k.as_deref(), p.len())?;
            let rows = ks
                .iter()
                .map(|&k| vec![k as f64, univariate_upper(&p, k), univariate_lower(&p, k)])
                .collect();
            let out = TableOut {
                header: vec!["k", "U_uv", "L_uv"],
                rows,
            };
            emit(&cli.global, &out.render(cli.global.format))
        }

        Cmd::Oracle {
            model,
            k,
            direction,
        } => {
            let text = read_file(model)?;
            let doc: GeneralJson = serde_json::from_str(&text)
                .map_err(|e| Failure::new(EXIT_USAGE_IO, format!("parse error: {e}")))?;
            let nodes: Vec<(i64, f64)> = doc.nodes.iter().map(|nd| (nd.id, nd.p)).collect();
            let edges: Vec<(i64, i64, f64)> = doc
                .edges
                .iter()
                .map(|e| (e.parent, e.child, e.p11))
                .collect();
            let m = GeneralMarginalModel::new(&nodes, &edges)
                .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
            let out = oracle_bound(
                &m,
                &OracleObjective::Tail {
                    k: *k,
                    direction: (*direction).into(),
                },
            )
            .map_err(|e| match e {
                OracleError::SizeCap { n } => {
                    Failure::new(EXIT_SIZE_CAP, format!("n = {n} exceeds the oracle cap"))
                }
                other => Failure::new(EXIT_INVARIANT, other.to_string()),
            })?;
            match out.status {
                SolveStatus::Optimal => emit(&cli.global, &format!("{}\n", out.value)),
                _ => {
                    emit(&cli.global, "INFEASIBLE\n")?;
                    Err(Failure::new(
                        EXIT_INVALID,
                        "no joint distribution matches the given marginals",
                    ))
                }
            }
        }

        Cmd::ExperimentBands { n, runs, copula } => {
            let kind = CopulaKind::parse(copula)
                .ok_or_else(|| Failure::new(EXIT_USAGE_IO, format!("unknown copula '{copula}'")))?;
            if *n < 2 || *runs < 1 {
                return Err(Failure::new(EXIT_USAGE_IO, "need n >= 2 and runs >= 1"));
            }
            let rows =
                experiment_bands(*n, *runs, cli.global.seed, kind, &cfg).map_err(bounds_failure)?;
            let out = TableOut {
                header: vec!["run", "k", "U", "U_uv", "P_ci"],
                rows: rows
                    .iter()
                    .map(|r| vec![r.run as f64, r.k as f64, r.upper, r.uv_upper, r.ci])
                    .collect(),
            };
            emit(&cli.global, &out.render(cli.global.format))
        }

        Cmd::Orderstats {
            topology,
            grid,
            gaussian_means,
            sigma,
            copula,
            x_range,
            k,
        } => {
            let topo_text = read_file(topology)?;
            let topo = topology_from_json_str(&topo_text).map_err(|e| match e {
                TreeJsonError::Parse(p) => Failure::new(EXIT_USAGE_IO, format!("parse error: {p}")),
                TreeJsonError::Tree(t) => Failure::new(EXIT_INVALID, t.to_string()),
            })?;
            let grid: CdfGrid = match (grid, gaussian_means) {
                (Some(path), None) => {
                    let text = read_file(path)?;
                    grid_from_json_str(&text, &topo)
                        .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?
                }
                (None, Some(means_spec)) => {
                    let means: Result<Vec<f64>, _> = means_spec
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect();
                    let means = means
                        .map_err(|_| Failure::new(EXIT_USAGE_IO, "bad --gaussian-means list"))?;
                    let xs = parse_x_range(x_range.as_deref().ok_or_else(|| {
                        Failure::new(EXIT_USAGE_IO, "--x-range required with --gaussian-means")
                    })?)?;
                    let kind = copula
                        .as_deref()
                        .map(|c| {
                            CopulaKind::parse(c).ok_or_else(|| {
                                Failure::new(EXIT_USAGE_IO, format!("unknown copula '{c}'"))
                            })
                        })
                        .transpose()?
                        .unwrap_or(CopulaKind::Independence);
                    CdfGrid::gaussian(&topo, &means, *sigma, xs, kind)
                        .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?
                }
                _ => {
                    return Err(Failure::new(
                        EXIT_USAGE_IO,
                        "give exactly one of --grid or --gaussian-means",
                    ))
                }
            };
            let curves = sweep_with(&topo, &grid, *k, &cfg)
                .map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
            for p in &curves.points {
                if !band_nesting_ok(p.uv_lower, p.lower, p.ci, p.upper, p.uv_upper, 1e-7) {
                    return Err(Failure::new(
                        EXIT_INVARIANT,
                        format!("band nesting violated at x = {}", p.x),
                    ));
                }
            }
            let out = TableOut {
                header: vec!["x", "U", "L", "CI", "U_uv", "L_uv"],
                rows: curves
                    .points
                    .iter()
                    .map(|p| vec![p.x, p.upper, p.lower, p.ci, p.uv_upper, p.uv_lower])
                    .collect(),
            };
            emit(&cli.global, &out.render(cli.global.format))
        }
    }
}

/// Like the tree JSON but the root is optional and the edge set may contain
/// cycles; used only by the oracle subcommand.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneralJson {
    #[allow(dead_code)]
    #[serde(default)]
    root: Option<i64>,
    nodes: Vec<tree::NodeJson>,
    edges: Vec<tree::EdgeJson>,
}
