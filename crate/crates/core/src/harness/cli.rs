//! `spectrum-share` command line.
//!
//! Exit status: 0 on success, 1 when a solve is infeasible or a checked
//! solution violates a constraint, 2 for invalid configuration, unreadable
//! files or usage errors. Tables go to `--out` (or stdout) only after the
//! whole run succeeded; summaries and node traces go to stderr.
//!
//! Node trace lines are comma-separated:
//! `point,trial,node,parent,depth,bound,incumbent,status` for `intraop` and
//! the same without the first two columns for `solve`. Empty fields mean
//! "none"; bounds are in bits/s/Hz.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{
    run_diversity_sweep, run_interop_sweep, run_intraop_experiment_traced, summarize, write_csv, write_json,
    ExperimentConfig, HarnessError, ResultRow,
};
use crate::intraop::{
    branch_and_bound_with, check_solution, linearize, oracle_exhaustive, BnbOptions, IntraInstance, IntraSolution,
    IntraopError, NodeRecord,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "spectrum-share", version, about = "Shared-spectrum allocation experiments and solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Both sharing schemes over the operator-count sweep.
    Interop(SweepArgs),
    /// Both sharing schemes over the users-per-operator sweep.
    Diversity(SweepArgs),
    /// Oracle and branch-and-bound over the power sweep.
    Intraop {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Print every branch-and-bound node to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Solve one intra-operator instance read from a JSON file.
    Solve {
        /// Instance file.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Solver::Bnb)]
        solver: Solver,
        /// Print every branch-and-bound node to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Validate a solution file written by `solve`.
    Check {
        solution: PathBuf,
        /// Instance file to check against instead of the embedded one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Solver {
    Bnb,
    Oracle,
}

/// What `solve` writes and `check` reads.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolutionFile {
    pub instance: IntraInstance,
    pub solution: IntraSolution,
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

fn dispatch(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Interop(a) => sweep(&a, |cfg| run_interop_sweep(cfg).map(|r| (r, String::new()))),
        Command::Diversity(a) => sweep(&a, |cfg| run_diversity_sweep(cfg).map(|r| (r, String::new()))),
        Command::Intraop { sweep: a, trace } => sweep(&a, |cfg| {
            let (rows, traces) = run_intraop_experiment_traced(cfg)?;
            let mut text = String::new();
            if trace {
                text.push_str("point,trial,node,parent,depth,bound,incumbent,status\n");
                for t in &traces {
                    for n in &t.nodes {
                        let _ = writeln!(text, "{},{},{}", t.point, t.trial, trace_line(n));
                    }
                }
            }
            Ok((rows, text))
        }),
        Command::Solve { config, out, solver, trace } => solve(&config, out.as_deref(), solver, trace),
        Command::Check { solution, config, tol, out } => check(&solution, config.as_deref(), tol, out.as_deref()),
    }
}

fn sweep(
    args: &SweepArgs,
    run: impl Fn(&ExperimentConfig) -> Result<(Vec<ResultRow>, String), HarnessError>,
) -> Result<i32, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    let (rows, trace) = run(&cfg)?;

    let mut buf = Vec::new();
    match args.format {
        Format::Csv => write_csv(&rows, &mut buf)?,
        Format::Json => write_json(&rows, &mut buf)?,
    }
    emit(args.out.as_deref(), &buf)?;
    eprint!("{trace}");
    for s in summarize(&rows) {
        let schemes: Vec<String> = s.schemes.iter().map(|(n, m, c)| format!("{n}={m:.4} (n={c})")).collect();
        eprintln!(
            "point {} ops={} users={} p_dbm={}: {} gap={:.4}±{:.4} failed_rows={}",
            s.point,
            opt(s.operators),
            opt(s.users_per_operator),
            opt(s.p_max_dbm),
            schemes.join(" "),
            s.gap_mean,
            s.gap_se,
            s.failed_rows
        );
    }
    Ok(EXIT_OK)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

fn trace_line(n: &NodeRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        n.node,
        opt(n.parent).replace('-', ""),
        n.depth,
        n.bound.map_or(String::new(), |b| b.to_string()),
        n.incumbent.map_or(String::new(), |b| b.to_string()),
        n.status.as_str()
    )
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(e.to_string());
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(io),
    }
}

/// Reads an instance file: either a bare instance or a solution file.
fn read_instance(path: &Path) -> Result<IntraInstance, HarnessError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    let inner = value.get("instance").cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}

fn solve(path: &Path, out: Option<&Path>, solver: Solver, trace: bool) -> Result<i32, HarnessError> {
    let instance = read_instance(path)?;
    let result = match solver {
        Solver::Oracle => oracle_exhaustive(&instance).map(|s| (s, Vec::new())),
        Solver::Bnb => {
            let opts = BnbOptions { trace, ..BnbOptions::default() };
            branch_and_bound_with(&linearize(&instance), &opts).map(|r| (r.solution, r.trace))
        }
    };
    let (solution, nodes) = match result {
        Ok(r) => r,
        Err(IntraopError::Infeasible) => {
            eprintln!("infeasible");
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(HarnessError::Io(e.to_string())),
    };
    if trace {
        eprintln!("node,parent,depth,bound,incumbent,status");
        for n in &nodes {
            eprintln!("{}", trace_line(n));
        }
    }
    let file = SolutionFile { instance, solution };
    let mut buf = serde_json::to_vec_pretty(&file).map_err(|e| HarnessError::Io(e.to_string()))?;
    buf.push(b'\n');
    emit(out, &buf)?;
    eprintln!("objective {:.9} bits/s/Hz", file.solution.objective_ndc_sum_rate);
    Ok(EXIT_OK)
}

fn check(path: &Path, instance: Option<&Path>, tol: f64, out: Option<&Path>) -> Result<i32, HarnessError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    let solution: IntraSolution = serde_json::from_value(value.get("solution").cloned().unwrap_or(value.clone()))
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    let inst = match instance {
        Some(p) => read_instance(p)?,
        None => {
            let inner = value
                .get("instance")
                .cloned()
                .ok_or_else(|| HarnessError::Parse("solution file has no instance; pass --config".into()))?;
            serde_json::from_value(inner).map_err(|e| HarnessError::Parse(e.to_string()))?
        }
    };
    let report = check_solution(&solution, &inst);
    let mut buf = serde_json::to_vec_pretty(&report).map_err(|e| HarnessError::Io(e.to_string()))?;
    buf.push(b'\n');
    emit(out, &buf)?;
    if report.passes(tol) {
        eprintln!("ok: max residual {:.3e}", report.max_residual());
        Ok(EXIT_OK)
    } else {
        eprintln!("violated: max residual {:.3e}", report.max_residual());
        Ok(EXIT_INFEASIBLE)
    }
}
