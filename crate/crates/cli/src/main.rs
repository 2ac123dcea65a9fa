//! Command-line entry point: root-system inspection, foldings,
//! maximum-principle checks, single solves and scripted experiments.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use toda_lab::experiments::{self, Verdict};
use toda_lab::folding::{extended_affine, fold, sigma0};
use toda_lab::grid::{write_csv, write_tgrd, Field};
use toda_lab::maxprin::{hypothesis_report, MatrixField};
use toda_lab::rootsys::{build_root_system, LieType};
use toda_lab::toda::{newton_solve, Mode};
use toda_lab::Error;

const EXIT_SCHEMA: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(
    name = "todalab",
    about = "Root systems, Dynkin foldings and discrete Toda-type elliptic systems",
    after_help = "Exit codes:\n  0  success / all verdicts pass\n  1  I/O or internal error\n  2  configuration or schema error (including rejected hypotheses)\n  3  solver non-convergence\n  4  verdict or invariant failure"
)]
struct Cli {
    /// Worker threads for data-parallel field operations (1 = reproducible default).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Root system data and invariant checks.
    Root {
        #[command(subcommand)]
        action: RootAction,
    },
    /// Extended diagram, folded system, kernels and the node-orbit map.
    Fold { lie_type: String, rank: usize },
    /// Maximum-principle hypothesis checks on a matrix-field file.
    Mp {
        #[command(subcommand)]
        action: MpAction,
    },
    /// Assemble and solve a single problem from a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scripted experiments emitting verdict JSON plus field dumps.
    Exp {
        #[command(subcommand)]
        kind: ExpKind,
    },
}

#[derive(Subcommand)]
enum RootAction {
    /// Print the full root-system document as JSON.
    Info { lie_type: String, rank: usize },
    /// Run every structural invariant; exit 0/1.
    Check { lie_type: String, rank: usize },
}

#[derive(Subcommand)]
enum MpAction {
    /// Cooperative / column-dominance / full-coupledness verdicts, and the
    /// subset-graph hypotheses when --nu and --k are given.
    Check {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_delimiter = ',')]
        nu: Option<Vec<f64>>,
        #[arg(long)]
        k: Option<f64>,
    },
}

#[derive(Subcommand)]
enum ExpKind {
    /// Pointwise energy monotonicity in the scale parameter.
    Monotonicity(ExpArgs),
    /// Ordering chain of the path systems.
    Order(ExpArgs),
    /// Curvature-sign checks (path and prong diagrams).
    Curvature(ExpArgs),
    /// Folded-vs-unfolded solve agreement.
    Fold(ExpArgs),
    /// Small-scale limit sweep with the polystability gate.
    Limit(ExpArgs),
}

#[derive(clap::Args)]
struct ExpArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

#[cfg(feature = "parallel")]
fn init_threads(threads: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_threads: usize) {}

fn classify(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<Error>() {
        return match core {
            Error::SolverFailure { .. } | Error::ContinuationFailure { .. } => EXIT_SOLVER,
            Error::InvalidType(..)
            | Error::NotAffine(_)
            | Error::NotAutomorphism(_)
            | Error::FoldingOutOfScope(..)
            | Error::Incompatible(_)
            | Error::Hypothesis(_)
            | Error::Grid(_)
            | Error::Json(_) => EXIT_SCHEMA,
            Error::Io(_) => 1,
        };
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return EXIT_SCHEMA;
    }
    for cause in err.chain() {
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_SCHEMA;
        }
        if let Some(core) = cause.downcast_ref::<Error>() {
            return classify(&anyhow::anyhow!(core.to_string()));
        }
    }
    if err.to_string().contains("parsing config") || err.to_string().contains("out of range") {
        return EXIT_SCHEMA;
    }
    1
}

fn parse_type(s: &str) -> Result<LieType> {
    s.parse::<LieType>().map_err(|e| anyhow::anyhow!(e))
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Root { action } => match action {
            RootAction::Info { lie_type, rank } => {
                let rs = build_root_system(parse_type(&lie_type)?, rank)?;
                println!("{}", serde_json::to_string_pretty(&rs.to_json())?);
                Ok(ExitCode::SUCCESS)
            }
            RootAction::Check { lie_type, rank } => {
                let rs = build_root_system(parse_type(&lie_type)?, rank)?;
                match rs.check_invariants() {
                    Ok(()) => {
                        println!("{}", json!({"ok": true, "lie_type": lie_type, "rank": rank}));
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(msg) => {
                        println!("{}", json!({"ok": false, "violation": msg}));
                        Ok(ExitCode::FAILURE)
                    }
                }
            }
        },
        Command::Fold { lie_type, rank } => {
            let rs = build_root_system(parse_type(&lie_type)?, rank)?;
            let ext = extended_affine(&rs);
            let inv = sigma0(rs.lie_type, rs.rank)?;
            let folded = fold(&ext, &inv)?;
            let doc = json!({
                "extended": ext.to_json(),
                "sigma0": inv.perm,
                "folded": folded.to_json(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Mp { action: MpAction::Check { matrix, nu, k } } => {
            let field = read_matrix_field(&matrix)?;
            let report = hypothesis_report(&field, nu.as_deref(), k);
            println!("{}", serde_json::to_string_pretty(&report)?);
            let ok = report["cooperative"]["verdict"] == "ok"
                && report["column_diagonally_dominant"]["verdict"] == "ok"
                && report["fully_coupled"]["verdict"] == "ok"
                && report["subset_graph"]
                    .as_object()
                    .map_or(true, |g| g["ok"] == true);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_VERDICT) })
        }
        Command::Solve { config, out } => {
            let cfg = config::load(&config)?;
            let mode = cfg.mode(cfg.default_mode())?;
            let problem = cfg.build_problem(mode)?;
            let sol = newton_solve(&problem, None, cfg.solver.tol, cfg.solver.max_iter)
                .map_err(Error::from)?;
            // Flatness constraint Σ w_α u_α = 0 holds by construction;
            // report its sup as an invariant check.
            let mut flat = Field::constant(problem.grid.n, 0.0);
            for (w, u) in problem.weights.iter().zip(&sol.u) {
                flat.axpy(*w, u);
            }
            let summary = json!({
                "description": cfg.description,
                "mode": mode,
                "labels": problem.labels,
                "t": sol.t,
                "iterations": sol.iterations,
                "residual_sup": sol.residual_sup,
                "residual_per_node": sol.residual_per_node,
                "invariants": {
                    "flatness_constraint_sup": flat.sup_norm(),
                    "energies_positive": sol.e.iter().all(|f| f.min() > 0.0),
                },
                "kappa": problem.kappa.at(0, 0),
                "c": problem.c,
                "weights": problem.weights,
                "seed": cfg.seed,
                "threads_hint": cfg.threads,
            });
            if let Some(dir) = out {
                let mut fields: Vec<(String, Field)> = Vec::new();
                for (a, label) in problem.labels.iter().enumerate() {
                    fields.push((format!("u_{label}"), sol.u[a].clone()));
                    fields.push((format!("e_{label}"), sol.e[a].clone()));
                }
                write_outputs(&dir, &problem.grid, &summary, &fields)?;
            }
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Exp { kind } => run_experiment(kind),
    }
}

fn run_experiment(kind: ExpKind) -> Result<ExitCode> {
    let (args, verdict) = match kind {
        ExpKind::Monotonicity(args) => {
            let cfg = config::load(&args.config)?;
            let mode = cfg.mode(cfg.default_mode())?;
            let problem = cfg.build_problem(mode)?;
            let ladder = cfg
                .experiment
                .t_ladder
                .clone()
                .unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
            let v = experiments::monotonicity_experiment(&problem, &ladder, &cfg.solve_params())?;
            (ArgsAndGrid { args, grid: problem.grid.clone(), cfg }, v)
        }
        ExpKind::Order(args) => {
            let cfg = config::load(&args.config)?;
            let problem = cfg.build_problem(Mode::Lemma66)?;
            let v = experiments::ordering_experiment(&problem, &cfg.solve_params())?;
            (ArgsAndGrid { args, grid: problem.grid.clone(), cfg }, v)
        }
        ExpKind::Curvature(args) => {
            let cfg = config::load(&args.config)?;
            let mode = cfg.mode(cfg.default_mode())?;
            let problem = cfg.build_problem(mode)?;
            let v = experiments::curvature_experiment(&problem, &cfg.solve_params())?;
            (ArgsAndGrid { args, grid: problem.grid.clone(), cfg }, v)
        }
        ExpKind::Fold(args) => {
            let cfg = config::load(&args.config)?;
            let rs = cfg.root_system()?;
            let grid = cfg.torus()?;
            let divisors = cfg.divisor_vec(rs.ext_size())?;
            let v = experiments::folding_consistency_experiment(
                &rs,
                &grid,
                divisors,
                cfg.t,
                &cfg.solve_params(),
            )?;
            (ArgsAndGrid { args, grid, cfg }, v)
        }
        ExpKind::Limit(args) => {
            let cfg = config::load(&args.config)?;
            let mode = cfg.mode(cfg.default_mode())?;
            let problem = cfg.build_problem(mode)?;
            let ladder = cfg
                .experiment
                .eps_ladder
                .clone()
                .unwrap_or_else(|| vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
            let v = experiments::limit_experiment(
                &problem,
                &ladder,
                cfg.experiment.genus.unwrap_or(2),
                cfg.experiment.cauchy_tol.unwrap_or(1e-3),
                &cfg.solve_params(),
            )?;
            (ArgsAndGrid { args, grid: problem.grid.clone(), cfg }, v)
        }
    };
    let mut verdict = verdict;
    if let Some(dir) = &args.args.out {
        let summary = serde_json::to_value(&verdict)?;
        let paths = write_outputs(dir, &args.grid, &summary, &verdict.fields)?;
        verdict.artifacts = paths;
        // Rewrite the summary with artifact paths included.
        let summary = serde_json::to_value(&verdict)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    println!("{}", serde_json::to_string_pretty(&serde_json::to_value(&verdict)?)?);
    if verdict.pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VERDICT))
    }
}

struct ArgsAndGrid {
    args: ExpArgs,
    grid: toda_lab::grid::TorusGrid,
    #[allow(dead_code)]
    cfg: config::RunConfig,
}

/// Output layout: `summary.json`, `fields/<name>.tgrd`, `fields/<name>.csv`.
fn write_outputs(
    dir: &Path,
    grid: &toda_lab::grid::TorusGrid,
    summary: &serde_json::Value,
    fields: &[(String, Field)],
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir.join("fields"))
        .with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    let mut paths = vec!["summary.json".to_string()];
    for (name, field) in fields {
        let tgrd = dir.join("fields").join(format!("{name}.tgrd"));
        write_tgrd(&tgrd, &[field])?;
        let csv = dir.join("fields").join(format!("{name}.csv"));
        write_csv(&csv, grid, &[(name, field)])?;
        paths.push(format!("fields/{name}.tgrd"));
        paths.push(format!("fields/{name}.csv"));
    }
    Ok(paths)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    n: usize,
    /// Single constant sample as a nested matrix.
    matrix: Option<Vec<Vec<f64>>>,
    /// Or many samples, each a row-major flat n*n array.
    samples: Option<Vec<Vec<f64>>>,
}

fn read_matrix_field(path: &Path) -> Result<MatrixField> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading matrix file {}", path.display()))?;
    let file: MatrixFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing matrix file {}", path.display()))?;
    match (file.matrix, file.samples) {
        (Some(m), None) => {
            if m.len() != file.n || m.iter().any(|r| r.len() != file.n) {
                bail!("matrix shape does not match n = {}", file.n);
            }
            Ok(MatrixField::constant(m))
        }
        (None, Some(samples)) => {
            if samples.iter().any(|s| s.len() != file.n * file.n) {
                bail!("each sample must have n*n = {} entries", file.n * file.n);
            }
            Ok(MatrixField { n: file.n, samples })
        }
        _ => bail!("matrix file needs exactly one of \"matrix\" or \"samples\""),
    }
}

// Verdict re-export used by integration tests.
#[allow(unused_imports)]
use Verdict as _VerdictForTests;
