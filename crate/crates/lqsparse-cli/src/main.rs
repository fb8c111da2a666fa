//! `lqsparse` command line: solve runs, EOC studies, interpolation studies
//! and the scalar self-test suite.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

mod config;
mod selftest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use lqsparse::eoc::{run_ladder, LadderConfig};
use lqsparse::interp::interp_error_study;
use lqsparse::io;
use lqsparse::ocp::{self, SolveReport};
use lqsparse::{Error, TriMesh};

#[derive(Parser)]
#[command(name = "lqsparse", version, about = "FEM solver for sparse elliptic optimal control")]
struct Cli {
    /// Configuration file (defaults to the built-in example problem).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key by dotted path, e.g. -S problem.alpha=0.3
    /// (repeatable).
    #[arg(long = "set", short = 'S', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Shorthand for -S problem.alpha=..
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Shorthand for -S problem.beta=..
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Shorthand for -S problem.q=..
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Shorthand for -S problem.gamma=..
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Shorthand for -S mesh.n=..
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Shorthand for -S eoc.jobs=..
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Shorthand for -S output.directory=..
    #[arg(long, global = true)]
    out: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the control problem once and write the report artifacts.
    Solve,
    /// Run the refinement-ladder study and write the EOC table.
    Eoc,
    /// Measure quasi-interpolation error rates across a mesh ladder.
    InterpStudy,
    /// Run the scalar property suite.
    Selftest,
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::MeshMismatch(_) | Error::TooFewLevels { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(CliError::Config)?
        }
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(key.trim(), value.trim()).map_err(CliError::Config)?;
    }
    if let Some(v) = cli.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = cli.beta {
        cfg.beta = v;
    }
    if let Some(v) = cli.q {
        cfg.q = v;
    }
    if let Some(v) = cli.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = cli.n {
        cfg.n = v;
    }
    if let Some(v) = cli.jobs {
        cfg.jobs = v.max(1);
    }
    if let Some(v) = &cli.out {
        cfg.directory = Some(v.clone());
    }
    Ok(cfg)
}

/// Output root: configured directory, else `$LQSPARSE_OUT/<kind>`, else
/// `runs/<kind>`.
fn out_dir(cfg: &RunConfig, kind: &str) -> PathBuf {
    match &cfg.directory {
        Some(dir) => PathBuf::from(dir),
        None => {
            let root = std::env::var("LQSPARSE_OUT").unwrap_or_else(|_| "runs".into());
            Path::new(&root).join(kind)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Eoc => cmd_eoc(&cfg),
        Command::InterpStudy => cmd_interp_study(&cfg),
        Command::Selftest => selftest::run().map_err(CliError::Numerical),
    }
}

fn write_solve_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    mesh: &TriMesh,
    report: &SolveReport,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(e.to_string()))?;
    let io_err = |e: std::io::Error| CliError::Numerical(format!("writing artifacts: {e}"));
    std::fs::write(dir.join("manifest.cfg"), cfg.manifest()).map_err(io_err)?;
    if cfg.formats.iter().any(|f| f == "csv") {
        std::fs::write(dir.join("report.csv"), io::report_csv(mesh, report)).map_err(io_err)?;
    }
    if cfg.formats.iter().any(|f| f == "vtk") {
        io::write_vtk(
            &dir.join("fields.vtk"),
            mesh,
            &[("y", &report.y), ("phi", &report.phi)],
            &[
                ("u", &report.u),
                ("w", &report.w),
                ("zeta", &report.zeta),
                ("lambda_a", &report.lambda_a),
                ("lambda_b", &report.lambda_b),
            ],
        )
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    }
    // summary: counters, diagnostics, cost history
    let spec = cfg.problem_spec().map_err(CliError::Config)?;
    let diag = ocp::structure_diagnostics(report, &spec.params);
    let mut summary = String::new();
    summary.push_str(&format!("outer_iterations = {}\n", report.outer_iterations));
    summary.push_str(&format!("total_inner_iterations = {}\n", report.total_inner_iterations));
    summary.push_str(&format!("kkt_residual = {}\n", io::fmt17(report.kkt_residual)));
    summary.push_str(&format!("support_element_count = {}\n", report.support_element_count));
    summary.push_str(&format!("support_fraction = {}\n", io::fmt17(diag.support_fraction)));
    summary.push_str(&format!("band_violation_count = {}\n", diag.band_violation_count));
    if let Some(m) = diag.min_nonzero_abs_u {
        summary.push_str(&format!("min_nonzero_abs_u = {}\n", io::fmt17(m)));
    }
    if let Some(m) = diag.jump_margin {
        summary.push_str(&format!("jump_margin = {}\n", io::fmt17(m)));
    }
    if let Some(m) = diag.lowup_lower_margin {
        summary.push_str(&format!("lowup_lower_margin = {}\n", io::fmt17(m)));
    }
    if let Some(m) = diag.lowup_upper_margin {
        summary.push_str(&format!("lowup_upper_margin = {}\n", io::fmt17(m)));
    }
    summary.push_str("cost_history =");
    for c in &report.cost_history {
        summary.push_str(&format!(" {}", io::fmt17(*c)));
    }
    summary.push('\n');
    std::fs::write(dir.join("summary.txt"), summary).map_err(io_err)?;
    Ok(())
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.problem_spec().map_err(CliError::Config)?;
    let opts = cfg.solve_options().map_err(CliError::Config)?;
    let mesh = TriMesh::uniform_square(cfg.n)?;
    let dir = out_dir(cfg, &format!("solve-n{}-q{}", cfg.n, cfg.q));

    match ocp::solve(&spec, &mesh, &opts) {
        Ok(report) => {
            write_solve_artifacts(&dir, cfg, &mesh, &report)?;
            println!(
                "converged: {} outer / {} inner iterations, kkt residual {:.3e}, support {}/{}",
                report.outer_iterations,
                report.total_inner_iterations,
                report.kkt_residual,
                report.support_element_count,
                mesh.n_triangles()
            );
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Err(Error::OuterNoConvergence { step, kkt, report }) => {
            // keep the partial report for inspection, then fail
            write_solve_artifacts(&dir, cfg, &mesh, &report)?;
            Err(CliError::Numerical(format!(
                "outer loop did not converge (step {step:.3e}, kkt {kkt:.3e}); partial report in {}",
                dir.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_eoc(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg, &format!("eoc-n{}-L{}", cfg.n, cfg.levels));
    let ladder = LadderConfig {
        base_n: cfg.n,
        levels: cfg.levels,
        ref_extra: cfg.ref_extra,
        problem: cfg.problem_spec().map_err(CliError::Config)?,
        options: cfg.solve_options().map_err(CliError::Config)?,
        q_values: cfg.q_values.clone(),
        jobs: cfg.jobs,
        output_dir: Some(dir.clone()),
    };
    let table = run_ladder(&ladder)?;
    std::fs::write(dir.join("manifest.cfg"), cfg.manifest())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    print!("{}", io::eoc_table_human(&table));
    println!("table written to {}", dir.join("eoc_table.csv").display());
    // a row without an error value means its solve failed
    if table.rows.iter().any(|r| r.error_l2.is_none()) {
        return Err(CliError::Numerical("one or more ladder levels failed to solve".into()));
    }
    Ok(())
}

fn cmd_interp_study(cfg: &RunConfig) -> Result<(), CliError> {
    let u = config::parse_func(&cfg.interp_u).map_err(CliError::Config)?;
    let norm = cfg.study_norm().map_err(CliError::Config)?;
    if cfg.interp_base_n == 0 {
        return Err(CliError::Config("interp.base_n must be >= 1".into()));
    }
    let mut meshes = vec![TriMesh::uniform_square(cfg.interp_base_n)?];
    for _ in 1..cfg.interp_levels {
        meshes.push(meshes.last().unwrap().refine_uniform());
    }
    let result = interp_error_study(&meshes, &u, norm)?;
    let dir = out_dir(cfg, &format!("interp-n{}-L{}", cfg.interp_base_n, cfg.interp_levels));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(dir.join("interp_study.csv"), io::interp_study_csv(&result))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(dir.join("manifest.cfg"), cfg.manifest())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    println!(
        "levels {} | fitted exponents: L1 {:.3}, L2 {:.3} | csv in {}",
        result.h.len(),
        result.exp_l1,
        result.exp_l2,
        dir.display()
    );
    Ok(())
}
