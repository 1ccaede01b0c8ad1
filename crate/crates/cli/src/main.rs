mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use treepoisson::krylov::IterSettings;
use treepoisson::mesh::{generate_structured_square, read_triangle_files};
use treepoisson::pipeline::{solve_poisson_with, PipelineOptions};
use treepoisson::quadrature;
use treepoisson::treesolve::DEFAULT_COMPATIBILITY_TOL;
use treepoisson::{oracle, ProblemSpec, SolveReport, SolverChoice, TriMesh};

use config::ProblemFile;

#[derive(Parser)]
#[command(name = "treepoisson", version, about = "Neumann Poisson solver on triangular meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write potential, field, VTK and report files.
    Solve(SolveArgs),
    /// Error table against the analytic solution on refined squares.
    Convergence(ConvergenceArgs),
    /// Stage timings across mesh levels, against FEM with CG.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Loop-projection solver.
    #[arg(long, default_value = "cg")]
    solver: SolverChoice,
    /// Relative residual tolerance of the iterative solve.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// GMRES restart length.
    #[arg(long, default_value_t = 60)]
    restart: usize,
}

impl SolverArgs {
    fn settings(&self) -> IterSettings {
        IterSettings { tolerance: self.tol, restart: self.restart, ..Default::default() }
    }
}

#[derive(Args)]
#[group(id = "domain", required = true, multiple = false)]
struct MeshArgs {
    /// Triangle mesh prefix; reads <PREFIX>.node and <PREFIX>.ele.
    #[arg(long, group = "domain")]
    mesh: Option<PathBuf>,
    /// Structured n × n unit square.
    #[arg(long, group = "domain")]
    square: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    /// JSON problem file. Defaults to the built-in cosine test problem.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    levels: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    levels: Vec<usize>,
    /// Runs per level; the fastest is reported.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    mesh: String,
    max_iterations: usize,
    #[serde(flatten)]
    report: &'a SolveReport,
}

fn square(n: usize) -> Result<TriMesh> {
    Ok(generate_structured_square(n)?)
}

fn options(args: &SolverArgs, compatibility_tol: Option<f64>) -> PipelineOptions {
    PipelineOptions {
        settings: args.settings(),
        solver: args.solver,
        compatibility_tol: compatibility_tol.unwrap_or(DEFAULT_COMPATIBILITY_TOL),
        ..Default::default()
    }
}

fn solve(args: &SolveArgs) -> Result<()> {
    let (mesh, description) = match (&args.mesh.mesh, args.mesh.square) {
        (Some(prefix), _) => (
            read_triangle_files(prefix).with_context(|| format!("cannot load mesh {}", prefix.display()))?,
            prefix.display().to_string(),
        ),
        (None, Some(n)) => (square(n)?, format!("square {n}")),
        (None, None) => unreachable!("clap enforces a mesh source"),
    };
    let (spec, compatibility_tol) = match &args.config {
        Some(path) => {
            let file = ProblemFile::read(path)?;
            (file.to_spec()?, file.compatibility_tol)
        }
        None => (oracle::analytic_case().spec, None),
    };
    let opts = options(&args.solver, compatibility_tol);
    let sol = solve_poisson_with(&mesh, &spec, &opts)?;
    let report = RunReport { mesh: description, max_iterations: opts.settings.max_iterations, report: &sol.report };
    output::write_solution(&args.out, &sol, &report)?;
    eprintln!(
        "{} patches, {} loops: {} {} iterations, {:.3e} s; wrote {}",
        sol.report.num_patches,
        sol.report.num_loops,
        sol.report.projection_iterations,
        sol.report.solver,
        sol.report.timings.total,
        args.out.display()
    );
    Ok(())
}

/// Max-norm and L2 error of the piecewise-constant potential.
fn pulse_errors(mesh: &TriMesh, nu: &[f64], exact: fn(f64, f64) -> f64) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut l2 = 0.0;
    for (t, &v) in nu.iter().enumerate() {
        let corners = mesh.corners(t);
        for p in corners.iter().chain([mesh.centroid(t)].iter()) {
            max = max.max((v - exact(p[0], p[1])).abs());
        }
        l2 += quadrature::integrate(&corners, mesh.area(t), |p| (v - exact(p[0], p[1])).powi(2));
    }
    (max, l2.sqrt())
}

fn convergence(args: &ConvergenceArgs) -> Result<()> {
    let case = oracle::analytic_case();
    let opts = options(&args.solver, None);
    let mut table = String::from("n,patches,max_error,l2_error,order\n");
    let mut previous: Option<(usize, f64)> = None;
    for &n in &args.levels {
        let mesh = square(n)?;
        let sol = solve_poisson_with(&mesh, &case.spec, &opts)?;
        let (max, l2) = pulse_errors(&mesh, &sol.potential.values, case.exact);
        let order = previous
            .map(|(m, e)| format!("{:.4}", (e / max).ln() / (n as f64 / m as f64).ln()))
            .unwrap_or_default();
        table.push_str(&format!("{n},{},{max:.6e},{l2:.6e},{order}\n", sol.report.num_patches));
        previous = Some((n, max));
    }
    output::emit(args.out.as_deref(), &table)
}

#[derive(Clone, Copy)]
struct BenchRow {
    stage1: f64,
    removal: f64,
    stage2: f64,
    total: f64,
    fem: f64,
}

impl BenchRow {
    fn min(self, o: Self) -> Self {
        Self {
            stage1: self.stage1.min(o.stage1),
            removal: self.removal.min(o.removal),
            stage2: self.stage2.min(o.stage2),
            total: self.total.min(o.total),
            fem: self.fem.min(o.fem),
        }
    }
}

fn bench_level(n: usize, spec: &ProblemSpec, opts: &PipelineOptions) -> Result<(usize, usize, BenchRow)> {
    let mesh = square(n)?;
    let sol = solve_poisson_with(&mesh, spec, opts)?;
    let t = &sol.report.timings;
    let start = Instant::now();
    oracle::fem_cg_solve(&mesh, spec, &opts.settings)?;
    let fem = start.elapsed().as_secs_f64();
    let row = BenchRow { stage1: t.stage1, removal: t.removal, stage2: t.stage2, total: t.total, fem };
    Ok((sol.report.num_patches, sol.report.projection_iterations, row))
}

fn bench(args: &BenchArgs) -> Result<()> {
    anyhow::ensure!(args.reps > 0, "--reps must be at least 1");
    let spec = oracle::analytic_case().spec;
    let opts = options(&args.solver, None);
    let mut table = String::from("patches,stage1,removal,iterations,stage2,total,fem_cg\n");
    for &n in &args.levels {
        let (patches, iterations, mut best) = bench_level(n, &spec, &opts)?;
        for _ in 1..args.reps {
            best = best.min(bench_level(n, &spec, &opts)?.2);
        }
        table.push_str(&format!(
            "{patches},{:.6e},{:.6e},{iterations},{:.6e},{:.6e},{:.6e}\n",
            best.stage1, best.removal, best.stage2, best.total, best.fem
        ));
    }
    output::emit(args.out.as_deref(), &table)
}

fn is_io_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<std::io::Error>() || matches!(e.downcast_ref::<treepoisson::Error>(), Some(treepoisson::Error::Io(_)))
    })
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(args) => solve(args),
        Command::Convergence(args) => convergence(args),
        Command::Bench(args) => bench(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_io_error(&err) { 2 } else { 1 })
        }
    }
}
