//! Command-line interface: `simulate`, `verify <case>`, and `bench`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use epiras::app::bench::{bench_run, write_bench, BenchMode, BenchPlan};
use epiras::app::config::{parse_pc, RawConfig, Scenario};
use epiras::app::{output, prepare, run_prepared, AppError};
use epiras::seird::LinearSolver;
use epiras::verify::{
    mms_convergence_spatial_1d, mms_convergence_temporal_1d, mms_run_2d, pde_ode_compare,
};

#[derive(Parser)]
#[command(
    name = "epiras",
    version,
    about = "Finite-element SEIRD reaction-diffusion solver with overlapping-Schwarz preconditioners"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config file (flat `key = value`); defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preconditioner: none | asm | ras1 | ras2 | ras2-v2 | ras2-v3.
    #[arg(long)]
    pc: Option<String>,
    #[arg(long)]
    subdomains: Option<usize>,
    #[arg(long)]
    overlap: Option<usize>,
    /// Worker threads: a single count for simulate/verify, a comma list for
    /// bench (e.g. `1,2,4`).
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Force single-threaded, bit-reproducible execution.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a time-stepping scenario and write timeseries.csv (+ VTK snapshots).
    Simulate(RunArgs),
    /// Verification cases: mms1d-space | mms1d-time | mms2d | ode-limit.
    Verify {
        case: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Scalability benchmark over thread counts (and mesh sizes in weak mode).
    Bench {
        /// strong | weak.
        #[arg(long, default_value = "strong")]
        mode: String,
        /// Mesh cells per side; one value (strong) or comma list (weak).
        #[arg(long, default_value = "64")]
        mesh_sizes: String,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[command(flatten)]
        args: RunArgs,
    },
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, AppError> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| AppError::Invalid(format!("bad {what} list entry `{p}`"))))
        .collect()
}

fn load_scenario(args: &RunArgs) -> Result<Scenario, AppError> {
    let raw = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::empty(),
    };
    let mut sc = Scenario::from_config(&raw)?;
    if let Some(pc) = &args.pc {
        sc.pc = parse_pc(pc)?;
    }
    if let Some(s) = args.subdomains {
        sc.subdomains = s;
    }
    if let Some(o) = args.overlap {
        sc.overlap = o;
    }
    if let Some(dt) = args.dt {
        sc.dt = dt;
    }
    if let Some(steps) = args.steps {
        sc.steps = steps;
    }
    Ok(sc)
}

fn thread_count(args: &RunArgs) -> Result<usize, AppError> {
    if args.deterministic {
        return Ok(1);
    }
    match &args.threads {
        None => Ok(0), // rayon default
        Some(list) => Ok(*parse_list(list, "threads")?.first().unwrap_or(&0)),
    }
}

fn in_pool<T>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, AppError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AppError::Invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn cmd_simulate(args: &RunArgs) -> Result<(), AppError> {
    let sc = load_scenario(args)?;
    let prepared = prepare(&sc)?;
    let threads = thread_count(args)?;
    let records = in_pool(threads, || run_prepared(&prepared, &args.out_dir))??;
    let last = records.last();
    println!(
        "simulate: {} steps on {} dofs, pc {:?}; outputs in {}",
        records.len(),
        prepared.dofs(),
        sc.pc,
        args.out_dir.display()
    );
    if let Some(r) = last {
        println!(
            "final totals at t = {}: S {:.4} E {:.4} I {:.4} R {:.4} D {:.4}",
            r.t, r.totals[0], r.totals[1], r.totals[2], r.totals[3], r.totals[4]
        );
    }
    if records.iter().any(|r| !r.report.picard_converged) {
        eprintln!("warning: at least one step hit the Picard iteration cap");
    }
    Ok(())
}

/// Table values the 1D sweeps are compared against (5% band) and the order
/// windows; the verify subcommands print one pass/fail line each.
const SPATIAL_REF: [f64; 3] = [0.01289, 0.00208, 0.00052];
const TEMPORAL_REF: [f64; 3] = [0.00374, 0.00037, 0.00019];

fn cmd_verify(case: &str, args: &RunArgs) -> Result<bool, AppError> {
    std::fs::create_dir_all(&args.out_dir)?;
    let threads = thread_count(args)?;
    match case {
        "mms1d-space" => {
            let rows =
                in_pool(threads, || mms_convergence_spatial_1d(&[0.05, 0.02, 0.01], 1e-5, 0.002))??;
            println!("h,error,order");
            for r in &rows {
                println!("{},{:.5},{}", r.param, r.error, r.order.map_or("-".into(), |p| format!("{p:.4}")));
            }
            output::write_convergence(&args.out_dir.join("verify_mms1d-space.csv"), "h", &rows)?;
            let errors_ok = rows
                .iter()
                .zip(SPATIAL_REF)
                .all(|(r, want)| (r.error - want).abs() <= 0.05 * want);
            let orders_ok =
                rows.iter().skip(1).all(|r| r.order.is_some_and(|p| (p - 2.0).abs() <= 0.05));
            let pass = errors_ok && orders_ok;
            println!("mms1d-space: {}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        "mms1d-time" => {
            let rows =
                in_pool(threads, || mms_convergence_temporal_1d(&[0.1, 0.01, 0.005], 2e-4, 5.0))??;
            println!("dt,error,order");
            for r in &rows {
                println!("{},{:.5},{}", r.param, r.error, r.order.map_or("-".into(), |p| format!("{p:.4}")));
            }
            output::write_convergence(&args.out_dir.join("verify_mms1d-time.csv"), "dt", &rows)?;
            let errors_ok = rows
                .iter()
                .zip(TEMPORAL_REF)
                .all(|(r, want)| (r.error - want).abs() <= 0.05 * want);
            let orders_ok =
                rows.iter().skip(1).all(|r| r.order.is_some_and(|p| (p - 1.0).abs() <= 0.05));
            let pass = errors_ok && orders_ok;
            println!("mms1d-time: {}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        "mms2d" => {
            // Vertex-count parity with the reference configuration: n = 115
            // gives 13456 vertices; dt = 0.01 to T = 50 unless overridden.
            let sc = load_scenario(args)?;
            let dt = args.dt.unwrap_or(0.01);
            let steps = args.steps.unwrap_or((50.0 / dt).round() as usize);
            let n = 115;
            let mesh = epiras::mesh::unit_square_mesh(n)?;
            let decomp = epiras::decomp::add_overlap(
                &epiras::decomp::partition(&mesh, sc.subdomains.max(2)),
                &mesh,
                sc.overlap.max(1),
            );
            let solver = LinearSolver::Krylov {
                pc: epiras::schwarz::PcKind::OneLevelRas,
                decomp,
                coarse: None,
                coarse_decomp: None,
                outer: sc.outer.clone(),
                inner: Default::default(),
            };
            let trace = in_pool(threads, || mms_run_2d(n, dt, steps, &solver))??;
            output::write_trace(&args.out_dir.join("verify_mms2d.csv"), &trace)?;
            let max_err = trace.iter().map(|&(_, e)| e).fold(0.0f64, f64::max);
            let final_err = trace.last().map_or(f64::NAN, |&(_, e)| e);
            let pass = max_err.is_finite() && max_err < 1.0;
            println!(
                "mms2d: {} steps, max error {:.3e}, final error {:.3e}: {}",
                trace.len(),
                max_err,
                final_err,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(pass)
        }
        "ode-limit" => {
            let dt = args.dt.unwrap_or(0.1);
            let steps = args.steps.unwrap_or((210.0 / dt).round() as usize);
            let mut rows = Vec::new();
            let mut pass = true;
            for pop in [10.0, 1000.0] {
                let diff = in_pool(threads, || pde_ode_compare(32, pop, dt, steps))??;
                let worst = diff.iter().cloned().fold(0.0f64, f64::max);
                println!("population {pop}: max discrepancy {worst:.3e}");
                pass &= worst <= 1e-3;
                rows.push((pop, diff));
            }
            output::write_ode_limit(&args.out_dir.join("verify_ode-limit.csv"), &rows)?;
            println!("ode-limit: {}", if pass { "PASS" } else { "FAIL" });
            Ok(pass)
        }
        other => Err(AppError::Invalid(format!(
            "unknown verify case `{other}`; expected mms1d-space, mms1d-time, mms2d, or ode-limit"
        ))),
    }
}

fn cmd_bench(mode: &str, mesh_sizes: &str, repetitions: usize, args: &RunArgs) -> Result<(), AppError> {
    let mode = match mode {
        "strong" => BenchMode::Strong,
        "weak" => BenchMode::Weak,
        other => return Err(AppError::Invalid(format!("unknown bench mode `{other}`"))),
    };
    let threads = match &args.threads {
        Some(list) => parse_list(list, "threads")?,
        None => vec![1],
    };
    let threads = if args.deterministic { vec![1] } else { threads };
    let sc = load_scenario(args)?;
    let plan = BenchPlan {
        mode,
        threads,
        mesh_sizes: parse_list(mesh_sizes, "mesh-sizes")?,
        steps: args.steps.unwrap_or(10),
        repetitions,
    };
    let rows = bench_run(&plan, &sc)?;
    std::fs::create_dir_all(&args.out_dir)?;
    write_bench(&args.out_dir.join("bench.csv"), &rows)?;
    println!("threads,dofs,picard_avg,krylov_avg,setup_s,solve_s,failed");
    for r in &rows {
        println!(
            "{},{},{:.2},{:.2},{:.4},{:.4},{}",
            r.threads, r.dofs, r.picard_avg, r.krylov_avg, r.pc_setup_seconds, r.solve_seconds, r.failed as u8
        );
    }
    if rows.iter().any(|r| r.failed) {
        return Err(AppError::Invalid("at least one benchmark configuration failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Verify { case, args } => match cmd_verify(case, args) {
            Ok(_pass_or_fail) => Ok(()), // verification FAIL is reported, not an error
            Err(e) => Err(e),
        },
        Cmd::Bench { mode, mesh_sizes, repetitions, args } => {
            cmd_bench(mode, mesh_sizes, *repetitions, args)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
