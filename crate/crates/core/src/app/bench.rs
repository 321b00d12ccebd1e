//! Strong/weak scalability benchmark harness: repeated scenario runs over
//! thread counts (and mesh sizes in weak mode), reporting median Picard and
//! Krylov counts plus preconditioner-setup and solve times.

use std::io::Write as _;
use std::path::Path;

use super::config::{MeshSpec, Scenario};
use super::{prepare, AppError};
use crate::seird::run_simulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    /// Fixed mesh, varying thread counts.
    Strong,
    /// Mesh size scales with the thread count (paired lists).
    Weak,
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub mode: BenchMode,
    pub threads: Vec<usize>,
    /// Strong mode uses the first entry for every run; weak mode pairs
    /// entry i with thread count i.
    pub mesh_sizes: Vec<usize>,
    pub steps: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub threads: usize,
    pub dofs: usize,
    pub picard_avg: f64,
    pub krylov_avg: f64,
    pub pc_setup_seconds: f64,
    pub solve_seconds: f64,
    pub failed: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One measured repetition: (avg picard, avg krylov, pc-setup s, solve s).
fn run_once(scenario: &Scenario) -> Result<(f64, f64, f64, f64), AppError> {
    let p = prepare(scenario)?;
    let (_, records) = run_simulation(
        &p.mesh,
        &p.params,
        &p.spec,
        p.state0.clone(),
        p.dt,
        p.steps,
        &p.picard,
        &p.solver,
        |_, _| {},
    )?;
    let n = records.len().max(1) as f64;
    let picard: f64 = records.iter().map(|r| r.report.picard_iterations as f64).sum::<f64>() / n;
    let krylov: f64 = records.iter().map(|r| r.report.krylov_iterations as f64).sum::<f64>() / n;
    let setup: f64 = records.iter().map(|r| r.report.pc_setup_seconds).sum();
    let solve: f64 =
        records.iter().map(|r| r.report.solve_seconds - r.report.pc_setup_seconds).sum();
    Ok((picard, krylov, setup, solve))
}

/// Execute the plan; repetitions run sequentially inside a thread pool of
/// the requested size. A failed configuration produces a flagged row
/// instead of aborting the sweep.
pub fn bench_run(plan: &BenchPlan, base: &Scenario) -> Result<Vec<BenchRow>, AppError> {
    assert!(!plan.threads.is_empty() && !plan.mesh_sizes.is_empty(), "bench lists must be non-empty");
    if plan.mode == BenchMode::Weak && plan.mesh_sizes.len() != plan.threads.len() {
        return Err(AppError::Invalid(format!(
            "weak mode needs one mesh size per thread count ({} vs {})",
            plan.mesh_sizes.len(),
            plan.threads.len()
        )));
    }
    let mut rows = Vec::new();
    for (idx, &threads) in plan.threads.iter().enumerate() {
        let n = match plan.mode {
            BenchMode::Strong => plan.mesh_sizes[0],
            BenchMode::Weak => plan.mesh_sizes[idx],
        };
        let mut scenario = Scenario {
            mesh: MeshSpec::Square { n },
            params: base.params,
            beta_field: base.beta_field,
            ic: base.ic.clone(),
            dt: base.dt,
            steps: plan.steps,
            pc: base.pc,
            subdomains: base.subdomains,
            overlap: base.overlap,
            outer: base.outer.clone(),
            picard: base.picard,
            output_cadence: 0,
        };
        scenario.steps = plan.steps;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| AppError::Invalid(format!("thread pool: {e}")))?;
        let mut picard = Vec::new();
        let mut krylov = Vec::new();
        let mut setup = Vec::new();
        let mut solve = Vec::new();
        let mut failed = false;
        for _ in 0..plan.repetitions.max(1) {
            match pool.install(|| run_once(&scenario)) {
                Ok((p, k, s, t)) => {
                    picard.push(p);
                    krylov.push(k);
                    setup.push(s);
                    solve.push(t);
                }
                Err(e) => {
                    eprintln!("bench: run failed at {threads} threads, n = {n}: {e}");
                    failed = true;
                    break;
                }
            }
        }
        let dofs = 5 * (n + 1) * (n + 1);
        rows.push(BenchRow {
            threads,
            dofs,
            picard_avg: median(picard),
            krylov_avg: median(krylov),
            pc_setup_seconds: median(setup),
            solve_seconds: median(solve),
            failed,
        });
    }
    Ok(rows)
}

/// `bench.csv`: `threads,dofs,picard_avg,krylov_avg,setup_s,solve_s,failed`.
pub fn write_bench(path: &Path, rows: &[BenchRow]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "threads,dofs,picard_avg,krylov_avg,setup_s,solve_s,failed")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.threads,
            r.dofs,
            r.picard_avg,
            r.krylov_avg,
            r.pc_setup_seconds,
            r.solve_seconds,
            r.failed as u8
        )?;
    }
    w.flush()
}
