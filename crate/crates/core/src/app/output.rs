//! CSV and legacy-ASCII-VTK output writers with fixed, documented schemas.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::mesh::Mesh;
use crate::seird::{State, StepRecord, COMPARTMENT_NAMES, N_COMPARTMENTS};
use crate::verify::ConvergenceRow;

/// `timeseries.csv`: one row per time step.
/// Schema: `t,S_int,E_int,I_int,R_int,D_int,picard_iters,krylov_sum,setup_s,solve_s`.
pub fn write_timeseries(path: &Path, records: &[StepRecord]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,S_int,E_int,I_int,R_int,D_int,picard_iters,krylov_sum,setup_s,solve_s")?;
    for r in records {
        let rep = &r.report;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.totals[0],
            r.totals[1],
            r.totals[2],
            r.totals[3],
            r.totals[4],
            rep.picard_iterations,
            rep.krylov_iterations,
            rep.pc_setup_seconds,
            rep.solve_seconds - rep.pc_setup_seconds,
        )?;
    }
    w.flush()
}

/// Field snapshot in the legacy ASCII VTK unstructured-grid format, one
/// point-data scalar array per compartment.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let nv = mesh.n_vertices();
    let nc = mesh.n_cells();
    let npc = mesh.dim + 1;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "compartment fields")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} 0", v[0], v[1])?;
    }
    writeln!(w, "CELLS {nc} {}", nc * (npc + 1))?;
    for c in 0..nc {
        let nodes = mesh.cell(c);
        write!(w, "{npc}")?;
        for &n in nodes {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {nc}")?;
    let vtk_type = if mesh.dim == 1 { 3 } else { 5 }; // line / triangle
    for _ in 0..nc {
        writeln!(w, "{vtk_type}")?;
    }
    writeln!(w, "POINT_DATA {nv}")?;
    for c in 0..N_COMPARTMENTS {
        writeln!(w, "SCALARS {} double 1", COMPARTMENT_NAMES[c])?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &v in &state[c] {
            writeln!(w, "{v}")?;
        }
    }
    w.flush()
}

/// `verify_<case>.csv` for convergence sweeps: `param,error,order`.
pub fn write_convergence(path: &Path, param_name: &str, rows: &[ConvergenceRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{param_name},error,order")?;
    for r in rows {
        match r.order {
            Some(p) => writeln!(w, "{},{},{}", r.param, r.error, p)?,
            None => writeln!(w, "{},{},", r.param, r.error)?,
        }
    }
    w.flush()
}

/// `verify_mms2d.csv`: `t,error`.
pub fn write_trace(path: &Path, trace: &[(f64, f64)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,error")?;
    for &(t, e) in trace {
        writeln!(w, "{t},{e}")?;
    }
    w.flush()
}

/// `verify_ode-limit.csv`: one row per population,
/// `population,max_diff_s,max_diff_e,max_diff_i,max_diff_r,max_diff_d`.
pub fn write_ode_limit(path: &Path, rows: &[(f64, [f64; N_COMPARTMENTS])]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "population,max_diff_s,max_diff_e,max_diff_i,max_diff_r,max_diff_d")?;
    for (pop, d) in rows {
        writeln!(w, "{},{},{},{},{},{}", pop, d[0], d[1], d[2], d[3], d[4])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use crate::seird::StepReport;

    #[test]
    fn timeseries_schema_round_trips() {
        let rec = StepRecord {
            step: 1,
            t: 0.1,
            totals: [1.0, 2.0, 3.0, 4.0, 5.0],
            report: StepReport {
                picard_iterations: 4,
                picard_converged: true,
                krylov_iterations: 42,
                coarse_inner_iterations: vec![],
                assemble_seconds: 0.0,
                pc_setup_seconds: 0.5,
                solve_seconds: 2.0,
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("timeseries.csv");
        write_timeseries(&path, &[rec]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,S_int,E_int,I_int,R_int,D_int,picard_iters,krylov_sum,setup_s,solve_s"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[6], "4");
        assert_eq!(fields[7], "42");
        assert_eq!(fields[8], "0.5");
        assert_eq!(fields[9], "1.5"); // solve time excludes pc setup
    }

    #[test]
    fn vtk_snapshot_has_expected_structure() {
        let mesh = unit_square_mesh(2).unwrap();
        let nv = mesh.n_vertices();
        let state: State = std::array::from_fn(|c| vec![c as f64; nv]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields_1.vtk");
        write_vtk(&path, &mesh, &state).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains(&format!("POINTS {nv} double")));
        assert!(text.contains("CELL_TYPES 8"));
        for name in COMPARTMENT_NAMES {
            assert!(text.contains(&format!("SCALARS {name} double 1")));
        }
        // 5 scalar arrays of nv values each.
        assert_eq!(text.matches("LOOKUP_TABLE default").count(), 5);
    }
}
