//! CSV, legacy VTK and JSON writers.
//!
//! Floating-point values are written with 17 significant digits so that
//! reading them back reproduces the solver output exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use treepoisson::{Solution, TriMesh};

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn potential_csv(sol: &Solution) -> String {
    let mesh = sol.mesh();
    let mut out = String::from("patch,cx,cy,phi\n");
    for (t, phi) in sol.potential.values.iter().enumerate() {
        let [x, y] = mesh.centroid(t);
        let _ = writeln!(out, "{t},{x:.16e},{y:.16e},{phi:.16e}");
    }
    out
}

/// One row per mesh edge: interior rows carry the `D` coefficient, boundary
/// rows the prescribed normal component.
pub fn dfield_csv(sol: &Solution) -> String {
    let topo = &sol.disc.topo;
    let mut out = String::from("edge,mx,my,coefficient\n");
    for (e, (edge, d)) in topo.edges.iter().zip(&sol.d_field).enumerate() {
        let [x, y] = edge.midpoint(&topo.mesh);
        let _ = writeln!(out, "{e},{x:.16e},{y:.16e},{d:.16e}");
    }
    out
}

pub fn vtk(mesh: &TriMesh, phi: &[f64]) -> String {
    let nt = mesh.num_triangles();
    let mut out = String::from("# vtk DataFile Version 3.0\ntreepoisson potential\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.num_vertices());
    for [x, y] in &mesh.vertices {
        let _ = writeln!(out, "{x:.16e} {y:.16e} 0");
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for [a, b, c] in &mesh.triangles {
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {nt}\nSCALARS phi double 1\nLOOKUP_TABLE default");
    for v in phi {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_solution(dir: &Path, sol: &Solution, report: &impl Serialize) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write(&dir.join("potential.csv"), &potential_csv(sol))?;
    write(&dir.join("dfield.csv"), &dfield_csv(sol))?;
    write(&dir.join("solution.vtk"), &vtk(sol.mesh(), &sol.potential.values))?;
    write(&dir.join("report.json"), &serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
