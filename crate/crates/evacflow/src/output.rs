//! CSV and summary emission.
//!
//! All writers are deterministic: rows are ordered row-major by `(j, i)`
//! and floats use the shortest round-trip representation, so identical
//! runs produce byte-identical files.

use crate::elliptic::ExitFluxReport;
use crate::fields::{ScalarField, VectorField};
use crate::geometry::Grid;
use crate::hyperbolic::ReportRow;
use crate::trajectory::{EvacuationMap, FieldSampler, OutcomeKind, Trajectory};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// `i,j,x,y,value` rows over inside cells.
pub fn scalar_field_csv(grid: &Grid, field: &ScalarField) -> String {
    let mut out = String::from("i,j,x,y,value\n");
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let [x, y] = grid.cell_center(i, j);
        let _ = writeln!(out, "{i},{j},{x},{y},{}", field.get(ord));
    }
    out
}

/// `i,j,x,y,wx,wy` rows over inside cells.
pub fn vector_field_csv(grid: &Grid, field: &VectorField) -> String {
    let mut out = String::from("i,j,x,y,wx,wy\n");
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let [x, y] = grid.cell_center(i, j);
        let [wx, wy] = field.get(ord);
        let _ = writeln!(out, "{i},{j},{x},{y},{wx},{wy}");
    }
    out
}

/// Per-exit-face fluxes: `i,j,dir,flux`.
pub fn exit_flux_csv(report: &ExitFluxReport) -> String {
    let mut out = String::from("i,j,dir,flux\n");
    for (face, flux) in &report.per_face {
        let _ = writeln!(out, "{},{},{:?},{}", face.i, face.j, face.dir, flux);
    }
    out
}

/// Evolution report rows: `t,mass,outflow,tv,rho_max`.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("t,mass,outflow,tv,rho_max\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.mass, r.outflow, r.tv, r.rho_max
        );
    }
    out
}

/// Trajectory samples: `t,x,y,phi,wnorm`.
pub fn trajectory_csv(tr: &Trajectory, sampler: &FieldSampler) -> String {
    let mut out = String::from("t,x,y,phi,wnorm\n");
    for &(t, p) in &tr.samples {
        let w = sampler.sample_w(p);
        let wnorm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        let phi = sampler.sample_phi(p);
        let _ = writeln!(out, "{t},{},{},{phi},{wnorm}", p[0], p[1]);
    }
    out
}

/// Per-start outcomes: `i,j,x,y,outcome,T` (T empty unless exited).
pub fn evacuation_map_csv(grid: &Grid, map: &EvacuationMap) -> String {
    let mut out = String::from("i,j,x,y,outcome,T\n");
    for e in &map.entries {
        let [x, y] = grid.cell_center(e.i, e.j);
        let outcome = match e.outcome {
            OutcomeKind::Exited => "EXITED",
            OutcomeKind::Stalled => "STALLED",
            OutcomeKind::TimeCapped => "TIME_CAPPED",
        };
        let t = e.t_exit.map_or(String::new(), |t| t.to_string());
        let _ = writeln!(out, "{},{},{x},{y},{outcome},{t}", e.i, e.j);
    }
    out
}

/// Density snapshot file name for an output instant index.
pub fn snapshot_name(index: usize) -> String {
    format!("rho_{index:04}.csv")
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)
}
