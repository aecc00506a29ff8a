//! Pipeline orchestration: runs the requested stages in dependency order
//! and writes their artifacts.
//!
//! Stage order is fixed: the potential/routing-field stage always runs
//! first; density evolution and path tracing build on it independently.
//! Every run writes `summary.txt` echoing all effective parameters, so a
//! run is reproducible from its artifacts alone.

use crate::elliptic::{exit_flux_report, solve_u, EllipticParams, PotentialSolution};
use crate::error::EvacError;
use crate::field::{build_routing_field, RoutingField};
use crate::fields::ScalarField;
use crate::geometry::{build_grid, Grid};
use crate::hyperbolic::{evolve_with, DensityState, EvacuationTime, EvolveParams};
use crate::output;
use crate::scenario::{emit, Rho0Spec, Scenario};
use crate::trajectory::{evacuation_map, integrate_path, FieldSampler, PathParams};
use crate::util::fnv1a;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSet {
    pub simulate: bool,
    pub trace: bool,
}

impl StageSet {
    pub fn field_only() -> Self {
        Self {
            simulate: false,
            trace: false,
        }
    }

    pub fn all() -> Self {
        Self {
            simulate: true,
            trace: true,
        }
    }
}

/// Everything a finished run reports, beyond the files on disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub digest: String,
    pub varpi: f64,
    pub total_exit_flux: f64,
    pub e3_lower: f64,
    pub e3_upper: f64,
    pub max_phi_boundary: f64,
    pub evacuation_time: Option<f64>,
    pub exited_fraction: Option<f64>,
    pub stalled_fraction: Option<f64>,
    /// `(stage, seconds)` wall-clock timings.
    pub timings: Vec<(String, f64)>,
}

fn load_rho0(
    sc: &Scenario,
    grid: &Grid,
    base_dir: &Path,
    r_max: f64,
) -> Result<ScalarField, EvacError> {
    match &sc.rho0 {
        Rho0Spec::Uniform(v) => Ok(ScalarField::constant(grid, *v)),
        Rho0Spec::Csv(rel) => {
            let path: PathBuf = if rel.is_absolute() {
                rel.clone()
            } else {
                base_dir.join(rel)
            };
            let text = std::fs::read_to_string(&path)?;
            let mut values = vec![f64::NAN; grid.inside_count()];
            for (ln, line) in text.lines().enumerate().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() < 3 {
                    continue;
                }
                let parse = |s: &str| -> Result<f64, EvacError> {
                    s.trim().parse().map_err(|_| {
                        EvacError::Io(std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            format!("{}: bad number {s:?} at line {}", path.display(), ln + 1),
                        ))
                    })
                };
                let i = parse(cols[0])? as usize;
                let j = parse(cols[1])? as usize;
                let value = parse(cols[cols.len() - 1])?;
                if let Some(ord) = grid.ordinal(i, j) {
                    values[ord] = value;
                }
            }
            for (ord, v) in values.iter().enumerate() {
                let (i, j) = grid.inside_cells()[ord];
                if v.is_nan() {
                    return Err(EvacError::Io(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        format!("{}: no density for cell ({i}, {j})", path.display()),
                    )));
                }
                if !(0.0..=r_max).contains(v) {
                    return Err(EvacError::Hyperbolic(
                        crate::hyperbolic::HyperbolicError::DomainError { rho: *v, r_max },
                    ));
                }
            }
            Ok(ScalarField::from_vec(grid, values))
        }
    }
}

/// Solved field stage, reusable by later stages.
pub struct FieldStage {
    pub grid: Grid,
    pub solution: PotentialSolution,
    pub routing: RoutingField,
}

pub fn run_field_stage(sc: &Scenario) -> Result<FieldStage, EvacError> {
    let grid = build_grid(&sc.mask, sc.hx, sc.hy)?;
    let params = EllipticParams {
        delta: sc.delta,
        cg_tol: sc.cg_tol,
        cg_max_iter: sc.cg_max_iter,
    };
    let solution = solve_u(&grid, &params)?;
    let routing = build_routing_field(&solution, sc.theta, &grid);
    Ok(FieldStage {
        grid,
        solution,
        routing,
    })
}

/// Runs the requested stages, writes artifacts into `out_dir`, and returns
/// the summary (also written as `summary.txt`).
pub fn run_pipeline(
    sc: &Scenario,
    stages: StageSet,
    out_dir: &Path,
    base_dir: &Path,
) -> Result<RunSummary, EvacError> {
    let canonical = emit(sc);
    let digest = format!("{:016x}", fnv1a(canonical.as_bytes()));
    let mut timings = Vec::new();

    let t0 = Instant::now();
    let stage = run_field_stage(sc)?;
    timings.push(("field".to_string(), t0.elapsed().as_secs_f64()));
    let grid = &stage.grid;

    output::write_file(
        out_dir,
        "u.csv",
        &output::scalar_field_csv(grid, &stage.solution.u),
    )?;
    output::write_file(
        out_dir,
        "phi.csv",
        &output::scalar_field_csv(grid, &stage.solution.phi),
    )?;
    output::write_file(
        out_dir,
        "w.csv",
        &output::vector_field_csv(grid, &stage.routing.w),
    )?;

    let flux = exit_flux_report(&stage.solution, grid)?;
    output::write_file(out_dir, "exit_flux.csv", &output::exit_flux_csv(&flux))?;

    let mut summary = RunSummary {
        digest,
        varpi: stage.solution.varpi,
        total_exit_flux: flux.total_exit_flux,
        e3_lower: flux.lower_bound,
        e3_upper: flux.upper_bound,
        max_phi_boundary: flux.max_phi_boundary,
        evacuation_time: None,
        exited_fraction: None,
        stalled_fraction: None,
        timings,
    };

    if stages.simulate {
        let t0 = Instant::now();
        let law = sc.law.build().map_err(EvacError::Hyperbolic)?;
        let rho0 = load_rho0(sc, grid, base_dir, law.r_max())?;
        let params = EvolveParams {
            t_end: sc.t_end,
            cfl: sc.cfl,
            mass_threshold: sc.mass_threshold,
            output_instants: sc.output_instants.clone(),
            seal_exits: false,
        };
        let mut snapshot = 0usize;
        let state0 = DensityState { rho: rho0, t: 0.0 };
        let (_, report) = evolve_with(state0, &stage.routing, &law, grid, &params, |state, _| {
            let name = output::snapshot_name(snapshot);
            let _ = output::write_file(out_dir, &name, &output::scalar_field_csv(grid, &state.rho));
            snapshot += 1;
        })?;
        output::write_file(out_dir, "report.csv", &output::report_csv(&report.rows))?;
        summary.evacuation_time = match report.evacuation_time {
            EvacuationTime::Reached(t) => Some(t),
            EvacuationTime::NotReached => None,
        };
        summary
            .timings
            .push(("simulate".to_string(), t0.elapsed().as_secs_f64()));
    }

    if stages.trace {
        let t0 = Instant::now();
        let sampler = FieldSampler::new(grid, &stage.routing, &stage.solution);
        let params = PathParams {
            dt_path: if sc.dt_path > 0.0 {
                sc.dt_path
            } else {
                0.5 * grid.hx().min(grid.hy())
            },
            t_cap: sc.t_cap,
            stall_tol: sc.stall_tol,
        };
        for (k, &start) in sc.paths.iter().enumerate() {
            let tr = integrate_path(start, &sampler, &params)?;
            output::write_file(
                out_dir,
                &format!("traj_{k:03}.csv"),
                &output::trajectory_csv(&tr, &sampler),
            )?;
        }
        let map = evacuation_map(&sampler, &params, sc.trace_stride)?;
        output::write_file(
            out_dir,
            "evacmap.csv",
            &output::evacuation_map_csv(grid, &map),
        )?;
        summary.exited_fraction = Some(map.exited_fraction);
        summary.stalled_fraction = Some(map.stalled_fraction);
        summary
            .timings
            .push(("trace".to_string(), t0.elapsed().as_secs_f64()));
    }

    output::write_file(out_dir, "summary.txt", &render_summary(sc, &summary))?;
    Ok(summary)
}

fn render_summary(sc: &Scenario, s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario_digest = {}", s.digest);
    // Echo every effective parameter so the run is self-describing.
    for line in emit(sc).lines() {
        if line == "mask:" {
            break;
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "varpi = {}", s.varpi);
    let _ = writeln!(out, "total_exit_flux = {}", s.total_exit_flux);
    let _ = writeln!(out, "e3_lower = {}", s.e3_lower);
    let _ = writeln!(out, "e3_upper = {}", s.e3_upper);
    let _ = writeln!(out, "max_phi_boundary = {}", s.max_phi_boundary);
    match s.evacuation_time {
        Some(t) => {
            let _ = writeln!(out, "evacuation_time = {t}");
        }
        None => {
            if s.timings.iter().any(|(name, _)| name == "simulate") {
                let _ = writeln!(out, "evacuation_time = NOT_REACHED");
            }
        }
    }
    if let Some(f) = s.exited_fraction {
        let _ = writeln!(out, "exited_fraction = {f}");
    }
    if let Some(f) = s.stalled_fraction {
        let _ = writeln!(out, "stalled_fraction = {f}");
    }
    for (stage, secs) in &s.timings {
        let _ = writeln!(out, "stage_{stage}_seconds = {secs}");
    }
    out
}
