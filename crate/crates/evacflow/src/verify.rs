//! Cross-module oracle harness.
//!
//! Every numerical invariant of the crate is certified by at least one
//! oracle case: analytic 1D solutions, symmetry and conservation audits,
//! refinement studies, two-sided bound checks, Lyapunov descent along
//! paths, and randomized ordered-pair properties. A coverage manifest maps
//! invariants to cases and is itself checked on every run.
//!
//! `run_oracles` executes the (optionally filtered) case list sequentially
//! and deterministically; randomized cases derive their streams from the
//! given seed. The report renders as text and as machine-readable CSV.

use crate::elliptic::{
    critical_points, exit_flux_report, solve_u, EllipticParams, PotentialSolution,
};
use crate::field::{build_routing_field, regularized_normalize, RoutingField};
use crate::fields::ScalarField;
use crate::geometry::{boundary_sets, build_grid, Direction, FaceClass, Grid};
use crate::hyperbolic::{
    cfl_timestep, evolve, evolve_with, step, DensityState, EvacuationTime, EvolveParams, SpeedLaw,
};
use crate::trajectory::{
    evacuation_map, integrate_path, lyapunov_audit, FieldSampler, OutcomeKind, PathOutcome,
    PathParams,
};
use crate::util::kahan_sum;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::rc::Rc;

/// Simulated evacuation time of the reference square-room run (1×1 room,
/// right-wall exit of width 0.25, ρ₀ ≡ 0.5, linear law, δ = 0.5, θ = 0.1,
/// h = 1/64, CFL 0.4, mass threshold 1e-3), recorded on the first run and
/// reproduced bit-for-bit since.
#[allow(clippy::excessive_precision)]
pub const SQUARE_ROOM_EVAC_BASELINE: f64 = 8.61758405706192399;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    AnalyticStrip,
    Symmetry,
    Conservation,
    Refinement,
    BoundE3,
    Lyapunov,
    MonotonePair,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::AnalyticStrip => "ANALYTIC_STRIP",
            OracleKind::Symmetry => "SYMMETRY",
            OracleKind::Conservation => "CONSERVATION",
            OracleKind::Refinement => "REFINEMENT",
            OracleKind::BoundE3 => "BOUND_E3",
            OracleKind::Lyapunov => "LYAPUNOV",
            OracleKind::MonotonePair => "MONOTONE_PAIR",
        }
    }
}

/// One assertion inside a case, with what was measured.
#[derive(Debug, Clone)]
pub struct Check {
    pub label: String,
    pub detail: String,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: &'static str,
    pub kind: OracleKind,
    pub invariant: &'static str,
    pub checks: Vec<Check>,
}

impl CaseResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seed: u64,
    pub results: Vec<CaseResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass())
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let _ = writeln!(
                out,
                "[{}] {:<32} {:<14} {}",
                if r.pass() { "PASS" } else { "FAIL" },
                r.name,
                r.kind.as_str(),
                r.invariant
            );
            for c in &r.checks {
                if !c.pass {
                    let _ = writeln!(out, "       FAILED {}: {}", c.label, c.detail);
                }
            }
        }
        let _ = writeln!(
            out,
            "{} of {} cases passed (seed {})",
            self.results.iter().filter(|r| r.pass()).count(),
            self.results.len(),
            self.seed
        );
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from("case,kind,invariant,check,detail,pass\n");
        for r in &self.results {
            for c in &r.checks {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{:?},{}",
                    r.name,
                    r.kind.as_str(),
                    r.invariant,
                    c.label,
                    c.detail,
                    c.pass
                );
            }
        }
        out
    }
}

/// Built-in grids and scenario builders shared by the oracle suite, the
/// acceptance tests and the examples in `scenarios/`.
pub mod scenarios {
    use super::*;

    /// Strip (0,1)×(0,0.5), exit along the whole right edge, square cells.
    pub fn strip_mask(nx: usize) -> String {
        let ny = nx / 2;
        let mut s = String::new();
        for _ in 0..ny {
            s.push_str(&".".repeat(nx));
            s.push('E');
            s.push('\n');
        }
        s
    }

    pub fn strip_grid(nx: usize) -> Grid {
        build_grid(&strip_mask(nx), 1.0 / nx as f64, 1.0 / nx as f64).unwrap()
    }

    /// Unit square room, one exit of width 0.25 centered on the right wall.
    pub fn square_door_mask(n: usize) -> String {
        let lo = 3 * n / 8;
        let hi = 5 * n / 8;
        let mut s = String::new();
        for r in 0..n {
            let j = n - 1 - r;
            s.push_str(&".".repeat(n));
            s.push(if j >= lo && j < hi { 'E' } else { '#' });
            s.push('\n');
        }
        s
    }

    pub fn square_door_grid(n: usize) -> Grid {
        build_grid(&square_door_mask(n), 1.0 / n as f64, 1.0 / n as f64).unwrap()
    }

    /// Symmetric two-exit room (doors centered on the left and right
    /// walls); odd `n` puts a cell column exactly on the symmetry axis.
    pub fn two_exit_mask(n: usize) -> String {
        let lo = 3 * n / 8;
        let hi = lo + n / 4;
        let mut s = String::new();
        for r in 0..n {
            let j = n - 1 - r;
            let door = j >= lo && j < hi;
            s.push(if door { 'E' } else { '#' });
            s.push_str(&".".repeat(n));
            s.push(if door { 'E' } else { '#' });
            s.push('\n');
        }
        s
    }

    pub fn two_exit_grid(n: usize) -> Grid {
        build_grid(&two_exit_mask(n), 1.0 / n as f64, 1.0 / n as f64).unwrap()
    }

    /// Two-exit room whose doors span the full left and right edges; the
    /// solution is one-dimensional and the whole center column (odd `n`)
    /// is critical.
    pub fn two_exit_full_mask(n: usize) -> String {
        let mut s = String::new();
        for _ in 0..n {
            s.push('E');
            s.push_str(&".".repeat(n));
            s.push('E');
            s.push('\n');
        }
        s
    }

    pub fn two_exit_full_grid(n: usize) -> Grid {
        build_grid(&two_exit_full_mask(n), 1.0 / n as f64, 1.0 / n as f64).unwrap()
    }

    /// L-shaped room: the upper-left quarter is wall, one exit segment on
    /// the left wall of the lower arm.
    pub fn l_room_mask() -> String {
        let n = 48;
        let mut s = String::new();
        for r in 0..n {
            let j = n - 1 - r;
            s.push(if (6..18).contains(&j) { 'E' } else { '#' });
            if j >= n / 2 {
                s.push_str(&"#".repeat(n / 2));
                s.push_str(&".".repeat(n / 2));
            } else {
                s.push_str(&".".repeat(n));
            }
            s.push('\n');
        }
        s
    }

    pub fn l_room_grid() -> Grid {
        build_grid(&l_room_mask(), 1.0 / 48.0, 1.0 / 48.0).unwrap()
    }

    /// Long thin corridor, exit at the left end.
    pub fn corridor_mask() -> String {
        let mut s = String::new();
        for _ in 0..12 {
            s.push('E');
            s.push_str(&".".repeat(96));
            s.push('\n');
        }
        s
    }

    pub fn corridor_grid() -> Grid {
        build_grid(&corridor_mask(), 1.0 / 96.0, 1.0 / 96.0).unwrap()
    }

    /// Square room with a square pillar in the middle and a right-wall exit.
    pub fn pillar_mask() -> String {
        let n = 48;
        let lo = 3 * n / 8;
        let hi = 5 * n / 8;
        let mut s = String::new();
        for r in 0..n {
            let j = n - 1 - r;
            for i in 0..n {
                s.push(if i >= lo && i < hi && j >= lo && j < hi {
                    '#'
                } else {
                    '.'
                });
            }
            s.push(if j >= lo && j < hi { 'E' } else { '#' });
            s.push('\n');
        }
        s
    }

    pub fn pillar_grid() -> Grid {
        build_grid(&pillar_mask(), 1.0 / 48.0, 1.0 / 48.0).unwrap()
    }

    /// The desk-scale scenario collection exercised by bound and range
    /// audits.
    pub fn builtin_grids() -> Vec<(&'static str, Grid)> {
        vec![
            ("strip64", strip_grid(64)),
            ("square_door64", square_door_grid(64)),
            ("two_exit63", two_exit_grid(63)),
            ("l_room48", l_room_grid()),
            ("corridor96", corridor_grid()),
            ("pillar48", pillar_grid()),
        ]
    }
}

struct Solved {
    grid: Grid,
    sol: PotentialSolution,
    field: RoutingField,
}

struct Ctx {
    seed: u64,
    cache: RefCell<BTreeMap<String, Rc<Solved>>>,
}

impl Ctx {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            cache: RefCell::new(BTreeMap::new()),
        }
    }

    fn solved(&self, key: &str, make_grid: impl FnOnce() -> Grid, cg_tol: f64) -> Rc<Solved> {
        if let Some(s) = self.cache.borrow().get(key) {
            return Rc::clone(s);
        }
        let grid = make_grid();
        let sol = solve_u(&grid, &EllipticParams::with_tol(0.5, cg_tol)).expect("solve");
        let field = build_routing_field(&sol, 0.1, &grid);
        let solved = Rc::new(Solved { grid, sol, field });
        self.cache
            .borrow_mut()
            .insert(key.to_string(), Rc::clone(&solved));
        solved
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&stream.to_le_bytes());
        ChaCha8Rng::from_seed(seed)
    }
}

fn check(checks: &mut Vec<Check>, label: impl Into<String>, pass: bool, detail: String) {
    checks.push(Check {
        label: label.into(),
        detail,
        pass,
    });
}

fn check_le(checks: &mut Vec<Check>, label: impl Into<String>, measured: f64, bound: f64) {
    check(
        checks,
        label,
        measured <= bound,
        format!("measured {measured} <= bound {bound}"),
    );
}

fn l1_distance(grid: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    let cell = grid.hx() * grid.hy();
    kahan_sum(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs() * cell),
    )
}

fn perimeter(grid: &Grid) -> f64 {
    kahan_sum(grid.boundary_faces().map(|(f, _)| grid.face_length(f.dir)))
}

// ---------------------------------------------------------------------
// Geometry cases
// ---------------------------------------------------------------------

fn case_geometry_partition(_ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    for (name, grid) in scenarios::builtin_grids() {
        let bs = boundary_sets(&grid);
        let boundary = grid.boundary_faces().count();
        check(
            &mut checks,
            format!("{name}: wall+exit covers boundary"),
            bs.wall_faces.len() + bs.exit_faces.len() == boundary,
            format!(
                "wall {} + exit {} vs boundary {}",
                bs.wall_faces.len(),
                bs.exit_faces.len(),
                boundary
            ),
        );
        // Four classified faces per inside cell, each boundary face owned
        // by exactly one inside cell.
        let mut per_cell_ok = true;
        let mut total_faces = 0usize;
        for &(i, j) in grid.inside_cells() {
            let mut n = 0;
            for dir in Direction::ALL {
                let _ = grid.face_class(i, j, dir);
                n += 1;
            }
            per_cell_ok &= n == 4;
            total_faces += n;
        }
        check(
            &mut checks,
            format!("{name}: four faces per cell"),
            per_cell_ok && total_faces == 4 * grid.inside_count(),
            format!(
                "{total_faces} classified faces over {} cells",
                grid.inside_count()
            ),
        );
    }
    CaseResult {
        name: "geometry_partition",
        kind: OracleKind::Conservation,
        invariant: "boundary faces split exactly into wall and exit sets",
        checks,
    }
}

fn rotate_mask_ccw(mask: &str) -> String {
    let rows: Vec<Vec<char>> = mask
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.chars().collect())
        .collect();
    let nx = rows[0].len();
    let mut out = Vec::new();
    for i in (0..nx).rev() {
        out.push(rows.iter().map(|r| r[i]).collect::<String>());
    }
    out.join("\n")
}

fn case_geometry_rotation(_ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    for (name, mask) in [
        ("strip16", scenarios::strip_mask(16)),
        ("square_door16", scenarios::square_door_mask(16)),
        ("two_exit15", scenarios::two_exit_mask(15)),
    ] {
        let g = build_grid(&mask, 1.0, 1.0).unwrap();
        let r = build_grid(&rotate_mask_ccw(&mask), 1.0, 1.0).unwrap();
        let rot_dir = |d: Direction| match d {
            Direction::Left => Direction::Down,
            Direction::Down => Direction::Right,
            Direction::Right => Direction::Up,
            Direction::Up => Direction::Left,
        };
        let mut ok = r.inside_count() == g.inside_count();
        for &(i, j) in g.inside_cells() {
            let (ri, rj) = (g.ny() - 1 - j, i);
            ok &= r.is_inside(ri, rj);
            if !ok {
                break;
            }
            for dir in Direction::ALL {
                ok &= g.face_class(i, j, dir) == r.face_class(ri, rj, rot_dir(dir));
            }
        }
        check(
            &mut checks,
            format!("{name}: quarter turn commutes"),
            ok,
            format!("{} cells compared", g.inside_count()),
        );
    }
    CaseResult {
        name: "geometry_rotation",
        kind: OracleKind::Symmetry,
        invariant: "classification commutes with quarter-turn rotation",
        checks,
    }
}

// ---------------------------------------------------------------------
// Elliptic cases
// ---------------------------------------------------------------------

fn case_elliptic_max_principle(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let cg_tol = 1e-10;
    for (name, grid) in scenarios::builtin_grids() {
        let solved = ctx.solved(name, || grid, cg_tol);
        let grid = &solved.grid;
        let sol = &solved.sol;
        let mut min_u = f64::INFINITY;
        let mut max_u: f64 = f64::NEG_INFINITY;
        let mut interior_max: f64 = f64::NEG_INFINITY;
        for (ord, _) in grid.inside_cells().iter().enumerate() {
            let v = sol.u.get(ord);
            min_u = min_u.min(v);
            max_u = max_u.max(v);
            let exit_adjacent = Direction::ALL
                .iter()
                .any(|&d| grid.face_class_ord(ord, d) == FaceClass::Exit);
            if !exit_adjacent {
                interior_max = interior_max.max(v);
            }
        }
        check(
            &mut checks,
            format!("{name}: 0 < u < 1+cg_tol"),
            min_u > 0.0 && max_u < 1.0 + cg_tol,
            format!("u in [{min_u}, {max_u}]"),
        );
        check(
            &mut checks,
            format!("{name}: u < 1 off exit cells"),
            interior_max < 1.0,
            format!("interior max {interior_max}"),
        );
        check(
            &mut checks,
            format!("{name}: varpi positive"),
            sol.varpi > 0.0 && sol.varpi < 1.0,
            format!("varpi {}", sol.varpi),
        );
    }
    CaseResult {
        name: "elliptic_max_principle",
        kind: OracleKind::BoundE3,
        invariant: "discrete maximum principle with positive interior floor",
        checks,
    }
}

fn case_elliptic_exit_flux(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    for (name, grid) in scenarios::builtin_grids() {
        let solved = ctx.solved(name, || grid, 1e-10);
        let report = match exit_flux_report(&solved.sol, &solved.grid) {
            Ok(r) => r,
            Err(e) => {
                check(
                    &mut checks,
                    format!("{name}: exit flux"),
                    false,
                    e.to_string(),
                );
                continue;
            }
        };
        let min_face = report
            .per_face
            .iter()
            .map(|(_, f)| *f)
            .fold(f64::INFINITY, f64::min);
        check(
            &mut checks,
            format!("{name}: every exit face positive"),
            min_face > 0.0,
            format!("min face flux {min_face}"),
        );
        let ok = report.lower_bound * 0.95 <= report.total_exit_flux
            && report.total_exit_flux <= report.upper_bound * 1.05;
        check(
            &mut checks,
            format!("{name}: two-sided flux bound (5% slack)"),
            ok,
            format!(
                "{} <= {} <= {}",
                report.lower_bound, report.total_exit_flux, report.upper_bound
            ),
        );
    }
    // Analytic strip value: per-unit-length flux tanh(2) at delta = 0.5.
    let solved = ctx.solved("strip256_tight", || scenarios::strip_grid(256), 1e-13);
    let report = exit_flux_report(&solved.sol, &solved.grid).expect("flux");
    let per_len = report.total_exit_flux / 0.5;
    let expect = 2.0f64.tanh();
    check(
        &mut checks,
        "strip256: flux per unit length vs tanh(2)",
        (per_len - expect).abs() <= 5e-3,
        format!("measured {per_len} expect {expect} tol 5e-3"),
    );
    CaseResult {
        name: "elliptic_exit_flux",
        kind: OracleKind::BoundE3,
        invariant: "positive exit flux inside the two-sided area bound",
        checks,
    }
}

fn strip_u_error_inf(solved: &Solved) -> f64 {
    let grid = &solved.grid;
    let delta = 0.5;
    let mut worst: f64 = 0.0;
    for (ord, &(i, _)) in grid.inside_cells().iter().enumerate() {
        let x = (i as f64 + 0.5) * grid.hx();
        let exact = (x / delta).cosh() / (1.0 / delta).cosh();
        worst = worst.max((solved.sol.u.get(ord) - exact).abs());
    }
    worst
}

fn case_elliptic_strip_analytic(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved("strip256_tight", || scenarios::strip_grid(256), 1e-13);
    let err = strip_u_error_inf(&solved);
    check_le(
        &mut checks,
        "strip 256x128: ||u - cosh profile||_inf",
        err,
        2e-3,
    );
    // Left-edge value ~ 1/cosh(2).
    let left = solved.sol.u.at(&solved.grid, 0, 37);
    check(
        &mut checks,
        "strip 256x128: left edge vs 1/cosh(2)",
        (left - 1.0 / 2.0f64.cosh()).abs() <= 2e-3,
        format!("measured {left} expect {}", 1.0 / 2.0f64.cosh()),
    );
    CaseResult {
        name: "elliptic_strip_analytic",
        kind: OracleKind::AnalyticStrip,
        invariant: "strip potential matches the analytic cosh solution",
        checks,
    }
}

fn case_elliptic_strip_convergence(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let coarse = ctx.solved("strip128_tight", || scenarios::strip_grid(128), 1e-13);
    let fine = ctx.solved("strip256_tight", || scenarios::strip_grid(256), 1e-13);
    let e_coarse = strip_u_error_inf(&coarse);
    let e_fine = strip_u_error_inf(&fine);
    let ratio = e_coarse / e_fine;
    check(
        &mut checks,
        "error ratio 128->256 within [3.5, 4.5]",
        (3.5..=4.5).contains(&ratio),
        format!("e128 {e_coarse} e256 {e_fine} ratio {ratio}"),
    );
    CaseResult {
        name: "elliptic_strip_convergence",
        kind: OracleKind::Refinement,
        invariant: "second-order convergence of the potential solver",
        checks,
    }
}

fn case_elliptic_transform_identity(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    for name in ["strip64", "square_door64", "two_exit63"] {
        let solved = ctx.solved(name, || grid_by_name(name), 1e-10);
        let mut worst: f64 = 0.0;
        for ord in 0..solved.grid.inside_count() {
            let u = solved.sol.u.get(ord);
            let back = (-solved.sol.phi.get(ord) / solved.sol.delta).exp();
            worst = worst.max((back - u).abs() / u);
        }
        check_le(
            &mut checks,
            format!("{name}: exp(-phi/delta) vs u"),
            worst,
            1e-12,
        );
    }
    CaseResult {
        name: "elliptic_transform_identity",
        kind: OracleKind::Conservation,
        invariant: "potential transform round-trips to machine precision",
        checks,
    }
}

fn grid_by_name(name: &str) -> Grid {
    match name {
        "strip64" => scenarios::strip_grid(64),
        "square_door64" => scenarios::square_door_grid(64),
        "two_exit63" => scenarios::two_exit_grid(63),
        "l_room48" => scenarios::l_room_grid(),
        "corridor96" => scenarios::corridor_grid(),
        "pillar48" => scenarios::pillar_grid(),
        other => panic!("unknown grid {other}"),
    }
}

fn case_elliptic_mirror_symmetry(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let cg_tol = 1e-10;
    let solved = ctx.solved("square_door64", || scenarios::square_door_grid(64), cg_tol);
    let grid = &solved.grid;
    let mut worst: f64 = 0.0;
    for &(i, j) in grid.inside_cells() {
        let m = solved.sol.u.at(grid, i, grid.ny() - 1 - j);
        worst = worst.max((solved.sol.u.at(grid, i, j) - m).abs());
    }
    check_le(
        &mut checks,
        "square room: ||u - mirror(u)||_inf",
        worst,
        10.0 * cg_tol,
    );
    CaseResult {
        name: "elliptic_mirror_symmetry",
        kind: OracleKind::Symmetry,
        invariant: "mirror-symmetric scenarios yield mirror-symmetric solutions",
        checks,
    }
}

fn case_elliptic_critical_trace(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved(
        "two_exit_full63",
        || scenarios::two_exit_full_grid(63),
        1e-12,
    );
    let cells = critical_points(&solved.sol, &solved.grid, 1e-6);
    check(
        &mut checks,
        "two-exit room: critical cells fill the axis column",
        cells.len() == solved.grid.ny(),
        format!(
            "{} cells flagged over {} rows",
            cells.len(),
            solved.grid.ny()
        ),
    );
    let mut trace_ok = true;
    let mut positive_ok = true;
    let mut worst_rel: f64 = 0.0;
    for c in &cells {
        let rel = (c.trace - c.laplace_identity).abs() / c.laplace_identity;
        worst_rel = worst_rel.max(rel);
        trace_ok &= rel <= 0.10;
        positive_ok &= c.eigenvalues[1] > 0.0 && c.trace > 0.0;
    }
    check(
        &mut checks,
        "trace within 10% of u/delta^2",
        trace_ok,
        format!("worst relative deviation {worst_rel}"),
    );
    check(
        &mut checks,
        "at least one positive eigenvalue per cell",
        positive_ok,
        format!("{} cells audited", cells.len()),
    );
    CaseResult {
        name: "elliptic_critical_trace",
        kind: OracleKind::BoundE3,
        invariant: "critical cells carry the positive Hessian trace u/delta^2",
        checks,
    }
}

// ---------------------------------------------------------------------
// Field cases
// ---------------------------------------------------------------------

fn case_field_norm_bound(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    for (name, grid) in scenarios::builtin_grids() {
        let solved = ctx.solved(name, || grid, 1e-10);
        let max_norm = solved.field.w.max_norm();
        check(
            &mut checks,
            format!("{name}: ||w|| <= 1 on all cells"),
            max_norm <= 1.0,
            format!("max norm {max_norm}"),
        );
        let min_exit = solved.field.min_exit_normal(&solved.grid);
        check(
            &mut checks,
            format!("{name}: w points out through exits"),
            min_exit > 0.0,
            format!("min exit w·nu {min_exit}"),
        );
    }
    CaseResult {
        name: "field_norm_bound",
        kind: OracleKind::BoundE3,
        invariant: "routing directions are bounded by one and exit-outward",
        checks,
    }
}

fn case_field_lipschitz(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let mut rng = ctx.rng(0x4c69_7073);
    for &theta in &[0.05, 0.1, 0.5] {
        let mut worst_excess: f64 = f64::NEG_INFINITY;
        let mut ok = true;
        for _ in 0..10_000 {
            let a = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let b = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
            let na = regularized_normalize(a, theta);
            let nb = regularized_normalize(b, theta);
            let lhs = ((na[0] - nb[0]).powi(2) + (na[1] - nb[1]).powi(2)).sqrt();
            let rhs = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / theta;
            worst_excess = worst_excess.max(lhs - rhs * (1.0 + 1e-12));
            ok &= lhs <= rhs * (1.0 + 1e-12);
        }
        check(
            &mut checks,
            format!("theta {theta}: 10^4 random pairs"),
            ok,
            format!("worst excess {worst_excess}"),
        );
    }
    CaseResult {
        name: "field_lipschitz",
        kind: OracleKind::MonotonePair,
        invariant: "normalization is Lipschitz with constant 1/theta",
        checks,
    }
}

fn case_field_rotation_alignment(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let mut rng = ctx.rng(0x526f_7461);
    let mut rot_ok = true;
    let mut align_ok = true;
    let mut strict_ok = true;
    for _ in 0..2_000 {
        let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let theta = rng.gen_range(0.01..1.0);
        let n = regularized_normalize(x, theta);
        // Quarter turn R(x, y) = (−y, x).
        let rn = regularized_normalize([-x[1], x[0]], theta);
        rot_ok &= (rn[0] + n[1]).abs() < 1e-14 && (rn[1] - n[0]).abs() < 1e-14;
        align_ok &= n[0] * x[0] + n[1] * x[1] >= 0.0;
        strict_ok &= (n[0] * n[0] + n[1] * n[1]).sqrt() < 1.0;
    }
    check(
        &mut checks,
        "commutes with quarter turns",
        rot_ok,
        "2000 samples".into(),
    );
    check(
        &mut checks,
        "aligned with its argument",
        align_ok,
        "2000 samples".into(),
    );
    check(
        &mut checks,
        "norm strictly below one",
        strict_ok,
        "2000 samples".into(),
    );
    let far = regularized_normalize([1e12, 0.0], 0.5);
    check(
        &mut checks,
        "norm approaches one for large arguments",
        far[0] > 1.0 - 1e-12,
        format!("N(1e12 e_x) = {}", far[0]),
    );
    CaseResult {
        name: "field_rotation_alignment",
        kind: OracleKind::Symmetry,
        invariant: "normalization is rotation-equivariant, aligned and strictly sub-unit",
        checks,
    }
}

fn case_field_wall_tangency(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let coarse = ctx.solved("square_door32", || scenarios::square_door_grid(32), 1e-12);
    let fine = ctx.solved(
        "square_door64_tight",
        || scenarios::square_door_grid(64),
        1e-12,
    );
    let t_coarse = coarse.field.max_abs_wall_normal(&coarse.grid);
    let t_fine = fine.field.max_abs_wall_normal(&fine.grid);
    check(
        &mut checks,
        "max wall |w·nu| shrinks under refinement",
        t_fine < t_coarse,
        format!("h=1/32: {t_coarse}, h=1/64: {t_fine}"),
    );
    CaseResult {
        name: "field_wall_tangency",
        kind: OracleKind::Refinement,
        invariant: "raw wall-normal components vanish under refinement",
        checks,
    }
}

// ---------------------------------------------------------------------
// Hyperbolic cases
// ---------------------------------------------------------------------

fn square_evolution(
    ctx: &Ctx,
    n: usize,
    t_end: f64,
    instants: Vec<f64>,
    seal: bool,
    mass_threshold: f64,
) -> (
    Rc<Solved>,
    Vec<DensityState>,
    crate::hyperbolic::EvolutionReport,
) {
    let key = format!("square_door{n}");
    let solved = ctx.solved(&key, || scenarios::square_door_grid(n), 1e-10);
    let law = SpeedLaw::linear(1.0, 1.0).unwrap();
    let params = EvolveParams {
        t_end,
        cfl: 0.4,
        mass_threshold,
        output_instants: instants,
        seal_exits: seal,
    };
    let mut states = Vec::new();
    let (_, report) = evolve_with(
        DensityState::uniform(&solved.grid, 0.5),
        &solved.field,
        &law,
        &solved.grid,
        &params,
        |state, _| states.push(state.clone()),
    )
    .expect("evolution");
    (solved, states, report)
}

fn case_hyperbolic_conservation(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    // Open exits: mass + cumulative outflow stays at the initial mass.
    let (_, _, report) = square_evolution(ctx, 64, 3.5, vec![1.0, 2.0, 3.0], false, 1e-12);
    check(
        &mut checks,
        "open run covers >= 1000 steps",
        report.steps >= 1000,
        format!("{} steps", report.steps),
    );
    let m0 = report.initial_mass;
    let mut worst: f64 = 0.0;
    for row in &report.rows {
        worst = worst.max((row.mass + row.outflow - m0).abs());
    }
    check_le(
        &mut checks,
        "mass + outflow drift (relative)",
        worst / m0,
        1e-12,
    );

    // Sealed exits: a closed box conserves mass to round-off.
    let (_, _, sealed) = square_evolution(ctx, 64, 3.5, vec![1.0, 2.0, 3.0], true, 1e-12);
    check(
        &mut checks,
        "sealed run covers >= 1000 steps",
        sealed.steps >= 1000,
        format!("{} steps", sealed.steps),
    );
    let mut worst_sealed: f64 = 0.0;
    for row in &sealed.rows {
        worst_sealed = worst_sealed.max((row.mass - sealed.initial_mass).abs());
        if row.outflow != 0.0 {
            check(
                &mut checks,
                "sealed run has zero outflow",
                false,
                format!("outflow {}", row.outflow),
            );
        }
    }
    check_le(
        &mut checks,
        "sealed mass drift (relative)",
        worst_sealed / sealed.initial_mass,
        1e-12,
    );
    CaseResult {
        name: "hyperbolic_conservation",
        kind: OracleKind::Conservation,
        invariant: "exact mass accounting; walls are impermeable",
        checks,
    }
}

fn case_hyperbolic_range_monotone(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    // Range invariance across evolutions on every bundled scenario.
    let law = SpeedLaw::linear(1.0, 1.0).unwrap();
    for name in [
        "strip64",
        "square_door64",
        "two_exit63",
        "l_room48",
        "corridor96",
        "pillar48",
    ] {
        let solved = ctx.solved(name, || grid_by_name(name), 1e-10);
        let params = EvolveParams::to_time(1.0, 0.4);
        let (_, report) = evolve(
            DensityState::uniform(&solved.grid, 0.5),
            &solved.field,
            &law,
            &solved.grid,
            &params,
        )
        .expect("evolution");
        check(
            &mut checks,
            format!("{name}: rho within [0, R_max] for all steps"),
            report.global_min_rho >= 0.0 && report.global_max_rho <= 1.0,
            format!(
                "range [{}, {}]",
                report.global_min_rho, report.global_max_rho
            ),
        );
    }

    // Ordered random pairs stay ordered through one step.
    let solved = ctx.solved("square_door32", || scenarios::square_door_grid(32), 1e-12);
    let grid = &solved.grid;
    let mut rng = ctx.rng(0x4d6f_6e6f);
    let dt = cfl_timestep(&solved.field, &law, grid, 0.4, f64::INFINITY).unwrap();
    let mut ok = true;
    let mut worst_violation: f64 = 0.0;
    for _ in 0..200 {
        let hi: Vec<f64> = (0..grid.inside_count())
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        let lo: Vec<f64> = hi.iter().map(|&v| v * rng.gen_range(0.0..1.0)).collect();
        let sa = DensityState {
            rho: ScalarField::from_vec(grid, lo),
            t: 0.0,
        };
        let sb = DensityState {
            rho: ScalarField::from_vec(grid, hi),
            t: 0.0,
        };
        let ra = step(&sa, &solved.field, &law, dt, grid)
            .expect("step")
            .state;
        let rb = step(&sb, &solved.field, &law, dt, grid)
            .expect("step")
            .state;
        for (x, y) in ra.rho.values().iter().zip(rb.rho.values()) {
            if x > &(y + 1e-14) {
                ok = false;
                worst_violation = worst_violation.max(x - y);
            }
        }
    }
    check(
        &mut checks,
        "200 ordered pairs preserved by the update",
        ok,
        format!("worst violation {worst_violation}"),
    );
    CaseResult {
        name: "hyperbolic_range_monotone",
        kind: OracleKind::MonotonePair,
        invariant: "updates stay in [0, R_max] and preserve pointwise order",
        checks,
    }
}

fn case_hyperbolic_semigroup(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved("square_door64", || scenarios::square_door_grid(64), 1e-10);
    let grid = &solved.grid;
    let law = SpeedLaw::linear(1.0, 1.0).unwrap();
    let rho0 = DensityState::uniform(grid, 0.5);

    let mut p_full = EvolveParams::to_time(0.2, 0.4);
    p_full.output_instants = vec![0.1, 0.2];
    p_full.mass_threshold = 1e-12;
    let (end_full, _) = evolve(rho0.clone(), &solved.field, &law, grid, &p_full).unwrap();

    let mut p1 = EvolveParams::to_time(0.1, 0.4);
    p1.mass_threshold = 1e-12;
    let (mid, _) = evolve(rho0, &solved.field, &law, grid, &p1).unwrap();
    let mut p2 = EvolveParams::to_time(0.2, 0.4);
    p2.mass_threshold = 1e-12;
    let (end_split, _) = evolve(mid, &solved.field, &law, grid, &p2).unwrap();

    check(
        &mut checks,
        "evolve(0,0.2) equals evolve(0,0.1)+evolve(0.1,0.2) bitwise",
        end_full.rho.values() == end_split.rho.values() && end_full.t == end_split.t,
        format!(
            "max abs diff {}",
            end_full
                .rho
                .values()
                .iter()
                .zip(end_split.rho.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        ),
    );
    CaseResult {
        name: "hyperbolic_semigroup",
        kind: OracleKind::Conservation,
        invariant: "restarted evolution is bit-identical under the same dt schedule",
        checks,
    }
}

fn case_hyperbolic_evacuation_baseline(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let (_, _, report) = square_evolution(ctx, 64, 200.0, vec![], false, 1e-3);
    match report.evacuation_time {
        EvacuationTime::Reached(t) => {
            check(
                &mut checks,
                "mass falls below 1e-3 of initial in finite time",
                t.is_finite() && t > 0.0,
                format!("evacuation_time {t}"),
            );
            if SQUARE_ROOM_EVAC_BASELINE.is_nan() {
                check(
                    &mut checks,
                    "baseline recorded",
                    false,
                    format!("no baseline frozen yet; measured {t:.17e}"),
                );
            } else {
                check(
                    &mut checks,
                    "reproduces the recorded baseline within 1e-12",
                    (t - SQUARE_ROOM_EVAC_BASELINE).abs() <= 1e-12,
                    format!("measured {t:.17e} baseline {SQUARE_ROOM_EVAC_BASELINE:.17e}"),
                );
            }
        }
        EvacuationTime::NotReached => {
            check(
                &mut checks,
                "evacuation reached",
                false,
                "mass never crossed the threshold".into(),
            );
        }
    }
    CaseResult {
        name: "hyperbolic_evacuation_baseline",
        kind: OracleKind::Conservation,
        invariant: "square-room evacuation finishes and reproduces its baseline",
        checks,
    }
}

fn max_l1_rate(grid: &Grid, states: &[DensityState]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..states.len() {
        for b in a + 1..states.len() {
            let dt = (states[b].t - states[a].t).abs();
            if dt < 1e-9 {
                continue;
            }
            worst = worst.max(l1_distance(grid, &states[a].rho, &states[b].rho) / dt);
        }
    }
    worst
}

fn case_hyperbolic_l1_lipschitz(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let instants: Vec<f64> = (1..=6).map(|k| 0.05 * k as f64).collect();
    let (solved64, states64, _) = square_evolution(ctx, 64, 0.3, instants.clone(), false, 1e-12);
    let rate64 = max_l1_rate(&solved64.grid, &states64);
    let bound = 4.0 * 1.0 * 1.0 * perimeter(&solved64.grid);
    check_le(
        &mut checks,
        "rate at h=1/64 within 4 R V perimeter",
        rate64,
        bound,
    );

    let (solved128, states128, _) = square_evolution(ctx, 128, 0.3, instants, false, 1e-12);
    let rate128 = max_l1_rate(&solved128.grid, &states128);
    check(
        &mut checks,
        "rate grows at most 25% at h=1/128",
        rate128 <= 1.25 * rate64,
        format!("rate64 {rate64} rate128 {rate128}"),
    );
    CaseResult {
        name: "hyperbolic_l1_lipschitz",
        kind: OracleKind::Refinement,
        invariant: "L1 time-Lipschitz rate is bounded and refinement-stable",
        checks,
    }
}

/// Strip evolution at resolution `nx` to t = 0.3 with rho0 = 0.5.
fn strip_state_at(ctx: &Ctx, nx: usize) -> (Rc<Solved>, DensityState) {
    let key = format!("strip{nx}");
    let solved = ctx.solved(&key, || scenarios::strip_grid(nx), 1e-10);
    let law = SpeedLaw::linear(1.0, 1.0).unwrap();
    let mut params = EvolveParams::to_time(0.3, 0.4);
    params.mass_threshold = 1e-12;
    let (state, _) = evolve(
        DensityState::uniform(&solved.grid, 0.5),
        &solved.field,
        &law,
        &solved.grid,
        &params,
    )
    .expect("evolution");
    (solved, state)
}

fn case_hyperbolic_tv_refinement(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let mut tvs = Vec::new();
    for nx in [32, 64, 128] {
        let (solved, state) = strip_state_at(ctx, nx);
        tvs.push(crate::hyperbolic::discrete_tv(&state.rho, &solved.grid));
    }
    let max_tv = tvs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let base = tvs[0].max(1e-12);
    check(
        &mut checks,
        "TV at fixed t stays bounded as h halves twice",
        max_tv <= 1.5 * base + 0.1,
        format!("tv(32) {} tv(64) {} tv(128) {}", tvs[0], tvs[1], tvs[2]),
    );
    CaseResult {
        name: "hyperbolic_tv_refinement",
        kind: OracleKind::Refinement,
        invariant: "total variation does not blow up under refinement",
        checks,
    }
}

/// Block-averages a field on the strip at 2n down to the strip at n.
fn restrict_strip(fine_grid: &Grid, fine: &ScalarField, coarse_grid: &Grid) -> ScalarField {
    let mut values = vec![0.0; coarse_grid.inside_count()];
    for (ord, &(i, j)) in coarse_grid.inside_cells().iter().enumerate() {
        let mut acc = 0.0;
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            acc += fine.at(fine_grid, 2 * i + di, 2 * j + dj);
        }
        values[ord] = 0.25 * acc;
    }
    ScalarField::from_vec(coarse_grid, values)
}

fn case_hyperbolic_l1_refinement(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let (s32, r32) = strip_state_at(ctx, 32);
    let (s64, r64) = strip_state_at(ctx, 64);
    let (s128, r128) = strip_state_at(ctx, 128);
    let d1 = l1_distance(
        &s32.grid,
        &r32.rho,
        &restrict_strip(&s64.grid, &r64.rho, &s32.grid),
    );
    let d2 = l1_distance(
        &s64.grid,
        &r64.rho,
        &restrict_strip(&s128.grid, &r128.rho, &s64.grid),
    );
    let ratio = d1 / d2;
    check(
        &mut checks,
        "L1 Cauchy differences shrink (ratio >= 1.3)",
        ratio >= 1.3,
        format!("d(32,64) {d1} d(64,128) {d2} ratio {ratio}"),
    );
    CaseResult {
        name: "hyperbolic_l1_refinement",
        kind: OracleKind::Refinement,
        invariant: "solutions converge in L1 under grid refinement",
        checks,
    }
}

// ---------------------------------------------------------------------
// Trajectory cases
// ---------------------------------------------------------------------

fn case_trajectory_strip_exits(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved("strip128_tight", || scenarios::strip_grid(128), 1e-13);
    let grid = &solved.grid;
    let sampler = FieldSampler::new(grid, &solved.field, &solved.sol);
    let params = PathParams {
        dt_path: 0.5 * grid.hx(),
        t_cap: 60.0,
        stall_tol: 1e-6,
    };
    let map = evacuation_map(&sampler, &params, 1).expect("map");
    check(
        &mut checks,
        "100% of cell-center starts exit",
        map.exited_fraction == 1.0,
        format!(
            "exited {} stalled {} of {}",
            map.exited_fraction,
            map.stalled_fraction,
            map.entries.len()
        ),
    );

    // Lyapunov audit along a spread of recorded paths.
    let tol = 2.0 * (params.dt_path * params.dt_path + grid.hx() * grid.hx());
    let mut worst = f64::NEG_INFINITY;
    for &start in &[
        [0.1, 0.3],
        [0.3, 0.05],
        [0.5, 0.25],
        [0.7, 0.45],
        [0.9, 0.1],
    ] {
        let tr = integrate_path(start, &sampler, &params).expect("path");
        worst = worst.max(lyapunov_audit(&tr, &sampler));
    }
    check_le(&mut checks, "max phi increase along paths", worst, tol);
    CaseResult {
        name: "trajectory_strip_exits",
        kind: OracleKind::AnalyticStrip,
        invariant: "every strip start exits with nonincreasing potential",
        checks,
    }
}

fn stall_fraction(ctx: &Ctx, n: usize) -> (f64, usize, usize) {
    let key = format!("two_exit{n}_tight");
    let solved = ctx.solved(&key, || scenarios::two_exit_grid(n), 1e-12);
    let grid = &solved.grid;
    let sampler = FieldSampler::new(grid, &solved.field, &solved.sol);
    let params = PathParams {
        dt_path: 0.5 * grid.hx(),
        t_cap: 40.0,
        stall_tol: 1e-3,
    };
    let map = evacuation_map(&sampler, &params, 1).expect("map");
    let stalled = map
        .entries
        .iter()
        .filter(|e| e.outcome == OutcomeKind::Stalled)
        .count();
    (map.stalled_fraction, stalled, map.entries.len())
}

fn case_trajectory_two_exit_stall(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let (f63, stalled63, total63) = stall_fraction(ctx, 63);
    // The symmetry axis holds one cell column; the bound allows two.
    let bound63 = 2.0 * 63.0 / total63 as f64;
    check(
        &mut checks,
        "stalled fraction within twice the axis share (n=63)",
        f63 <= bound63,
        format!("stalled {stalled63}/{total63} fraction {f63} bound {bound63}"),
    );
    check(
        &mut checks,
        "the stalled set is nonempty at n=63",
        stalled63 > 0,
        format!("stalled {stalled63}"),
    );
    let (f127, stalled127, total127) = stall_fraction(ctx, 127);
    check(
        &mut checks,
        "stalled fraction decreases under refinement",
        f127 < f63,
        format!("n=63: {f63} ({stalled63}/{total63}), n=127: {f127} ({stalled127}/{total127})"),
    );
    CaseResult {
        name: "trajectory_two_exit_stall",
        kind: OracleKind::Lyapunov,
        invariant: "the stalled set shrinks toward the measure-zero axis",
        checks,
    }
}

fn case_trajectory_noncrossing(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved("strip64", || scenarios::strip_grid(64), 1e-10);
    let grid = &solved.grid;
    let sampler = FieldSampler::new(grid, &solved.field, &solved.sol);
    let params = PathParams {
        dt_path: 0.5 * grid.hx(),
        t_cap: 60.0,
        stall_tol: 1e-9,
    };
    let tol = params.dt_path * params.dt_path;
    for &start in &[[0.15, 0.31], [0.42, 0.11], [0.66, 0.44]] {
        let a = integrate_path(start, &sampler, &params).expect("path");
        let k = (a.samples.len() / 3).max(1);
        let b = integrate_path(a.samples[k].1, &sampler, &params).expect("path");
        let mut worst: f64 = 0.0;
        for (sa, sb) in a.samples[k..].iter().zip(b.samples.iter()) {
            let d = ((sa.1[0] - sb.1[0]).powi(2) + (sa.1[1] - sb.1[1]).powi(2)).sqrt();
            worst = worst.max(d);
        }
        check_le(
            &mut checks,
            format!("suffix from ({}, {}) matches", start[0], start[1]),
            worst,
            tol,
        );
    }
    CaseResult {
        name: "trajectory_noncrossing",
        kind: OracleKind::MonotonePair,
        invariant: "paths restarted on a sample reproduce the suffix",
        checks,
    }
}

fn case_trajectory_determinism_speed(ctx: &Ctx) -> CaseResult {
    let mut checks = Vec::new();
    let solved = ctx.solved("strip64", || scenarios::strip_grid(64), 1e-10);
    let grid = &solved.grid;
    let sampler = FieldSampler::new(grid, &solved.field, &solved.sol);
    let params = PathParams {
        dt_path: 0.5 * grid.hx(),
        t_cap: 60.0,
        stall_tol: 1e-9,
    };
    let a = integrate_path([0.21, 0.17], &sampler, &params).expect("path");
    let b = integrate_path([0.21, 0.17], &sampler, &params).expect("path");
    check(
        &mut checks,
        "identical inputs give bit-identical trajectories",
        a.samples == b.samples,
        format!("{} samples", a.samples.len()),
    );
    let mut speed_ok = true;
    let mut worst: f64 = 0.0;
    for pair in a.samples.windows(2) {
        let d =
            ((pair[1].1[0] - pair[0].1[0]).powi(2) + (pair[1].1[1] - pair[0].1[1]).powi(2)).sqrt();
        let dt = pair[1].0 - pair[0].0;
        worst = worst.max(d - dt);
        speed_ok &= d <= dt * (1.0 + 1e-12);
    }
    check(
        &mut checks,
        "consecutive samples move at most dt",
        speed_ok,
        format!("worst excess {worst}"),
    );

    // Exit-time differences shrink when dt halves.
    let t_at = |dt: f64| {
        let p = PathParams {
            dt_path: dt,
            t_cap: 60.0,
            stall_tol: 1e-9,
        };
        match integrate_path([0.4, 0.21], &sampler, &p)
            .expect("path")
            .outcome
        {
            PathOutcome::Exited { t_exit, .. } => t_exit,
            other => panic!("expected exit, got {other:?}"),
        }
    };
    let e1 = (t_at(grid.hx()) - t_at(grid.hx() / 2.0)).abs();
    let e2 = (t_at(grid.hx() / 2.0) - t_at(grid.hx() / 4.0)).abs();
    check(
        &mut checks,
        "exit-time differences shrink under dt refinement",
        e2 < e1 && e1 < 1e-5,
        format!("e1 {e1} e2 {e2}"),
    );
    CaseResult {
        name: "trajectory_determinism_speed",
        kind: OracleKind::Conservation,
        invariant: "tracing is deterministic, speed-bounded and dt-consistent",
        checks,
    }
}

// ---------------------------------------------------------------------
// CLI cases
// ---------------------------------------------------------------------

fn sample_scenarios() -> Vec<crate::scenario::Scenario> {
    use crate::scenario::{Rho0Spec, Scenario, SpeedLawSpec};
    let mut strip = Scenario {
        mask: scenarios::strip_mask(16).trim_end().to_string(),
        hx: 1.0 / 16.0,
        hy: 1.0 / 16.0,
        rho0: Rho0Spec::Uniform(0.5),
        t_end: 0.5,
        ..Scenario::default()
    };
    strip.output_instants = vec![0.25, 0.5];
    strip.paths = vec![[0.3, 0.25], [0.7, 0.1]];

    let custom = Scenario {
        mask: scenarios::square_door_mask(16).trim_end().to_string(),
        hx: 1.0 / 16.0,
        hy: 1.0 / 16.0,
        law: SpeedLawSpec::Custom {
            table: vec![(0.0, 2.0), (0.5, 1.0), (2.0, 0.0)],
        },
        rho0: Rho0Spec::Uniform(1.25),
        ..Scenario::default()
    };
    vec![strip, custom]
}

fn case_cli_roundtrip(_ctx: &Ctx) -> CaseResult {
    use crate::scenario::{emit, parse_scenario, validate};
    let mut checks = Vec::new();
    for (k, sc) in sample_scenarios().into_iter().enumerate() {
        validate(&sc).expect("sample scenario must be valid");
        let text = emit(&sc);
        match parse_scenario(&text) {
            Ok(back) => {
                check(
                    &mut checks,
                    format!("scenario {k}: parse(emit(s)) == s"),
                    back == sc,
                    format!("{} bytes", text.len()),
                );
                check(
                    &mut checks,
                    format!("scenario {k}: emitter is byte-stable"),
                    emit(&back) == text,
                    "second trip".into(),
                );
            }
            Err(e) => check(
                &mut checks,
                format!("scenario {k}: reparse"),
                false,
                e.to_string(),
            ),
        }
    }
    CaseResult {
        name: "cli_roundtrip",
        kind: OracleKind::Symmetry,
        invariant: "scenario emission and parsing are inverse",
        checks,
    }
}

fn case_cli_reproducibility(_ctx: &Ctx) -> CaseResult {
    use crate::pipeline::{run_pipeline, StageSet};
    use crate::scenario::parse_scenario;
    let mut checks = Vec::new();

    let mut text = String::from(
        "hx = 0.0625\nhy = 0.0625\nrho0 = uniform 0.5\nt_end = 0.2\ntrace_stride = 4\nt_cap = 20\nmask:\n",
    );
    text.push_str(&scenarios::strip_mask(16));
    let sc = parse_scenario(&text).expect("scenario");

    let base = std::env::temp_dir().join(format!("evacflow_verify_{}", std::process::id()));
    let dirs = [base.join("a"), base.join("b"), base.join("c")];
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d);
    }
    let cwd = std::path::Path::new(".");
    run_pipeline(&sc, StageSet::all(), &dirs[0], cwd).expect("run a");
    run_pipeline(&sc, StageSet::all(), &dirs[1], cwd).expect("run b");
    // Field stage alone, twice into the same dir: outputs must not change.
    run_pipeline(&sc, StageSet::field_only(), &dirs[2], cwd).expect("run c1");
    let u_first = std::fs::read(dirs[2].join("u.csv")).unwrap();
    run_pipeline(&sc, StageSet::field_only(), &dirs[2], cwd).expect("run c2");
    let u_second = std::fs::read(dirs[2].join("u.csv")).unwrap();

    let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    check(
        &mut checks,
        "runs produce csv artifacts",
        !names.is_empty(),
        format!("{} files", names.len()),
    );
    let mut identical = true;
    for n in &names {
        let a = std::fs::read(dirs[0].join(n)).unwrap();
        let b = std::fs::read(dirs[1].join(n)).unwrap_or_default();
        identical &= a == b;
    }
    check(
        &mut checks,
        "identical runs give byte-identical csv outputs",
        identical,
        format!("{} files compared", names.len()),
    );
    check(
        &mut checks,
        "rerunning the field stage is idempotent",
        u_first == u_second,
        format!("{} bytes", u_first.len()),
    );
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d);
    }
    let _ = std::fs::remove_dir_all(&base);
    CaseResult {
        name: "cli_reproducibility",
        kind: OracleKind::Conservation,
        invariant: "identical scenarios produce byte-identical artifacts",
        checks,
    }
}

// ---------------------------------------------------------------------
// Registry, coverage manifest, runner
// ---------------------------------------------------------------------

type CaseFn = fn(&Ctx) -> CaseResult;

const CASES: &[(&str, CaseFn)] = &[
    ("geometry_partition", case_geometry_partition),
    ("geometry_rotation", case_geometry_rotation),
    ("elliptic_max_principle", case_elliptic_max_principle),
    ("elliptic_exit_flux", case_elliptic_exit_flux),
    ("elliptic_strip_analytic", case_elliptic_strip_analytic),
    (
        "elliptic_strip_convergence",
        case_elliptic_strip_convergence,
    ),
    (
        "elliptic_transform_identity",
        case_elliptic_transform_identity,
    ),
    ("elliptic_mirror_symmetry", case_elliptic_mirror_symmetry),
    ("elliptic_critical_trace", case_elliptic_critical_trace),
    ("field_norm_bound", case_field_norm_bound),
    ("field_lipschitz", case_field_lipschitz),
    ("field_rotation_alignment", case_field_rotation_alignment),
    ("field_wall_tangency", case_field_wall_tangency),
    ("hyperbolic_conservation", case_hyperbolic_conservation),
    ("hyperbolic_range_monotone", case_hyperbolic_range_monotone),
    ("hyperbolic_semigroup", case_hyperbolic_semigroup),
    (
        "hyperbolic_evacuation_baseline",
        case_hyperbolic_evacuation_baseline,
    ),
    ("hyperbolic_l1_lipschitz", case_hyperbolic_l1_lipschitz),
    ("hyperbolic_tv_refinement", case_hyperbolic_tv_refinement),
    ("hyperbolic_l1_refinement", case_hyperbolic_l1_refinement),
    ("trajectory_strip_exits", case_trajectory_strip_exits),
    ("trajectory_two_exit_stall", case_trajectory_two_exit_stall),
    ("trajectory_noncrossing", case_trajectory_noncrossing),
    (
        "trajectory_determinism_speed",
        case_trajectory_determinism_speed,
    ),
    ("cli_roundtrip", case_cli_roundtrip),
    ("cli_reproducibility", case_cli_reproducibility),
];

/// Maps every module invariant to the case that certifies it.
pub const COVERAGE: &[(&str, &str, &str)] = &[
    ("geometry", "boundary face partition", "geometry_partition"),
    (
        "geometry",
        "four classified faces per cell",
        "geometry_partition",
    ),
    ("geometry", "rotation equivariance", "geometry_rotation"),
    (
        "elliptic",
        "discrete maximum principle",
        "elliptic_max_principle",
    ),
    (
        "elliptic",
        "analytic strip solution",
        "elliptic_strip_analytic",
    ),
    (
        "elliptic",
        "exit-face flux positivity",
        "elliptic_exit_flux",
    ),
    (
        "elliptic",
        "two-sided exit flux bound",
        "elliptic_exit_flux",
    ),
    (
        "elliptic",
        "second-order convergence",
        "elliptic_strip_convergence",
    ),
    (
        "elliptic",
        "transform consistency",
        "elliptic_transform_identity",
    ),
    ("elliptic", "mirror symmetry", "elliptic_mirror_symmetry"),
    (
        "elliptic",
        "critical-cell trace signature",
        "elliptic_critical_trace",
    ),
    ("field", "Lipschitz bound 1/theta", "field_lipschitz"),
    (
        "field",
        "strict sub-unit norm with unit limit",
        "field_rotation_alignment",
    ),
    ("field", "rotation equivariance", "field_rotation_alignment"),
    ("field", "monotone alignment", "field_rotation_alignment"),
    ("field", "unit bound over scenarios", "field_norm_bound"),
    (
        "field",
        "wall tangency under refinement",
        "field_wall_tangency",
    ),
    (
        "hyperbolic",
        "L-infinity range stability",
        "hyperbolic_range_monotone",
    ),
    (
        "hyperbolic",
        "conservation accounting",
        "hyperbolic_conservation",
    ),
    (
        "hyperbolic",
        "wall impermeability",
        "hyperbolic_conservation",
    ),
    (
        "hyperbolic",
        "update monotonicity",
        "hyperbolic_range_monotone",
    ),
    ("hyperbolic", "L1 time Lipschitz", "hyperbolic_l1_lipschitz"),
    (
        "hyperbolic",
        "TV bounded under refinement",
        "hyperbolic_tv_refinement",
    ),
    (
        "hyperbolic",
        "L1 grid convergence",
        "hyperbolic_l1_refinement",
    ),
    (
        "hyperbolic",
        "semigroup determinism",
        "hyperbolic_semigroup",
    ),
    (
        "hyperbolic",
        "finite evacuation baseline",
        "hyperbolic_evacuation_baseline",
    ),
    (
        "trajectory",
        "non-crossing suffix",
        "trajectory_noncrossing",
    ),
    (
        "trajectory",
        "exit-time dt consistency",
        "trajectory_determinism_speed",
    ),
    ("trajectory", "determinism", "trajectory_determinism_speed"),
    ("trajectory", "speed bound", "trajectory_determinism_speed"),
    (
        "trajectory",
        "full strip evacuation with Lyapunov descent",
        "trajectory_strip_exits",
    ),
    (
        "trajectory",
        "stall set shrinks under refinement",
        "trajectory_two_exit_stall",
    ),
    ("cli", "scenario round-trip", "cli_roundtrip"),
    ("cli", "byte reproducibility", "cli_reproducibility"),
    ("cli", "stage isolation", "cli_reproducibility"),
];

fn coverage_case() -> CaseResult {
    let mut checks = Vec::new();
    let mut missing = Vec::new();
    for (_, invariant, case) in COVERAGE {
        if !CASES.iter().any(|(name, _)| name == case) {
            missing.push(format!("{invariant} -> {case}"));
        }
    }
    check(
        &mut checks,
        "every manifest entry names an existing case",
        missing.is_empty(),
        if missing.is_empty() {
            format!("{} invariants mapped", COVERAGE.len())
        } else {
            missing.join("; ")
        },
    );
    let mut unmapped = Vec::new();
    for (name, _) in CASES {
        if !COVERAGE.iter().any(|(_, _, case)| case == name) {
            unmapped.push(*name);
        }
    }
    check(
        &mut checks,
        "every case certifies at least one invariant",
        unmapped.is_empty(),
        if unmapped.is_empty() {
            format!("{} cases", CASES.len())
        } else {
            unmapped.join("; ")
        },
    );
    CaseResult {
        name: "verification_coverage",
        kind: OracleKind::Conservation,
        invariant: "the oracle suite covers every module invariant",
        checks,
    }
}

/// Names of all registered cases, in execution order.
pub fn case_names() -> Vec<&'static str> {
    CASES.iter().map(|(name, _)| *name).collect()
}

/// Runs the oracle suite. `selection` filters cases by substring match on
/// the case name; randomized cases are seeded deterministically from
/// `seed`.
pub fn run_oracles(selection: Option<&str>, seed: u64) -> VerifyReport {
    let ctx = Ctx::new(seed);
    let mut results = Vec::new();
    results.push(coverage_case());
    for (name, case) in CASES {
        if let Some(filter) = selection {
            if !name.contains(filter) {
                continue;
            }
        }
        results.push(case(&ctx));
    }
    VerifyReport { seed, results }
}
