//! Exit-potential solver.
//!
//! The potential φ of the regularized eikonal equation
//! `‖∇φ‖² − δΔφ = 1` (zero on exits, zero normal derivative on walls) is
//! obtained through the Hopf–Cole substitution `u = exp(−φ/δ)`, which turns
//! it into the linear screened problem
//!
//! ```text
//! u = δ²Δu   in Ω,    ∂u/∂ν = 0 on walls,    u = 1 on exits.
//! ```
//!
//! The discretization is a 5-point stencil over inside cells. Wall faces
//! use mirror ghosts (exact zero flux); exit faces impose the Dirichlet
//! value at the face midpoint through the ghost `u_g = 2 − u_in`, which is
//! second-order accurate and keeps the system symmetric positive definite.
//! The solve is Jacobi-preconditioned conjugate gradients.

use crate::fields::{ScalarField, VectorField};
use crate::geometry::{Direction, Face, FaceClass, Grid};
use thiserror::Error;

#[derive(Debug, Clone, Copy)]
pub struct EllipticParams {
    /// Regularization length δ > 0.
    pub delta: f64,
    /// Relative residual tolerance of the CG solve.
    pub cg_tol: f64,
    /// Iteration budget; 0 selects the default `50·(nx+ny)`.
    pub cg_max_iter: usize,
}

impl EllipticParams {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            cg_tol: 1e-10,
            cg_max_iter: 0,
        }
    }

    pub fn with_tol(delta: f64, cg_tol: f64) -> Self {
        Self {
            delta,
            cg_tol,
            cg_max_iter: 0,
        }
    }

    fn max_iter(&self, grid: &Grid) -> usize {
        if self.cg_max_iter > 0 {
            self.cg_max_iter
        } else {
            50 * (grid.nx() + grid.ny())
        }
    }

    fn validate(&self) -> Result<(), EllipticError> {
        if !(self.delta > 0.0) {
            return Err(EllipticError::BadParams {
                what: format!("delta must be strictly positive, got {}", self.delta),
            });
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(EllipticError::BadParams {
                what: format!("cg_tol must lie in (0, 1), got {}", self.cg_tol),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error("invalid elliptic parameters: {what}")]
    BadParams { what: String },
    #[error("conjugate gradients did not reach tolerance {tol} in {iters} iterations (residual {residual})")]
    CgDivergence {
        iters: usize,
        tol: f64,
        residual: f64,
    },
    #[error("discrete maximum principle violated: u = {value} at cell ({i}, {j})")]
    MaximumPrincipleViolation { i: usize, j: usize, value: f64 },
    #[error("nonpositive flux {flux} at exit face ({i}, {j}) {dir:?}")]
    NonpositiveExitFlux {
        i: usize,
        j: usize,
        dir: Direction,
        flux: f64,
    },
}

/// Assembled symmetric positive definite system over inside cells,
/// `A u = b`, with the diagonal kept separate for Jacobi preconditioning.
/// Off-diagonal entries are stored in compressed sparse rows.
#[derive(Debug, Clone)]
pub struct EllipticSystem {
    pub n: usize,
    pub diag: Vec<f64>,
    pub indptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl EllipticSystem {
    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for row in 0..self.n {
            let mut acc = self.diag[row] * x[row];
            for k in self.indptr[row]..self.indptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            y[row] = acc;
        }
    }

    /// Row entries `(diagonal, [(col, coeff)...])` for inspection in tests.
    pub fn row(&self, row: usize) -> (f64, Vec<(usize, f64)>) {
        let entries = (self.indptr[row]..self.indptr[row + 1])
            .map(|k| (self.cols[k] as usize, self.vals[k]))
            .collect();
        (self.diag[row], entries)
    }
}

/// Assembles the 5-point discretization of `u − δ²Δu = 0` with the mixed
/// boundary treatment described in the module docs.
pub fn assemble_system(grid: &Grid, params: &EllipticParams) -> EllipticSystem {
    let n = grid.inside_count();
    let d2 = params.delta * params.delta;
    let cx = d2 / (grid.hx() * grid.hx());
    let cy = d2 / (grid.hy() * grid.hy());

    let mut diag = vec![0.0; n];
    let mut indptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = vec![0.0; n];
    indptr.push(0);

    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let mut d = 1.0;
        for dir in Direction::ALL {
            let c = if dir.is_x_normal() { cx } else { cy };
            match grid.face_class_ord(ord, dir) {
                FaceClass::Interior => {
                    let (ni, nj) = grid
                        .neighbor(i, j, dir)
                        .expect("interior face has neighbor");
                    let nord = grid.ordinal(ni, nj).expect("interior neighbor is inside");
                    d += c;
                    cols.push(nord as u32);
                    vals.push(-c);
                }
                FaceClass::Wall => {
                    // Mirror ghost: zero net flux, no contribution.
                }
                FaceClass::Exit => {
                    // Ghost u_g = 2 − u_in pins the face midpoint to 1:
                    // the ghost's −c·u_g splits into +c·u_in and −2c to rhs.
                    d += 2.0 * c;
                    rhs[ord] += 2.0 * c;
                }
            }
        }
        diag[ord] = d;
        indptr.push(cols.len());
    }

    EllipticSystem {
        n,
        diag,
        indptr,
        cols,
        vals,
        rhs,
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Returns `(solution, iterations, relative residual)`.
fn pcg_jacobi(
    sys: &EllipticSystem,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64), EllipticError> {
    let n = sys.n;
    let norm_b = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok((vec![0.0; n], 0, 0.0));
    }

    let mut x = vec![0.0; n];
    let mut r = sys.rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&sys.diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();

    for iter in 1..=max_iter {
        sys.matvec(&p, &mut q);
        let pq: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
        if res <= tol {
            return Ok((x, iter, res));
        }
        for k in 0..n {
            z[k] = r[k] / sys.diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }

    let res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / norm_b;
    Err(EllipticError::CgDivergence {
        iters: max_iter,
        tol,
        residual: res,
    })
}

/// Solved potential: `u`, `φ = −δ ln u`, the cell-centered `∇φ`, and the
/// measured interior lower bound `ϖ = min u`.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub u: ScalarField,
    pub phi: ScalarField,
    pub grad_phi: VectorField,
    pub varpi: f64,
    pub delta: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
}

/// Ghost value across a boundary face: mirror for walls, `2 − u_in` for the
/// face-Dirichlet exit condition.
fn ghost(u_in: f64, class: FaceClass) -> f64 {
    match class {
        FaceClass::Wall => u_in,
        FaceClass::Exit => 2.0 - u_in,
        FaceClass::Interior => unreachable!("ghost of an interior face"),
    }
}

/// Cell-centered gradient of `u` by central differences, with ghost values
/// substituted across boundary faces.
fn grad_u_at(grid: &Grid, u: &[f64], ord: usize, i: usize, j: usize) -> [f64; 2] {
    let uc = u[ord];
    let value = |dir: Direction| -> f64 {
        match grid.face_class_ord(ord, dir) {
            FaceClass::Interior => {
                let (ni, nj) = grid.neighbor(i, j, dir).unwrap();
                u[grid.ordinal(ni, nj).unwrap()]
            }
            class => ghost(uc, class),
        }
    };
    [
        (value(Direction::Right) - value(Direction::Left)) / (2.0 * grid.hx()),
        (value(Direction::Up) - value(Direction::Down)) / (2.0 * grid.hy()),
    ]
}

/// Solves the linear problem and recovers φ, ∇φ and ϖ.
///
/// The maximum-principle check is an assertion, not a clamp: failures
/// signal a discretization bug rather than data to be repaired.
pub fn solve_u(grid: &Grid, params: &EllipticParams) -> Result<PotentialSolution, EllipticError> {
    params.validate()?;
    let sys = assemble_system(grid, params);
    let (u, iters, residual) = pcg_jacobi(&sys, params.cg_tol, params.max_iter(grid))?;

    let tol = params.cg_tol;
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let v = u[ord];
        if !(v > 0.0 && v < 1.0 + tol) {
            return Err(EllipticError::MaximumPrincipleViolation { i, j, value: v });
        }
        let exit_adjacent = Direction::ALL
            .iter()
            .any(|&d| grid.face_class_ord(ord, d) == FaceClass::Exit);
        if !exit_adjacent && v >= 1.0 {
            return Err(EllipticError::MaximumPrincipleViolation { i, j, value: v });
        }
    }

    let delta = params.delta;
    let phi: Vec<f64> = u.iter().map(|&v| -delta * v.ln()).collect();
    let varpi = u.iter().copied().fold(f64::INFINITY, f64::min);
    let grad_phi = gradient_from_u(grid, &u, delta);

    Ok(PotentialSolution {
        u: ScalarField::from_vec(grid, u),
        phi: ScalarField::from_vec(grid, phi),
        grad_phi,
        varpi,
        delta,
        cg_iterations: iters,
        cg_residual: residual,
    })
}

fn gradient_from_u(grid: &Grid, u: &[f64], delta: f64) -> VectorField {
    let mut g = Vec::with_capacity(grid.inside_count());
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let gu = grad_u_at(grid, u, ord, i, j);
        // Chain rule ∇φ = −δ ∇u / u; u > 0 is guaranteed upstream.
        let scale = -delta / u[ord];
        g.push([scale * gu[0], scale * gu[1]]);
    }
    VectorField::from_vec(grid, g)
}

/// Recomputes the cell-centered `∇φ = −δ∇u/u` of a solved potential.
pub fn gradient_phi(sol: &PotentialSolution, grid: &Grid) -> VectorField {
    gradient_from_u(grid, sol.u.values(), sol.delta)
}

/// Exit-flux audit: per-face boundary flux `−∇φ·ν`, the total over the exit
/// set, and the two-sided bound `(|Ω|/δ)·exp(∓ max_∂Ω φ / δ)`.
#[derive(Debug, Clone)]
pub struct ExitFluxReport {
    pub per_face: Vec<(Face, f64)>,
    pub total_exit_flux: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub max_phi_boundary: f64,
}

pub fn exit_flux_report(
    sol: &PotentialSolution,
    grid: &Grid,
) -> Result<ExitFluxReport, EllipticError> {
    let delta = sol.delta;
    let u = sol.u.values();
    let phi = sol.phi.values();

    let mut per_face = Vec::new();
    let mut total = 0.0;
    let mut max_phi_boundary: f64 = 0.0;

    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        for dir in Direction::ALL {
            match grid.face_class_ord(ord, dir) {
                FaceClass::Interior => {}
                FaceClass::Wall => {
                    // Mirror ghost: the face midpoint value equals the cell value.
                    max_phi_boundary = max_phi_boundary.max(phi[ord]);
                }
                FaceClass::Exit => {
                    // One-sided face gradient via the Dirichlet ghost; φ = 0
                    // at the face, so −∇φ·ν = δ·(u_g − u_in)/h.
                    let h = if dir.is_x_normal() {
                        grid.hx()
                    } else {
                        grid.hy()
                    };
                    let flux = delta * (ghost(u[ord], FaceClass::Exit) - u[ord]) / h;
                    if flux <= 0.0 {
                        return Err(EllipticError::NonpositiveExitFlux { i, j, dir, flux });
                    }
                    per_face.push((Face { i, j, dir }, flux));
                    total += flux * grid.face_length(dir);
                }
            }
        }
    }

    let scale = grid.area() / delta;
    Ok(ExitFluxReport {
        per_face,
        total_exit_flux: total,
        lower_bound: scale * (-max_phi_boundary / delta).exp(),
        upper_bound: scale * (max_phi_boundary / delta).exp(),
        max_phi_boundary,
    })
}

/// A cell flagged as critical (`‖∇u‖ < grad_tol`) with the eigenvalues of
/// its discrete Hessian.
#[derive(Debug, Clone, Copy)]
pub struct CriticalCell {
    pub i: usize,
    pub j: usize,
    pub grad_u_norm: f64,
    /// Eigenvalues of the discrete Hessian of u, ascending.
    pub eigenvalues: [f64; 2],
    /// λ₁ + λ₂ = Δu, built from the same ghost convention as the system.
    pub trace: f64,
    /// The value `u/δ²` the trace should reproduce.
    pub laplace_identity: f64,
}

/// Scans for cells with `‖∇u‖ < grad_tol` and reports the local Hessian
/// signature. The second differences reuse the assembly's ghost rules, so
/// the trace identity `λ₁+λ₂ = u/δ²` holds up to the linear-solve residual;
/// the mixed derivative differences the gradient field (one-sided at
/// boundary-adjacent cells).
pub fn critical_points(sol: &PotentialSolution, grid: &Grid, grad_tol: f64) -> Vec<CriticalCell> {
    assert!(grad_tol > 0.0, "grad_tol must be positive");
    let u = sol.u.values();
    let n = grid.inside_count();

    let mut grad = Vec::with_capacity(n);
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        grad.push(grad_u_at(grid, u, ord, i, j));
    }

    let mut out = Vec::new();
    for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
        let g = grad[ord];
        let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gnorm >= grad_tol {
            continue;
        }

        let uc = u[ord];
        let second = |neg: Direction, pos: Direction, h: f64| -> f64 {
            let v = |dir: Direction| match grid.face_class_ord(ord, dir) {
                FaceClass::Interior => {
                    let (ni, nj) = grid.neighbor(i, j, dir).unwrap();
                    u[grid.ordinal(ni, nj).unwrap()]
                }
                class => ghost(uc, class),
            };
            ((v(pos) - uc) + (v(neg) - uc)) / (h * h)
        };
        let uxx = second(Direction::Left, Direction::Right, grid.hx());
        let uyy = second(Direction::Down, Direction::Up, grid.hy());

        // ∂²u/∂x∂y from the y-gradient component, one-sided at the boundary.
        let gy = |o: usize| grad[o][1];
        let uxy = {
            let left = grid
                .neighbor(i, j, Direction::Left)
                .and_then(|(ni, nj)| grid.ordinal(ni, nj));
            let right = grid
                .neighbor(i, j, Direction::Right)
                .and_then(|(ni, nj)| grid.ordinal(ni, nj));
            match (left, right) {
                (Some(l), Some(r)) => (gy(r) - gy(l)) / (2.0 * grid.hx()),
                (None, Some(r)) => (gy(r) - gy(ord)) / grid.hx(),
                (Some(l), None) => (gy(ord) - gy(l)) / grid.hx(),
                (None, None) => 0.0,
            }
        };

        let trace = uxx + uyy;
        let disc = ((uxx - uyy) * 0.5).hypot(uxy);
        let mid = trace * 0.5;
        out.push(CriticalCell {
            i,
            j,
            grad_u_norm: gnorm,
            eigenvalues: [mid - disc, mid + disc],
            trace,
            laplace_identity: uc / (sol.delta * sol.delta),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;

    fn strip_mask(nx: usize, ny: usize) -> String {
        let mut s = String::new();
        for _ in 0..ny {
            s.push_str(&".".repeat(nx));
            s.push('E');
            s.push('\n');
        }
        s
    }

    /// Strip domain (0,1)x(0,0.5) with the exit along the right edge.
    fn strip(nx: usize) -> Grid {
        let ny = nx / 2;
        build_grid(&strip_mask(nx, ny), 1.0 / nx as f64, 0.5 / ny as f64).unwrap()
    }

    fn analytic_u(x: f64, delta: f64) -> f64 {
        (x / delta).cosh() / (1.0 / delta).cosh()
    }

    #[test]
    fn single_cell_system_by_hand() {
        // One inside cell with one exit face, h = 1, delta = 1:
        // (1 + 2)·u = 2, so u = 2/3.
        let g = build_grid("E.#", 1.0, 1.0).unwrap();
        let sys = assemble_system(&g, &EllipticParams::new(1.0));
        let (diag, offs) = sys.row(0);
        assert!(offs.is_empty());
        assert!((diag - 3.0).abs() < 1e-15);
        assert!((sys.rhs[0] - 2.0).abs() < 1e-15);

        let sol = solve_u(&g, &EllipticParams::new(1.0)).unwrap();
        assert!((sol.u.get(0) - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn interior_stencil_row() {
        // Interior cell of a corridor far from the exit: standard 5-point
        // row with wall faces contributing nothing.
        let mask = "E....\n#....\n#....";
        let g = build_grid(mask, 0.5, 0.25).unwrap();
        let p = EllipticParams::new(0.3);
        let sys = assemble_system(&g, &p);
        let ord = g.ordinal(2, 1).unwrap();
        let (diag, offs) = sys.row(ord);
        let cx = 0.09 / 0.25;
        let cy = 0.09 / 0.0625;
        assert!((diag - (1.0 + 2.0 * cx + 2.0 * cy)).abs() < 1e-14);
        assert_eq!(offs.len(), 4);
        for (col, v) in offs {
            let (ci, _cj) = g.inside_cells()[col];
            let expect = if ci == 2 { -cy } else { -cx };
            assert!((v - expect).abs() < 1e-14);
        }
        assert_eq!(sys.rhs[ord], 0.0);
    }

    #[test]
    fn symmetric_mask_gives_symmetric_system() {
        // Mirror the y axis: A(Px) = P(Ax) for the mirror permutation P.
        let mask = "#E##\n....\n....\n#E##";
        let g = build_grid(mask, 1.0, 1.0).unwrap();
        let sys = assemble_system(&g, &EllipticParams::new(0.7));
        let perm: Vec<usize> = g
            .inside_cells()
            .iter()
            .map(|&(i, j)| g.ordinal(i, g.ny() - 1 - j).unwrap())
            .collect();
        let x: Vec<f64> = (0..sys.n).map(|k| (k as f64 * 0.37).sin() + 1.5).collect();
        let px: Vec<f64> = (0..sys.n).map(|k| x[perm[k]]).collect();
        let mut ax = vec![0.0; sys.n];
        let mut apx = vec![0.0; sys.n];
        sys.matvec(&x, &mut ax);
        sys.matvec(&px, &mut apx);
        for (k, &p) in perm.iter().enumerate() {
            assert!((apx[k] - ax[p]).abs() < 1e-13);
            // And the rhs is itself mirror invariant.
            assert_eq!(sys.rhs[k], sys.rhs[p]);
        }
    }

    #[test]
    fn strip_matches_cosh_profile() {
        let g = strip(64);
        let p = EllipticParams::with_tol(0.5, 1e-12);
        let sol = solve_u(&g, &p).unwrap();
        let mut max_err: f64 = 0.0;
        for (ord, &(i, _)) in g.inside_cells().iter().enumerate() {
            let x = (i as f64 + 0.5) * g.hx();
            max_err = max_err.max((sol.u.get(ord) - analytic_u(x, 0.5)).abs());
        }
        assert!(max_err < 1e-3, "max error {max_err}");
        // Left-edge column value ~ 1/cosh(2).
        let left = sol.u.at(&g, 0, 3);
        assert!((left - 1.0 / 2.0f64.cosh()).abs() < 1e-3);
    }

    #[test]
    fn strip_solution_is_constant_in_y() {
        let g = strip(32);
        let sol = solve_u(&g, &EllipticParams::new(0.5)).unwrap();
        for i in 0..g.nx() - 1 {
            let v0 = sol.u.at(&g, i, 0);
            for j in 1..g.ny() {
                assert!((sol.u.at(&g, i, j) - v0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn square_room_mirror_symmetry() {
        // Square room, one centered exit on the right wall.
        let n = 32;
        let mut mask = String::new();
        for r in 0..n {
            let j = n - 1 - r;
            mask.push_str(&".".repeat(n));
            mask.push(if (12..20).contains(&j) { 'E' } else { '#' });
            mask.push('\n');
        }
        let g = build_grid(&mask, 1.0 / n as f64, 1.0 / n as f64).unwrap();
        let p = EllipticParams::new(0.5);
        let sol = solve_u(&g, &p).unwrap();
        for &(i, j) in g.inside_cells() {
            let m = sol.u.at(&g, i, n - 1 - j);
            assert!((sol.u.at(&g, i, j) - m).abs() <= 10.0 * p.cg_tol);
        }
    }

    #[test]
    fn strip_gradient_matches_tanh() {
        // φ'(x) = −tanh(x/δ); at x = 0.75, δ = 0.5 this is −tanh(1.5).
        let g = strip(128);
        let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
        let i = (0.75 / g.hx()) as usize;
        let x = (i as f64 + 0.5) * g.hx();
        let expect = -(x / 0.5).tanh();
        let got = sol.grad_phi.at(&g, i, 10);
        assert!(
            (got[0] - expect).abs() < 5e-3,
            "got {} expect {}",
            got[0],
            expect
        );
        // Wall-adjacent cells still have essentially zero y-gradient.
        let edge = sol.grad_phi.at(&g, i, 0);
        assert!(edge[1].abs() < 1e-6);
    }

    #[test]
    fn transform_roundtrip_identity() {
        let g = strip(32);
        let sol = solve_u(&g, &EllipticParams::new(0.5)).unwrap();
        for ord in 0..g.inside_count() {
            let back = (-sol.phi.get(ord) / sol.delta).exp();
            let rel = (back - sol.u.get(ord)).abs() / sol.u.get(ord);
            assert!(rel < 1e-12);
        }
        assert!(sol.varpi > 0.0 && sol.varpi < 1.0);
    }

    #[test]
    fn strip_exit_flux_and_bounds() {
        let g = strip(128);
        let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
        let report = exit_flux_report(&sol, &g).unwrap();

        // Per-unit-length flux ~ tanh(2); the face-gradient bias is O(h).
        let per_len = report.total_exit_flux / 0.5;
        assert!(
            (per_len - 2.0f64.tanh()).abs() < 5e-3,
            "per-length {per_len}"
        );

        // max φ on the boundary sits at the far wall: 0.5·ln cosh 2.
        let expect_max = 0.5 * 2.0f64.cosh().ln();
        assert!((report.max_phi_boundary - expect_max).abs() < 5e-3);

        assert!(report.lower_bound <= report.upper_bound);
        assert!(report.lower_bound * 0.95 <= report.total_exit_flux);
        assert!(report.total_exit_flux <= report.upper_bound * 1.05);

        for (_, f) in &report.per_face {
            assert!(*f > 0.0);
        }
    }

    #[test]
    fn strip_critical_set_is_left_edge_only() {
        let g = strip(64);
        let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
        // The gradient floor scales with h: no cell falls below 1e-4...
        assert!(critical_points(&sol, &g, 1e-4).is_empty());
        // ...while a threshold between the first and second column gradients
        // flags exactly the left edge, where the Hessian trace is positive.
        let first = 0.53 * g.hx();
        let second = 1.59 * g.hx();
        let cells = critical_points(&sol, &g, 0.5 * (first + second));
        assert_eq!(cells.len(), g.ny());
        for c in &cells {
            assert_eq!(c.i, 0);
            assert!(c.trace > 0.0);
            assert!((c.trace - c.laplace_identity).abs() <= 1e-6 * c.laplace_identity);
            assert!(c.eigenvalues[1] > 0.0);
        }
    }

    #[test]
    fn two_exit_room_axis_criticals() {
        // Exits spanning the full left and right edges: the solution is a
        // cosh profile centered on the symmetry axis, which carries the
        // critical cells (odd cell count puts a column exactly on it).
        let n = 33;
        let mut mask = String::new();
        for _ in 0..n {
            mask.push('E');
            mask.push_str(&".".repeat(n));
            mask.push('E');
            mask.push('\n');
        }
        let h = 1.0 / n as f64;
        let g = build_grid(&mask, h, h).unwrap();
        let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
        let cells = critical_points(&sol, &g, 1e-6);
        assert_eq!(cells.len(), g.ny());
        let mid = 1 + n / 2;
        for c in &cells {
            assert_eq!(c.i, mid);
            assert!((c.trace - c.laplace_identity).abs() <= 1e-6 * c.laplace_identity);
            assert!(c.eigenvalues[1] > 0.0);
        }
        // ∇φ vanishes along the axis as well.
        for &(i, j) in g.inside_cells() {
            if i == mid {
                let gp = sol.grad_phi.at(&g, i, j);
                assert!(gp[0].abs() < 1e-6 && gp[1].abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cg_divergence_reported() {
        let g = strip(32);
        let mut p = EllipticParams::new(0.5);
        p.cg_max_iter = 2;
        match solve_u(&g, &p) {
            Err(EllipticError::CgDivergence { iters: 2, .. }) => {}
            other => panic!("expected CgDivergence, got {other:?}"),
        }
    }

    #[test]
    fn bad_params_rejected() {
        let g = build_grid("E.#", 1.0, 1.0).unwrap();
        assert!(solve_u(&g, &EllipticParams::new(0.0)).is_err());
        assert!(solve_u(&g, &EllipticParams::new(-1.0)).is_err());
        let mut p = EllipticParams::new(1.0);
        p.cg_tol = 0.0;
        assert!(solve_u(&g, &p).is_err());
    }
}
