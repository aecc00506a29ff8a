//! Pedestrian routing field.
//!
//! The direction followed at each point is `w = 𝒩(−∇φ)` where 𝒩 is the
//! regularized normalization `𝒩(x) = x / √(θ² + ‖x‖²)`. It is bounded by 1,
//! Lipschitz with constant 1/θ, and vanishes exactly where ∇φ does.

use crate::elliptic::PotentialSolution;
use crate::fields::VectorField;
use crate::geometry::{Direction, FaceClass, Grid};

/// `x / √(θ² + ‖x‖²)` for θ > 0. Total on all inputs.
pub fn regularized_normalize(x: [f64; 2], theta: f64) -> [f64; 2] {
    debug_assert!(theta > 0.0);
    let s = (theta * theta + x[0] * x[0] + x[1] * x[1]).sqrt();
    [x[0] / s, x[1] / s]
}

/// Cell-centered routing directions `w = 𝒩(−∇φ)` with the θ they were
/// built from; `‖w‖ < 1` everywhere.
#[derive(Debug, Clone)]
pub struct RoutingField {
    pub w: VectorField,
    pub theta: f64,
}

impl RoutingField {
    /// Wraps an explicitly constructed direction field (used by tests and
    /// synthetic scenarios).
    pub fn from_parts(w: VectorField, theta: f64) -> Self {
        Self { w, theta }
    }

    /// Raw normal component `w·ν` of a boundary face, evaluated one-sided
    /// from the inside cell. For wall faces this is a diagnostic: the
    /// finite-volume scheme forces wall flux to zero regardless.
    pub fn face_normal_speed(&self, grid: &Grid, i: usize, j: usize, dir: Direction) -> f64 {
        let w = self.w.at(grid, i, j);
        let nu = dir.normal();
        w[0] * nu[0] + w[1] * nu[1]
    }

    /// Largest |w·ν| over all wall faces; tends to zero under grid
    /// refinement since ∇φ·ν = 0 on walls.
    pub fn max_abs_wall_normal(&self, grid: &Grid) -> f64 {
        let mut worst: f64 = 0.0;
        for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
            for dir in Direction::ALL {
                if grid.face_class_ord(ord, dir) == FaceClass::Wall {
                    worst = worst.max(self.face_normal_speed(grid, i, j, dir).abs());
                }
            }
        }
        worst
    }

    /// Smallest w·ν over all exit faces (should be strictly positive).
    pub fn min_exit_normal(&self, grid: &Grid) -> f64 {
        let mut worst = f64::INFINITY;
        for (ord, &(i, j)) in grid.inside_cells().iter().enumerate() {
            for dir in Direction::ALL {
                if grid.face_class_ord(ord, dir) == FaceClass::Exit {
                    worst = worst.min(self.face_normal_speed(grid, i, j, dir));
                }
            }
        }
        worst
    }
}

/// Applies 𝒩(−∇φ) cell by cell.
pub fn build_routing_field(sol: &PotentialSolution, theta: f64, grid: &Grid) -> RoutingField {
    assert!(theta > 0.0, "theta must be strictly positive");
    let w: Vec<[f64; 2]> = sol
        .grad_phi
        .values()
        .iter()
        .map(|g| regularized_normalize([-g[0], -g[1]], theta))
        .collect();
    RoutingField {
        w: VectorField::from_vec(grid, w),
        theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{solve_u, EllipticParams};
    use crate::geometry::build_grid;

    #[test]
    fn normalize_pointwise_values() {
        assert_eq!(regularized_normalize([0.0, 0.0], 1.0), [0.0, 0.0]);
        let v = regularized_normalize([1.0, 0.0], 1.0);
        assert!((v[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(v[1], 0.0);
        let v = regularized_normalize([3.0, 4.0], 2.0);
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!((norm - 5.0 / 29.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_bounded_and_aligned() {
        for k in 0..200 {
            let a = (k as f64 * 0.618).sin() * 10.0;
            let b = (k as f64 * 0.377).cos() * 10.0;
            let v = regularized_normalize([a, b], 0.3);
            let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
            assert!(norm < 1.0);
            assert!(v[0] * a + v[1] * b >= 0.0);
        }
        // ‖𝒩(x)‖ → 1 for large x.
        let v = regularized_normalize([1e9, 0.0], 0.5);
        assert!(v[0] > 1.0 - 1e-12);
    }

    fn strip(nx: usize) -> Grid {
        let ny = nx / 2;
        let mut mask = String::new();
        for _ in 0..ny {
            mask.push_str(&".".repeat(nx));
            mask.push('E');
            mask.push('\n');
        }
        build_grid(&mask, 1.0 / nx as f64, 0.5 / ny as f64).unwrap()
    }

    #[test]
    fn strip_field_points_to_exit() {
        let g = strip(128);
        let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
        let rf = build_routing_field(&sol, 0.1, &g);

        // w_x(x) = tanh(x/δ)/sqrt(θ² + tanh²(x/δ)); check at x ≈ 0.75.
        let i = (0.75 / g.hx()) as usize;
        let x = (i as f64 + 0.5) * g.hx();
        let t = (x / 0.5).tanh();
        let expect = t / (0.01 + t * t).sqrt();
        let w = rf.w.at(&g, i, 5);
        assert!(
            (w[0] - expect).abs() < 1e-2,
            "w_x {} expect {}",
            w[0],
            expect
        );

        // Outward at every exit face. The raw wall-normal diagnostic is
        // sampled half a cell off the wall, hence O(h/θ) on the far wall.
        assert!(rf.min_exit_normal(&g) > 0.0);
        assert!(rf.max_abs_wall_normal(&g) < 2.0 * g.hx() / 0.1);
        assert!(rf.w.max_norm() <= 1.0);
    }

    #[test]
    fn wall_tangency_improves_under_refinement() {
        // On a square room with a partial exit the wall-normal component is
        // a discretization artifact and shrinks with h.
        let room = |n: usize| {
            let mut mask = String::new();
            for r in 0..n {
                let j = n - 1 - r;
                mask.push_str(&".".repeat(n));
                mask.push(if j >= 3 * n / 8 && j < 5 * n / 8 {
                    'E'
                } else {
                    '#'
                });
                mask.push('\n');
            }
            build_grid(&mask, 1.0 / n as f64, 1.0 / n as f64).unwrap()
        };
        let tol_w = |n: usize| {
            let g = room(n);
            let sol = solve_u(&g, &EllipticParams::with_tol(0.5, 1e-12)).unwrap();
            build_routing_field(&sol, 0.1, &g).max_abs_wall_normal(&g)
        };
        let coarse = tol_w(16);
        let fine = tol_w(32);
        assert!(fine < coarse, "coarse {coarse} fine {fine}");
    }
}
