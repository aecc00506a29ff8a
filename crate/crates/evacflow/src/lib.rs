//! Crowd-evacuation simulation on axis-aligned Cartesian grids.
//!
//! The model couples an elliptic problem for the exit potential with a scalar
//! conservation law for the pedestrian density:
//!
//! 1. the screened linear problem `u = δ²Δu` with `u = 1` on exits and
//!    `∂u/∂ν = 0` on walls is solved by preconditioned conjugate gradients;
//!    the Hopf–Cole relation `φ = −δ ln u` recovers the potential of the
//!    regularized eikonal equation `‖∇φ‖² − δΔφ = 1`;
//! 2. the routing direction is `w = 𝒩(−∇φ)` with the regularized
//!    normalization `𝒩(x) = x / √(θ² + ‖x‖²)`;
//! 3. the density obeys `∂t ρ + div(ρ v(ρ) w) = 0` with zero boundary datum
//!    in the conservation-law sense, discretized by a monotone finite-volume
//!    scheme with ghost states at exit faces;
//! 4. individual pedestrian paths solve `ẋ = w(x)` and are traced with a
//!    fixed-step fourth-order integrator, with exit-crossing and stall
//!    detection.
//!
//! The [`verify`] module bundles the analytic oracles and property checks
//! that certify the invariants of each stage; `evacflow verify` runs them
//! from the command line.

// Parameter guards are written as `!(x > 0.0)` on purpose: the negation
// rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod field;
pub mod fields;
pub mod geometry;
pub mod hyperbolic;
pub mod output;
pub mod pipeline;
pub mod scenario;
pub mod trajectory;
pub mod util;
pub mod verify;

pub use elliptic::{solve_u, EllipticParams, PotentialSolution};
pub use field::{build_routing_field, regularized_normalize, RoutingField};
pub use fields::{ScalarField, VectorField};
pub use geometry::{boundary_sets, build_grid, BoundarySets, Direction, FaceClass, Grid};
pub use hyperbolic::{DensityState, EvolutionReport, SpeedLaw};
pub use scenario::{parse_scenario, Scenario};
pub use trajectory::{integrate_path, FieldSampler, Trajectory};
