//! Crate-level error type and process exit codes.

use thiserror::Error;

/// Any failure surfaced by the pipeline or CLI.
#[derive(Debug, Error)]
pub enum EvacError {
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error(transparent)]
    Grid(#[from] crate::geometry::GridError),
    #[error(transparent)]
    Elliptic(#[from] crate::elliptic::EllipticError),
    #[error(transparent)]
    Hyperbolic(#[from] crate::hyperbolic::HyperbolicError),
    #[error(transparent)]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl EvacError {
    /// Process exit code: 2 parse, 3 validation, 4 solver,
    /// 5 range/stability, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use crate::elliptic::EllipticError as El;
        use crate::hyperbolic::HyperbolicError as Hy;
        use crate::scenario::ScenarioError as Sc;
        match self {
            EvacError::Scenario(Sc::Syntax { .. }) => 2,
            EvacError::Scenario(Sc::Validation(_)) => 3,
            EvacError::Grid(_) => 3,
            EvacError::Trajectory(crate::trajectory::TrajectoryError::OutsideDomain { .. }) => 3,
            EvacError::Trajectory(_) => 3,
            EvacError::Elliptic(El::CgDivergence { .. }) => 4,
            EvacError::Elliptic(El::BadParams { .. }) => 3,
            EvacError::Elliptic(El::MaximumPrincipleViolation { .. }) => 5,
            EvacError::Elliptic(El::NonpositiveExitFlux { .. }) => 5,
            EvacError::Hyperbolic(Hy::RangeViolation { .. }) => 5,
            EvacError::Hyperbolic(Hy::DegenerateField) => 5,
            EvacError::Hyperbolic(_) => 3,
            EvacError::Io(_) => 1,
        }
    }
}
