//! Finite element solution of the nonlinear boundary value problem
//!
//! ```text
//!   Δu = 0 in Ω,  ∂u/∂ν = g on Γ₂,  ∂u/∂ν = f(u) on Γ₁,  u = 0 on Γ_D
//! ```
//!
//! in its weak form `∫ ∇u·∇ρ = ∫_{Γ₂} g ρ + ∫_{Γ₁} f(u) ρ` with P1 elements.

mod assembly;
mod model;
mod solve;
mod trace;

use thiserror::Error;

use crate::geometry::BoundaryTag;

pub use assembly::{assemble_boundary_load, assemble_stiffness, local_stiffness, p1_gradients};
pub use model::{FluxProfile, FluxShape, NonlinearityModel};
pub use solve::{
    energy, error_norms, flux_balance, nodal_energy, solve_forward, solve_picard, weak_residual, FluxBalance, PotentialField,
    SolveReport, SolverOptions,
};
pub use trace::{dirichlet_trace, extract_cauchy_data, neumann_trace, perturb, BoundaryTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("triangle {0} is degenerate (nonpositive area)")]
    DegenerateTriangle(usize),
    #[error("no grounded (gammaD) nodes: the problem is not coercive")]
    NoDirichlet,
    #[error("residual tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid nonlinearity: {0}")]
    InvalidModel(String),
    #[error("invalid flux profile: {0}")]
    InvalidFlux(String),
    #[error("noise level must be finite and nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("Jacobian is singular at pivot {0}")]
    SingularJacobian(usize),
    #[error("no boundary edges tagged {0}")]
    EmptyTag(BoundaryTag),
    #[error("invalid boundary data: {0}")]
    Data(String),
    #[error("Newton iteration did not converge (last residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    NotConverged { last_iterate: Vec<f64>, residual_history: Vec<f64> },
}
