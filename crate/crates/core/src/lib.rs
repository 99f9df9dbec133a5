//! Positive solutions of the Schrödinger–Poisson–Slater system
//!
//! ```text
//! -Δu + u + λ φ u = |u|^{p-2} u,   -Δφ = u²   in Ω,   u = φ = 0 on ∂Ω
//! ```
//!
//! on bounded three-dimensional domains, computed by minimizing the energy
//! over the Nehari manifold on a uniform finite-difference grid.

pub mod asymptotics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod multiplicity;
pub mod poisson;
pub mod solver;

pub use asymptotics::{
    concentration_diagnostic, critical_energy, instanton_field, sobolev_constant, sweep_p, Instanton, SobolevConstant,
    SweepRecord,
};
pub use energy::{EnergyBreakdown, Functional, ProblemParams, RayParts, RayProjection};
pub use error::{Result, SpsError};
pub use grid::{apply_laplacian, h1_norm_sq, integrate_power, DomainSpec, Grid, H1Norm, Point, ScalarField};
pub use multiplicity::{
    barycenter, multistart_search, omega_r_membership, transplant_bump, Membership, ProfileCache, SolutionCatalog,
};
pub use poisson::{coupling_term, solve_poisson, PoissonSolution};
pub use solver::{find_ground_state, minimize_on_nehari, ps_residual, GradientTolerance, GroundState, SolveOptions};
