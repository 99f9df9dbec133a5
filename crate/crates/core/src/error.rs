use crate::solver::GroundState;

pub type Result<T> = std::result::Result<T, SpsError>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SpsError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid resolution must be at least 8 nodes per axis, got {0}")]
    InvalidResolution(usize),

    #[error("no lattice point falls strictly inside the domain")]
    EmptyInterior,

    #[error("fields live on different grids (ids {left} and {right})")]
    GridMismatch { left: u64, right: u64 },

    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),

    #[error("conjugate gradient hit its cap of {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("the ray through this field never crosses the Nehari manifold (|u|_p^p = 0)")]
    DegenerateRay,

    #[error("minimization did not reach tolerance (best ps-residual {:e} after {} iterations)", best.ps_residual, best.iterations)]
    NotConverged { best: Box<GroundState> },

    #[error("radial tail bound {bound:e} exceeds 1e-8 of the integral {integral:e}")]
    TailTooLarge { bound: f64, integral: f64 },

    #[error("operation needs a nonzero field")]
    ZeroField,

    #[error("radius {r} is too large: no ball of that radius fits inside the domain (inradius {inradius})")]
    RadiusTooLarge { r: f64, inradius: f64 },

    #[error("center {0:?} is not in the inner set (distance to the boundary below r)")]
    OutsideInnerSet([f64; 3]),
}

impl SpsError {
    /// Stable machine-readable code for manifests.
    pub fn code(&self) -> &'static str {
        match self {
            SpsError::InvalidDomain(_) => "invalid_domain",
            SpsError::InvalidResolution(_) => "invalid_resolution",
            SpsError::EmptyInterior => "empty_interior",
            SpsError::GridMismatch { .. } => "grid_mismatch",
            SpsError::InvalidParams(_) => "invalid_params",
            SpsError::NoConvergence { .. } => "no_convergence",
            SpsError::DegenerateRay => "degenerate_ray",
            SpsError::NotConverged { .. } => "not_converged",
            SpsError::TailTooLarge { .. } => "tail_too_large",
            SpsError::ZeroField => "zero_field",
            SpsError::RadiusTooLarge { .. } => "radius_too_large",
            SpsError::OutsideInnerSet(_) => "outside_inner_set",
        }
    }
}
