//! The free functional
//!
//! ```text
//! I(u) = ½‖u‖² + (λ/4) ∫ φ_u u² − (1/p) ∫ |u|^p
//! ```
//!
//! its Nehari constraint `G(u) = I'(u)[u]`, the free gradient, and the
//! projection of a field onto the Nehari manifold along its own ray.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::grid::{h1_norm_sq, ScalarField};
use crate::poisson::{coupling_term, PoissonCache, PoissonSolution, DEFAULT_POISSON_TOL};

/// The frequency ω is fixed to one throughout.
pub const OMEGA: f64 = 1.0;

/// Critical Sobolev exponent in three dimensions.
pub const CRITICAL_EXPONENT: f64 = 6.0;

/// `λ`, `p` and the choice of nonlinearity. `λ = 0` gives the decoupled
/// comparison problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub lambda: f64,
    pub p: f64,
    /// Use `(u⁺)^p` instead of `|u|^p`.
    pub positive_part: bool,
}

impl ProblemParams {
    /// Positive-part functional, the default for ground-state searches.
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        let params = ProblemParams {
            lambda,
            p,
            positive_part: true,
        };
        params.validate()?;
        Ok(params)
    }

    /// Signed `|u|^p` functional.
    pub fn signed(p: f64, lambda: f64) -> Result<Self> {
        let params = ProblemParams {
            lambda,
            p,
            positive_part: false,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 4.0 && self.p < CRITICAL_EXPONENT) {
            return Err(SpsError::InvalidParams(format!(
                "p must lie in (4, 6), got {}",
                self.p
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(SpsError::InvalidParams(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ProblemParams { lambda, ..self }
    }

    pub fn with_p(self, p: f64) -> Self {
        ProblemParams { p, ..self }
    }
}

/// `|v|^q` or `(v⁺)^q`, with magnitudes below 1e-300 mapped to zero.
#[inline]
pub(crate) fn power(v: f64, q: f64, positive_part: bool) -> f64 {
    let a = if positive_part { v.max(0.0) } else { v.abs() };
    if a < 1e-300 {
        0.0
    } else {
        (q * a.ln()).exp()
    }
}

/// Derivative of `power(v, p)/p`: `|v|^{p-2} v` or `(v⁺)^{p-1}`.
#[inline]
pub(crate) fn power_derivative(v: f64, p: f64, positive_part: bool) -> f64 {
    let m = power(v, p - 1.0, positive_part);
    if v < 0.0 {
        if positive_part {
            0.0
        } else {
            -m
        }
    } else {
        m
    }
}

/// `∫ |u|^p` (or `∫ (u⁺)^p`) with lumped quadrature.
pub fn lp_integral(u: &ScalarField, params: &ProblemParams) -> f64 {
    let s: f64 = u
        .values()
        .iter()
        .map(|v| power(*v, params.p, params.positive_part))
        .sum();
    u.grid().cell_volume() * s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `‖u‖²`
    pub h1: f64,
    /// `∫ φ_u u²`
    pub coupling: f64,
    /// `∫ |u|^p`
    pub lp: f64,
    /// `I(u)`
    pub energy: f64,
    /// `G(u)`
    pub nehari: f64,
    /// `(p-2)/(2p) ‖u‖² + λ (p-4)/(4p) ∫ φ_u u²`, equal to `I` on the manifold.
    pub constrained_energy: f64,
}

impl EnergyBreakdown {
    pub fn from_parts(h1: f64, coupling: f64, lp: f64, params: &ProblemParams) -> Self {
        let (p, lambda) = (params.p, params.lambda);
        EnergyBreakdown {
            h1,
            coupling,
            lp,
            energy: 0.5 * h1 + 0.25 * lambda * coupling - lp / p,
            nehari: h1 + lambda * coupling - lp,
            constrained_energy: (p - 2.0) / (2.0 * p) * h1 + lambda * (p - 4.0) / (4.0 * p) * coupling,
        }
    }
}

/// The three ray invariants `A = ‖u‖²`, `B = ∫ φ_u u²`, `C = ∫ |u|^p`.
///
/// Along the ray `t ↦ t u` they scale as `t²`, `t⁴` and `t^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayParts {
    pub h1: f64,
    pub coupling: f64,
    pub lp: f64,
}

impl RayParts {
    pub fn energy_at(&self, t: f64, params: &ProblemParams) -> f64 {
        let t2 = t * t;
        0.5 * t2 * self.h1 + 0.25 * params.lambda * t2 * t2 * self.coupling
            - t.powf(params.p) * self.lp / params.p
    }

    pub fn nehari_at(&self, t: f64, params: &ProblemParams) -> f64 {
        let t2 = t * t;
        t2 * self.h1 + params.lambda * t2 * t2 * self.coupling - t.powf(params.p) * self.lp
    }

    /// `G(t u) / t⁴ = A/t² + λB − C t^{p-4}`, strictly decreasing in `t` for `p > 4`.
    pub fn reduced_nehari(&self, t: f64, params: &ProblemParams) -> f64 {
        self.h1 / (t * t) + params.lambda * self.coupling - self.lp * t.powf(params.p - 4.0)
    }

    /// The unique `t > 0` with `G(t u) = 0`.
    ///
    /// Bracketing bisection on [`Self::reduced_nehari`] down to relative width
    /// 1e-12, followed by a single Newton polish kept only if it improves the
    /// residual and stays inside the bracket.
    pub fn nehari_root(&self, params: &ProblemParams) -> Result<f64> {
        if !(self.lp > 0.0) || !(self.h1 > 0.0) {
            return Err(SpsError::DegenerateRay);
        }
        let f = |t: f64| self.reduced_nehari(t, params);
        let mut lo = 1e-8;
        while f(lo) <= 0.0 {
            lo *= 1e-4;
            if lo < 1e-200 {
                return Err(SpsError::DegenerateRay);
            }
        }
        let mut hi = 1.0f64.max(lo * 2.0);
        while f(hi) >= 0.0 {
            hi *= 2.0;
            if hi > 2f64.powi(64) {
                return Err(SpsError::DegenerateRay);
            }
        }
        while (hi - lo) > 1e-12 * hi {
            let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let ft = f(t);
        let dft = -2.0 * self.h1 / (t * t * t)
            - (params.p - 4.0) * self.lp * t.powf(params.p - 5.0);
        let polished = t - ft / dft;
        if polished > lo && polished < hi && f(polished).abs() <= ft.abs() {
            Ok(polished)
        } else {
            Ok(t)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RayProjection {
    pub t: f64,
    pub tu: ScalarField,
    /// Invariants of the input field (not of `t u`).
    pub parts: RayParts,
}

/// Evaluator bound to one set of parameters, with a Poisson cache so that
/// energy and gradient at the same field share one solve.
#[derive(Debug)]
pub struct Functional {
    params: ProblemParams,
    cache: PoissonCache,
}

impl Functional {
    pub fn new(params: ProblemParams) -> Result<Self> {
        Self::with_poisson_tol(params, DEFAULT_POISSON_TOL)
    }

    pub fn with_poisson_tol(params: ProblemParams, tol: f64) -> Result<Self> {
        params.validate()?;
        Ok(Functional {
            params,
            cache: PoissonCache::new(tol, 4),
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn poisson_tol(&self) -> f64 {
        self.cache.tol()
    }

    pub fn phi(&self, u: &ScalarField) -> Result<Arc<PoissonSolution>> {
        self.cache.solve(u)
    }

    pub fn ray_parts(&self, u: &ScalarField) -> Result<RayParts> {
        let phi = self.phi(u)?;
        Ok(RayParts {
            h1: h1_norm_sq(u).total,
            coupling: coupling_term(u, &phi.phi)?,
            lp: lp_integral(u, &self.params),
        })
    }

    pub fn evaluate(&self, u: &ScalarField) -> Result<EnergyBreakdown> {
        let parts = self.ray_parts(u)?;
        Ok(EnergyBreakdown::from_parts(parts.h1, parts.coupling, parts.lp, &self.params))
    }

    /// Free gradient field `-Δ_h u + u + λ φ_u u − |u|^{p-2} u`.
    ///
    /// The directional derivative of `I` along `v` is `gradient(u).dot(v)`.
    pub fn gradient(&self, u: &ScalarField) -> Result<ScalarField> {
        let phi = self.phi(u)?;
        Ok(free_gradient(u, &phi.phi, &self.params))
    }

    pub fn nehari_project(&self, u: &ScalarField) -> Result<RayProjection> {
        let parts = self.ray_parts(u)?;
        let t = parts.nehari_root(&self.params)?;
        Ok(RayProjection {
            t,
            tu: u.scaled(t),
            parts,
        })
    }

    /// `max_{t>0} I(t u)`, attained at the Nehari crossing.
    pub fn ray_max_energy(&self, u: &ScalarField) -> Result<f64> {
        let parts = self.ray_parts(u)?;
        let t = parts.nehari_root(&self.params)?;
        Ok(parts.energy_at(t, &self.params))
    }
}

pub(crate) fn free_gradient(u: &ScalarField, phi: &ScalarField, params: &ProblemParams) -> ScalarField {
    let grid = u.grid();
    let mut g = vec![0.0; grid.interior_count()];
    grid.neg_laplacian_into(u.values(), &mut g);
    let (lambda, p, pos) = (params.lambda, params.p, params.positive_part);
    for ((gi, ui), fi) in g.iter_mut().zip(u.values()).zip(phi.values()) {
        *gi += OMEGA * ui + lambda * fi * ui - power_derivative(*ui, p, pos);
    }
    ScalarField::from_raw(grid.clone(), g)
}

pub fn evaluate(u: &ScalarField, params: &ProblemParams) -> Result<EnergyBreakdown> {
    Functional::new(*params)?.evaluate(u)
}

pub fn gradient(u: &ScalarField, params: &ProblemParams) -> Result<ScalarField> {
    Functional::new(*params)?.gradient(u)
}

pub fn nehari_project(u: &ScalarField, params: &ProblemParams) -> Result<RayProjection> {
    Functional::new(*params)?.nehari_project(u)
}

pub fn ray_max_energy(u: &ScalarField, params: &ProblemParams) -> Result<f64> {
    Functional::new(*params)?.ray_max_energy(u)
}
