//! Ground states by descent on the Nehari manifold.
//!
//! Each iteration takes a step along the H¹₀ Riesz representative of the free
//! gradient, retracts onto the manifold by rescaling along the ray, and keeps
//! the step only if the energy does not increase. Step lengths come from the
//! Barzilai-Borwein rule with halving as the fallback. Convergence is declared
//! on the H⁻¹ norm of the *free* gradient, not the constrained one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{free_gradient, lp_integral, EnergyBreakdown, Functional, ProblemParams, RayParts};
use crate::error::{Result, SpsError};
use crate::grid::{h1_norm_sq, Grid, ScalarField};
use crate::linalg::solve_shifted_laplacian;
use crate::poisson::{coupling_term, solve_poisson_with_guess, DEFAULT_POISSON_TOL};

/// Tolerance on the PS residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientTolerance {
    /// Fraction of the residual at the (projected) initial field.
    Relative(f64),
    Absolute(f64),
}

impl GradientTolerance {
    pub fn resolve(&self, initial_residual: f64) -> f64 {
        match *self {
            GradientTolerance::Relative(f) => f * initial_residual,
            GradientTolerance::Absolute(a) => a,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            GradientTolerance::Relative(v) | GradientTolerance::Absolute(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: GradientTolerance,
    /// Step length tried on the first iteration.
    pub initial_step: f64,
    pub backtrack_shrink: f64,
    pub max_backtracks: usize,
    /// Number of randomly perturbed restarts in [`find_ground_state`].
    pub restarts: usize,
    pub seed: u64,
    pub poisson_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iterations: 2000,
            gradient_tolerance: GradientTolerance::Relative(1e-6),
            initial_step: 1.0,
            backtrack_shrink: 0.5,
            max_backtracks: 40,
            restarts: 2,
            seed: 0,
            poisson_tol: DEFAULT_POISSON_TOL,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let tol = self.gradient_tolerance.value();
        let ok = self.max_iterations >= 1
            && tol.is_finite()
            && tol > 0.0
            && self.initial_step > 0.0
            && self.backtrack_shrink > 0.0
            && self.backtrack_shrink < 1.0
            && self.poisson_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SpsError::InvalidParams(format!("invalid solve options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub energy: f64,
    pub nehari_residual: f64,
    pub ps_residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub u: ScalarField,
    pub params: ProblemParams,
    /// Energy `I(u)`.
    pub m: f64,
    pub breakdown: EnergyBreakdown,
    /// `|G(u)| / ‖u‖²`.
    pub nehari_residual: f64,
    /// H⁻¹ surrogate of `‖I'(u)‖`.
    pub ps_residual: f64,
    /// Resolved absolute tolerance used for `converged`.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
}

/// An accepted point on the manifold together with its Poisson potential.
struct Iterate {
    u: ScalarField,
    phi: ScalarField,
    parts: RayParts,
    energy: f64,
}

struct Descent<'a> {
    params: ProblemParams,
    opts: &'a SolveOptions,
    zero: ScalarField,
}

impl Descent<'_> {
    fn coupled(&self) -> bool {
        self.params.lambda != 0.0
    }

    /// Projects `v` onto the manifold; `guess` warm-starts the Poisson solve.
    fn project(&self, v: ScalarField, guess: Option<&ScalarField>) -> Result<Iterate> {
        let lp = lp_integral(&v, &self.params);
        if !(lp > 0.0) {
            return Err(SpsError::DegenerateRay);
        }
        let (phi, coupling) = if self.coupled() {
            let sol = solve_poisson_with_guess(&v, self.opts.poisson_tol, guess)?;
            let c = coupling_term(&v, &sol.phi)?;
            (sol.phi, c)
        } else {
            (self.zero.clone(), 0.0)
        };
        let parts = RayParts {
            h1: h1_norm_sq(&v).total,
            coupling,
            lp,
        };
        let t = parts.nehari_root(&self.params)?;
        let energy = parts.energy_at(t, &self.params);
        let t2 = t * t;
        Ok(Iterate {
            u: v.scaled(t),
            phi: phi.scaled(t2),
            parts: RayParts {
                h1: t2 * parts.h1,
                coupling: t2 * t2 * parts.coupling,
                lp: t.powf(self.params.p) * parts.lp,
            },
            energy,
        })
    }

    fn nehari_residual(&self, it: &Iterate) -> f64 {
        let g = it.parts.h1 + self.params.lambda * it.parts.coupling - it.parts.lp;
        g.abs() / it.parts.h1
    }

    fn gradient(&self, it: &Iterate, riesz_guess: Option<&ScalarField>) -> Result<(ScalarField, ScalarField, f64)> {
        let g = free_gradient(&it.u, &it.phi, &self.params);
        let (w, _) = solve_shifted_laplacian(&g, 1.0, self.opts.poisson_tol, riesz_guess)?;
        let ps = g.dot(&w).max(0.0).sqrt();
        Ok((g, w, ps))
    }
}

/// Descent on the Nehari manifold from `initial`.
///
/// Non-convergence is not an error here: the best iterate is returned with
/// `converged == false`.
pub fn minimize_on_nehari(
    initial: &ScalarField,
    params: &ProblemParams,
    opts: &SolveOptions,
) -> Result<GroundState> {
    params.validate()?;
    opts.validate()?;
    let d = Descent {
        params: *params,
        opts,
        zero: ScalarField::zeros(initial.grid()),
    };
    let mut cur = d.project(initial.clone(), None)?;
    let (mut g, mut w, mut ps) = d.gradient(&cur, None)?;
    let tol = opts.gradient_tolerance.resolve(ps);
    let mut trace = vec![TraceRecord {
        iteration: 0,
        energy: cur.energy,
        nehari_residual: d.nehari_residual(&cur),
        ps_residual: ps,
        step: 0.0,
    }];
    let mut alpha = opts.initial_step;
    let mut iterations = 0;
    while ps > tol && iterations < opts.max_iterations {
        let mut step = alpha;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = cur.u.axpy(-step, &w);
            match d.project(trial, Some(&cur.phi)) {
                Ok(next) if next.energy <= cur.energy => {
                    accepted = Some(next);
                    break;
                }
                Ok(_) | Err(SpsError::DegenerateRay) => step *= opts.backtrack_shrink,
                Err(e) => return Err(e),
            }
        }
        let Some(next) = accepted else {
            break;
        };
        iterations += 1;
        let (g_next, w_next, ps_next) = d.gradient(&next, Some(&w))?;

        // Barzilai-Borwein (second form) in the H¹₀ metric.
        let s = &next.u - &cur.u;
        let y = &g_next - &g;
        let yw = &w_next - &w;
        let sy = s.dot(&y);
        let yy = yw.dot(&y);
        alpha = if sy > 0.0 && yy > 0.0 {
            (sy / yy).clamp(1e-6, 1e3)
        } else {
            (2.0 * step).min(1e3)
        };

        cur = next;
        g = g_next;
        w = w_next;
        ps = ps_next;
        trace.push(TraceRecord {
            iteration: iterations,
            energy: cur.energy,
            nehari_residual: d.nehari_residual(&cur),
            ps_residual: ps,
            step,
        });
    }

    // Final certificate from a fresh Poisson solve.
    let f = Functional::with_poisson_tol(*params, opts.poisson_tol)?;
    let breakdown = f.evaluate(&cur.u)?;
    Ok(GroundState {
        m: breakdown.energy,
        nehari_residual: breakdown.nehari.abs() / breakdown.h1,
        breakdown,
        ps_residual: ps,
        tolerance: tol,
        iterations,
        converged: ps <= tol,
        trace,
        params: *params,
        u: cur.u,
    })
}

/// `exp(-|x - c|² / (2σ²))` centered at the domain's Chebyshev center with
/// `σ = inradius / 3`.
pub fn default_initial_guess(grid: &Arc<Grid>) -> ScalarField {
    let c = grid.domain().chebyshev_center();
    let sigma = grid.domain().inradius() / 3.0;
    ScalarField::from_fn(grid, |x| {
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
        (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Multiplicative noise `u·(1 + ½ξ)` with `ξ ~ U(-1, 1)`; keeps the sign of `u`.
pub fn perturbed(u: &ScalarField, seed: u64, restart: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let mut out = u.clone();
    for v in out.values_mut() {
        *v *= 1.0 + 0.5 * rng.gen_range(-1.0..1.0);
    }
    out
}

/// Lowest-energy converged result over the default start and
/// `opts.restarts` perturbed copies of it.
pub fn find_ground_state(grid: &Arc<Grid>, params: &ProblemParams, opts: &SolveOptions) -> Result<GroundState> {
    let base = default_initial_guess(grid);
    let starts: Vec<ScalarField> = std::iter::once(base.clone())
        .chain((1..=opts.restarts).map(|k| perturbed(&base, opts.seed, k)))
        .collect();
    let runs: Vec<Result<GroundState>> = starts
        .into_par_iter()
        .map(|u0| minimize_on_nehari(&u0, params, opts))
        .collect();
    select_lowest(runs)
}

/// Deterministic selection: lowest energy among converged runs, ties to the
/// earlier run. If nothing converged, the lowest-energy run is returned inside
/// `NotConverged`.
pub(crate) fn select_lowest(runs: Vec<Result<GroundState>>) -> Result<GroundState> {
    let mut best: Option<GroundState> = None;
    let mut best_failed: Option<GroundState> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(gs) if gs.converged => {
                if best.as_ref().is_none_or(|b| gs.m < b.m) {
                    best = Some(gs);
                }
            }
            Ok(gs) => {
                if best_failed.as_ref().is_none_or(|b| gs.m < b.m) {
                    best_failed = Some(gs);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, best_failed, first_err) {
        (Some(gs), _, _) => Ok(gs),
        (None, Some(gs), _) => Err(SpsError::NotConverged { best: Box::new(gs) }),
        (None, None, Some(e)) => Err(e),
        (None, None, None) => Err(SpsError::InvalidParams("no runs were requested".into())),
    }
}

/// Discrete H⁻¹ norm of the free gradient: solve `(-Δ_h + 1) w = g` and
/// return `(h³ Σ g_i w_i)^{1/2}`.
pub fn ps_residual(u: &ScalarField, params: &ProblemParams) -> Result<f64> {
    let f = Functional::new(*params)?;
    let g = f.gradient(u)?;
    let (w, _) = solve_shifted_laplacian(&g, 1.0, 1e-12, None)?;
    Ok(g.dot(&w).max(0.0).sqrt())
}
