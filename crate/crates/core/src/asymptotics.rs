//! Critical-exponent toolkit: the instanton family, the best Sobolev
//! constant, the critical functional `I_*`, p-sweeps toward the critical
//! exponent, and a peak-based concentration diagnostic.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{lp_integral, ProblemParams, CRITICAL_EXPONENT};
use crate::error::{Result, SpsError};
use crate::grid::{h1_norm_sq, integrate_power, Grid, Point, ScalarField};
use crate::poisson::{coupling_term, solve_poisson};
use crate::solver::{find_ground_state, GroundState, SolveOptions};

/// `U_R(x - a) = (3R²)^{1/4} / (R² + |x - a|²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instanton {
    pub scale: f64,
    pub center: Point,
}

impl Instanton {
    pub fn new(scale: f64, center: Point) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(SpsError::InvalidParams(format!("instanton scale must be > 0, got {scale}")));
        }
        Ok(Instanton { scale, center })
    }

    /// Radial profile at distance `r` from the center.
    pub fn profile(&self, r: f64) -> f64 {
        let r2 = self.scale * self.scale;
        (3.0 * r2).powf(0.25) / (r2 + r * r).sqrt()
    }

    /// `dU/dr`.
    pub fn profile_derivative(&self, r: f64) -> f64 {
        let r2 = self.scale * self.scale;
        -(3.0 * r2).powf(0.25) * r / (r2 + r * r).powf(1.5)
    }

    pub fn value(&self, x: &Point) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        self.profile((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
    }

    /// Peak value `U_R(0) = 3^{1/4} R^{-1/2}`.
    pub fn peak(&self) -> f64 {
        self.profile(0.0)
    }
}

/// Samples the instanton at interior nodes. No boundary correction: `U` is
/// positive everywhere, so the Dirichlet mask truncates it.
pub fn instanton_field(inst: &Instanton, grid: &Arc<Grid>) -> ScalarField {
    ScalarField::from_fn(grid, |x| inst.value(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevConstant {
    /// `|∇U|₂² / |U|₆²`
    pub s: f64,
    /// `∫ |∇U|²` over ℝ³
    pub grad_energy: f64,
    /// `∫ |U|⁶` over ℝ³
    pub crit_norm: f64,
    /// Analytic upper bound on the neglected tail of the gradient integral.
    pub tail_bound: f64,
}

impl SobolevConstant {
    /// Critical ground-state level `S^{3/2} / 3`.
    pub fn m_star(&self) -> f64 {
        self.s.powf(1.5) / 3.0
    }
}

/// Default radial cutoff in units of the instanton scale.
pub const DEFAULT_CUTOFF_RATIO: f64 = 1e10;

/// [`sobolev_constant_with`] at `R = 1` with the default cutoff.
pub fn sobolev_constant(quadrature_points: usize) -> Result<SobolevConstant> {
    sobolev_constant_with(1.0, quadrature_points, DEFAULT_CUTOFF_RATIO)
}

/// Radial quadrature of `4π ∫ r² U'(r)² dr` and `4π ∫ r² U(r)⁶ dr` over
/// `[0, cutoff_ratio·R]`.
///
/// The radius is mapped as `r = R tan θ`, which turns both algebraically
/// decaying integrands into smooth bounded functions of `θ`; composite
/// Simpson is then applied on `[0, atan(cutoff_ratio)]`. The gradient tail
/// beyond the cutoff is bounded by `4π √3 R / r_cut` since
/// `r² U'² ≤ √3 R r⁻²`.
pub fn sobolev_constant_with(scale: f64, quadrature_points: usize, cutoff_ratio: f64) -> Result<SobolevConstant> {
    if quadrature_points < 1000 {
        return Err(SpsError::InvalidParams(format!(
            "at least 1000 quadrature points required, got {quadrature_points}"
        )));
    }
    let inst = Instanton::new(scale, [0.0; 3])?;
    let r_cut = cutoff_ratio * scale;
    let theta_cut = cutoff_ratio.atan();
    let n = quadrature_points + quadrature_points % 2;
    let dtheta = theta_cut / n as f64;
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut grad = 0.0;
    let mut crit = 0.0;
    for k in 0..=n {
        let theta = k as f64 * dtheta;
        let (s, c) = theta.sin_cos();
        let r = scale * s / c;
        let jac = scale / (c * c);
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let du = inst.profile_derivative(r);
        let u = inst.profile(r);
        grad += weight * r * r * du * du * jac;
        crit += weight * r * r * u.powi(6) * jac;
    }
    grad *= four_pi * dtheta / 3.0;
    crit *= four_pi * dtheta / 3.0;
    let tail_bound = four_pi * 3f64.sqrt() * scale / r_cut;
    if tail_bound > 1e-8 * grad {
        return Err(SpsError::TailTooLarge {
            bound: tail_bound,
            integral: grad,
        });
    }
    Ok(SobolevConstant {
        s: grad / crit.powf(1.0 / 3.0),
        grad_energy: grad,
        crit_norm: crit,
        tail_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalEnergy {
    /// `½‖u‖² − (1/6)|u|₆⁶`
    pub i_star: f64,
    /// `‖u‖² − |u|₆⁶`
    pub g_star: f64,
}

pub fn critical_energy(u: &ScalarField) -> CriticalEnergy {
    let a = h1_norm_sq(u).total;
    let b = integrate_power(u, CRITICAL_EXPONENT);
    CriticalEnergy {
        i_star: 0.5 * a - b / CRITICAL_EXPONENT,
        g_star: a - b,
    }
}

/// `t > 0` with `t u` on the critical Nehari manifold: `t⁴ = ‖u‖² / |u|₆⁶`.
pub fn critical_projection(u: &ScalarField) -> Result<f64> {
    let b = integrate_power(u, CRITICAL_EXPONENT);
    if !(b > 0.0) {
        return Err(SpsError::ZeroField);
    }
    Ok((h1_norm_sq(u).total / b).powf(0.25))
}

/// `max_{t>0} I_*(t u) = (1/3) (A / B^{1/3})^{3/2}` with `A = ‖u‖²`, `B = |u|₆⁶`.
pub fn critical_ray_max(u: &ScalarField) -> Result<f64> {
    let b = integrate_power(u, CRITICAL_EXPONENT);
    if !(b > 0.0) {
        return Err(SpsError::ZeroField);
    }
    let a = h1_norm_sq(u).total;
    Ok((a / b.powf(1.0 / 3.0)).powf(1.5) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentration {
    /// Instanton scale with the same peak value: `R = √3 / peak²`.
    pub r_est: f64,
    pub center: Point,
    pub peak: f64,
}

/// Peak-based fit of the instanton scale. Diagnostic only.
pub fn concentration_diagnostic(u: &ScalarField) -> Result<Concentration> {
    if u.is_zero() {
        return Err(SpsError::ZeroField);
    }
    let i = u.argmax();
    let peak = u.values()[i];
    if !(peak > 0.0) {
        return Err(SpsError::ZeroField);
    }
    Ok(Concentration {
        r_est: 3f64.sqrt() / (peak * peak),
        center: u.grid().coord(i),
        peak,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub p: f64,
    pub lambda: f64,
    pub resolution: usize,
    pub m_p: f64,
    /// Energy of the `λ = 0` run on the same grid.
    pub m_tilde_p: f64,
    /// `(|u_p|_p^p / |u_p|₆⁶)^{1/4}`, the bound with the coupling dropped.
    pub t_star_simple: f64,
    /// `((|u_p|_p^p − λ∫φ u_p²) / |u_p|₆⁶)^{1/4}`; equals the critical-manifold
    /// projection `t_to_critical` because `u_p` lies on the Nehari manifold.
    pub t_star_full: f64,
    pub r_est: f64,
    /// `‖u_p‖`
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: f64,
}

impl SweepRecord {
    pub fn t_to_critical(&self) -> f64 {
        self.t_star_full
    }
}

fn ground_state_or_best(grid: &Arc<Grid>, params: &ProblemParams, opts: &SolveOptions) -> Result<GroundState> {
    match find_ground_state(grid, params, opts) {
        Ok(gs) => Ok(gs),
        Err(SpsError::NotConverged { best }) => Ok(*best),
        Err(e) => Err(e),
    }
}

/// Ground states at each `p` (given `λ`, and `λ = 0`), sorted by `p`.
///
/// Non-converged runs are kept with `converged = false`.
pub fn sweep_p(
    grid: &Arc<Grid>,
    base: &ProblemParams,
    p_list: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SweepRecord>> {
    let mut ps = p_list.to_vec();
    for &p in &ps {
        base.with_p(p).validate()?;
    }
    ps.sort_by(|a, b| a.total_cmp(b));
    ps.into_par_iter()
        .map(|p| sweep_entry(grid, &base.with_p(p), opts))
        .collect()
}

fn sweep_entry(grid: &Arc<Grid>, params: &ProblemParams, opts: &SolveOptions) -> Result<SweepRecord> {
    let start = Instant::now();
    let gs = ground_state_or_best(grid, params, opts)?;
    let tilde = ground_state_or_best(grid, &params.with_lambda(0.0), opts)?;
    let u = &gs.u;
    let crit = integrate_power(u, CRITICAL_EXPONENT);
    let lp = lp_integral(u, params);
    let coupling = if params.lambda > 0.0 {
        coupling_term(u, &solve_poisson(u, opts.poisson_tol)?.phi)?
    } else {
        0.0
    };
    let conc = concentration_diagnostic(u)?;
    Ok(SweepRecord {
        p: params.p,
        lambda: params.lambda,
        resolution: grid.resolution(),
        m_p: gs.m,
        m_tilde_p: tilde.m,
        t_star_simple: (lp / crit).powf(0.25),
        t_star_full: ((lp - params.lambda * coupling) / crit).powf(0.25),
        r_est: conc.r_est,
        norm: h1_norm_sq(u).total.sqrt(),
        iterations: gs.iterations + tilde.iterations,
        converged: gs.converged && tilde.converged,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
