//! Jacobi-preconditioned conjugate gradients for the SPD stencil operators.

use crate::error::{Result, SpsError};
use crate::grid::{dot, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final relative residual `‖b - A x‖ / ‖b‖`.
    pub residual: f64,
}

/// Default iteration cap: `max(10·√n, 500)`.
pub fn default_iteration_cap(n: usize) -> usize {
    ((10.0 * (n as f64).sqrt()).ceil() as usize).max(500)
}

/// Solves `A x = b` in place starting from the contents of `x`.
///
/// `apply` must be symmetric positive definite. Convergence is declared on the
/// true residual (recomputed whenever the recurrence residual passes `tol`).
pub fn pcg(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    assert_eq!(x.len(), n);
    assert_eq!(inv_diag.len(), n);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome { iterations: 0, residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let true_residual = |apply: &mut dyn FnMut(&[f64], &mut [f64]), x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        apply(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        dot(r, r).sqrt() / b_norm
    };
    let mut rel = true_residual(&mut apply, x, &mut r, &mut ap);
    if rel <= tol {
        return Ok(CgOutcome { iterations: 0, residual: rel });
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            rel = true_residual(&mut apply, x, &mut r, &mut ap);
            if rel <= tol {
                return Ok(CgOutcome { iterations: it, residual: rel });
            }
            // Recurrence drifted; restart from the true residual.
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SpsError::NoConvergence {
        iterations: it,
        residual: rel,
    })
}

/// Solves `(-Δ_h + shift) w = rhs` with Dirichlet conditions.
pub fn solve_shifted_laplacian(
    rhs: &ScalarField,
    shift: f64,
    tol: f64,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, CgOutcome)> {
    let grid = rhs.grid().clone();
    let n = grid.interior_count();
    let mut x = match guess {
        Some(g) => {
            g.same_grid(rhs)?;
            g.values().to_vec()
        }
        None => vec![0.0; n],
    };
    let inv_diag = vec![1.0 / (grid.laplacian_diagonal() + shift); n];
    let outcome = pcg(
        |v, out| shifted_apply(&grid, shift, v, out),
        &inv_diag,
        rhs.values(),
        &mut x,
        tol,
        default_iteration_cap(n),
    )?;
    Ok((ScalarField::from_raw(grid, x), outcome))
}

pub(crate) fn shifted_apply(grid: &Grid, shift: f64, v: &[f64], out: &mut [f64]) {
    grid.neg_laplacian_into(v, out);
    if shift != 0.0 {
        for (o, x) in out.iter_mut().zip(v) {
            *o += shift * x;
        }
    }
}
