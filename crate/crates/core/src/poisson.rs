//! The nonlocal sub-problem `-Δφ = u²` in Ω, `φ = 0` on ∂Ω.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::grid::ScalarField;
use crate::linalg::{default_iteration_cap, pcg, shifted_apply};

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: ScalarField,
    pub residual: f64,
    pub iterations: usize,
}

/// CG solve of `(-Δ_h) φ = u²` to relative residual `tol`.
pub fn solve_poisson(u: &ScalarField, tol: f64) -> Result<PoissonSolution> {
    solve_poisson_with_guess(u, tol, None)
}

/// As [`solve_poisson`], warm-started from `guess`.
pub fn solve_poisson_with_guess(
    u: &ScalarField,
    tol: f64,
    guess: Option<&ScalarField>,
) -> Result<PoissonSolution> {
    assert!(tol > 0.0, "Poisson tolerance must be positive");
    let grid = u.grid().clone();
    let n = grid.interior_count();
    let rhs: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let mut x = match guess {
        Some(g) => {
            g.same_grid(u)?;
            g.values().to_vec()
        }
        None => vec![0.0; n],
    };
    let inv_diag = vec![1.0 / grid.laplacian_diagonal(); n];
    let outcome = pcg(
        |v, out| shifted_apply(&grid, 0.0, v, out),
        &inv_diag,
        &rhs,
        &mut x,
        tol,
        default_iteration_cap(n),
    )?;
    Ok(PoissonSolution {
        phi: ScalarField::from_values(&grid, x)?,
        residual: outcome.residual,
        iterations: outcome.iterations,
    })
}

/// `h³ Σ φ_i u_i²`.
pub fn coupling_term(u: &ScalarField, phi: &ScalarField) -> Result<f64> {
    u.same_grid(phi)?;
    let w = u.grid().cell_volume();
    let s: f64 = u
        .values()
        .iter()
        .zip(phi.values())
        .map(|(u, p)| p * u * u)
        .sum();
    Ok(w * s)
}

/// Small content-addressed cache of Poisson solutions.
///
/// Keys are [`ScalarField::content_hash`]; hits are confirmed by comparing the
/// stored field bit for bit. Safe to share across threads.
#[derive(Debug)]
pub struct PoissonCache {
    tol: f64,
    capacity: usize,
    entries: Mutex<VecDeque<(u64, ScalarField, Arc<PoissonSolution>)>>,
}

impl PoissonCache {
    pub fn new(tol: f64, capacity: usize) -> Self {
        PoissonCache {
            tol,
            capacity: capacity.max(1),
            entries: Mutex::new(VecDeque::new()),
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn solve(&self, u: &ScalarField) -> Result<Arc<PoissonSolution>> {
        let key = u.content_hash();
        {
            let entries = self.entries.lock().expect("poisson cache poisoned");
            for (k, field, sol) in entries.iter() {
                if *k == key && field.grid().id() == u.grid().id() && field.values() == u.values() {
                    return Ok(sol.clone());
                }
            }
        }
        let sol = Arc::new(solve_poisson(u, self.tol)?);
        let mut entries = self.entries.lock().expect("poisson cache poisoned");
        if entries.len() >= self.capacity {
            entries.pop_front();
        }
        entries.push_back((key, u.clone(), sol.clone()));
        Ok(sol)
    }
}
