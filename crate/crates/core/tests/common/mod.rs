#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sps_core::{Grid, ScalarField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// iid uniform values in `[lo, hi)`.
pub fn random_field(grid: &Arc<Grid>, seed: u64, lo: f64, hi: f64) -> ScalarField {
    let mut r = rng(seed);
    let vals = (0..grid.interior_count()).map(|_| r.gen_range(lo..hi)).collect();
    ScalarField::from_values(grid, vals).unwrap()
}

/// Sum of a few positive Gaussian bumps with random centers (inside `spread`
/// of the origin) and widths.
pub fn random_bumps(grid: &Arc<Grid>, seed: u64, spread: f64) -> ScalarField {
    let mut r = rng(seed);
    let k = r.gen_range(1..4);
    let bumps: Vec<([f64; 3], f64, f64)> = (0..k)
        .map(|_| {
            let c = [
                r.gen_range(-spread..spread),
                r.gen_range(-spread..spread),
                r.gen_range(-spread..spread),
            ];
            (c, r.gen_range(0.1..0.35), r.gen_range(0.5..2.0))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, s, a)| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

pub fn gaussian(grid: &Arc<Grid>, center: [f64; 3], sigma: f64, amp: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2);
        amp * (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Dense matrix of `-Δ_h + shift` assembled from the grid's neighbor table.
pub fn dense_operator(grid: &Grid, shift: f64) -> Vec<Vec<f64>> {
    let n = grid.interior_count();
    let h2 = grid.spacing() * grid.spacing();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        a[i][i] = 6.0 / h2 + shift;
        for &j in grid.neighbors(i) {
            if j != u32::MAX {
                a[i][j as usize] = -1.0 / h2;
            }
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `h³ Σ (u⁺)^p` (or `|u|^p`), evaluated with `powf` directly.
pub fn lp_oracle(u: &ScalarField, p: f64, positive: bool) -> f64 {
    let s: f64 = u
        .values()
        .iter()
        .map(|&v| if positive { v.max(0.0).powf(p) } else { v.abs().powf(p) })
        .sum();
    u.grid().cell_volume() * s
}

/// Root of `g(t) = A + λB t² − C t^{p-2}` located on a geometric scan of
/// `steps` points over `[1e-6, 1e6]` and refined by plain bisection.
pub fn nehari_scan(a: f64, b: f64, c: f64, lambda: f64, p: f64, steps: usize) -> f64 {
    let g = |t: f64| a + lambda * b * t * t - c * t.powf(p - 2.0);
    let ratio = (1e12f64).powf(1.0 / steps as f64);
    let mut lo = 1e-6;
    let mut hi = lo;
    for _ in 0..steps {
        hi = lo * ratio;
        if g(hi) < 0.0 {
            break;
        }
        lo = hi;
    }
    assert!(g(lo) > 0.0 && g(hi) < 0.0, "scan found no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
