//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each, and exits nonzero if any criterion fails.
//!
//! Oracles here are written against the grid's lattice indexing and plain
//! quadrature, independently of the library's operators.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sps_cli::{run, Command, RunConfig};
use sps_core::asymptotics::sobolev_constant_with;
use sps_core::energy::nehari_project;
use sps_core::multiplicity::{default_radius, sample_centers, CatalogEntry};
use sps_core::{
    barycenter, find_ground_state, multistart_search, omega_r_membership, solve_poisson, sweep_p, transplant_bump,
    DomainSpec, Functional, Grid, GroundState, Instanton, Membership, ProblemParams, ProfileCache, ScalarField,
    SolutionCatalog, SolveOptions, SpsError,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(grid: &Arc<Grid>, seed: u64) -> ScalarField {
    let mut r = rng(seed);
    let v = (0..grid.interior_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, v).unwrap()
}

fn bumps(grid: &Arc<Grid>, seed: u64) -> ScalarField {
    let mut r = rng(seed);
    let k = r.gen_range(1..4);
    let b: Vec<([f64; 3], f64, f64)> = (0..k)
        .map(|_| {
            let c = [r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4), r.gen_range(-0.4..0.4)];
            (c, r.gen_range(0.1..0.35), r.gen_range(0.5..2.0))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        b.iter()
            .map(|(c, s, a)| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    })
}

/// `-Δ_h u` from lattice indices: any of the six neighbors that is not an
/// interior node counts as zero.
fn neg_laplacian_oracle(u: &ScalarField) -> Vec<f64> {
    let g = u.grid();
    let h2 = g.spacing() * g.spacing();
    let [nx, ny, nz] = g.dims();
    let vals = u.values();
    (0..g.interior_count())
        .map(|i| {
            let [a, b, c] = g.lattice_position(i);
            let mut s = 6.0 * vals[i];
            let steps: [(usize, usize, usize, bool); 6] = [
                (a.wrapping_sub(1), b, c, a > 0),
                (a + 1, b, c, a + 1 < nx),
                (a, b.wrapping_sub(1), c, b > 0),
                (a, b + 1, c, b + 1 < ny),
                (a, b, c.wrapping_sub(1), c > 0),
                (a, b, c + 1, c + 1 < nz),
            ];
            for (x, y, z, inside) in steps {
                if inside {
                    if let Some(j) = g.interior_index([x, y, z]) {
                        s -= vals[j];
                    }
                }
            }
            s / h2
        })
        .collect()
}

fn weighted_dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// `‖u‖² = h³ Σ (u·(-Δ_h u) + u²)`.
fn h1_oracle(u: &ScalarField) -> f64 {
    let lap = neg_laplacian_oracle(u);
    weighted_dot(u.grid(), u.values(), &lap) + weighted_dot(u.grid(), u.values(), u.values())
}

fn lp_oracle(u: &ScalarField, p: f64) -> f64 {
    u.grid().cell_volume() * u.values().iter().map(|v| v.max(0.0).powf(p)).sum::<f64>()
}

fn coupling_oracle(u: &ScalarField, tol: f64) -> f64 {
    let phi = solve_poisson(u, tol).unwrap().phi;
    let u2: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    weighted_dot(u.grid(), phi.values(), &u2)
}

fn energy_oracle(u: &ScalarField, p: f64, lambda: f64) -> f64 {
    0.5 * h1_oracle(u) + 0.25 * lambda * coupling_oracle(u, 1e-13) - lp_oracle(u, p) / p
}

/// Root of `A + λB t² − C t^{p-2}` from a geometric scan over `[1e-6, 1e6]`
/// followed by bisection to machine precision.
fn nehari_scan(a: f64, b: f64, c: f64, lambda: f64, p: f64) -> f64 {
    let g = |t: f64| a + lambda * b * t * t - c * t.powf(p - 2.0);
    let steps = 1_000_000;
    let ratio = 1e12f64.powf(1.0 / steps as f64);
    let (mut lo, mut hi) = (1e-6, 1e-6);
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

fn best(r: Result<GroundState, SpsError>) -> GroundState {
    match r {
        Ok(gs) => gs,
        Err(SpsError::NotConverged { best }) => *best,
        Err(e) => panic!("{e}"),
    }
}

fn green_identity() -> Verdict {
    let grid = Grid::new(DomainSpec::ball(1.0), 33).unwrap();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let u = uniform(&grid, 1000 + seed);
        let phi = solve_poisson(&u, 1e-10).unwrap().phi;
        let lhs = weighted_dot(&grid, &neg_laplacian_oracle(&phi), phi.values());
        let u2: Vec<f64> = u.values().iter().map(|v| v * v).collect();
        let rhs = weighted_dot(&grid, phi.values(), &u2);
        worst = worst.max(rel(lhs, rhs));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-8 && secs < 10.0,
        format!("max relative error {worst:.2e} (<= 1e-8), {secs:.2} s (< 10 s)"),
    )
}

fn gradient_audit() -> Verdict {
    let grid = Grid::new(DomainSpec::ball(1.0), 17).unwrap();
    let mut worst = 0.0f64;
    for p in [4.5, 5.5] {
        let f = Functional::with_poisson_tol(ProblemParams::new(p, 1.0).unwrap(), 1e-13).unwrap();
        for seed in 0..10 {
            let u = bumps(&grid, 2000 + seed).axpy(0.1, &uniform(&grid, 2100 + seed));
            let v = uniform(&grid, 2200 + seed);
            let eps = 1e-5 * u.l2_norm() / v.l2_norm();
            let fd = (energy_oracle(&u.axpy(eps, &v), p, 1.0) - energy_oracle(&u.axpy(-eps, &v), p, 1.0)) / (2.0 * eps);
            let an = f.gradient(&u).unwrap().dot(&v);
            worst = worst.max(rel(an, fd));
        }
    }
    verdict(worst <= 1e-5, format!("20 pairs, worst relative error {worst:.2e} (<= 1e-5)"))
}

fn nehari_projection() -> Verdict {
    let grid = Grid::new(DomainSpec::ball(1.0), 17).unwrap();
    let dims_ok = grid.dims() == [17, 17, 17];
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    let (mut g_worst, mut t_worst, mut scale_worst) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let u = if seed % 2 == 0 {
            bumps(&grid, 3000 + seed)
        } else {
            uniform(&grid, 3000 + seed)
        };
        let proj = nehari_project(&u, &params).unwrap();
        let b = Functional::new(params).unwrap().evaluate(&proj.tu).unwrap();
        g_worst = g_worst.max(b.nehari.abs() / h1_oracle(&proj.tu));
        let t_scan = nehari_scan(h1_oracle(&u), coupling_oracle(&u, 1e-13), lp_oracle(&u, 5.0), 1.0, 5.0);
        t_worst = t_worst.max(rel(proj.t, t_scan));
        for c in [1e-3, 0.37, 2.0, 5e2] {
            let tc = nehari_project(&u.scaled(c), &params).unwrap().t;
            scale_worst = scale_worst.max(rel(tc, proj.t / c));
        }
    }
    verdict(
        dims_ok && g_worst <= 1e-10 && t_worst <= 1e-9 && scale_worst <= 1e-12,
        format!(
            "17^3 lattice {dims_ok}; |G(tu)|/|tu|^2 {g_worst:.2e} (<= 1e-10), t vs scan {t_worst:.2e} (<= 1e-9), t(cu) c/t(u) {scale_worst:.2e} (<= 1e-12)"
        ),
    )
}

fn instanton_suite() -> Verdict {
    let n = 200_000;
    let s1 = sobolev_constant_with(1.0, n, 1e10).unwrap();
    let s10 = sobolev_constant_with(10.0, n, 1e10).unwrap();
    let s1_fine = sobolev_constant_with(1.0, 2 * n, 1e10).unwrap();
    let spread = rel(s10.s, s1.s);
    let identity = rel(s1.m_star(), s1.s.powf(1.5) / 3.0);
    let refine = rel(s1_fine.s, s1.s);
    let closed = rel(s1.s, 3.0 * (std::f64::consts::PI / 2.0).powf(4.0 / 3.0));
    let mut peak_worst = 0.0f64;
    for scale in [0.05f64, 0.5, 1.0, 3.0, 10.0] {
        let expect = 3f64.powf(0.25) * scale.sqrt() / scale;
        peak_worst = peak_worst.max(rel(Instanton::new(scale, [0.0; 3]).unwrap().peak(), expect));
    }
    verdict(
        spread <= 1e-8 && identity <= 1e-12 && refine <= 1e-9 && peak_worst <= 4.0 * f64::EPSILON,
        format!(
            "S {:.12}, R-spread {spread:.1e}, m_* identity {identity:.1e}, refinement {refine:.1e}, peaks {peak_worst:.1e}, closed form gap {closed:.1e}",
            s1.s
        ),
    )
}

fn ordering_chain() -> Verdict {
    let start = Instant::now();
    let grid = Grid::new(DomainSpec::ball(1.0), 33).unwrap();
    let opts = SolveOptions::default();
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    let m = best(find_ground_state(&grid, &params, &opts));
    let mt = best(find_ground_state(&grid, &params.with_lambda(0.0), &opts));
    let small = Grid::with_spacing(DomainSpec::ball(0.4), grid.spacing()).unwrap();
    let mr = best(find_ground_state(&small, &params, &opts));
    let secs = start.elapsed().as_secs_f64();
    let converged = m.converged && mt.converged && mr.converged;
    verdict(
        converged && m.m - mt.m > 1e-6 && m.m < mr.m && secs < 300.0,
        format!(
            "m~ {:.9} < m {:.9} (margin {:.2e}) < m_r {:.9}, converged {converged}, {secs:.1} s",
            mt.m,
            m.m,
            m.m - mt.m,
            mr.m
        ),
    )
}

fn sweep_trend() -> Verdict {
    let grid = Grid::new(DomainSpec::ball(1.0), 33).unwrap();
    let params = ProblemParams::new(5.0, 1.0).unwrap();
    let records = sweep_p(&grid, &params, &[4.2, 4.6, 5.0, 5.4, 5.8], &SolveOptions::default()).unwrap();
    let m_star = sobolev_constant_with(1.0, 200_000, 1e10).unwrap().m_star();
    let below: Vec<String> = records
        .iter()
        .map(|r| format!("p={}: m {:.4}{}", r.p, r.m_p, if r.m_p < m_star { "<" } else { ">=" }))
        .collect();
    let all_below = records.iter().all(|r| r.m_p < m_star);
    let t58 = records.last().unwrap().t_to_critical();
    verdict(
        all_below && t58 <= 1.1,
        format!("m_* {m_star:.4}; {}; t(5.8) {t58:.4} (<= 1.1)", below.join(", ")),
    )
}

struct Shell {
    grid: Arc<Grid>,
    params: ProblemParams,
    r: f64,
    cache: ProfileCache,
    catalog: SolutionCatalog,
    secs: f64,
}

fn shell_experiment() -> Shell {
    let grid = Grid::new(DomainSpec::shell(0.5, 1.0), 33).unwrap();
    let params = ProblemParams::new(5.5, 1.0).unwrap();
    let r = default_radius(grid.domain(), grid.spacing());
    let cache = ProfileCache::new();
    let start = Instant::now();
    let catalog = multistart_search(&grid, &params, r, 12, &SolveOptions::default(), &cache).unwrap();
    Shell {
        secs: start.elapsed().as_secs_f64(),
        grid,
        params,
        r,
        cache,
        catalog,
    }
}

fn barycenter_transplant(shell: &Shell) -> Verdict {
    let h = shell.grid.spacing();
    let centers = sample_centers(shell.grid.domain(), shell.r, 5).unwrap();
    let mut worst = 0.0f64;
    for y in &centers {
        let psi = transplant_bump(&shell.grid, y, shell.r, &shell.params, &shell.cache, &SolveOptions::default()).unwrap();
        let b = barycenter(&psi).unwrap();
        let d = ((b[0] - y[0]).powi(2) + (b[1] - y[1]).powi(2) + (b[2] - y[2]).powi(2)).sqrt();
        worst = worst.max(d);
    }
    let sub: Vec<&CatalogEntry> = shell.catalog.entries.iter().filter(|e| e.state.m <= shell.catalog.m_pr).collect();
    let sub_ok = sub.iter().all(|e| {
        e.membership != Membership::Outer
            && omega_r_membership(shell.grid.domain(), shell.r, &e.barycenter).unwrap() == e.membership
    });
    verdict(
        centers.len() == 5 && worst <= 2.0 * h && sub_ok,
        format!(
            "{} centers, max |beta - y| {worst:.3e} (<= 2h = {:.4}); {} entries with m <= m_pr {:.4}, none outer: {sub_ok}",
            centers.len(),
            2.0 * h,
            sub.len(),
            shell.catalog.m_pr
        ),
    )
}

fn shell_multiplicity(shell: &Shell) -> Verdict {
    let good: Vec<&CatalogEntry> = shell
        .catalog
        .entries
        .iter()
        .filter(|e| e.state.converged && e.state.u.min_value() >= -1e-12)
        .collect();
    let mut min_sep = f64::INFINITY;
    for (i, a) in good.iter().enumerate() {
        for b in &good[i + 1..] {
            let d = a.state.u.axpy(-1.0, &b.state.u).l2_norm();
            min_sep = min_sep.min(d / a.state.u.l2_norm().max(b.state.u.l2_norm()));
        }
    }
    let predicted = shell.catalog.predicted_count();
    verdict(
        good.len() >= 2 && min_sep >= 0.05 && shell.secs < 1800.0,
        format!(
            "{} converged positive solutions (>= 2), min pairwise L2 separation {:.3} of norm (>= 0.05), {:.1} s; predicted cat+1 = {} (reported only)",
            good.len(),
            min_sep,
            shell.secs,
            predicted.map_or("n/a".to_string(), |n| n.to_string())
        ),
    )
}

/// Numeric CSV fields of every file in `dir`, skipping wall-clock columns.
fn csv_numbers(dir: &Path) -> Vec<(String, Vec<String>)> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let mut r = csv::Reader::from_path(dir.join(&name)).unwrap();
            let header = r.headers().unwrap().clone();
            let mut fields = Vec::new();
            for rec in r.records() {
                for (h, v) in header.iter().zip(rec.unwrap().iter()) {
                    if h != "runtime_s" && v.parse::<f64>().is_ok() {
                        fields.push(v.to_owned());
                    }
                }
            }
            (name, fields)
        })
        .collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let base = RunConfig {
        resolution: 17,
        ..RunConfig::default()
    };
    let mut runs: Vec<(Command, RunConfig)> = vec![
        (Command::GroundState, base.clone()),
        (Command::PoissonCheck, base.clone()),
        (Command::Gradcheck, base.clone()),
        (Command::Instanton, base.clone()),
    ];
    let mut sweep = base.clone();
    sweep.sweep.p_list = vec![4.6, 5.4];
    runs.push((Command::SweepP, sweep));
    let mut mult = base.clone();
    mult.domain = DomainSpec::shell(0.5, 1.0);
    mult.p = 5.5;
    mult.multistart.n_centers = 6;
    runs.push((Command::Multiplicity, mult));

    let mut mismatches = Vec::new();
    let mut compared = 0usize;
    for (cmd, cfg) in runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let mut c = cfg.clone();
            c.out = tmp.path().join(format!("{}-{k}", cmd.name()));
            let code = run(cmd, &c).exit_code;
            if code != 0 {
                mismatches.push(format!("{} exit {code}", cmd.name()));
            }
            outputs.push(csv_numbers(&c.out));
        }
        compared += outputs[0].iter().map(|(_, f)| f.len()).sum::<usize>();
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            mismatches.push(cmd.name().to_string());
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "6 commands run twice, {compared} numeric CSV fields compared (runtime_s excluded), mismatches: {mismatches:?}"
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn main() {
    let shell = std::cell::OnceCell::new();
    let shell_fn = || shell.get_or_init(shell_experiment);
    let criteria: Vec<Criterion> = vec![
        ("1 Green identity", Box::new(green_identity)),
        ("2 gradient audit", Box::new(gradient_audit)),
        ("3 Nehari projection", Box::new(nehari_projection)),
        ("4 instanton suite", Box::new(instanton_suite)),
        ("5 ordering chain", Box::new(ordering_chain)),
        ("6 sweep trend", Box::new(sweep_trend)),
        ("7 barycenter/transplant", Box::new(|| barycenter_transplant(shell_fn()))),
        ("8 shell multiplicity", Box::new(|| shell_multiplicity(shell_fn()))),
        ("9 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, f) in &criteria {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name} [{:.1} s]: {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
