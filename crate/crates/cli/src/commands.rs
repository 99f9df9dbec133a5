//! One function per subcommand. Each writes its artifacts and returns a JSON
//! summary for the manifest.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sps_core::asymptotics::{sobolev_constant_with, DEFAULT_CUTOFF_RATIO};
use sps_core::multiplicity::default_radius;
use sps_core::{
    apply_laplacian, concentration_diagnostic, coupling_term, find_ground_state, multistart_search, solve_poisson,
    sobolev_constant, sweep_p, Functional, Grid, GroundState, Instanton, ProfileCache, ScalarField, SpsError,
};

use crate::config::RunConfig;
use crate::export::{
    catalog_csv, field_vtk, gradcheck_csv, instanton_csv, poisson_csv, sweep_csv, trace_csv, ArtifactDir, CatalogRow,
    GradcheckRow, InstantonRow, PoissonRow, SweepRow, TraceRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    GroundState,
    PoissonCheck,
    SweepP,
    Instanton,
    Multiplicity,
    Gradcheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::PoissonCheck => "poisson-check",
            Command::SweepP => "sweep-p",
            Command::Instanton => "instanton",
            Command::Multiplicity => "multiplicity",
            Command::Gradcheck => "gradcheck",
        }
    }
}

#[derive(Debug)]
pub enum CommandError {
    Core(SpsError),
    Io(std::io::Error),
}

impl From<SpsError> for CommandError {
    fn from(e: SpsError) -> Self {
        CommandError::Core(e)
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

/// How a command that ran to completion turned out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    NotConverged,
    CheckFailed,
}

#[derive(Debug)]
pub struct Report {
    pub summary: Value,
    pub verdict: Verdict,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

pub fn dispatch(command: Command, cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    match command {
        Command::GroundState => ground_state(cfg, dir),
        Command::PoissonCheck => poisson_check(cfg, dir),
        Command::SweepP => sweep(cfg, dir),
        Command::Instanton => instanton(cfg, dir),
        Command::Multiplicity => multiplicity(cfg, dir),
        Command::Gradcheck => gradcheck(cfg, dir),
    }
}

fn grid(cfg: &RunConfig) -> Result<Arc<Grid>, SpsError> {
    Grid::new(cfg.domain.clone(), cfg.resolution)
}

fn grid_summary(grid: &Grid) -> Value {
    json!({
        "resolution": grid.resolution(),
        "spacing": grid.spacing(),
        "interior_nodes": grid.interior_count(),
        "dims": grid.dims(),
    })
}

fn best_effort(result: Result<GroundState, SpsError>) -> Result<GroundState, SpsError> {
    match result {
        Err(SpsError::NotConverged { best }) => Ok(*best),
        other => other,
    }
}

fn ground_state(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let opts = cfg.solve_options();
    let start = Instant::now();
    let gs = best_effort(find_ground_state(&grid, &params, &opts))?;
    let runtime = start.elapsed().as_secs_f64();
    let phi = solve_poisson(&gs.u, opts.poisson_tol)?.phi;
    let conc = concentration_diagnostic(&gs.u)?;

    let title = format!("ground state p={} lambda={}", params.p, params.lambda);
    dir.write("ground_state.vtk", field_vtk(&gs.u, "u", &title).as_bytes())?;
    dir.write("potential.vtk", field_vtk(&phi, "phi", &title).as_bytes())?;
    let trace: Vec<TraceRow> = gs.trace.iter().map(TraceRow::from).collect();
    dir.write("trace.csv", trace_csv(&trace).as_bytes())?;

    let lines = vec![format!(
        "m = {:.12} ({} iterations, ps-residual {:.3e}, {})",
        gs.m,
        gs.iterations,
        gs.ps_residual,
        if gs.converged { "converged" } else { "NOT converged" }
    )];
    Ok(Report {
        summary: json!({
            "grid": grid_summary(&grid),
            "p": params.p,
            "lambda": params.lambda,
            "m": gs.m,
            "breakdown": gs.breakdown,
            "nehari_residual": gs.nehari_residual,
            "ps_residual": gs.ps_residual,
            "tolerance": gs.tolerance,
            "iterations": gs.iterations,
            "converged": gs.converged,
            "min_value": gs.u.min_value(),
            "max_value": gs.u.max_value(),
            "concentration": { "r_est": conc.r_est, "center": conc.center, "peak": conc.peak },
            "runtime_s": runtime,
        }),
        verdict: if gs.converged { Verdict::Ok } else { Verdict::NotConverged },
        lines,
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn uniform_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..grid.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_values(grid, values).expect("length matches the grid")
}

/// A few positive Gaussian bumps near the Chebyshev center plus small noise.
fn smooth_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let c0 = grid.domain().chebyshev_center();
    let spread = 0.4 * grid.domain().inradius();
    let bumps: Vec<([f64; 3], f64, f64)> = (0..rng.gen_range(1..4))
        .map(|_| {
            let c = [
                c0[0] + rng.gen_range(-spread..spread),
                c0[1] + rng.gen_range(-spread..spread),
                c0[2] + rng.gen_range(-spread..spread),
            ];
            (c, rng.gen_range(0.25..0.9) * spread, rng.gen_range(0.5..2.0))
        })
        .collect();
    let base = ScalarField::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, s, a)| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
                a * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    });
    base.axpy(0.1, &uniform_field(grid, rng))
}

fn poisson_check(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let grid = grid(cfg)?;
    let tol = cfg.solver.poisson_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.poisson_check.samples);
    for sample in 0..cfg.poisson_check.samples {
        let u = uniform_field(&grid, &mut rng);
        let sol = solve_poisson(&u, tol)?;
        let phi = &sol.phi;
        let energy_form = apply_laplacian(phi).dot(phi);
        let coupling = coupling_term(&u, phi)?;
        let doubled = solve_poisson(&u.scaled(2.0), tol)?.phi;
        let four_phi = phi.scaled(4.0);
        let homogeneity_rel = doubled.axpy(-1.0, &four_phi).l2_norm() / four_phi.l2_norm();
        rows.push(PoissonRow {
            sample,
            energy_form,
            coupling,
            green_rel: rel(energy_form, coupling),
            min_phi: phi.min_value(),
            homogeneity_rel,
            cg_iterations: sol.iterations,
        });
    }
    let runtime = start.elapsed().as_secs_f64();
    dir.write("poisson_check.csv", poisson_csv(&rows).as_bytes())?;

    let max_green = rows.iter().map(|r| r.green_rel).fold(0.0, f64::max);
    let max_hom = rows.iter().map(|r| r.homogeneity_rel).fold(0.0, f64::max);
    let min_phi = rows.iter().map(|r| r.min_phi).fold(f64::INFINITY, f64::min);
    let limit = cfg.poisson_check.tolerance;
    let pass = max_green <= limit && min_phi >= 0.0 && max_hom <= 1e3 * tol;
    Ok(Report {
        summary: json!({
            "grid": grid_summary(&grid),
            "samples": rows.len(),
            "poisson_tol": tol,
            "max_green_rel": max_green,
            "max_homogeneity_rel": max_hom,
            "min_phi": min_phi,
            "tolerance": limit,
            "pass": pass,
            "runtime_s": runtime,
        }),
        verdict: if pass { Verdict::Ok } else { Verdict::CheckFailed },
        lines: vec![format!(
            "{} samples: max Green-identity error {max_green:.3e} (limit {limit:.0e}), min phi {min_phi:.3e}, max homogeneity error {max_hom:.3e}: {}",
            rows.len(),
            if pass { "PASS" } else { "FAIL" }
        )],
    })
}

fn gradcheck(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let grid = grid(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    for &p in &cfg.gradcheck.p_list {
        let f = Functional::with_poisson_tol(cfg.params().with_p(p), 1e-13)?;
        for pair in 0..cfg.gradcheck.pairs {
            let u = smooth_field(&grid, &mut rng);
            let v = uniform_field(&grid, &mut rng);
            let eps = 1e-5 * u.l2_norm() / v.l2_norm();
            let ip = f.evaluate(&u.axpy(eps, &v))?.energy;
            let im = f.evaluate(&u.axpy(-eps, &v))?.energy;
            let finite_difference = (ip - im) / (2.0 * eps);
            let analytic = f.gradient(&u)?.dot(&v);
            rows.push(GradcheckRow {
                p,
                pair,
                analytic,
                finite_difference,
                rel_error: rel(analytic, finite_difference),
            });
        }
    }
    dir.write("gradcheck.csv", gradcheck_csv(&rows).as_bytes())?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    let pass = worst <= cfg.gradcheck.tolerance;
    Ok(Report {
        summary: json!({
            "grid": grid_summary(&grid),
            "lambda": cfg.lambda,
            "p_list": cfg.gradcheck.p_list,
            "pairs": cfg.gradcheck.pairs,
            "max_rel_error": worst,
            "tolerance": cfg.gradcheck.tolerance,
            "pass": pass,
        }),
        verdict: if pass { Verdict::Ok } else { Verdict::CheckFailed },
        lines: vec![format!(
            "{} directional derivatives: worst relative error {worst:.3e} (limit {:.0e}): {}",
            rows.len(),
            cfg.gradcheck.tolerance,
            if pass { "PASS" } else { "FAIL" }
        )],
    })
}

fn instanton(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let n = cfg.instanton.quadrature_points;
    let mut rows = Vec::new();
    for &scale in &cfg.instanton.scales {
        let sc = sobolev_constant_with(scale, n, DEFAULT_CUTOFF_RATIO)?;
        rows.push(InstantonRow {
            scale,
            peak: Instanton::new(scale, [0.0; 3])?.peak(),
            grad_energy: sc.grad_energy,
            crit_norm: sc.crit_norm,
            s: sc.s,
            tail_bound: sc.tail_bound,
        });
    }
    dir.write("instanton.csv", instanton_csv(&rows).as_bytes())?;

    let base = sobolev_constant(n)?;
    let refined = sobolev_constant(2 * n)?;
    let s = base.s;
    let m_star = base.m_star();
    let identity = m_star - s.powf(1.5) / 3.0;
    let closed_form = 3.0 * (std::f64::consts::PI / 2.0).powf(4.0 / 3.0);
    let scale_spread = rows.iter().map(|r| rel(r.s, s)).fold(0.0, f64::max);
    let peak_error = rows
        .iter()
        .map(|r| rel(r.peak, (3.0 * r.scale * r.scale).powf(0.25) / r.scale))
        .fold(0.0, f64::max);
    let lines = vec![
        format!("S   = {s:.15}"),
        format!("m_* = {m_star:.15}"),
        format!("m_* - S^(3/2)/3 = {identity:.3e}"),
        format!("S closed form 3(pi/2)^(4/3) = {closed_form:.15} (relative gap {:.3e})", rel(s, closed_form)),
        format!("scale spread {scale_spread:.3e}, refinement change {:.3e}", rel(s, refined.s)),
    ];
    Ok(Report {
        summary: json!({
            "quadrature_points": n,
            "s": s,
            "m_star": m_star,
            "identity_residual": identity,
            "s_closed_form": closed_form,
            "closed_form_rel": rel(s, closed_form),
            "refinement_rel": rel(s, refined.s),
            "scale_spread_rel": scale_spread,
            "peak_rel": peak_error,
            "tail_bound": base.tail_bound,
        }),
        verdict: Verdict::Ok,
        lines,
    })
}

fn sweep(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let opts = cfg.solve_options();
    let start = Instant::now();
    let records = sweep_p(&grid, &params, &cfg.sweep.p_list, &opts)?;
    let m_star = sobolev_constant(cfg.instanton.quadrature_points)?.m_star();
    let r = cfg.r.unwrap_or_else(|| default_radius(grid.domain(), grid.spacing()));
    let cache = ProfileCache::new();

    let rows: Vec<SweepRow> = records.iter().map(SweepRow::from).collect();
    dir.write("sweep.csv", sweep_csv(&rows).as_bytes())?;

    let mut entries = Vec::new();
    let mut lines = vec![format!("m_* = {m_star:.12}")];
    for rec in &records {
        let m_pr = match cache.get(r, &params.with_p(rec.p), grid.spacing(), &opts) {
            Ok(profile) => Some(profile.energy),
            Err(SpsError::NotConverged { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        lines.push(format!(
            "p = {:.3}: m_p = {:.9}, m~_p = {:.9}, t = {:.5}, R_est = {:.4e}{}",
            rec.p,
            rec.m_p,
            rec.m_tilde_p,
            rec.t_to_critical(),
            rec.r_est,
            if rec.m_p < m_star { "" } else { "  (above m_*)" }
        ));
        entries.push(json!({
            "p": rec.p,
            "m_p": rec.m_p,
            "m_tilde_p": rec.m_tilde_p,
            "margin_to_critical": m_star - rec.m_p,
            "below_critical": rec.m_p < m_star,
            "t_to_critical": rec.t_to_critical(),
            "norm": rec.norm,
            "r_est": rec.r_est,
            "m_pr": m_pr,
            "k_p": m_pr.map(|v| v - rec.m_p),
            "converged": rec.converged,
        }));
    }
    let all_converged = records.iter().all(|r| r.converged);
    Ok(Report {
        summary: json!({
            "grid": grid_summary(&grid),
            "lambda": params.lambda,
            "m_star": m_star,
            "r": r,
            "records": entries,
            "all_converged": all_converged,
            "runtime_s": start.elapsed().as_secs_f64(),
        }),
        verdict: if all_converged { Verdict::Ok } else { Verdict::NotConverged },
        lines,
    })
}

fn multiplicity(cfg: &RunConfig, dir: &mut ArtifactDir) -> Result<Report, CommandError> {
    let grid = grid(cfg)?;
    let params = cfg.params();
    let opts = cfg.solve_options();
    let r = cfg.r.unwrap_or_else(|| default_radius(grid.domain(), grid.spacing()));
    let cache = ProfileCache::new();
    let start = Instant::now();
    let catalog = multistart_search(&grid, &params, r, cfg.multistart.n_centers, &opts, &cache)?;
    let runtime = start.elapsed().as_secs_f64();

    let rows: Vec<CatalogRow> = catalog.entries.iter().enumerate().map(|(k, e)| CatalogRow::new(k, e)).collect();
    dir.write("catalog.csv", catalog_csv(&rows).as_bytes())?;
    for (k, e) in catalog.entries.iter().enumerate() {
        let title = format!("catalog entry {k} m={:.12}", e.state.m);
        dir.write(&format!("solution_{k:03}.vtk"), field_vtk(&e.state.u, "u", &title).as_bytes())?;
    }

    let mut lines = vec![catalog.summary()];
    lines.extend(catalog.notes.iter().cloned());
    let entries: Vec<Value> = catalog
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            json!({
                "id": k,
                "m": e.state.m,
                "barycenter": e.barycenter,
                "membership": e.membership.as_str(),
                "sublevel": e.sublevel,
                "start": e.start,
                "min_value": e.state.u.min_value(),
                "iterations": e.state.iterations,
            })
        })
        .collect();
    let runs: Vec<Value> = catalog
        .runs
        .iter()
        .map(|run| json!({ "center": run.center, "energy": run.energy, "converged": run.converged, "error": run.error }))
        .collect();
    Ok(Report {
        summary: json!({
            "grid": grid_summary(&grid),
            "p": params.p,
            "lambda": params.lambda,
            "r": r,
            "m_p": catalog.m_p,
            "m_pr": catalog.m_pr,
            "category": catalog.category,
            "found": catalog.len(),
            "predicted": catalog.predicted_count(),
            "failed_runs": catalog.failed_runs(),
            "notes": catalog.notes,
            "entries": entries,
            "runs": runs,
            "runtime_s": runtime,
        }),
        verdict: if catalog.is_empty() { Verdict::NotConverged } else { Verdict::Ok },
        lines,
    })
}
