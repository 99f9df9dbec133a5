//! Barycenter localization, inner/outer parallel sets, transplanted radial
//! bumps and the multi-start search for distinct positive solutions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::ProblemParams;
use crate::error::{Result, SpsError};
use crate::grid::{DomainSpec, Grid, Point, ScalarField, GHOST};
use crate::interp::Pchip;
use crate::solver::{default_initial_guess, find_ground_state, minimize_on_nehari, GroundState, SolveOptions};

/// Gradient-energy-weighted centroid `∫ x |∇u|² / ∫ |∇u|²`.
///
/// Each lattice edge (including edges to boundary nodes, where `u = 0`)
/// carries `h³ ((u_i - u_j)/h)²`, split evenly between its endpoints, which
/// places it at the edge midpoint.
pub fn barycenter(u: &ScalarField) -> Result<Point> {
    let grid = u.grid();
    let h = grid.spacing();
    let vals = u.values();
    let mut total = 0.0;
    let mut moment = [0.0; 3];
    for i in 0..grid.interior_count() {
        let x = grid.coord(i);
        for (dir, &j) in grid.neighbors(i).iter().enumerate() {
            // Interior edges are visited from their lower endpoint only.
            let forward = dir % 2 == 1;
            if j != GHOST && !forward {
                continue;
            }
            let uj = if j == GHOST { 0.0 } else { vals[j as usize] };
            let e = (vals[i] - uj) * (vals[i] - uj);
            if e == 0.0 {
                continue;
            }
            let axis = dir / 2;
            let mut mid = x;
            mid[axis] += if forward { 0.5 * h } else { -0.5 * h };
            total += e;
            for k in 0..3 {
                moment[k] += e * mid[k];
            }
        }
    }
    if !(total > 0.0) {
        return Err(SpsError::ZeroField);
    }
    Ok([moment[0] / total, moment[1] / total, moment[2] / total])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// In `Ω_r⁻ = {x ∈ Ω : d(x, ∂Ω) ≥ r}`.
    Inner,
    /// In `Ω_r⁺ = {d(x, Ω) ≤ r}` but not in `Ω_r⁻`.
    Collar,
    /// Outside `Ω_r⁺`.
    Outer,
}

impl Membership {
    pub fn as_str(&self) -> &'static str {
        match self {
            Membership::Inner => "inner",
            Membership::Collar => "collar",
            Membership::Outer => "outer",
        }
    }
}

/// Classifies `x` against the inner and outer parallel sets at distance `r`.
///
/// `r` must be positive and below the inradius, so that some ball of radius
/// `r` fits in Ω. For overlapping ball unions the inner distance is a lower
/// bound, which makes `Inner` conservative.
pub fn omega_r_membership(domain: &DomainSpec, r: f64, x: &Point) -> Result<Membership> {
    check_radius(domain, r)?;
    let sd = domain.signed_distance(x);
    Ok(if sd <= -r {
        Membership::Inner
    } else if sd <= r {
        Membership::Collar
    } else {
        Membership::Outer
    })
}

fn check_radius(domain: &DomainSpec, r: f64) -> Result<()> {
    let inradius = domain.inradius();
    if !(r > 0.0 && r < inradius) {
        return Err(SpsError::RadiusTooLarge { r, inradius });
    }
    Ok(())
}

/// `max(0.3·inradius, 3h)`, kept below the inradius.
pub fn default_radius(domain: &DomainSpec, h: f64) -> f64 {
    let inradius = domain.inradius();
    (0.3 * inradius).max(3.0 * h).min(0.9 * inradius)
}

/// Ground state of the ball `B_r(0)` on a lattice of spacing `h`, reduced to
/// a radial profile along the `+x` axis.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub r: f64,
    pub params: ProblemParams,
    pub h: f64,
    /// `m_{p,r}`: energy of the ball ground state.
    pub energy: f64,
    pub state: GroundState,
    /// `max |u(x) - profile(|x|)| / max u` over the ball nodes.
    pub radial_defect: f64,
    interp: Pchip,
}

/// Threshold on [`RadialProfile::radial_defect`] for calling the ball
/// ground state radial.
pub const RADIALITY_TOLERANCE: f64 = 1e-3;

impl RadialProfile {
    /// Runs from the radial Gaussian guess only; no random restarts, so the
    /// result keeps the lattice symmetry of the start.
    pub fn compute(r: f64, params: &ProblemParams, h: f64, opts: &SolveOptions) -> Result<Self> {
        let grid = Grid::with_spacing(DomainSpec::ball(r), h)?;
        let state = minimize_on_nehari(&default_initial_guess(&grid), params, opts)?;
        if !state.converged {
            return Err(SpsError::NotConverged { best: Box::new(state) });
        }
        let center = grid.nearest_node(&[0.0; 3]);
        let [ci, cj, ck] = grid.lattice_position(center);
        let mut radii = Vec::new();
        let mut values = Vec::new();
        let mut step = 0;
        while let Some(i) = grid.interior_index([ci + step, cj, ck]) {
            radii.push(grid.coord(i)[0] - grid.coord(center)[0]);
            values.push(state.u.values()[i]);
            step += 1;
        }
        if radii.last().is_none_or(|&last| last < r) {
            radii.push(r);
            values.push(0.0);
        }
        let interp = Pchip::new(radii, values)?;
        let peak = state.u.max_value();
        let c = grid.coord(center);
        let mut defect: f64 = 0.0;
        for i in 0..grid.interior_count() {
            let x = grid.coord(i);
            let rho = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
            defect = defect.max((state.u.values()[i] - interp.eval(rho)).abs());
        }
        Ok(RadialProfile {
            r,
            params: *params,
            h,
            energy: state.m,
            radial_defect: defect / peak,
            state,
            interp,
        })
    }

    pub fn is_radial(&self) -> bool {
        self.radial_defect < RADIALITY_TOLERANCE
    }

    /// Profile value at distance `rho` from the center; zero from `r` on.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho >= self.r {
            0.0
        } else {
            self.interp.eval(rho).max(0.0)
        }
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        self.interp.knots()
    }
}

type ProfileKey = (u64, u64, u64, u64, bool);

/// Shared cache of radial profiles keyed by `(r, p, λ, h, positive_part)`.
#[derive(Debug, Default)]
pub struct ProfileCache {
    entries: Mutex<HashMap<ProfileKey, Arc<RadialProfile>>>,
}

impl ProfileCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, r: f64, params: &ProblemParams, h: f64, opts: &SolveOptions) -> Result<Arc<RadialProfile>> {
        let key = (
            r.to_bits(),
            params.p.to_bits(),
            params.lambda.to_bits(),
            h.to_bits(),
            params.positive_part,
        );
        if let Some(p) = self.entries.lock().expect("profile cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        let profile = Arc::new(RadialProfile::compute(r, params, h, opts)?);
        let mut entries = self.entries.lock().expect("profile cache poisoned");
        Ok(entries.entry(key).or_insert(profile).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("profile cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `Ψ_{p,r}(y)(x) = u_{p,r}(|x - y|)` on `B_r(y)`, zero elsewhere, sampled on
/// `grid`. Not projected onto the Nehari manifold.
pub fn transplant_bump(
    grid: &Arc<Grid>,
    y: &Point,
    r: f64,
    params: &ProblemParams,
    cache: &ProfileCache,
    opts: &SolveOptions,
) -> Result<ScalarField> {
    if omega_r_membership(grid.domain(), r, y)? != Membership::Inner {
        return Err(SpsError::OutsideInnerSet(*y));
    }
    let profile = cache.get(r, params, grid.spacing(), opts)?;
    Ok(ScalarField::from_fn(grid, |x| {
        let rho = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        profile.eval(rho)
    }))
}

/// `n` quasi-uniform points of `Ω_r⁻`.
///
/// Shells use Fibonacci spheres on evenly spaced radial layers; balls and
/// boxes use the smallest centered lattice holding at least `n` inner points;
/// ball unions split `n` round-robin over their balls.
pub fn sample_centers(domain: &DomainSpec, r: f64, n: usize) -> Result<Vec<Point>> {
    check_radius(domain, r)?;
    if n == 0 {
        return Err(SpsError::InvalidParams("n_centers must be >= 1".into()));
    }
    let pts = match domain {
        DomainSpec::Shell { inner, outer } => {
            let (a, b) = (inner + r, outer - r);
            let layers = 1 + n / 32;
            let mut pts = Vec::with_capacity(n);
            for l in 0..layers {
                let rho = a + (l as f64 + 0.5) * (b - a) / layers as f64;
                let m = n / layers + usize::from(l < n % layers);
                pts.extend(fibonacci_sphere(m).into_iter().map(|d| [rho * d[0], rho * d[1], rho * d[2]]));
            }
            pts
        }
        DomainSpec::Ball { .. } | DomainSpec::Box { .. } => lattice_centers(domain, r, n, [0.0; 3], domain.bounding_box())?,
        DomainSpec::BallUnion { balls } => {
            let mut pts = Vec::with_capacity(n);
            for (i, b) in balls.iter().enumerate() {
                let m = n / balls.len() + usize::from(i < n % balls.len());
                if m == 0 || b.radius <= r {
                    continue;
                }
                let lo = [b.center[0] - b.radius, b.center[1] - b.radius, b.center[2] - b.radius];
                let hi = [b.center[0] + b.radius, b.center[1] + b.radius, b.center[2] + b.radius];
                pts.extend(lattice_centers(domain, r, m, b.center, (lo, hi))?);
            }
            pts
        }
    };
    if pts.is_empty() {
        return Err(SpsError::RadiusTooLarge {
            r,
            inradius: domain.inradius(),
        });
    }
    Ok(pts)
}

/// Moves each center to its nearest grid node when that node is still in
/// `Ω_r⁻`, so transplanted profiles line up with the lattice they came from.
/// Duplicates created by snapping are dropped.
pub fn snap_to_nodes(grid: &Grid, r: f64, centers: &[Point]) -> Result<Vec<Point>> {
    let mut out: Vec<Point> = Vec::with_capacity(centers.len());
    for y in centers {
        let node = grid.coord(grid.nearest_node(y));
        let pick = if omega_r_membership(grid.domain(), r, &node)? == Membership::Inner {
            node
        } else {
            *y
        };
        if !out.contains(&pick) {
            out.push(pick);
        }
    }
    Ok(out)
}

fn fibonacci_sphere(m: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / m as f64;
            let s = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            [s * phi.cos(), s * phi.sin(), z]
        })
        .collect()
}

fn lattice_centers(domain: &DomainSpec, r: f64, n: usize, anchor: Point, bbox: (Point, Point)) -> Result<Vec<Point>> {
    let (lo, hi) = bbox;
    for k in 1..=64usize {
        let mut pts = Vec::new();
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let idx = [i, j, l];
                    let mut x = [0.0; 3];
                    for a in 0..3 {
                        x[a] = lo[a] + (idx[a] as f64 + 0.5) * (hi[a] - lo[a]) / k as f64;
                    }
                    if omega_r_membership(domain, r, &x)? == Membership::Inner {
                        pts.push(x);
                    }
                }
            }
        }
        if pts.len() >= n {
            pts.sort_by(|a, b| dist(a, &anchor).total_cmp(&dist(b, &anchor)).then(lex_cmp(a, b)));
            let count = pts.len();
            return Ok((0..n).map(|s| pts[s * count / n]).collect());
        }
    }
    Ok(Vec::new())
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn lex_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupeTolerances {
    pub energy_rel: f64,
    pub l2_rel: f64,
}

impl Default for DedupeTolerances {
    fn default() -> Self {
        DedupeTolerances {
            energy_rel: 1e-4,
            l2_rel: 5e-2,
        }
    }
}

impl DedupeTolerances {
    /// Symmetric duplicate test.
    pub fn same(&self, a: &GroundState, b: &GroundState) -> bool {
        let scale_m = a.m.abs().max(b.m.abs());
        if (a.m - b.m).abs() > self.energy_rel * scale_m {
            return false;
        }
        let scale_u = a.u.l2_norm().max(b.u.l2_norm());
        (&a.u - &b.u).l2_norm() <= self.l2_rel * scale_u
    }
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub state: GroundState,
    pub barycenter: Point,
    pub membership: Membership,
    /// `m <= m_{p,r}`
    pub sublevel: bool,
    /// Index of the start that produced this entry; `None` for the
    /// ground-state run.
    pub start: Option<usize>,
}

/// Result of one start in a multi-start search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub center: Point,
    pub energy: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SolutionCatalog {
    /// Sorted by energy, then barycenter lexicographically.
    pub entries: Vec<CatalogEntry>,
    pub tolerances: DedupeTolerances,
    pub params: ProblemParams,
    pub r: f64,
    /// Lowest level found on this grid: the plain ground-state run or any
    /// lower catalog entry.
    pub m_p: f64,
    /// Ground-state level of `B_r` at the same spacing.
    pub m_pr: f64,
    pub category: Option<usize>,
    pub runs: Vec<RunSummary>,
    pub notes: Vec<String>,
}

impl SolutionCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| !r.converged).count()
    }

    /// `cat(Ω̄) + 1`, when the category is known.
    pub fn predicted_count(&self) -> Option<usize> {
        self.category.map(|c| c + 1)
    }

    pub fn summary(&self) -> String {
        match self.predicted_count() {
            Some(n) => format!("found {} distinct solutions vs. cat+1 = {}", self.len(), n),
            None => format!("found {} distinct solutions (category not tracked)", self.len()),
        }
    }
}

/// Greedy deduplication in (energy, barycenter) order; the first member of
/// each duplicate class is kept.
pub fn dedupe(mut states: Vec<CatalogEntry>, tol: &DedupeTolerances) -> Vec<CatalogEntry> {
    sort_entries(&mut states);
    let mut kept: Vec<CatalogEntry> = Vec::new();
    for s in states {
        if !kept.iter().any(|k| tol.same(&k.state, &s.state)) {
            kept.push(s);
        }
    }
    kept
}

fn sort_entries(entries: &mut [CatalogEntry]) {
    entries.sort_by(|a, b| a.state.m.total_cmp(&b.state.m).then(lex_cmp(&a.barycenter, &b.barycenter)));
}

/// Nehari-residual ceiling for catalog entries.
pub const CATALOG_NEHARI_TOL: f64 = 1e-10;

/// Transplants the ball ground state to `n_centers` node-aligned points of
/// `Ω_r⁻`, descends from each, and catalogs the distinct converged solutions
/// together with the plain ground-state run.
pub fn multistart_search(
    grid: &Arc<Grid>,
    params: &ProblemParams,
    r: f64,
    n_centers: usize,
    opts: &SolveOptions,
    cache: &ProfileCache,
) -> Result<SolutionCatalog> {
    params.validate()?;
    let domain = grid.domain().clone();
    let centers = snap_to_nodes(grid, r, &sample_centers(&domain, r, n_centers)?)?;
    let profile = cache.get(r, params, grid.spacing(), opts)?;
    let ground = find_ground_state(grid, params, opts);

    let outcomes: Vec<Result<GroundState>> = centers
        .par_iter()
        .map(|y| {
            let u0 = transplant_bump(grid, y, r, params, cache, opts)?;
            minimize_on_nehari(&u0, params, opts)
        })
        .collect();

    let mut runs = Vec::with_capacity(centers.len());
    let mut candidates = Vec::new();
    let accept = |gs: &GroundState| gs.converged && gs.nehari_residual <= CATALOG_NEHARI_TOL;
    let m_p;
    match ground {
        Ok(gs) => {
            m_p = gs.m;
            if accept(&gs) {
                candidates.push((gs, None));
            }
        }
        Err(SpsError::NotConverged { best }) => m_p = best.m,
        Err(e) => return Err(e),
    }
    for (k, (y, out)) in centers.iter().zip(outcomes).enumerate() {
        match out {
            Ok(gs) => {
                let ok = accept(&gs);
                runs.push(RunSummary {
                    center: *y,
                    energy: Some(gs.m),
                    converged: ok,
                    error: None,
                });
                if ok {
                    candidates.push((gs, Some(k)));
                }
            }
            Err(e) => runs.push(RunSummary {
                center: *y,
                energy: None,
                converged: false,
                error: Some(e.code().to_string()),
            }),
        }
    }

    let mut entries = Vec::with_capacity(candidates.len());
    for (state, start) in candidates {
        let barycenter = barycenter(&state.u)?;
        entries.push(CatalogEntry {
            membership: omega_r_membership(&domain, r, &barycenter)?,
            sublevel: state.m <= profile.energy,
            barycenter,
            state,
            start,
        });
    }
    let tolerances = DedupeTolerances::default();
    let entries = dedupe(entries, &tolerances);
    let m_p = entries.first().map_or(m_p, |e| e.state.m.min(m_p));
    let mut notes = orbit_notes(&entries, &domain, &tolerances, grid.spacing());
    if !profile.is_radial() {
        notes.push(format!(
            "ball ground state on B_r is not radial to {RADIALITY_TOLERANCE:e} (defect {:.3e})",
            profile.radial_defect
        ));
    }
    Ok(SolutionCatalog {
        entries,
        tolerances,
        params: *params,
        r,
        m_p,
        m_pr: profile.energy,
        category: domain.category(),
        runs,
        notes,
    })
}

/// Flags pairs of entries with equal energy whose barycenters sit at the same
/// distance from the symmetry center: candidates for one rotation orbit.
fn orbit_notes(entries: &[CatalogEntry], domain: &DomainSpec, tol: &DedupeTolerances, h: f64) -> Vec<String> {
    if !matches!(domain, DomainSpec::Ball { .. } | DomainSpec::Shell { .. }) {
        return Vec::new();
    }
    let origin = [0.0; 3];
    let mut notes = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            let equal_energy = (a.state.m - b.state.m).abs() <= tol.energy_rel * a.state.m.abs().max(b.state.m.abs());
            let equal_radius = (dist(&a.barycenter, &origin) - dist(&b.barycenter, &origin)).abs() <= 2.0 * h;
            if equal_energy && equal_radius {
                notes.push(format!(
                    "entries {i} and {j}: equal energy, barycenters at equal radius (likely one rotation orbit)"
                ));
            }
        }
    }
    notes
}
