//! Uniform-grid discretization of H¹₀(Ω).
//!
//! Fields live on interior lattice nodes only; every stencil neighbor that is
//! not an interior node is a Dirichlet ghost with value zero. The discrete
//! operator is the 7-point `-Δ_h`, which is a symmetric M-matrix on the
//! interior nodes. Integrals use mass-lumped `h³ Σ` quadrature, so the discrete
//! Green identity and Nehari relations hold exactly in finite arithmetic (up
//! to round-off and the linear-solver tolerance).

mod domain;
mod field;
pub mod vtk;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use domain::{BallSpec, DomainSpec, Location, Point};
pub use field::ScalarField;

use crate::error::{Result, SpsError};

/// Sentinel for "neighbor is a Dirichlet ghost".
pub const GHOST: u32 = u32::MAX;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Immutable lattice with a Dirichlet mask.
#[derive(Debug)]
pub struct Grid {
    id: u64,
    domain: DomainSpec,
    h: f64,
    center: Point,
    dims: [usize; 3],
    lattice_index: Vec<u32>,
    nodes: Vec<[u32; 3]>,
    neighbors: Vec<[u32; 6]>,
}

impl Grid {
    /// Lattice spanning the domain's bounding box with `resolution` nodes along
    /// its longest axis; `h = extent / (resolution - 1)`.
    pub fn new(domain: DomainSpec, resolution: usize) -> Result<Arc<Grid>> {
        domain.validate()?;
        if resolution < 8 {
            return Err(SpsError::InvalidResolution(resolution));
        }
        let (lo, hi) = domain.bounding_box();
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let h = extent / (resolution - 1) as f64;
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let cells = ((hi[a] - lo[a]) / h - 1e-9).ceil().max(0.0) as usize;
            dims[a] = cells + 1;
        }
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        Self::from_lattice(domain, center, h, dims)
    }

    /// Lattice with prescribed spacing, symmetric about the bounding-box center
    /// and with an odd node count per axis (so the center is a node).
    pub fn with_spacing(domain: DomainSpec, h: f64) -> Result<Arc<Grid>> {
        domain.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(SpsError::InvalidDomain(format!("grid spacing must be > 0, got {h}")));
        }
        let (lo, hi) = domain.bounding_box();
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let half_cells = (0.5 * (hi[a] - lo[a]) / h - 1e-9).ceil().max(1.0) as usize;
            dims[a] = 2 * half_cells + 1;
        }
        let center = [
            0.5 * (lo[0] + hi[0]),
            0.5 * (lo[1] + hi[1]),
            0.5 * (lo[2] + hi[2]),
        ];
        Self::from_lattice(domain, center, h, dims)
    }

    fn from_lattice(domain: DomainSpec, center: Point, h: f64, dims: [usize; 3]) -> Result<Arc<Grid>> {
        let total = dims[0] * dims[1] * dims[2];
        let mut grid = Grid {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            domain,
            h,
            center,
            dims,
            lattice_index: vec![GHOST; total],
            nodes: Vec::new(),
            neighbors: Vec::new(),
        };
        // x fastest, matching the VTK point ordering.
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let x = grid.lattice_coord([i, j, k]);
                    if grid.domain.contains(&x) {
                        let lin = grid.linear([i, j, k]);
                        grid.lattice_index[lin] = grid.nodes.len() as u32;
                        grid.nodes.push([i as u32, j as u32, k as u32]);
                    }
                }
            }
        }
        if grid.nodes.is_empty() {
            return Err(SpsError::EmptyInterior);
        }
        grid.neighbors = grid
            .nodes
            .iter()
            .map(|n| {
                let mut nb = [GHOST; 6];
                for a in 0..3 {
                    for (s, delta) in [-1i64, 1].into_iter().enumerate() {
                        let c = n[a] as i64 + delta;
                        if c >= 0 && (c as usize) < dims[a] {
                            let mut idx = [n[0] as usize, n[1] as usize, n[2] as usize];
                            idx[a] = c as usize;
                            nb[2 * a + s] = grid.lattice_index[grid.linear(idx)];
                        }
                    }
                }
                nb
            })
            .collect();
        Ok(Arc::new(grid))
    }

    fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    /// Identity token; two fields combine only when their grid ids agree.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// `h³`, the lumped quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Number of nodes along the longest axis.
    pub fn resolution(&self) -> usize {
        self.dims.into_iter().max().unwrap_or(0)
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len()
    }

    /// Lattice origin (coordinates of node `(0,0,0)`).
    pub fn origin(&self) -> Point {
        self.lattice_coord([0, 0, 0])
    }

    pub fn lattice_coord(&self, idx: [usize; 3]) -> Point {
        let mut x = [0.0; 3];
        for a in 0..3 {
            let half = 0.5 * (self.dims[a] - 1) as f64;
            x[a] = self.center[a] + (idx[a] as f64 - half) * self.h;
        }
        x
    }

    /// Coordinates of interior node `i`.
    pub fn coord(&self, i: usize) -> Point {
        let n = self.nodes[i];
        self.lattice_coord([n[0] as usize, n[1] as usize, n[2] as usize])
    }

    pub fn lattice_position(&self, i: usize) -> [usize; 3] {
        let n = self.nodes[i];
        [n[0] as usize, n[1] as usize, n[2] as usize]
    }

    /// Interior index of a lattice node, if it is interior.
    pub fn interior_index(&self, idx: [usize; 3]) -> Option<usize> {
        if (0..3).any(|a| idx[a] >= self.dims[a]) {
            return None;
        }
        match self.lattice_index[self.linear(idx)] {
            GHOST => None,
            i => Some(i as usize),
        }
    }

    /// Stencil neighbors of interior node `i` in the order -x, +x, -y, +y, -z, +z.
    pub fn neighbors(&self, i: usize) -> &[u32; 6] {
        &self.neighbors[i]
    }

    /// Interior node nearest to `x` (ties broken by lowest index).
    pub fn nearest_node(&self, x: &Point) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.nodes.len() {
            let c = self.coord(i);
            let d = (c[0] - x[0]).powi(2) + (c[1] - x[1]).powi(2) + (c[2] - x[2]).powi(2);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// `out = -Δ_h u` on interior nodes, ghost neighbors contributing zero.
    ///
    /// Each output entry is an independent sum in fixed neighbor order, so the
    /// result is bitwise deterministic.
    pub fn neg_laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.nodes.len());
        assert_eq!(out.len(), self.nodes.len());
        let inv_h2 = 1.0 / (self.h * self.h);
        for (i, (o, nb)) in out.iter_mut().zip(&self.neighbors).enumerate() {
            let mut s = 0.0;
            for &j in nb {
                if j != GHOST {
                    s += u[j as usize];
                }
            }
            *o = (6.0 * u[i] - s) * inv_h2;
        }
    }

    /// Diagonal of `-Δ_h`.
    pub fn laplacian_diagonal(&self) -> f64 {
        6.0 / (self.h * self.h)
    }
}

/// `-Δ_h u` with homogeneous Dirichlet conditions.
pub fn apply_laplacian(u: &ScalarField) -> ScalarField {
    let grid = u.grid();
    let mut out = vec![0.0; grid.interior_count()];
    grid.neg_laplacian_into(u.values(), &mut out);
    ScalarField::from_raw(grid.clone(), out)
}

/// `h³ Σ |u_i|^q`.
pub fn integrate_power(u: &ScalarField, q: f64) -> f64 {
    assert!(q >= 1.0, "integrate_power requires q >= 1, got {q}");
    let w = u.grid().cell_volume();
    let s: f64 = if q == 2.0 {
        u.values().iter().map(|v| v * v).sum()
    } else {
        u.values().iter().map(|v| v.abs().powf(q)).sum()
    };
    w * s
}

/// Squared H¹₀ norm split into gradient and mass parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Norm {
    pub dirichlet: f64,
    pub mass: f64,
    pub total: f64,
}

pub fn h1_norm_sq(u: &ScalarField) -> H1Norm {
    let grid = u.grid();
    let mut lap = vec![0.0; grid.interior_count()];
    grid.neg_laplacian_into(u.values(), &mut lap);
    let w = grid.cell_volume();
    let dirichlet = w * dot(&lap, u.values());
    let mass = integrate_power(u, 2.0);
    H1Norm {
        dirichlet,
        mass,
        total: dirichlet + mass,
    }
}

/// Plain sequential dot product (fixed reduction order).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
