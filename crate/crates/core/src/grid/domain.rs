use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

/// Geometric domain. All lengths are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Ball { radius: f64 },
    Box { half_widths: [f64; 3] },
    Shell { inner: f64, outer: f64 },
    BallUnion { balls: Vec<BallSpec> },
}

/// Where a point sits relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    OnBoundary,
    Outside,
}

fn norm(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn dist(x: &Point, y: &Point) -> f64 {
    norm(&[x[0] - y[0], x[1] - y[1], x[2] - y[2]])
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl DomainSpec {
    pub fn ball(radius: f64) -> Self {
        DomainSpec::Ball { radius }
    }

    pub fn shell(inner: f64, outer: f64) -> Self {
        DomainSpec::Shell { inner, outer }
    }

    pub fn cube(half_width: f64) -> Self {
        DomainSpec::Box {
            half_widths: [half_width; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Ball { radius } if !positive_finite(*radius) => Err(
                SpsError::InvalidDomain(format!("ball radius must be > 0, got {radius}")),
            ),
            DomainSpec::Box { half_widths } if !half_widths.iter().all(|w| positive_finite(*w)) => {
                Err(SpsError::InvalidDomain(format!(
                    "box half-widths must be > 0, got {half_widths:?}"
                )))
            }
            DomainSpec::Shell { inner, outer }
                if !(positive_finite(*inner) && positive_finite(*outer) && inner < outer) =>
            {
                Err(SpsError::InvalidDomain(format!(
                    "shell requires 0 < inner < outer, got inner={inner}, outer={outer}"
                )))
            }
            DomainSpec::BallUnion { balls } => {
                if balls.is_empty() {
                    return Err(SpsError::InvalidDomain("ball union has no balls".into()));
                }
                for b in balls {
                    if !positive_finite(b.radius) || !b.center.iter().all(|c| c.is_finite()) {
                        return Err(SpsError::InvalidDomain(format!(
                            "ball union member {b:?} is invalid"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            DomainSpec::Ball { radius } => ([-radius; 3], [*radius; 3]),
            DomainSpec::Box { half_widths: w } => ([-w[0], -w[1], -w[2]], *w),
            DomainSpec::Shell { outer, .. } => ([-outer; 3], [*outer; 3]),
            DomainSpec::BallUnion { balls } => {
                let mut lo = [f64::INFINITY; 3];
                let mut hi = [f64::NEG_INFINITY; 3];
                for b in balls {
                    for a in 0..3 {
                        lo[a] = lo[a].min(b.center[a] - b.radius);
                        hi[a] = hi[a].max(b.center[a] + b.radius);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Signed distance to the boundary: negative inside, positive outside.
    ///
    /// Exact for ball, box and shell. For a ball union the value is exact
    /// outside and a lower bound on the depth inside (the deepest member ball).
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            DomainSpec::Ball { radius } => norm(x) - radius,
            DomainSpec::Box { half_widths: w } => {
                let q = [x[0].abs() - w[0], x[1].abs() - w[1], x[2].abs() - w[2]];
                let outside = norm(&[q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)]);
                let inside = q[0].max(q[1]).max(q[2]).min(0.0);
                outside + inside
            }
            DomainSpec::Shell { inner, outer } => {
                let r = norm(x);
                (inner - r).max(r - outer)
            }
            DomainSpec::BallUnion { balls } => balls
                .iter()
                .map(|b| dist(x, &b.center) - b.radius)
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn length_scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max)
    }

    /// Strict membership: the point lies in the open set.
    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) < -1e-12 * self.length_scale()
    }

    /// Three-way classification with a boundary band of half-width `band`.
    pub fn classify(&self, x: &Point, band: f64) -> Location {
        let sd = self.signed_distance(x);
        if sd.abs() <= band {
            Location::OnBoundary
        } else if sd < 0.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    /// Radius of the largest ball contained in the domain.
    pub fn inradius(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius } => *radius,
            DomainSpec::Box { half_widths: w } => w[0].min(w[1]).min(w[2]),
            DomainSpec::Shell { inner, outer } => 0.5 * (outer - inner),
            DomainSpec::BallUnion { balls } => balls.iter().map(|b| b.radius).fold(0.0, f64::max),
        }
    }

    /// Center of a largest inscribed ball.
    pub fn chebyshev_center(&self) -> Point {
        match self {
            DomainSpec::Ball { .. } | DomainSpec::Box { .. } => [0.0; 3],
            DomainSpec::Shell { inner, outer } => [0.5 * (inner + outer), 0.0, 0.0],
            DomainSpec::BallUnion { balls } => {
                let mut best = balls[0];
                for b in balls {
                    if b.radius > best.radius {
                        best = *b;
                    }
                }
                best.center
            }
        }
    }

    /// Ljusternik-Schnirelmann category of the closure, supplied as metadata.
    ///
    /// `None` for overlapping ball unions, whose topology is not tracked.
    pub fn category(&self) -> Option<usize> {
        match self {
            DomainSpec::Ball { .. } | DomainSpec::Box { .. } => Some(1),
            DomainSpec::Shell { .. } => Some(2),
            DomainSpec::BallUnion { balls } => {
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        if dist(&a.center, &b.center) <= a.radius + b.radius {
                            return None;
                        }
                    }
                }
                Some(balls.len())
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            DomainSpec::Ball { .. } => "ball",
            DomainSpec::Box { .. } => "box",
            DomainSpec::Shell { .. } => "shell",
            DomainSpec::BallUnion { .. } => "ball_union",
        }
    }
}
