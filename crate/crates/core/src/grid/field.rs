use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use super::{Grid, Point};
use crate::error::{Result, SpsError};

/// Values on the interior nodes of one grid. Exterior nodes are implicitly zero.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.interior_count()],
        }
    }

    /// Samples `f` at every interior node coordinate.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(&Point) -> f64) -> Self {
        let values = (0..grid.interior_count()).map(|i| f(&grid.coord(i))).collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// Checked constructor: length must match and all values must be finite.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(SpsError::InvalidParams(format!(
                "field has {} values but the grid has {} interior nodes",
                values.len(),
                grid.interior_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpsError::InvalidParams(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.interior_count());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.id() == other.grid.id() {
            Ok(())
        } else {
            Err(SpsError::GridMismatch {
                left: self.grid.id(),
                right: other.grid.id(),
            })
        }
    }

    fn assert_same_grid(&self, other: &ScalarField) {
        if let Err(e) = self.same_grid(other) {
            panic!("{e}");
        }
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `u⁺ = max(u, 0)`.
    pub fn positive_part(&self) -> ScalarField {
        self.map(|v| v.max(0.0))
    }

    /// Weighted inner product `h³ Σ u_i v_i`. Panics on a grid mismatch.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.assert_same_grid(other);
        self.grid.cell_volume() * super::dot(&self.values, &other.values)
    }

    /// Discrete L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest value (first occurrence).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// `self + a * x`. Panics on a grid mismatch.
    pub fn axpy(&self, a: f64, x: &ScalarField) -> ScalarField {
        self.assert_same_grid(x);
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&x.values).map(|(s, v)| s + a * v).collect(),
        }
    }

    /// Bit-level content hash, used to key cached Poisson solves.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.grid.id().hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scaled(self)
    }
}
