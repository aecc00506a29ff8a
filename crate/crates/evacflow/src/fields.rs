//! Cell-centered field storage.
//!
//! Fields hold one value per INSIDE cell, ordered by the grid's inside
//! ordinal (row-major by `(j, i)`). All lookups by cell coordinates go
//! through the `Grid` that assigned the ordinals.

use crate::geometry::Grid;

/// Scalar values on the INSIDE cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    data: Vec<f64>,
}

impl ScalarField {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            data: vec![value; grid.inside_count()],
        }
    }

    /// Wraps a vector already ordered by inside ordinal.
    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.inside_count());
        Self { data }
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, ord: usize) -> f64 {
        self.data[ord]
    }

    /// Value at cell `(i, j)`; panics if the cell is not INSIDE.
    pub fn at(&self, grid: &Grid, i: usize, j: usize) -> f64 {
        self.data[grid.ordinal(i, j).expect("cell is not INSIDE")]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cell-centered 2-vectors on the INSIDE cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    data: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn constant(grid: &Grid, value: [f64; 2]) -> Self {
        Self {
            data: vec![value; grid.inside_count()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<[f64; 2]>) -> Self {
        assert_eq!(data.len(), grid.inside_count());
        Self { data }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.data
    }

    pub fn get(&self, ord: usize) -> [f64; 2] {
        self.data[ord]
    }

    pub fn at(&self, grid: &Grid, i: usize, j: usize) -> [f64; 2] {
        self.data[grid.ordinal(i, j).expect("cell is not INSIDE")]
    }

    /// Largest Euclidean norm over all cells.
    pub fn max_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt())
            .fold(0.0, f64::max)
    }
}
