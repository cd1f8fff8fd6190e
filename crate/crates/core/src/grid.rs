//! Evaluation grid on [0,1] and trapezoid quadrature.
//!
//! Every curve in this crate lives on a shared `TimeGrid`. Quadrature weights
//! follow the composite trapezoid rule, so integrals of grid functions are
//! plain weighted sums and the quadrature matrix is diagonal.

use crate::{Error, Result};
use std::sync::Arc;

/// Strictly increasing grid `0 = t_1 < … < t_m = 1` with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// Uniform grid with `m >= 2` points, endpoints exactly 0 and 1.
    pub fn uniform(m: usize) -> Arc<Self> {
        assert!(m >= 2, "grid needs at least two points");
        let h = (m - 1) as f64;
        let points: Vec<f64> = (0..m).map(|l| l as f64 / h).collect();
        Arc::new(Self::from_sorted(points))
    }

    /// Builds a grid from arbitrary strictly increasing points spanning [0,1].
    pub fn from_points(points: Vec<f64>) -> Result<Arc<Self>> {
        if points.len() < 2 {
            return Err(Error::Input("grid needs at least two points".into()));
        }
        if points[0] != 0.0 || *points.last().unwrap() != 1.0 {
            return Err(Error::Input("grid endpoints must be exactly 0 and 1".into()));
        }
        for l in 1..points.len() {
            if points[l] <= points[l - 1] {
                return Err(Error::Input(format!(
                    "grid points must be strictly increasing (index {l})"
                )));
            }
        }
        Ok(Arc::new(Self::from_sorted(points)))
    }

    fn from_sorted(points: Vec<f64>) -> Self {
        let m = points.len();
        let mut weights = vec![0.0; m];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[m - 1] = (points[m - 1] - points[m - 2]) / 2.0;
        for l in 1..m - 1 {
            weights[l] = (points[l + 1] - points[l - 1]) / 2.0;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index range `(first, last)` of grid points inside `[lo, hi]`,
    /// inclusive, with a small tolerance so `lo = 0.1` catches the grid
    /// point that rounds to 0.1.
    pub fn index_range(&self, lo: f64, hi: f64) -> (usize, usize) {
        let eps = 1e-12;
        let first = self.points.iter().position(|&t| t >= lo - eps).unwrap_or(0);
        let last = self
            .points
            .iter()
            .rposition(|&t| t <= hi + eps)
            .unwrap_or(self.points.len() - 1);
        (first, last)
    }

    /// Largest index `l` with `points[l] <= t` (0 if `t` precedes the grid).
    pub fn bracket(&self, t: f64) -> usize {
        match self
            .points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
        {
            Ok(l) => l,
            Err(0) => 0,
            Err(ins) => ins - 1,
        }
    }
}

/// Grids compare equal when shared or when their points coincide.
pub fn same_grid(a: &Arc<TimeGrid>, b: &Arc<TimeGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// Trapezoid approximation of `∫ g·h dt` for grid functions.
pub fn trapezoid_inner_product(g: &[f64], h: &[f64], grid: &TimeGrid) -> Result<f64> {
    if g.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: g.len() });
    }
    if h.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: h.len() });
    }
    Ok(grid
        .weights
        .iter()
        .zip(g.iter().zip(h.iter()))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}
