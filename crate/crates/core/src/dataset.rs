//! Regression dataset: predictor vectors paired with quantile-curve
//! responses, plus optional quantile-density information needed by density
//! fits and density bands.

use crate::curve::{QuantileCurve, QuantileDensityCurve};
use crate::grid::{same_grid, TimeGrid};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    quantiles: Vec<QuantileCurve>,
    qdens: Option<Vec<QuantileDensityCurve>>,
    grid: Arc<TimeGrid>,
    /// Declared by the caller when all responses share one fixed support;
    /// gates the partial residual bootstrap.
    pub fixed_support: bool,
}

impl Dataset {
    /// `x` is n×p (p may be 0 for an intercept-only design). Requires
    /// `n >= p + 2`, a shared grid across curves, and finite entries.
    pub fn new(
        x: DMatrix<f64>,
        quantiles: Vec<QuantileCurve>,
        qdens: Option<Vec<QuantileDensityCurve>>,
    ) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if quantiles.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: quantiles.len() });
        }
        if n < p + 2 {
            return Err(Error::Input(format!("need n >= p + 2 observations, have n={n}, p={p}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite predictor entry".into()));
        }
        let grid = quantiles
            .first()
            .ok_or_else(|| Error::Input("empty dataset".into()))?
            .grid()
            .clone();
        for q in &quantiles {
            if !same_grid(q.grid(), &grid) {
                return Err(Error::GridMismatch);
            }
        }
        if let Some(qd) = &qdens {
            if qd.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: qd.len() });
            }
            for q in qd {
                if !same_grid(q.grid(), &grid) {
                    return Err(Error::GridMismatch);
                }
            }
        }
        Ok(Self { x, quantiles, qdens, grid, fixed_support: false })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn quantile(&self, i: usize) -> &QuantileCurve {
        &self.quantiles[i]
    }

    pub fn quantiles(&self) -> &[QuantileCurve] {
        &self.quantiles
    }

    pub fn quantile_densities(&self) -> Option<&[QuantileDensityCurve]> {
        self.qdens.as_deref()
    }

    pub fn has_quantile_densities(&self) -> bool {
        self.qdens.is_some()
    }

    pub fn has_dq(&self) -> bool {
        self.qdens
            .as_ref()
            .is_some_and(|qd| qd.iter().all(|q| q.dq_values().is_some()))
    }

    /// Positivity floor for density fits: 1e-4 times the spread of all
    /// quantile-density values pooled across the sample.
    pub fn default_epsilon(&self) -> Result<f64> {
        let qd = self
            .qdens
            .as_ref()
            .ok_or_else(|| Error::Input("dataset carries no quantile densities".into()))?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for q in qd {
            for &v in q.q_values() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let range = (hi - lo).max(hi.abs());
        Ok(1e-4 * range)
    }

    /// Fills in `q` and `q'` by finite differences of each quantile curve.
    ///
    /// A numerical fallback for inputs that only carry quantile functions;
    /// returns how many curves were derived so callers can surface a
    /// diagnostic.
    pub fn derive_quantile_densities(&mut self) -> usize {
        if self.qdens.is_some() {
            return 0;
        }
        let derived: Vec<QuantileDensityCurve> = self
            .quantiles
            .iter()
            .map(|q| {
                let qv = finite_difference(q.values(), self.grid.points());
                let dqv = finite_difference(&qv, self.grid.points());
                // FD of a nondecreasing curve is nonnegative; nudge interior
                // zeros so the curve type's positivity gate passes.
                let qv = qv.iter().map(|&v| v.max(1e-300)).collect();
                QuantileDensityCurve::new(self.grid.clone(), qv, Some(dqv))
                    .expect("finite-difference quantile density is valid")
            })
            .collect();
        self.qdens = Some(derived);
        self.quantiles.len()
    }

    /// Reorders predictor columns; used to move tested columns to the back
    /// so a partial test can address them as the trailing block.
    pub fn permute_columns(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.p() {
            return Err(Error::DimensionMismatch { expected: self.p(), got: order.len() });
        }
        let mut seen = vec![false; self.p()];
        for &c in order {
            if c >= self.p() || seen[c] {
                return Err(Error::Input("column permutation is not a permutation".into()));
            }
            seen[c] = true;
        }
        let x = DMatrix::from_fn(self.n(), self.p(), |i, j| self.x[(i, order[j])]);
        Ok(Self {
            x,
            quantiles: self.quantiles.clone(),
            qdens: self.qdens.clone(),
            grid: self.grid.clone(),
            fixed_support: self.fixed_support,
        })
    }
}

/// Central differences with second-order one-sided stencils at the ends.
pub fn finite_difference(values: &[f64], points: &[f64]) -> Vec<f64> {
    let m = values.len();
    assert!(m >= 3, "finite differences need at least three points");
    let mut out = vec![0.0; m];
    for l in 1..m - 1 {
        out[l] = (values[l + 1] - values[l - 1]) / (points[l + 1] - points[l - 1]);
    }
    // one-sided second order assuming locally uniform spacing
    let h0 = points[1] - points[0];
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h0);
    let h1 = points[m - 1] - points[m - 2];
    out[m - 1] = (3.0 * values[m - 1] - 4.0 * values[m - 2] + values[m - 3]) / (2.0 * h1);
    out
}
