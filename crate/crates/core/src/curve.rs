//! Curve types: quantile functions, quantile densities and densities.
//!
//! The quantile grid is the canonical representation; cdf and density views
//! are derived from it. A `QuantileCurve` is validated nondecreasing on
//! construction — tiny float-noise violations are snapped, real ones are
//! rejected.

use crate::grid::{same_grid, trapezoid_inner_product, TimeGrid};
use crate::{Error, Result};
use std::sync::Arc;

/// Relative slack under which a monotonicity violation counts as float noise.
const SNAP_TOL: f64 = 1e-12;

/// A nondecreasing function on a [`TimeGrid`]; the quantile function of a
/// distribution with values in the units of the underlying measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurve {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl QuantileCurve {
    /// Validates `values` as nondecreasing. Violations below the snap
    /// tolerance are flattened; larger ones are rejected with the offending
    /// index.
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        let values = validate_nondecreasing(values, grid.len())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation of the curve at `t ∈ [0,1]`, clamped outside.
    pub fn eval(&self, t: f64) -> f64 {
        let pts = self.grid.points();
        if t <= pts[0] {
            return self.values[0];
        }
        if t >= pts[pts.len() - 1] {
            return self.values[pts.len() - 1];
        }
        let l = self.grid.bracket(t);
        let (t0, t1) = (pts[l], pts[l + 1]);
        let frac = (t - t0) / (t1 - t0);
        self.values[l] + frac * (self.values[l + 1] - self.values[l])
    }

    /// The cdf value `F(u)` of the distribution this curve represents.
    ///
    /// Piecewise-linear inversion; on flat segments the right endpoint of
    /// the t-interval is returned so that F is right-continuous. Values
    /// outside the curve's range clamp to 0 or 1.
    pub fn invert(&self, u: f64) -> f64 {
        let v = &self.values;
        let m = v.len();
        if u < v[0] {
            return 0.0;
        }
        if u >= v[m - 1] {
            return 1.0;
        }
        // last index with v[l] <= u
        let l = match v.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
            Ok(mut hit) => {
                while hit + 1 < m && v[hit + 1] == u {
                    hit += 1;
                }
                hit
            }
            Err(ins) => ins - 1,
        };
        let pts = self.grid.points();
        if v[l + 1] > v[l] && u > v[l] {
            pts[l] + (u - v[l]) / (v[l + 1] - v[l]) * (pts[l + 1] - pts[l])
        } else {
            pts[l]
        }
    }
}

fn validate_nondecreasing(mut values: Vec<f64>, expected_len: usize) -> Result<Vec<f64>> {
    if values.len() != expected_len {
        return Err(Error::DimensionMismatch { expected: expected_len, got: values.len() });
    }
    for l in 0..values.len() {
        if !values[l].is_finite() {
            return Err(Error::Input(format!("non-finite curve value at index {l}")));
        }
        if l > 0 && values[l] < values[l - 1] {
            let drop = values[l - 1] - values[l];
            if drop <= SNAP_TOL * values[l - 1].abs().max(1.0) {
                values[l] = values[l - 1];
            } else {
                return Err(Error::NonMonotone { index: l, violation: drop });
            }
        }
    }
    Ok(values)
}

/// Quantile density `q = Q'` on a grid, with optional derivative `q'`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileDensityCurve {
    grid: Arc<TimeGrid>,
    q_values: Vec<f64>,
    dq_values: Option<Vec<f64>>,
}

impl QuantileDensityCurve {
    pub fn new(grid: Arc<TimeGrid>, q_values: Vec<f64>, dq_values: Option<Vec<f64>>) -> Result<Self> {
        if q_values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: q_values.len() });
        }
        for (l, &q) in q_values.iter().enumerate() {
            if !q.is_finite() || (q <= 0.0 && l > 0 && l + 1 < grid.len()) {
                return Err(Error::Input(format!(
                    "quantile density must be positive on the interior (index {l}, value {q})"
                )));
            }
        }
        if let Some(dq) = &dq_values {
            if dq.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: dq.len() });
            }
        }
        Ok(Self { grid, q_values, dq_values })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }

    pub fn dq_values(&self) -> Option<&[f64]> {
        self.dq_values.as_deref()
    }
}

/// A density on its own support abscissae, with companion cdf values.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    support: Vec<f64>,
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl DensityCurve {
    /// Integral gate for construction on grids of 1001 points or finer;
    /// coarser grids get the gate scaled by the trapezoid rule's h² error
    /// growth (see [`DensityCurve::integral_tolerance`]).
    pub const INTEGRAL_TOL: f64 = 1e-4;

    /// Grid-aware integral gate: 1e-4 at m >= 1001, relaxed quadratically
    /// below that.
    pub fn integral_tolerance(m: usize) -> f64 {
        let scale = (1000.0 / (m.max(2) as f64 - 1.0)).max(1.0);
        Self::INTEGRAL_TOL * scale * scale
    }

    pub fn new(support: Vec<f64>, values: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        let tol = Self::integral_tolerance(support.len());
        Self::with_tolerance(support, values, cdf, tol)
    }

    pub fn with_tolerance(
        support: Vec<f64>,
        values: Vec<f64>,
        cdf: Vec<f64>,
        integral_tol: f64,
    ) -> Result<Self> {
        let m = support.len();
        if values.len() != m || cdf.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: values.len().min(cdf.len()) });
        }
        for l in 1..m {
            if support[l] <= support[l - 1] {
                return Err(Error::Input(format!("support abscissae must increase (index {l})")));
            }
            if cdf[l] < cdf[l - 1] - SNAP_TOL {
                return Err(Error::Input(format!("cdf must be nondecreasing (index {l})")));
            }
        }
        if cdf[0].abs() > 1e-8 || (cdf[m - 1] - 1.0).abs() > 1e-8 {
            return Err(Error::Input("cdf must run from 0 to 1".into()));
        }
        if values.iter().any(|&f| f < 0.0 || !f.is_finite()) {
            return Err(Error::Input("density values must be nonnegative".into()));
        }
        let total = trapezoid_integral(&support, &values);
        if (total - 1.0).abs() > integral_tol {
            return Err(Error::Input(format!("density integrates to {total}, not 1")));
        }
        Ok(Self { support, values, cdf })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Quantile read off the stored cdf by linear interpolation.
    pub fn quantile_at(&self, t: f64) -> f64 {
        let c = &self.cdf;
        let m = c.len();
        if t <= c[0] {
            return self.support[0];
        }
        if t >= c[m - 1] {
            return self.support[m - 1];
        }
        let l = match c.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(hit) => return self.support[hit],
            Err(ins) => ins - 1,
        };
        let frac = (t - c[l]) / (c[l + 1] - c[l]);
        self.support[l] + frac * (self.support[l + 1] - self.support[l])
    }
}

fn trapezoid_integral(x: &[f64], f: &[f64]) -> f64 {
    let mut total = 0.0;
    for l in 1..x.len() {
        total += 0.5 * (f[l] + f[l - 1]) * (x[l] - x[l - 1]);
    }
    total
}

/// Squared Wasserstein-2 distance: trapezoid approximation of `∫(Q1-Q2)²`.
pub fn wasserstein2_squared(q1: &QuantileCurve, q2: &QuantileCurve) -> Result<f64> {
    if !same_grid(q1.grid(), q2.grid()) {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = q1
        .values
        .iter()
        .zip(q2.values.iter())
        .map(|(a, b)| a - b)
        .collect();
    trapezoid_inner_product(&diff, &diff, q1.grid())
}

/// Wasserstein-2 distance between two distributions on the same grid.
pub fn wasserstein2_distance(q1: &QuantileCurve, q2: &QuantileCurve) -> Result<f64> {
    Ok(wasserstein2_squared(q1, q2)?.sqrt())
}

/// Wasserstein-∞ distance: the essential supremum of the optimal transport
/// displacement, which in quantile coordinates is the sup-norm of the
/// difference of the quantile curves.
pub fn wasserstein_inf_distance(q1: &QuantileCurve, q2: &QuantileCurve) -> Result<f64> {
    if !same_grid(q1.grid(), q2.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(q1
        .values
        .iter()
        .zip(q2.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Turns a quantile density and a support start into a density curve.
///
/// Abscissae accumulate by trapezoid integration of `q` from `q0`; density
/// values are the reciprocals of `q`; the cdf at abscissa `l` is the grid
/// point `t_l`. Fails if any `q` falls below `epsilon` — callers clamp or
/// project first.
pub fn density_from_quantile_density(
    q0: f64,
    q: &QuantileDensityCurve,
    epsilon: f64,
) -> Result<DensityCurve> {
    let qv = q.q_values();
    for (l, &qi) in qv.iter().enumerate() {
        if qi < epsilon {
            return Err(Error::BelowFloor { index: l, value: qi, floor: epsilon });
        }
    }
    let pts = q.grid().points();
    let m = pts.len();
    let mut support = Vec::with_capacity(m);
    support.push(q0);
    for l in 1..m {
        let step = 0.5 * (qv[l] + qv[l - 1]) * (pts[l] - pts[l - 1]);
        support.push(support[l - 1] + step);
    }
    let values: Vec<f64> = qv.iter().map(|&qi| 1.0 / qi).collect();
    DensityCurve::new(support, values, pts.to_vec())
}
