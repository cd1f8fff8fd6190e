//! Global Fréchet regression fit in quantile space.
//!
//! The conditional fit at `x` is the weighted mean of the observed quantile
//! curves under the empirical weights, projected to the nondecreasing cone
//! when the raw mean violates monotonicity. Because the weights are affine
//! in `x`, fitting all observations at once reduces to one mean curve plus
//! `p` slope curves; `fit_all` uses that identity and per-x calls use the
//! literal weighted mean. The two routes agree to rounding and a unit test
//! pins that.

use crate::curve::{wasserstein2_squared, DensityCurve, QuantileCurve, QuantileDensityCurve};
use crate::dataset::Dataset;
use crate::design::{summarize, DesignSummary, Partition};
use crate::isotonic::monotone_projection;
use crate::{curve, Error, Result};
use nalgebra::{DMatrix, DVector};

/// Tolerance on the mean of a weight vector, which is 1 by construction for
/// empirical weights.
const WEIGHT_MEAN_TOL: f64 = 1e-6;

fn check_weights(data: &Dataset, weights: &[f64]) -> Result<()> {
    if weights.len() != data.n() {
        return Err(Error::DimensionMismatch { expected: data.n(), got: weights.len() });
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    if (mean - 1.0).abs() > WEIGHT_MEAN_TOL {
        return Err(Error::Input(format!("fit weights must average to 1, got {mean}")));
    }
    Ok(())
}

/// Weighted-mean quantile fit; returns the curve and whether the monotone
/// projection had to alter the raw mean.
pub fn fit_quantile(data: &Dataset, weights: &[f64]) -> Result<(QuantileCurve, bool)> {
    check_weights(data, weights)?;
    let m = data.grid().len();
    let n = data.n() as f64;
    let mut mean = vec![0.0; m];
    for (i, q) in data.quantiles().iter().enumerate() {
        let w = weights[i] / n;
        for (acc, &v) in mean.iter_mut().zip(q.values()) {
            *acc += w * v;
        }
    }
    finish_quantile(data, mean)
}

fn finish_quantile(data: &Dataset, mean: Vec<f64>) -> Result<(QuantileCurve, bool)> {
    let grid = data.grid().clone();
    if is_nondecreasing(&mean) {
        Ok((QuantileCurve::new(grid, mean)?, false))
    } else {
        let projected = monotone_projection(&mean, grid.weights(), None)?;
        Ok((QuantileCurve::new(grid, projected)?, true))
    }
}

fn is_nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

/// Weighted-mean density fit: support start from the weighted mean of
/// `Q_i(0)`, quantile density from the weighted mean of the `q_i` floored
/// pointwise at `epsilon`, density values as reciprocals.
///
/// The floor is the exact solution of the constrained least-squares step:
/// with diagonal trapezoid weighting the bound constraints decouple, so the
/// constrained minimizer is the pointwise clamp and the support start stays
/// unconstrained.
pub fn fit_density(
    data: &Dataset,
    weights: &[f64],
    epsilon: f64,
) -> Result<(DensityCurve, QuantileDensityCurve)> {
    check_weights(data, weights)?;
    if !(epsilon > 0.0) {
        return Err(Error::Input("density floor epsilon must be positive".into()));
    }
    let qdens = data
        .quantile_densities()
        .ok_or_else(|| Error::Input("density fit needs quantile densities on the dataset".into()))?;
    let m = data.grid().len();
    let n = data.n() as f64;

    let mut q0 = 0.0;
    let mut qhat = vec![0.0; m];
    let has_dq = data.has_dq();
    let mut dqhat = if has_dq { Some(vec![0.0; m]) } else { None };
    for i in 0..data.n() {
        let w = weights[i] / n;
        q0 += w * data.quantile(i).values()[0];
        for (acc, &v) in qhat.iter_mut().zip(qdens[i].q_values()) {
            *acc += w * v;
        }
        if let Some(acc) = dqhat.as_mut() {
            for (a, &v) in acc.iter_mut().zip(qdens[i].dq_values().unwrap()) {
                *a += w * v;
            }
        }
    }
    for v in qhat.iter_mut() {
        if *v < epsilon {
            *v = epsilon;
        }
    }
    let qd = QuantileDensityCurve::new(data.grid().clone(), qhat, dqhat)?;
    let density = curve::density_from_quantile_density(q0, &qd, epsilon * 0.5)?;
    Ok((density, qd))
}

/// Which weight family a fit used: the full model or the submodel over the
/// leading `q` predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpan {
    Full,
    Submodel { q: usize },
}

/// A fitted regression: per-observation conditional fits, the marginal fit,
/// and the design summary shared by the inference layer.
#[derive(Debug, Clone)]
pub struct FitResult {
    summary: DesignSummary,
    span: ModelSpan,
    fitted: Vec<QuantileCurve>,
    marginal: QuantileCurve,
    projection_active: Vec<bool>,
    marginal_projected: bool,
}

impl FitResult {
    /// Fits the full model at every observed predictor.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let summary = summarize(data)?;
        Self::fit_with(data, summary, ModelSpan::Full)
    }

    /// Fits the submodel that uses only the leading `q` predictor columns
    /// (the full design summary is still computed for downstream use).
    pub fn fit_submodel(data: &Dataset, q: usize) -> Result<Self> {
        let summary = summarize(data)?;
        if q == data.p() {
            return Self::fit_with(data, summary, ModelSpan::Full);
        }
        summary.partition(q)?; // validates 0 < q < p
        Self::fit_with(data, summary, ModelSpan::Submodel { q })
    }

    fn fit_with(data: &Dataset, summary: DesignSummary, span: ModelSpan) -> Result<Self> {
        let n = data.n();
        let m = data.grid().len();
        let cols: Vec<usize> = match span {
            ModelSpan::Full => (0..data.p()).collect(),
            ModelSpan::Submodel { q } => (0..q).collect(),
        };
        let x = data.predictors();

        // mean curve and per-predictor slope curves
        let mut mean = vec![0.0; m];
        for q in data.quantiles() {
            for (acc, &v) in mean.iter_mut().zip(q.values()) {
                *acc += v / n as f64;
            }
        }
        let k = cols.len();
        let mut g = DMatrix::<f64>::zeros(k, m);
        for (i, qc) in data.quantiles().iter().enumerate() {
            for (jj, &j) in cols.iter().enumerate() {
                let xc = x[(i, j)] - summary.x_bar()[j];
                let row = xc / n as f64;
                for (l, &v) in qc.values().iter().enumerate() {
                    g[(jj, l)] += row * v;
                }
            }
        }
        let beta = match span {
            ModelSpan::Full => summary.sigma_inv() * &g,
            ModelSpan::Submodel { q } => {
                let syy = summary.sigma().view((0, 0), (q, q)).into_owned();
                let syy_inv = syy
                    .try_inverse()
                    .ok_or_else(|| Error::Design("submodel covariance not invertible".into()))?;
                syy_inv * &g
            }
        };

        let mut fitted = Vec::with_capacity(n);
        let mut projection_active = Vec::with_capacity(n);
        for i in 0..n {
            let mut values = mean.clone();
            for (jj, &j) in cols.iter().enumerate() {
                let xc = x[(i, j)] - summary.x_bar()[j];
                for (l, v) in values.iter_mut().enumerate() {
                    *v += xc * beta[(jj, l)];
                }
            }
            let (curve, projected) = finish_quantile(data, values)?;
            fitted.push(curve);
            projection_active.push(projected);
        }
        let (marginal, marginal_projected) = finish_quantile(data, mean)?;
        Ok(Self { summary, span, fitted, marginal, projection_active, marginal_projected })
    }

    pub fn summary(&self) -> &DesignSummary {
        &self.summary
    }

    pub fn span(&self) -> ModelSpan {
        self.span
    }

    /// Fitted conditional quantile curve for observation `i`.
    pub fn fitted(&self, i: usize) -> &QuantileCurve {
        &self.fitted[i]
    }

    pub fn fitted_curves(&self) -> &[QuantileCurve] {
        &self.fitted
    }

    /// The marginal fit Q̂⊕* (fit at X̄, i.e. the unweighted mean curve).
    pub fn marginal(&self) -> &QuantileCurve {
        &self.marginal
    }

    pub fn projection_active(&self, i: usize) -> bool {
        self.projection_active[i]
    }

    pub fn any_projection_active(&self) -> bool {
        self.marginal_projected || self.projection_active.iter().any(|&f| f)
    }

    /// Conditional fit at an arbitrary predictor vector, via the literal
    /// weighted mean.
    pub fn predict(&self, data: &Dataset, at: &DVector<f64>) -> Result<(QuantileCurve, bool)> {
        let weights = self.weights_at(data, at)?;
        fit_quantile(data, &weights)
    }

    /// The weight vector this fit's span assigns to a query point.
    pub fn weights_at(&self, data: &Dataset, at: &DVector<f64>) -> Result<Vec<f64>> {
        match self.span {
            ModelSpan::Full => self.summary.empirical_weights(data.predictors(), at),
            ModelSpan::Submodel { q } => {
                let part = self.summary.partition(q)?;
                let at_y = at.rows(0, q.min(at.len())).into_owned();
                part.submodel_weights(data.predictors(), &at_y)
            }
        }
    }

    /// Partition accessor for partial-test plumbing.
    pub fn partition(&self, q: usize) -> Result<Partition> {
        self.summary.partition(q)
    }
}

/// Fraction of Wasserstein variability explained by the fit. `None` when all
/// responses are identical so the total variation vanishes.
pub fn wasserstein_r_squared(data: &Dataset, fit: &FitResult) -> Result<Option<f64>> {
    let mut resid = 0.0;
    let mut total = 0.0;
    for (i, q) in data.quantiles().iter().enumerate() {
        resid += wasserstein2_squared(q, fit.fitted(i))?;
        total += wasserstein2_squared(q, fit.marginal())?;
    }
    if total <= 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - resid / total))
}
