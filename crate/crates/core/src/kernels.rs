//! Residual covariance kernels and their operator spectra.
//!
//! Empirical kernels here are sums of outer products of n residual curves,
//! so instead of materializing m×m matrices we keep the factor curves. The
//! integral operator's nonzero eigenvalues then coincide with those of the
//! n×n Gram matrix of the factors under the trapezoid inner product (the
//! usual AᵀA versus AAᵀ exchange), which is both exact and much cheaper on
//! fine grids. Dense kernels (used by analytic oracles) go through the
//! weighted discretization W^{1/2} M W^{1/2} directly.

use crate::curve::QuantileCurve;
use crate::dataset::Dataset;
use crate::fit::FitResult;
use crate::grid::TimeGrid;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Eigenvalues below `REL_FLOOR` times the leading one are dropped.
const REL_FLOOR: f64 = 1e-12;

/// Nonincreasing, nonnegative eigenvalues of a covariance operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
}

impl EigenSpectrum {
    /// Sorts descending, clips negatives to zero, drops values below the
    /// relative floor.
    pub fn from_raw(mut raw: Vec<f64>) -> Self {
        raw.retain(|v| v.is_finite());
        raw.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let lead = raw.first().copied().unwrap_or(0.0).max(0.0);
        let floor = lead * REL_FLOOR;
        let values = raw
            .into_iter()
            .take_while(|&v| v > floor && v > 0.0)
            .collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of retained positive eigenvalues.
    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for l in 0..w.len() {
        s += w[l] * a[l] * b[l];
    }
    s
}

/// Gram matrix `scale · <c_i, c_j>_w` of factor curves.
fn gram(curves: &[Vec<f64>], scale: f64, weights: &[f64]) -> DMatrix<f64> {
    let n = curves.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = scale * weighted_dot(&curves[i], &curves[j], weights);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn spectrum_of_gram(g: DMatrix<f64>) -> EigenSpectrum {
    EigenSpectrum::from_raw(g.symmetric_eigenvalues().iter().copied().collect())
}

enum KernelForm {
    /// `C(s,t) = scale · Σ_i c_i(s) c_i(t)`
    Factored { curves: Vec<Vec<f64>>, scale: f64 },
    Dense(DMatrix<f64>),
}

/// The residual covariance kernel Ĉ_Q(s,t) = n⁻¹ Σ (Qᵢ(s)-Q̂ᵢ(s))(Qᵢ(t)-Q̂ᵢ(t)),
/// or any symmetric kernel supplied as a dense matrix.
pub struct ResidualKernel {
    grid: Arc<TimeGrid>,
    form: KernelForm,
}

impl ResidualKernel {
    /// Builds Ĉ_Q from the fit's residual curves.
    pub fn from_fit(data: &Dataset, fit: &FitResult) -> Self {
        let curves = residual_curves(data.quantiles(), fit.fitted_curves());
        Self {
            grid: data.grid().clone(),
            form: KernelForm::Factored { curves, scale: 1.0 / data.n() as f64 },
        }
    }

    /// Kernel in factored form `scale · Σ c_i(s) c_i(t)`; used by tests to
    /// assemble synthetic kernels.
    pub fn from_factors(grid: Arc<TimeGrid>, curves: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        for c in &curves {
            if c.len() != grid.len() {
                return Err(Error::DimensionMismatch { expected: grid.len(), got: c.len() });
            }
        }
        Ok(Self { grid, form: KernelForm::Factored { curves, scale } })
    }

    /// Wraps a dense symmetric kernel matrix sampled on the grid.
    pub fn from_matrix(grid: Arc<TimeGrid>, matrix: DMatrix<f64>) -> Result<Self> {
        let m = grid.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(Error::DimensionMismatch { expected: m, got: matrix.nrows() });
        }
        for i in 0..m {
            for j in i..m {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * matrix[(i, i)].abs().max(1.0) {
                    return Err(Error::Input(format!("kernel matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { grid, form: KernelForm::Dense(matrix) })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Kernel value at a pair of grid indices.
    pub fn value(&self, ls: usize, lt: usize) -> f64 {
        match &self.form {
            KernelForm::Factored { curves, scale } => {
                scale * curves.iter().map(|c| c[ls] * c[lt]).sum::<f64>()
            }
            KernelForm::Dense(m) => m[(ls, lt)],
        }
    }

    /// Materializes the m×m kernel matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.form {
            KernelForm::Factored { curves, scale } => {
                let m = self.grid.len();
                let mut out = DMatrix::zeros(m, m);
                for c in curves {
                    for i in 0..m {
                        for j in i..m {
                            out[(i, j)] += scale * c[i] * c[j];
                        }
                    }
                }
                for i in 0..m {
                    for j in 0..i {
                        out[(i, j)] = out[(j, i)];
                    }
                }
                out
            }
            KernelForm::Dense(m) => m.clone(),
        }
    }

    /// Eigenvalues of the associated integral operator on L²[0,1].
    ///
    /// Factored kernels go through whichever side of the AᵀA/AAᵀ exchange
    /// is smaller: the n×n Gram for n ≤ m, the weighted m×m discretization
    /// otherwise.
    pub fn eigenvalues(&self) -> EigenSpectrum {
        match &self.form {
            KernelForm::Factored { curves, scale } if curves.len() <= self.grid.len() => {
                spectrum_of_gram(gram(curves, *scale, self.grid.weights()))
            }
            KernelForm::Factored { curves, scale } => {
                let w = self.grid.weights();
                let m = self.grid.len();
                let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
                let mut b = DMatrix::zeros(m, m);
                for c in curves {
                    for i in 0..m {
                        let ci = c[i] * sqrt_w[i];
                        for j in i..m {
                            b[(i, j)] += scale * ci * c[j] * sqrt_w[j];
                        }
                    }
                }
                for i in 0..m {
                    for j in 0..i {
                        b[(i, j)] = b[(j, i)];
                    }
                }
                spectrum_of_gram(b)
            }
            KernelForm::Dense(m) => {
                let w = self.grid.weights();
                let mm = self.grid.len();
                let mut b = DMatrix::zeros(mm, mm);
                for i in 0..mm {
                    for j in 0..mm {
                        b[(i, j)] = (w[i] * w[j]).sqrt() * m[(i, j)];
                    }
                }
                spectrum_of_gram(b)
            }
        }
    }

    /// `∫ C(t,t) dt`, the operator trace (Σ λ_j).
    pub fn trace_integral(&self) -> f64 {
        let w = self.grid.weights();
        match &self.form {
            KernelForm::Factored { curves, scale } => {
                scale * curves.iter().map(|c| weighted_dot(c, c, w)).sum::<f64>()
            }
            KernelForm::Dense(m) => (0..self.grid.len()).map(|l| w[l] * m[(l, l)]).sum(),
        }
    }

    /// `∫∫ C(s,t)² ds dt`, the squared Hilbert–Schmidt norm (Σ λ_j²).
    pub fn hs_norm_squared(&self) -> f64 {
        let w = self.grid.weights();
        match &self.form {
            KernelForm::Factored { curves, scale } => {
                let n = curves.len();
                let mut total = 0.0;
                for i in 0..n {
                    for j in i..n {
                        let d = weighted_dot(&curves[i], &curves[j], w);
                        total += if i == j { d * d } else { 2.0 * d * d };
                    }
                }
                scale * scale * total
            }
            KernelForm::Dense(m) => {
                let mm = self.grid.len();
                let mut total = 0.0;
                for i in 0..mm {
                    for j in 0..mm {
                        total += w[i] * w[j] * m[(i, j)] * m[(i, j)];
                    }
                }
                total
            }
        }
    }
}

/// Builds Ĉ_Q from a fit; residuals are observation minus fitted curve.
pub fn residual_kernel(data: &Dataset, fit: &FitResult) -> ResidualKernel {
    ResidualKernel::from_fit(data, fit)
}

pub(crate) fn residual_curves(
    observed: &[QuantileCurve],
    fitted: &[QuantileCurve],
) -> Vec<Vec<f64>> {
    observed
        .iter()
        .zip(fitted.iter())
        .map(|(q, f)| q.values().iter().zip(f.values()).map(|(a, b)| a - b).collect())
        .collect()
}

/// The partial-test covariance kernel Ĉ*_Q, a (p-q)×(p-q) matrix per (s,t),
/// kept in factored form `n⁻¹ Σ (v_i v_iᵀ) r_i(s) r_i(t)` with
/// `v_i = Σ̂_{Z|Y}^{-1/2} Ĵᵀ (X_i - X̄)`.
pub struct PartialKernelMatrix {
    grid: Arc<TimeGrid>,
    residuals: Vec<Vec<f64>>,
    vectors: Vec<Vec<f64>>,
    scale: f64,
}

impl PartialKernelMatrix {
    /// Residuals come from the full-model fit; `q` is the submodel size.
    pub fn from_fit(data: &Dataset, fit_full: &FitResult, q: usize) -> Result<Self> {
        let part = fit_full.summary().partition(q)?;
        let residuals = residual_curves(data.quantiles(), fit_full.fitted_curves());
        let x = data.predictors();
        let x_bar = fit_full.summary().x_bar();
        let transform = part.z_given_y_inv_sqrt() * part.j_t();
        let vectors: Vec<Vec<f64>> = (0..data.n())
            .map(|i| {
                let xc = x.row(i).transpose() - x_bar;
                (&transform * xc).iter().copied().collect()
            })
            .collect();
        Ok(Self { grid: data.grid().clone(), residuals, vectors, scale: 1.0 / data.n() as f64 })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn block_dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// The (p-q)×(p-q) block at a pair of grid indices.
    pub fn block_at(&self, ls: usize, lt: usize) -> DMatrix<f64> {
        let d = self.block_dim();
        let mut out = DMatrix::zeros(d, d);
        for (v, r) in self.vectors.iter().zip(self.residuals.iter()) {
            let f = self.scale * r[ls] * r[lt];
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] += f * v[a] * v[b];
                }
            }
        }
        out
    }

    /// Eigenvalues of the stacked block operator on the product space.
    ///
    /// The factor curves are the vector-valued `v_i r_i(t)`, whose Gram
    /// entries factor into `(v_iᵀ v_j) <r_i, r_j>_w`. For n larger than the
    /// stacked dimension (p-q)·m the weighted product-space matrix is
    /// assembled instead.
    pub fn eigenvalues(&self) -> EigenSpectrum {
        let n = self.residuals.len();
        let d = self.block_dim();
        let m = self.grid.len();
        let w = self.grid.weights();
        if n <= d * m {
            let mut g = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let vdot: f64 = self.vectors[i]
                        .iter()
                        .zip(self.vectors[j].iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    let v = self.scale
                        * vdot
                        * weighted_dot(&self.residuals[i], &self.residuals[j], w);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            return spectrum_of_gram(g);
        }
        let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let dim = d * m;
        let mut b = DMatrix::zeros(dim, dim);
        let mut h = vec![0.0; dim];
        for (v, r) in self.vectors.iter().zip(self.residuals.iter()) {
            for a in 0..d {
                for l in 0..m {
                    h[a * m + l] = v[a] * r[l] * sqrt_w[l];
                }
            }
            for i in 0..dim {
                let hi = self.scale * h[i];
                for j in i..dim {
                    b[(i, j)] += hi * h[j];
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                b[(i, j)] = b[(j, i)];
            }
        }
        spectrum_of_gram(b)
    }

    /// `∫ tr C*(t,t) dt = Σ τ_l`.
    pub fn trace_integral(&self) -> f64 {
        let w = self.grid.weights();
        self.scale
            * self
                .vectors
                .iter()
                .zip(self.residuals.iter())
                .map(|(v, r)| {
                    let nv: f64 = v.iter().map(|a| a * a).sum();
                    nv * weighted_dot(r, r, w)
                })
                .sum::<f64>()
    }

    /// `∫∫ ‖C*(s,t)‖_F² ds dt = Σ τ_l²`.
    pub fn hs_norm_squared(&self) -> f64 {
        let n = self.residuals.len();
        let w = self.grid.weights();
        let mut total = 0.0;
        for i in 0..n {
            for j in i..n {
                let vdot: f64 = self.vectors[i]
                    .iter()
                    .zip(self.vectors[j].iter())
                    .map(|(a, b)| a * b)
                    .sum();
                let d = vdot * weighted_dot(&self.residuals[i], &self.residuals[j], w);
                total += if i == j { d * d } else { 2.0 * d * d };
            }
        }
        self.scale * self.scale * total
    }
}

/// Builds Ĉ*_Q for the partial test of the trailing `p - q` predictors.
pub fn partial_residual_kernel(
    data: &Dataset,
    fit_full: &FitResult,
    q: usize,
) -> Result<PartialKernelMatrix> {
    PartialKernelMatrix::from_fit(data, fit_full, q)
}
