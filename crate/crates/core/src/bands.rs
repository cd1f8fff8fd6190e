//! Simultaneous confidence bands for the fitted conditional distribution.
//!
//! Two constructions: the Wasserstein-∞ band, a stochastic-ordering bracket
//! obtained from the quantile-domain Gaussian limit, and the density band on
//! a trimmed support. Both simulate the supremum of a standardized Gaussian
//! process whose covariance is an empirical factored kernel, so paths come
//! from the low-rank machinery in [`crate::gaussian`].


use crate::dataset::Dataset;
use crate::engines::empirical_quantile;
use crate::fit::{fit_density, FitResult};
use crate::gaussian::{pivoted_cholesky, standardized_sups, PIVOT_TOL};
use crate::grid::TimeGrid;
use crate::isotonic::{monotone_majorant, monotone_minorant};
use crate::kernels::residual_curves;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Variance points below this fraction of the maximum are excluded from the
/// standardized supremum (near-zero standardization at the boundary).
const VARIANCE_FLOOR: f64 = 1e-10;

/// The sandwich covariance D̂_Q(s,t) = Λ̂⁻¹ [n⁻¹ Σ x̃ᵢx̃ᵢᵀ rᵢ(s) rᵢ(t)] Λ̂⁻¹,
/// kept factored through κᵢ = Λ̂⁻¹ x̃ᵢ and the residual curves.
pub struct SandwichKernel {
    grid: Arc<TimeGrid>,
    kappa: Vec<Vec<f64>>,
    residuals: Vec<Vec<f64>>,
}

impl SandwichKernel {
    pub fn from_fit(data: &Dataset, fit: &FitResult) -> Self {
        let residuals = residual_curves(data.quantiles(), fit.fitted_curves());
        let lambda_inv = fit.summary().lambda_inv();
        let p = data.p();
        let kappa = (0..data.n())
            .map(|i| {
                let mut xt = DVector::zeros(p + 1);
                xt[0] = 1.0;
                for j in 0..p {
                    xt[j + 1] = data.predictors()[(i, j)];
                }
                (lambda_inv * xt).iter().copied().collect()
            })
            .collect();
        Self { grid: data.grid().clone(), kappa, residuals }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn block_dim(&self) -> usize {
        self.kappa.first().map_or(0, |k| k.len())
    }

    /// The (p+1)×(p+1) block at a pair of grid indices.
    pub fn block_at(&self, ls: usize, lt: usize) -> DMatrix<f64> {
        let d = self.block_dim();
        let n = self.n() as f64;
        let mut out = DMatrix::zeros(d, d);
        for (k, r) in self.kappa.iter().zip(self.residuals.iter()) {
            let f = r[ls] * r[lt] / n;
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] += f * k[a] * k[b];
                }
            }
        }
        out
    }

    /// Per-observation loadings `aᵢ = x̃ᵀ κᵢ` for a query point, so that
    /// `x̃ᵀ D̂_Q(s,t) x̃ = n⁻¹ Σ aᵢ² rᵢ(s) rᵢ(t)`.
    pub fn loadings(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut xt = vec![1.0];
        xt.extend(x.iter());
        self.kappa
            .iter()
            .map(|k| k.iter().zip(xt.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn residuals(&self) -> &[Vec<f64>] {
        &self.residuals
    }
}

/// Finite differences restricted to the index range `[lo, hi]`: central in
/// the interior, second-order one-sided at the trim boundaries.
fn fd_on_range(values: &[f64], points: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    let len = hi - lo + 1;
    assert!(len >= 3, "trimmed range too short to differentiate");
    let mut out = vec![0.0; len];
    for l in lo + 1..hi {
        out[l - lo] = (values[l + 1] - values[l - 1]) / (points[l + 1] - points[l - 1]);
    }
    let h0 = points[lo + 1] - points[lo];
    out[0] = (-3.0 * values[lo] + 4.0 * values[lo + 1] - values[lo + 2]) / (2.0 * h0);
    let h1 = points[hi] - points[hi - 1];
    out[len - 1] = (3.0 * values[hi] - 4.0 * values[hi - 1] + values[hi - 2]) / (2.0 * h1);
    out
}

/// The 2×2-block derivative kernel D̂ and its partials D̂^(l,m) on the
/// trimmed range [δ, 1-δ], factored like the sandwich kernel with the
/// residual derivatives obtained by finite differences per curve (which is
/// exactly finite differencing of the assembled kernel).
pub struct DerivKernelMatrix {
    grid: Arc<TimeGrid>,
    lo: usize,
    hi: usize,
    kappa: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    rd: Vec<Vec<f64>>,
}

/// Builds the derivative kernel; `delta` must lie in (0, 1/2).
pub fn deriv_kernel_matrix(sandwich: &SandwichKernel, delta: f64) -> Result<DerivKernelMatrix> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::Input(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let (lo, hi) = sandwich.grid.index_range(delta, 1.0 - delta);
    if hi.saturating_sub(lo) + 1 < 3 {
        return Err(Error::Input("trimmed grid too short for differentiation".into()));
    }
    let pts = sandwich.grid.points();
    let r: Vec<Vec<f64>> =
        sandwich.residuals.iter().map(|c| c[lo..=hi].to_vec()).collect();
    let rd: Vec<Vec<f64>> =
        sandwich.residuals.iter().map(|c| fd_on_range(c, pts, lo, hi)).collect();
    Ok(DerivKernelMatrix { grid: sandwich.grid.clone(), lo, hi, kappa: sandwich.kappa.clone(), r, rd })
}

impl DerivKernelMatrix {
    /// First and last grid indices of the trimmed range.
    pub fn range(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Block D̂^(ds,dt)(s,t) at trimmed-relative indices, derivative orders
    /// in {0, 1} per argument.
    pub fn block_at(&self, ds: usize, dt: usize, ls: usize, lt: usize) -> DMatrix<f64> {
        assert!(ds <= 1 && dt <= 1);
        let d = self.kappa.first().map_or(0, |k| k.len());
        let n = self.r.len() as f64;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..self.r.len() {
            let fs = if ds == 0 { self.r[i][ls] } else { self.rd[i][ls] };
            let ft = if dt == 0 { self.r[i][lt] } else { self.rd[i][lt] };
            let f = fs * ft / n;
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] += f * self.kappa[i][a] * self.kappa[i][b];
                }
            }
        }
        out
    }

    pub(crate) fn residual_derivatives(&self) -> &[Vec<f64>] {
        &self.rd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Winf,
    Density,
}

/// Parameters for a band construction. `reps` Gaussian paths calibrate the
/// sup quantile; the seed is mandatory.
#[derive(Debug, Clone, Copy)]
pub struct BandOptions {
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// Trim parameter δ; used by density bands always and by Wasserstein-∞
    /// bands in fixed-support mode.
    pub delta: f64,
    pub fixed_support: bool,
    /// Relative tolerance of the covariance square root.
    pub pivot_tol: f64,
}

impl BandOptions {
    pub fn new(alpha: f64, reps: usize, seed: u64) -> Self {
        Self { alpha, reps, seed, delta: 0.1, fixed_support: false, pivot_tol: PIVOT_TOL }
    }
}

/// A computed band: center curve, envelopes and the standardization curve on
/// the band's abscissae (t for Wasserstein-∞, support points u for density).
#[derive(Debug, Clone)]
pub struct BandResult {
    pub kind: BandKind,
    pub x: Vec<f64>,
    pub alpha: f64,
    pub delta: Option<f64>,
    /// Simulated sup quantile (m̂_α or l̂_α).
    pub critical: f64,
    pub n: usize,
    pub abscissa: Vec<f64>,
    pub lower: Vec<f64>,
    pub center: Vec<f64>,
    pub upper: Vec<f64>,
    pub standardization: Vec<f64>,
    /// Pre-projection envelopes (Wasserstein-∞ only).
    pub raw_lower: Vec<f64>,
    pub raw_upper: Vec<f64>,
    /// Points whose variance fell below the floor and were excluded from
    /// the supremum.
    pub excluded: Vec<bool>,
    pub degenerate: bool,
    pub notes: Vec<String>,
}

impl BandResult {
    /// Half-width of the band at abscissa index `l`.
    pub fn half_width(&self, l: usize) -> f64 {
        self.critical / (self.n as f64).sqrt() * self.standardization[l]
    }

    /// Membership check against the band's own discretization: the defining
    /// sup inequality over non-excluded points. `truth` is sampled on
    /// `self.abscissa`.
    pub fn covers(&self, truth: &[f64]) -> bool {
        assert_eq!(truth.len(), self.abscissa.len());
        truth.iter().enumerate().all(|(l, &v)| {
            if self.excluded[l] {
                return true;
            }
            (v - self.center[l]).abs() <= self.half_width(l) + 1e-12
        })
    }
}

struct SupOutcome {
    critical: f64,
    sd: Vec<f64>,
    excluded: Vec<bool>,
    degenerate: bool,
}

/// Shared tail of both constructions: variance floor, masking, path
/// simulation, sup quantile.
fn simulate_sup(
    factors: &[Vec<f64>],
    scale: f64,
    opts: &BandOptions,
    notes: &mut Vec<String>,
) -> Result<SupOutcome> {
    let dim = factors.first().map_or(0, |c| c.len());
    let var: Vec<f64> = (0..dim)
        .map(|l| scale * factors.iter().map(|c| c[l] * c[l]).sum::<f64>())
        .collect();
    let vmax = var.iter().cloned().fold(0.0f64, f64::max);
    if vmax <= 0.0 {
        if opts.fixed_support {
            notes.push("zero covariance on the working range: zero-width degenerate band".into());
            return Ok(SupOutcome {
                critical: 0.0,
                sd: vec![0.0; dim],
                excluded: vec![true; dim],
                degenerate: true,
            });
        }
        return Err(Error::Degenerate(
            "standardization vanishes on the working range; re-run with a fixed-support \
             declaration and a trim delta"
                .into(),
        ));
    }
    let excluded: Vec<bool> = var.iter().map(|&v| v < VARIANCE_FLOOR * vmax).collect();
    if excluded.iter().any(|&e| e) {
        notes.push(format!(
            "{} grid points with near-zero standardization excluded from the supremum",
            excluded.iter().filter(|&&e| e).count()
        ));
    }
    let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let mask: Vec<bool> = excluded.iter().map(|&e| !e).collect();
    let root = pivoted_cholesky(factors, scale, opts.pivot_tol, factors.len().min(dim));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut sups = standardized_sups(&root, &sd, &mask, opts.reps, &mut rng);
    sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let critical = empirical_quantile(&sups, 1.0 - opts.alpha);
    Ok(SupOutcome { critical, sd, excluded, degenerate: false })
}

/// Wasserstein-∞ band at predictor `x`: a stochastic-ordering bracket given
/// by monotone envelopes around the fitted quantile curve.
pub fn winf_band(
    data: &Dataset,
    fit: &FitResult,
    x: &DVector<f64>,
    opts: &BandOptions,
) -> Result<BandResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Input("alpha must lie in (0,1)".into()));
    }
    let sandwich = SandwichKernel::from_fit(data, fit);
    let (center_curve, projected) = fit.predict(data, x)?;
    let mut notes = Vec::new();
    if projected {
        notes.push("fitted curve at x required monotone projection".into());
    }

    let (lo, hi) = if opts.fixed_support {
        data.grid().index_range(opts.delta, 1.0 - opts.delta)
    } else {
        (0, data.grid().len() - 1)
    };
    let loadings = sandwich.loadings(x);
    let factors: Vec<Vec<f64>> = sandwich
        .residuals()
        .iter()
        .zip(loadings.iter())
        .map(|(r, &a)| r[lo..=hi].iter().map(|&v| a * v).collect())
        .collect();
    let scale = 1.0 / data.n() as f64;
    let sup = simulate_sup(&factors, scale, opts, &mut notes)?;

    let rootn = (data.n() as f64).sqrt();
    let center: Vec<f64> = center_curve.values()[lo..=hi].to_vec();
    let raw_lower: Vec<f64> = center
        .iter()
        .zip(sup.sd.iter())
        .map(|(c, s)| c - sup.critical / rootn * s)
        .collect();
    let raw_upper: Vec<f64> = center
        .iter()
        .zip(sup.sd.iter())
        .map(|(c, s)| c + sup.critical / rootn * s)
        .collect();
    let weights = &data.grid().weights()[lo..=hi];
    // smallest nondecreasing majorant / largest nondecreasing minorant
    let lower = monotone_majorant(&raw_lower, weights)?;
    let upper = monotone_minorant(&raw_upper, weights)?;

    Ok(BandResult {
        kind: BandKind::Winf,
        x: x.iter().copied().collect(),
        alpha: opts.alpha,
        delta: opts.fixed_support.then_some(opts.delta),
        critical: sup.critical,
        n: data.n(),
        abscissa: data.grid().points()[lo..=hi].to_vec(),
        lower,
        center,
        upper,
        standardization: sup.sd,
        raw_lower,
        raw_upper,
        excluded: sup.excluded,
        degenerate: sup.degenerate,
        notes,
    })
}

/// Wasserstein density band at predictor `x` on the trimmed support
/// `[Q̂(x,δ), Q̂(x,1-δ)]`.
pub fn density_band(
    data: &Dataset,
    fit: &FitResult,
    x: &DVector<f64>,
    opts: &BandOptions,
) -> Result<BandResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Input("alpha must lie in (0,1)".into()));
    }
    if !(opts.delta > 0.0 && opts.delta < 0.5) {
        return Err(Error::Input(format!("delta must lie in (0, 1/2), got {}", opts.delta)));
    }
    let mut notes = Vec::new();
    let weights = fit.weights_at(data, x)?;
    let epsilon = data.default_epsilon()?;
    let (density, qhat) = fit_density(data, &weights, epsilon)?;
    let qv = qhat.q_values();
    let n = data.n();

    // ∂q̂/∂t: weighted mean of the observed q'ᵢ, or finite differences of
    // the fitted q̂ when derivatives were not supplied
    let dq: Vec<f64> = if data.has_dq() {
        qhat.dq_values().expect("fit_density propagates dq").to_vec()
    } else {
        notes.push(
            "quantile-density derivatives missing: falling back to finite differences of the \
             fitted quantile density"
                .into(),
        );
        crate::dataset::finite_difference(qv, data.grid().points())
    };

    let sandwich = SandwichKernel::from_fit(data, fit);
    let deriv = deriv_kernel_matrix(&sandwich, opts.delta)?;
    let (lo, hi) = deriv.range();
    let loadings = sandwich.loadings(x);

    // b̂_t = q̂⁻³ (∂q̂/∂t, q̂); the factor curve per observation is
    // aᵢ (b̂[0] rᵢ + b̂[1] rᵢ')
    let b0: Vec<f64> = (lo..=hi).map(|l| dq[l] / qv[l].powi(3)).collect();
    let b1: Vec<f64> = (lo..=hi).map(|l| 1.0 / qv[l].powi(2)).collect();
    let rd = deriv.residual_derivatives();
    let factors: Vec<Vec<f64>> = sandwich
        .residuals()
        .iter()
        .zip(rd.iter())
        .zip(loadings.iter())
        .map(|((r, rdi), &a)| {
            (0..=hi - lo)
                .map(|j| a * (b0[j] * r[lo + j] + b1[j] * rdi[j]))
                .collect()
        })
        .collect();
    let sup = simulate_sup(&factors, 1.0 / n as f64, opts, &mut notes)?;

    let rootn = (n as f64).sqrt();
    let abscissa: Vec<f64> = density.support()[lo..=hi].to_vec();
    let center: Vec<f64> = density.values()[lo..=hi].to_vec();
    let lower: Vec<f64> = center
        .iter()
        .zip(sup.sd.iter())
        .map(|(c, s)| c - sup.critical / rootn * s)
        .collect();
    let upper: Vec<f64> = center
        .iter()
        .zip(sup.sd.iter())
        .map(|(c, s)| c + sup.critical / rootn * s)
        .collect();

    Ok(BandResult {
        kind: BandKind::Density,
        x: x.iter().copied().collect(),
        alpha: opts.alpha,
        delta: Some(opts.delta),
        critical: sup.critical,
        n,
        abscissa,
        lower,
        center,
        upper,
        standardization: sup.sd,
        raw_lower: Vec::new(),
        raw_upper: Vec::new(),
        excluded: sup.excluded,
        degenerate: sup.degenerate,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{QuantileCurve, QuantileDensityCurve};
    use crate::grid::TimeGrid;

    fn curve_on(grid: &Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> QuantileCurve {
        QuantileCurve::new(grid.clone(), grid.points().iter().map(|&t| f(t)).collect()).unwrap()
    }

    /// Location-scale sample with deterministic "noise" so residuals are
    /// reproducible and nonzero.
    fn wiggly_dataset(n: usize, with_dens: bool) -> Dataset {
        let grid = TimeGrid::uniform(201);
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64 / (n - 1) as f64 - 0.5);
        let mut curves = Vec::new();
        let mut qdens = Vec::new();
        for i in 0..n {
            let shift = 2.0 * x[(i, 0)] + 0.3 * ((i * 7 % 11) as f64 / 11.0 - 0.5);
            let scale = 2.0 + x[(i, 0)] + 0.4 * ((i * 5 % 13) as f64 / 13.0 - 0.5);
            curves.push(curve_on(&grid, |t| shift + scale * t));
            qdens.push(
                QuantileDensityCurve::new(
                    grid.clone(),
                    vec![scale; grid.len()],
                    Some(vec![0.0; grid.len()]),
                )
                .unwrap(),
            );
        }
        Dataset::new(x, curves, with_dens.then_some(qdens)).unwrap()
    }

    #[test]
    fn sandwich_reduces_to_residual_kernel_without_predictors() {
        let grid = TimeGrid::uniform(51);
        let x = DMatrix::zeros(4, 0);
        let curves = (0..4)
            .map(|i| curve_on(&grid, move |t| t + 0.1 * (i as f64 - 1.5)))
            .collect();
        let data = Dataset::new(x, curves, None).unwrap();
        let fit = FitResult::fit(&data).unwrap();
        let sandwich = SandwichKernel::from_fit(&data, &fit);
        let rk = crate::kernels::residual_kernel(&data, &fit);
        for &(a, b) in &[(0usize, 0usize), (10, 40), (25, 25)] {
            let block = sandwich.block_at(a, b);
            assert_eq!(block.nrows(), 1);
            assert!((block[(0, 0)] - rk.value(a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn sandwich_quadratic_form_is_nonnegative_on_diagonal() {
        let data = wiggly_dataset(12, false);
        let fit = FitResult::fit(&data).unwrap();
        let sandwich = SandwichKernel::from_fit(&data, &fit);
        for &xv in &[-0.4, 0.0, 0.7, 3.0] {
            let a = sandwich.loadings(&DVector::from_vec(vec![xv]));
            for l in [0usize, 50, 100, 200] {
                let v: f64 = a
                    .iter()
                    .zip(sandwich.residuals().iter())
                    .map(|(ai, r)| ai * ai * r[l] * r[l])
                    .sum::<f64>()
                    / data.n() as f64;
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn deriv_kernel_constant_blocks_are_zero() {
        // constant residual curves: D̂ constant in (s,t), derivatives vanish
        let grid = TimeGrid::uniform(201);
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64 / 5.0 - 0.5);
        let curves = (0..6)
            .map(|i| curve_on(&grid, move |t| t + (i % 2) as f64 * 0.2))
            .collect();
        let data = Dataset::new(x, curves, None).unwrap();
        let fit = FitResult::fit(&data).unwrap();
        let sandwich = SandwichKernel::from_fit(&data, &fit);
        let deriv = deriv_kernel_matrix(&sandwich, 0.1).unwrap();
        let b = deriv.block_at(1, 1, 5, 9);
        assert!(b.iter().all(|v| v.abs() < 1e-9), "D^(1,1) = {b}");
        let b = deriv.block_at(1, 0, 5, 9);
        assert!(b.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn deriv_kernel_bilinear_case() {
        // single intercept-only "residual" r(t) = t gives D̂(s,t) = s·t and
        // D̂^(1,1) ≡ 1
        let grid = TimeGrid::uniform(201);
        let x = DMatrix::zeros(3, 0);
        let curves: Vec<QuantileCurve> = (0..3).map(|_| curve_on(&grid, |t| t)).collect();
        let data = Dataset::new(x, curves, None).unwrap();
        let fit = FitResult::fit(&data).unwrap();
        let mut sandwich = SandwichKernel::from_fit(&data, &fit);
        // overwrite residuals with r(t) = t (fit residuals are zero here)
        sandwich.residuals =
            (0..3).map(|_| grid.points().to_vec()).collect();
        let deriv = deriv_kernel_matrix(&sandwich, 0.05).unwrap();
        let (lo, hi) = deriv.range();
        for (a, b) in [(0usize, 0usize), (3, 7), (hi - lo, 0)] {
            let blk = deriv.block_at(1, 1, a, b);
            assert!((blk[(0, 0)] - 1.0).abs() < 1e-6, "D^(1,1) at ({a},{b}) = {}", blk[(0, 0)]);
        }
    }

    #[test]
    fn mixed_derivative_symmetry() {
        let data = wiggly_dataset(10, false);
        let fit = FitResult::fit(&data).unwrap();
        let sandwich = SandwichKernel::from_fit(&data, &fit);
        let deriv = deriv_kernel_matrix(&sandwich, 0.1).unwrap();
        for (a, b) in [(2usize, 9usize), (0, 5), (7, 7)] {
            let lhs = deriv.block_at(1, 0, a, b);
            let rhs = deriv.block_at(0, 1, b, a).transpose();
            let diff = (&lhs - &rhs).abs().max();
            assert!(diff < 1e-10, "asymmetry {diff}");
        }
    }

    #[test]
    fn winf_band_brackets_and_projects() {
        let data = wiggly_dataset(20, false);
        let fit = FitResult::fit(&data).unwrap();
        let opts = BandOptions::new(0.05, 2000, 7);
        let band = winf_band(&data, &fit, &DVector::from_vec(vec![0.2]), &opts).unwrap();
        assert!(!band.degenerate);
        for l in 0..band.abscissa.len() {
            assert!(band.lower[l] <= band.upper[l] + 1e-12);
            assert!(band.lower[l] >= band.raw_lower[l] - 1e-12);
            assert!(band.upper[l] <= band.raw_upper[l] + 1e-12);
            assert!(band.lower[l] <= band.center[l] + 1e-12);
            assert!(band.center[l] <= band.upper[l] + 1e-12);
        }
        // envelopes are nondecreasing
        assert!(band.lower.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(band.upper.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn winf_band_width_monotone_in_alpha() {
        let data = wiggly_dataset(20, false);
        let fit = FitResult::fit(&data).unwrap();
        let x = DVector::from_vec(vec![0.0]);
        let tight = winf_band(&data, &fit, &x, &BandOptions::new(0.01, 2000, 7)).unwrap();
        let loose = winf_band(&data, &fit, &x, &BandOptions::new(0.10, 2000, 7)).unwrap();
        for l in 0..tight.abscissa.len() {
            assert!(tight.raw_lower[l] <= loose.raw_lower[l] + 1e-12);
            assert!(tight.raw_upper[l] >= loose.raw_upper[l] - 1e-12);
        }
    }

    #[test]
    fn zero_residuals_degenerate_paths() {
        // identical responses over a dyadic design: residuals are exactly
        // zero; plain mode errors, fixed-support trimmed mode yields a
        // documented zero-width band
        let grid = TimeGrid::uniform(9);
        let xs = [-0.5, -0.375, -0.25, -0.125, 0.125, 0.25, 0.375, 0.5];
        let x = DMatrix::from_fn(8, 1, |i, _| xs[i]);
        let curves = (0..8).map(|_| curve_on(&grid, |t| t)).collect();
        let data = Dataset::new(x, curves, None).unwrap();
        let fit = FitResult::fit(&data).unwrap();
        let xq = DVector::from_vec(vec![0.1]);
        let opts = BandOptions::new(0.05, 500, 3);
        assert!(matches!(winf_band(&data, &fit, &xq, &opts), Err(Error::Degenerate(_))));
        let mut fs = opts;
        fs.fixed_support = true;
        let band = winf_band(&data, &fit, &xq, &fs).unwrap();
        assert!(band.degenerate);
        for l in 0..band.abscissa.len() {
            assert_eq!(band.lower[l], band.center[l]);
            assert_eq!(band.upper[l], band.center[l]);
        }
    }

    #[test]
    fn density_band_symmetric_envelopes() {
        let data = wiggly_dataset(20, true);
        let fit = FitResult::fit(&data).unwrap();
        let opts = BandOptions::new(0.05, 2000, 11);
        let band = density_band(&data, &fit, &DVector::from_vec(vec![0.1]), &opts).unwrap();
        assert!(!band.degenerate);
        for l in 0..band.abscissa.len() {
            let up = band.upper[l] - band.center[l];
            let down = band.center[l] - band.lower[l];
            assert!((up - down).abs() < 1e-12);
        }
        // abscissae are sorted and trimmed
        assert!(band.abscissa.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(band.delta, Some(0.1));
    }

    #[test]
    fn density_band_without_dq_falls_back_with_note() {
        let mut data = wiggly_dataset(20, false);
        data.derive_quantile_densities();
        // strip the derivatives by rebuilding without them
        let grid = data.grid().clone();
        let stripped: Vec<QuantileDensityCurve> = data
            .quantile_densities()
            .unwrap()
            .iter()
            .map(|q| QuantileDensityCurve::new(grid.clone(), q.q_values().to_vec(), None).unwrap())
            .collect();
        let data = Dataset::new(data.predictors().clone(), data.quantiles().to_vec(), Some(stripped))
            .unwrap();
        let fit = FitResult::fit(&data).unwrap();
        let opts = BandOptions::new(0.05, 500, 11);
        let band = density_band(&data, &fit, &DVector::from_vec(vec![0.1]), &opts).unwrap();
        assert!(band.notes.iter().any(|n| n.contains("finite differences")));
    }
}
