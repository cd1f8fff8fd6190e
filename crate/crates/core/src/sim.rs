//! Simulation harness: location-scale data generators built on a truncated
//! normal base, random optimal-transport noise (linear and Dirichlet-mixture
//! nonlinear), indirect observation through secondary samples, and the
//! power/coverage experiment runners.
//!
//! Everything is seeded. Replicates draw from ChaCha streams derived from a
//! master seed and the replicate index, so results are independent of the
//! worker count.

use crate::bands::{density_band, winf_band, BandKind, BandOptions, BandResult};
use crate::curve::{DensityCurve, QuantileCurve, QuantileDensityCurve};
use crate::dataset::Dataset;
use crate::fit::FitResult;
use crate::grid::TimeGrid;
use crate::inference::{test_global, test_partial, Method, TestKind, TestOptions};
use crate::isotonic::monotone_projection;
use crate::{dataset, Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Dirichlet;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::sync::Arc;

/// Truncation interval of the base density.
pub const BASE_SUPPORT: (f64, f64) = (-2.5, 2.5);

/// Dirichlet order of the nonlinear transport mixture.
pub const DIRICHLET_ORDER: usize = 10;

/// Frequencies the nonlinear template maps draw from.
pub const TEMPLATE_FREQS: [f64; 5] = [-0.250, -0.125, 0.0, 0.125, 0.250];

fn base_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn base_mass() -> f64 {
    let n = base_normal();
    n.cdf(BASE_SUPPORT.1) - n.cdf(BASE_SUPPORT.0)
}

/// Density of the standard normal truncated to [-2.5, 2.5], zero outside.
pub fn base_pdf(u: f64) -> f64 {
    if u < BASE_SUPPORT.0 || u > BASE_SUPPORT.1 {
        return 0.0;
    }
    base_normal().pdf(u) / base_mass()
}

/// Quantile of the truncated base at `t ∈ [0,1]`.
pub fn base_quantile(t: f64) -> f64 {
    if t <= 0.0 {
        return BASE_SUPPORT.0;
    }
    if t >= 1.0 {
        return BASE_SUPPORT.1;
    }
    let n = base_normal();
    n.inverse_cdf(n.cdf(BASE_SUPPORT.0) + t * base_mass())
}

/// Quantile density q₀ = 1 / (f₀ ∘ Q₀) of the base.
pub fn base_quantile_density(t: f64) -> f64 {
    base_mass() / base_normal().pdf(base_quantile(t))
}

/// Derivative q₀' = Q₀ · q₀² (from φ' = -u·φ).
pub fn base_quantile_density_deriv(t: f64) -> f64 {
    let q = base_quantile_density(t);
    base_quantile(t) * q * q
}

/// The truncated standard normal base on a grid: density, quantile curve and
/// quantile density with derivative.
pub fn base_density(
    grid: &Arc<TimeGrid>,
) -> Result<(DensityCurve, QuantileCurve, QuantileDensityCurve)> {
    let pts = grid.points();
    let mut qv: Vec<f64> = pts.iter().map(|&t| base_quantile(t)).collect();
    // endpoints are the truncation bounds exactly
    qv[0] = BASE_SUPPORT.0;
    *qv.last_mut().unwrap() = BASE_SUPPORT.1;
    let quantile = QuantileCurve::new(grid.clone(), qv.clone())?;
    let q: Vec<f64> = pts.iter().map(|&t| base_quantile_density(t)).collect();
    let dq: Vec<f64> = pts.iter().map(|&t| base_quantile_density_deriv(t)).collect();
    let qdens = QuantileDensityCurve::new(grid.clone(), q, Some(dq))?;
    let values: Vec<f64> = qv.iter().map(|&u| base_pdf(u)).collect();
    let density = DensityCurve::new(qv, values, pts.to_vec())?;
    Ok((density, quantile, qdens))
}

/// Random optimal transport noise applied to conditional quantile curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    /// No noise: the transport is the identity.
    None,
    /// T(u) = V₁ + V₂·u with V₁ ~ U(-1/2, 1/2), V₂ ~ U(1/2, 3/2).
    Linear,
    /// Dirichlet mixture of the template maps M_k(u) = u - sin(ku)/|k|.
    Nonlinear,
}

impl std::fmt::Display for TransportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TransportKind::None => "none",
            TransportKind::Linear => "linear",
            TransportKind::Nonlinear => "nonlinear",
        };
        f.write_str(s)
    }
}

/// A realized transport map, evaluable with two derivatives.
#[derive(Debug, Clone)]
pub enum Transport {
    Identity,
    Linear { v1: f64, v2: f64 },
    Mixture { weights: [f64; DIRICHLET_ORDER], freqs: [f64; DIRICHLET_ORDER] },
}

fn template(k: f64, u: f64) -> f64 {
    if k == 0.0 {
        u
    } else {
        u - (k * u).sin() / k.abs()
    }
}

fn template_deriv(k: f64, u: f64) -> f64 {
    if k == 0.0 {
        1.0
    } else {
        1.0 - k.signum() * (k * u).cos()
    }
}

fn template_second(k: f64, u: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k.signum() * k * (k * u).sin()
    }
}

impl Transport {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Transport::Identity => u,
            Transport::Linear { v1, v2 } => v1 + v2 * u,
            Transport::Mixture { weights, freqs } => weights
                .iter()
                .zip(freqs.iter())
                .map(|(&w, &k)| w * template(k, u))
                .sum(),
        }
    }

    /// T'(u) = Σ wⱼ (1 - sign(kⱼ) cos(kⱼ u)) ≥ 0 for mixtures.
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Transport::Identity => 1.0,
            Transport::Linear { v2, .. } => *v2,
            Transport::Mixture { weights, freqs } => weights
                .iter()
                .zip(freqs.iter())
                .map(|(&w, &k)| w * template_deriv(k, u))
                .sum(),
        }
    }

    pub fn second_deriv(&self, u: f64) -> f64 {
        match self {
            Transport::Identity | Transport::Linear { .. } => 0.0,
            Transport::Mixture { weights, freqs } => weights
                .iter()
                .zip(freqs.iter())
                .map(|(&w, &k)| w * template_second(k, u))
                .sum(),
        }
    }
}

/// Draws a transport of the given kind.
pub fn sample_transport<R: Rng>(kind: TransportKind, rng: &mut R) -> Transport {
    match kind {
        TransportKind::None => Transport::Identity,
        TransportKind::Linear => {
            let v1 = rng.random::<f64>() - 0.5;
            let v2 = 0.5 + rng.random::<f64>();
            Transport::Linear { v1, v2 }
        }
        TransportKind::Nonlinear => {
            let dir = Dirichlet::new([1.0; DIRICHLET_ORDER]).unwrap();
            let weights: [f64; DIRICHLET_ORDER] = dir.sample(rng);
            let mut freqs = [0.0; DIRICHLET_ORDER];
            for f in freqs.iter_mut() {
                *f = TEMPLATE_FREQS[rng.random_range(0..TEMPLATE_FREQS.len())];
            }
            Transport::Mixture { weights, freqs }
        }
    }
}

/// Location-scale simulation configuration: ν(x) = α·x, τ(x) = 2 + β·x over
/// predictors uniform on [-1/2, 1/2]^p.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub transport: TransportKind,
    pub indirect: bool,
    pub secondary_size: usize,
    pub grid_size: usize,
}

impl SimConfig {
    pub fn new(n: usize, p: usize, transport: TransportKind) -> Self {
        Self {
            n,
            p,
            alpha1: 0.0,
            alpha2: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            transport,
            indirect: false,
            secondary_size: 300,
            grid_size: 1001,
        }
    }

    /// The global-test design: all four coefficients share one value.
    pub fn global_design(n: usize, signal: f64, transport: TransportKind) -> Self {
        let mut c = Self::new(n, 2, transport);
        c.alpha1 = signal;
        c.alpha2 = signal;
        c.beta1 = signal;
        c.beta2 = signal;
        c
    }

    /// The partial-test design: α₁ = 2, β₁ = 1 fixed, the second block varies.
    pub fn partial_design(n: usize, signal: f64, transport: TransportKind) -> Self {
        let mut c = Self::new(n, 2, transport);
        c.alpha1 = 2.0;
        c.beta1 = 1.0;
        c.alpha2 = signal;
        c.beta2 = signal;
        c
    }

    /// The coverage design: single predictor, ν(x) = 2x, τ(x) = 2 + x.
    pub fn coverage_design(n: usize, transport: TransportKind) -> Self {
        let mut c = Self::new(n, 1, transport);
        c.alpha1 = 2.0;
        c.beta1 = 1.0;
        c
    }

    pub fn nu(&self, x: &[f64]) -> f64 {
        self.alpha1 * x[0] + if self.p > 1 { self.alpha2 * x[1] } else { 0.0 }
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        2.0 + self.beta1 * x[0] + if self.p > 1 { self.beta2 * x[1] } else { 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p == 1 || self.p == 2) {
            return Err(Error::Input("simulation designs use p in {1, 2}".into()));
        }
        if self.grid_size < 3 {
            return Err(Error::Input("grid too small".into()));
        }
        // τ must stay positive over the predictor cube; check the corners
        let worst = 2.0 - 0.5 * (self.beta1.abs() + if self.p > 1 { self.beta2.abs() } else { 0.0 });
        if worst <= 0.0 {
            return Err(Error::Input(format!(
                "scale function can reach {worst} <= 0 on the predictor support"
            )));
        }
        if self.indirect && self.secondary_size < 20 {
            return Err(Error::Input("secondary samples need at least 20 draws".into()));
        }
        Ok(())
    }
}

/// A generated dataset together with the analytic conditional truth per
/// observation.
pub struct Generated {
    pub data: Dataset,
    pub truth: Vec<QuantileCurve>,
}

/// Draws predictors, transports and response curves. Quantile densities and
/// their derivatives are analytic for direct observation and numerical for
/// indirect observation.
pub fn generate_dataset<R: Rng>(config: &SimConfig, rng: &mut R) -> Result<Generated> {
    config.validate()?;
    let grid = TimeGrid::uniform(config.grid_size);
    let pts = grid.points();
    let q0: Vec<f64> = {
        let mut v: Vec<f64> = pts.iter().map(|&t| base_quantile(t)).collect();
        v[0] = BASE_SUPPORT.0;
        *v.last_mut().unwrap() = BASE_SUPPORT.1;
        v
    };
    let qd0: Vec<f64> = pts.iter().map(|&t| base_quantile_density(t)).collect();
    let dqd0: Vec<f64> = pts.iter().map(|&t| base_quantile_density_deriv(t)).collect();

    let n = config.n;
    let mut x = DMatrix::zeros(n, config.p);
    let mut curves = Vec::with_capacity(n);
    let mut qdens = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let mut xi = vec![0.0; config.p];
        for (j, v) in xi.iter_mut().enumerate() {
            *v = rng.random::<f64>() - 0.5;
            x[(i, j)] = *v;
        }
        let transport = sample_transport(config.transport, rng);
        let nu = config.nu(&xi);
        let tau = config.tau(&xi);

        let truth_vals: Vec<f64> = q0.iter().map(|&q| nu + tau * q).collect();
        truth.push(QuantileCurve::new(grid.clone(), truth_vals.clone())?);

        if config.indirect {
            let sample: Vec<f64> = (0..config.secondary_size)
                .map(|_| transport.eval(nu + tau * base_quantile(rng.random::<f64>())))
                .collect();
            let (qc, qd) =
                empirical_quantile_from_sample(&sample, &grid, Smoothing::LocalLinear, None)?;
            curves.push(qc);
            qdens.push(qd);
        } else {
            let vals: Vec<f64> = truth_vals.iter().map(|&a| transport.eval(a)).collect();
            curves.push(QuantileCurve::new(grid.clone(), vals)?);
            let q: Vec<f64> = (0..pts.len())
                .map(|l| {
                    let a = truth_vals[l];
                    // chain rule through T ∘ (ν + τ Q₀); zero only at
                    // isolated points, nudged for the positivity gate
                    (transport.deriv(a) * tau * qd0[l]).max(1e-12)
                })
                .collect();
            let dq: Vec<f64> = (0..pts.len())
                .map(|l| {
                    let a = truth_vals[l];
                    let inner = tau * qd0[l];
                    transport.second_deriv(a) * inner * inner
                        + transport.deriv(a) * tau * dqd0[l]
                })
                .collect();
            qdens.push(QuantileDensityCurve::new(grid.clone(), q, Some(dq))?);
        }
    }
    let mut data = Dataset::new(x, curves, Some(qdens))?;
    if config.transport == TransportKind::None {
        data.fixed_support = true;
    }
    Ok(Generated { data, truth })
}

/// Smoother applied to the raw empirical quantile function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    None,
    /// Local linear regression with an Epanechnikov kernel.
    LocalLinear,
}

/// Estimates a quantile curve (plus quantile density and derivative, by
/// finite differences) from a raw univariate sample.
///
/// The default bandwidth is the 1.06·N^(-1/5) rule as a fraction of [0,1].
pub fn empirical_quantile_from_sample(
    sample: &[f64],
    grid: &Arc<TimeGrid>,
    smoothing: Smoothing,
    bandwidth: Option<f64>,
) -> Result<(QuantileCurve, QuantileDensityCurve)> {
    let n = sample.len();
    if n < 20 {
        return Err(Error::Input(format!("need at least 20 sample points, got {n}")));
    }
    let mut sorted = sample.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite sample value".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // raw empirical quantiles at plotting positions (k - 1/2)/n
    let positions: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let raw_at = |t: f64| -> f64 {
        if t <= positions[0] {
            return sorted[0];
        }
        if t >= positions[n - 1] {
            return sorted[n - 1];
        }
        let idx = positions.partition_point(|&p| p <= t);
        let (p0, p1) = (positions[idx - 1], positions[idx]);
        let frac = (t - p0) / (p1 - p0);
        sorted[idx - 1] + frac * (sorted[idx] - sorted[idx - 1])
    };
    let raw: Vec<f64> = grid.points().iter().map(|&t| raw_at(t)).collect();

    let smoothed = match smoothing {
        Smoothing::None => raw,
        Smoothing::LocalLinear => {
            let h = bandwidth.unwrap_or(1.06 * (n as f64).powf(-0.2));
            if !(h > 0.0) {
                return Err(Error::Input("bandwidth must be positive".into()));
            }
            grid.points()
                .iter()
                .map(|&t| local_linear(&positions, &sorted, t, h).unwrap_or_else(|| raw_at(t)))
                .collect()
        }
    };
    // smoothing can dip; project back to the monotone cone
    let vals = if smoothed.windows(2).all(|w| w[1] >= w[0]) {
        smoothed
    } else {
        monotone_projection(&smoothed, grid.weights(), None)?
    };
    let qc = QuantileCurve::new(grid.clone(), vals)?;
    let qv_raw = dataset::finite_difference(qc.values(), grid.points());
    let qv: Vec<f64> = qv_raw.iter().map(|&v| v.max(1e-12)).collect();
    let dqv = dataset::finite_difference(&qv, grid.points());
    let qd = QuantileDensityCurve::new(grid.clone(), qv, Some(dqv))?;
    Ok((qc, qd))
}

/// Epanechnikov local linear estimate at `t`; `None` when the window holds
/// too little data to determine a slope.
fn local_linear(positions: &[f64], values: &[f64], t: f64, h: f64) -> Option<f64> {
    let lo = positions.partition_point(|&p| p < t - h);
    let hi = positions.partition_point(|&p| p <= t + h);
    if hi - lo < 2 {
        return None;
    }
    let (mut s0, mut s1, mut s2, mut m0, mut m1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in lo..hi {
        let z = (positions[k] - t) / h;
        let w = 1.0 - z * z;
        if w <= 0.0 {
            continue;
        }
        let d = positions[k] - t;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        m0 += w * values[k];
        m1 += w * d * values[k];
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() < 1e-300 {
        return None;
    }
    Some((s2 * m0 - s1 * m1) / det)
}

/// SplitMix64-style seed derivation for replicate streams.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = master ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        state = state.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}

/// One cell of the power experiment.
#[derive(Debug, Clone, Copy)]
pub struct PowerSetting {
    pub test: TestKind,
    pub transport: TransportKind,
    pub n: usize,
    pub signal: f64,
}

/// Rejection tally for one (setting, engine) pair.
#[derive(Debug, Clone)]
pub struct PowerRow {
    pub test: TestKind,
    pub transport: TransportKind,
    pub n: usize,
    pub signal: f64,
    pub engine: Method,
    pub reps: usize,
    pub rejections: usize,
}

impl PowerRow {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.reps as f64
    }
}

/// Experiment-level knobs shared by the runners.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentOptions {
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub mc_reps: usize,
    pub boot_reps: usize,
    pub band_reps: usize,
    pub delta: f64,
    pub indirect: bool,
}

impl ExperimentOptions {
    pub fn new(reps: usize, seed: u64) -> Self {
        Self {
            reps,
            alpha: 0.05,
            seed,
            grid_size: 1001,
            mc_reps: 50_000,
            boot_reps: 999,
            band_reps: 2_000,
            delta: 0.1,
            indirect: false,
        }
    }
}

/// Runs the size/power experiment: per setting and replicate, generate,
/// fit, test with each engine, and tally rejections at `alpha`.
pub fn run_power_experiment(
    settings: &[PowerSetting],
    engines: &[Method],
    opts: &ExperimentOptions,
) -> Result<Vec<PowerRow>> {
    let mut rows = Vec::new();
    for (s_idx, setting) in settings.iter().enumerate() {
        let config = match setting.test {
            TestKind::Global => SimConfig::global_design(setting.n, setting.signal, setting.transport),
            TestKind::Partial => {
                SimConfig::partial_design(setting.n, setting.signal, setting.transport)
            }
        };
        let config = SimConfig { indirect: opts.indirect, grid_size: opts.grid_size, ..config };

        let per_rep: Vec<Vec<bool>> = (0..opts.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    opts.seed,
                    &[s_idx as u64, rep as u64, 0],
                ));
                let gen = generate_dataset(&config, &mut rng).expect("valid sim config");
                engines
                    .iter()
                    .enumerate()
                    .map(|(e_idx, &engine)| {
                        let mut topts = TestOptions::new(
                            opts.alpha,
                            engine,
                            derive_seed(opts.seed, &[s_idx as u64, rep as u64, 1 + e_idx as u64]),
                        );
                        topts.mc_reps = opts.mc_reps;
                        topts.boot_reps = opts.boot_reps;
                        let report = match setting.test {
                            TestKind::Global => test_global(&gen.data, topts),
                            TestKind::Partial => test_partial(&gen.data, 1, topts),
                        }
                        .expect("test on generated data");
                        report.reject
                    })
                    .collect()
            })
            .collect();

        for (e_idx, &engine) in engines.iter().enumerate() {
            let rejections = per_rep.iter().filter(|r| r[e_idx]).count();
            rows.push(PowerRow {
                test: setting.test,
                transport: setting.transport,
                n: setting.n,
                signal: setting.signal,
                engine,
                reps: opts.reps,
                rejections,
            });
        }
    }
    Ok(rows)
}

/// One cell of the coverage experiment.
#[derive(Debug, Clone, Copy)]
pub struct CoverageSetting {
    pub band: BandKind,
    pub transport: TransportKind,
    pub n: usize,
}

/// Non-coverage tally for one (setting, x) pair.
#[derive(Debug, Clone)]
pub struct CoverageRow {
    pub band: BandKind,
    pub transport: TransportKind,
    pub n: usize,
    pub x: f64,
    pub reps: usize,
    pub misses: usize,
}

impl CoverageRow {
    pub fn rate(&self) -> f64 {
        self.misses as f64 / self.reps as f64
    }
}

/// Ground-truth curve sampled on a band's abscissae.
fn truth_on_band(config: &SimConfig, x: f64, band: &BandResult) -> Vec<f64> {
    let nu = config.nu(&[x]);
    let tau = config.tau(&[x]);
    match band.kind {
        BandKind::Winf => band.abscissa.iter().map(|&t| nu + tau * base_quantile(t)).collect(),
        BandKind::Density => {
            band.abscissa.iter().map(|&u| base_pdf((u - nu) / tau) / tau).collect()
        }
    }
}

/// Runs the band-coverage experiment on the single-predictor design
/// ν(x) = 2x, τ(x) = 2 + x: per replicate, generate and fit once, build the
/// band at each requested x, and check the analytic truth for membership.
pub fn run_coverage_experiment(
    settings: &[CoverageSetting],
    xs: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<CoverageRow>> {
    let mut rows = Vec::new();
    for (s_idx, setting) in settings.iter().enumerate() {
        let config = SimConfig {
            indirect: opts.indirect,
            grid_size: opts.grid_size,
            ..SimConfig::coverage_design(setting.n, setting.transport)
        };

        let per_rep: Vec<Vec<bool>> = (0..opts.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                    opts.seed,
                    &[1000 + s_idx as u64, rep as u64, 0],
                ));
                let gen = generate_dataset(&config, &mut rng).expect("valid sim config");
                let fit = FitResult::fit(&gen.data).expect("fit generated data");
                xs.iter()
                    .enumerate()
                    .map(|(x_idx, &x)| {
                        let mut bopts = BandOptions::new(
                            opts.alpha,
                            opts.band_reps,
                            derive_seed(
                                opts.seed,
                                &[1000 + s_idx as u64, rep as u64, 1 + x_idx as u64],
                            ),
                        );
                        bopts.delta = opts.delta;
                        let at = DVector::from_vec(vec![x]);
                        let band = match setting.band {
                            BandKind::Winf => winf_band(&gen.data, &fit, &at, &bopts),
                            BandKind::Density => density_band(&gen.data, &fit, &at, &bopts),
                        }
                        .expect("band on generated data");
                        band.covers(&truth_on_band(&config, x, &band))
                    })
                    .collect()
            })
            .collect();

        for (x_idx, &x) in xs.iter().enumerate() {
            let misses = per_rep.iter().filter(|r| !r[x_idx]).count();
            rows.push(CoverageRow {
                band: setting.band,
                transport: setting.transport,
                n: setting.n,
                x,
                reps: opts.reps,
                misses,
            });
        }
    }
    Ok(rows)
}
