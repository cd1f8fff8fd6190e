//! Critical-value engines: chi-square mixture Monte Carlo and the
//! Satterthwaite moment-matching approximation.

use crate::kernels::EigenSpectrum;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::ChiSquared;
use statrs::distribution::{ContinuousCDF, Gamma};

/// The `1-α` empirical quantile: smallest draw whose rank covers `1-α`.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty());
    let r = sorted.len() as f64;
    let k = (level * r).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

/// Monte Carlo draws of `Σ_j λ_j ω_j` with `ω_j` i.i.d. chi-square with
/// `dof` degrees of freedom; deterministic given the seed.
pub fn mixture_draws(spectrum: &EigenSpectrum, dof: usize, reps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new(dof as f64).expect("dof >= 1");
    let lambdas = spectrum.values();
    (0..reps)
        .map(|_| lambdas.iter().map(|&l| l * chi.sample(&mut rng)).sum())
        .collect()
}

/// Critical value of the chi-square mixture law at level `alpha`.
///
/// Returns 0 for an empty spectrum (a degenerate, perfectly fitted model);
/// callers surface that as a diagnostic.
pub fn critical_mixture(
    spectrum: &EigenSpectrum,
    dof: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
) -> f64 {
    if spectrum.is_empty() {
        return 0.0;
    }
    let mut draws = mixture_draws(spectrum, dof, reps, seed);
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    empirical_quantile(&draws, 1.0 - alpha)
}

/// Monte Carlo tail frequency with the add-one floor, so p ∈ (0, 1].
pub fn tail_pvalue(draws: &[f64], statistic: f64) -> f64 {
    let exceed = draws.iter().filter(|&&z| z > statistic).count();
    (exceed + 1) as f64 / (draws.len() + 1) as f64
}

/// Scaled chi-square `a · χ²_m` matched to the first two moments of the
/// mixture law: `a·m = dof·Σλ`, `a²·m = dof·Σλ²`.
#[derive(Debug, Clone, Copy)]
pub struct Satterthwaite {
    pub scale: f64,
    pub shape_dof: f64,
}

/// Moment parameters from the kernel's trace identities. `None` when the
/// trace vanishes (zero kernel).
pub fn satterthwaite_params(trace: f64, hs_sq: f64, dof: usize) -> Option<Satterthwaite> {
    if !(trace > 0.0) || !(hs_sq > 0.0) {
        return None;
    }
    let scale = hs_sq / trace;
    let shape_dof = dof as f64 * trace * trace / hs_sq;
    Some(Satterthwaite { scale, shape_dof })
}

/// `a · χ²_{m,1-α}`, with non-integer m handled through the gamma quantile
/// (χ²_m = Gamma(m/2, rate 1/2)).
pub fn satterthwaite_critical(params: Satterthwaite, alpha: f64) -> f64 {
    let gamma = Gamma::new(params.shape_dof / 2.0, 0.5).expect("positive dof");
    params.scale * gamma.inverse_cdf(1.0 - alpha)
}

/// Upper tail of the fitted scaled chi-square at the observed statistic.
pub fn satterthwaite_pvalue(params: Satterthwaite, statistic: f64) -> f64 {
    let gamma = Gamma::new(params.shape_dof / 2.0, 0.5).expect("positive dof");
    (1.0 - gamma.cdf(statistic / params.scale)).clamp(1e-300, 1.0)
}
