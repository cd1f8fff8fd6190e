//! Gaussian-process supremum simulation for band critical values.
//!
//! Band covariances arrive as factored kernels `K = scale · CᵀC` built from
//! n curves. A pivoted Cholesky of K (evaluated through the factors, never
//! materialized) yields a low-rank square root; paths are then cheap linear
//! combinations of the pivot columns. Empirical kernels are PSD by
//! construction, so the pivot tolerance doubles as the eigenvalue floor.

use rand::Rng;
use rand_distr::StandardNormal;

/// Default relative tolerance at which remaining pivot mass is dropped.
pub const PIVOT_TOL: f64 = 1e-12;

/// Low-rank square root of a discretized covariance: `K ≈ Σ_k L_k L_kᵀ`.
#[derive(Debug, Clone)]
pub struct LowRankRoot {
    columns: Vec<Vec<f64>>,
    dim: usize,
}

impl LowRankRoot {
    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Reconstructed covariance value `K[a,b]`.
    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.columns.iter().map(|c| c[a] * c[b]).sum()
    }
}

/// Pivoted Cholesky of `K = scale · Σ_i c_i c_iᵀ` with the factor curves as
/// rows of `curves`. Stops when the largest remaining diagonal falls below
/// `rel_tol` times its starting maximum, or at `max_rank`.
pub fn pivoted_cholesky(curves: &[Vec<f64>], scale: f64, rel_tol: f64, max_rank: usize) -> LowRankRoot {
    let dim = curves.first().map_or(0, |c| c.len());
    let mut diag: Vec<f64> = (0..dim)
        .map(|l| scale * curves.iter().map(|c| c[l] * c[l]).sum::<f64>())
        .collect();
    let d0 = diag.iter().cloned().fold(0.0f64, f64::max);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if d0 <= 0.0 {
        return LowRankRoot { columns, dim };
    }
    let cutoff = rel_tol * d0;
    while columns.len() < max_rank.min(dim) {
        let (pivot, &dmax) = diag
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if dmax <= cutoff {
            break;
        }
        // column K[:, pivot] through the factors
        let mut col: Vec<f64> = (0..dim)
            .map(|l| scale * curves.iter().map(|c| c[l] * c[pivot]).sum::<f64>())
            .collect();
        for prev in &columns {
            let lp = prev[pivot];
            for (v, &p) in col.iter_mut().zip(prev.iter()) {
                *v -= p * lp;
            }
        }
        let root = dmax.sqrt();
        for v in col.iter_mut() {
            *v /= root;
        }
        for (d, &v) in diag.iter_mut().zip(col.iter()) {
            *d = (*d - v * v).max(0.0);
        }
        columns.push(col);
    }
    LowRankRoot { columns, dim }
}

/// Simulated suprema of the standardized Gaussian process:
/// `sup_{l in mask} |Z(l)| / sd[l]` for `reps` independent paths.
///
/// Paths come from the low-rank root, so each draw costs rank × dim. The
/// output order is fixed by the RNG stream, keeping quantiles reproducible.
pub fn standardized_sups<R: Rng>(
    root: &LowRankRoot,
    sd: &[f64],
    mask: &[bool],
    reps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let active: Vec<usize> = (0..root.dim()).filter(|&l| mask[l]).collect();
    // pre-scale the root rows by 1/sd on the active set
    let scaled: Vec<Vec<f64>> = root
        .columns()
        .iter()
        .map(|col| active.iter().map(|&l| col[l] / sd[l]).collect())
        .collect();
    let mut sups = Vec::with_capacity(reps);
    let mut path = vec![0.0f64; active.len()];
    for _ in 0..reps {
        path.fill(0.0);
        for col in &scaled {
            let eta: f64 = rng.sample(StandardNormal);
            for (v, &c) in path.iter_mut().zip(col.iter()) {
                *v += eta * c;
            }
        }
        let sup = path.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        sups.push(sup);
    }
    sups
}
