//! Design summaries: predictor moments, empirical regression weights, and
//! the (Y, Z) partition quantities used by partial tests.

use crate::dataset::Dataset;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative eigenvalue cutoff under which a covariance matrix is treated as
/// singular and the fit refused.
const PD_TOL: f64 = 1e-10;

/// Moments of the predictor sample: X̄, Σ̂ and Λ̂ with their inverses.
#[derive(Debug, Clone)]
pub struct DesignSummary {
    n: usize,
    p: usize,
    x_bar: DVector<f64>,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    lambda: DMatrix<f64>,
    lambda_inv: DMatrix<f64>,
}

impl DesignSummary {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        let x_bar = DVector::from_fn(p, |j, _| x.column(j).sum() / n as f64);
        let mut sigma = DMatrix::zeros(p, p);
        for i in 0..n {
            let xc = x.row(i).transpose() - &x_bar;
            sigma += &xc * xc.transpose();
        }
        sigma /= n as f64;
        let sigma_inv = invert_pd(&sigma, "predictor covariance")?;

        // Λ̂ = n⁻¹ Σ x̃ᵢx̃ᵢᵀ over the intercept-augmented predictors
        let mut lambda = DMatrix::zeros(p + 1, p + 1);
        for i in 0..n {
            let mut xt = DVector::zeros(p + 1);
            xt[0] = 1.0;
            for j in 0..p {
                xt[j + 1] = x[(i, j)];
            }
            lambda += &xt * xt.transpose();
        }
        lambda /= n as f64;
        let lambda_inv = invert_pd(&lambda, "augmented moment matrix")?;

        Ok(Self { n, p, x_bar, sigma, sigma_inv, lambda, lambda_inv })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn x_bar(&self) -> &DVector<f64> {
        &self.x_bar
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn lambda_inv(&self) -> &DMatrix<f64> {
        &self.lambda_inv
    }

    /// Empirical weights `s_in(x) = 1 + (Xᵢ - X̄)ᵀ Σ̂⁻¹ (x - X̄)`.
    ///
    /// Their mean is exactly 1; individual weights may be negative.
    pub fn empirical_weights(&self, x_rows: &DMatrix<f64>, at: &DVector<f64>) -> Result<Vec<f64>> {
        if at.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: at.len() });
        }
        let dir = self.sigma_inv() * (at - &self.x_bar);
        Ok((0..x_rows.nrows())
            .map(|i| {
                let xc = x_rows.row(i).transpose() - &self.x_bar;
                1.0 + xc.dot(&dir)
            })
            .collect())
    }

    /// Partition quantities for testing the trailing `p - q` predictors.
    pub fn partition(&self, q: usize) -> Result<Partition> {
        if q == 0 || q >= self.p {
            return Err(Error::Input(format!(
                "partition needs 0 < q < p (got q={q}, p={})",
                self.p
            )));
        }
        let p = self.p;
        let sigma_yy = self.sigma.view((0, 0), (q, q)).into_owned();
        let sigma_zy = self.sigma.view((q, 0), (p - q, q)).into_owned();
        let sigma_zz = self.sigma.view((q, q), (p - q, p - q)).into_owned();
        let sigma_yy_inv = invert_pd(&sigma_yy, "submodel covariance")?;
        let sigma_z_given_y = &sigma_zz - &sigma_zy * &sigma_yy_inv * sigma_zy.transpose();
        let z_given_y_inv_sqrt = inverse_sqrt_pd(&sigma_z_given_y, "conditional covariance")?;
        // Ĵᵀ = [-Σ̂_ZY Σ̂_YY⁻¹  I]
        let mut j_t = DMatrix::zeros(p - q, p);
        let head = -&sigma_zy * &sigma_yy_inv;
        j_t.view_mut((0, 0), (p - q, q)).copy_from(&head);
        j_t.view_mut((0, q), (p - q, p - q)).copy_from(&DMatrix::identity(p - q, p - q));
        Ok(Partition {
            q,
            y_bar: self.x_bar.rows(0, q).into_owned(),
            sigma_yy_inv,
            sigma_z_given_y,
            z_given_y_inv_sqrt,
            j_t,
        })
    }
}

/// (Y, Z) split of the design with the plug-ins used by the partial kernel.
#[derive(Debug, Clone)]
pub struct Partition {
    q: usize,
    y_bar: DVector<f64>,
    sigma_yy_inv: DMatrix<f64>,
    sigma_z_given_y: DMatrix<f64>,
    z_given_y_inv_sqrt: DMatrix<f64>,
    j_t: DMatrix<f64>,
}

impl Partition {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sigma_z_given_y(&self) -> &DMatrix<f64> {
        &self.sigma_z_given_y
    }

    pub fn z_given_y_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.z_given_y_inv_sqrt
    }

    pub fn j_t(&self) -> &DMatrix<f64> {
        &self.j_t
    }

    /// Submodel weights `s_in,0(y) = 1 + (Yᵢ - Ȳ)ᵀ Σ̂_YY⁻¹ (y - Ȳ)` over the
    /// leading `q` predictor columns.
    pub fn submodel_weights(&self, x_rows: &DMatrix<f64>, at_y: &DVector<f64>) -> Result<Vec<f64>> {
        if at_y.len() != self.q {
            return Err(Error::DimensionMismatch { expected: self.q, got: at_y.len() });
        }
        let dir = &self.sigma_yy_inv * (at_y - &self.y_bar);
        Ok((0..x_rows.nrows())
            .map(|i| {
                let yc = x_rows.row(i).columns(0, self.q).transpose() - &self.y_bar;
                1.0 + yc.dot(&dir)
            })
            .collect())
    }
}

/// Builds the summary straight from a dataset.
pub fn summarize(data: &Dataset) -> Result<DesignSummary> {
    DesignSummary::new(data.predictors())
}

fn invert_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > PD_TOL * max.max(0.0)) {
        return Err(Error::Design(format!(
            "{what} is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}])"
        )));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Design(format!("{what} could not be inverted")))
}

fn inverse_sqrt_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > PD_TOL * max.max(0.0)) {
        return Err(Error::Design(format!(
            "{what} is not positive definite (eigenvalues in [{min:.3e}, {max:.3e}])"
        )));
    }
    let d_inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&eig.eigenvectors * d_inv_sqrt * eig.eigenvectors.transpose())
}
