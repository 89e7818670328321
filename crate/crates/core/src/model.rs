//! Regression foundations: design matrices, OLS and binomial IRLS null fits,
//! and the (weighted) hat matrices the pseudo-score statistic is built on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a design is rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// `|eta|` beyond which fitted probabilities are numerically 0 or 1.
const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_names: Vec<String>,
    has_intercept: bool,
}

/// Builds an `n`-row design from covariate columns, prepending a column of
/// ones when `include_intercept` is set. Rank is checked at fit time.
pub fn build_design(
    n: usize,
    covariates: &[Vec<f64>],
    include_intercept: bool,
) -> Result<DesignMatrix> {
    let names: Vec<String> = (1..=covariates.len()).map(|i| format!("x{i}")).collect();
    let cols: Vec<(&str, &[f64])> = names
        .iter()
        .zip(covariates)
        .map(|(name, c)| (name.as_str(), c.as_slice()))
        .collect();
    DesignMatrix::from_columns(n, &cols, include_intercept)
}

impl DesignMatrix {
    pub fn from_columns(
        n: usize,
        columns: &[(&str, &[f64])],
        include_intercept: bool,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::SeriesTooShort { n, min: 2 });
        }
        let p = columns.len() + usize::from(include_intercept);
        if p == 0 {
            return Err(Error::invalid("design needs at least one column"));
        }
        let mut values = DMatrix::zeros(n, p);
        let mut column_names = Vec::with_capacity(p);
        let mut j = 0;
        if include_intercept {
            values.column_mut(0).fill(1.0);
            column_names.push("(Intercept)".to_string());
            j = 1;
        }
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::Dimension {
                    what: "covariate column",
                    expected: n,
                    found: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("column `{name}` has non-finite values")));
            }
            values.column_mut(j).copy_from_slice(col);
            column_names.push((*name).to_string());
            j += 1;
        }
        Ok(Self {
            values,
            column_names,
            has_intercept: include_intercept,
        })
    }

    pub fn intercept_only(n: usize) -> Result<Self> {
        Self::from_columns(n, &[], true)
    }

    /// Returns a copy with one more column appended.
    pub fn with_column(&self, name: &str, col: &[f64]) -> Result<Self> {
        let n = self.nrows();
        if col.len() != n {
            return Err(Error::Dimension {
                what: "appended column",
                expected: n,
                found: col.len(),
            });
        }
        let p = self.ncols();
        let mut values = self.values.clone().resize_horizontally(p + 1, 0.0);
        values.column_mut(p).copy_from_slice(col);
        let mut column_names = self.column_names.clone();
        column_names.push(name.to_string());
        Ok(Self {
            values,
            column_names,
            has_intercept: self.has_intercept,
        })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    /// Numerical rank using the relative singular-value threshold [`RANK_TOL`].
    pub fn rank(&self) -> usize {
        numerical_rank(&self.values)
    }

    fn check_full_rank(&self) -> Result<()> {
        let (n, p) = (self.nrows(), self.ncols());
        if n <= p {
            return Err(Error::DegreesOfFreedom { n, p });
        }
        let rank = self.rank();
        if rank < p {
            return Err(Error::RankDeficient { rank, cols: p });
        }
        Ok(())
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= RANK_TOL * max).count()
}

/// Orthogonal projection onto the column space of a full-rank design.
///
/// Holds the thin `Q` factor so residualizing costs `O(n p)` without forming
/// the `n x n` hat matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    q: DMatrix<f64>,
}

impl Projector {
    pub fn new(x: &DesignMatrix) -> Result<Self> {
        x.check_full_rank()?;
        let q = x.values.clone().qr().q();
        Ok(Self { q })
    }

    /// `(I - A) v`.
    pub fn residualize(&self, v: &DVector<f64>) -> DVector<f64> {
        let coef = self.q.tr_mul(v);
        v - &self.q * coef
    }

    /// `uᵀ (I - A) v`.
    pub fn residual_inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let qu = self.q.tr_mul(u);
        let qv = self.q.tr_mul(v);
        u.dot(v) - qu.dot(&qv)
    }

    pub fn hat(&self) -> DMatrix<f64> {
        &self.q * self.q.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianIdentity,
    BinomialLogit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_irls_iter: usize,
    /// Convergence tolerance on the relative deviance change.
    pub irls_tol: f64,
    /// Bound on Rasch ability estimates, in logits.
    pub theta_clamp: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_irls_iter: 50,
            irls_tol: 1e-9,
            theta_clamp: 6.0,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_irls_iter == 0 {
            return Err(Error::invalid("max_irls_iter must be >= 1"));
        }
        if !(self.irls_tol > 0.0) {
            return Err(Error::invalid("irls_tol must be > 0"));
        }
        Ok(())
    }
}

/// A fitted no-changepoint model.
#[derive(Debug, Clone)]
pub struct NullFit {
    pub family: Family,
    pub beta_hat: DVector<f64>,
    /// Null hat matrix `A`; `X(XᵀWX)⁻¹XᵀW` for the binomial family.
    pub hat: DMatrix<f64>,
    /// `RSS/(n - p)` for Gaussian fits, fixed at 1 for binomial fits.
    pub dispersion: f64,
    /// IRLS working weights `μ(1-μ)`; all ones for Gaussian fits.
    pub weights: DVector<f64>,
    pub working_response: DVector<f64>,
    /// Fitted means on the response scale.
    pub fitted: DVector<f64>,
    pub offset: DVector<f64>,
    pub iterations: usize,
}

impl NullFit {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    pub fn rank(&self) -> usize {
        self.beta_hat.len()
    }

    /// Response residuals `y - μ̂`.
    pub fn residuals(&self, y: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(y) - &self.fitted
    }
}

fn check_response(y: &[f64], x: &DesignMatrix) -> Result<()> {
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            what: "response",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response has non-finite values"));
    }
    Ok(())
}

/// Ordinary least squares null fit via QR.
pub fn fit_null_gaussian(y: &[f64], x: &DesignMatrix) -> Result<NullFit> {
    check_response(y, x)?;
    x.check_full_rank()?;
    let n = x.nrows();
    let p = x.ncols();

    let qr = x.values.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let yv = DVector::from_column_slice(y);
    let qty = q.tr_mul(&yv);
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rank: 0, cols: p })?;
    let fitted = &x.values * &beta_hat;
    let resid = &yv - &fitted;
    // exact fits leave only rounding noise
    let rss = resid.norm_squared();
    let rss = if rss.sqrt() <= 16.0 * n as f64 * f64::EPSILON * yv.norm() { 0.0 } else { rss };

    Ok(NullFit {
        family: Family::GaussianIdentity,
        hat: &q * q.transpose(),
        dispersion: rss / (n - p) as f64,
        weights: DVector::from_element(n, 1.0),
        working_response: yv,
        fitted,
        beta_hat,
        offset: DVector::zeros(n),
        iterations: 1,
    })
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn binomial_deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    y.iter()
        .zip(mu.iter())
        .map(|(&yi, &mi)| {
            if yi > 0.5 {
                -2.0 * mi.ln()
            } else {
                -2.0 * (1.0 - mi).ln()
            }
        })
        .sum()
}

/// Weighted least squares `argmin Σ w (z - Xβ)²` via QR of `W^{1/2} X`.
/// Returns the coefficients and the thin `Q` factor.
fn weighted_ls(
    x: &DMatrix<f64>,
    sqrt_w: &DVector<f64>,
    z: &DVector<f64>,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let mut xw = x.clone();
    for (mut row, &s) in xw.row_iter_mut().zip(sqrt_w.iter()) {
        row *= s;
    }
    let zw = z.component_mul(sqrt_w);
    let qr = xw.qr();
    let q = qr.q();
    let beta = qr.r().solve_upper_triangular(&q.tr_mul(&zw))?;
    Some((beta, q))
}

/// Logistic-regression null fit by iteratively reweighted least squares.
///
/// `offset` enters the linear predictor with a fixed unit coefficient.
pub fn fit_null_binomial(
    y: &[f64],
    x: &DesignMatrix,
    offset: &[f64],
    opts: &FitOptions,
) -> Result<NullFit> {
    opts.validate()?;
    check_response(y, x)?;
    if offset.len() != y.len() {
        return Err(Error::Dimension {
            what: "offset",
            expected: y.len(),
            found: offset.len(),
        });
    }
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("offset has non-finite values"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("binomial response must be 0/1"));
    }
    x.check_full_rank()?;
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if (ones == 0 || ones == y.len()) && offset.iter().all(|&o| o == 0.0) {
        return Err(Error::Boundary(format!(
            "all {} responses are {}",
            y.len(),
            if ones == 0 { 0 } else { 1 }
        )));
    }

    let n = y.len();
    let xv = &x.values;
    let yv = DVector::from_column_slice(y);
    let off = DVector::from_column_slice(offset);

    let mut mu = yv.map(|v| (v + 0.5) / 2.0);
    let mut eta = mu.map(|m| (m / (1.0 - m)).ln());
    let mut dev = binomial_deviance(&yv, &mu);
    let mut beta = DVector::zeros(x.ncols());
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_irls_iter {
        iterations = iter;
        let w = mu.map(|m| m * (1.0 - m));
        let z = DVector::from_fn(n, |i, _| eta[i] - off[i] + (yv[i] - mu[i]) / w[i]);
        let sqrt_w = w.map(f64::sqrt);
        let (b, _) = weighted_ls(xv, &sqrt_w, &z).ok_or(Error::Convergence {
            iterations: iter,
            last_beta: beta.iter().copied().collect(),
        })?;
        beta = b;
        eta = xv * &beta + &off;
        if eta.iter().any(|e| e.abs() > SEPARATION_ETA) {
            return Err(Error::Convergence {
                iterations: iter,
                last_beta: beta.iter().copied().collect(),
            });
        }
        mu = eta.map(logistic);
        let dev_new = binomial_deviance(&yv, &mu);
        let change = (dev_new - dev).abs() / (dev_new.abs() + 0.1);
        dev = dev_new;
        if change < opts.irls_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            iterations,
            last_beta: beta.iter().copied().collect(),
        });
    }

    let w = mu.map(|m| m * (1.0 - m));
    let sqrt_w = w.map(f64::sqrt);
    let working_response = DVector::from_fn(n, |i, _| eta[i] - off[i] + (yv[i] - mu[i]) / w[i]);
    let (_, q) = weighted_ls(xv, &sqrt_w, &working_response).ok_or(Error::RankDeficient {
        rank: 0,
        cols: x.ncols(),
    })?;
    // A = W^{-1/2} Q Qᵀ W^{1/2}
    let sym = &q * q.transpose();
    let hat = DMatrix::from_fn(n, n, |i, j| sym[(i, j)] * sqrt_w[j] / sqrt_w[i]);

    Ok(NullFit {
        family: Family::BinomialLogit,
        beta_hat: beta,
        hat,
        dispersion: 1.0,
        weights: w,
        working_response,
        fitted: mu,
        offset: off,
        iterations,
    })
}
