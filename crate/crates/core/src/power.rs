//! Analytic power and sample size for the pseudo-score test against a
//! broken-line alternative, plus segmented fits for post-hoc power.
//!
//! Under `y = Xβ + δ (z - ψ)₊ + ε` the statistic `s0` is Normal with unit
//! variance and mean
//!
//! ```text
//! E₁ = δ φ̄ᵀ (I - A) (z - ψ)₊ / { σ² φ̄ᵀ (I - A) φ̄ }^½
//! ```
//!
//! so power is a pair of Normal tail probabilities.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covspec::{realize_covariate_with, CovariateSpec, ProbabilityGrid};
use crate::error::{Error, Result};
use crate::model::{DesignMatrix, Projector};
use crate::normal::{self, Alternative};
use crate::pscore::{
    candidate_psis_with, phi_unchecked, quantile_sorted, range, sorted_copy, PsiPlacement,
    SegmentKind, SegmentedTermSpec, DEFAULT_K,
};
use crate::rng::replicate_rng;

/// Smallest sample size considered by [`sample_size`].
pub const MIN_SAMPLE_SIZE: usize = 5;
/// Sample sizes beyond this are reported as unreachable.
pub const MAX_SAMPLE_SIZE: usize = 10_000_000;
/// Width of the downward scan that absorbs ripple from the quantile grid.
const RIPPLE_SCAN: usize = 4;

fn default_alpha() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_power: Option<f64>,
    #[serde(default, alias = "z")]
    pub z_spec: CovariateSpec,
    pub psi: f64,
    pub delta: f64,
    pub sigma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub alternative: Alternative,
    /// Additional null-model columns, one vector of length `n` per covariate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_covariates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub grid: ProbabilityGrid,
    #[serde(default)]
    pub psi_placement: PsiPlacement,
}

impl PowerRequest {
    /// Request for the power at a fixed `n`.
    pub fn at_n(n: usize, z_spec: CovariateSpec, psi: f64, delta: f64, sigma: f64) -> Self {
        Self {
            n: Some(n),
            target_power: None,
            z_spec,
            psi,
            delta,
            sigma,
            alpha: default_alpha(),
            alternative: Alternative::TwoSided,
            extra_covariates: None,
            grid: ProbabilityGrid::default(),
            psi_placement: PsiPlacement::default(),
        }
    }

    /// Request for the sample size reaching `target_power`.
    pub fn for_target(target_power: f64, z_spec: CovariateSpec, psi: f64, delta: f64, sigma: f64) -> Self {
        Self {
            n: None,
            target_power: Some(target_power),
            ..Self::at_n(0, z_spec, psi, delta, sigma)
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_alternative(mut self, alternative: Alternative) -> Self {
        self.alternative = alternative;
        self
    }

    fn validate_common(&self) -> Result<()> {
        for (name, v) in [("psi", self.psi), ("delta", self.delta), ("sigma", self.sigma)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be > 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    fn with_n(&self, n: usize) -> Self {
        Self {
            n: Some(n),
            target_power: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub power: f64,
    pub e1: f64,
    pub n_used: usize,
    pub z_realized: Vec<f64>,
}

/// Null design `[1, z, extras...]` used for power work.
pub fn power_design(z: &[f64], extras: Option<&[Vec<f64>]>) -> Result<DesignMatrix> {
    let mut cols = vec![z.to_vec()];
    if let Some(extra) = extras {
        cols.extend(extra.iter().cloned());
    }
    crate::model::build_design(z.len(), &cols, true)
}

/// Broken-line averaged term and projector, reusable across `(ψ, δ, σ)`.
struct AltMeanKernel {
    proj: Projector,
    phi_bar: DVector<f64>,
    denom: f64,
}

impl AltMeanKernel {
    fn new(z: &[f64], x: &DesignMatrix, placement: PsiPlacement) -> Result<Self> {
        if z.len() != x.nrows() {
            return Err(Error::Dimension {
                what: "segmented covariate",
                expected: x.nrows(),
                found: z.len(),
            });
        }
        let k = DEFAULT_K.min(z.len().saturating_sub(2)).max(1);
        let psis = candidate_psis_with(z, k, placement)?;
        let spec = SegmentedTermSpec::new(SegmentKind::BrokenLine, z.to_vec(), psis)?;
        let phi_bar = DVector::from_vec(spec.phi_bar());
        let proj = Projector::new(x)?;
        let denom = proj.residual_inner(&phi_bar, &phi_bar);
        if !(denom > 1e-12 * phi_bar.norm_squared()) {
            return Err(Error::NonIdentifiable);
        }
        Ok(Self { proj, phi_bar, denom })
    }

    fn e1(&self, z: &[f64], psi: f64, delta: f64, sigma: f64) -> f64 {
        let hinge = DVector::from_vec(phi_unchecked(z, psi, SegmentKind::BrokenLine));
        let num = self.proj.residual_inner(&self.phi_bar, &hinge);
        delta * num / (sigma * sigma * self.denom).sqrt()
    }
}

fn check_psi(z: &[f64], psi: f64) -> Result<()> {
    let (lo, hi) = range(z);
    if !(psi > lo && psi < hi) {
        return Err(Error::PsiOutOfRange { psi, lo, hi });
    }
    Ok(())
}

/// Mean of `s0` under a broken-line alternative with slope change `delta`.
pub fn expected_s0(z: &[f64], psi: f64, delta: f64, sigma: f64, x: &DesignMatrix) -> Result<f64> {
    expected_s0_with(z, psi, delta, sigma, x, PsiPlacement::default())
}

pub fn expected_s0_with(
    z: &[f64],
    psi: f64,
    delta: f64,
    sigma: f64,
    x: &DesignMatrix,
    placement: PsiPlacement,
) -> Result<f64> {
    check_psi(z, psi)?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be > 0"));
    }
    Ok(AltMeanKernel::new(z, x, placement)?.e1(z, psi, delta, sigma))
}

/// Rejection probability of a level-`alpha` Normal test whose statistic has mean `e1`.
pub fn power_from_e1(e1: f64, alpha: f64, alternative: Alternative) -> f64 {
    match alternative {
        Alternative::TwoSided => {
            let c = normal::quantile(1.0 - alpha / 2.0);
            normal::cdf(-c + e1) + normal::cdf(-c - e1)
        }
        Alternative::Greater => normal::cdf(-normal::quantile(1.0 - alpha) + e1),
        Alternative::Less => normal::cdf(-normal::quantile(1.0 - alpha) - e1),
    }
}

/// Power at the request's fixed `n`.
pub fn compute_power(req: &PowerRequest) -> Result<PowerResult> {
    req.validate_common()?;
    if req.target_power.is_some() {
        return Err(Error::invalid("set n, not target_power, to compute power"));
    }
    let n = match (req.n, req.z_spec.fixed_len()) {
        (Some(n), _) => n,
        (None, Some(len)) => len,
        (None, None) => return Err(Error::invalid("n is required")),
    };
    let z = realize_covariate_with(&req.z_spec, n, req.grid)?;
    if let Some(extra) = &req.extra_covariates {
        for col in extra {
            if col.len() != n {
                return Err(Error::Dimension {
                    what: "extra covariate",
                    expected: n,
                    found: col.len(),
                });
            }
        }
    }
    let x = power_design(&z, req.extra_covariates.as_deref())?;
    let e1 = expected_s0_with(&z, req.psi, req.delta, req.sigma, &x, req.psi_placement)?;
    Ok(PowerResult {
        power: power_from_e1(e1, req.alpha, req.alternative),
        e1,
        n_used: n,
        z_realized: z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    pub n: usize,
    pub power_at_n: f64,
    pub target_power: f64,
}

/// Smallest `n >= 5` whose power reaches the request's `target_power`.
///
/// Brackets by doubling, bisects, then scans a few sizes downward because the
/// realized covariate changes with `n` and power can ripple slightly.
pub fn sample_size(req: &PowerRequest) -> Result<SampleSizeResult> {
    req.validate_common()?;
    let target = req
        .target_power
        .ok_or_else(|| Error::invalid("target_power is required"))?;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("target_power must lie in (0, 1)"));
    }
    if target <= req.alpha {
        return Err(Error::TargetBelowSize { target, alpha: req.alpha });
    }
    if req.z_spec.fixed_len().is_some() || req.extra_covariates.is_some() {
        return Err(Error::Config(
            "sample size needs a covariate that can be realized at any n".into(),
        ));
    }
    if req.delta == 0.0 {
        return Err(Error::Unreachable { target, max_n: MAX_SAMPLE_SIZE });
    }

    // A size where ψ is not interior (or the term is degenerate) cannot reach
    // the target; the search moves past it.
    let power_at = |n: usize| -> Result<f64> {
        match compute_power(&req.with_n(n)) {
            Ok(r) => Ok(r.power),
            Err(Error::PsiOutOfRange { .. } | Error::NonIdentifiable | Error::DegenerateCovariate) => Ok(0.0),
            Err(e) => Err(e),
        }
    };
    let done = |n: usize, p: f64| SampleSizeResult { n, power_at_n: p, target_power: target };

    let p_min = power_at(MIN_SAMPLE_SIZE)?;
    if p_min >= target {
        return Ok(done(MIN_SAMPLE_SIZE, p_min));
    }
    let mut lo = MIN_SAMPLE_SIZE;
    let mut hi = 2 * MIN_SAMPLE_SIZE;
    let mut p_hi = power_at(hi)?;
    while p_hi < target {
        if hi >= MAX_SAMPLE_SIZE {
            return Err(Error::Unreachable { target, max_n: MAX_SAMPLE_SIZE });
        }
        lo = hi;
        hi = (2 * hi).min(MAX_SAMPLE_SIZE);
        p_hi = power_at(hi)?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = power_at(mid)?;
        if p >= target {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
        }
    }
    let mut best = (hi, p_hi);
    let floor = hi.saturating_sub(RIPPLE_SCAN).max(MIN_SAMPLE_SIZE);
    for m in (floor..hi).rev() {
        let p = power_at(m)?;
        if p >= target {
            best = (m, p);
        }
    }
    // keep walking down while the window's lower edge still passes
    while best.0 == floor && best.0 > MIN_SAMPLE_SIZE {
        let p = power_at(best.0 - 1)?;
        if p < target {
            break;
        }
        best = (best.0 - 1, p);
    }
    Ok(done(best.0, best.1))
}

/// A single-changepoint broken-line fit `y = Xβ + δ (z - ψ)₊ + ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit {
    pub psi_hat: f64,
    pub delta_hat: f64,
    pub beta_hat: Vec<f64>,
    pub sigma_hat: f64,
    /// Covariance of `(δ̂, ψ̂)`.
    pub cov_delta_psi: [[f64; 2]; 2],
    pub rss: f64,
    pub fitted: Vec<f64>,
}

fn rss_at(y: &DVector<f64>, x: &DesignMatrix, z: &[f64], psi: f64) -> Option<f64> {
    let xa = x.with_column("hinge", &phi_unchecked(z, psi, SegmentKind::BrokenLine)).ok()?;
    let proj = Projector::new(&xa).ok()?;
    Some(proj.residualize(y).norm_squared())
}

/// Least squares coefficients and `(ZᵀZ)⁻¹` for a full-rank design.
fn ols(y: &DVector<f64>, z: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let qr = z.clone().qr();
    let r = qr.r();
    let beta = r
        .solve_upper_triangular(&qr.q().tr_mul(y))
        .ok_or(Error::RankDeficient { rank: 0, cols: z.ncols() })?;
    let r_inv = r
        .try_inverse()
        .ok_or(Error::RankDeficient { rank: 0, cols: z.ncols() })?;
    Ok((beta, &r_inv * r_inv.transpose()))
}

/// Profile grid over the quantiles `0.02, 0.03, ..., 0.98` of `z` that leave
/// at least two distinct covariate values on each side; with only one, the
/// linearization regressors are collinear with `[1, z]`.
fn profile_grid(z: &[f64]) -> Vec<f64> {
    let sorted = sorted_copy(z);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 4 {
        return Vec::new();
    }
    let (lo, hi) = (distinct[1], distinct[distinct.len() - 2]);
    let mut grid: Vec<f64> = (2..=98)
        .map(|k| quantile_sorted(&sorted, k as f64 / 100.0))
        .filter(|&v| v >= lo && v < hi)
        .collect();
    grid.dedup();
    grid
}

/// Fits a broken line in `z` on top of the null design `x` (which should
/// contain the linear `z` term).
///
/// `ψ̂` minimizes the residual sum of squares over a quantile grid, refined by
/// golden-section search; the covariance of `(δ̂, ψ̂)` comes from one
/// linearization step with regressors `(z - ψ̂)₊` and `-I(z > ψ̂)`.
pub fn fit_segmented(y: &[f64], x: &DesignMatrix, z: &[f64]) -> Result<SegmentedFit> {
    let n = y.len();
    if n < 8 {
        return Err(Error::SeriesTooShort { n, min: 8 });
    }
    if z.len() != n || x.nrows() != n {
        return Err(Error::Dimension {
            what: "segmented fit inputs",
            expected: n,
            found: if z.len() != n { z.len() } else { x.nrows() },
        });
    }
    let (zmin, zmax) = range(z);
    if !(zmax > zmin) {
        return Err(Error::DegenerateCovariate);
    }
    let p = x.ncols();
    if n <= p + 2 {
        return Err(Error::DegreesOfFreedom { n, p: p + 2 });
    }
    let yv = DVector::from_column_slice(y);

    let grid = profile_grid(z);
    let mut best: Option<(usize, f64)> = None;
    for (i, &psi) in grid.iter().enumerate() {
        if let Some(rss) = rss_at(&yv, x, z, psi) {
            if best.is_none_or(|(_, b)| rss < b) {
                best = Some((i, rss));
            }
        }
    }
    let (i_best, rss_best) = best.ok_or(Error::NonIdentifiable)?;
    let mut psi_hat = grid[i_best];

    let a = if i_best > 0 { grid[i_best - 1] } else { grid[0] };
    let b = if i_best + 1 < grid.len() { grid[i_best + 1] } else { grid[grid.len() - 1] };
    if b > a {
        let (psi_ref, rss_ref) = golden_min(|t| rss_at(&yv, x, z, t).unwrap_or(f64::INFINITY), a, b);
        if rss_ref < rss_best {
            psi_hat = psi_ref;
        }
    }

    let hinge = phi_unchecked(z, psi_hat, SegmentKind::BrokenLine);
    let xa = x.with_column("hinge", &hinge)?;
    let (coef, _) = ols(&yv, xa.values())?;
    let delta_hat = coef[p];
    let fitted = xa.values() * &coef;
    let rss = (&yv - &fitted).norm_squared();
    let sigma2 = rss / (n - p - 2) as f64;
    if delta_hat.abs() < 1e-8 {
        return Err(Error::FlatFit);
    }

    let step: Vec<f64> = z.iter().map(|&v| if v > psi_hat { -1.0 } else { 0.0 }).collect();
    let xl = xa.with_column("step", &step)?;
    let (lin, inv) = ols(&yv, xl.values())?;
    let (d, g) = (lin[p], lin[p + 1]);
    let sub = Matrix2::new(inv[(p, p)], inv[(p, p + 1)], inv[(p + 1, p)], inv[(p + 1, p + 1)]) * sigma2;
    // (δ, γ) ↦ (δ, ψ̂ + γ/δ)
    let jac = Matrix2::new(1.0, 0.0, -g / (d * d), 1.0 / d);
    let cov = jac * sub * jac.transpose();
    let cov = 0.5 * (cov + cov.transpose());

    Ok(SegmentedFit {
        psi_hat,
        delta_hat,
        beta_hat: coef.iter().take(p).copied().collect(),
        sigma_hat: sigma2.sqrt(),
        cov_delta_psi: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        rss,
        fitted: fitted.iter().copied().collect(),
    })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-10 * (b - a).abs().max(1e-300);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd { (c, fc) } else { (d, fd) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerInterval {
    pub lower: f64,
    pub upper: f64,
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocResult {
    pub power: f64,
    pub e1: f64,
    pub n_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<PowerInterval>,
    pub fit: SegmentedFit,
}

/// Symmetric square root of a 2×2 covariance, rejecting matrices that are not
/// positive semidefinite.
fn psd_sqrt(cov: &[[f64; 2]; 2]) -> Result<Matrix2<f64>> {
    let m = Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
    if m.iter().any(|v| !v.is_finite()) || (cov[0][1] - cov[1][0]).abs() > 1e-9 * m.abs().max().max(1e-300) {
        return Err(Error::NotPsd);
    }
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.abs().max();
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale.max(1e-300)) {
        return Err(Error::NotPsd);
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix2::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Power at the fitted `(δ̂, ψ̂, σ̂)`, with an optional resampling interval from
/// `ci_draws` bivariate Normal draws of `(δ, ψ)`.
///
/// Drawn changepoints are clamped to the 2% and 98% quantiles of `z`; `σ̂` is
/// held fixed. Draw `i` uses its own stream of `seed`, so results do not
/// depend on evaluation order.
pub fn posthoc_power(
    fit: &SegmentedFit,
    z: &[f64],
    x: &DesignMatrix,
    alpha: f64,
    alternative: Alternative,
    ci_draws: Option<usize>,
    seed: u64,
) -> Result<PosthocResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let root = psd_sqrt(&fit.cov_delta_psi)?;
    check_psi(z, fit.psi_hat)?;
    let kernel = AltMeanKernel::new(z, x, PsiPlacement::default())?;
    let e1 = kernel.e1(z, fit.psi_hat, fit.delta_hat, fit.sigma_hat);
    let power = power_from_e1(e1, alpha, alternative);

    let interval = match ci_draws {
        None | Some(0) => None,
        Some(draws) => {
            let sorted = sorted_copy(z);
            let (lo, hi) = (quantile_sorted(&sorted, 0.02), quantile_sorted(&sorted, 0.98));
            let mean = Vector2::new(fit.delta_hat, fit.psi_hat);
            let mut powers: Vec<f64> = (0..draws)
                .map(|i| {
                    let mut rng = replicate_rng(seed, i as u64);
                    let e = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let draw = mean + root * e;
                    let psi = draw[1].clamp(lo, hi);
                    power_from_e1(kernel.e1(z, psi, draw[0], fit.sigma_hat), alpha, alternative)
                })
                .collect();
            powers.sort_by(f64::total_cmp);
            Some(PowerInterval {
                lower: quantile_sorted(&powers, 0.025),
                upper: quantile_sorted(&powers, 0.975),
                draws,
                seed,
            })
        }
    };
    Ok(PosthocResult {
        power,
        e1,
        n_used: z.len(),
        interval,
        fit: fit.clone(),
    })
}
