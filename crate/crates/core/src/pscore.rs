//! The pseudo-score test for a changepoint in a segmented covariate.
//!
//! For a null fit with hat matrix `A` and the segmented term averaged over `K`
//! fixed candidate changepoints, `φ̄ = K⁻¹ Σ_k φ(z, ψ_k)`, the statistic
//!
//! ```text
//! s0 = φ̄ᵀ (I - A) y / { σ² φ̄ᵀ (I - A) φ̄ }^½
//! ```
//!
//! is standard Normal under the no-change hypothesis. Binomial fits use the
//! converged IRLS quantities: numerator `φ̄ᵀ (y - μ̂)`, variance `φ̄ᵀ W (I - A) φ̄`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, DesignMatrix, Family, FitOptions, NullFit};
use crate::normal::Alternative;

/// Number of candidate changepoints averaged into `φ̄` unless told otherwise.
pub const DEFAULT_K: usize = 10;

/// Above this many observations the changepoint grid switches to quantiles.
const MAX_EXACT_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    /// Level shift `I(z > ψ)`.
    #[default]
    Jump,
    /// Slope change `(z - ψ)₊`.
    BrokenLine,
}

impl std::str::FromStr for SegmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jump" => Ok(SegmentKind::Jump),
            "broken-line" | "broken_line" | "break" => Ok(SegmentKind::BrokenLine),
            other => Err(Error::invalid(format!("unknown segment kind `{other}`"))),
        }
    }
}

/// How the `K` candidate changepoints are laid out over the covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiPlacement {
    /// `K` evenly spaced interior points of `[min z, max z]`.
    #[default]
    EvenRange,
    /// Type-7 sample quantiles of `z` at probabilities `k/(K+1)`.
    Quantile,
}

pub(crate) fn range(z: &[f64]) -> (f64, f64) {
    z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn check_interior(z: &[f64], psi: f64) -> Result<()> {
    let (lo, hi) = range(z);
    if !(psi > lo && psi < hi) {
        return Err(Error::PsiOutOfRange { psi, lo, hi });
    }
    Ok(())
}

/// Segmented term `φ(z, ψ)`; `ψ` must lie strictly inside the range of `z`.
pub fn phi(z: &[f64], psi: f64, kind: SegmentKind) -> Result<Vec<f64>> {
    check_interior(z, psi)?;
    Ok(phi_unchecked(z, psi, kind))
}

pub(crate) fn phi_unchecked(z: &[f64], psi: f64, kind: SegmentKind) -> Vec<f64> {
    z.iter()
        .map(|&v| match kind {
            SegmentKind::Jump => f64::from(u8::from(v > psi)),
            SegmentKind::BrokenLine => (v - psi).max(0.0),
        })
        .collect()
}

/// Type-7 quantile (linear interpolation of order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted_copy(z: &[f64]) -> Vec<f64> {
    let mut s = z.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// `K` candidate changepoints with the default placement.
pub fn candidate_psis(z: &[f64], k: usize) -> Result<Vec<f64>> {
    candidate_psis_with(z, k, PsiPlacement::default())
}

/// Candidate changepoints, deduplicated and strictly interior.
pub fn candidate_psis_with(z: &[f64], k: usize, placement: PsiPlacement) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if z.len() < 3 {
        return Err(Error::invalid("need at least 3 covariate values"));
    }
    let (lo, hi) = range(z);
    if !(hi > lo) {
        return Err(Error::DegenerateCovariate);
    }
    let raw: Vec<f64> = match placement {
        PsiPlacement::EvenRange => (1..=k)
            .map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64)
            .collect(),
        PsiPlacement::Quantile => {
            let sorted = sorted_copy(z);
            (1..=k)
                .map(|i| quantile_sorted(&sorted, i as f64 / (k + 1) as f64))
                .collect()
        }
    };
    let mut out: Vec<f64> = Vec::with_capacity(k);
    for v in raw {
        if v > lo && v < hi && out.last().is_none_or(|&last| v > last) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateCovariate);
    }
    Ok(out)
}

/// Candidate changepoints `{ψ_k}` for a segmented covariate `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedTermSpec {
    pub kind: SegmentKind,
    pub psis: Vec<f64>,
    pub z: Vec<f64>,
}

impl SegmentedTermSpec {
    pub fn new(kind: SegmentKind, z: Vec<f64>, psis: Vec<f64>) -> Result<Self> {
        if psis.is_empty() {
            return Err(Error::invalid("need at least one candidate changepoint"));
        }
        if psis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("candidate changepoints must be strictly increasing"));
        }
        for &p in &psis {
            check_interior(&z, p)?;
        }
        Ok(Self { kind, psis, z })
    }

    /// Default layout: `K` evenly spaced interior candidates, with `K` reduced
    /// to `n - 2` for very short series.
    pub fn from_covariate(z: Vec<f64>, kind: SegmentKind, k: usize) -> Result<Self> {
        let k = k.min(z.len().saturating_sub(2)).max(1);
        let psis = candidate_psis(&z, k)?;
        Self::new(kind, z, psis)
    }

    pub fn k(&self) -> usize {
        self.psis.len()
    }

    /// Elementwise mean of `φ(z, ψ_k)` over the candidates.
    pub fn phi_bar(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.z.len()];
        for &psi in &self.psis {
            for (a, p) in acc.iter_mut().zip(phi_unchecked(&self.z, psi, self.kind)) {
                *a += p;
            }
        }
        let k = self.psis.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum DispersionMode {
    /// `RSS/(n - p)` of the null fit.
    #[default]
    NullFit,
    /// Residual variance of the best single-changepoint fit.
    AltFit,
    Supplied(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionSource {
    Supplied,
    NullFit,
    AltFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PScoreOptions {
    pub family: Family,
    /// Known offset on the linear-predictor scale (binomial only).
    pub offset: Option<Vec<f64>>,
    pub dispersion: DispersionMode,
    pub alternative: Alternative,
    pub fit: FitOptions,
    /// Also run the grid changepoint estimate.
    pub estimate_psi: bool,
}

impl Default for PScoreOptions {
    fn default() -> Self {
        Self {
            family: Family::GaussianIdentity,
            offset: None,
            dispersion: DispersionMode::NullFit,
            alternative: Alternative::TwoSided,
            fit: FitOptions::default(),
            estimate_psi: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PScoreResult {
    pub s0: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub dispersion_used: f64,
    pub dispersion_source: DispersionSource,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_hat: Option<f64>,
    pub phi_bar: Vec<f64>,
}

/// Fits the null model for the declared family.
pub fn fit_null(y: &[f64], x: &DesignMatrix, opts: &PScoreOptions) -> Result<NullFit> {
    match opts.family {
        Family::GaussianIdentity => model::fit_null_gaussian(y, x),
        Family::BinomialLogit => {
            let zeros;
            let offset = match &opts.offset {
                Some(o) => o.as_slice(),
                None => {
                    zeros = vec![0.0; y.len()];
                    &zeros
                }
            };
            model::fit_null_binomial(y, x, offset, &opts.fit)
        }
    }
}

/// Numerator and variance factor of the pseudo score for an arbitrary term.
fn score_parts(fit: &NullFit, y: &[f64], term: &[f64]) -> (f64, f64, f64) {
    let t = DVector::from_column_slice(term);
    let num = t.dot(&fit.residuals(y));
    // (I - A) t
    let resid_t = &t - &fit.hat * &t;
    let (den, scale) = match fit.family {
        Family::GaussianIdentity => (t.dot(&resid_t), t.norm_squared()),
        Family::BinomialLogit => (
            t.component_mul(&fit.weights).dot(&resid_t),
            t.component_mul(&fit.weights).dot(&t),
        ),
    };
    (num, den, scale)
}

fn identifiable(den: f64, scale: f64) -> bool {
    den > 1e-12 * scale.max(f64::MIN_POSITIVE) && den > 0.0
}

/// Pseudo-score statistic from an existing null fit.
pub fn pscore_from_fit(
    fit: &NullFit,
    y: &[f64],
    spec: &SegmentedTermSpec,
    dispersion: f64,
    source: DispersionSource,
    alternative: Alternative,
) -> Result<PScoreResult> {
    if spec.z.len() != y.len() {
        return Err(Error::Dimension {
            what: "segmented covariate",
            expected: y.len(),
            found: spec.z.len(),
        });
    }
    if !(dispersion > 0.0) || !dispersion.is_finite() {
        return Err(Error::DegenerateDispersion);
    }
    let phi_bar = spec.phi_bar();
    let (num, den, scale) = score_parts(fit, y, &phi_bar);
    if !identifiable(den, scale) {
        return Err(Error::NonIdentifiable);
    }
    let s0 = num / (dispersion * den).sqrt();
    Ok(PScoreResult {
        s0,
        p_value: alternative.p_value(s0),
        alternative,
        dispersion_used: dispersion,
        dispersion_source: source,
        k: spec.k(),
        psi_hat: None,
        phi_bar,
    })
}

/// Fits the null model and computes `s0` with its Normal p-value.
pub fn pscore_statistic(
    y: &[f64],
    x: &DesignMatrix,
    spec: &SegmentedTermSpec,
    opts: &PScoreOptions,
) -> Result<PScoreResult> {
    let fit = fit_null(y, x, opts)?;
    let (dispersion, source) = match (opts.dispersion, opts.family) {
        (DispersionMode::Supplied(d), _) => (d, DispersionSource::Supplied),
        (_, Family::BinomialLogit) => (1.0, DispersionSource::NullFit),
        (DispersionMode::NullFit, _) => (fit.dispersion, DispersionSource::NullFit),
        (DispersionMode::AltFit, _) => (
            alt_fit_dispersion(y, x, &spec.z, spec.kind)?,
            DispersionSource::AltFit,
        ),
    };
    let mut res = pscore_from_fit(&fit, y, spec, dispersion, source, opts.alternative)?;
    if opts.estimate_psi {
        res.psi_hat = Some(estimate_from_fit(&fit, y, &spec.z, spec.kind, None)?);
    }
    Ok(res)
}

/// Residual variance `RSS/(n - p - 1)` of the best single-changepoint OLS fit.
pub fn alt_fit_dispersion(y: &[f64], x: &DesignMatrix, z: &[f64], kind: SegmentKind) -> Result<f64> {
    let grid = changepoint_grid(z, None)?;
    let n = y.len();
    let p = x.ncols() + 1;
    if n <= p {
        return Err(Error::DegreesOfFreedom { n, p });
    }
    let mut best = f64::INFINITY;
    for psi in grid {
        let term = phi_unchecked(z, psi, kind);
        let Ok(xa) = x.with_column("phi", &term) else { continue };
        match model::fit_null_gaussian(y, &xa) {
            Ok(fit) => best = best.min(fit.dispersion * (n - p) as f64),
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    if !best.is_finite() {
        return Err(Error::NonIdentifiable);
    }
    Ok(best / (n - p) as f64)
}

/// Candidate grid for the changepoint estimate: midpoints between consecutive
/// distinct covariate values for `n <= 200`, else 200 interior quantiles.
pub fn changepoint_grid(z: &[f64], grid_size: Option<usize>) -> Result<Vec<f64>> {
    let sorted = sorted_copy(z);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return Err(Error::DegenerateCovariate);
    }
    let size = grid_size.unwrap_or(if z.len() <= MAX_EXACT_GRID { 0 } else { MAX_EXACT_GRID });
    let mut grid: Vec<f64> = if size == 0 {
        let mut distinct = sorted.clone();
        distinct.dedup();
        distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    } else {
        (1..=size)
            .map(|k| quantile_sorted(&sorted, k as f64 / (size + 1) as f64))
            .collect()
    };
    grid.retain(|&v| v > lo && v < hi);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::DegenerateCovariate);
    }
    Ok(grid)
}

fn estimate_from_fit(
    fit: &NullFit,
    y: &[f64],
    z: &[f64],
    kind: SegmentKind,
    grid_size: Option<usize>,
) -> Result<f64> {
    let grid = changepoint_grid(z, grid_size)?;
    let mut best: Option<(f64, f64)> = None;
    for psi in grid {
        let term = phi_unchecked(z, psi, kind);
        let (num, den, scale) = score_parts(fit, y, &term);
        if !identifiable(den, scale) {
            continue;
        }
        let stat = num.abs() / den.sqrt();
        if best.is_none_or(|(_, b)| stat > b) {
            best = Some((psi, stat));
        }
    }
    best.map(|(psi, _)| psi).ok_or(Error::NonIdentifiable)
}

/// Grid changepoint estimate: the candidate maximizing the absolute
/// single-changepoint score statistic (smallest maximizer on ties).
pub fn estimate_changepoint(
    y: &[f64],
    x: &DesignMatrix,
    z: &[f64],
    kind: SegmentKind,
    grid_size: Option<usize>,
) -> Result<f64> {
    let fit = model::fit_null_gaussian(y, x)?;
    estimate_from_fit(&fit, y, z, kind, grid_size)
}

/// Binomial-family variant of [`estimate_changepoint`].
pub fn estimate_changepoint_with(
    y: &[f64],
    x: &DesignMatrix,
    z: &[f64],
    kind: SegmentKind,
    opts: &PScoreOptions,
) -> Result<f64> {
    let fit = fit_null(y, x, opts)?;
    estimate_from_fit(&fit, y, z, kind, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_design;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn phi_forms() {
        let z = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(phi(&z, 2.5, SegmentKind::Jump).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(phi(&z, 2.5, SegmentKind::BrokenLine).unwrap(), vec![0.0, 0.0, 0.5, 1.5]);
        assert!(matches!(phi(&z, 1.0, SegmentKind::Jump), Err(Error::PsiOutOfRange { .. })));
        assert!(matches!(phi(&z, 4.0, SegmentKind::BrokenLine), Err(Error::PsiOutOfRange { .. })));
    }

    #[test]
    fn single_candidate_on_tenths() {
        let z: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        // range [0.1, 1.0] split in half; type-7 median is also 0.55
        let even = candidate_psis(&z, 1).unwrap();
        let quant = candidate_psis_with(&z, 1, PsiPlacement::Quantile).unwrap();
        assert!((even[0] - 0.55).abs() < 1e-12);
        assert!((quant[0] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn candidates_are_interior_and_increasing() {
        let z: Vec<f64> = (1..=9).map(|i| i as f64 / 9.0).collect();
        for placement in [PsiPlacement::EvenRange, PsiPlacement::Quantile] {
            let psis = candidate_psis_with(&z, 9, placement).unwrap();
            assert!(psis.len() <= 9);
            assert!(psis.iter().all(|&p| p > z[0] && p < z[8]));
        }
        let z: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let psis = candidate_psis(&z, 10).unwrap();
        assert_eq!(psis.len(), 10);
        assert!(psis.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn quantile_placement_drops_tied_values() {
        let z = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0];
        let psis = candidate_psis_with(&z, 5, PsiPlacement::Quantile).unwrap();
        assert!(psis.iter().all(|&p| p > 0.0 && p < 2.0));
        assert!(psis.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        assert_eq!(candidate_psis(&[2.0; 8], 3), Err(Error::DegenerateCovariate));
    }

    #[test]
    fn phi_bar_single_and_pair() {
        let z: Vec<f64> = (1..=6).map(f64::from).collect();
        let spec = SegmentedTermSpec::new(SegmentKind::BrokenLine, z.clone(), vec![3.2]).unwrap();
        assert_eq!(spec.phi_bar(), phi(&z, 3.2, SegmentKind::BrokenLine).unwrap());

        let spec =
            SegmentedTermSpec::new(SegmentKind::Jump, vec![0.1, 0.5, 0.9], vec![0.25, 0.75]).unwrap();
        assert_eq!(spec.phi_bar(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn phi_bar_matches_direct_summation() {
        let z: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let spec = SegmentedTermSpec::from_covariate(z.clone(), SegmentKind::BrokenLine, 10).unwrap();
        let got = spec.phi_bar();
        for (i, &zi) in z.iter().enumerate() {
            let mut s = 0.0;
            for k in 1..=10 {
                let psi = 0.05 + 0.95 * k as f64 / 11.0;
                if zi > psi {
                    s += zi - psi;
                }
            }
            assert!((got[i] - s / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn response_in_null_space_gives_zero() {
        let z: Vec<f64> = (1..=12).map(f64::from).collect();
        let x = DesignMatrix::intercept_only(12).unwrap();
        let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::Jump, 10).unwrap();
        let opts = PScoreOptions {
            dispersion: DispersionMode::Supplied(1.0),
            ..Default::default()
        };
        let res = pscore_statistic(&[3.0; 12], &x, &spec, &opts).unwrap();
        assert!(res.s0.abs() < 1e-12);
        assert!((res.p_value - 1.0).abs() < 1e-12);
        assert_eq!(res.dispersion_source, DispersionSource::Supplied);

        let err = pscore_statistic(&[3.0; 12], &x, &spec, &PScoreOptions::default()).unwrap_err();
        assert_eq!(err, Error::DegenerateDispersion);
    }

    #[test]
    fn term_in_column_space_is_non_identifiable() {
        // with [1, z] in the null model a single broken line at ψ below every
        // observation but one is not collinear, so use a jump that is constant
        let z: Vec<f64> = (1..=10).map(f64::from).collect();
        let x = build_design(10, &[z.clone()], true).unwrap();
        let y: Vec<f64> = z.iter().map(|v| v * 0.3 + (v * 1.7).sin()).collect();
        let fit = model::fit_null_gaussian(&y, &x).unwrap();
        let spec = SegmentedTermSpec::new(SegmentKind::Jump, z.clone(), vec![5.5]).unwrap();
        // fabricate a spec whose φ̄ equals z itself
        let mut fake = spec.clone();
        fake.kind = SegmentKind::BrokenLine;
        fake.psis = vec![0.0];
        let res = pscore_from_fit(&fit, &y, &fake, 1.0, DispersionSource::Supplied, Alternative::TwoSided);
        assert_eq!(res.unwrap_err(), Error::NonIdentifiable);
        assert!(pscore_from_fit(&fit, &y, &spec, 1.0, DispersionSource::Supplied, Alternative::TwoSided).is_ok());
    }

    #[test]
    fn noiseless_jump_is_recovered() {
        let n = 50;
        let z: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let y: Vec<f64> = z.iter().map(|&v| f64::from(u8::from(v > 0.5))).collect();
        let x = DesignMatrix::intercept_only(n).unwrap();
        let psi = estimate_changepoint(&y, &x, &z, SegmentKind::Jump, None).unwrap();
        assert!((0.48..=0.52).contains(&psi), "psi = {psi}");
    }

    #[test]
    fn estimate_matches_exhaustive_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 12;
        let z: Vec<f64> = (1..=n).map(f64::from).collect();
        let y: Vec<f64> = z
            .iter()
            .map(|&v| if v > 7.0 { 1.0 } else { 0.0 } + 0.6 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let x = DesignMatrix::intercept_only(n as usize).unwrap();
        let psi = estimate_changepoint(&y, &x, &z, SegmentKind::Jump, None).unwrap();

        // Oracle: for an intercept-only null the jump score at split j is the
        // scaled mean difference √(j(n-j)/n)·(ȳ₂ - ȳ₁).
        let nn = n as usize;
        let mut best = (0usize, f64::NEG_INFINITY);
        for j in 1..nn {
            let m1 = y[..j].iter().sum::<f64>() / j as f64;
            let m2 = y[j..].iter().sum::<f64>() / (nn - j) as f64;
            let stat = ((j * (nn - j)) as f64 / nn as f64).sqrt() * (m2 - m1).abs();
            if stat > best.1 {
                best = (j, stat);
            }
        }
        let expected = 0.5 * (z[best.0 - 1] + z[best.0]);
        assert_eq!(psi, expected);
    }

    #[test]
    fn binomial_pscore_runs_on_working_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from((i * 5 + 1) % 3 == 0))).collect();
        let z: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let x = DesignMatrix::intercept_only(n).unwrap();
        let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::Jump, 10).unwrap();
        let opts = PScoreOptions {
            family: Family::BinomialLogit,
            offset: Some(b.iter().map(|v| -v).collect()),
            ..Default::default()
        };
        let res = pscore_statistic(&y, &x, &spec, &opts).unwrap();
        assert!(res.s0.is_finite());
        assert_eq!(res.dispersion_used, 1.0);
    }

    #[test]
    fn alt_fit_dispersion_is_smaller_for_a_clear_jump() {
        let n = 30;
        let z: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = z
            .iter()
            .map(|&v| 2.0 * f64::from(u8::from(v > 0.5)) + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let x = DesignMatrix::intercept_only(n).unwrap();
        let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::Jump, 10).unwrap();
        let null = pscore_statistic(&y, &x, &spec, &PScoreOptions::default()).unwrap();
        let alt = pscore_statistic(
            &y,
            &x,
            &spec,
            &PScoreOptions {
                dispersion: DispersionMode::AltFit,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(alt.dispersion_source, DispersionSource::AltFit);
        assert!(alt.dispersion_used < null.dispersion_used);
        assert!(alt.s0.abs() > null.s0.abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn location_and_scale(noise in prop::collection::vec(-2.0f64..2.0, 20), c in -50.0f64..50.0, b in prop_oneof![-5.0f64..-0.2, 0.2f64..5.0]) {
            let z: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
            let x = build_design(20, &[z.clone()], true).unwrap();
            let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::BrokenLine, 10).unwrap();
            let opts = PScoreOptions::default();
            let base = pscore_statistic(&noise, &x, &spec, &opts).unwrap();
            let shifted: Vec<f64> = noise.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = noise.iter().map(|v| v * b).collect();
            let s_shift = pscore_statistic(&shifted, &x, &spec, &opts).unwrap();
            let s_scale = pscore_statistic(&scaled, &x, &spec, &opts).unwrap();
            prop_assert!((base.s0 - s_shift.s0).abs() < 1e-9);
            prop_assert!((b.signum() * base.s0 - s_scale.s0).abs() < 1e-9);
        }
    }
}
