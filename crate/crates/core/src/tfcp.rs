//! Benchmark tests for a change point.
//!
//! `T_max` is the maximal two-sample pooled t statistic over all split points of a
//! Gaussian sequence; its Worsley transform `W_max` is compared with tabulated
//! critical values. `L_max` is the trimmed likelihood ratio for binary responses
//! under a Rasch model with known item difficulties.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// Worsley critical values of `W_max`: rows are `n`, columns are alpha 0.10, 0.05, 0.01.
#[allow(clippy::approx_constant)]
const WORSLEY_TABLE: [(usize, [f64; 3]); 9] = [
    (10, [3.14, 3.66, 4.93]),
    (15, [2.97, 3.36, 4.32]),
    (20, [2.90, 3.28, 4.13]),
    (25, [2.89, 3.23, 3.94]),
    (30, [2.86, 3.19, 3.86]),
    (35, [2.88, 3.21, 3.87]),
    (40, [2.88, 3.17, 3.77]),
    (45, [2.86, 3.18, 3.79]),
    (50, [2.87, 3.16, 3.79]),
];
const WORSLEY_ALPHAS: [f64; 3] = [0.10, 0.05, 0.01];

/// Andrews' critical value for the trimmed binary LRT at 15% trimming and alpha 0.05.
pub const ANDREWS_CRITICAL_15: f64 = 8.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TmaxResult {
    pub n: usize,
    pub t_max: f64,
    pub w_max: f64,
    /// Signed `t_jn` for `j = 1..n-1` (first-segment mean minus second-segment mean).
    pub per_j: Vec<f64>,
    /// Number of observations in the first segment at the maximum (smallest argmax).
    pub j_hat: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    /// Set when the critical value was taken from the nearest table row.
    #[serde(default)]
    pub critical_extrapolated: bool,
}

impl TmaxResult {
    /// 0-based index of the first observation after the change.
    pub fn change_index(&self) -> usize {
        self.j_hat
    }
}

/// Maximal pooled two-sample t statistic over all split points.
pub fn t_max(series: &Series) -> Result<TmaxResult> {
    series.validate()?;
    t_max_values(&series.y)
}

pub(crate) fn t_max_values(y: &[f64]) -> Result<TmaxResult> {
    let n = y.len();
    if n < 4 {
        return Err(Error::SeriesTooShort { n, min: 4 });
    }
    let nf = n as f64;
    let mut per_j = Vec::with_capacity(n - 1);
    let mut any_spread = false;
    for j in 1..n {
        let (a, b) = y.split_at(j);
        let (ma, ssa) = mean_ss(a);
        let (mb, ssb) = mean_ss(b);
        let s2 = (ssa + ssb) / (nf - 2.0);
        let diff = ma - mb;
        let scale = ((j * (n - j)) as f64 / nf).sqrt();
        let t = if s2 > 0.0 {
            any_spread = true;
            scale * diff / s2.sqrt()
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        per_j.push(t);
    }
    if !any_spread {
        return Err(Error::DegenerateSeries);
    }
    let (idx, t_max) = per_j
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &t)| {
            if t.abs() > bv {
                (i, t.abs())
            } else {
                (bi, bv)
            }
        });
    Ok(TmaxResult {
        n,
        t_max,
        w_max: worsley_transform(t_max, n),
        per_j,
        j_hat: idx + 1,
        critical_value: None,
        alpha: None,
        reject: None,
        critical_extrapolated: false,
    })
}

fn mean_ss(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum())
}

/// Worsley's `W = (n-2)^½ t* / (1 - t*²)^½` applied to the correlation-scale
/// statistic `t* = T / (n - 2 + T²)^½`.
pub fn worsley_transform(t_max: f64, n: usize) -> f64 {
    if !t_max.is_finite() {
        return f64::INFINITY;
    }
    let df = n as f64 - 2.0;
    let t_star = t_max / (df + t_max * t_max).sqrt();
    df.sqrt() * t_star / (1.0 - t_star * t_star).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    /// `n` was outside the tabulated range and the nearest row was used.
    pub extrapolated: bool,
}

/// Critical value of `W_max`, interpolated linearly in `n` between table rows.
pub fn worsley_critical(n: usize, alpha: f64) -> Result<CriticalValue> {
    let col = WORSLEY_ALPHAS
        .iter()
        .position(|a| (a - alpha).abs() < 1e-9)
        .ok_or(Error::UnsupportedAlpha(alpha))?;
    let first = WORSLEY_TABLE[0];
    let last = WORSLEY_TABLE[WORSLEY_TABLE.len() - 1];
    if n <= first.0 || n >= last.0 {
        let row = if n <= first.0 { first } else { last };
        return Ok(CriticalValue {
            value: row.1[col],
            extrapolated: n != row.0,
        });
    }
    let upper = WORSLEY_TABLE.iter().position(|r| r.0 >= n).unwrap();
    let (n1, v1) = (WORSLEY_TABLE[upper - 1].0, WORSLEY_TABLE[upper - 1].1[col]);
    let (n2, v2) = (WORSLEY_TABLE[upper].0, WORSLEY_TABLE[upper].1[col]);
    let w = (n - n1) as f64 / (n2 - n1) as f64;
    Ok(CriticalValue {
        value: v1 + w * (v2 - v1),
        extrapolated: false,
    })
}

/// `W_max` test at a tabulated level: reject when `W_max` exceeds the critical value.
pub fn w_max_test(series: &Series, alpha: f64) -> Result<TmaxResult> {
    let cv = worsley_critical(series.len(), alpha)?;
    let mut res = t_max(series)?;
    res.critical_value = Some(cv.value);
    res.alpha = Some(alpha);
    res.reject = Some(res.w_max > cv.value);
    res.critical_extrapolated = cv.extrapolated;
    Ok(res)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Rasch log-likelihood `Σ y log P + (1-y) log(1-P)` with `P = logistic(θ - b)`.
pub fn rasch_loglik(theta: f64, y: &[f64], b: &[f64]) -> f64 {
    y.iter()
        .zip(b)
        .map(|(&yi, &bi)| {
            let eta = theta - bi;
            // log P = -softplus(-eta), log(1-P) = -softplus(eta)
            -yi * softplus(-eta) - (1.0 - yi) * softplus(eta)
        })
        .sum()
}

fn rasch_score(theta: f64, y: &[f64], b: &[f64]) -> (f64, f64) {
    y.iter().zip(b).fold((0.0, 0.0), |(s, i), (&yi, &bi)| {
        let p = logistic(theta - bi);
        (s + yi - p, i + p * (1.0 - p))
    })
}

/// Ability MLE on `[-clamp, clamp]` by safeguarded Newton with bisection fallback.
/// All-correct and all-wrong patterns return the boundary.
pub fn rasch_theta_mle(y: &[f64], b: &[f64], clamp: f64) -> f64 {
    assert_eq!(y.len(), b.len(), "responses and difficulties differ in length");
    let (mut lo, mut hi) = (-clamp, clamp);
    if rasch_score(lo, y, b).0 <= 0.0 {
        return lo;
    }
    if rasch_score(hi, y, b).0 >= 0.0 {
        return hi;
    }
    let mut theta = 0.0_f64.clamp(lo, hi);
    for _ in 0..200 {
        let (score, info) = rasch_score(theta, y, b);
        if score > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let mut next = theta + score / info;
        if !(next > lo && next < hi) || info <= 0.0 {
            next = 0.5 * (lo + hi);
        }
        if (next - theta).abs() < 1e-13 || hi - lo < 1e-13 {
            return next;
        }
        theta = next;
    }
    theta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmaxConfig {
    pub trim_fraction: f64,
    pub critical_value: f64,
    pub theta_clamp: f64,
}

impl Default for LmaxConfig {
    fn default() -> Self {
        Self {
            trim_fraction: 0.15,
            critical_value: ANDREWS_CRITICAL_15,
            theta_clamp: 6.0,
        }
    }
}

impl LmaxConfig {
    /// Trimming count `n1`: nearest integer to `trim_fraction * n`, halves rounded up.
    pub fn trim_count(&self, n: usize) -> usize {
        (self.trim_fraction * n as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmaxResult {
    pub l_max: f64,
    /// First split point of the trimmed range (`n1`).
    pub j_start: usize,
    /// `L_jn` for `j = n1..=n-n1`.
    pub per_j: Vec<f64>,
    pub j_hat: usize,
    pub theta0_hat: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// Trimmed binary likelihood-ratio test for a change in Rasch ability.
pub fn l_max_binary(y: &[f64], b: &[f64], cfg: &LmaxConfig) -> Result<LmaxResult> {
    let n = y.len();
    if b.len() != n {
        return Err(Error::Dimension {
            what: "difficulties",
            expected: n,
            found: b.len(),
        });
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("binary responses must be 0/1"));
    }
    if !(cfg.trim_fraction > 0.0 && cfg.trim_fraction < 0.5) {
        return Err(Error::invalid("trim_fraction must lie in (0, 0.5)"));
    }
    if n < 7 {
        return Err(Error::SeriesTooShort { n, min: 7 });
    }
    let n1 = cfg.trim_count(n);
    if n1 < 1 || n - n1 <= n1 {
        return Err(Error::invalid(format!("trimming leaves no split points (n = {n}, n1 = {n1})")));
    }
    let clamp = cfg.theta_clamp;
    let theta0 = rasch_theta_mle(y, b, clamp);
    let l0 = rasch_loglik(theta0, y, b);

    let mut per_j = Vec::with_capacity(n - 2 * n1 + 1);
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for j in n1..=n - n1 {
        let (ya, yb) = y.split_at(j);
        let (ba, bb) = b.split_at(j);
        let t1 = rasch_theta_mle(ya, ba, clamp);
        let t2 = rasch_theta_mle(yb, bb, clamp);
        let l = 2.0 * (rasch_loglik(t1, ya, ba) + rasch_loglik(t2, yb, bb) - l0);
        per_j.push(l);
        if best.is_none_or(|(_, bl, _, _)| l > bl) {
            best = Some((j, l, t1, t2));
        }
    }
    let (j_hat, l_max, theta1_hat, theta2_hat) = best.expect("nonempty trimmed range");
    Ok(LmaxResult {
        l_max,
        j_start: n1,
        per_j,
        j_hat,
        theta0_hat: theta0,
        theta1_hat,
        theta2_hat,
        critical_value: cfg.critical_value,
        reject: l_max > cfg.critical_value,
    })
}
