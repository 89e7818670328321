//! Serializable reports shared by the command line and the HTTP API, so both
//! front ends produce the same numbers from the same inputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covspec::{realize_covariate_with, CovariateSpec, ProbabilityGrid};
use crate::error::{Error, Result};
use crate::model::{build_design, DesignMatrix, Family};
use crate::normal::Alternative;
use crate::power::fit_segmented;
use crate::pscore::{
    estimate_changepoint_with, phi_unchecked, pscore_statistic, range, DispersionMode, DispersionSource,
    PScoreOptions, SegmentKind, SegmentedTermSpec, DEFAULT_K,
};
use crate::rng::replicate_rng;
use crate::series::Series;
use crate::tfcp::{l_max_binary, w_max_test, LmaxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Worsley's `W_max`.
    W,
    PScore,
    /// Trimmed binary likelihood ratio (needs difficulties).
    L,
    /// The pseudo-score test plus the benchmark matching the data: `W` for
    /// continuous responses, `L` when difficulties are present.
    #[default]
    Both,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" => Ok(Method::W),
            "pscore" | "p.score" => Ok(Method::PScore),
            "l" => Ok(Method::L),
            "both" => Ok(Method::Both),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

fn default_test_alpha() -> f64 {
    0.05
}

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestOptions {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_test_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub alternative: Alternative,
    #[serde(default)]
    pub kind: SegmentKind,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Known error variance; estimated from the null fit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            method: Method::Both,
            alpha: default_test_alpha(),
            alternative: Alternative::TwoSided,
            kind: SegmentKind::Jump,
            k: DEFAULT_K,
            dispersion: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WReport {
    pub t_max: f64,
    pub w_max: f64,
    pub critical_value: f64,
    pub critical_extrapolated: bool,
    pub reject: bool,
    /// Size of the first segment at the maximum.
    pub j_hat: usize,
    /// Label of the first observation after the change.
    pub changepoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PScoreReport {
    pub s0: f64,
    pub p_value: f64,
    pub alternative: Alternative,
    pub reject: bool,
    pub dispersion_used: f64,
    pub dispersion_source: DispersionSource,
    pub k: usize,
    pub kind: SegmentKind,
    pub psi_hat: f64,
    /// Label of the first observation beyond `psi_hat`.
    pub changepoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LReport {
    pub l_max: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub j_hat: usize,
    pub changepoint: String,
    pub theta0_hat: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub n: usize,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<WReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pscore: Option<PScoreReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<LReport>,
}

fn first_beyond(series: &Series, z: &[f64], psi: f64) -> String {
    z.iter()
        .position(|&v| v > psi)
        .map(|i| series.label(i))
        .unwrap_or_default()
}

/// Runs the requested tests on a series.
pub fn run_tests(series: &Series, opts: &TestOptions) -> Result<TestReport> {
    series.validate()?;
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1)"));
    }
    let binary = series.b.is_some();
    let (want_w, want_p, want_l) = match opts.method {
        Method::W => (true, false, false),
        Method::PScore => (false, true, false),
        Method::L => (false, false, true),
        Method::Both => (!binary, true, binary),
    };
    let n = series.len();
    let mut report = TestReport {
        n,
        alpha: opts.alpha,
        w: None,
        pscore: None,
        l: None,
    };

    if want_w {
        let r = w_max_test(series, opts.alpha)?;
        report.w = Some(WReport {
            t_max: r.t_max,
            w_max: r.w_max,
            critical_value: r.critical_value.unwrap_or(f64::NAN),
            critical_extrapolated: r.critical_extrapolated,
            reject: r.reject.unwrap_or(false),
            j_hat: r.j_hat,
            changepoint: series.label(r.change_index()),
        });
    }

    if want_l {
        let b = series
            .b
            .as_ref()
            .ok_or_else(|| Error::invalid("the L test needs item difficulties (column b)"))?;
        let cfg = LmaxConfig::default();
        let r = l_max_binary(&series.y, b, &cfg)?;
        report.l = Some(LReport {
            l_max: r.l_max,
            critical_value: r.critical_value,
            reject: r.reject,
            j_hat: r.j_hat,
            changepoint: series.label(r.j_hat.min(n - 1)),
            theta0_hat: r.theta0_hat,
            theta1_hat: r.theta1_hat,
            theta2_hat: r.theta2_hat,
        });
    }

    if want_p {
        let z = series.covariate();
        let x = DesignMatrix::intercept_only(n)?;
        let spec = SegmentedTermSpec::from_covariate(z.clone(), opts.kind, opts.k)?;
        let popts = PScoreOptions {
            family: if binary { Family::BinomialLogit } else { Family::GaussianIdentity },
            offset: series.b.as_ref().map(|b| b.iter().map(|v| -v).collect()),
            dispersion: match opts.dispersion {
                Some(d) => DispersionMode::Supplied(d),
                None => DispersionMode::NullFit,
            },
            alternative: opts.alternative,
            ..Default::default()
        };
        let r = pscore_statistic(&series.y, &x, &spec, &popts).map_err(|e| match e {
            // a constant response has nothing to test
            Error::DegenerateDispersion => Error::DegenerateSeries,
            e => e,
        })?;
        let psi_hat = estimate_changepoint_with(&series.y, &x, &z, opts.kind, &popts)?;
        report.pscore = Some(PScoreReport {
            s0: r.s0,
            p_value: r.p_value,
            alternative: r.alternative,
            reject: r.p_value < opts.alpha,
            dispersion_used: r.dispersion_used,
            dispersion_source: r.dispersion_source,
            k: r.k,
            kind: opts.kind,
            psi_hat,
            changepoint: first_beyond(series, &z, psi_hat),
        });
    }
    Ok(report)
}

fn default_preview_n() -> usize {
    100
}

/// Parameters of a simulated preview dataset `y = δ (z - ψ)₊ + σ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    #[serde(default = "default_preview_n")]
    pub n: usize,
    #[serde(default, alias = "z")]
    pub z_spec: CovariateSpec,
    pub psi: f64,
    pub delta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: ProbabilityGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub z_start: f64,
    pub y_start: f64,
    pub z_end: f64,
    pub y_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewFit {
    /// `None` when the data show no slope change and a single line is drawn.
    pub psi_hat: Option<f64>,
    pub delta_hat: f64,
    pub segments: Vec<LineSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preview {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub fit: PreviewFit,
}

/// One seeded dataset from the broken-line model with its fitted segmented line.
pub fn preview(req: &PreviewRequest) -> Result<Preview> {
    for (name, v) in [("psi", req.psi), ("delta", req.delta), ("sigma", req.sigma)] {
        if !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be finite")));
        }
    }
    if req.sigma < 0.0 {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    let n = req.z_spec.fixed_len().unwrap_or(req.n);
    let z = realize_covariate_with(&req.z_spec, n, req.grid)?;
    let (lo, hi) = range(&z);
    if !(req.psi > lo && req.psi < hi) {
        return Err(Error::PsiOutOfRange { psi: req.psi, lo, hi });
    }
    let mut rng = replicate_rng(req.seed, 0);
    let hinge = phi_unchecked(&z, req.psi, SegmentKind::BrokenLine);
    let y: Vec<f64> = hinge
        .iter()
        .map(|h| req.delta * h + req.sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let x = build_design(n, std::slice::from_ref(&z), true)?;
    let line = |a: f64, b: f64, d: f64, psi: f64| move |t: f64| a + b * t + d * (t - psi).max(0.0);
    let fit = match fit_segmented(&y, &x, &z) {
        Ok(f) => {
            let g = line(f.beta_hat[0], f.beta_hat[1], f.delta_hat, f.psi_hat);
            PreviewFit {
                psi_hat: Some(f.psi_hat),
                delta_hat: f.delta_hat,
                segments: vec![
                    LineSegment { z_start: lo, y_start: g(lo), z_end: f.psi_hat, y_end: g(f.psi_hat) },
                    LineSegment { z_start: f.psi_hat, y_start: g(f.psi_hat), z_end: hi, y_end: g(hi) },
                ],
            }
        }
        Err(Error::FlatFit) => {
            let null = crate::model::fit_null_gaussian(&y, &x)?;
            let g = line(null.beta_hat[0], null.beta_hat[1], 0.0, lo);
            PreviewFit {
                psi_hat: None,
                delta_hat: 0.0,
                segments: vec![LineSegment { z_start: lo, y_start: g(lo), z_end: hi, y_end: g(hi) }],
            }
        }
        Err(e) => return Err(e),
    };
    Ok(Preview { z, y, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::sat_critical_reading;

    #[test]
    fn constant_series_is_degenerate() {
        let s = Series::new(vec![5.0; 10]);
        assert_eq!(run_tests(&s, &TestOptions::default()).unwrap_err(), Error::DegenerateSeries);
        let only_p = TestOptions { method: Method::PScore, ..Default::default() };
        assert_eq!(run_tests(&s, &only_p).unwrap_err(), Error::DegenerateSeries);
    }

    #[test]
    fn both_picks_the_family_benchmark() {
        let r = run_tests(&sat_critical_reading(), &TestOptions::default()).unwrap();
        assert!(r.w.is_some() && r.pscore.is_some() && r.l.is_none());

        let y: Vec<f64> = (0..20).map(|i| f64::from(u8::from(i % 3 != 0 && i > 6))).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 - 10.0) / 10.0).collect();
        let s = Series::new(y).with_difficulties(b);
        let r = run_tests(&s, &TestOptions::default()).unwrap();
        assert!(r.w.is_none() && r.pscore.is_some() && r.l.is_some());
    }

    #[test]
    fn noiseless_preview_lies_on_its_line() {
        let req = PreviewRequest {
            n: 60,
            z_spec: CovariateSpec::Equispaced,
            psi: 0.4,
            delta: 2.0,
            sigma: 0.0,
            seed: 3,
            grid: ProbabilityGrid::default(),
        };
        let p = preview(&req).unwrap();
        let psi_hat = p.fit.psi_hat.unwrap();
        assert!((psi_hat - 0.4).abs() <= 1.0 / 60.0);
        let seg = &p.fit.segments;
        for (&z, &y) in p.z.iter().zip(&p.y) {
            let s = if z <= seg[0].z_end { &seg[0] } else { &seg[1] };
            let t = (z - s.z_start) / (s.z_end - s.z_start);
            let on_line = s.y_start + t * (s.y_end - s.y_start);
            assert!((on_line - y).abs() < 1e-8, "z={z} y={y} line={on_line}");
        }
        assert_eq!(p, preview(&req).unwrap());
    }

    #[test]
    fn flat_preview_has_one_segment() {
        let req = PreviewRequest {
            n: 30,
            z_spec: CovariateSpec::Equispaced,
            psi: 0.5,
            delta: 0.0,
            sigma: 0.0,
            seed: 0,
            grid: ProbabilityGrid::default(),
        };
        let p = preview(&req).unwrap();
        assert_eq!(p.fit.psi_hat, None);
        assert_eq!(p.fit.segments.len(), 1);
    }
}
