//! Seeded Monte Carlo rejection-rate experiments.
//!
//! Every replicate draws from its own stream `(seed, cell << 32 | rep)`, and
//! all tests in a cell see the same replicate data, so tables are identical for
//! any number of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, Family};
use crate::normal::Alternative;
use crate::pscore::{pscore_statistic, DispersionMode, PScoreOptions, SegmentKind, SegmentedTermSpec, DEFAULT_K};
use crate::rng::{cell_stream, replicate_rng};
use crate::series::Series;
use crate::tfcp::{l_max_binary, w_max_test, LmaxConfig};

fn default_beta() -> f64 {
    2.0
}
fn default_psi() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    0.3
}

/// `y_i = β + δ I(z_i > ψ) + σ ε_i` on `z = (1..n)/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalScenario {
    pub n: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_psi")]
    pub psi: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl NormalScenario {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            n,
            beta: default_beta(),
            delta,
            psi: default_psi(),
            sigma: default_sigma(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("normal scenario needs n >= 10, got {}", self.n)));
        }
        if !(self.sigma >= 0.0) || ![self.beta, self.delta, self.psi].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("normal scenario parameters must be finite with sigma >= 0".into()));
        }
        Ok(())
    }
}

/// Rasch responses whose ability moves from `θ₁` to `θ₁ + δ` at `changepoint_item`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryScenario {
    pub n: usize,
    #[serde(default)]
    pub delta: f64,
    /// 1-based index of the first item answered at the new ability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoint_item: Option<usize>,
}

impl BinaryScenario {
    pub fn new(n: usize, delta: f64) -> Self {
        Self {
            n,
            delta,
            changepoint_item: None,
        }
    }

    /// Items 11, 15, 21 and 25 for tests of 20, 30, 40 and 50 items;
    /// `ceil(n/2) + 1` otherwise.
    pub fn changepoint(&self) -> usize {
        self.changepoint_item.unwrap_or(match self.n {
            20 => 11,
            30 => 15,
            40 => 21,
            50 => 25,
            n => n.div_ceil(2) + 1,
        })
    }

    fn validate(&self) -> Result<()> {
        let c = self.changepoint();
        if self.n < 7 {
            return Err(Error::Config(format!("binary scenario needs n >= 7, got {}", self.n)));
        }
        if c < 1 || c > self.n {
            return Err(Error::Config(format!("changepoint item {c} outside 1..={}", self.n)));
        }
        if !self.delta.is_finite() {
            return Err(Error::Config("delta must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Scenario {
    Normal(NormalScenario),
    Binary(BinaryScenario),
}

impl Scenario {
    pub fn n(&self) -> usize {
        match self {
            Scenario::Normal(s) => s.n,
            Scenario::Binary(s) => s.n,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            Scenario::Normal(s) => s.delta,
            Scenario::Binary(s) => s.delta,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Scenario::Normal(_) => "normal",
            Scenario::Binary(_) => "binary",
        }
    }

    pub fn id(&self) -> String {
        format!("{}-n{}-d{}", self.family(), self.n(), self.delta())
    }

    fn validate(&self) -> Result<()> {
        match self {
            Scenario::Normal(s) => s.validate(),
            Scenario::Binary(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    /// Pseudo-score test, jump kind.
    PScore,
    /// Worsley's `W_max` (normal data).
    W,
    /// Trimmed binary likelihood ratio `L_max` (binary data).
    L,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::PScore => "P.Score",
            TestKind::W => "W",
            TestKind::L => "L",
        }
    }

    fn supports(self, scenario: &Scenario) -> bool {
        matches!(
            (self, scenario),
            (TestKind::PScore, _) | (TestKind::W, Scenario::Normal(_)) | (TestKind::L, Scenario::Binary(_))
        )
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pscore" | "p.score" => Ok(TestKind::PScore),
            "w" => Ok(TestKind::W),
            "l" => Ok(TestKind::L),
            other => Err(Error::Config(format!("unknown test `{other}`"))),
        }
    }
}

fn equispaced(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

fn normal_jump_with<R: Rng>(s: &NormalScenario, rng: &mut R) -> Series {
    let z = equispaced(s.n);
    let y = z
        .iter()
        .map(|&zi| {
            let e: f64 = rng.sample(StandardNormal);
            s.beta + if zi > s.psi { s.delta } else { 0.0 } + s.sigma * e
        })
        .collect();
    Series::new(y).with_z(z)
}

/// One draw of the Gaussian jump model from stream `replicate` of `seed`.
pub fn simulate_normal_jump(s: &NormalScenario, seed: u64, replicate: u64) -> Series {
    normal_jump_with(s, &mut replicate_rng(seed, replicate))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaschDraw {
    pub y: Vec<f64>,
    pub b: Vec<f64>,
    pub theta1: f64,
    pub theta2: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn rasch_with<R: Rng>(s: &BinaryScenario, rng: &mut R) -> RaschDraw {
    let b: Vec<f64> = (0..s.n).map(|_| rng.sample(StandardNormal)).collect();
    let theta1: f64 = rng.sample(StandardNormal);
    let theta2 = theta1 + s.delta;
    let c = s.changepoint();
    let y = b
        .iter()
        .enumerate()
        .map(|(i, &bi)| {
            let theta = if i + 1 < c { theta1 } else { theta2 };
            let u: f64 = rng.random();
            f64::from(u8::from(u < logistic(theta - bi)))
        })
        .collect();
    RaschDraw { y, b, theta1, theta2 }
}

/// One Rasch response pattern with standard Normal difficulties.
pub fn simulate_rasch(s: &BinaryScenario, seed: u64, replicate: u64) -> RaschDraw {
    rasch_with(s, &mut replicate_rng(seed, replicate))
}

fn pscore_rejects(y: &[f64], z: Vec<f64>, opts: &PScoreOptions, alpha: f64) -> Result<bool> {
    let n = y.len();
    let x = DesignMatrix::intercept_only(n)?;
    let spec = SegmentedTermSpec::from_covariate(z, SegmentKind::Jump, DEFAULT_K)?;
    match pscore_statistic(y, &x, &spec, opts) {
        Ok(r) => Ok(r.p_value < alpha),
        // separated or all-equal binary patterns carry no evidence of change
        Err(Error::Boundary(_) | Error::Convergence { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

fn replicate_decisions(scenario: &Scenario, tests: &[TestKind], alpha: f64, seed: u64, stream: u64) -> Result<Vec<bool>> {
    let mut rng = replicate_rng(seed, stream);
    match scenario {
        Scenario::Normal(s) => {
            let series = normal_jump_with(s, &mut rng);
            let z = series.z.clone().unwrap_or_default();
            tests
                .iter()
                .map(|t| match t {
                    TestKind::PScore => pscore_rejects(&series.y, z.clone(), &PScoreOptions::default(), alpha),
                    TestKind::W => Ok(w_max_test(&series, alpha)?.reject.unwrap_or(false)),
                    TestKind::L => unreachable!("checked before sampling"),
                })
                .collect()
        }
        Scenario::Binary(s) => {
            let draw = rasch_with(s, &mut rng);
            let z: Vec<f64> = (1..=s.n).map(|i| i as f64).collect();
            let opts = PScoreOptions {
                family: Family::BinomialLogit,
                offset: Some(draw.b.iter().map(|b| -b).collect()),
                dispersion: DispersionMode::NullFit,
                alternative: Alternative::TwoSided,
                ..Default::default()
            };
            tests
                .iter()
                .map(|t| match t {
                    TestKind::PScore => pscore_rejects(&draw.y, z.clone(), &opts, alpha),
                    TestKind::L => Ok(l_max_binary(&draw.y, &draw.b, &LmaxConfig::default())?.reject),
                    TestKind::W => unreachable!("checked before sampling"),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub scenario: String,
    pub family: String,
    pub test: String,
    pub n: usize,
    pub delta: f64,
    pub rate: f64,
    pub rejections: usize,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub alpha: f64,
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub fn rate(&self, family: &str, test: TestKind, n: usize, delta: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.family == family && r.test == test.name() && r.n == n && r.delta == delta)
            .map(|r| r.rate)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Config(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Rejection rates of each test in each scenario over `reps` replicates.
pub fn rejection_rates(
    scenarios: &[Scenario],
    tests: &[TestKind],
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<RejectionTable> {
    if reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config("alpha must lie in (0, 1)".into()));
    }
    for test in tests {
        if !scenarios.iter().any(|s| test.supports(s)) {
            return Err(Error::Config(format!(
                "test {} does not apply to any requested scenario",
                test.name()
            )));
        }
    }
    let mut rows = Vec::new();
    for (cell, scenario) in scenarios.iter().enumerate() {
        scenario.validate()?;
        // in mixed-family runs each test only sees the scenarios it applies to
        let active: Vec<TestKind> = tests.iter().copied().filter(|t| t.supports(scenario)).collect();
        if active.is_empty() {
            return Err(Error::Config(format!(
                "none of the requested tests applies to {} data",
                scenario.family()
            )));
        }
        let decisions: Vec<Vec<bool>> = (0..reps)
            .into_par_iter()
            .map(|rep| replicate_decisions(scenario, &active, alpha, seed, cell_stream(cell, rep)))
            .collect::<Result<_>>()?;
        for (k, test) in active.iter().enumerate() {
            let rejections = decisions.iter().filter(|d| d[k]).count();
            rows.push(RejectionRow {
                scenario: scenario.id(),
                family: scenario.family().to_string(),
                test: test.name().to_string(),
                n: scenario.n(),
                delta: scenario.delta(),
                rate: rejections as f64 / reps as f64,
                rejections,
                reps,
                seed,
            });
        }
    }
    Ok(RejectionTable { alpha, rows })
}

/// Normal-data grid: `n ∈ {20, 30, 40, 50}`, `δ ∈ {0, .25, .5, 1}` with unit
/// error standard deviation.
pub fn table2_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for n in [20, 30, 40, 50] {
        for delta in [0.0, 0.25, 0.5, 1.0] {
            out.push(Scenario::Normal(NormalScenario::new(n, delta).with_sigma(1.0)));
        }
    }
    out
}

/// Binary-data grid: `n ∈ {20, 30, 40, 50}`, `δ ∈ {0, 1, 2, 3}`.
pub fn table3_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();
    for n in [20, 30, 40, 50] {
        for delta in [0.0, 1.0, 2.0, 3.0] {
            out.push(Scenario::Binary(BinaryScenario::new(n, delta)));
        }
    }
    out
}

fn default_reps() -> usize {
    1000
}
fn default_sim_alpha() -> f64 {
    0.05
}

/// Scenario file contents (TOML).
///
/// ```toml
/// reps = 1000
/// alpha = 0.05
/// seed = 2024
/// tests = ["pscore", "w"]
///
/// [[scenario]]
/// family = "normal"
/// n = 20
/// delta = 0.5
/// sigma = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_sim_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tests: Vec<TestKind>,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn run(&self, seed: u64) -> Result<RejectionTable> {
        rejection_rates(&self.scenarios, &self.tests, self.reps, self.alpha, self.seed.unwrap_or(seed))
    }
}
