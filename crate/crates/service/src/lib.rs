//! HTTP JSON API over `segpower-core`.
//!
//! Every response is an envelope `{ok, error, payload}` where exactly one of
//! `error` (`{code, message}`) and `payload` is non-null. Validation failures
//! answer 400, inputs that are well formed but cannot be analysed (a constant
//! series, a flat fit) answer 422.

use axum::body::Bytes;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use segpower_core::power::{compute_power, sample_size, PowerRequest, PowerResult, SampleSizeResult};
use segpower_core::pscore::SegmentKind;
use segpower_core::report::{preview, run_tests, Method, Preview, PreviewRequest, TestOptions, TestReport};
use segpower_core::{Alternative, Error, Series};

pub const DEFAULT_PORT: u16 = 8080;
pub const MIN_SERIES_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub ok: bool,
    pub error: Option<ApiError>,
    pub payload: Option<T>,
}

pub struct Failure {
    status: StatusCode,
    error: ApiError,
}

impl Failure {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            error: ApiError {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DegenerateSeries
            | Error::DegenerateDispersion
            | Error::DegenerateCovariate
            | Error::NonIdentifiable
            | Error::RankDeficient { .. }
            | Error::Convergence { .. }
            | Error::Boundary(_)
            | Error::FlatFit
            | Error::NotPsd
            | Error::Unreachable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        Failure::new(status, e.code(), e.to_string())
    }
}

/// Request bodies are parsed here rather than by axum's extractor so that
/// decimal inputs round-trip exactly and errors share the envelope.
fn parse<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, Failure> {
    serde_json::from_slice(body).map_err(|e| Failure::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string()))
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let body = Envelope::<()> {
            ok: false,
            error: Some(self.error),
            payload: None,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<Envelope<T>>, Failure>;

fn success<T>(payload: T) -> ApiResult<T> {
    Ok(Json(Envelope {
        ok: true,
        error: None,
        payload: Some(payload),
    }))
}

async fn compute<T, F>(f: F) -> Result<T, Failure>
where
    F: FnOnce() -> Result<T, Failure> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Failure::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

/// Series plus test options, as accepted by `/api/test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRequest {
    pub y: Vec<f64>,
    #[serde(default)]
    pub z: Option<Vec<f64>>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    /// Item difficulties; their presence marks the series as binary.
    #[serde(default)]
    pub b: Option<Vec<f64>>,
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
    #[serde(default)]
    pub dispersion: Option<f64>,
}

fn default_test_alpha() -> f64 {
    TestOptions::default().alpha
}

fn default_k() -> usize {
    TestOptions::default().k
}

impl TestRequest {
    pub fn series(&self) -> Series {
        let mut s = Series::new(self.y.clone());
        s.labels = self.labels.clone();
        s.z = self.z.clone();
        s.b = self.b.clone();
        s
    }

    pub fn options(&self) -> TestOptions {
        TestOptions {
            method: self.method,
            alpha: self.alpha,
            alternative: self.alternative,
            kind: self.kind,
            k: self.k,
            dispersion: self.dispersion,
        }
    }
}

fn require_n(req: &PowerRequest) -> Result<usize, Failure> {
    req.n.ok_or_else(|| Failure::new(StatusCode::BAD_REQUEST, "invalid_request", "missing field `n`"))
}

async fn power_handler(body: Bytes) -> ApiResult<PowerResult> {
    let req: PowerRequest = parse(&body)?;
    require_n(&req)?;
    success(compute(move || Ok(compute_power(&req)?)).await?)
}

async fn sample_size_handler(body: Bytes) -> ApiResult<SampleSizeResult> {
    let req: PowerRequest = parse(&body)?;
    if req.target_power.is_none() {
        return Err(Failure::new(StatusCode::BAD_REQUEST, "invalid_request", "missing field `target_power`"));
    }
    success(compute(move || Ok(sample_size(&req)?)).await?)
}

async fn test_handler(body: Bytes) -> ApiResult<TestReport> {
    let req: TestRequest = parse(&body)?;
    if req.y.len() < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            n: req.y.len(),
            min: MIN_SERIES_LEN,
        }
        .into());
    }
    success(compute(move || Ok(run_tests(&req.series(), &req.options())?)).await?)
}

async fn preview_handler(body: Bytes) -> ApiResult<Preview> {
    let req: PreviewRequest = parse(&body)?;
    success(compute(move || Ok(preview(&req)?)).await?)
}

pub fn app() -> Router {
    Router::new()
        .route("/api/power", post(power_handler))
        .route("/api/samplesize", post(sample_size_handler))
        .route("/api/test", post(test_handler))
        .route("/api/preview", post(preview_handler))
        .layer(CorsLayer::permissive())
}

/// Port from `SEGPOWER_PORT`, falling back to [`DEFAULT_PORT`].
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var("SEGPOWER_PORT") {
        Ok(v) => v.trim().parse().map_err(|_| format!("SEGPOWER_PORT is not a port number: {v}")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}
