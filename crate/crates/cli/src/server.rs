use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use inr_shape::dataset::{measure_features, FeatureVector, MeasureConfig, FEATURE_NAMES};
use inr_shape::generation::{
    edit_code_to, fit_sampler, generate_cohort, synthesize, CohortOptions, FeatureOverrides, LatentSampler,
    Synthesis, DEFAULT_CLAMP_SIGMA, PREVIEW_RESOLUTION,
};
use inr_shape::model::{LatentCode, ModelParams};
use inr_shape::{Error, Scalar};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{ServeArgs, DEFAULT_PORT};
use crate::error::{CliError, CliResult};
use crate::loaded::LoadedModel;
use crate::payload::{MeshPayload, DEFAULT_MAX_PAYLOAD_BYTES};
use crate::with_model;

pub const MIN_RESOLUTION: usize = 8;
pub const MAX_RESOLUTION: usize = 128;

/// Error body: `{"error": {"code", "message"}}` with a stable code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_parameter", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownShape(_) => StatusCode::NOT_FOUND,
            Error::UnsupportedModel(_) => StatusCode::CONFLICT,
            Error::Parameter(_) | Error::Shape(_) | Error::Config(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_body", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone, Copy, Debug)]
pub struct ServerConfig {
    pub max_payload_bytes: usize,
    pub clamp_sigma: Option<f64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            max_payload_bytes: DEFAULT_MAX_PAYLOAD_BYTES,
            clamp_sigma: Some(DEFAULT_CLAMP_SIGMA),
        }
    }
}

/// A loaded checkpoint with its fitted sampler.
pub struct Ready {
    pub id: String,
    pub model: LoadedModel,
    pub sampler: LatentSampler,
}

enum Status {
    Loading,
    Ready(Arc<Ready>),
    Failed(String),
}

/// Per-session edit state; requests on one session are serialized.
#[derive(Debug, Default)]
pub struct SessionState {
    pub checkpoint: String,
    pub base: Vec<f64>,
    pub overrides: Option<FeatureOverrides>,
    pub resolution: usize,
    pub cached: Option<Value>,
}

type Sessions = Arc<std::sync::Mutex<HashMap<String, Arc<tokio::sync::Mutex<SessionState>>>>>;

#[derive(Clone)]
pub struct AppState {
    status: Arc<RwLock<Status>>,
    sessions: Sessions,
    config: ServerConfig,
}

impl AppState {
    /// State that answers 503 until [`AppState::set_ready`] is called.
    pub fn loading(config: ServerConfig) -> Self {
        Self {
            status: Arc::new(RwLock::new(Status::Loading)),
            sessions: Arc::default(),
            config,
        }
    }

    pub fn set_ready(&self, id: impl Into<String>, model: LoadedModel) -> inr_shape::Result<()> {
        let sampler = with_model!(&model, |m| fit_sampler(m))?;
        let ready = Ready {
            id: id.into(),
            model,
            sampler,
        };
        *self.status.write().expect("status lock") = Status::Ready(Arc::new(ready));
        self.sessions.lock().expect("session lock").clear();
        Ok(())
    }

    pub fn set_failed(&self, message: impl Into<String>) {
        *self.status.write().expect("status lock") = Status::Failed(message.into());
    }

    /// Loads a checkpoint on a blocking thread and flips the state when done.
    pub fn load_from(&self, path: PathBuf) -> tokio::task::JoinHandle<()> {
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let result = LoadedModel::load(&path).and_then(|m| state.set_ready(path.display().to_string(), m));
            match result {
                Ok(()) => log::info!("checkpoint {} ready", path.display()),
                Err(e) => {
                    log::error!("could not load {}: {e}", path.display());
                    state.set_failed(e.to_string());
                }
            }
        })
    }

    fn ready(&self) -> ApiResult<Arc<Ready>> {
        match &*self.status.read().expect("status lock") {
            Status::Ready(r) => Ok(r.clone()),
            Status::Loading => Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "loading",
                "checkpoint is still loading",
            )),
            Status::Failed(m) => Err(ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "load_failed",
                format!("checkpoint failed to load: {m}"),
            )),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/shapes", get(shapes))
        .route("/reconstruct", post(reconstruct_handler))
        .route("/generate", post(generate_handler))
        .route("/edit", post(edit_handler))
        .with_state(state)
}

/// Feature values in training units; absent entries are left unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesBody {
    pub volume: Option<f64>,
    pub isthmus: Option<f64>,
    pub symmetry: Option<f64>,
}

impl From<FeaturesBody> for FeatureOverrides {
    fn from(f: FeaturesBody) -> Self {
        FeatureOverrides {
            volume: f.volume,
            isthmus: f.isthmus,
            symmetry: f.symmetry,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructRequest {
    pub shape_id: usize,
    pub resolution: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub seed: Option<u64>,
    pub overrides: Option<FeaturesBody>,
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EditBase {
    ShapeId(usize),
    Code(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    pub base: EditBase,
    #[serde(default)]
    pub features: FeaturesBody,
    pub resolution: Option<usize>,
    /// Optional session key; repeated identical requests reuse the cached mesh.
    pub session: Option<String>,
}

fn resolution(value: Option<usize>) -> ApiResult<usize> {
    let r = value.unwrap_or(PREVIEW_RESOLUTION);
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&r) {
        return Err(ApiError::bad_request(format!(
            "resolution {r} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}"
        )));
    }
    Ok(r)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn measured(syn: &Synthesis) -> Option<FeatureVector> {
    if syn.empty {
        return None;
    }
    measure_features(&syn.mesh, &MeasureConfig::default()).ok()
}

fn to_f64<T: Scalar>(code: &LatentCode<T>) -> Vec<f64> {
    code.full().iter().map(|v| v.as_f64()).collect()
}

async fn shapes(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let ready = state.ready()?;
    let m = &ready.model;
    let scaler = m.scaler();
    let clamp = state.config.clamp_sigma;
    let ranges: serde_json::Map<String, Value> = FEATURE_NAMES
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let range = clamp.map(|c| [scaler.unscale_one(f, -c), scaler.unscale_one(f, c)]);
            (name.to_string(), json!(range))
        })
        .collect();
    let shapes: Vec<Value> = m
        .features()
        .iter()
        .enumerate()
        .map(|(id, f)| json!({ "id": id, "features": f }))
        .collect();
    Ok(Json(json!({
        "checkpoint": ready.id,
        "precision": m.precision(),
        "conditioned": m.is_conditioned(),
        "fixed_features": m.arch().fixed_features.iter().map(|&f| FEATURE_NAMES[f]).collect::<Vec<_>>(),
        "code_width": m.arch().code_width(),
        "scaler": scaler,
        "clamp_sigma": clamp,
        "clamp_range": ranges,
        "training_range": {
            "min": ready.sampler.feature_min,
            "max": ready.sampler.feature_max,
        },
        "shapes": shapes,
    })))
}

async fn reconstruct_handler(
    State(state): State<AppState>,
    body: Result<Json<ReconstructRequest>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let ready = state.ready()?;
    let res = resolution(req.resolution)?;
    let cap = state.config.max_payload_bytes;
    let value = blocking(move || {
        with_model!(&ready.model, |m| {
            let code = m.code(req.shape_id)?;
            mesh_response(m, &code, res, cap, Vec::new(), json!({ "shape_id": req.shape_id }))
        })
    })
    .await?;
    Ok(Json(value))
}

/// Synthesizes `code` and assembles the common response fields.
fn mesh_response<T: Scalar>(
    m: &ModelParams<T>,
    code: &LatentCode<T>,
    res: usize,
    cap: usize,
    warnings: Vec<String>,
    extra: Value,
) -> ApiResult<Value> {
    let syn = synthesize(m, &code.full(), res)?;
    let mut out = json!({
        "resolution": res,
        "code": to_f64(code),
        "conditioned": m.conditioned_features(code),
        "measured": measured(&syn),
        "empty": syn.empty,
        "components": syn.mesh.connected_components(),
        "warnings": warnings,
        "mesh": MeshPayload::from_mesh(&syn.mesh, cap),
    });
    if let (Value::Object(o), Value::Object(e)) = (&mut out, extra) {
        o.extend(e);
    }
    Ok(out)
}

async fn generate_handler(
    State(state): State<AppState>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let ready = state.ready()?;
    let res = resolution(req.resolution)?;
    let cap = state.config.max_payload_bytes;
    let clamp = state.config.clamp_sigma;
    let seed = req.seed.unwrap_or(0);
    let value = blocking(move || {
        let opts = CohortOptions {
            resolution: res,
            overrides: req.overrides.unwrap_or_default().into(),
            clamp_sigma: clamp,
            measure: Some(MeasureConfig::default()),
        };
        let mut mesh = None;
        let records = with_model!(&ready.model, |m| generate_cohort(
            m,
            &ready.sampler,
            1,
            seed,
            &opts,
            |_, syn| {
                mesh = Some(syn.mesh.clone());
                Ok(())
            }
        ))?;
        let r = &records[0];
        let mesh = mesh.expect("sink called once");
        Ok(json!({
            "seed": seed,
            "resolution": res,
            "code": r.code,
            "conditioned": r.conditioned,
            "measured": r.measured,
            "empty": r.empty,
            "components": mesh.connected_components(),
            "warnings": r.warnings,
            "mesh": MeshPayload::from_mesh(&mesh, cap),
        }))
    })
    .await?;
    Ok(Json(value))
}

async fn edit_handler(
    State(state): State<AppState>,
    body: Result<Json<EditRequest>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let Json(req) = body?;
    let ready = state.ready()?;
    if !ready.model.is_conditioned() {
        return Err(ApiError::from(Error::UnsupportedModel(
            "this checkpoint has no fixed feature slots to edit".into(),
        )));
    }
    let res = resolution(req.resolution)?;
    let cap = state.config.max_payload_bytes;
    let clamp = state.config.clamp_sigma;
    let overrides: FeatureOverrides = req.features.into();
    let base = with_model!(&ready.model, |m| resolve_base(m, &req.base))?;
    let extra = match &req.base {
        EditBase::ShapeId(id) => json!({ "base": { "shape_id": id } }),
        EditBase::Code(_) => json!({ "base": "code" }),
    };
    let compute = {
        let ready = ready.clone();
        let base = base.clone();
        move || -> ApiResult<Value> {
            with_model!(&ready.model, |m| {
                let full: Vec<_> = base.iter().map(|&v| Scalar::c(v)).collect();
                let base_code = LatentCode::from_full(&full, m.arch.fixed_count())?;
                let (code, warnings) = edit_code_to(m, &base_code, &overrides, clamp)?;
                mesh_response(m, &code, res, cap, warnings, extra)
            })
        }
    };

    let Some(key) = req.session else {
        return Ok(Json(blocking(compute).await?));
    };
    let session = state
        .sessions
        .lock()
        .expect("session lock")
        .entry(key)
        .or_default()
        .clone();
    let mut s = session.lock().await;
    if s.checkpoint == ready.id && s.base == base && s.overrides == Some(overrides) && s.resolution == res {
        if let Some(cached) = &s.cached {
            return Ok(Json(cached.clone()));
        }
    }
    let value = blocking(compute).await?;
    *s = SessionState {
        checkpoint: ready.id.clone(),
        base,
        overrides: Some(overrides),
        resolution: res,
        cached: Some(value.clone()),
    };
    Ok(Json(value))
}

fn resolve_base<T: Scalar>(m: &ModelParams<T>, base: &EditBase) -> ApiResult<Vec<f64>> {
    match base {
        EditBase::ShapeId(id) => Ok(to_f64(&m.code(*id)?)),
        EditBase::Code(code) => {
            if code.len() != m.arch.code_width() || code.iter().any(|v| !v.is_finite()) {
                return Err(ApiError::bad_request(format!(
                    "base code must hold {} finite values",
                    m.arch.code_width()
                )));
            }
            Ok(code.clone())
        }
    }
}

/// Binds, starts loading the checkpoint and serves until Ctrl-C.
pub fn serve_blocking(a: ServeArgs) -> CliResult<()> {
    let ckpt = a
        .ckpt
        .ok_or_else(|| CliError::usage("missing required flag --ckpt"))?;
    if !Path::new(&ckpt).is_file() {
        return Err(CliError::usage(format!("--ckpt: {} does not exist", ckpt.display())));
    }
    let host = a.host.unwrap_or_else(|| "127.0.0.1".into());
    let port = a.port.unwrap_or(DEFAULT_PORT);
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|_| CliError::usage(format!("--host: cannot listen on {host}:{port}")))?;
    let config = ServerConfig {
        max_payload_bytes: a.max_payload_bytes.unwrap_or(DEFAULT_MAX_PAYLOAD_BYTES),
        clamp_sigma: match a.clamp_sigma {
            Some(c) if c > 0.0 && c.is_finite() => Some(c),
            Some(_) => return Err(CliError::usage("--clamp-sigma must be positive")),
            None => Some(DEFAULT_CLAMP_SIGMA),
        },
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| io_error(&ckpt, e))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| io_error(&ckpt, e))?;
        let local = listener.local_addr().map_err(|e| io_error(&ckpt, e))?;
        let state = AppState::loading(config);
        state.load_from(ckpt.clone());
        log::info!("listening on http://{local}");
        println!("{}", json!({ "command": "serve", "listening": local.to_string() }));
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| io_error(&ckpt, e))?;
        Ok(())
    })
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
