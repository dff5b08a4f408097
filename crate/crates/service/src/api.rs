//! HTTP routes. Every handler runs store and pipeline work on the blocking
//! pool.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use arsimplify_core::calibration::{
    train, CalibrationModel, ClassifierFeaturizer, GoldSample, GoldSource, TrainConfig,
};
use arsimplify_core::classifier::ErrorClassifier;
use arsimplify_core::pipeline::{Pipeline, PipelineConfig};
use arsimplify_core::prompt::PromptTemplate;
use arsimplify_core::spatial::{DetectedObject, DetectionFeed, SpatialContext};
use arsimplify_core::store::ManualStore;
use arsimplify_core::types::{ErrorClass, ErrorRegistry, ManualDocument, StepStatus};
use arsimplify_core::validators::{ValidationReport, Validator};

use crate::config::{BackendSource, ServiceConfig};
use crate::error::{ApiError, ApiJson};

pub const MANUAL_VERSION_HEADER: &str = "x-manual-version";
pub const API_TOKEN_HEADER: &str = "x-api-token";

pub struct AppState {
    pub store: ManualStore,
    pub backend: BackendSource,
    pub classifier: Arc<dyn ErrorClassifier>,
    pub template: PromptTemplate,
    pub pipeline_config: PipelineConfig,
    pub registry: ErrorRegistry,
    pub training: TrainConfig,
    pub feed: DetectionFeed,
    pub model: ArcSwap<CalibrationModel>,
    pub api_token: Option<String>,
    train_lock: Mutex<()>,
}

impl AppState {
    pub fn from_config(config: &ServiceConfig) -> anyhow::Result<Self> {
        let store = ManualStore::open(&config.store_dir)?;
        let registry = ErrorRegistry::default();
        let model = match store.load_model_json()? {
            Some(raw) => CalibrationModel::from_json(&raw, &registry)?,
            None => CalibrationModel::initial(&registry),
        };
        Ok(Self {
            store,
            backend: config.backend()?,
            classifier: config.classifier(),
            template: config.template()?,
            pipeline_config: config.pipeline_config(),
            registry,
            training: config.training.clone(),
            feed: DetectionFeed::new(),
            model: ArcSwap::from_pointee(model),
            api_token: config.api_token.clone(),
            train_lock: Mutex::new(()),
        })
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline::new(
            self.template.clone(),
            self.backend.instance(),
            self.classifier.clone(),
            self.pipeline_config.clone(),
        )
    }

    fn live_context(&self) -> Option<SpatialContext> {
        let current = self.feed.current();
        (!current.is_empty()).then(|| self.feed.freeze())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/manuals", post(create_manual).get(search_manuals))
        .route("/manuals/{id}", get(get_manual).put(update_manual))
        .route("/manuals/{id}/versions", get(list_versions))
        .route("/manuals/{id}/simplify", post(simplify))
        .route("/manuals/{id}/steps/{n}/display", get(display))
        .route("/manuals/{id}/steps/{n}/advance", post(advance))
        .route(
            "/context/detections",
            post(post_detections).get(get_detections),
        )
        .route("/review/queue", get(review_queue))
        .route("/review/{step}/verdict", post(verdict))
        .route("/calibration/train", post(train_model))
        .route("/calibration/model", get(get_model))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .merge(api)
        .with_state(state)
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.api_token {
        let headers = req.headers();
        let given = headers
            .get(API_TOKEN_HEADER)
            .and_then(|v| v.to_str().ok())
            .or_else(|| {
                headers
                    .get(header::AUTHORIZATION)
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.strip_prefix("Bearer "))
            });
        if given != Some(token.as_str()) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong API token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, ApiError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

/// Parses an optional JSON body; empty bodies give the default.
fn optional_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::unprocessable(e.to_string()))
}

fn with_version(version: u32, body: Response) -> Response {
    let mut resp = body;
    resp.headers_mut()
        .insert(MANUAL_VERSION_HEADER, HeaderValue::from(version));
    resp
}

#[derive(Debug, Serialize)]
struct VersionRef {
    manual_id: String,
    version: u32,
}

async fn create_manual(
    State(state): State<Arc<AppState>>,
    ApiJson(doc): ApiJson<ManualDocument>,
) -> Result<Response, ApiError> {
    let id = blocking(&state, move |s| Ok(s.store.create_manual(&doc)?)).await?;
    let location = HeaderValue::from_str(&format!("/manuals/{id}"))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let body = Json(VersionRef {
        manual_id: id,
        version: 1,
    });
    Ok(with_version(
        1,
        (StatusCode::CREATED, [(header::LOCATION, location)], body).into_response(),
    ))
}

async fn update_manual(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(doc): ApiJson<ManualDocument>,
) -> Result<Response, ApiError> {
    if !doc.manual_id.is_empty() && doc.manual_id != id {
        return Err(ApiError::unprocessable(format!(
            "body manual_id `{}` does not match path `{id}`",
            doc.manual_id
        )));
    }
    let (id, version) = blocking(&state, move |s| {
        let v = s.store.update_manual(&id, &doc)?;
        Ok((id, v))
    })
    .await?;
    Ok(with_version(
        version,
        Json(VersionRef {
            manual_id: id,
            version,
        })
        .into_response(),
    ))
}

#[derive(Debug, Deserialize)]
struct VersionQuery {
    version: Option<u32>,
}

async fn get_manual(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<VersionQuery>,
) -> Result<Response, ApiError> {
    let doc = blocking(&state, move |s| Ok(s.store.get_manual(&id, q.version)?)).await?;
    Ok(with_version(doc.version, Json(doc).into_response()))
}

async fn list_versions(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let versions = blocking(&state, move |s| Ok(s.store.list_versions(&id)?)).await?;
    Ok(Json(versions).into_response())
}

/// `?query=<text>&tag=<t>&tag=<u>`
async fn search_manuals(
    State(state): State<Arc<AppState>>,
    Query(params): Query<Vec<(String, String)>>,
) -> Result<Response, ApiError> {
    let mut query = String::new();
    let mut tags = BTreeSet::new();
    for (k, v) in params {
        match k.as_str() {
            "query" | "q" => query = v,
            "tag" => {
                tags.insert(v);
            }
            other => {
                return Err(ApiError::unprocessable(format!(
                    "unknown query parameter `{other}`"
                )))
            }
        }
    }
    let hits = blocking(&state, move |s| Ok(s.store.search(&query, &tags)?)).await?;
    Ok(Json(hits).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplifyRequest {
    /// Reject the run unless the latest version equals this.
    #[serde(default)]
    base_version: Option<u32>,
}

/// The body is a pure function of the manual, the fixture or model output,
/// and the calibration model; the new manual version is reported in the
/// `X-Manual-Version` header.
async fn simplify(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: SimplifyRequest = optional_body(&body)?;
    let (version, outcome) = blocking(&state, move |s| {
        let doc = s.store.get_manual(&id, None)?;
        if let Some(base) = req.base_version {
            if base != doc.version {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "version_conflict",
                    format!(
                        "manual `{id}` is at version {}, request was based on {base}",
                        doc.version
                    ),
                ));
            }
        }
        let model = s.model.load_full();
        let live = s.live_context();
        let (edited, outcome) = s.pipeline().simplify_manual(&doc, live.as_ref(), &model)?;
        let version = s.store.update_manual(&id, &edited)?;
        Ok((version, outcome))
    })
    .await?;
    Ok(with_version(version, Json(outcome).into_response()))
}

async fn post_detections(
    State(state): State<Arc<AppState>>,
    ApiJson(objects): ApiJson<Vec<DetectedObject>>,
) -> Result<Response, ApiError> {
    let n = objects.len();
    state
        .feed
        .publish(objects)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    Ok(Json(json!({ "accepted": n })).into_response())
}

async fn get_detections(State(state): State<Arc<AppState>>) -> Json<Vec<DetectedObject>> {
    Json(state.feed.current().as_ref().clone())
}

#[derive(Debug, Serialize)]
struct DisplayResponse {
    manual_id: String,
    version: u32,
    step_id: u32,
    step_count: usize,
    status: StepStatus,
    text: String,
    original_text: String,
    /// Whether `text` was elaborated from a snapshot frozen on advance.
    frozen: bool,
}

async fn display(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, u32)>,
) -> Result<Response, ApiError> {
    let resp = blocking(&state, move |s| {
        let doc = s.store.get_manual(&id, None)?;
        let step = doc
            .step(n)
            .ok_or_else(|| ApiError::not_found(format!("manual `{id}` has no step {n}")))?;
        if step.status == StepStatus::Draft {
            return Err(ApiError::conflict(format!(
                "step {n} of `{id}` has not been simplified"
            )));
        }
        let live = s.live_context();
        Ok(DisplayResponse {
            manual_id: doc.manual_id.clone(),
            version: doc.version,
            step_id: n,
            step_count: doc.steps.len(),
            status: step.status,
            text: step.rendered_text(live.as_ref()),
            original_text: step.original_text.clone(),
            frozen: step.spatial_snapshot.is_some(),
        })
    })
    .await?;
    Ok(Json(resp).into_response())
}

#[derive(Debug, Serialize)]
struct AdvanceResponse {
    manual_id: String,
    version: u32,
    /// Step whose context was frozen; `None` once past the last step.
    next_step: Option<u32>,
    snapshot: Option<SpatialContext>,
}

/// Leaving step `n` (0 = starting the task) freezes the detections for
/// step `n + 1`.
async fn advance(
    State(state): State<Arc<AppState>>,
    Path((id, n)): Path<(String, u32)>,
) -> Result<Response, ApiError> {
    let resp = blocking(&state, move |s| {
        let mut doc = s.store.get_manual(&id, None)?;
        if n > 0 && doc.step(n).is_none() {
            return Err(ApiError::not_found(format!(
                "manual `{id}` has no step {n}"
            )));
        }
        let next = n + 1;
        let snapshot = s.feed.freeze();
        let Some(step) = doc.step_mut(next) else {
            return Ok(AdvanceResponse {
                manual_id: id,
                version: doc.version,
                next_step: None,
                snapshot: None,
            });
        };
        step.spatial_snapshot = Some(snapshot.clone());
        let version = s.store.update_manual(&id, &doc)?;
        Ok(AdvanceResponse {
            manual_id: id,
            version,
            next_step: Some(next),
            snapshot: Some(snapshot),
        })
    })
    .await?;
    Ok(with_version(resp.version, Json(resp).into_response()))
}

#[derive(Debug, Serialize)]
struct QueueItem {
    manual_id: String,
    title: String,
    version: u32,
    step_id: u32,
    original_text: String,
    simplified_text: String,
    display_text: String,
}

async fn review_queue(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let items = blocking(&state, |s| {
        let mut items = Vec::new();
        for id in s.store.list_ids()? {
            let doc = s.store.get_manual(&id, None)?;
            for step in doc
                .steps
                .iter()
                .filter(|st| st.status == StepStatus::Simplified)
            {
                items.push(QueueItem {
                    manual_id: doc.manual_id.clone(),
                    title: doc.title.clone(),
                    version: doc.version,
                    step_id: step.step_id,
                    original_text: step.original_text.clone(),
                    simplified_text: step.display_text().to_string(),
                    display_text: step.rendered_text(None),
                });
            }
        }
        Ok(items)
    })
    .await?;
    Ok(Json(items).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject { error_class: ErrorClass },
    Edit { text: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerdictRequest {
    manual_id: String,
    #[serde(default)]
    base_version: Option<u32>,
    verdict: Verdict,
}

#[derive(Debug, Serialize)]
struct VerdictResponse {
    manual_id: String,
    version: u32,
    step_id: u32,
    status: StepStatus,
    gold: GoldSample,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ValidationReport>,
}

/// Records an expert verdict: the step becomes Reviewed in a new manual
/// version and one gold sample is appended. Rejection reverts the step to
/// its original text; edits are validated first.
async fn verdict(
    State(state): State<Arc<AppState>>,
    Path(step_id): Path<u32>,
    ApiJson(req): ApiJson<VerdictRequest>,
) -> Result<Response, ApiError> {
    let resp = blocking(&state, move |s| {
        let mut doc = s.store.get_manual(&req.manual_id, None)?;
        if let Some(base) = req.base_version {
            doc.version = base;
        }
        let glossary = doc.glossary();
        let step = doc.step_mut(step_id).ok_or_else(|| {
            ApiError::not_found(format!("manual `{}` has no step {step_id}", req.manual_id))
        })?;
        if step.status == StepStatus::Draft {
            return Err(ApiError::conflict(format!(
                "step {step_id} has not been simplified"
            )));
        }
        let original = step.original_text.clone();
        let current = step.display_text().to_string();
        let mut report = None;
        let gold = match &req.verdict {
            Verdict::Accept => GoldSample::correct(&original, &current, GoldSource::ExpertReview),
            Verdict::Reject { error_class } => {
                step.simplified_text = Some(original.clone());
                GoldSample::erroneous(&original, &current, *error_class, GoldSource::ExpertReview)
            }
            Verdict::Edit { text } => {
                let validator = Validator {
                    meaning_threshold: s.pipeline_config.meaning_threshold,
                    ..Validator::new(s.pipeline_config.profile, glossary, s.classifier.clone())
                };
                let r = validator.validate(
                    &format!("{}/{step_id}/edit", req.manual_id),
                    &original,
                    text,
                )?;
                if !r.passed() {
                    return Err(ApiError::new(
                        StatusCode::UNPROCESSABLE_ENTITY,
                        "validation_failed",
                        serde_json::to_string(&r).unwrap_or_default(),
                    ));
                }
                report = Some(r);
                step.simplified_text = Some(text.clone());
                GoldSample::correct(&original, text, GoldSource::ExpertReview)
            }
        };
        step.status = StepStatus::Reviewed;
        let status = step.status;
        let version = s.store.update_manual(&req.manual_id, &doc)?;
        s.store.append_gold(&gold)?;
        Ok(VerdictResponse {
            manual_id: req.manual_id,
            version,
            step_id,
            status,
            gold,
            report,
        })
    })
    .await?;
    Ok(with_version(resp.version, Json(resp).into_response()))
}

#[derive(Debug, Serialize)]
struct TrainResponse {
    version: u64,
    trained_on: usize,
    degenerate: bool,
    w_diag: Vec<f64>,
    b: f64,
    loss_history: Vec<f64>,
}

/// Retrains from the gold store and swaps the model in. The optional body
/// overrides fields of the configured training parameters.
async fn train_model(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let overrides: Value = optional_body::<Option<Value>>(&body)?.unwrap_or(Value::Null);
    let resp = blocking(&state, move |s| {
        let mut merged =
            serde_json::to_value(&s.training).map_err(|e| ApiError::internal(e.to_string()))?;
        match overrides {
            Value::Null => {}
            Value::Object(o) => {
                let m = merged
                    .as_object_mut()
                    .expect("config serializes to an object");
                m.extend(o);
            }
            _ => {
                return Err(ApiError::unprocessable(
                    "training overrides must be a JSON object",
                ))
            }
        }
        let config: TrainConfig =
            serde_json::from_value(merged).map_err(|e| ApiError::unprocessable(e.to_string()))?;
        let _guard = s.train_lock.lock().unwrap_or_else(|e| e.into_inner());
        let gold = s.store.load_gold()?;
        let featurizer = ClassifierFeaturizer {
            classifier: s.classifier.as_ref(),
            default_probability: config.default_probability,
        };
        let report = train(&gold, &featurizer, &s.registry, &config)?;
        let mut model = report.model;
        model.version = s.model.load().version + 1;
        s.store.save_model(&model)?;
        s.model.store(Arc::new(model.clone()));
        Ok(TrainResponse {
            version: model.version,
            trained_on: model.trained_on,
            degenerate: report.degenerate,
            w_diag: model.w_diag,
            b: model.b,
            loss_history: report.loss_history,
        })
    })
    .await?;
    Ok(Json(resp).into_response())
}

async fn get_model(State(state): State<Arc<AppState>>) -> Json<CalibrationModel> {
    Json(state.model.load().as_ref().clone())
}
