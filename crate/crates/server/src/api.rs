//! The `/v1` JSON API.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};

use inspire_core::corpus::{AppRecord, StopwordLanguageDetector};
use inspire_core::evaluation::AssessmentEntry;
use inspire_core::llm_gateway::Gateway;
use inspire_core::refinement::{Approach, Feature, InspireMode, InspireOptions, NodeEdit};
use inspire_core::store::{ErrorCode, NewTree, StoreError, Workspace};

pub const CORRELATION_HEADER: &str = "x-correlation-id";

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub correlation_id: String,
}

/// Error produced by a handler; the middleware adds the correlation id.
#[derive(Debug, Clone)]
pub struct Failure {
    pub code: ErrorCode,
    pub message: String,
}

impl Failure {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

impl From<JsonRejection> for Failure {
    fn from(e: JsonRejection) -> Self {
        Self::validation(e.body_text())
    }
}

impl From<QueryRejection> for Failure {
    fn from(e: QueryRejection) -> Self {
        Self::validation(e.body_text())
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut resp = status.into_response();
        resp.extensions_mut().insert(self);
        resp
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationId(pub String);

type ApiResult<T> = Result<T, Failure>;

/// Shared service state.
pub struct AppState {
    pub ws: Workspace,
    pub gateway: Gateway,
    /// Held for reading by anything that reads the corpus or index, and for
    /// writing by ingestion and index rebuilds.
    data: RwLock<()>,
    trees: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    /// Serializes tree creation (id allocation) and assessment writes.
    create: Mutex<()>,
    assessments: Mutex<()>,
}

impl AppState {
    pub fn new(ws: Workspace, gateway: Gateway) -> Arc<Self> {
        Arc::new(Self {
            ws,
            gateway,
            data: RwLock::new(()),
            trees: Mutex::new(HashMap::new()),
            create: Mutex::new(()),
            assessments: Mutex::new(()),
        })
    }

    async fn tree_lock(&self, tree_id: &str) -> Arc<Mutex<()>> {
        self.trees.lock().await.entry(tree_id.to_string()).or_default().clone()
    }
}

/// Run blocking engine work off the async executor.
async fn blocking<T, F>(state: &Arc<AppState>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&AppState) -> Result<T, StoreError> + Send + 'static,
{
    let state = state.clone();
    tokio::task::spawn_blocking(move || f(&state))
        .await
        .map_err(|e| Failure::new(ErrorCode::Internal, format!("worker failed: {e}")))?
        .map_err(Failure::from)
}

pub fn router(state: Arc<AppState>) -> Router {
    let v1 = Router::new()
        .route("/corpus", post(ingest).get(corpus_stats))
        .route("/index", post(build_index).get(query_index))
        .route("/trees", post(create_tree).get(list_trees))
        .route("/trees/{tree_id}", get(get_tree))
        .route("/trees/{tree_id}/nodes/{node_id}", patch(edit_node).delete(delete_node))
        .route("/trees/{tree_id}/nodes/{node_id}/inspire", post(inspire))
        .route("/assessments", post(record_assessment).get(report))
        .route("/assessments/venn", get(venn))
        .route("/apps/{app_id}", get(get_app));
    Router::new()
        .route("/health", get(health))
        .nest("/v1", v1)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(middleware::from_fn(correlate))
        .with_state(state)
}

/// Assign a correlation id, log the request and render handler failures as
/// [`ApiError`] bodies.
async fn correlate(mut req: Request, next: Next) -> Response {
    let id = req
        .headers()
        .get(CORRELATION_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty() && v.len() <= 128)
        .map(str::to_string)
        .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    req.extensions_mut().insert(CorrelationId(id.clone()));
    let started = std::time::Instant::now();
    let mut resp = next.run(req).await;
    if let Some(f) = resp.extensions_mut().remove::<Failure>() {
        let status = resp.status();
        let body = ApiError {
            code: f.code,
            message: f.message,
            correlation_id: id.clone(),
        };
        tracing::warn!(correlation_id = %id, %method, %path, status = status.as_u16(), code = body.code.as_str(), message = %body.message, "request failed");
        resp = (status, Json(body)).into_response();
    } else {
        tracing::info!(correlation_id = %id, %method, %path, status = resp.status().as_u16(), elapsed_ms = started.elapsed().as_millis() as u64, "request");
    }
    if let Ok(v) = HeaderValue::from_str(&id) {
        resp.headers_mut().insert(CORRELATION_HEADER, v);
    }
    resp
}

async fn not_found() -> Failure {
    Failure::new(ErrorCode::NotFound, "no such endpoint")
}

async fn method_not_allowed() -> Response {
    let mut resp = Failure::validation("method not allowed for this endpoint").into_response();
    *resp.status_mut() = StatusCode::METHOD_NOT_ALLOWED;
    resp
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok", "version": env!("CARGO_PKG_VERSION")}))
}

// corpus and index

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestBody {
    records: Option<Vec<AppRecord>>,
    /// Record lines in the corpus file format.
    jsonl: Option<String>,
}

async fn ingest(State(state): State<Arc<AppState>>, body: Result<Json<IngestBody>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(body) = body?;
    let _w = state.data.write().await;
    let summary = blocking(&state, move |s| match (body.records, body.jsonl) {
        (Some(records), None) => s.ws.ingest_records(records, Vec::new(), &StopwordLanguageDetector),
        (None, Some(text)) => s.ws.ingest(&text, &StopwordLanguageDetector),
        _ => Err(StoreError::Validation("provide exactly one of `records` or `jsonl`".into())),
    })
    .await?;
    Ok(Json(serde_json::to_value(summary).expect("serializes")))
}

async fn corpus_stats(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let _r = state.data.read().await;
    let stats = blocking(&state, |s| s.ws.corpus_stats()).await?;
    Ok(Json(serde_json::to_value(stats).expect("serializes")))
}

async fn build_index(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let _w = state.data.write().await;
    let summary = blocking(&state, |s| s.ws.build_index()).await?;
    Ok(Json(serde_json::to_value(summary).expect("serializes")))
}

#[derive(Debug, Deserialize)]
pub struct QueryParams {
    q: Option<String>,
    k: Option<usize>,
}

/// With `q`, the top-`k` apps; without it, a summary of the index.
async fn query_index(State(state): State<Arc<AppState>>, params: Result<Query<QueryParams>, QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(params) = params?;
    let _r = state.data.read().await;
    match params.q {
        None => {
            let summary = blocking(&state, |s| s.ws.index_summary()).await?;
            Ok(Json(serde_json::to_value(summary).expect("serializes")))
        }
        Some(q) => {
            let k = params.k.unwrap_or(state.ws.config().index.k);
            let hits = blocking(&state, move |s| s.ws.query_index(&q, k)).await?;
            Ok(Json(json!({ "hits": hits })))
        }
    }
}

async fn get_app(State(state): State<Arc<AppState>>, Path(app_id): Path<String>) -> ApiResult<Json<AppRecord>> {
    let _r = state.data.read().await;
    Ok(Json(blocking(&state, move |s| s.ws.app(&app_id)).await?))
}

// trees

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTreeBody {
    #[serde(alias = "sub-feature")]
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    tree_id: Option<String>,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    k: Option<usize>,
    /// When set, the whole tree is generated with this pipeline.
    #[serde(default)]
    approach: Option<Approach>,
}

async fn create_tree(State(state): State<Arc<AppState>>, body: Result<Json<CreateTreeBody>, JsonRejection>) -> ApiResult<Response> {
    let Json(body) = body?;
    let root = Feature::new(body.name, body.description).map_err(|e| Failure::validation(e.to_string()))?;
    let request = NewTree {
        tree_id: body.tree_id,
        group: body.group,
        n: body.n,
        k: body.k,
    };
    let _c = state.create.lock().await;
    let _r = state.data.read().await;
    let tree = blocking(&state, move |s| match body.approach {
        None => s.ws.create_tree(&root, &request),
        Some(a) => s.ws.generate_tree(&root, a, &request, &s.gateway),
    })
    .await?;
    Ok((StatusCode::CREATED, Json(tree)).into_response())
}

async fn list_trees(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let trees = blocking(&state, |s| s.ws.list_trees()).await?;
    Ok(Json(json!({ "trees": trees })))
}

async fn get_tree(State(state): State<Arc<AppState>>, Path(tree_id): Path<String>) -> ApiResult<Response> {
    let tree = blocking(&state, move |s| s.ws.load_tree(&tree_id)).await?;
    Ok(Json(tree).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EditBody {
    #[serde(rename = "sub-feature", alias = "name")]
    name: Option<String>,
    description: Option<String>,
    /// Expected current tree version; a mismatch is a conflict.
    version: Option<u64>,
}

async fn edit_node(
    State(state): State<Arc<AppState>>,
    Path((tree_id, node_id)): Path<(String, String)>,
    body: Result<Json<EditBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    let lock = state.tree_lock(&tree_id).await;
    let _g = lock.lock().await;
    let edit = NodeEdit {
        name: body.name,
        description: body.description,
    };
    let tree = blocking(&state, move |s| s.ws.edit_node(&tree_id, &node_id, &edit, body.version)).await?;
    Ok(Json(tree).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct VersionParam {
    version: Option<u64>,
}

async fn delete_node(
    State(state): State<Arc<AppState>>,
    Path((tree_id, node_id)): Path<(String, String)>,
    params: Result<Query<VersionParam>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(params) = params?;
    let lock = state.tree_lock(&tree_id).await;
    let _g = lock.lock().await;
    let tree = blocking(&state, move |s| s.ws.delete_node(&tree_id, &node_id, params.version)).await?;
    Ok(Json(tree).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct InspireParams {
    source: Option<Approach>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspireBody {
    source: Option<Approach>,
    feedback: Option<String>,
    mode: Option<InspireMode>,
    n: Option<usize>,
}

async fn inspire(
    State(state): State<Arc<AppState>>,
    Path((tree_id, node_id)): Path<(String, String)>,
    params: Result<Query<InspireParams>, QueryRejection>,
    body: Option<Json<InspireBody>>,
) -> ApiResult<Json<Value>> {
    let Query(params) = params?;
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let source = params
        .source
        .or(body.source)
        .ok_or_else(|| Failure::validation("source is required: llm or appstore"))?;
    let options = InspireOptions {
        feedback: body.feedback,
        mode: body.mode.unwrap_or_default(),
        n: body.n,
    };
    let lock = state.tree_lock(&tree_id).await;
    let _g = lock.lock().await;
    let _r = state.data.read().await;
    let (tree, ids) = blocking(&state, move |s| s.ws.inspire(&tree_id, &node_id, source, &options, &s.gateway)).await?;
    Ok(Json(json!({ "tree": tree, "new_node_ids": ids })))
}

// assessments

async fn record_assessment(State(state): State<Arc<AppState>>, body: Result<Json<AssessmentEntry>, JsonRejection>) -> ApiResult<Response> {
    let Json(entry) = body?;
    let _a = state.assessments.lock().await;
    blocking(&state, move |s| s.ws.record_assessment(entry)).await?;
    Ok((StatusCode::CREATED, Json(json!({"status": "recorded"}))).into_response())
}

#[derive(Debug, Default, Deserialize)]
pub struct ReportParams {
    tables: Option<String>,
    format: Option<String>,
}

/// Parse a comma-separated table list such as `3,4,5`.
pub fn parse_tables(spec: Option<&str>) -> Result<Vec<u8>, String> {
    let Some(spec) = spec.filter(|s| !s.trim().is_empty()) else {
        return Ok(vec![3, 4, 5]);
    };
    spec.split(',')
        .map(|t| match t.trim().parse::<u8>() {
            Ok(n @ 3..=5) => Ok(n),
            _ => Err(format!("unknown table {t:?}; expected 3, 4 or 5")),
        })
        .collect()
}

async fn report(State(state): State<Arc<AppState>>, params: Result<Query<ReportParams>, QueryRejection>) -> ApiResult<Response> {
    let Query(params) = params?;
    let tables = parse_tables(params.tables.as_deref()).map_err(Failure::validation)?;
    let report = blocking(&state, |s| s.ws.report()).await?;
    match params.format.as_deref() {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("text") => {
            let text = report.to_text(&tables).map_err(|e| Failure::validation(e.to_string()))?;
            Ok(([(axum::http::header::CONTENT_TYPE, "text/plain; charset=utf-8")], Body::from(text)).into_response())
        }
        Some(other) => Err(Failure::validation(format!("unknown format {other:?}; expected json or text"))),
    }
}

#[derive(Debug, Deserialize)]
pub struct VennParams {
    a: String,
    b: String,
}

async fn venn(State(state): State<Arc<AppState>>, params: Result<Query<VennParams>, QueryRejection>) -> ApiResult<Json<Value>> {
    let Query(p) = params?;
    let r = blocking(&state, move |s| s.ws.venn(&p.a, &p.b)).await?;
    Ok(Json(serde_json::to_value(r).expect("serializes")))
}
