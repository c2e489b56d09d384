//! JSON-over-HTTP interface to a [`Workspace`]. All routes live under `/api`.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tmatch_core::analytics::{
    activity_histogram, heatmap_across, person_channel_counts, person_scatter, spatial_distribution,
    structure_projection,
};
use tmatch_core::{Actor, NodeId, SimilarityConfig, Verdict, ViewConfig};

use crate::workspace::{SeedChoice, SessionRecord, Workspace, WorkspaceError};

/// A workspace failure rendered as `{"error": {"code", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_request".into(),
            message: message.into(),
        }
    }
}

impl From<WorkspaceError> for ApiError {
    fn from(err: WorkspaceError) -> Self {
        let code = err.code();
        let status = match code {
            "not_found" => StatusCode::NOT_FOUND,
            "conflict" => StatusCode::CONFLICT,
            "payload_too_large" => StatusCode::PAYLOAD_TOO_LARGE,
            "storage_error" => StatusCode::INTERNAL_SERVER_ERROR,
            "invalid_graph" | "match_error" => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            code: code.to_string(),
            message: err.to_string(),
        }
    }
}

macro_rules! rejection {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(r: $t) -> Self {
                ApiError {
                    status: r.status(),
                    code: "invalid_request".into(),
                    message: r.body_text(),
                }
            }
        }
    )*};
}

rejection!(JsonRejection, PathRejection, QueryRejection);

/// `axum::Json` with failures reported in the API error format.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Body<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Path<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: ErrorDetail {
                code: &self.code,
                message: &self.message,
            },
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = Arc<Workspace>;

/// Runs workspace work off the async executor.
async fn blocking<T, F>(ws: Shared, f: F) -> Result<T, ApiError>
where
    F: FnOnce(&Workspace) -> Result<T, WorkspaceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&ws))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal".into(),
            message: e.to_string(),
        })?
        .map_err(ApiError::from)
}

pub fn router(ws: Shared) -> Router {
    // CSV travels as JSON strings; escaping can at most double its size.
    let limit = usize::try_from(ws.config().max_upload_bytes.saturating_mul(2))
        .unwrap_or(usize::MAX)
        .saturating_add(1 << 20);
    let api = Router::new()
        .route("/graphs", get(list_graphs).post(upload_graph))
        .route("/graphs/{id}", get(get_graph).delete(delete_graph))
        .route("/graphs/{id}/view", put(put_view))
        .route("/graphs/{id}/histogram", get(histogram))
        .route("/graphs/{id}/scatter", get(scatter))
        .route("/graphs/{id}/spatial", get(spatial))
        .route("/graphs/{id}/structure", get(structure))
        .route("/graphs/{id}/stats", get(stats))
        .route("/graphs/{id}/persons/{pid}/channels", get(person_channels))
        .route("/heatmap", post(heatmap))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/candidates", get(candidates))
        .route("/sessions/{id}/decisions", post(decide))
        .route("/sessions/{id}/run-auto", post(run_auto))
        .route("/compare", post(compare))
        .fallback(not_found);
    Router::new()
        .nest("/api", api)
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(limit))
        .with_state(ws)
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        code: "not_found".into(),
        message: "no such endpoint".into(),
    }
}

async fn list_graphs(State(ws): State<Shared>) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, |ws| Ok(ws.list_graphs())).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UploadBody {
    id: String,
    /// Edge CSV text.
    edges: String,
    /// Optional node CSV text.
    #[serde(default)]
    nodes: Option<String>,
}

async fn upload_graph(State(ws): State<Shared>, Body(body): Body<UploadBody>) -> Result<Response, ApiError> {
    let info = blocking(ws, move |ws| {
        ws.load_graph(
            &body.id,
            body.edges.as_bytes(),
            body.nodes.as_deref().map(str::as_bytes),
        )
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn get_graph(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, move |ws| Ok(ws.graph(&id)?.info())).await?))
}

async fn delete_graph(State(ws): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    blocking(ws, move |ws| ws.remove_graph(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_view(
    State(ws): State<Shared>,
    Path(id): Path<String>,
    Body(config): Body<ViewConfig>,
) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, move |ws| ws.set_view(&id, config)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinQuery {
    bin_width: Option<f64>,
    #[serde(default)]
    origin: f64,
}

async fn histogram(
    State(ws): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<BinQuery>,
) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| {
            Ok(activity_histogram(&ws.graph(&id)?.view, q.bin_width, q.origin)?)
        })
        .await?,
    ))
}

async fn scatter(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| Ok(person_scatter(&ws.graph(&id)?.view))).await?,
    ))
}

async fn spatial(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| Ok(spatial_distribution(&ws.graph(&id)?.view))).await?,
    ))
}

async fn structure(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| Ok(structure_projection(&ws.graph(&id)?.view))).await?,
    ))
}

async fn stats(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| Ok(ws.graph(&id)?.view.stats())).await?,
    ))
}

async fn person_channels(
    State(ws): State<Shared>,
    Path((id, pid)): Path<(String, u64)>,
) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| {
            Ok(person_channel_counts(&ws.graph(&id)?.view, NodeId(pid))?)
        })
        .await?,
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapEntry {
    graph: String,
    person: NodeId,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeatmapBody {
    entries: Vec<HeatmapEntry>,
    channel: String,
    #[serde(default)]
    bin_width: Option<f64>,
    #[serde(default)]
    origin: f64,
}

async fn heatmap(State(ws): State<Shared>, Body(body): Body<HeatmapBody>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| {
            let graphs = body
                .entries
                .iter()
                .map(|e| ws.graph(&e.graph))
                .collect::<Result<Vec<_>, _>>()?;
            let entries: Vec<_> = graphs
                .iter()
                .zip(&body.entries)
                .map(|(g, e)| (&g.view, e.person))
                .collect();
            Ok(heatmap_across(
                &entries,
                &body.channel,
                body.bin_width,
                body.origin,
            )?)
        })
        .await?,
    ))
}

async fn list_sessions(State(ws): State<Shared>) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, |ws| Ok(ws.list_sessions())).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    id: Option<String>,
    template: String,
    target: String,
    /// `[[template, target], ...]`; required unless `auto_seed` is set.
    #[serde(default)]
    seed: Option<Vec<(NodeId, NodeId)>>,
    #[serde(default)]
    auto_seed: bool,
    #[serde(default)]
    config: Option<SimilarityConfig>,
}

async fn create_session(
    State(ws): State<Shared>,
    Body(body): Body<CreateSession>,
) -> Result<Response, ApiError> {
    let seed = match (body.seed, body.auto_seed) {
        (Some(_), true) => return Err(ApiError::bad_request("give either seed or auto_seed, not both")),
        (None, false) => return Err(ApiError::bad_request("a seed or auto_seed: true is required")),
        (None, true) => SeedChoice::Auto,
        (Some(pairs), false) => {
            let n = pairs.len();
            let seed: BTreeMap<NodeId, NodeId> = pairs.into_iter().collect();
            if seed.len() != n {
                return Err(ApiError::bad_request("seed lists a template node twice"));
            }
            SeedChoice::Explicit(seed)
        }
    };
    let state = blocking(ws, move |ws| {
        ws.create_session(
            body.id.as_deref(),
            &body.template,
            &body.target,
            seed,
            body.config,
        )
    })
    .await?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportBody {
    #[serde(default)]
    id: Option<String>,
    record: SessionRecord,
}

async fn import_session(
    State(ws): State<Shared>,
    Body(body): Body<ImportBody>,
) -> Result<Response, ApiError> {
    let state = blocking(ws, move |ws| ws.import_session(body.record, body.id.as_deref())).await?;
    Ok((StatusCode::CREATED, Json(state)).into_response())
}

async fn get_session(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, move |ws| ws.session(&id)).await?))
}

async fn delete_session(State(ws): State<Shared>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    blocking(ws, move |ws| ws.remove_session(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn export_session(State(ws): State<Shared>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(blocking(ws, move |ws| ws.export_session(&id)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidatesQuery {
    #[serde(default = "default_k")]
    k: usize,
}

fn default_k() -> usize {
    10
}

async fn candidates(
    State(ws): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<CandidatesQuery>,
) -> ApiResult<impl Serialize> {
    if q.k == 0 {
        return Err(ApiError::bad_request("k must be positive"));
    }
    Ok(Json(blocking(ws, move |ws| ws.candidates(&id, q.k)).await?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    template: NodeId,
    target: NodeId,
    verdict: Verdict,
    #[serde(default = "default_actor")]
    actor: Actor,
}

fn default_actor() -> Actor {
    Actor::User
}

#[derive(Serialize)]
struct DecisionResponse {
    decision: tmatch_core::Decision,
    matched: usize,
    unmatched: usize,
    session: crate::workspace::SessionState,
}

async fn decide(
    State(ws): State<Shared>,
    Path(id): Path<String>,
    Body(body): Body<DecisionBody>,
) -> ApiResult<impl Serialize> {
    let (decision, state) = blocking(ws, move |ws| {
        ws.decide(&id, body.template, body.target, body.verdict, body.actor)
    })
    .await?;
    Ok(Json(DecisionResponse {
        decision,
        matched: state.summary.matched.len(),
        unmatched: state.summary.unmatched.len(),
        session: state,
    }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunAutoBody {
    #[serde(default)]
    max_iterations: Option<usize>,
}

#[derive(Serialize)]
struct RunAutoResponse {
    report: tmatch_core::matcher::RunReport,
    session: crate::workspace::SessionState,
}

async fn run_auto(State(ws): State<Shared>, Path(id): Path<String>, raw: Bytes) -> ApiResult<impl Serialize> {
    let body: RunAutoBody = if raw.iter().all(u8::is_ascii_whitespace) {
        RunAutoBody::default()
    } else {
        serde_json::from_slice(&raw).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))?
    };
    let (report, session) = blocking(ws, move |ws| {
        let max = body.max_iterations.unwrap_or(ws.config().auto.max_iterations);
        ws.run_auto(&id, max)
    })
    .await?;
    Ok(Json(RunAutoResponse { report, session }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareBody {
    template: String,
    candidates: Vec<String>,
}

async fn compare(State(ws): State<Shared>, Body(body): Body<CompareBody>) -> ApiResult<impl Serialize> {
    Ok(Json(
        blocking(ws, move |ws| ws.compare(&body.template, &body.candidates)).await?,
    ))
}
