use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use sacode_core::analytics::{compare, frequency_table, question_flow_stats, FlowMode};
use sacode_core::report::{chart_data, render_comparison, render_flow, render_frequency};
use sacode_core::session::{ItemState, SessionError};
use sacode_core::{parse_dataset, Answer, Dataset, DatasetFormat, ReportFormat, Session, Workspace};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex as AsyncMutex;

use crate::error::{ApiEnvelope, ApiError};

type Slot = Arc<AsyncMutex<Option<Session>>>;

/// Shared state: the data directory plus one lock per session, so
/// mutations of a session are serialized while sessions stay independent.
#[derive(Clone)]
pub struct AppState {
    workspace: Arc<Workspace>,
    slots: Arc<Mutex<HashMap<String, Slot>>>,
}

impl AppState {
    pub fn new(workspace: Workspace) -> Self {
        AppState {
            workspace: Arc::new(workspace),
            slots: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    fn slot(&self, key: &str) -> Slot {
        let mut slots = self.slots.lock().expect("slot map lock");
        slots.entry(key.to_string()).or_default().clone()
    }

    /// Loads the session into its slot on first use.
    async fn locked(&self, key: &str) -> Result<tokio::sync::OwnedMutexGuard<Option<Session>>, ApiError> {
        let mut guard = self.slot(key).lock_owned().await;
        if guard.is_none() {
            *guard = Some(self.workspace.load_session(key)?);
        }
        Ok(guard)
    }

    async fn snapshot(&self, key: &str) -> Result<Session, ApiError> {
        Ok(self.locked(key).await?.as_ref().expect("loaded").clone())
    }

    /// Applies `f` to a copy of the session, persists the new events, then
    /// publishes the copy. A failure at any step leaves the session as it was.
    async fn mutate<T>(
        &self,
        key: &str,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<T, ApiError> {
        let mut guard = self.locked(key).await?;
        let current = guard.as_ref().expect("loaded");
        let mut next = current.clone();
        let before = next.events().len();
        let out = f(&mut next)?;
        self.workspace.sessions().append(key, &next.events()[before..])?;
        *guard = Some(next);
        Ok(out)
    }
}

fn ok<T: Serialize>(payload: T) -> Response {
    Json(ApiEnvelope::Ok { payload }).into_response()
}

fn created<T: Serialize>(payload: T) -> Response {
    (StatusCode::CREATED, Json(ApiEnvelope::Ok { payload })).into_response()
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets).post(upload_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/items/{item}", get(get_item))
        .route("/sessions/{id}/items/{item}/answer", post(answer))
        .route("/sessions/{id}/items/{item}/undo", post(undo))
        .route("/sessions/{id}/items/{item}/tags", put(set_tags))
        .route("/sessions/{id}/report", get(report))
        .route("/sessions/{id}/flow", get(flow))
        .route("/compare", get(compare_sessions))
        .route("/tree", get(tree))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

// ---------------------------------------------------------------------------
// Datasets

#[derive(Serialize)]
struct DatasetSummary {
    dataset_id: String,
    title: String,
    item_count: usize,
    category_count: usize,
    bundled: bool,
}

fn summarize(d: &Dataset) -> DatasetSummary {
    DatasetSummary {
        dataset_id: d.dataset_id.clone(),
        title: d.title.clone(),
        item_count: d.items.len(),
        category_count: d.categories.len(),
        bundled: sacode_core::corpus::BUNDLED_DATASET_IDS.contains(&d.dataset_id.as_str()),
    }
}

async fn list_datasets(State(st): State<AppState>) -> Result<Response, ApiError> {
    let all = st.workspace.datasets()?;
    Ok(ok(all.iter().map(summarize).collect::<Vec<_>>()))
}

async fn get_dataset(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(ok(st.workspace.dataset(&id)?))
}

/// Accepts the JSON dataset format, or CSV when the content type says so.
async fn upload_dataset(State(st): State<AppState>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let is_csv = headers
        .get(axum::http::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::validation("body is not UTF-8"))?;
    let format = if is_csv { DatasetFormat::Csv } else { DatasetFormat::Json };
    let dataset = parse_dataset(text, format)?;
    st.workspace.add_dataset(&dataset)?;
    Ok(created(summarize(&dataset)))
}

// ---------------------------------------------------------------------------
// Sessions

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    dataset_id: String,
    coder_id: String,
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    dataset_id: String,
    coder_id: String,
    tree_fingerprint: String,
    created_at: String,
    updated_at: String,
    coded: usize,
    items: usize,
    complete: bool,
}

fn session_summary(s: &Session) -> SessionSummary {
    SessionSummary {
        session_id: s.session_id().to_string(),
        dataset_id: s.dataset_id().to_string(),
        coder_id: s.coder_id().to_string(),
        tree_fingerprint: s.tree_fingerprint().to_string(),
        created_at: s.created_at().to_rfc3339(),
        updated_at: s.updated_at().to_rfc3339(),
        coded: s.coded_count(),
        items: s.item_count(),
        complete: s.is_complete(),
    }
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_json(&body)?;
    if req.coder_id.trim().is_empty() {
        return Err(ApiError::validation("coder_id must not be empty"));
    }
    let dataset = st.workspace.dataset(&req.dataset_id)?;
    let session = Session::create(&dataset, st.workspace.tree().clone(), req.coder_id.trim());
    let key = session.session_id().to_string();
    st.workspace.sessions().create(&key, &session)?;
    let summary = session_summary(&session);
    *st.slot(&key).lock().await = Some(session);
    Ok(created(summary))
}

/// Lists every stored session. Sessions are keyed by file name; for sessions
/// created here that is the session id.
async fn list_sessions(State(st): State<AppState>) -> Result<Response, ApiError> {
    let mut out = Vec::new();
    for key in st.workspace.sessions().keys()? {
        let s = st.snapshot(&key).await?;
        let mut v = serde_json::to_value(session_summary(&s)).expect("summary serializes");
        v["key"] = json!(key);
        out.push(v);
    }
    Ok(ok(out))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.snapshot(&id).await?;
    let mut v = serde_json::to_value(session_summary(&s)).expect("summary serializes");
    v["decisions"] = json!(s.decisions().values().collect::<Vec<_>>());
    v["in_progress"] = json!(s.in_progress());
    Ok(ok(v))
}

fn item_view(st: &AppState, s: &Session, state: &ItemState) -> Result<Value, ApiError> {
    let dataset = st.workspace.dataset(s.dataset_id())?;
    let item = dataset
        .item(&state.item_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown item `{}`", state.item_id)))?;
    let question = state
        .current_question
        .as_ref()
        .and_then(|q| s.tree().question(q))
        .map(|q| json!({ "id": q.id, "text": q.text }));
    Ok(json!({
        "item": item,
        "state": state,
        "question": question,
        "progress": { "coded": s.coded_count(), "total": s.item_count() },
    }))
}

async fn next_item(State(st): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let s = st.snapshot(&id).await?;
    match s.next_pending() {
        None => Ok(ok(json!({
            "item": null,
            "question": null,
            "progress": { "coded": s.coded_count(), "total": s.item_count() },
        }))),
        Some(item) => {
            let state = s.item_state(item)?;
            Ok(ok(item_view(&st, &s, &state)?))
        }
    }
}

async fn get_item(State(st): State<AppState>, Path((id, item)): Path<(String, String)>) -> Result<Response, ApiError> {
    let s = st.snapshot(&id).await?;
    let state = s.item_state(&item)?;
    Ok(ok(item_view(&st, &s, &state)?))
}

/// Parsed by hand so a bad value is a validation error in the envelope.
fn parse_answer(body: &[u8]) -> Result<Answer, ApiError> {
    let v: Value = parse_json(body)?;
    let raw = v
        .get("answer")
        .and_then(Value::as_str)
        .ok_or_else(|| ApiError::validation("body must be {\"answer\": \"yes\" | \"no\"}"))?;
    Answer::parse(raw).ok_or_else(|| ApiError::validation(format!("answer must be yes or no, got `{raw}`")))
}

async fn answer(
    State(st): State<AppState>,
    Path((id, item)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let a = parse_answer(&body)?;
    let outcome = st.mutate(&id, |s| s.answer(&item, a)).await?;
    Ok(ok(outcome))
}

async fn undo(
    State(st): State<AppState>,
    Path((id, item)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let token = match headers.get("idempotency-key") {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| ApiError::validation("Idempotency-Key must be visible ASCII"))?
                .to_string(),
        ),
        None => None,
    };
    let state = st.mutate(&id, |s| s.undo_with_token(&item, token.as_deref())).await?;
    Ok(ok(state))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TagsBody {
    tags: BTreeSet<String>,
}

async fn set_tags(
    State(st): State<AppState>,
    Path((id, item)): Path<(String, String)>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: TagsBody = parse_json(&body)?;
    let decision = st.mutate(&id, |s| s.set_supplementary_tags(&item, req.tags)).await?;
    Ok(ok(decision))
}

// ---------------------------------------------------------------------------
// Analytics

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
    mode: Option<String>,
    sessions: Option<String>,
}

fn format_of(q: &FormatQuery) -> Result<ReportFormat, ApiError> {
    match &q.format {
        None => Ok(ReportFormat::Json),
        Some(f) => Ok(f.parse()?),
    }
}

/// JSON formats are embedded as values; text formats as a string.
fn rendered(format: ReportFormat, document: String) -> Response {
    match format {
        ReportFormat::Json | ReportFormat::Chart => {
            ok(serde_json::from_str::<Value>(&document).expect("renderer emits JSON"))
        }
        ReportFormat::Table | ReportFormat::Csv => ok(document),
    }
}

async fn report(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
) -> Result<Response, ApiError> {
    let format = format_of(&q)?;
    let s = st.snapshot(&id).await?;
    let dataset = st.workspace.dataset(s.dataset_id())?;
    let r = frequency_table(&s, &dataset)?;
    Ok(rendered(format, render_frequency(&r, format)))
}

async fn flow(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FormatQuery>,
) -> Result<Response, ApiError> {
    let format = format_of(&q)?;
    let mode: FlowMode = match &q.mode {
        None => FlowMode::RecordedPaths,
        Some(m) => m.parse().map_err(ApiError::validation)?,
    };
    let s = st.snapshot(&id).await?;
    let stats = question_flow_stats(&s, mode)?;
    Ok(rendered(format, render_flow(&stats, format)?))
}

async fn compare_sessions(State(st): State<AppState>, Query(q): Query<FormatQuery>) -> Result<Response, ApiError> {
    let format = format_of(&q)?;
    let keys: Vec<&str> = q
        .sessions
        .as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .collect();
    if keys.is_empty() {
        return Err(ApiError::validation("sessions=<id>,<id>,... is required"));
    }
    let mut sessions = Vec::with_capacity(keys.len());
    for k in keys {
        sessions.push(st.snapshot(k).await?);
    }
    let refs: Vec<&Session> = sessions.iter().collect();
    let matrix = compare(&refs)?;
    Ok(match format {
        ReportFormat::Chart => ok(chart_data(&matrix)),
        f => rendered(f, render_comparison(&matrix, f)),
    })
}

async fn tree(State(st): State<AppState>) -> Response {
    let t = st.workspace.tree();
    let mut v = serde_json::to_value(t.definition()).expect("definition serializes");
    v["fingerprint"] = json!(t.fingerprint());
    ok(v)
}

