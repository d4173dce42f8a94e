//! HTTP service over filtering sessions.
//!
//! Every session sits behind its own lock, so mutations of one session are
//! serialized while different sessions proceed in parallel. Each mutation
//! bumps the session's revision and, when a state directory is configured,
//! rewrites `sessions/<id>.json` before the response is sent. On startup
//! those files are replayed.
//!
//! Error bodies are `{"code", "message"}`:
//!
//! | code                 | status |
//! |----------------------|--------|
//! | `bad_request`        | 400    |
//! | `bundle_invalid`     | 400    |
//! | `unknown_bundle`     | 404    |
//! | `unknown_session`    | 404    |
//! | `unknown_patch`      | 404    |
//! | `unknown_question`   | 404    |
//! | `question_resolved`  | 409    |
//! | `session_closed`     | 409    |
//! | `invalid_selection`  | 400    |
//! | `diff_parse_error`   | 400    |
//! | `empty_manual_patch` | 400    |
//! | `replay_diverged`    | 500    |
//! | `storage_error`      | 500    |

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use inpafer_core::attributes::prepare;
use inpafer_core::diff::render_unified_diff;
use inpafer_core::engine::{QuestionView, ResolvedBy, SessionView};
use inpafer_core::trace::{diff_view_over, LineClass};
use inpafer_core::{
    Answer, Attribute, BugBundle, EngineError, FamilySet, InteractiveQuestion, PatchId, QuestionId, QuestionState, SessionState,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::formats::SessionFile;
use crate::io::load_bundle_with_warnings;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip)]
    status: u16,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { code: code.into(), message: message.into(), status: status.as_u16() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    fn unknown_patch(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_patch", format!("no patch `{id}` in this bundle"))
    }

    pub fn status(&self) -> StatusCode {
        StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::UnknownQuestion(_) => StatusCode::NOT_FOUND,
            EngineError::AlreadyResolved(_) | EngineError::SessionClosed => StatusCode::CONFLICT,
            EngineError::InvalidSelection(_) | EngineError::Diff(_) | EngineError::EmptyManualPatch => StatusCode::BAD_REQUEST,
            EngineError::ReplayDiverged(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// A registered bundle with its question list built once.
#[derive(Debug)]
pub struct LoadedBundle {
    pub id: String,
    pub path: PathBuf,
    pub bundle: BugBundle,
    pub questions: Vec<InteractiveQuestion>,
}

impl LoadedBundle {
    pub fn new(id: String, path: PathBuf, bundle: BugBundle) -> Self {
        let questions = prepare(&bundle, FamilySet::all());
        LoadedBundle { id, path, bundle, questions }
    }
}

/// The snapshot returned by every session endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub bundle_id: String,
    pub revision: u64,
    pub created_at: u64,
    pub last_modified: u64,
    #[serde(flatten)]
    pub view: SessionView,
}

struct Session {
    bundle: Arc<LoadedBundle>,
    state: SessionState,
    revision: u64,
    created_at: u64,
    last_modified: u64,
    /// Rebuilt after every mutation; readers clone the `Arc`.
    published: Arc<Snapshot>,
}

impl Session {
    fn new(bundle: Arc<LoadedBundle>, state: SessionState, revision: u64, created_at: u64, last_modified: u64) -> Self {
        let view = state.snapshot(&bundle.bundle.failing_tests);
        let published = Arc::new(Snapshot { bundle_id: bundle.id.clone(), revision, created_at, last_modified, view });
        Session { bundle, state, revision, created_at, last_modified, published }
    }

    fn publish(&mut self) {
        self.published = Arc::new(Snapshot {
            bundle_id: self.bundle.id.clone(),
            revision: self.revision,
            created_at: self.created_at,
            last_modified: self.last_modified,
            view: self.state.snapshot(&self.bundle.bundle.failing_tests),
        });
    }

    fn file(&self) -> SessionFile {
        SessionFile {
            session_id: self.state.session_id.clone(),
            bundle: self.bundle.path.clone(),
            bundle_id: self.bundle.id.clone(),
            revision: self.revision,
            created_at: self.created_at,
            last_modified: self.last_modified,
            answer_log: self.state.answer_log.clone(),
            resolution: self.state.resolution.clone(),
        }
    }
}

/// Shared server state.
#[derive(Default)]
pub struct AppState {
    bundles: RwLock<HashMap<String, Arc<LoadedBundle>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    state_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleInfo {
    pub bundle_id: String,
    pub bug_id: String,
    pub path: PathBuf,
    pub patch_count: usize,
    pub question_count: usize,
    pub warnings: Vec<String>,
}

impl AppState {
    pub fn new() -> Self {
        AppState::default()
    }

    /// State persisted under `dir`; existing sessions there are restored.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("sessions"))?;
        let state = AppState { state_dir: Some(dir), ..AppState::default() };
        state.restore_sessions()?;
        Ok(state)
    }

    fn restore_sessions(&self) -> std::io::Result<()> {
        let Some(dir) = &self.state_dir else { return Ok(()) };
        for entry in fs::read_dir(dir.join("sessions"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let restored = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| serde_json::from_str::<SessionFile>(&text).map_err(|e| e.to_string()))
                .and_then(|file| self.restore_one(&file).map_err(|e| e.message));
            match restored {
                Ok(id) => log::info!("restored session {id}"),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(())
    }

    fn restore_one(&self, file: &SessionFile) -> Result<String, ApiError> {
        let bundle = match self.bundles.read().get(&file.bundle_id) {
            Some(b) if b.path == file.bundle => Some(b.clone()),
            _ => None,
        };
        let bundle = match bundle {
            Some(b) => b,
            None => {
                let info = self.register_bundle(&file.bundle)?;
                self.bundle(&info.bundle_id)?
            }
        };
        let state = file.replay(&bundle.bundle)?;
        let session = Session::new(bundle, state, file.revision, file.created_at, file.last_modified);
        self.sessions.write().insert(file.session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(file.session_id.clone())
    }

    /// Loads a bundle directory. The id is the bug id, suffixed when another
    /// directory already registered the same bug; registering the same
    /// directory again returns the existing entry.
    pub fn register_bundle(&self, path: &Path) -> Result<BundleInfo, ApiError> {
        let path = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
        let (bundle, warnings) =
            load_bundle_with_warnings(&path).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bundle_invalid", e.to_string()))?;
        let mut bundles = self.bundles.write();
        if let Some(existing) = bundles.values().find(|b| b.path == path) {
            return Ok(info(existing, Vec::new()));
        }
        let mut id = bundle.bug_id.clone();
        let mut n = 2;
        while bundles.contains_key(&id) {
            id = format!("{}-{n}", bundle.bug_id);
            n += 1;
        }
        let loaded = Arc::new(LoadedBundle::new(id.clone(), path, bundle));
        let out = info(&loaded, warnings.iter().map(|d| d.to_string()).collect());
        bundles.insert(id, loaded);
        Ok(out)
    }

    fn bundle(&self, id: &str) -> Result<Arc<LoadedBundle>, ApiError> {
        self.bundles
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_bundle", format!("no bundle `{id}`")))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn create_session(&self, bundle_id: &str) -> Result<Arc<Snapshot>, ApiError> {
        let bundle = self.bundle(bundle_id)?;
        let id = uuid::Uuid::new_v4().to_string();
        let state = SessionState::new(id.as_str(), bundle.questions.clone(), bundle.bundle.patch_ids());
        let now = now_ms();
        let session = Session::new(bundle, state, 0, now, now);
        self.persist(&session)?;
        let snapshot = session.published.clone();
        self.sessions.write().insert(id, Arc::new(Mutex::new(session)));
        Ok(snapshot)
    }

    pub fn snapshot(&self, session_id: &str) -> Result<Arc<Snapshot>, ApiError> {
        Ok(self.session(session_id)?.lock().published.clone())
    }

    /// Applies `f` under the session's lock, then bumps the revision,
    /// persists and republishes.
    fn mutate(&self, session_id: &str, f: impl FnOnce(&mut SessionState) -> Result<(), EngineError>) -> Result<Arc<Snapshot>, ApiError> {
        let handle = self.session(session_id)?;
        let mut session = handle.lock();
        let before = session.state.clone();
        f(&mut session.state)?;
        session.revision += 1;
        session.last_modified = now_ms().max(session.last_modified);
        if let Err(e) = self.persist(&session) {
            session.state = before;
            session.revision -= 1;
            return Err(e);
        }
        session.publish();
        Ok(session.published.clone())
    }

    pub fn answer(&self, session_id: &str, question_id: &QuestionId, answer: Answer) -> Result<Arc<Snapshot>, ApiError> {
        self.mutate(session_id, |s| s.answer(question_id, answer).map(|_| ()))
    }

    pub fn reset(&self, session_id: &str) -> Result<Arc<Snapshot>, ApiError> {
        self.mutate(session_id, |s| {
            s.reset();
            Ok(())
        })
    }

    pub fn select(&self, session_id: &str, patch_id: &PatchId) -> Result<Arc<Snapshot>, ApiError> {
        self.mutate(session_id, |s| s.select_patch(patch_id))
    }

    pub fn manual(&self, session_id: &str, diff: &str) -> Result<Arc<Snapshot>, ApiError> {
        self.mutate(session_id, |s| s.record_manual_patch(diff))
    }

    fn persist(&self, session: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.state_dir else { return Ok(()) };
        let file = session.file();
        let path = dir.join("sessions").join(format!("{}.json", file.session_id));
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&file).expect("session files serialize");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", format!("cannot write {}: {e}", path.display())))
    }
}

fn info(b: &LoadedBundle, warnings: Vec<String>) -> BundleInfo {
    BundleInfo {
        bundle_id: b.id.clone(),
        bug_id: b.bundle.bug_id.clone(),
        path: b.path.clone(),
        patch_count: b.bundle.patches.len(),
        question_count: b.questions.len(),
        warnings,
    }
}

#[derive(Debug, Deserialize)]
struct RegisterBody {
    path: PathBuf,
}

#[derive(Debug, Deserialize)]
struct CreateBody {
    bundle_id: String,
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    question_id: QuestionId,
    answer: Answer,
}

#[derive(Debug, Deserialize)]
struct SelectBody {
    patch_id: PatchId,
}

#[derive(Debug, Deserialize)]
struct ManualBody {
    diff: String,
}

/// One entry of `GET /sessions/{id}/questions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionEntry {
    pub id: QuestionId,
    pub text: String,
    #[serde(flatten)]
    pub attribute: Attribute,
    pub state: QuestionState,
    pub resolved_by: Option<ResolvedBy>,
    /// Related patches among the current candidates (frozen once resolved).
    pub patch_ids: Vec<PatchId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionList {
    pub revision: u64,
    pub questions: Vec<QuestionEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub id: PatchId,
    pub tool: Option<String>,
    pub modified_methods: Vec<String>,
    pub candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchList {
    pub revision: u64,
    pub patches: Vec<PatchEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedLine {
    pub line: u32,
    pub class: LineClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodView {
    pub file: String,
    pub method: String,
    pub lines: Vec<ClassifiedLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffViewPayload {
    pub patch_id: PatchId,
    pub methods: Vec<MethodView>,
}

async fn register(State(app): State<Arc<AppState>>, body: Result<Json<RegisterBody>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(body) = body?;
    let info = app.register_bundle(&body.path)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn create(State(app): State<Arc<AppState>>, body: Result<Json<CreateBody>, JsonRejection>) -> Result<Response, ApiError> {
    let Json(body) = body?;
    let snapshot = app.create_session(&body.bundle_id)?;
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Arc<Snapshot>> {
    app.snapshot(&id).map(Json)
}

async fn questions(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<QuestionList> {
    let handle = app.session(&id)?;
    let session = handle.lock();
    let views: BTreeMap<&QuestionId, &QuestionView> =
        session.published.view.groups.iter().flat_map(|g| g.questions.iter()).map(|q| (&q.id, q)).collect();
    let questions = session
        .state
        .slots()
        .iter()
        .map(|slot| {
            let q = &slot.question;
            QuestionEntry {
                id: q.id.clone(),
                text: views.get(&q.id).map(|v| v.text.clone()).unwrap_or_else(|| q.attribute.text()),
                attribute: q.attribute.clone(),
                state: q.state,
                resolved_by: slot.resolved_by,
                patch_ids: slot.current.iter().cloned().collect(),
            }
        })
        .collect();
    Ok(Json(QuestionList { revision: session.revision, questions }))
}

async fn answer(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Arc<Snapshot>> {
    let Json(body) = body?;
    app.answer(&id, &body.question_id, body.answer).map(Json)
}

async fn reset(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Arc<Snapshot>> {
    app.reset(&id).map(Json)
}

async fn select(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<SelectBody>, JsonRejection>,
) -> ApiResult<Arc<Snapshot>> {
    let Json(body) = body?;
    app.select(&id, &body.patch_id).map(Json)
}

async fn manual(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<ManualBody>, JsonRejection>,
) -> ApiResult<Arc<Snapshot>> {
    let Json(body) = body?;
    app.manual(&id, &body.diff).map(Json)
}

async fn patches(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<PatchList> {
    let handle = app.session(&id)?;
    let session = handle.lock();
    let patches = session
        .bundle
        .bundle
        .patches
        .iter()
        .map(|p| PatchEntry {
            id: p.id.clone(),
            tool: p.provenance.clone(),
            modified_methods: p.modified_methods.iter().cloned().collect(),
            candidate: session.state.candidates.contains(&p.id),
        })
        .collect();
    Ok(Json(PatchList { revision: session.revision, patches }))
}

fn session_bundle(app: &AppState, id: &str) -> Result<Arc<LoadedBundle>, ApiError> {
    Ok(app.session(id)?.lock().bundle.clone())
}

/// Diff View classes for one patch over every method some candidate
/// modifies, grouped by method.
pub fn diff_view_payload(bundle: &BugBundle, patch_id: &str) -> Option<DiffViewPayload> {
    let patch = bundle.patch(patch_id)?;
    let index = bundle.index();
    let empty = Default::default();
    let patched = bundle.patch_traces.get(&patch.id).unwrap_or(&empty);
    let classes = diff_view_over(&bundle.baseline_trace, patched, patch, &bundle.modified_methods(), &index);
    let mut by_method: BTreeMap<&str, Vec<ClassifiedLine>> = BTreeMap::new();
    for (point, class) in &classes {
        by_method.entry(point.method.as_str()).or_default().push(ClassifiedLine { line: point.line, class: *class });
    }
    let methods = by_method
        .into_iter()
        .map(|(method, lines)| MethodView {
            file: index.spans_of(method).first().map(|s| s.file.clone()).unwrap_or_default(),
            method: method.to_string(),
            lines,
        })
        .collect();
    Some(DiffViewPayload { patch_id: patch.id.clone(), methods })
}

async fn diffview(State(app): State<Arc<AppState>>, UrlPath((id, pid)): UrlPath<(String, String)>) -> ApiResult<DiffViewPayload> {
    let bundle = session_bundle(&app, &id)?;
    diff_view_payload(&bundle.bundle, &pid).map(Json).ok_or_else(|| ApiError::unknown_patch(&pid))
}

async fn raw_diff(State(app): State<Arc<AppState>>, UrlPath((id, pid)): UrlPath<(String, String)>) -> Result<Response, ApiError> {
    let bundle = session_bundle(&app, &id)?;
    let patch = bundle.bundle.patch(&pid).ok_or_else(|| ApiError::unknown_patch(&pid))?;
    let text = render_unified_diff(&patch.edits);
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/bundles", post(register))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/questions", get(questions))
        .route("/sessions/{id}/answers", post(answer))
        .route("/sessions/{id}/reset", post(reset))
        .route("/sessions/{id}/select", post(select))
        .route("/sessions/{id}/manual", post(manual))
        .route("/sessions/{id}/patches", get(patches))
        .route("/sessions/{id}/patches/{pid}/diffview", get(diffview))
        .route("/sessions/{id}/patches/{pid}/diff", get(raw_diff))
        .fallback(not_found)
        .with_state(app)
}

/// Serves until Ctrl-C.
pub async fn serve(app: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
