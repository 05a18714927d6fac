//! Session HTTP API.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use easel_core::mock::{FixtureRegistry, FixtureSource, MockBackends};
use easel_core::workflow::{CommandSpec, SystemClock, Turn};
use easel_core::{
    Backends, BackendError, CanvasImage, Command, ContentHash, Engine, EngineConfig, EngineError, HistoryEntry,
    SegmentMask, Session, SessionState,
};
use serde::Serialize;
use serde_json::json;
use tokio::sync::Mutex as AsyncMutex;

use crate::config::ServiceConfig;
use crate::gateway::HttpBackends;
use crate::store::{Archive, Damaged, Store, StoreError};

/// Uploads larger than this multiple of `max_image_side` are refused with
/// 413 instead of being downscaled.
pub const HARD_LIMIT_FACTOR: u32 = 4;
const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

type SessionSlot = Arc<AsyncMutex<Session>>;

pub struct AppState {
    engine: Engine,
    config: ServiceConfig,
    store: Store,
    fixtures: Option<Arc<FixtureRegistry>>,
    sessions: Mutex<HashMap<String, SessionSlot>>,
    damaged: Vec<Damaged>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    detail: String,
    entry: Option<HistoryEntry>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            detail: detail.into(),
            entry: None,
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}"))
    }

    fn busy() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "busy",
            "another command on this session is in flight",
        )
    }

    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_command", detail)
    }

    fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::NoImage | EngineError::NothingToUndo | EngineError::InvalidCommand(_) => {
                StatusCode::BAD_REQUEST
            }
            EngineError::UnknownMask(_) => StatusCode::NOT_FOUND,
            EngineError::Backend {
                error: BackendError::NoObjectFound,
                ..
            }
            | EngineError::Raster { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            EngineError::Backend { .. } => StatusCode::BAD_GATEWAY,
            EngineError::Snapshot(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            code: e.code().into(),
            detail: e.to_string(),
            entry: e.entry().cloned(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => Self::not_found(&id),
            StoreError::Corrupt(d) => Self::new(StatusCode::BAD_REQUEST, "invalid_archive", d),
            e @ StoreError::Io { .. } => Self::internal(e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "detail": self.detail });
        if let Some(entry) = self.entry {
            body["entry"] = serde_json::to_value(entry).expect("entries serialize");
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub state: SessionState,
    pub revision: u64,
    pub canvas_hash: Option<ContentHash>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub transcript: Vec<Turn>,
    pub masks: Vec<SegmentMask>,
    pub undo_depth: usize,
}

impl SessionSummary {
    fn of(s: &Session) -> Self {
        Self {
            session_id: s.id().to_owned(),
            state: s.state(),
            revision: s.revision(),
            canvas_hash: s.canvas_hash(),
            width: s.canvas().map(CanvasImage::width),
            height: s.canvas().map(CanvasImage::height),
            transcript: s.transcript().to_vec(),
            masks: s.pending_masks().cloned().collect(),
            undo_depth: s.undo_stack().len(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CommandResponse {
    #[serde(flatten)]
    pub entry: HistoryEntry,
    pub canvas: Option<String>,
    pub masks: Vec<SegmentMask>,
}

fn png_dims(bytes: &[u8]) -> Option<(u32, u32)> {
    const SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.len() < 24 || &bytes[..8] != SIG || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().ok()?);
    let h = u32::from_be_bytes(bytes[20..24].try_into().ok()?);
    Some((w, h))
}

impl AppState {
    /// State using the backends the configuration names.
    pub fn from_config(config: ServiceConfig) -> anyhow::Result<Arc<Self>> {
        config.validate().map_err(anyhow::Error::msg)?;
        let fixtures = match &config.fixtures_dir {
            Some(dir) => Some(Arc::new(FixtureRegistry::load_dir(dir)?)),
            None => None,
        };
        let backends: Arc<dyn Backends> = if config.mock_mode {
            Arc::new(MockBackends::new(fixtures.clone().unwrap_or_default()))
        } else {
            Arc::new(HttpBackends::new(config.backends.clone()).map_err(anyhow::Error::msg)?)
        };
        Self::new(config, backends, fixtures)
    }

    /// State over explicit backends. Loads every stored session; ones that
    /// fail to load are kept aside as damaged.
    pub fn new(
        config: ServiceConfig,
        backends: Arc<dyn Backends>,
        fixtures: Option<Arc<FixtureRegistry>>,
    ) -> anyhow::Result<Arc<Self>> {
        let store = Store::open(&config.data_dir)?;
        let (loaded, damaged) = store.load_all()?;
        for d in &damaged {
            tracing::warn!(id = %d.id, reason = %d.reason, "damaged session");
        }
        let sessions = loaded
            .into_iter()
            .map(|s| (s.id().to_owned(), Arc::new(AsyncMutex::new(s))))
            .collect();
        let engine = Engine::new(
            backends,
            Arc::new(SystemClock),
            EngineConfig {
                output_size: config.output_size,
            },
        );
        Ok(Arc::new(Self {
            engine,
            config,
            store,
            fixtures,
            sessions: Mutex::new(sessions),
            damaged,
        }))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn damaged(&self) -> &[Damaged] {
        &self.damaged
    }

    fn slot(&self, id: &str) -> ApiResult<SessionSlot> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn insert(&self, session: Session) -> ApiResult<String> {
        let id = session.id().to_owned();
        let mut map = self.sessions.lock().unwrap();
        if map.len() >= self.config.max_sessions {
            return Err(ApiError::new(
                StatusCode::TOO_MANY_REQUESTS,
                "too_many_sessions",
                format!("the limit of {} sessions is reached", self.config.max_sessions),
            ));
        }
        map.insert(id.clone(), Arc::new(AsyncMutex::new(session)));
        Ok(id)
    }

    fn new_session(&self) -> ApiResult<String> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::with_id(&id).with_snapshots(self.store.snapshots_for(&id));
        self.store.save(&session)?;
        self.insert(session).inspect_err(|_| {
            let _ = self.store.delete(&id);
        })
    }

    /// Refuse oversized uploads before decoding them.
    fn check_upload(&self, spec: &CommandSpec) -> ApiResult<()> {
        let CommandSpec::SetImage { image: Some(b64), .. } = spec else {
            return Ok(());
        };
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(b64.trim())
            .map_err(|e| ApiError::bad_request(format!("image is not base64: {e}")))?;
        let (w, h) = png_dims(&bytes).ok_or_else(|| ApiError::bad_request("image is not a PNG"))?;
        let hard = self.config.max_image_side.saturating_mul(HARD_LIMIT_FACTOR);
        if w.max(h) > hard {
            return Err(ApiError::new(
                StatusCode::PAYLOAD_TOO_LARGE,
                "image_too_large",
                format!("image is {w}x{h}; the largest accepted side is {hard}"),
            ));
        }
        Ok(())
    }

    fn resolve(&self, spec: CommandSpec) -> ApiResult<Command> {
        self.check_upload(&spec)?;
        let fixtures = self.fixtures.as_deref().map(|f| f as &dyn FixtureSource);
        let cmd = spec.resolve(fixtures).map_err(|e| ApiError::bad_request(e.to_string()))?;
        Ok(match cmd {
            Command::SetImage(img) if img.width().max(img.height()) > self.config.max_image_side => {
                Command::SetImage(img.downscale_to_fit(self.config.max_image_side))
            }
            other => other,
        })
    }

    /// Run one command with the session held exclusively; 409 if it is
    /// already held.
    async fn run<T: Send + 'static>(
        self: &Arc<Self>,
        id: &str,
        command: Command,
        respond: impl FnOnce(HistoryEntry, &Session) -> ApiResult<T> + Send + 'static,
    ) -> ApiResult<T> {
        let slot = self.slot(id)?;
        let mut guard = slot.try_lock_owned().map_err(|_| ApiError::busy())?;
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let result = state.engine.execute(&mut guard, command);
            let persisted = match &result {
                Ok(_) | Err(EngineError::Backend { .. } | EngineError::Raster { .. }) => state.store.save(&guard),
                Err(_) => Ok(()),
            };
            if let Err(e) = persisted {
                tracing::error!(session = %guard.id(), error = %e, "saving session failed");
                return Err(ApiError::internal(format!("saving session: {e}")));
            }
            respond(result?, &guard)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }
}

fn command_response(entry: HistoryEntry, session: &Session) -> ApiResult<CommandResponse> {
    let canvas = session
        .canvas()
        .map(CanvasImage::to_base64_png)
        .transpose()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(CommandResponse {
        entry,
        canvas,
        masks: session.pending_masks().cloned().collect(),
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn create(State(s): State<Arc<AppState>>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let id = s.new_session()?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn list(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let slots: Vec<(String, SessionSlot)> = {
        let map = s.sessions.lock().unwrap();
        let mut v: Vec<_> = map.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let sessions: Vec<_> = slots
        .into_iter()
        .map(|(id, slot)| match slot.try_lock() {
            Ok(sess) => json!({
                "session_id": id,
                "state": sess.state(),
                "revision": sess.revision(),
                "busy": false,
            }),
            Err(_) => json!({ "session_id": id, "busy": true }),
        })
        .collect();
    Json(json!({ "sessions": sessions, "damaged": s.damaged }))
}

async fn summary(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionSummary>> {
    let slot = s.slot(&id)?;
    let sess = slot.lock().await;
    Ok(Json(SessionSummary::of(&sess)))
}

async fn history(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Vec<HistoryEntry>>> {
    let slot = s.slot(&id)?;
    let sess = slot.lock().await;
    Ok(Json(sess.history().to_vec()))
}

async fn canvas(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let slot = s.slot(&id)?;
    let img = slot.lock().await.canvas().cloned();
    let img = img.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_image", "session has no canvas"))?;
    let png = tokio::task::spawn_blocking(move || img.encode_png())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn upload(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionSummary>> {
    #[derive(serde::Deserialize)]
    struct Upload {
        image: String,
    }
    s.slot(&id)?;
    let up: Upload = parse_json(&body)?;
    let cmd = s.resolve(CommandSpec::SetImage {
        image: Some(up.image),
        fixture: None,
    })?;
    let summary = s.run(&id, cmd, |_, sess| Ok(SessionSummary::of(sess))).await?;
    Ok(Json(summary))
}

async fn command(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CommandResponse>> {
    s.slot(&id)?;
    let spec: CommandSpec = parse_json(&body)?;
    let cmd = s.resolve(spec)?;
    Ok(Json(s.run(&id, cmd, command_response).await?))
}

async fn undo(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<CommandResponse>> {
    Ok(Json(s.run(&id, Command::Undo, command_response).await?))
}

async fn delete(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let slot = s.slot(&id)?;
    let _guard = slot.try_lock().map_err(|_| ApiError::busy())?;
    s.sessions.lock().unwrap().remove(&id);
    s.store.delete(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn export(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Archive>> {
    let slot = s.slot(&id)?;
    let _guard = slot.lock().await;
    let state = s.clone();
    let archive = tokio::task::spawn_blocking(move || state.store.export(&id))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(archive))
}

async fn import(
    State(s): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let archive: Archive = parse_json(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let state = s.clone();
    let new_id = id.clone();
    let session = tokio::task::spawn_blocking(move || state.store.import(archive, &new_id))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    s.insert(session).inspect_err(|_| {
        let _ = s.store.delete(&id);
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn health(State(s): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let sessions = s.sessions.lock().unwrap().len();
    Json(json!({
        "status": "ok",
        "mock_mode": s.config.mock_mode,
        "sessions": sessions,
        "damaged": s.damaged.len(),
    }))
}

async fn index() -> &'static str {
    "easel session service; API under /api\n"
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/sessions", post(create).get(list))
        .route("/api/sessions/import", post(import))
        .route("/api/sessions/{id}", get(summary).delete(delete))
        .route("/api/sessions/{id}/image", post(upload))
        .route("/api/sessions/{id}/command", post(command))
        .route("/api/sessions/{id}/history", get(history))
        .route("/api/sessions/{id}/canvas", get(canvas))
        .route("/api/sessions/{id}/undo", post(undo))
        .route("/api/sessions/{id}/export", get(export))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(index)),
    };
    app.with_state(state)
}

/// Serve until ctrl-c.
pub async fn serve(state: Arc<AppState>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(&state.config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, mock = state.config.mock_mode, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
