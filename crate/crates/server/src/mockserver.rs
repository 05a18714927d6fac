//! Mock capability services speaking the wire protocol.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use easel_core::backend::{BackendError, Capability, SegmentPrompt};
use easel_core::mock::{mock_chat, mock_fill, mock_generate, mock_inpaint, mock_segment, FixtureRegistry};
use easel_core::protocol::{
    self, check_version, codes, ChatRequest, ChatResponse, ErrorBody, FillRequest, GenerateRequest, HealthResponse,
    ImageResponse, InpaintRequest, SegmentRequest, SegmentResponse, PROTOCOL_VERSION,
};
use easel_core::CanvasImage;
use serde::de::DeserializeOwned;

struct MockState {
    registry: Arc<FixtureRegistry>,
    capabilities: BTreeSet<Capability>,
}

type Reply = Result<Response, (StatusCode, Json<ErrorBody>)>;

fn err(status: StatusCode, code: &str, detail: impl Into<String>) -> (StatusCode, Json<ErrorBody>) {
    (status, Json(ErrorBody::new(code, detail)))
}

fn invalid(detail: impl Into<String>) -> (StatusCode, Json<ErrorBody>) {
    err(StatusCode::BAD_REQUEST, codes::INVALID_REQUEST, detail)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, (StatusCode, Json<ErrorBody>)> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| invalid(format!("body is not JSON: {e}")))?;
    match value.get("protocol_version").and_then(|v| v.as_str()) {
        Some(v) => check_version(v).map_err(|b| (StatusCode::BAD_REQUEST, Json(b)))?,
        None => return Err(invalid("missing protocol_version")),
    }
    serde_json::from_value(value).map_err(|e| invalid(e.to_string()))
}

fn image(data: &str) -> Result<CanvasImage, (StatusCode, Json<ErrorBody>)> {
    CanvasImage::from_base64_png(data).map_err(|e| invalid(format!("bad image: {e}")))
}

fn backend_err(e: BackendError) -> (StatusCode, Json<ErrorBody>) {
    match e {
        BackendError::NoObjectFound => err(StatusCode::UNPROCESSABLE_ENTITY, codes::NO_OBJECT_FOUND, e.to_string()),
        BackendError::InvalidRequest(d) => invalid(d),
        other => err(StatusCode::INTERNAL_SERVER_ERROR, codes::INTERNAL, other.to_string()),
    }
}

impl MockState {
    fn require(&self, c: Capability) -> Result<(), (StatusCode, Json<ErrorBody>)> {
        if self.capabilities.contains(&c) {
            Ok(())
        } else {
            Err(err(StatusCode::NOT_FOUND, codes::INVALID_REQUEST, format!("{c} is not served here")))
        }
    }
}

/// Run CPU-bound mock work off the async workers.
async fn blocking<F: FnOnce() -> Reply + Send + 'static>(f: F) -> Reply {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(err(StatusCode::INTERNAL_SERVER_ERROR, codes::INTERNAL, e.to_string())))
}

async fn chat(State(s): State<Arc<MockState>>, body: Bytes) -> Reply {
    s.require(Capability::Chat)?;
    blocking(move || {
        let req: ChatRequest = parse(&body)?;
        if req.message.trim().is_empty() {
            return Err(invalid("message is blank"));
        }
        let img = req.image.as_deref().map(image).transpose()?;
        let text = mock_chat(img.as_ref(), &req.transcript, &req.message, &s.registry);
        Ok(Json(ChatResponse {
            request_id: req.request_id,
            text,
        })
        .into_response())
    })
    .await
}

async fn segment(State(s): State<Arc<MockState>>, body: Bytes) -> Reply {
    s.require(Capability::Segment)?;
    blocking(move || {
        let req: SegmentRequest = parse(&body)?;
        let img = image(&req.image)?;
        let prompt: SegmentPrompt = req.prompt.to_prompt().map_err(invalid)?;
        let seg = mock_segment(&img, &prompt, &s.registry).map_err(backend_err)?;
        Ok(Json(SegmentResponse {
            request_id: req.request_id,
            mask: seg.mask,
            label: seg.label,
        })
        .into_response())
    })
    .await
}

async fn generate(State(s): State<Arc<MockState>>, body: Bytes) -> Reply {
    s.require(Capability::Generate)?;
    blocking(move || {
        let req: GenerateRequest = parse(&body)?;
        if req.caption.trim().is_empty() {
            return Err(invalid("caption is blank"));
        }
        if req.width == 0 || req.height == 0 || req.width > 8192 || req.height > 8192 {
            return Err(invalid("width and height must be in 1..=8192"));
        }
        let grounding = req.grounding.as_ref().map(|g| g.to_spec()).transpose().map_err(invalid)?;
        let img = mock_generate(&req.caption, grounding.as_ref(), req.width, req.height);
        Ok(Json(ImageResponse {
            request_id: req.request_id,
            image: protocol::encode_image(&img),
        })
        .into_response())
    })
    .await
}

async fn inpaint(State(s): State<Arc<MockState>>, body: Bytes) -> Reply {
    s.require(Capability::Inpaint)?;
    blocking(move || {
        let req: InpaintRequest = parse(&body)?;
        let job = req.to_job().map_err(invalid)?;
        let img = image(&req.image)?;
        let out = mock_inpaint(&img, &job).map_err(backend_err)?;
        Ok(Json(ImageResponse {
            request_id: req.request_id,
            image: protocol::encode_image(&out),
        })
        .into_response())
    })
    .await
}

async fn fill(State(s): State<Arc<MockState>>, body: Bytes) -> Reply {
    s.require(Capability::Fill)?;
    blocking(move || {
        let req: FillRequest = parse(&body)?;
        let img = image(&req.image)?;
        let out = mock_fill(&img, &req.mask).map_err(backend_err)?;
        Ok(Json(ImageResponse {
            request_id: req.request_id,
            image: protocol::encode_image(&out),
        })
        .into_response())
    })
    .await
}

async fn health(State(s): State<Arc<MockState>>) -> Json<HealthResponse> {
    let names: Vec<&str> = s.capabilities.iter().map(|c| c.as_str()).collect();
    let capability = if names.len() == Capability::ALL.len() {
        "all".to_owned()
    } else {
        names.join(",")
    };
    Json(HealthResponse {
        capability,
        protocol_version: PROTOCOL_VERSION.into(),
    })
}

/// Router serving `/v1/<capability>` for the given capabilities plus
/// `/v1/health`.
pub fn router(registry: Arc<FixtureRegistry>, capabilities: impl IntoIterator<Item = Capability>) -> Router {
    let state = Arc::new(MockState {
        registry,
        capabilities: capabilities.into_iter().collect(),
    });
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/segment", post(segment))
        .route("/v1/generate", post(generate))
        .route("/v1/inpaint", post(inpaint))
        .route("/v1/fill", post(fill))
        .route("/v1/health", get(health))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .with_state(state)
}

/// Serve until the listener fails or the task is dropped.
pub async fn serve(
    listener: tokio::net::TcpListener,
    registry: Arc<FixtureRegistry>,
    capabilities: Vec<Capability>,
) -> std::io::Result<()> {
    axum::serve(listener, router(registry, capabilities)).await
}
