//! HTTP client for the capability services.

use std::time::Duration;

use easel_core::backend::{BackendError, Backends, Capability, InpaintRequest, SegmentPrompt, Segmented};
use easel_core::protocol::{
    self, codes, ChatRequest, ChatResponse, ErrorBody, FillRequest, GenerateRequest, ImageResponse, SegmentRequest,
    SegmentResponse, WireGrounding, WirePrompt, PROTOCOL_VERSION,
};
use easel_core::workflow::Turn;
use easel_core::{CanvasImage, GroundingSpec, RleMask};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{BackendConfig, CapabilityConfig};

const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

/// [`Backends`] over the versioned JSON protocol, one base URL per capability.
///
/// Holds no per-request state; safe to share across threads.
pub struct HttpBackends {
    config: BackendConfig,
}

impl HttpBackends {
    pub fn new(config: BackendConfig) -> Result<Self, String> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn endpoint(&self, capability: Capability) -> Result<&CapabilityConfig, BackendError> {
        self.config.get(capability).ok_or_else(|| match capability {
            Capability::Fill => BackendError::FillUnavailable,
            _ => BackendError::Unavailable {
                capability,
                detail: "capability is not configured".into(),
            },
        })
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        capability: Capability,
        request_id: &str,
        body: &Req,
        echo: impl Fn(&Resp) -> &str,
    ) -> Result<Resp, BackendError> {
        let cfg = self.endpoint(capability)?;
        let url = format!("{}/v1/{}", cfg.base_url.trim_end_matches('/'), capability.as_str());
        let payload = serde_json::to_vec(body).map_err(|e| BackendError::InvalidRequest(e.to_string()))?;
        let mut attempt = 0;
        loop {
            match self.post_once(cfg, capability, &url, &payload) {
                Err(e @ (BackendError::Unavailable { .. } | BackendError::Timeout { .. })) if attempt < cfg.max_retries => {
                    attempt += 1;
                    tracing::warn!(%capability, attempt, error = %e, "retrying");
                }
                Err(e) => return Err(e),
                Ok(text) => {
                    let resp: Resp = serde_json::from_str(&text).map_err(|e| BackendError::Protocol {
                        capability,
                        detail: format!("malformed response: {e}"),
                    })?;
                    if echo(&resp) != request_id {
                        return Err(BackendError::Protocol {
                            capability,
                            detail: format!("response echoed request_id {:?}, sent {request_id:?}", echo(&resp)),
                        });
                    }
                    return Ok(resp);
                }
            }
        }
    }

    fn post_once(
        &self,
        cfg: &CapabilityConfig,
        capability: Capability,
        url: &str,
        payload: &[u8],
    ) -> Result<String, BackendError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("content-type", "application/json");
        if let Some(token) = &self.config.bearer_token {
            req = req.header("authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(payload).map_err(|e| transport_error(capability, e))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_string()
            .map_err(|e| transport_error(capability, e))?;
        match status {
            200..=299 => Ok(text),
            400..=499 => Err(rejected(capability, status, &text)),
            _ => Err(BackendError::Unavailable {
                capability,
                detail: format!("HTTP {status}"),
            }),
        }
    }
}

fn transport_error(capability: Capability, e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::Timeout(_) => BackendError::Timeout { capability },
        ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout { capability },
        other => BackendError::Unavailable {
            capability,
            detail: other.to_string(),
        },
    }
}

fn rejected(capability: Capability, status: u16, text: &str) -> BackendError {
    match serde_json::from_str::<ErrorBody>(text) {
        Ok(body) if body.error == codes::NO_OBJECT_FOUND => BackendError::NoObjectFound,
        Ok(body) if body.error == codes::UNSUPPORTED_PROTOCOL_VERSION => BackendError::Protocol {
            capability,
            detail: body.detail,
        },
        Ok(body) => BackendError::Rejected {
            capability,
            code: body.error,
            detail: body.detail,
        },
        Err(_) => BackendError::Protocol {
            capability,
            detail: format!("HTTP {status} without an error body"),
        },
    }
}

fn request_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

impl Backends for HttpBackends {
    fn chat(&self, image: Option<&CanvasImage>, transcript: &[Turn], message: &str) -> Result<String, BackendError> {
        if message.trim().is_empty() {
            return Err(BackendError::InvalidRequest("message is blank".into()));
        }
        self.endpoint(Capability::Chat)?;
        let id = request_id();
        let req = ChatRequest {
            protocol_version: PROTOCOL_VERSION.into(),
            request_id: id.clone(),
            image: image.map(protocol::encode_image),
            transcript: transcript.to_vec(),
            message: message.into(),
        };
        let resp: ChatResponse = self.post(Capability::Chat, &id, &req, |r: &ChatResponse| &r.request_id)?;
        if resp.text.trim().is_empty() {
            return Err(BackendError::Protocol {
                capability: Capability::Chat,
                detail: "empty reply".into(),
            });
        }
        Ok(resp.text)
    }

    fn segment(&self, image: &CanvasImage, prompt: &SegmentPrompt) -> Result<Segmented, BackendError> {
        self.endpoint(Capability::Segment)?;
        let id = request_id();
        let req = SegmentRequest {
            protocol_version: PROTOCOL_VERSION.into(),
            request_id: id.clone(),
            image: protocol::encode_image(image),
            prompt: WirePrompt::from(prompt),
        };
        let resp: SegmentResponse = self.post(Capability::Segment, &id, &req, |r: &SegmentResponse| &r.request_id)?;
        if resp.mask.dims() != image.dims() {
            return Err(BackendError::Protocol {
                capability: Capability::Segment,
                detail: format!("mask is {:?} but image is {:?}", resp.mask.dims(), image.dims()),
            });
        }
        Ok(Segmented {
            mask: resp.mask,
            label: resp.label,
        })
    }

    fn generate(
        &self,
        caption: &str,
        grounding: Option<&GroundingSpec>,
        (width, height): (u32, u32),
    ) -> Result<CanvasImage, BackendError> {
        if caption.trim().is_empty() {
            return Err(BackendError::InvalidRequest("caption is blank".into()));
        }
        self.endpoint(Capability::Generate)?;
        let id = request_id();
        let req = GenerateRequest {
            protocol_version: PROTOCOL_VERSION.into(),
            request_id: id.clone(),
            caption: caption.into(),
            grounding: grounding.map(WireGrounding::from),
            width,
            height,
        };
        let resp: ImageResponse = self.post(Capability::Generate, &id, &req, |r: &ImageResponse| &r.request_id)?;
        protocol::decode_image(Capability::Generate, &resp.image)
    }

    fn inpaint(&self, image: &CanvasImage, request: &InpaintRequest) -> Result<CanvasImage, BackendError> {
        self.endpoint(Capability::Inpaint)?;
        let id = request_id();
        let (grounding, mask, prompt) = match request {
            InpaintRequest::Grounded(g) => (Some(WireGrounding::from(g)), None, None),
            InpaintRequest::Masked { mask, prompt } => (None, Some(mask.clone()), Some(prompt.clone())),
        };
        let req = protocol::InpaintRequest {
            protocol_version: PROTOCOL_VERSION.into(),
            request_id: id.clone(),
            image: protocol::encode_image(image),
            grounding,
            mask,
            prompt,
        };
        let resp: ImageResponse = self.post(Capability::Inpaint, &id, &req, |r: &ImageResponse| &r.request_id)?;
        protocol::decode_image(Capability::Inpaint, &resp.image)
    }

    fn fill(&self, image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, BackendError> {
        self.endpoint(Capability::Fill)?;
        let id = request_id();
        let req = FillRequest {
            protocol_version: PROTOCOL_VERSION.into(),
            request_id: id.clone(),
            image: protocol::encode_image(image),
            mask: hole.clone(),
        };
        let resp: ImageResponse = self.post(Capability::Fill, &id, &req, |r: &ImageResponse| &r.request_id)?;
        protocol::decode_image(Capability::Fill, &resp.image)
    }
}
