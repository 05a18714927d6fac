//! Wire protocol between the orchestrator and the capability services.
//!
//! Every request is a JSON `POST` to `{base}/v1/<capability>` carrying
//! `"protocol_version": "1"` and a caller-chosen `request_id` that the
//! response echoes. Images travel as base64 PNG, masks in the RLE wire form
//! of [`RleMask`], and all coordinates are normalized.

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Capability, InpaintRequest as InpaintJob, SegmentPrompt};
use crate::domain::{bind_concepts_to_boxes, BoundingBox, GroundingSpec, Point, ReferringText};
use crate::image::CanvasImage;
use crate::raster::RleMask;
use crate::workflow::Turn;

pub const PROTOCOL_VERSION: &str = "1";

/// Error codes used in `{"error": code, "detail": str}` bodies.
pub mod codes {
    pub const UNSUPPORTED_PROTOCOL_VERSION: &str = "unsupported_protocol_version";
    pub const INVALID_REQUEST: &str = "invalid_request";
    pub const NO_OBJECT_FOUND: &str = "no_object_found";
    pub const INTERNAL: &str = "internal";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl ErrorBody {
    pub fn new(error: &str, detail: impl Into<String>) -> Self {
        Self {
            error: error.to_owned(),
            detail: detail.into(),
        }
    }
}

/// Reject anything but the current protocol version.
pub fn check_version(version: &str) -> Result<(), ErrorBody> {
    if version == PROTOCOL_VERSION {
        Ok(())
    } else {
        Err(ErrorBody::new(
            codes::UNSUPPORTED_PROTOCOL_VERSION,
            format!("expected protocol_version {PROTOCOL_VERSION:?}, got {version:?}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub protocol_version: String,
    pub request_id: String,
    pub image: Option<String>,
    pub transcript: Vec<Turn>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub request_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WirePrompt {
    Scribble { mask: RleMask },
    Text { text: String },
    Boxes { boxes: Vec<[f64; 4]> },
    Points { points: Vec<[f64; 2]> },
}

impl From<&SegmentPrompt> for WirePrompt {
    fn from(p: &SegmentPrompt) -> Self {
        match p {
            SegmentPrompt::Scribble(m) => WirePrompt::Scribble { mask: m.clone() },
            SegmentPrompt::Text(t) => WirePrompt::Text {
                text: t.as_str().to_owned(),
            },
            SegmentPrompt::Boxes(b) => WirePrompt::Boxes {
                boxes: b.iter().map(BoundingBox::as_array).collect(),
            },
            SegmentPrompt::Points(p) => WirePrompt::Points {
                points: p.iter().map(|&p| p.into()).collect(),
            },
        }
    }
}

impl WirePrompt {
    pub fn to_prompt(&self) -> Result<SegmentPrompt, String> {
        Ok(match self {
            WirePrompt::Scribble { mask } => SegmentPrompt::Scribble(mask.clone()),
            WirePrompt::Text { text } => {
                SegmentPrompt::Text(ReferringText::new(text).map_err(|e| e.to_string())?)
            }
            WirePrompt::Boxes { boxes } => {
                if boxes.is_empty() {
                    return Err("boxes prompt is empty".into());
                }
                SegmentPrompt::Boxes(
                    boxes
                        .iter()
                        .map(|&b| BoundingBox::try_from(b))
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?,
                )
            }
            WirePrompt::Points { points } => {
                if points.is_empty() {
                    return Err("points prompt is empty".into());
                }
                SegmentPrompt::Points(
                    points
                        .iter()
                        .map(|&p| Point::try_from(p))
                        .collect::<Result<_, _>>()
                        .map_err(|e| e.to_string())?,
                )
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub protocol_version: String,
    pub request_id: String,
    pub image: String,
    pub prompt: WirePrompt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub request_id: String,
    pub mask: RleMask,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireGrounding {
    pub concepts: Vec<String>,
    pub boxes: Vec<[f64; 4]>,
}

impl From<&GroundingSpec> for WireGrounding {
    fn from(g: &GroundingSpec) -> Self {
        Self {
            concepts: g.concepts().to_vec(),
            boxes: g.boxes().iter().map(BoundingBox::as_array).collect(),
        }
    }
}

impl WireGrounding {
    pub fn to_spec(&self) -> Result<GroundingSpec, String> {
        let boxes = self
            .boxes
            .iter()
            .map(|&b| BoundingBox::try_from(b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        bind_concepts_to_boxes(self.concepts.clone(), boxes).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub protocol_version: String,
    pub request_id: String,
    pub caption: String,
    pub grounding: Option<WireGrounding>,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintRequest {
    pub protocol_version: String,
    pub request_id: String,
    pub image: String,
    pub grounding: Option<WireGrounding>,
    pub mask: Option<RleMask>,
    pub prompt: Option<String>,
}

impl InpaintRequest {
    /// Exactly one of `grounding` or `mask` + `prompt` must be present.
    pub fn to_job(&self) -> Result<InpaintJob, String> {
        match (&self.grounding, &self.mask, &self.prompt) {
            (Some(g), None, None) => Ok(InpaintJob::Grounded(g.to_spec()?)),
            (None, Some(m), Some(p)) if !p.trim().is_empty() => Ok(InpaintJob::Masked {
                mask: m.clone(),
                prompt: p.clone(),
            }),
            _ => Err("inpaint needs either grounding, or mask together with a non-blank prompt".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRequest {
    pub protocol_version: String,
    pub request_id: String,
    pub image: String,
    pub mask: RleMask,
}

/// Response of `generate`, `inpaint` and `fill`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResponse {
    pub request_id: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub capability: String,
    pub protocol_version: String,
}

pub fn encode_image(image: &CanvasImage) -> String {
    image
        .to_base64_png()
        .expect("encoding a valid RGBA8 canvas cannot fail")
}

pub fn decode_image(capability: Capability, data: &str) -> Result<CanvasImage, BackendError> {
    CanvasImage::from_base64_png(data).map_err(|e| BackendError::Protocol {
        capability,
        detail: format!("bad image payload: {e}"),
    })
}

/// Self-contained JSON Schema (2020-12) documents for every endpoint body.
pub mod schemas {
    pub const ALL: &[(&str, &str)] = &[
        ("chat.request", include_str!("../schemas/chat.request.json")),
        ("chat.response", include_str!("../schemas/chat.response.json")),
        ("segment.request", include_str!("../schemas/segment.request.json")),
        ("segment.response", include_str!("../schemas/segment.response.json")),
        ("generate.request", include_str!("../schemas/generate.request.json")),
        ("inpaint.request", include_str!("../schemas/inpaint.request.json")),
        ("fill.request", include_str!("../schemas/fill.request.json")),
        ("image.response", include_str!("../schemas/image.response.json")),
        ("health.response", include_str!("../schemas/health.response.json")),
        ("error.response", include_str!("../schemas/error.response.json")),
    ];

    pub fn get(name: &str) -> Option<&'static str> {
        ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_wire_shapes() {
        let p: WirePrompt = serde_json::from_str(r#"{"kind":"text","text":"dock"}"#).unwrap();
        assert_eq!(p, WirePrompt::Text { text: "dock".into() });
        let p: WirePrompt =
            serde_json::from_str(r#"{"kind":"scribble","mask":{"w":2,"h":1,"counts":[1,1]}}"#).unwrap();
        assert!(matches!(p.to_prompt().unwrap(), SegmentPrompt::Scribble(_)));
        let p: WirePrompt = serde_json::from_str(r#"{"kind":"boxes","boxes":[]}"#).unwrap();
        assert!(p.to_prompt().is_err());
        assert!(serde_json::from_str::<WirePrompt>(r#"{"kind":"lasso"}"#).is_err());
    }

    #[test]
    fn version_gate() {
        assert!(check_version("1").is_ok());
        assert_eq!(
            check_version("2").unwrap_err().error,
            codes::UNSUPPORTED_PROTOCOL_VERSION
        );
    }

    #[test]
    fn inpaint_job_shape() {
        let mut req = InpaintRequest {
            protocol_version: "1".into(),
            request_id: "r".into(),
            image: String::new(),
            grounding: None,
            mask: Some(RleMask::from_counts(1, 1, vec![0, 1]).unwrap()),
            prompt: Some("sunset scene".into()),
        };
        assert!(matches!(req.to_job().unwrap(), InpaintJob::Masked { .. }));
        req.prompt = None;
        assert!(req.to_job().is_err());
        req.mask = None;
        req.grounding = Some(WireGrounding {
            concepts: vec!["salads".into(), "candles".into()],
            boxes: vec![[0.1, 0.1, 0.2, 0.2]],
        });
        assert!(req.to_job().is_err());
    }

    #[test]
    fn schemas_parse() {
        for (name, s) in schemas::ALL {
            let v: serde_json::Value = serde_json::from_str(s).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(v.get("type").is_some(), "{name}");
        }
    }
}
