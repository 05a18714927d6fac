//! The capability interface the session engine calls into.
//!
//! Implementations live elsewhere: [`crate::mock::MockBackends`] in-process,
//! and an HTTP gateway in the server crate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{GroundingSpec, Point, ReferringText};
use crate::image::CanvasImage;
use crate::raster::RleMask;
use crate::workflow::Turn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Chat,
    Segment,
    Generate,
    Inpaint,
    Fill,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::Chat,
        Capability::Segment,
        Capability::Generate,
        Capability::Inpaint,
        Capability::Fill,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Chat => "chat",
            Capability::Segment => "segment",
            Capability::Generate => "generate",
            Capability::Inpaint => "inpaint",
            Capability::Fill => "fill",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("{capability} backend unavailable: {detail}")]
    Unavailable { capability: Capability, detail: String },
    #[error("{capability} backend timed out")]
    Timeout { capability: Capability },
    #[error("{capability} protocol error: {detail}")]
    Protocol { capability: Capability, detail: String },
    #[error("no object found for the prompt")]
    NoObjectFound,
    #[error("fill capability is not configured")]
    FillUnavailable,
    #[error("{capability} backend rejected the request ({code}): {detail}")]
    Rejected {
        capability: Capability,
        code: String,
        detail: String,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl BackendError {
    /// Stable short code, used in history entries and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            BackendError::Unavailable { .. } => "backend_unavailable",
            BackendError::Timeout { .. } => "backend_timeout",
            BackendError::Protocol { .. } => "protocol_error",
            BackendError::NoObjectFound => "no_object_found",
            BackendError::FillUnavailable => "fill_unavailable",
            BackendError::Rejected { .. } => "backend_rejected",
            BackendError::InvalidRequest(_) => "invalid_request",
        }
    }
}

/// What the segment capability is asked to find.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentPrompt {
    /// An already rasterized scribble, same size as the image.
    Scribble(RleMask),
    Text(ReferringText),
    Boxes(Vec<crate::domain::BoundingBox>),
    Points(Vec<Point>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub mask: RleMask,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InpaintRequest {
    Grounded(GroundingSpec),
    Masked { mask: RleMask, prompt: String },
}

/// The four model roles, plus background fill, behind one interface.
///
/// Implementations must be shareable across threads and must not mutate
/// their inputs.
pub trait Backends: Send + Sync {
    fn chat(
        &self,
        image: Option<&CanvasImage>,
        transcript: &[Turn],
        message: &str,
    ) -> Result<String, BackendError>;

    fn segment(&self, image: &CanvasImage, prompt: &SegmentPrompt) -> Result<Segmented, BackendError>;

    fn generate(
        &self,
        caption: &str,
        grounding: Option<&GroundingSpec>,
        size: (u32, u32),
    ) -> Result<CanvasImage, BackendError>;

    fn inpaint(&self, image: &CanvasImage, request: &InpaintRequest) -> Result<CanvasImage, BackendError>;

    /// Fill a hole. Returns [`BackendError::FillUnavailable`] when no fill
    /// service is configured; callers then use the local fallback.
    fn fill(&self, image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, BackendError>;
}

impl<T: Backends + ?Sized> Backends for std::sync::Arc<T> {
    fn chat(
        &self,
        image: Option<&CanvasImage>,
        transcript: &[Turn],
        message: &str,
    ) -> Result<String, BackendError> {
        (**self).chat(image, transcript, message)
    }

    fn segment(&self, image: &CanvasImage, prompt: &SegmentPrompt) -> Result<Segmented, BackendError> {
        (**self).segment(image, prompt)
    }

    fn generate(
        &self,
        caption: &str,
        grounding: Option<&GroundingSpec>,
        size: (u32, u32),
    ) -> Result<CanvasImage, BackendError> {
        (**self).generate(caption, grounding, size)
    }

    fn inpaint(&self, image: &CanvasImage, request: &InpaintRequest) -> Result<CanvasImage, BackendError> {
        (**self).inpaint(image, request)
    }

    fn fill(&self, image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, BackendError> {
        (**self).fill(image, hole)
    }
}
