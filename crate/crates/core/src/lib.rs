//! Deterministic core for multi-turn, multimodal image editing sessions.
//!
//! The crate holds everything that does not need a network or a model:
//! visual-prompt value types, mask geometry and compositing, the session
//! state machine with undo, the capability wire protocol, deterministic
//! mock backends and the scenario-script replayer.

pub mod backend;
pub mod domain;
pub mod hash;
pub mod image;
pub mod mock;
pub mod protocol;
pub mod raster;
pub mod script;
pub mod workflow;

pub use backend::{BackendError, Backends, Capability, InpaintRequest, SegmentPrompt, Segmented};
pub use domain::{
    BoundingBox, DomainError, GroundingSpec, MaskSource, PixelBox, Point, ReferringText,
    SegmentMask, Stroke,
};
pub use hash::{fnv1a64, ContentHash};
pub use image::{CanvasImage, ImageError, Rgb};
pub use raster::{Patch, RasterError, RleMask};
pub use workflow::{
    Clock, Command, Engine, EngineConfig, EngineError, FixedClock, HistoryEntry, Session,
    SessionState, SystemClock,
};
