use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::domain::{
    bind_concepts_to_boxes, parse_grounding_instruction, stroke_min_bbox, BoundingBox, DomainError,
    GroundingSpec, ReferringText, Stroke,
};
use crate::image::{CanvasImage, ImageError};
use crate::mock::FixtureSource;

/// What the user asked a session to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SetImage(CanvasImage),
    GenerateImage {
        caption: String,
        grounding: Option<GroundingSpec>,
    },
    Chat(String),
    /// All strokes are unioned into one visual prompt.
    SegmentByStroke(Vec<Stroke>),
    SegmentByText(ReferringText),
    RemoveObject {
        mask_id: String,
    },
    /// Offsets are normalized to the canvas size.
    MoveObject {
        mask_id: String,
        dx: f64,
        dy: f64,
    },
    ReplaceObject {
        mask_id: String,
        prompt: String,
    },
    InpaintObjects(GroundingSpec),
    ClearMasks,
    Undo,
}

impl Command {
    pub fn op(&self) -> &'static str {
        match self {
            Command::SetImage(_) => "set_image",
            Command::GenerateImage { .. } => "generate_image",
            Command::Chat(_) => "chat",
            Command::SegmentByStroke(_) => "segment_by_stroke",
            Command::SegmentByText(_) => "segment_by_text",
            Command::RemoveObject { .. } => "remove_object",
            Command::MoveObject { .. } => "move_object",
            Command::ReplaceObject { .. } => "replace_object",
            Command::InpaintObjects(_) => "inpaint_objects",
            Command::ClearMasks => "clear_masks",
            Command::Undo => "undo",
        }
    }

    /// Commands whose success replaces the canvas.
    pub fn mutates_canvas(&self) -> bool {
        matches!(
            self,
            Command::SetImage(_)
                | Command::GenerateImage { .. }
                | Command::RemoveObject { .. }
                | Command::MoveObject { .. }
                | Command::ReplaceObject { .. }
                | Command::InpaintObjects(_)
                | Command::Undo
        )
    }

    pub fn mask_id(&self) -> Option<&str> {
        match self {
            Command::RemoveObject { mask_id }
            | Command::MoveObject { mask_id, .. }
            | Command::ReplaceObject { mask_id, .. } => Some(mask_id),
            _ => None,
        }
    }

    /// JSON summary for history entries. Same shape as [`CommandSpec`]
    /// except that images are referenced by hash and size.
    pub fn summary(&self) -> serde_json::Value {
        match self {
            Command::SetImage(img) => json!({
                "op": "set_image",
                "canvas_hash": img.content_hash(),
                "width": img.width(),
                "height": img.height(),
            }),
            other => serde_json::to_value(CommandSpec::from_command(other, false))
                .expect("command specs serialize"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("bad image: {0}")]
    Image(#[from] ImageError),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("{0}")]
    Invalid(String),
}

/// Grounding as written in scripts and API calls.
///
/// Concepts come from either `concepts` or a `;`-separated `instruction`;
/// boxes from either `boxes` or `strokes` (each stroke becomes its minimum
/// bounding box).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundingInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoundingBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strokes: Option<Vec<Stroke>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

impl GroundingInput {
    pub fn resolve(self) -> Result<GroundingSpec, CommandError> {
        let concepts = match (self.concepts, self.instruction) {
            (Some(c), None) => c,
            (None, Some(text)) => parse_grounding_instruction(&text)?,
            _ => {
                return Err(CommandError::Invalid(
                    "grounding needs exactly one of `concepts` or `instruction`".into(),
                ))
            }
        };
        let boxes = match (self.boxes, self.strokes) {
            (Some(b), None) => b,
            (None, Some(s)) => s.iter().map(stroke_min_bbox).collect(),
            _ => {
                return Err(CommandError::Invalid(
                    "grounding needs exactly one of `boxes` or `strokes`".into(),
                ))
            }
        };
        Ok(bind_concepts_to_boxes(concepts, boxes)?.with_caption(self.caption))
    }
}

impl From<&GroundingSpec> for GroundingInput {
    fn from(g: &GroundingSpec) -> Self {
        Self {
            concepts: Some(g.concepts().to_vec()),
            boxes: Some(g.boxes().to_vec()),
            caption: g.caption().map(str::to_owned),
            ..Self::default()
        }
    }
}

/// JSON form of a [`Command`], used by scenario scripts and the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CommandSpec {
    SetImage {
        /// Base64 PNG.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image: Option<String>,
        /// Name of a registered scene fixture.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixture: Option<String>,
    },
    GenerateImage {
        caption: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grounding: Option<GroundingInput>,
    },
    Chat {
        text: String,
    },
    SegmentByStroke {
        strokes: Vec<Stroke>,
    },
    SegmentByText {
        text: String,
    },
    RemoveObject {
        mask_id: String,
    },
    MoveObject {
        mask_id: String,
        dx: f64,
        dy: f64,
    },
    ReplaceObject {
        mask_id: String,
        prompt: String,
    },
    InpaintObjects {
        grounding: GroundingInput,
    },
    ClearMasks,
    Undo,
}

impl CommandSpec {
    /// Validate and convert into a [`Command`]. Fixture references need a
    /// fixture source.
    pub fn resolve(self, fixtures: Option<&dyn FixtureSource>) -> Result<Command, CommandError> {
        Ok(match self {
            CommandSpec::SetImage { image, fixture } => match (image, fixture) {
                (Some(b64), None) => Command::SetImage(CanvasImage::from_base64_png(&b64)?),
                (None, Some(name)) => Command::SetImage(
                    fixtures
                        .and_then(|f| f.fixture_image(&name))
                        .ok_or(CommandError::UnknownFixture(name))?,
                ),
                _ => {
                    return Err(CommandError::Invalid(
                        "set_image needs exactly one of `image` or `fixture`".into(),
                    ))
                }
            },
            CommandSpec::GenerateImage { caption, grounding } => {
                if caption.trim().is_empty() {
                    return Err(CommandError::Invalid("caption must not be blank".into()));
                }
                Command::GenerateImage {
                    caption,
                    grounding: grounding.map(GroundingInput::resolve).transpose()?,
                }
            }
            CommandSpec::Chat { text } => {
                if text.trim().is_empty() {
                    return Err(CommandError::Invalid("chat message must not be blank".into()));
                }
                Command::Chat(text)
            }
            CommandSpec::SegmentByStroke { strokes } => {
                if strokes.is_empty() {
                    return Err(CommandError::Invalid("segment_by_stroke needs at least one stroke".into()));
                }
                Command::SegmentByStroke(strokes)
            }
            CommandSpec::SegmentByText { text } => Command::SegmentByText(ReferringText::new(&text)?),
            CommandSpec::RemoveObject { mask_id } => Command::RemoveObject { mask_id },
            CommandSpec::MoveObject { mask_id, dx, dy } => {
                if !(dx.is_finite() && dy.is_finite() && dx.abs() <= 1.0 && dy.abs() <= 1.0) {
                    return Err(CommandError::Invalid(format!(
                        "move offsets must lie in [-1, 1], got ({dx}, {dy})"
                    )));
                }
                Command::MoveObject { mask_id, dx, dy }
            }
            CommandSpec::ReplaceObject { mask_id, prompt } => {
                if prompt.trim().is_empty() {
                    return Err(CommandError::Invalid("replacement prompt must not be blank".into()));
                }
                Command::ReplaceObject { mask_id, prompt }
            }
            CommandSpec::InpaintObjects { grounding } => Command::InpaintObjects(grounding.resolve()?),
            CommandSpec::ClearMasks => Command::ClearMasks,
            CommandSpec::Undo => Command::Undo,
        })
    }

    /// JSON form of a command. With `embed_images` false, `set_image`
    /// carries no payload at all.
    pub fn from_command(cmd: &Command, embed_images: bool) -> Self {
        match cmd {
            Command::SetImage(img) => CommandSpec::SetImage {
                image: embed_images.then(|| img.to_base64_png().expect("valid canvas encodes")),
                fixture: None,
            },
            Command::GenerateImage { caption, grounding } => CommandSpec::GenerateImage {
                caption: caption.clone(),
                grounding: grounding.as_ref().map(GroundingInput::from),
            },
            Command::Chat(text) => CommandSpec::Chat { text: text.clone() },
            Command::SegmentByStroke(s) => CommandSpec::SegmentByStroke { strokes: s.clone() },
            Command::SegmentByText(t) => CommandSpec::SegmentByText {
                text: t.as_str().to_owned(),
            },
            Command::RemoveObject { mask_id } => CommandSpec::RemoveObject {
                mask_id: mask_id.clone(),
            },
            Command::MoveObject { mask_id, dx, dy } => CommandSpec::MoveObject {
                mask_id: mask_id.clone(),
                dx: *dx,
                dy: *dy,
            },
            Command::ReplaceObject { mask_id, prompt } => CommandSpec::ReplaceObject {
                mask_id: mask_id.clone(),
                prompt: prompt.clone(),
            },
            Command::InpaintObjects(g) => CommandSpec::InpaintObjects {
                grounding: GroundingInput::from(g),
            },
            Command::ClearMasks => CommandSpec::ClearMasks,
            Command::Undo => CommandSpec::Undo,
        }
    }
}
