use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::command::Command;
use super::session::{
    BackendCall, CallStatus, EntryError, EntryStatus, HistoryEntry, Session, Turn,
};
use super::snapshot::SnapshotError;
use super::Clock;
use crate::backend::{BackendError, Backends, Capability, InpaintRequest, SegmentPrompt};
use crate::domain::{round_half_up, MaskSource, SegmentMask};
use crate::image::CanvasImage;
use crate::raster::{cut_region, fill_hole_fallback, mask_union, paste_patch, rasterize_stroke, RasterError, RleMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Size requested from the generate capability.
    pub output_size: (u32, u32),
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            output_size: (512, 512),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("session has no image yet; set or generate one first")]
    NoImage,
    #[error("no pending mask with id {0:?}")]
    UnknownMask(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    /// A backend call failed. The failed entry was appended to the history.
    #[error("{error}")]
    Backend {
        error: BackendError,
        entry: Box<HistoryEntry>,
    },
    /// Local raster work failed. The failed entry was appended to the history.
    #[error("{error}")]
    Raster {
        error: RasterError,
        entry: Box<HistoryEntry>,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NoImage => "no_image",
            EngineError::UnknownMask(_) => "unknown_mask",
            EngineError::NothingToUndo => "nothing_to_undo",
            EngineError::InvalidCommand(_) => "invalid_command",
            EngineError::Backend { error, .. } => error.code(),
            EngineError::Raster { .. } => "raster_error",
            EngineError::Snapshot(_) => "snapshot_error",
        }
    }

    /// The history entry recorded for this failure, if any.
    pub fn entry(&self) -> Option<&HistoryEntry> {
        match self {
            EngineError::Backend { entry, .. } | EngineError::Raster { entry, .. } => Some(entry),
            _ => None,
        }
    }
}

enum Failure {
    Backend(BackendError),
    Raster(RasterError),
}

impl From<BackendError> for Failure {
    fn from(e: BackendError) -> Self {
        Failure::Backend(e)
    }
}

impl From<RasterError> for Failure {
    fn from(e: RasterError) -> Self {
        Failure::Raster(e)
    }
}

#[derive(Default)]
struct Effect {
    canvas: Option<CanvasImage>,
    add_mask: Option<SegmentMask>,
    consume_mask: Option<String>,
    clear_masks: bool,
    turns: Vec<Turn>,
}

/// Executes commands against sessions.
///
/// The engine holds no session state; callers serialize commands per session.
#[derive(Clone)]
pub struct Engine {
    backends: Arc<dyn Backends>,
    clock: Arc<dyn Clock>,
    config: EngineConfig,
}

impl Engine {
    pub fn new(backends: Arc<dyn Backends>, clock: Arc<dyn Clock>, config: EngineConfig) -> Self {
        Self {
            backends,
            clock,
            config,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn backends(&self) -> &Arc<dyn Backends> {
        &self.backends
    }

    /// Run one command. On success, or on a backend or raster failure, exactly
    /// one history entry is appended. Validation errors leave the session
    /// untouched. Failures never change the canvas or pending masks.
    pub fn execute(&self, session: &mut Session, command: Command) -> Result<HistoryEntry, EngineError> {
        let canvas = match (&session.canvas, &command) {
            (Some(c), _) => Some(c.clone()),
            (None, Command::SetImage(_) | Command::GenerateImage { .. }) => None,
            (None, _) => return Err(EngineError::NoImage),
        };
        if let Some(id) = command.mask_id() {
            if !session.pending_masks.contains_key(id) {
                return Err(EngineError::UnknownMask(id.to_owned()));
            }
        }
        validate(&command)?;
        let restored = match command {
            Command::Undo => {
                let seq = *session.undo_stack.last().ok_or(EngineError::NothingToUndo)?;
                let hash = session.history[seq as usize - 1]
                    .canvas_hash_before
                    .expect("undo stack only holds entries with a prior canvas");
                Some(session.snapshots.get(hash)?)
            }
            _ => None,
        };

        let seq = session.revision() + 1;
        let timestamp_ms = self.clock.now_ms();
        let hash_before = session.canvas_hash();
        let mut calls = Vec::new();
        let outcome = match restored {
            Some(img) => Ok(Effect {
                canvas: Some(img),
                clear_masks: true,
                ..Effect::default()
            }),
            None => self.run(session, canvas.as_ref(), &command, seq, &mut calls),
        };

        let mut entry = HistoryEntry {
            seq,
            command: command.summary(),
            status: EntryStatus::Ok,
            error: None,
            backend_calls: calls,
            canvas_hash_before: hash_before,
            canvas_hash_after: hash_before,
            image_mutating: command.mutates_canvas(),
            masks_after: session.pending_masks.keys().cloned().collect(),
            timestamp_ms,
        };

        let effect = match outcome {
            Ok(effect) => effect,
            Err(failure) => {
                let (code, detail) = match &failure {
                    Failure::Backend(e) => (e.code().to_owned(), e.to_string()),
                    Failure::Raster(e) => ("raster_error".to_owned(), e.to_string()),
                };
                entry.status = EntryStatus::Failed;
                entry.error = Some(EntryError { code, detail });
                session.history.push(entry.clone());
                let entry = Box::new(entry);
                return Err(match failure {
                    Failure::Backend(error) => EngineError::Backend { error, entry },
                    Failure::Raster(error) => EngineError::Raster { error, entry },
                });
            }
        };

        // snapshot before touching the session so a failed write changes nothing
        let undoable = effect.canvas.is_some() && hash_before.is_some() && !matches!(command, Command::Undo);
        if undoable {
            session
                .snapshots
                .put(session.canvas.as_ref().expect("hash_before implies a canvas"))?;
        }

        if let Some(img) = effect.canvas {
            session.canvas = Some(img);
        }
        if matches!(command, Command::Undo) {
            session.undo_stack.pop();
        } else if undoable {
            session.undo_stack.push(seq);
        }
        if effect.clear_masks {
            session.pending_masks.clear();
        }
        if let Some(id) = effect.consume_mask {
            session.pending_masks.remove(&id);
        }
        if let Some(mask) = effect.add_mask {
            session.pending_masks.insert(mask.id.clone(), mask);
        }
        session.transcript.extend(effect.turns);

        entry.canvas_hash_after = session.canvas_hash();
        entry.masks_after = session.pending_masks.keys().cloned().collect();
        session.history.push(entry.clone());
        Ok(entry)
    }

    fn call<T>(
        &self,
        calls: &mut Vec<BackendCall>,
        capability: Capability,
        f: impl FnOnce(&dyn Backends) -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let started = self.clock.now_ms();
        let result = f(self.backends.as_ref());
        let status = match &result {
            Ok(_) => CallStatus::Ok,
            Err(BackendError::FillUnavailable) => CallStatus::Unavailable,
            Err(_) => CallStatus::Failed,
        };
        calls.push(BackendCall {
            capability,
            duration_ms: self.clock.now_ms().saturating_sub(started),
            status,
        });
        result
    }

    fn run(
        &self,
        session: &Session,
        canvas: Option<&CanvasImage>,
        command: &Command,
        seq: u64,
        calls: &mut Vec<BackendCall>,
    ) -> Result<Effect, Failure> {
        let mask_of = |id: &str| session.pending_masks[id].mask.clone();
        let new_mask_id = format!("mask-{seq}");
        Ok(match command {
            Command::SetImage(img) => Effect {
                canvas: Some(img.clone()),
                clear_masks: true,
                ..Effect::default()
            },
            Command::GenerateImage { caption, grounding } => {
                let size = self.config.output_size;
                let img = self.call(calls, Capability::Generate, |b| b.generate(caption, grounding.as_ref(), size))?;
                if img.dims() != size {
                    return Err(protocol(Capability::Generate, format!("expected {size:?} image, got {:?}", img.dims())));
                }
                Effect {
                    canvas: Some(img),
                    clear_masks: true,
                    ..Effect::default()
                }
            }
            Command::Chat(message) => {
                let reply = self.call(calls, Capability::Chat, |b| b.chat(canvas, &session.transcript, message))?;
                if reply.trim().is_empty() {
                    return Err(protocol(Capability::Chat, "empty reply".into()));
                }
                Effect {
                    turns: vec![Turn::user(message.clone()), Turn::assistant(reply)],
                    ..Effect::default()
                }
            }
            Command::SegmentByStroke(strokes) => {
                let canvas = canvas.expect("gated above");
                let rasters: Vec<RleMask> = strokes.iter().map(|s| rasterize_stroke(s, canvas.dims())).collect();
                let scribble = mask_union(&rasters)?.expect("at least one stroke");
                let prompt = SegmentPrompt::Scribble(scribble);
                let seg = self.call(calls, Capability::Segment, |b| b.segment(canvas, &prompt))?;
                Effect {
                    add_mask: Some(checked_mask(canvas, new_mask_id, seg.mask, seg.label, MaskSource::Stroke)?),
                    ..Effect::default()
                }
            }
            Command::SegmentByText(text) => {
                let canvas = canvas.expect("gated above");
                let prompt = SegmentPrompt::Text(text.clone());
                let seg = self.call(calls, Capability::Segment, |b| b.segment(canvas, &prompt))?;
                Effect {
                    add_mask: Some(checked_mask(canvas, new_mask_id, seg.mask, seg.label, MaskSource::Text)?),
                    ..Effect::default()
                }
            }
            Command::RemoveObject { mask_id } => {
                let canvas = canvas.expect("gated above");
                let mask = mask_of(mask_id);
                let (_, holed) = cut_region(canvas, &mask)?;
                Effect {
                    canvas: Some(self.fill(calls, &holed, &mask)?),
                    consume_mask: Some(mask_id.clone()),
                    ..Effect::default()
                }
            }
            Command::MoveObject { mask_id, dx, dy } => {
                let canvas = canvas.expect("gated above");
                let mask = mask_of(mask_id);
                let (patch, holed) = cut_region(canvas, &mask)?;
                let filled = self.fill(calls, &holed, &mask)?;
                let offset = (
                    round_half_up(dx * f64::from(canvas.width())),
                    round_half_up(dy * f64::from(canvas.height())),
                );
                Effect {
                    canvas: Some(paste_patch(&filled, &patch, offset)),
                    consume_mask: Some(mask_id.clone()),
                    ..Effect::default()
                }
            }
            Command::ReplaceObject { mask_id, prompt } => {
                let canvas = canvas.expect("gated above");
                let req = InpaintRequest::Masked {
                    mask: mask_of(mask_id),
                    prompt: prompt.clone(),
                };
                let img = self.call(calls, Capability::Inpaint, |b| b.inpaint(canvas, &req))?;
                Effect {
                    canvas: Some(same_dims(Capability::Inpaint, canvas, img)?),
                    consume_mask: Some(mask_id.clone()),
                    ..Effect::default()
                }
            }
            Command::InpaintObjects(grounding) => {
                let canvas = canvas.expect("gated above");
                let req = InpaintRequest::Grounded(grounding.clone());
                let img = self.call(calls, Capability::Inpaint, |b| b.inpaint(canvas, &req))?;
                Effect {
                    canvas: Some(same_dims(Capability::Inpaint, canvas, img)?),
                    ..Effect::default()
                }
            }
            Command::ClearMasks => Effect {
                clear_masks: true,
                ..Effect::default()
            },
            Command::Undo => unreachable!("undo is resolved before run"),
        })
    }

    /// Fill through the backend, falling back to the local fill when the
    /// capability is not configured.
    fn fill(&self, calls: &mut Vec<BackendCall>, holed: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, Failure> {
        match self.call(calls, Capability::Fill, |b| b.fill(holed, hole)) {
            Ok(img) => {
                let img = same_dims(Capability::Fill, holed, img)?;
                let bits = hole.decode();
                let opaque = bits
                    .bits()
                    .iter()
                    .zip(img.pixels().chunks_exact(4))
                    .all(|(&h, px)| !h || px[3] == 255);
                if !opaque {
                    return Err(protocol(Capability::Fill, "filled image still has hole pixels".into()));
                }
                Ok(img)
            }
            Err(BackendError::FillUnavailable) => Ok(fill_hole_fallback(holed, hole)?),
            Err(e) => Err(e.into()),
        }
    }
}

fn validate(command: &Command) -> Result<(), EngineError> {
    let invalid = |m: &str| Err(EngineError::InvalidCommand(m.to_owned()));
    match command {
        Command::Chat(t) if t.trim().is_empty() => invalid("chat message must not be blank"),
        Command::GenerateImage { caption, .. } if caption.trim().is_empty() => invalid("caption must not be blank"),
        Command::SegmentByStroke(s) if s.is_empty() => invalid("at least one stroke is required"),
        Command::ReplaceObject { prompt, .. } if prompt.trim().is_empty() => invalid("prompt must not be blank"),
        Command::MoveObject { dx, dy, .. } if !(dx.abs() <= 1.0 && dy.abs() <= 1.0) => {
            invalid("move offsets must lie in [-1, 1]")
        }
        _ => Ok(()),
    }
}

fn protocol(capability: Capability, detail: String) -> Failure {
    Failure::Backend(BackendError::Protocol { capability, detail })
}

fn same_dims(capability: Capability, input: &CanvasImage, output: CanvasImage) -> Result<CanvasImage, Failure> {
    if output.dims() != input.dims() {
        return Err(protocol(
            capability,
            format!("expected {:?} image, got {:?}", input.dims(), output.dims()),
        ));
    }
    Ok(output)
}

fn checked_mask(
    canvas: &CanvasImage,
    id: String,
    mask: RleMask,
    label: Option<String>,
    source: MaskSource,
) -> Result<SegmentMask, Failure> {
    if mask.dims() != canvas.dims() {
        return Err(protocol(
            Capability::Segment,
            format!("mask is {:?} but canvas is {:?}", mask.dims(), canvas.dims()),
        ));
    }
    if mask.is_empty() {
        return Err(protocol(Capability::Segment, "mask has no foreground".into()));
    }
    Ok(SegmentMask { id, mask, label, source })
}
