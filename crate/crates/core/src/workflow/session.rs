use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::snapshot::SnapshotStore;
use crate::backend::Capability;
use crate::domain::SegmentMask;
use crate::hash::ContentHash;
use crate::image::CanvasImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            text: text.into(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    NeedImage,
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    Failed,
    /// The capability is not configured; a local fallback ran instead.
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCall {
    pub capability: Capability,
    pub duration_ms: u64,
    pub status: CallStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    pub code: String,
    pub detail: String,
}

/// One executed command and its committed effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    /// Command summary; image payloads are replaced by their content hash.
    pub command: serde_json::Value,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EntryError>,
    pub backend_calls: Vec<BackendCall>,
    pub canvas_hash_before: Option<ContentHash>,
    pub canvas_hash_after: Option<ContentHash>,
    /// Whether the command kind edits the canvas, successful or not.
    pub image_mutating: bool,
    pub masks_after: Vec<String>,
    pub timestamp_ms: u64,
}

impl HistoryEntry {
    pub fn is_ok(&self) -> bool {
        self.status == EntryStatus::Ok
    }

    pub fn op(&self) -> &str {
        self.command.get("op").and_then(|v| v.as_str()).unwrap_or("")
    }

    /// Copy with timestamps and durations zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut e = self.clone();
        e.timestamp_ms = 0;
        for c in &mut e.backend_calls {
            c.duration_ms = 0;
        }
        e
    }
}

/// One multi-turn editing session.
///
/// The state is `NeedImage` exactly when there is no canvas, and the
/// revision always equals the history length.
#[derive(Debug, Clone)]
pub struct Session {
    pub(crate) id: String,
    pub(crate) canvas: Option<CanvasImage>,
    pub(crate) pending_masks: BTreeMap<String, SegmentMask>,
    pub(crate) transcript: Vec<Turn>,
    pub(crate) history: Vec<HistoryEntry>,
    /// Seqs of entries that undo can still revert, oldest first.
    pub(crate) undo_stack: Vec<u64>,
    pub(crate) snapshots: SnapshotStore,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.canvas == other.canvas
            && self.pending_masks == other.pending_masks
            && self.transcript == other.transcript
            && self.history == other.history
            && self.undo_stack == other.undo_stack
    }
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

impl Session {
    /// Fresh session with a random id.
    pub fn new() -> Self {
        Self::with_id(uuid::Uuid::new_v4().simple().to_string())
    }

    pub fn with_id(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            canvas: None,
            pending_masks: BTreeMap::new(),
            transcript: Vec::new(),
            history: Vec::new(),
            undo_stack: Vec::new(),
            snapshots: SnapshotStore::in_memory(),
        }
    }

    pub fn with_snapshots(mut self, snapshots: SnapshotStore) -> Self {
        self.snapshots = snapshots;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        if self.canvas.is_some() {
            SessionState::Ready
        } else {
            SessionState::NeedImage
        }
    }

    pub fn canvas(&self) -> Option<&CanvasImage> {
        self.canvas.as_ref()
    }

    pub fn canvas_hash(&self) -> Option<ContentHash> {
        self.canvas.as_ref().map(CanvasImage::content_hash)
    }

    pub fn pending_masks(&self) -> impl Iterator<Item = &SegmentMask> {
        self.pending_masks.values()
    }

    pub fn mask(&self, id: &str) -> Option<&SegmentMask> {
        self.pending_masks.get(id)
    }

    pub fn transcript(&self) -> &[Turn] {
        &self.transcript
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn revision(&self) -> u64 {
        self.history.len() as u64
    }

    pub fn undo_stack(&self) -> &[u64] {
        &self.undo_stack
    }

    pub fn snapshots(&self) -> &SnapshotStore {
        &self.snapshots
    }

    /// Serializable view of everything except image payloads.
    pub fn to_record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            state: self.state(),
            revision: self.revision(),
            canvas_hash: self.canvas_hash(),
            transcript: self.transcript.clone(),
            history: self.history.clone(),
            pending_masks: self.pending_masks.values().cloned().collect(),
            undo_stack: self.undo_stack.clone(),
        }
    }

    /// Rebuild a session from a record plus its current canvas, checking the
    /// record's invariants.
    pub fn from_record(
        record: SessionRecord,
        canvas: Option<CanvasImage>,
        snapshots: SnapshotStore,
    ) -> Result<Self, String> {
        if record.canvas_hash != canvas.as_ref().map(CanvasImage::content_hash) {
            return Err("canvas does not match the recorded hash".into());
        }
        if record.state != if canvas.is_some() { SessionState::Ready } else { SessionState::NeedImage } {
            return Err("state disagrees with canvas presence".into());
        }
        if record.revision != record.history.len() as u64 {
            return Err("revision disagrees with history length".into());
        }
        for (i, e) in record.history.iter().enumerate() {
            if e.seq != i as u64 + 1 {
                return Err(format!("history seq gap at position {i}"));
            }
        }
        if record
            .undo_stack
            .iter()
            .any(|&s| s == 0 || s > record.revision || record.history[s as usize - 1].canvas_hash_before.is_none())
        {
            return Err("undo stack references an invalid entry".into());
        }
        let mut pending_masks = BTreeMap::new();
        for m in record.pending_masks {
            if canvas.as_ref().map(CanvasImage::dims) != Some(m.mask.dims()) {
                return Err(format!("mask {} does not match the canvas", m.id));
            }
            pending_masks.insert(m.id.clone(), m);
        }
        Ok(Self {
            id: record.id,
            canvas,
            pending_masks,
            transcript: record.transcript,
            history: record.history,
            undo_stack: record.undo_stack,
            snapshots,
        })
    }
}

/// Persistable session state without images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub state: SessionState,
    pub revision: u64,
    pub canvas_hash: Option<ContentHash>,
    pub transcript: Vec<Turn>,
    pub history: Vec<HistoryEntry>,
    pub pending_masks: Vec<SegmentMask>,
    pub undo_stack: Vec<u64>,
}
