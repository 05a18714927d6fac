//! The session state machine: command validation, backend orchestration,
//! append-only history and image-level undo.

mod command;
mod engine;
mod session;
mod snapshot;

pub use command::{Command, CommandError, CommandSpec, GroundingInput};
pub use engine::{Engine, EngineConfig, EngineError};
pub use session::{
    BackendCall, CallStatus, EntryError, EntryStatus, HistoryEntry, Role, Session, SessionRecord,
    SessionState, Turn,
};
pub use snapshot::{SnapshotError, SnapshotStore, DEFAULT_SNAPSHOT_CAPACITY};

use std::time::{SystemTime, UNIX_EPOCH};

/// Source of wall-clock milliseconds for history timestamps and call timings.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that never moves; makes histories reproducible bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}
