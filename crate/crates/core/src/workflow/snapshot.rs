use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use crate::hash::ContentHash;
use crate::image::CanvasImage;

/// Canvases kept in memory before older ones spill to disk.
pub const DEFAULT_SNAPSHOT_CAPACITY: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("snapshot {0} is not available")]
    Missing(ContentHash),
    #[error("snapshot {hash} on disk is corrupt: {reason}")]
    Corrupt { hash: ContentHash, reason: String },
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
}

/// Canvas snapshots for undo.
///
/// The most recent `capacity` canvases stay in memory; older ones are
/// written to `spill_dir` as `<hash>.png` and read back on demand. Without a
/// spill directory every snapshot stays in memory.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    capacity: usize,
    mem: VecDeque<CanvasImage>,
    spill_dir: Option<PathBuf>,
}

impl SnapshotStore {
    pub fn in_memory() -> Self {
        Self {
            capacity: DEFAULT_SNAPSHOT_CAPACITY,
            mem: VecDeque::new(),
            spill_dir: None,
        }
    }

    pub fn with_spill_dir(dir: impl Into<PathBuf>, capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            mem: VecDeque::new(),
            spill_dir: Some(dir.into()),
        }
    }

    pub fn spill_dir(&self) -> Option<&Path> {
        self.spill_dir.as_deref()
    }

    pub fn in_memory_len(&self) -> usize {
        self.mem.len()
    }

    pub fn put(&mut self, image: &CanvasImage) -> Result<(), SnapshotError> {
        let hash = image.content_hash();
        if let Some(pos) = self.mem.iter().position(|i| i.content_hash() == hash) {
            let img = self.mem.remove(pos).expect("position is valid");
            self.mem.push_back(img);
            return Ok(());
        }
        self.mem.push_back(image.clone());
        if let Some(dir) = &self.spill_dir {
            while self.mem.len() > self.capacity {
                let old = self.mem.pop_front().expect("nonempty");
                write_blob(dir, &old)?;
            }
        }
        Ok(())
    }

    pub fn get(&self, hash: ContentHash) -> Result<CanvasImage, SnapshotError> {
        if let Some(img) = self.mem.iter().rev().find(|i| i.content_hash() == hash) {
            return Ok(img.clone());
        }
        let Some(dir) = &self.spill_dir else {
            return Err(SnapshotError::Missing(hash));
        };
        let path = dir.join(format!("{hash}.png"));
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SnapshotError::Missing(hash)),
            Err(e) => return Err(e.into()),
        };
        let img = CanvasImage::decode_png(&bytes).map_err(|e| SnapshotError::Corrupt {
            hash,
            reason: e.to_string(),
        })?;
        if img.content_hash() != hash {
            return Err(SnapshotError::Corrupt {
                hash,
                reason: format!("content hashes to {}", img.content_hash()),
            });
        }
        Ok(img)
    }

    pub fn contains(&self, hash: ContentHash) -> bool {
        self.get(hash).is_ok()
    }

    /// Write every in-memory snapshot to the spill directory as well.
    pub fn flush(&self) -> Result<(), SnapshotError> {
        if let Some(dir) = &self.spill_dir {
            for img in &self.mem {
                write_blob(dir, img)?;
            }
        }
        Ok(())
    }
}

fn write_blob(dir: &Path, image: &CanvasImage) -> Result<(), SnapshotError> {
    let path = dir.join(format!("{}.png", image.content_hash()));
    if path.exists() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    let bytes = image.encode_png().map_err(|e| SnapshotError::Corrupt {
        hash: image.content_hash(),
        reason: e.to_string(),
    })?;
    let tmp = dir.join(format!(".{}.tmp", image.content_hash()));
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}
