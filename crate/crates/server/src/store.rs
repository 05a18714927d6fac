//! On-disk sessions.
//!
//! ```text
//! data_dir/sessions/{id}/manifest.json   session record
//! data_dir/sessions/{id}/images/{seq}.png canvas after each successful edit
//! data_dir/sessions/{id}/snapshots/       undo spill area
//! ```
//!
//! Images are written before the manifest and both are replaced atomically,
//! so a crash loses at most the command in flight.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use easel_core::workflow::{SessionRecord, SnapshotStore, DEFAULT_SNAPSHOT_CAPACITY};
use easel_core::{CanvasImage, ContentHash, Session};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const ARCHIVE_FORMAT: &str = "easel-session";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session is damaged: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    #[serde(flatten)]
    record: SessionRecord,
}

/// Self-contained export of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub format: String,
    pub version: u32,
    pub manifest: SessionRecord,
    /// Base64 PNG of the canvas after each successful edit, by entry seq.
    pub images: BTreeMap<u64, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Damaged {
    pub id: String,
    pub reason: String,
}

/// Write through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("target has a parent directory");
    fs::create_dir_all(dir).map_err(io(dir))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("blob"),
        uuid::Uuid::new_v4().simple()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io(path))
}

/// Seqs whose resulting canvas is persisted.
fn image_seqs(record: &SessionRecord) -> impl Iterator<Item = (u64, ContentHash)> + '_ {
    record
        .history
        .iter()
        .filter(|e| e.is_ok() && e.image_mutating)
        .filter_map(|e| e.canvas_hash_after.map(|h| (e.seq, h)))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Rebuild a live session from a record and its edit images.
fn assemble(
    record: SessionRecord,
    images: &HashMap<ContentHash, CanvasImage>,
    snapshots: SnapshotStore,
) -> Result<Session, StoreError> {
    let mut snapshots = snapshots;
    for &seq in &record.undo_stack {
        let hash = record
            .history
            .get(seq as usize - 1)
            .and_then(|e| e.canvas_hash_before)
            .ok_or_else(|| StoreError::Corrupt(format!("undo entry {seq} has no prior canvas")))?;
        let img = images
            .get(&hash)
            .ok_or_else(|| StoreError::Corrupt(format!("no image for canvas {hash}")))?;
        snapshots
            .put(img)
            .map_err(|e| StoreError::Corrupt(format!("snapshot: {e}")))?;
    }
    let canvas = match record.canvas_hash {
        Some(h) => Some(
            images
                .get(&h)
                .cloned()
                .ok_or_else(|| StoreError::Corrupt(format!("no image for current canvas {h}")))?,
        ),
        None => None,
    };
    Session::from_record(record, canvas, snapshots).map_err(StoreError::Corrupt)
}

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = data_dir.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io(&sessions))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    /// Snapshot store for a live session, spilling under its directory.
    pub fn snapshots_for(&self, id: &str) -> SnapshotStore {
        SnapshotStore::with_spill_dir(self.session_dir(id).join("snapshots"), DEFAULT_SNAPSHOT_CAPACITY)
    }

    /// Persist new edit images, then the manifest.
    pub fn save(&self, session: &Session) -> Result<(), StoreError> {
        let dir = self.session_dir(session.id());
        let record = session.to_record();
        for (seq, hash) in image_seqs(&record) {
            let path = dir.join("images").join(format!("{seq}.png"));
            if path.exists() {
                continue;
            }
            let img = self.canvas_for(session, hash)?;
            let png = img
                .encode_png()
                .map_err(|e| StoreError::Corrupt(format!("encoding canvas {hash}: {e}")))?;
            write_atomic(&path, &png)?;
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            record,
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("records serialize");
        write_atomic(&dir.join("manifest.json"), &json)
    }

    /// Canvas with `hash` from the live session. Only the current canvas and
    /// undo snapshots are held, which covers every image not yet on disk
    /// as long as the session is saved after each command.
    fn canvas_for(&self, session: &Session, hash: ContentHash) -> Result<CanvasImage, StoreError> {
        if let Some(c) = session.canvas().filter(|c| c.content_hash() == hash) {
            return Ok(c.clone());
        }
        session
            .snapshots()
            .get(hash)
            .map_err(|_| StoreError::Corrupt(format!("canvas {hash} is not available to persist")))
    }

    fn read_manifest(&self, id: &str) -> Result<SessionRecord, StoreError> {
        let path = self.session_dir(id).join("manifest.json");
        if !path.exists() {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let text = fs::read(&path).map_err(io(&path))?;
        let m: Manifest =
            serde_json::from_slice(&text).map_err(|e| StoreError::Corrupt(format!("manifest.json: {e}")))?;
        if m.format_version != FORMAT_VERSION {
            return Err(StoreError::Corrupt(format!("unsupported format_version {}", m.format_version)));
        }
        if m.record.id != id {
            return Err(StoreError::Corrupt(format!("manifest id {:?} does not match directory", m.record.id)));
        }
        Ok(m.record)
    }

    fn read_images(&self, record: &SessionRecord) -> Result<HashMap<ContentHash, CanvasImage>, StoreError> {
        let dir = self.session_dir(&record.id).join("images");
        let mut out = HashMap::new();
        for (seq, hash) in image_seqs(record) {
            if out.contains_key(&hash) {
                continue;
            }
            let path = dir.join(format!("{seq}.png"));
            let bytes = fs::read(&path).map_err(|e| StoreError::Corrupt(format!("{}: {e}", path.display())))?;
            let img = CanvasImage::decode_png(&bytes)
                .map_err(|e| StoreError::Corrupt(format!("{}: {e}", path.display())))?;
            if img.content_hash() != hash {
                return Err(StoreError::Corrupt(format!("{} does not match hash {hash}", path.display())));
            }
            out.insert(hash, img);
        }
        Ok(out)
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let record = self.read_manifest(id)?;
        let images = self.read_images(&record)?;
        let snapshots = self.snapshots_for(id);
        assemble(record, &images, snapshots)
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("sessions");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Every stored session, with the ones that fail to load listed apart.
    pub fn load_all(&self) -> Result<(Vec<Session>, Vec<Damaged>), StoreError> {
        let mut ok = Vec::new();
        let mut damaged = Vec::new();
        for id in self.ids()? {
            match self.load(&id) {
                Ok(s) => ok.push(s),
                Err(e) => damaged.push(Damaged {
                    id,
                    reason: e.to_string(),
                }),
            }
        }
        Ok((ok, damaged))
    }

    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        let dir = self.session_dir(id);
        match fs::remove_dir_all(&dir) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            r => r.map_err(io(&dir)),
        }
    }

    pub fn export(&self, id: &str) -> Result<Archive, StoreError> {
        let record = self.read_manifest(id)?;
        let dir = self.session_dir(id).join("images");
        let mut images = BTreeMap::new();
        for (seq, _) in image_seqs(&record) {
            let path = dir.join(format!("{seq}.png"));
            let bytes = fs::read(&path).map_err(io(&path))?;
            images.insert(seq, base64::engine::general_purpose::STANDARD.encode(bytes));
        }
        Ok(Archive {
            format: ARCHIVE_FORMAT.into(),
            version: FORMAT_VERSION,
            manifest: record,
            images,
        })
    }

    /// Store an archive under `new_id` and load it.
    pub fn import(&self, archive: Archive, new_id: &str) -> Result<Session, StoreError> {
        if archive.format != ARCHIVE_FORMAT || archive.version != FORMAT_VERSION {
            return Err(StoreError::Corrupt(format!(
                "unsupported archive {} v{}",
                archive.format, archive.version
            )));
        }
        if !valid_id(new_id) {
            return Err(StoreError::Corrupt(format!("invalid session id {new_id:?}")));
        }
        let mut record = archive.manifest;
        record.id = new_id.to_owned();
        let mut images = HashMap::new();
        for (seq, hash) in image_seqs(&record) {
            let b64 = archive
                .images
                .get(&seq)
                .ok_or_else(|| StoreError::Corrupt(format!("archive lacks image {seq}")))?;
            let img = CanvasImage::from_base64_png(b64).map_err(|e| StoreError::Corrupt(format!("image {seq}: {e}")))?;
            if img.content_hash() != hash {
                return Err(StoreError::Corrupt(format!("image {seq} does not match hash {hash}")));
            }
            images.insert(hash, img);
        }
        let session = assemble(record.clone(), &images, self.snapshots_for(new_id))?;
        let dir = self.session_dir(new_id).join("images");
        for (seq, hash) in image_seqs(&record) {
            let png = images[&hash]
                .encode_png()
                .map_err(|e| StoreError::Corrupt(format!("image {seq}: {e}")))?;
            write_atomic(&dir.join(format!("{seq}.png")), &png)?;
        }
        self.save(&session)?;
        Ok(session)
    }
}
