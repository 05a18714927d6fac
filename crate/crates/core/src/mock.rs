//! Deterministic stand-ins for the model services.
//!
//! Every mock is a pure function of its request and a [`FixtureRegistry`] of
//! scene manifests. Colors come from FNV-1a-64 of the relevant text so that
//! independent implementations render byte-identical images.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Backends, InpaintRequest, SegmentPrompt, Segmented};
use crate::domain::{denormalize_box, BoundingBox, GroundingSpec};
use crate::hash::ContentHash;
use crate::image::{CanvasImage, Rgb};
use crate::raster::{encode_rle, fill_hole_fallback, Bitmap, RleMask};
use crate::workflow::Turn;

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("reading fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing fixture {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid fixture {name}: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub region: BoundingBox,
    /// Defaults to the FNV color of `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Rgb>,
}

impl SceneObject {
    pub fn color(&self) -> Rgb {
        self.color.unwrap_or_else(|| Rgb::of_text(&self.name))
    }
}

/// Ground truth for a synthetic scene: a background and rectangles painted
/// in list order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub background_color: Rgb,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

impl SceneManifest {
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for o in &self.objects {
            if o.name.trim().is_empty() {
                return Err("object names must not be blank".into());
            }
            if !seen.insert(o.name.as_str()) {
                return Err(format!("duplicate object name {:?}", o.name));
            }
        }
        Ok(())
    }

    pub fn render(&self, width: u32, height: u32) -> CanvasImage {
        let mut buf = CanvasImage::filled(width, height, self.background_color)
            .expect("fixture dimensions validated")
            .to_vec();
        for o in &self.objects {
            paint_rect(&mut buf, (width, height), &o.region, o.color());
        }
        CanvasImage::new(width, height, buf).expect("render keeps shape")
    }

    /// First object whose name matches case-insensitively.
    pub fn find(&self, name: &str) -> Option<&SceneObject> {
        let needle = name.to_lowercase();
        self.objects.iter().find(|o| o.name.to_lowercase() == needle)
    }
}

/// A named manifest with the size it is rendered at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFixture {
    pub name: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub manifest: SceneManifest,
}

/// Named fixture images for scripts that reference scenes by name.
pub trait FixtureSource {
    fn fixture_image(&self, name: &str) -> Option<CanvasImage>;
}

/// Scene manifests indexed by the content hash of their rendering.
#[derive(Debug, Clone, Default)]
pub struct FixtureRegistry {
    scenes: Vec<(SceneFixture, CanvasImage)>,
    by_hash: HashMap<ContentHash, usize>,
}

impl FixtureRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fixture: SceneFixture) -> Result<ContentHash, FixtureError> {
        let invalid = |reason: String| FixtureError::Invalid {
            name: fixture.name.clone(),
            reason,
        };
        if fixture.width == 0 || fixture.height == 0 {
            return Err(invalid("width and height must be at least 1".into()));
        }
        fixture.manifest.validate().map_err(invalid)?;
        if self.scenes.iter().any(|(f, _)| f.name == fixture.name) {
            return Err(invalid("name already registered".into()));
        }
        let image = fixture.manifest.render(fixture.width, fixture.height);
        let hash = image.content_hash();
        self.by_hash.entry(hash).or_insert(self.scenes.len());
        self.scenes.push((fixture, image));
        Ok(hash)
    }

    /// Load every `*.json` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, FixtureError> {
        let io = |source| FixtureError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut reg = Self::new();
        for p in paths {
            let path = p.display().to_string();
            let text = fs::read_to_string(&p).map_err(|source| FixtureError::Io {
                path: path.clone(),
                source,
            })?;
            let fixture: SceneFixture =
                serde_json::from_str(&text).map_err(|source| FixtureError::Parse { path, source })?;
            reg.insert(fixture)?;
        }
        Ok(reg)
    }

    pub fn manifest_for(&self, hash: ContentHash) -> Option<&SceneManifest> {
        self.by_hash.get(&hash).map(|&i| &self.scenes[i].0.manifest)
    }

    pub fn scene(&self, name: &str) -> Option<&SceneFixture> {
        self.scenes.iter().find(|(f, _)| f.name == name).map(|(f, _)| f)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.scenes.iter().map(|(f, _)| f.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

impl FixtureSource for FixtureRegistry {
    fn fixture_image(&self, name: &str) -> Option<CanvasImage> {
        self.scenes
            .iter()
            .find(|(f, _)| f.name == name)
            .map(|(_, img)| img.clone())
    }
}

fn paint_rect(buf: &mut [u8], dims: (u32, u32), region: &BoundingBox, color: Rgb) {
    let px = denormalize_box(region, dims).expect("dims are nonzero");
    let rgba = color.rgba();
    for y in px.y0..px.y1 {
        for x in px.x0..px.x1 {
            let i = (y as usize * dims.0 as usize + x as usize) * 4;
            buf[i..i + 4].copy_from_slice(&rgba);
        }
    }
}

fn region_mask(region: &BoundingBox, dims: (u32, u32)) -> RleMask {
    let px = denormalize_box(region, dims).expect("dims are nonzero");
    let mut bm = Bitmap::new(dims.0, dims.1);
    for y in px.y0..px.y1 {
        for x in px.x0..px.x1 {
            bm.set(x, y, true);
        }
    }
    encode_rle(&bm)
}

/// 4-connected component of pixels with exactly the seed's RGBA value.
pub fn flood_fill(image: &CanvasImage, seed: (u32, u32)) -> RleMask {
    let (w, h) = image.dims();
    let target = image.pixel(seed.0, seed.1);
    let mut bm = Bitmap::new(w, h);
    let mut queue = VecDeque::from([seed]);
    bm.set(seed.0, seed.1, true);
    while let Some((x, y)) = queue.pop_front() {
        let candidates = [
            (x > 0).then(|| (x - 1, y)),
            (x + 1 < w).then(|| (x + 1, y)),
            (y > 0).then(|| (x, y - 1)),
            (y + 1 < h).then(|| (x, y + 1)),
        ];
        for (nx, ny) in candidates.into_iter().flatten() {
            if !bm.get(nx, ny) && image.pixel(nx, ny) == target {
                bm.set(nx, ny, true);
                queue.push_back((nx, ny));
            }
        }
    }
    encode_rle(&bm)
}

/// Foreground centroid, each coordinate rounded half up.
pub fn mask_centroid(mask: &RleMask) -> Option<(u32, u32)> {
    let w = u64::from(mask.width());
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (start, len) in mask.foreground_runs() {
        for i in start..start + len {
            sx += i % w;
            sy += i / w;
        }
        n += len;
    }
    (n > 0).then(|| (((2 * sx + n) / (2 * n)) as u32, ((2 * sy + n) / (2 * n)) as u32))
}

fn color_mask(image: &CanvasImage, color: Rgb) -> RleMask {
    let (w, h) = image.dims();
    let bits = image
        .pixels()
        .chunks_exact(4)
        .map(|p| p[0] == color.0 && p[1] == color.1 && p[2] == color.2)
        .collect();
    encode_rle(&Bitmap::from_bits(w, h, bits).expect("one bit per pixel"))
}

fn topmost_at<'a>(manifest: &'a SceneManifest, dims: (u32, u32), (x, y): (u32, u32)) -> Option<&'a SceneObject> {
    manifest.objects.iter().rev().find(|o| {
        let px = denormalize_box(&o.region, dims).expect("dims are nonzero");
        (px.x0..px.x1).contains(&x) && (px.y0..px.y1).contains(&y)
    })
}

/// Segment by the mock rules.
///
/// * text: the named object's region when the image is a registered scene
///   (case-insensitive, first match); otherwise every pixel painted in the
///   FNV color of the text, which finds objects the mocks drew themselves.
/// * scribble / points: flood fill from the prompt centroid.
/// * boxes: the registered scene object with the highest IoU.
pub fn mock_segment(
    image: &CanvasImage,
    prompt: &SegmentPrompt,
    registry: &FixtureRegistry,
) -> Result<Segmented, BackendError> {
    let dims = image.dims();
    let manifest = registry.manifest_for(image.content_hash());
    let found = |mask: RleMask, label: Option<String>| {
        if mask.is_empty() {
            Err(BackendError::NoObjectFound)
        } else {
            Ok(Segmented { mask, label })
        }
    };
    match prompt {
        SegmentPrompt::Text(text) => {
            if let Some(obj) = manifest.and_then(|m| m.find(text.as_str())) {
                return found(region_mask(&obj.region, dims), Some(obj.name.clone()));
            }
            found(
                color_mask(image, Rgb::of_text(text.as_str())),
                Some(text.as_str().to_owned()),
            )
        }
        SegmentPrompt::Scribble(scribble) => {
            if scribble.dims() != dims {
                return Err(BackendError::InvalidRequest(format!(
                    "scribble is {:?} but image is {dims:?}",
                    scribble.dims()
                )));
            }
            let seed = mask_centroid(scribble)
                .ok_or_else(|| BackendError::InvalidRequest("scribble is empty".into()))?;
            let label = manifest.and_then(|m| topmost_at(m, dims, seed)).map(|o| o.name.clone());
            found(flood_fill(image, seed), label)
        }
        SegmentPrompt::Points(points) => {
            if points.is_empty() {
                return Err(BackendError::InvalidRequest("no points".into()));
            }
            let n = points.len() as f64;
            let (mx, my) = points
                .iter()
                .fold((0.0, 0.0), |(ax, ay), p| (ax + p.x / n, ay + p.y / n));
            let to_px = |v: f64, s: u32| ((v * f64::from(s)).floor() as u32).min(s - 1);
            let seed = (to_px(mx, dims.0), to_px(my, dims.1));
            let label = manifest.and_then(|m| topmost_at(m, dims, seed)).map(|o| o.name.clone());
            found(flood_fill(image, seed), label)
        }
        SegmentPrompt::Boxes(boxes) => {
            let manifest = manifest.ok_or(BackendError::NoObjectFound)?;
            let mut best: Option<(&SceneObject, f64)> = None;
            for o in &manifest.objects {
                let score = boxes.iter().map(|b| b.iou(&o.region)).fold(0.0, f64::max);
                if score > 0.0 && best.is_none_or(|(_, s)| score > s) {
                    best = Some((o, score));
                }
            }
            let (obj, _) = best.ok_or(BackendError::NoObjectFound)?;
            found(region_mask(&obj.region, dims), Some(obj.name.clone()))
        }
    }
}

/// Background in the caption's color, then one rectangle per concept in
/// the concept's color, painted in order.
pub fn mock_generate(caption: &str, grounding: Option<&GroundingSpec>, width: u32, height: u32) -> CanvasImage {
    let mut buf = CanvasImage::filled(width, height, Rgb::of_text(caption))
        .expect("requested size is nonzero")
        .to_vec();
    if let Some(g) = grounding {
        for (concept, region) in g.pairs() {
            paint_rect(&mut buf, (width, height), region, Rgb::of_text(concept));
        }
    }
    CanvasImage::new(width, height, buf).expect("generate keeps shape")
}

pub fn mock_inpaint(image: &CanvasImage, request: &InpaintRequest) -> Result<CanvasImage, BackendError> {
    let dims = image.dims();
    let mut buf = image.to_vec();
    match request {
        InpaintRequest::Grounded(g) => {
            for (concept, region) in g.pairs() {
                paint_rect(&mut buf, dims, region, Rgb::of_text(concept));
            }
        }
        InpaintRequest::Masked { mask, prompt } => {
            if mask.dims() != dims {
                return Err(BackendError::InvalidRequest(format!(
                    "mask is {:?} but image is {dims:?}",
                    mask.dims()
                )));
            }
            let rgba = Rgb::of_text(prompt).rgba();
            for (start, len) in mask.foreground_runs() {
                for i in start as usize..(start + len) as usize {
                    buf[i * 4..i * 4 + 4].copy_from_slice(&rgba);
                }
            }
        }
    }
    Ok(CanvasImage::new(dims.0, dims.1, buf).expect("inpaint keeps shape"))
}

/// `MOCK[n=<prior turns>] objects=<k>: <names>` for registered scenes,
/// `MOCK[n=<prior turns>] unknown image` otherwise.
pub fn mock_chat(
    image: Option<&CanvasImage>,
    transcript: &[Turn],
    _message: &str,
    registry: &FixtureRegistry,
) -> String {
    let n = transcript.len();
    match image.and_then(|img| registry.manifest_for(img.content_hash())) {
        Some(m) => {
            let names: Vec<&str> = m.objects.iter().map(|o| o.name.as_str()).collect();
            format!("MOCK[n={n}] objects={}: {}", names.len(), names.join(", "))
        }
        None => format!("MOCK[n={n}] unknown image"),
    }
}

pub fn mock_fill(image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, BackendError> {
    if hole.is_empty() {
        return Err(BackendError::InvalidRequest("hole mask is empty".into()));
    }
    fill_hole_fallback(image, hole).map_err(|e| BackendError::InvalidRequest(e.to_string()))
}

/// In-process mock implementation of every capability.
#[derive(Debug, Clone)]
pub struct MockBackends {
    registry: Arc<FixtureRegistry>,
    fill_enabled: bool,
}

impl MockBackends {
    pub fn new(registry: Arc<FixtureRegistry>) -> Self {
        Self {
            registry,
            fill_enabled: true,
        }
    }

    /// Report the fill capability as unconfigured, forcing the local fallback.
    pub fn without_fill(mut self) -> Self {
        self.fill_enabled = false;
        self
    }

    pub fn registry(&self) -> &Arc<FixtureRegistry> {
        &self.registry
    }
}

impl Backends for MockBackends {
    fn chat(&self, image: Option<&CanvasImage>, transcript: &[Turn], message: &str) -> Result<String, BackendError> {
        if message.trim().is_empty() {
            return Err(BackendError::InvalidRequest("message is blank".into()));
        }
        Ok(mock_chat(image, transcript, message, &self.registry))
    }

    fn segment(&self, image: &CanvasImage, prompt: &SegmentPrompt) -> Result<Segmented, BackendError> {
        mock_segment(image, prompt, &self.registry)
    }

    fn generate(
        &self,
        caption: &str,
        grounding: Option<&GroundingSpec>,
        (w, h): (u32, u32),
    ) -> Result<CanvasImage, BackendError> {
        if caption.trim().is_empty() {
            return Err(BackendError::InvalidRequest("caption is blank".into()));
        }
        if w == 0 || h == 0 {
            return Err(BackendError::InvalidRequest("output size must be nonzero".into()));
        }
        Ok(mock_generate(caption, grounding, w, h))
    }

    fn inpaint(&self, image: &CanvasImage, request: &InpaintRequest) -> Result<CanvasImage, BackendError> {
        mock_inpaint(image, request)
    }

    fn fill(&self, image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, BackendError> {
        if !self.fill_enabled {
            return Err(BackendError::FillUnavailable);
        }
        mock_fill(image, hole)
    }
}
