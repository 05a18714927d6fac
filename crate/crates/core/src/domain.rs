//! Visual-prompt value types and the coordinate conventions shared by the
//! rest of the crate.
//!
//! All geometry is in normalized `[0, 1]` coordinates with the origin at the
//! top-left corner, `x` growing rightward and `y` downward. Pixel coordinates
//! only appear at raster boundaries ([`PixelBox`]).

use serde::{Deserialize, Serialize};

use crate::raster::RleMask;

/// Smallest side length of a box derived from a stroke.
pub const MIN_BOX_SIDE: f64 = 0.01;

/// Brush radius used when a stroke does not specify one.
pub const DEFAULT_BRUSH_RADIUS: f64 = 0.004;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("grounding instruction contains no concepts")]
    EmptyInstruction,
    #[error("{concepts} concept(s) but {boxes} box(es); every concept needs exactly one box")]
    ConceptBoxMismatch { concepts: usize, boxes: usize },
    #[error("grounding must name at least one concept")]
    EmptyGrounding,
    #[error("concept at position {0} is blank")]
    BlankConcept(usize),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
    #[error("text must not be blank")]
    BlankText,
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Round half up to the nearest integer.
pub(crate) fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, DomainError> {
        if !in_unit(x) || !in_unit(y) {
            return Err(DomainError::InvalidGeometry(format!(
                "point ({x}, {y}) outside the unit square"
            )));
        }
        Ok(Self { x, y })
    }
}

impl TryFrom<[f64; 2]> for Point {
    type Error = DomainError;

    fn try_from([x, y]: [f64; 2]) -> Result<Self, Self::Error> {
        Point::new(x, y)
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrokeRepr", into = "StrokeRepr")]
pub struct Stroke {
    points: Vec<Point>,
    brush_radius: f64,
}

#[derive(Serialize, Deserialize)]
struct StrokeRepr {
    points: Vec<Point>,
    #[serde(default = "default_brush_radius")]
    brush_radius: f64,
}

fn default_brush_radius() -> f64 {
    DEFAULT_BRUSH_RADIUS
}

impl TryFrom<StrokeRepr> for Stroke {
    type Error = DomainError;

    fn try_from(r: StrokeRepr) -> Result<Self, Self::Error> {
        Stroke::new(r.points, r.brush_radius)
    }
}

impl From<Stroke> for StrokeRepr {
    fn from(s: Stroke) -> Self {
        StrokeRepr {
            points: s.points,
            brush_radius: s.brush_radius,
        }
    }
}

impl Stroke {
    pub fn new(points: Vec<Point>, brush_radius: f64) -> Result<Self, DomainError> {
        if points.is_empty() {
            return Err(DomainError::InvalidStroke("a stroke needs at least one point".into()));
        }
        if !(brush_radius > 0.0 && brush_radius.is_finite()) {
            return Err(DomainError::InvalidStroke(format!(
                "brush radius must be positive, got {brush_radius}"
            )));
        }
        Ok(Self {
            points,
            brush_radius,
        })
    }

    pub fn with_default_radius(points: Vec<Point>) -> Result<Self, DomainError> {
        Self::new(points, DEFAULT_BRUSH_RADIUS)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn brush_radius(&self) -> f64 {
        self.brush_radius
    }
}

/// Axis-aligned box in normalized coordinates with `x0 < x1` and `y0 < y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, DomainError> {
        if ![x0, y0, x1, y1].into_iter().all(in_unit) || x0 >= x1 || y0 >= y1 {
            return Err(DomainError::InvalidGeometry(format!(
                "box [{x0}, {y0}, {x1}, {y1}] must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let ix = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let iy = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = DomainError;

    fn try_from([x0, y0, x1, y1]: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(x0, y0, x1, y1)
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.as_array()
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelBox {
    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn is_empty(&self) -> bool {
        self.width() == 0 || self.height() == 0
    }
}

/// Map a pixel box onto normalized coordinates.
pub fn normalize_box(px: PixelBox, (width, height): (u32, u32)) -> Result<BoundingBox, DomainError> {
    if width == 0 || height == 0 {
        return Err(DomainError::InvalidGeometry("image dimensions must be >= 1x1".into()));
    }
    if px.x0 >= px.x1 || px.y0 >= px.y1 || px.x1 > width || px.y1 > height {
        return Err(DomainError::InvalidGeometry(format!(
            "pixel box {px:?} is empty or outside a {width}x{height} image"
        )));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    BoundingBox::new(
        f64::from(px.x0) / w,
        f64::from(px.y0) / h,
        f64::from(px.x1) / w,
        f64::from(px.y1) / h,
    )
}

/// Map a normalized box to pixels, rounding each edge half up.
///
/// Small boxes may collapse to an empty pixel box.
pub fn denormalize_box(b: &BoundingBox, (width, height): (u32, u32)) -> Result<PixelBox, DomainError> {
    if width == 0 || height == 0 {
        return Err(DomainError::InvalidGeometry("image dimensions must be >= 1x1".into()));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    let conv = |v: f64, s: f64| round_half_up(v * s).clamp(0, s as i64) as u32;
    Ok(PixelBox {
        x0: conv(b.x0, w),
        y0: conv(b.y0, h),
        x1: conv(b.x1, w),
        y1: conv(b.y1, h),
    })
}

/// Smallest box holding every stroke point dilated by the brush radius.
///
/// The box is clamped to the unit square. Any side shorter than
/// [`MIN_BOX_SIDE`] is widened symmetrically about its center and then
/// shifted back inside the unit square if the widening crossed an edge.
pub fn stroke_min_bbox(stroke: &Stroke) -> BoundingBox {
    let r = stroke.brush_radius;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &stroke.points {
        x0 = x0.min(p.x - r);
        y0 = y0.min(p.y - r);
        x1 = x1.max(p.x + r);
        y1 = y1.max(p.y + r);
    }
    let (x0, x1) = widen(x0.max(0.0), x1.min(1.0));
    let (y0, y1) = widen(y0.max(0.0), y1.min(1.0));
    BoundingBox::new(x0, y0, x1, y1).expect("widened box is valid")
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo >= MIN_BOX_SIDE {
        return (lo, hi);
    }
    let c = (lo + hi) / 2.0;
    let (mut lo, mut hi) = (c - MIN_BOX_SIDE / 2.0, c + MIN_BOX_SIDE / 2.0);
    if lo < 0.0 {
        hi -= lo;
        lo = 0.0;
    }
    if hi > 1.0 {
        lo -= hi - 1.0;
        hi = 1.0;
    }
    (lo.max(0.0), hi)
}

/// Natural-language phrase naming an object to segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ReferringText(String);

impl ReferringText {
    /// Trims surrounding whitespace; blank input is rejected.
    pub fn new(text: &str) -> Result<Self, DomainError> {
        let t = text.trim();
        if t.is_empty() {
            return Err(DomainError::BlankText);
        }
        Ok(Self(t.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ReferringText {
    type Error = DomainError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        ReferringText::new(&s)
    }
}

impl From<ReferringText> for String {
    fn from(t: ReferringText) -> Self {
        t.0
    }
}

/// Split a grounding instruction on `;`, trimming each concept and dropping
/// blanks. Commas inside a concept are kept verbatim.
pub fn parse_grounding_instruction(text: &str) -> Result<Vec<String>, DomainError> {
    let concepts: Vec<String> = text
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect();
    if concepts.is_empty() {
        return Err(DomainError::EmptyInstruction);
    }
    Ok(concepts)
}

/// Inverse of [`parse_grounding_instruction`] for display in a text field.
pub fn join_grounding_instruction(concepts: &[String]) -> String {
    concepts.join("; ")
}

/// Ordered concept/box pairs that drive grounded generation and inpainting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroundingRepr", into = "GroundingRepr")]
pub struct GroundingSpec {
    concepts: Vec<String>,
    boxes: Vec<BoundingBox>,
    caption: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GroundingRepr {
    concepts: Vec<String>,
    boxes: Vec<BoundingBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption: Option<String>,
}

impl TryFrom<GroundingRepr> for GroundingSpec {
    type Error = DomainError;

    fn try_from(r: GroundingRepr) -> Result<Self, Self::Error> {
        let mut spec = bind_concepts_to_boxes(r.concepts, r.boxes)?;
        spec.caption = r.caption;
        Ok(spec)
    }
}

impl From<GroundingSpec> for GroundingRepr {
    fn from(g: GroundingSpec) -> Self {
        GroundingRepr {
            concepts: g.concepts,
            boxes: g.boxes,
            caption: g.caption,
        }
    }
}

/// Pair `concepts[i]` with `boxes[i]`. Counts must match exactly.
pub fn bind_concepts_to_boxes(
    concepts: Vec<String>,
    boxes: Vec<BoundingBox>,
) -> Result<GroundingSpec, DomainError> {
    if concepts.is_empty() && boxes.is_empty() {
        return Err(DomainError::EmptyGrounding);
    }
    if concepts.len() != boxes.len() {
        return Err(DomainError::ConceptBoxMismatch {
            concepts: concepts.len(),
            boxes: boxes.len(),
        });
    }
    let concepts = concepts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let t = c.trim();
            if t.is_empty() {
                Err(DomainError::BlankConcept(i))
            } else {
                Ok(t.to_owned())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GroundingSpec {
        concepts,
        boxes,
        caption: None,
    })
}

impl GroundingSpec {
    pub fn with_caption(mut self, caption: Option<String>) -> Self {
        self.caption = caption;
        self
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &BoundingBox)> {
        self.concepts.iter().map(String::as_str).zip(&self.boxes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    Stroke,
    Text,
    Manual,
}

/// A segmentation result held by a session until it is consumed or cleared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMask {
    pub id: String,
    pub mask: RleMask,
    #[serde(default)]
    pub label: Option<String>,
    pub source: MaskSource,
}

impl SegmentMask {
    pub fn width(&self) -> u32 {
        self.mask.width()
    }

    pub fn height(&self) -> u32 {
        self.mask.height()
    }
}
