//! Pixel-level operations: stroke rasterization, run-length mask coding,
//! cut/paste compositing and the deterministic fallback background fill.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domain::{PixelBox, Stroke};
use crate::image::CanvasImage;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RasterError {
    #[error("malformed run-length mask: {0}")]
    MalformedRle(String),
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("hole covers every pixel; nothing to fill from")]
    HoleCoversEverything,
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
}

/// Dense binary raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width as usize * height as usize {
            return Err(RasterError::MalformedRle(format!(
                "{} bits for a {width}x{height} bitmap",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.bits[i] = v;
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }
}

/// Row-major run-length mask.
///
/// `counts` alternates background and foreground runs and always starts with
/// a background run, which is the only run allowed to be zero.
/// Wire form: `{"w": int, "h": int, "counts": [int, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RleRepr", into = "RleRepr")]
pub struct RleMask {
    width: u32,
    height: u32,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RleRepr {
    w: u32,
    h: u32,
    counts: Vec<u64>,
}

impl TryFrom<RleRepr> for RleMask {
    type Error = RasterError;

    fn try_from(r: RleRepr) -> Result<Self, Self::Error> {
        RleMask::from_counts(r.w, r.h, r.counts)
    }
}

impl From<RleMask> for RleRepr {
    fn from(m: RleMask) -> Self {
        RleRepr {
            w: m.width,
            h: m.height,
            counts: m.counts,
        }
    }
}

impl RleMask {
    pub fn from_counts(width: u32, height: u32, counts: Vec<u64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::MalformedRle(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if counts.is_empty() {
            return Err(RasterError::MalformedRle("counts must not be empty".into()));
        }
        if let Some(i) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(RasterError::MalformedRle(format!(
                "zero-length run at index {}",
                i + 1
            )));
        }
        let total: u64 = counts.iter().sum();
        let expected = u64::from(width) * u64::from(height);
        if total != expected {
            return Err(RasterError::MalformedRle(format!(
                "runs sum to {total}, expected {expected}"
            )));
        }
        Ok(Self {
            width,
            height,
            counts,
        })
    }

    /// A mask with no foreground.
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            counts: vec![u64::from(width) * u64::from(height)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Foreground runs as `(start_index, len)` pairs in row-major order.
    pub fn foreground_runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, &c)| {
            let start = pos;
            pos += c;
            (i % 2 == 1).then_some((start, c))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn area(&self) -> u64 {
        mask_area(self)
    }

    pub fn decode(&self) -> Bitmap {
        decode_rle(self)
    }

    fn check_dims(&self, dims: (u32, u32)) -> Result<(), RasterError> {
        if self.dims() != dims {
            return Err(RasterError::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}

pub fn encode_rle(bitmap: &Bitmap) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for &b in &bitmap.bits {
        if b == current {
            run += 1;
        } else {
            counts.push(run);
            current = b;
            run = 1;
        }
    }
    counts.push(run);
    RleMask {
        width: bitmap.width,
        height: bitmap.height,
        counts,
    }
}

pub fn decode_rle(mask: &RleMask) -> Bitmap {
    let mut bits = Vec::with_capacity(mask.width as usize * mask.height as usize);
    for (i, &c) in mask.counts.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
    }
    Bitmap {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

pub fn mask_area(mask: &RleMask) -> u64 {
    mask.counts.iter().skip(1).step_by(2).sum()
}

/// Intersection over union. Two empty masks have IoU 0.
pub fn mask_iou(a: &RleMask, b: &RleMask) -> Result<f64, RasterError> {
    a.check_dims(b.dims())?;
    let (da, db) = (a.decode(), b.decode());
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in da.bits.iter().zip(&db.bits) {
        inter += u64::from(x && y);
        union += u64::from(x || y);
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Tight half-open pixel box around the foreground.
pub fn mask_bbox(mask: &RleMask) -> Result<PixelBox, RasterError> {
    let w = u64::from(mask.width);
    let (mut x0, mut y0, mut x1, mut y1) = (u64::MAX, u64::MAX, 0u64, 0u64);
    let mut any = false;
    for (start, len) in mask.foreground_runs() {
        any = true;
        let end = start + len - 1;
        let (sy, ey) = (start / w, end / w);
        y0 = y0.min(sy);
        y1 = y1.max(ey + 1);
        if sy == ey {
            x0 = x0.min(start % w);
            x1 = x1.max(end % w + 1);
        } else {
            // run wraps a row boundary, so it touches both edges
            x0 = 0;
            x1 = w;
        }
    }
    if !any {
        return Err(RasterError::EmptyMask);
    }
    Ok(PixelBox {
        x0: x0 as u32,
        y0: y0 as u32,
        x1: x1 as u32,
        y1: y1 as u32,
    })
}

/// Pixel-wise OR of equally sized masks.
pub fn mask_union<'a>(
    masks: impl IntoIterator<Item = &'a RleMask>,
) -> Result<Option<RleMask>, RasterError> {
    let mut acc: Option<Bitmap> = None;
    for m in masks {
        let bits = m.decode();
        match acc.as_mut() {
            None => acc = Some(bits),
            Some(a) => {
                m.check_dims(a.dims())?;
                for (x, y) in a.bits.iter_mut().zip(bits.bits) {
                    *x |= y;
                }
            }
        }
    }
    Ok(acc.as_ref().map(encode_rle))
}

/// Brush radius in pixels for a stroke drawn on a `width x height` raster.
///
/// The normalized radius scales with the longer side. It never drops below
/// half a pixel diagonal, so every stroke covers at least one pixel center.
pub fn brush_radius_px(stroke: &Stroke, (width, height): (u32, u32)) -> f64 {
    (stroke.brush_radius() * f64::from(width.max(height))).max(std::f64::consts::FRAC_1_SQRT_2)
}

/// Squared distance from `p` to the segment `a..b`.
pub(crate) fn dist2_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    cx * cx + cy * cy
}

/// Foreground = every pixel whose center lies within the brush radius of
/// the stroke polyline.
pub fn rasterize_stroke(stroke: &Stroke, dims: (u32, u32)) -> RleMask {
    let (w, h) = dims;
    let r = brush_radius_px(stroke, dims);
    let r2 = r * r;
    let pts: Vec<(f64, f64)> = stroke
        .points()
        .iter()
        .map(|p| (p.x * f64::from(w), p.y * f64::from(h)))
        .collect();
    let segments: Vec<_> = if pts.len() == 1 {
        vec![(pts[0], pts[0])]
    } else {
        pts.windows(2).map(|s| (s[0], s[1])).collect()
    };

    let mut bm = Bitmap::new(w, h);
    let clamp_x = |v: f64| v.clamp(0.0, f64::from(w)) as u32;
    let clamp_y = |v: f64| v.clamp(0.0, f64::from(h)) as u32;
    for (a, b) in segments {
        let xs = clamp_x((a.0.min(b.0) - r - 0.5).floor());
        let xe = clamp_x((a.0.max(b.0) + r + 0.5).ceil());
        let ys = clamp_y((a.1.min(b.1) - r - 0.5).floor());
        let ye = clamp_y((a.1.max(b.1) + r + 0.5).ceil());
        for y in ys..ye {
            for x in xs..xe {
                let c = (f64::from(x) + 0.5, f64::from(y) + 0.5);
                if dist2_to_segment(c, a, b) <= r2 {
                    bm.set(x, y, true);
                }
            }
        }
    }
    encode_rle(&bm)
}

/// An object lifted out of a canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub bbox_px: PixelBox,
    /// RGBA8 pixels of the whole bounding box.
    pub pixels: Vec<u8>,
    /// Object membership within the bounding box.
    pub mask: RleMask,
}

/// Lift the masked pixels out of `image`, leaving transparent black behind.
pub fn cut_region(image: &CanvasImage, mask: &RleMask) -> Result<(Patch, CanvasImage), RasterError> {
    mask.check_dims(image.dims())?;
    let bbox = mask_bbox(mask)?;
    let bits = mask.decode();
    let src = image.pixels();
    let w = image.width() as usize;

    let mut pixels = Vec::with_capacity(bbox.width() as usize * bbox.height() as usize * 4);
    let mut local = Bitmap::new(bbox.width(), bbox.height());
    for y in bbox.y0..bbox.y1 {
        let row = y as usize * w;
        pixels.extend_from_slice(&src[(row + bbox.x0 as usize) * 4..(row + bbox.x1 as usize) * 4]);
        for x in bbox.x0..bbox.x1 {
            if bits.get(x, y) {
                local.set(x - bbox.x0, y - bbox.y0, true);
            }
        }
    }

    let mut holed = image.to_vec();
    for (i, &b) in bits.bits.iter().enumerate() {
        if b {
            holed[i * 4..i * 4 + 4].copy_from_slice(&[0, 0, 0, 0]);
        }
    }
    let holed = CanvasImage::new(image.width(), image.height(), holed)
        .expect("holed image keeps the source shape");
    Ok((
        Patch {
            bbox_px: bbox,
            pixels,
            mask: encode_rle(&local),
        },
        holed,
    ))
}

/// Composite the patch's object pixels at its original position shifted by
/// `offset_px`. Pixels that land off the canvas are dropped.
pub fn paste_patch(image: &CanvasImage, patch: &Patch, offset_px: (i64, i64)) -> CanvasImage {
    let (w, h) = (i64::from(image.width()), i64::from(image.height()));
    let pw = patch.bbox_px.width();
    let local = patch.mask.decode();
    let mut out = image.to_vec();
    for py in 0..patch.bbox_px.height() {
        let dy = i64::from(patch.bbox_px.y0) + i64::from(py) + offset_px.1;
        if !(0..h).contains(&dy) {
            continue;
        }
        for px in 0..pw {
            if !local.get(px, py) {
                continue;
            }
            let dx = i64::from(patch.bbox_px.x0) + i64::from(px) + offset_px.0;
            if !(0..w).contains(&dx) {
                continue;
            }
            let s = (py as usize * pw as usize + px as usize) * 4;
            let d = (dy as usize * w as usize + dx as usize) * 4;
            out[d..d + 4].copy_from_slice(&patch.pixels[s..s + 4]);
        }
    }
    CanvasImage::new(image.width(), image.height(), out).expect("paste keeps the canvas shape")
}

/// Mean of `n` values rounded half up.
pub(crate) fn rounded_mean(sum: u32, n: u32) -> u8 {
    ((2 * sum + n) / (2 * n)) as u8
}

/// Deterministic stand-in for a learned background filler.
///
/// Hole pixels are resolved in breadth-first layers growing inward from the
/// hole boundary, row-major within a layer. Each takes the rounded-half-up
/// mean RGB of its 4-neighbours that are already resolved at that moment
/// (including earlier pixels of the same layer) and becomes opaque.
pub fn fill_hole_fallback(image: &CanvasImage, hole: &RleMask) -> Result<CanvasImage, RasterError> {
    hole.check_dims(image.dims())?;
    let holes = hole.decode();
    let (w, h) = (image.width() as usize, image.height() as usize);
    if holes.bits.iter().all(|&b| b) {
        return Err(RasterError::HoleCoversEverything);
    }
    let mut resolved: Vec<bool> = holes.bits.iter().map(|&b| !b).collect();
    let mut queued = resolved.clone();
    let mut out = image.to_vec();

    let neighbours = |i: usize| {
        let (x, y) = (i % w, i / w);
        [
            (y > 0).then(|| i - w),
            (x > 0).then(|| i - 1),
            (x + 1 < w).then(|| i + 1),
            (y + 1 < h).then(|| i + w),
        ]
        .into_iter()
        .flatten()
    };

    let mut layer: Vec<usize> = (0..w * h)
        .filter(|&i| holes.bits[i] && neighbours(i).any(|n| resolved[n]))
        .collect();
    for &i in &layer {
        queued[i] = true;
    }

    while !layer.is_empty() {
        let mut next = VecDeque::new();
        for &i in &layer {
            let (mut sum, mut n) = ([0u32; 3], 0u32);
            for nb in neighbours(i) {
                if resolved[nb] {
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += u32::from(out[nb * 4 + c]);
                    }
                    n += 1;
                }
            }
            debug_assert!(n > 0);
            for (c, s) in sum.iter().enumerate() {
                out[i * 4 + c] = rounded_mean(*s, n);
            }
            out[i * 4 + 3] = 255;
            resolved[i] = true;
            for nb in neighbours(i) {
                if !queued[nb] {
                    queued[nb] = true;
                    next.push_back(nb);
                }
            }
        }
        let mut next: Vec<usize> = next.into();
        next.sort_unstable();
        layer = next;
    }
    Ok(CanvasImage::new(image.width(), image.height(), out).expect("fill keeps the canvas shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Point;
    use crate::image::Rgb;
    use proptest::prelude::*;

    fn bitmap_strategy() -> impl Strategy<Value = Bitmap> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize)
                .prop_map(move |bits| Bitmap::from_bits(w, h, bits).unwrap())
        })
    }

    #[test]
    fn rle_edge_cases() {
        assert_eq!(encode_rle(&Bitmap::new(2, 2)).counts(), &[4]);
        let full = Bitmap::from_bits(2, 2, vec![true; 4]).unwrap();
        assert_eq!(encode_rle(&full).counts(), &[0, 4]);
        assert_eq!(mask_area(&encode_rle(&full)), 4);
    }

    #[test]
    fn malformed_rle_rejected() {
        assert!(RleMask::from_counts(2, 2, vec![1, 2]).is_err());
        assert!(RleMask::from_counts(2, 2, vec![2, 0, 2]).is_err());
        assert!(RleMask::from_counts(2, 2, vec![]).is_err());
        assert!(RleMask::from_counts(0, 2, vec![0]).is_err());
        assert!(RleMask::from_counts(2, 2, vec![0, 4]).is_ok());
        let err = serde_json::from_str::<RleMask>(r#"{"w":2,"h":2,"counts":[3]}"#).unwrap_err();
        assert!(err.to_string().contains("malformed"));
    }

    #[test]
    fn rle_wire_form() {
        let m = RleMask::from_counts(3, 1, vec![1, 1, 1]).unwrap();
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"w":3,"h":1,"counts":[1,1,1]}"#
        );
    }

    #[test]
    fn area_iou_bbox() {
        let full = encode_rle(&Bitmap::from_bits(4, 4, vec![true; 16]).unwrap());
        assert_eq!(mask_area(&full), 16);
        assert_eq!(mask_iou(&full, &full).unwrap(), 1.0);
        let mut a = Bitmap::new(4, 4);
        a.set(0, 0, true);
        let mut b = Bitmap::new(4, 4);
        b.set(3, 3, true);
        assert_eq!(mask_iou(&encode_rle(&a), &encode_rle(&b)).unwrap(), 0.0);
        assert_eq!(mask_bbox(&RleMask::empty(4, 4)), Err(RasterError::EmptyMask));
        let mut c = Bitmap::new(5, 4);
        c.set(4, 1, true);
        c.set(0, 2, true);
        assert_eq!(
            mask_bbox(&encode_rle(&c)).unwrap(),
            PixelBox { x0: 0, y0: 1, x1: 5, y1: 3 }
        );
        assert!(mask_iou(&full, &RleMask::empty(2, 2)).is_err());
    }

    #[test]
    fn single_point_covers_only_center() {
        let s = Stroke::new(vec![Point::new(0.5, 0.5).unwrap()], 0.01).unwrap();
        let m = rasterize_stroke(&s, (9, 9)).decode();
        assert_eq!(m.count(), 1);
        assert!(m.get(4, 4));
    }

    #[test]
    fn horizontal_stroke_is_band() {
        let s = Stroke::new(
            vec![Point::new(0.0, 0.5).unwrap(), Point::new(1.0, 0.5).unwrap()],
            0.1,
        )
        .unwrap();
        let m = rasterize_stroke(&s, (20, 20)).decode();
        // radius 2 px around y = 10.0: pixel centers 8.5..=11.5 lie within 2
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(m.get(x, y), (8..=11).contains(&y), "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn cut_full_and_single_pixel() {
        let img = CanvasImage::filled(3, 2, Rgb(9, 8, 7)).unwrap();
        let full = encode_rle(&Bitmap::from_bits(3, 2, vec![true; 6]).unwrap());
        let (patch, holed) = cut_region(&img, &full).unwrap();
        assert_eq!(patch.pixels, img.pixels());
        assert!(holed.pixels().chunks(4).all(|p| p[3] == 0));

        let mut one = Bitmap::new(3, 2);
        one.set(2, 1, true);
        let (patch, holed) = cut_region(&img, &encode_rle(&one)).unwrap();
        assert_eq!(patch.bbox_px, PixelBox { x0: 2, y0: 1, x1: 3, y1: 2 });
        assert_eq!(holed.pixels().chunks(4).filter(|p| p[3] == 0).count(), 1);
        assert_eq!(
            cut_region(&img, &RleMask::empty(3, 2)).unwrap_err(),
            RasterError::EmptyMask
        );
    }

    #[test]
    fn paste_off_canvas_is_clipped() {
        let img = CanvasImage::filled(4, 4, Rgb(1, 2, 3)).unwrap();
        let mut b = Bitmap::new(4, 4);
        b.set(1, 1, true);
        let (patch, holed) = cut_region(&img, &encode_rle(&b)).unwrap();
        assert_eq!(paste_patch(&holed, &patch, (10, 0)), holed);
        assert_eq!(paste_patch(&holed, &patch, (0, -2)), holed);
        assert_eq!(paste_patch(&holed, &patch, (0, 0)), img);
    }

    #[test]
    fn fill_constant_image_is_exact() {
        let img = CanvasImage::filled(6, 5, Rgb(40, 50, 60)).unwrap();
        let mut b = Bitmap::new(6, 5);
        for (x, y) in [(1, 1), (2, 1), (2, 2), (5, 4), (0, 0)] {
            b.set(x, y, true);
        }
        let (_, holed) = cut_region(&img, &encode_rle(&b)).unwrap();
        assert_eq!(fill_hole_fallback(&holed, &encode_rle(&b)).unwrap(), img);
    }

    #[test]
    fn fill_single_pixel_takes_rounded_mean() {
        // neighbours 10, 11, 20, 30 -> mean 17.75 -> 18; 1,2,3,4 -> 2.5 -> 3
        let mut px = vec![0u8; 9 * 4];
        let put = |px: &mut Vec<u8>, i: usize, v: [u8; 4]| px[i * 4..i * 4 + 4].copy_from_slice(&v);
        put(&mut px, 1, [10, 1, 0, 255]);
        put(&mut px, 3, [11, 2, 0, 255]);
        put(&mut px, 5, [20, 3, 0, 255]);
        put(&mut px, 7, [30, 4, 0, 255]);
        let img = CanvasImage::new(3, 3, px).unwrap();
        let mut b = Bitmap::new(3, 3);
        b.set(1, 1, true);
        let out = fill_hole_fallback(&img, &encode_rle(&b)).unwrap();
        assert_eq!(out.pixel(1, 1), [18, 3, 0, 255]);
        assert_eq!(out.pixel(0, 0), img.pixel(0, 0));
    }

    #[test]
    fn fill_rejects_total_hole() {
        let img = CanvasImage::filled(2, 2, Rgb(0, 0, 0)).unwrap();
        let full = encode_rle(&Bitmap::from_bits(2, 2, vec![true; 4]).unwrap());
        assert_eq!(
            fill_hole_fallback(&img, &full).unwrap_err(),
            RasterError::HoleCoversEverything
        );
    }

    #[test]
    fn fill_with_empty_hole_is_identity() {
        let img = CanvasImage::filled(2, 2, Rgb(3, 3, 3)).unwrap();
        assert_eq!(fill_hole_fallback(&img, &RleMask::empty(2, 2)).unwrap(), img);
    }

    proptest! {
        #[test]
        fn rle_roundtrip(bm in bitmap_strategy()) {
            let enc = encode_rle(&bm);
            prop_assert!(RleMask::from_counts(enc.width(), enc.height(), enc.counts().to_vec()).is_ok());
            prop_assert_eq!(decode_rle(&enc), bm);
        }

        #[test]
        fn resampling_stroke_keeps_pixels(
            pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..5),
            r in 0.01f64..0.08,
        ) {
            let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y).unwrap()).collect();
            let mut fine = Vec::new();
            for pair in points.windows(2) {
                fine.push(pair[0]);
                let mid = Point::new((pair[0].x + pair[1].x) / 2.0, (pair[0].y + pair[1].y) / 2.0).unwrap();
                fine.push(mid);
            }
            fine.push(*points.last().unwrap());
            let a = rasterize_stroke(&Stroke::new(points, r).unwrap(), (31, 23));
            let b = rasterize_stroke(&Stroke::new(fine, r).unwrap(), (31, 23));
            prop_assert_eq!(a, b);
        }
    }
}
