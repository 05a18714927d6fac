use std::fmt;
use std::io::Cursor;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::hash::{ContentHash, Fnv1a64};

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("invalid base64 image payload: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error("png decode failed: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode failed: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("unsupported png layout {0:?}")]
    UnsupportedPng(png::ColorType),
}

/// An 8-bit RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    /// Color from the low 24 bits of a 64-bit value: red is bits 16..24,
    /// green 8..16, blue 0..8.
    pub fn from_low24(v: u64) -> Self {
        Rgb((v >> 16) as u8, (v >> 8) as u8, v as u8)
    }

    /// Deterministic color derived from a string with FNV-1a-64.
    pub fn of_text(text: &str) -> Self {
        Self::from_low24(crate::hash::fnv1a64(text.as_bytes()))
    }

    pub fn rgba(self) -> [u8; 4] {
        [self.0, self.1, self.2, 255]
    }
}

/// An immutable RGBA8 raster with a cached content digest.
///
/// The digest covers the dimensions and the pixel buffer, so two canvases
/// compare equal exactly when their hashes match (collisions aside).
#[derive(Clone)]
pub struct CanvasImage {
    width: u32,
    height: u32,
    pixels: Arc<[u8]>,
    hash: ContentHash,
}

impl CanvasImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        let hash = Self::digest(width, height, &pixels);
        Ok(Self {
            width,
            height,
            pixels: pixels.into(),
            hash,
        })
    }

    /// A canvas of one opaque color.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self, ImageError> {
        let px = color.rgba();
        let n = width as usize * height as usize;
        let mut buf = Vec::with_capacity(n * 4);
        for _ in 0..n {
            buf.extend_from_slice(&px);
        }
        Self::new(width, height, buf)
    }

    fn digest(width: u32, height: u32, pixels: &[u8]) -> ContentHash {
        ContentHash(
            Fnv1a64::new()
                .update(&width.to_le_bytes())
                .update(&height.to_le_bytes())
                .update(pixels)
                .finish(),
        )
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn content_hash(&self) -> ContentHash {
        self.hash
    }

    /// Recompute the digest from the buffer; always equals `content_hash`.
    pub fn recompute_hash(&self) -> ContentHash {
        Self::digest(self.width, self.height, &self.pixels)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [
            self.pixels[i],
            self.pixels[i + 1],
            self.pixels[i + 2],
            self.pixels[i + 3],
        ]
    }

    /// Copy of the pixel buffer for editing.
    pub fn to_vec(&self) -> Vec<u8> {
        self.pixels.to_vec()
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header()?;
            writer.write_image_data(&self.pixels)?;
        }
        Ok(out)
    }

    /// Decode any 8- or 16-bit PNG into RGBA8. Images without alpha become opaque.
    pub fn decode_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info()?;
        let size = reader
            .output_buffer_size()
            .ok_or(ImageError::UnsupportedPng(png::ColorType::Rgba))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf)?;
        buf.truncate(info.buffer_size());
        let rgba = match info.color_type {
            png::ColorType::Rgba => buf,
            png::ColorType::Rgb => buf
                .chunks_exact(3)
                .flat_map(|c| [c[0], c[1], c[2], 255])
                .collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g, 255]).collect(),
            png::ColorType::GrayscaleAlpha => buf
                .chunks_exact(2)
                .flat_map(|c| [c[0], c[0], c[0], c[1]])
                .collect(),
            other => return Err(ImageError::UnsupportedPng(other)),
        };
        Self::new(info.width, info.height, rgba)
    }

    pub fn to_base64_png(&self) -> Result<String, ImageError> {
        Ok(BASE64.encode(self.encode_png()?))
    }

    pub fn from_base64_png(data: &str) -> Result<Self, ImageError> {
        let bytes = BASE64.decode(data.trim())?;
        Self::decode_png(&bytes)
    }

    /// Nearest-neighbour downscale so that neither side exceeds `max_side`,
    /// keeping the aspect ratio. Returns `self` unchanged when already small enough.
    pub fn downscale_to_fit(&self, max_side: u32) -> Self {
        let longest = self.width.max(self.height);
        if longest <= max_side || max_side == 0 {
            return self.clone();
        }
        let scale = |v: u32| -> u32 {
            // round half up, never below one pixel
            (((v as u64) * (max_side as u64) * 2 + longest as u64) / (2 * longest as u64)).max(1)
                as u32
        };
        let (nw, nh) = (scale(self.width), scale(self.height));
        let mut buf = Vec::with_capacity(nw as usize * nh as usize * 4);
        for y in 0..nh {
            // sample the source pixel containing the destination pixel center
            let sy = ((2 * y as u64 + 1) * self.height as u64 / (2 * nh as u64)) as u32;
            for x in 0..nw {
                let sx = ((2 * x as u64 + 1) * self.width as u64 / (2 * nw as u64)) as u32;
                buf.extend_from_slice(&self.pixel(sx, sy));
            }
        }
        Self::new(nw, nh, buf).expect("downscale preserves buffer shape")
    }
}

impl PartialEq for CanvasImage {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.pixels == other.pixels
    }
}

impl Eq for CanvasImage {}

impl fmt::Debug for CanvasImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanvasImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("hash", &self.hash)
            .finish()
    }
}
