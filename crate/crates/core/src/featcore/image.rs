use std::fs;
use std::path::Path;

use crate::error::{Result, ScpError};

/// Smallest accepted image side, in pixels.
pub const MIN_IMAGE_SIDE: usize = 16;

/// A full-resolution pixel coordinate. `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Checks that an identifier can travel through the text formats unchanged.
pub fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() {
        return Err(ScpError::Argument("empty identifier".into()));
    }
    if id.len() > u16::MAX as usize {
        return Err(ScpError::Argument(format!(
            "identifier too long ({} bytes)",
            id.len()
        )));
    }
    if id.chars().any(|c| c.is_whitespace() || c == ',') {
        return Err(ScpError::Argument(format!(
            "identifier {id:?} contains whitespace or a comma"
        )));
    }
    Ok(())
}

/// Grayscale image with intensities in `[0, 1]` and isotropic pixel spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    id: String,
    width: usize,
    height: usize,
    spacing_mm: f64,
    pixels: Vec<f32>,
}

impl Image {
    /// Builds an image from row-major intensities.
    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        spacing_mm: f64,
        pixels: Vec<f32>,
    ) -> Result<Self> {
        let id = id.into();
        validate_id(&id)?;
        if width < MIN_IMAGE_SIDE || height < MIN_IMAGE_SIDE {
            return Err(ScpError::Image(format!(
                "{width}x{height} is smaller than the {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} minimum"
            )));
        }
        if !(spacing_mm.is_finite() && spacing_mm > 0.0) {
            return Err(ScpError::Image(format!(
                "spacing {spacing_mm} must be positive"
            )));
        }
        if pixels.len() != width * height {
            return Err(ScpError::Image(format!(
                "expected {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ScpError::Image(format!("intensity {bad} outside [0, 1]")));
        }
        Ok(Self {
            id,
            width,
            height,
            spacing_mm,
            pixels,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x < self.width && p.y < self.height
    }
}

/// Decodes a binary PGM (P5) file with 8- or 16-bit samples.
pub fn decode_pgm(bytes: &[u8], id: &str, spacing_mm: f64) -> Result<Image> {
    let mut pos = 0usize;
    let mut fields = [0usize; 3];
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(ScpError::Image(
            "not a binary PGM (missing P5 magic)".into(),
        ));
    }
    pos += 2;
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(ScpError::Image("truncated PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ScpError::Image("malformed PGM header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ScpError::Image("malformed PGM header number".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ScpError::Image("malformed PGM header terminator".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(ScpError::Image(format!("unsupported PGM maxval {maxval}")));
    }
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .ok_or_else(|| ScpError::Image("PGM dimensions overflow".into()))?;
    let data = &bytes[pos..];
    if data.len() < count * bytes_per_sample {
        return Err(ScpError::Image(format!(
            "truncated PGM raster: need {} bytes, have {}",
            count * bytes_per_sample,
            data.len()
        )));
    }
    let scale = maxval as f32;
    let pixels = (0..count)
        .map(|i| {
            let raw = if bytes_per_sample == 1 {
                data[i] as u32
            } else {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as u32
            };
            (raw.min(maxval as u32) as f32 / scale).min(1.0)
        })
        .collect();
    Image::new(id, width, height, spacing_mm, pixels)
}

pub fn read_pgm(path: &Path, id: &str, spacing_mm: f64) -> Result<Image> {
    let bytes = fs::read(path)?;
    decode_pgm(&bytes, id, spacing_mm)
}

/// Encodes as a 16-bit P5 file.
pub fn encode_pgm16(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 2);
    for &v in &img.pixels {
        let q = (v as f64 * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn write_pgm16(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm16(img))?;
    Ok(())
}
