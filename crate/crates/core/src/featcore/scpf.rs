//! SCPF binary feature-map files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "SCPF"            4 bytes
//! version           u16 (= 1)
//! image_id          u16 length + UTF-8 bytes
//! extractor_tag     u16 length + UTF-8 bytes
//! height, width     u32, u32
//! spacing_mm        f64
//! layer_count       u8
//! channels          u16
//! per layer:
//!   downsample      u16
//!   rows, cols      u32, u32
//!   values          rows * cols * channels f32, row-major, channel fastest
//! ```

use std::fs;
use std::path::Path;

use crate::error::{FormatError, Result, ScpError};
use crate::featcore::feature::{FeatureLayer, FeatureMap};

pub const MAGIC: [u8; 4] = *b"SCPF";
pub const VERSION: u16 = 1;

pub fn encode_feature_map(fm: &FeatureMap) -> Vec<u8> {
    let payload: usize = fm.layers().iter().map(|l| l.data().len() * 4 + 10).sum();
    let mut out = Vec::with_capacity(64 + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for s in [fm.source_image_id(), fm.extractor_tag()] {
        out.extend_from_slice(&(s.len() as u16).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    out.extend_from_slice(&(fm.height() as u32).to_le_bytes());
    out.extend_from_slice(&(fm.width() as u32).to_le_bytes());
    out.extend_from_slice(&fm.spacing_mm().to_le_bytes());
    out.push(fm.layers().len() as u8);
    out.extend_from_slice(&(fm.channels() as u16).to_le_bytes());
    for layer in fm.layers() {
        out.extend_from_slice(&(layer.downsample() as u16).to_le_bytes());
        out.extend_from_slice(&(layer.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.cols() as u32).to_le_bytes());
        for v in layer.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Fails when a dimension does not fit the fixed-width header fields.
fn check_encodable(fm: &FeatureMap) -> Result<()> {
    let fits = |v: usize, max: u64| (v as u64) <= max;
    if !fits(fm.height(), u32::MAX as u64)
        || !fits(fm.width(), u32::MAX as u64)
        || !fits(fm.channels(), u16::MAX as u64)
        || fm
            .layers()
            .iter()
            .any(|l| !fits(l.downsample(), u16::MAX as u64))
    {
        return Err(FormatError::DimensionOverflow(format!(
            "feature map {} does not fit SCPF header fields",
            fm.source_image_id()
        ))
        .into());
    }
    Ok(())
}

pub fn write_feature_file(fm: &FeatureMap, path: &Path) -> Result<()> {
    check_encodable(fm)?;
    fs::write(path, encode_feature_map(fm))?;
    Ok(())
}

pub fn read_feature_file(path: &Path) -> Result<FeatureMap> {
    let bytes = fs::read(path)?;
    decode_feature_map(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(FormatError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], FormatError> {
        Ok(self.take(N, what)?.try_into().expect("slice length"))
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.array::<1>(what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &'static str) -> Result<String, FormatError> {
        let len = self.u16(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| FormatError::Utf8(what))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn decode_feature_map(bytes: &[u8]) -> Result<FeatureMap> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.array::<4>("magic")?;
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let image_id = cur.string("image_id")?;
    let tag = cur.string("extractor_tag")?;
    let height = cur.u32("height")? as u64;
    let width = cur.u32("width")? as u64;
    let spacing = cur.f64("spacing_mm")?;
    let layer_count = cur.u8("layer_count")? as usize;
    let channels = cur.u16("channels")? as u64;
    if layer_count == 0 {
        return Err(FormatError::Structure("layer_count is zero".into()).into());
    }
    if channels == 0 {
        return Err(FormatError::Structure("channels is zero".into()).into());
    }
    if height == 0 || width == 0 {
        return Err(FormatError::Structure("zero image dimension".into()).into());
    }

    let mut layers = Vec::with_capacity(layer_count);
    for l in 0..layer_count {
        let downsample = cur.u16("layer downsample")? as u64;
        let rows = cur.u32("layer rows")? as u64;
        let cols = cur.u32("layer cols")? as u64;
        let expected_d = 1u64.checked_shl(l as u32).filter(|d| *d <= u16::MAX as u64);
        if Some(downsample) != expected_d {
            return Err(FormatError::Structure(format!(
                "layer {l} downsample {downsample} breaks the doubling rule"
            ))
            .into());
        }
        if rows != height.div_ceil(downsample) || cols != width.div_ceil(downsample) {
            return Err(FormatError::Structure(format!(
                "layer {l} is {rows}x{cols}, expected {}x{} for a {height}x{width} image at downsample {downsample}",
                height.div_ceil(downsample),
                width.div_ceil(downsample)
            ))
            .into());
        }
        let byte_len = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(channels))
            .and_then(|v| v.checked_mul(4))
            .and_then(|v| usize::try_from(v).ok())
            .ok_or_else(|| {
                FormatError::DimensionOverflow(format!(
                    "layer {l}: {rows} x {cols} x {channels} values overflow"
                ))
            })?;
        if byte_len > cur.remaining() {
            return Err(FormatError::Truncated("layer values").into());
        }
        let raw = cur.take(byte_len, "layer values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let layer = FeatureLayer::new(
            downsample as usize,
            rows as usize,
            cols as usize,
            channels as usize,
            data,
        )
        .map_err(|e| FormatError::Structure(e.to_string()))?;
        layers.push(layer);
    }
    if cur.remaining() != 0 {
        return Err(FormatError::Structure(format!(
            "{} trailing bytes after the last layer",
            cur.remaining()
        ))
        .into());
    }
    FeatureMap::new(
        image_id,
        tag,
        height as usize,
        width as usize,
        spacing,
        layers,
    )
    .map_err(|e| match e {
        ScpError::Config(msg) | ScpError::Argument(msg) => FormatError::Structure(msg).into(),
        other => other,
    })
}
