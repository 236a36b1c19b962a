//! Dense multi-layer feature maps and the cosine similarity used for matching.
//!
//! Layer `l` of a map is sampled on a grid downsampled by `2^l`, so a
//! full-resolution pixel `(x, y)` reads the cell `(x >> l, y >> l)`. The
//! similarity of two points is the equal-weight mean of the per-layer cosine
//! similarities.

use crate::error::{Result, ScpError};
use crate::featcore::image::{validate_id, Pixel};

/// Allowed deviation of a stored vector's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

/// Inner product accumulated in `f64` with four interleaved partial sums.
///
/// The accumulation order is fixed, so every caller sees identical bits for
/// identical inputs.
#[inline]
pub(crate) fn dot<T: Copy + Into<f64>>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for j in 0..4 {
            acc[j] += x[j].into() * y[j].into();
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += (*x).into() * (*y).into();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn l2_norm<T: Copy + Into<f64>>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine from a dot product and precomputed norms; zero if either norm is zero.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        0.0
    } else {
        dot / (norm_a * norm_b)
    }
}

/// Cosine similarity of two vectors.
///
/// Returns exactly `0.0` when either vector has zero norm.
pub fn cosine_similarity<T: Copy + Into<f64>>(v: &[T], w: &[T]) -> Result<f64> {
    if v.len() != w.len() {
        return Err(ScpError::Dimension {
            left: v.len(),
            right: w.len(),
        });
    }
    if v.is_empty() {
        return Err(ScpError::Dimension { left: 0, right: 0 });
    }
    Ok(cosine_from_parts(dot(v, w), l2_norm(v), l2_norm(w)))
}

/// One pyramid level of a feature map.
#[derive(Debug, Clone)]
pub struct FeatureLayer {
    downsample: usize,
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f32>,
    norms: Vec<f64>,
}

impl PartialEq for FeatureLayer {
    fn eq(&self, other: &Self) -> bool {
        self.downsample == other.downsample
            && self.rows == other.rows
            && self.cols == other.cols
            && self.channels == other.channels
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl FeatureLayer {
    /// `data` is row-major with the channel index fastest.
    pub fn new(
        downsample: usize,
        rows: usize,
        cols: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if downsample == 0 || !downsample.is_power_of_two() {
            return Err(ScpError::Config(format!(
                "downsample {downsample} is not a power of two"
            )));
        }
        if channels == 0 || rows == 0 || cols == 0 {
            return Err(ScpError::Config("empty feature layer".into()));
        }
        let expected = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| ScpError::Config("layer size overflows".into()))?;
        if data.len() != expected {
            return Err(ScpError::Config(format!(
                "layer expects {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ScpError::Config("non-finite feature value".into()));
        }
        let norms: Vec<f64> = data.chunks_exact(channels).map(l2_norm).collect();
        Ok(Self {
            downsample,
            rows,
            cols,
            channels,
            data,
            norms,
        })
    }

    pub fn downsample(&self) -> usize {
        self.downsample
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Vector stored at a layer-grid cell.
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.cols + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub(crate) fn cell_norm(&self, row: usize, col: usize) -> f64 {
        self.norms[row * self.cols + col]
    }

    /// Vector that a full-resolution pixel maps to.
    #[inline]
    pub fn at(&self, p: Pixel) -> &[f32] {
        self.cell(p.y / self.downsample, p.x / self.downsample)
    }

    #[inline]
    pub(crate) fn norm_at(&self, p: Pixel) -> f64 {
        self.cell_norm(p.y / self.downsample, p.x / self.downsample)
    }

    pub(crate) fn norms(&self) -> &[f64] {
        &self.norms
    }
}

/// Multi-layer per-pixel feature vectors of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    source_image_id: String,
    extractor_tag: String,
    height: usize,
    width: usize,
    spacing_mm: f64,
    layers: Vec<FeatureLayer>,
}

impl FeatureMap {
    /// Builds a map and checks every structural and normalization invariant.
    pub fn new(
        source_image_id: impl Into<String>,
        extractor_tag: impl Into<String>,
        height: usize,
        width: usize,
        spacing_mm: f64,
        layers: Vec<FeatureLayer>,
    ) -> Result<Self> {
        let source_image_id = source_image_id.into();
        let extractor_tag = extractor_tag.into();
        validate_id(&source_image_id)?;
        validate_id(&extractor_tag)?;
        if height == 0 || width == 0 {
            return Err(ScpError::Config("zero-sized feature map".into()));
        }
        if !(spacing_mm.is_finite() && spacing_mm > 0.0) {
            return Err(ScpError::Config(format!(
                "spacing {spacing_mm} must be positive"
            )));
        }
        if layers.is_empty() || layers.len() > u8::MAX as usize {
            return Err(ScpError::Config(format!(
                "layer count {} outside 1..=255",
                layers.len()
            )));
        }
        let channels = layers[0].channels;
        for (l, layer) in layers.iter().enumerate() {
            let d = 1usize
                .checked_shl(l as u32)
                .ok_or_else(|| ScpError::Config("too many layers".into()))?;
            if layer.downsample != d {
                return Err(ScpError::Config(format!(
                    "layer {l} has downsample {}, expected {d}",
                    layer.downsample
                )));
            }
            if layer.rows != height.div_ceil(d) || layer.cols != width.div_ceil(d) {
                return Err(ScpError::Config(format!(
                    "layer {l} is {}x{}, expected {}x{}",
                    layer.rows,
                    layer.cols,
                    height.div_ceil(d),
                    width.div_ceil(d)
                )));
            }
            if layer.channels != channels {
                return Err(ScpError::Config(format!(
                    "layer {l} has {} channels, expected {channels}",
                    layer.channels
                )));
            }
            if let Some(n) = layer
                .norms
                .iter()
                .find(|&&n| n != 0.0 && (n - 1.0).abs() > UNIT_NORM_TOLERANCE)
            {
                return Err(ScpError::Config(format!(
                    "layer {l} holds a vector of norm {n}, expected 1 or 0"
                )));
            }
        }
        Ok(Self {
            source_image_id,
            extractor_tag,
            height,
            width,
            spacing_mm,
            layers,
        })
    }

    pub fn source_image_id(&self) -> &str {
        &self.source_image_id
    }

    pub fn extractor_tag(&self) -> &str {
        &self.extractor_tag
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn layers(&self) -> &[FeatureLayer] {
        &self.layers
    }

    pub fn channels(&self) -> usize {
        self.layers[0].channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub(crate) fn check_bounds(&self, p: Pixel) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(ScpError::Bounds {
                x: p.x,
                y: p.y,
                width: self.width,
                height: self.height,
            })
        }
    }

    /// Two maps can be compared when they have the same layer count and channels.
    pub fn same_structure(&self, other: &FeatureMap) -> bool {
        self.layers.len() == other.layers.len() && self.channels() == other.channels()
    }

    pub(crate) fn check_structure(&self, other: &FeatureMap) -> Result<()> {
        if self.same_structure(other) {
            Ok(())
        } else {
            Err(ScpError::Config(format!(
                "layer structure mismatch: {} ({} layers x {} ch) vs {} ({} layers x {} ch)",
                self.source_image_id,
                self.layers.len(),
                self.channels(),
                other.source_image_id,
                other.layers.len(),
                other.channels()
            )))
        }
    }
}

/// Mean over layers of the cosine similarity between `fa` at `pa` and `fb` at `pb`.
pub fn point_similarity(fa: &FeatureMap, pa: Pixel, fb: &FeatureMap, pb: Pixel) -> Result<f64> {
    fa.check_structure(fb)?;
    fa.check_bounds(pa)?;
    fb.check_bounds(pb)?;
    Ok(point_similarity_unchecked(fa, pa, fb, pb))
}

#[inline]
pub(crate) fn point_similarity_unchecked(
    fa: &FeatureMap,
    pa: Pixel,
    fb: &FeatureMap,
    pb: Pixel,
) -> f64 {
    let mut sum = 0.0;
    for (la, lb) in fa.layers.iter().zip(&fb.layers) {
        sum += cosine_from_parts(dot(la.at(pa), lb.at(pb)), la.norm_at(pa), lb.norm_at(pb));
    }
    sum / fa.layers.len() as f64
}

/// Similarity of the query point `(query, at)` against every pixel of `target`.
///
/// Produces the same bits as calling [`point_similarity`] pixel by pixel; the
/// per-layer cosines are evaluated once per layer cell instead of once per
/// pixel.
pub(crate) struct SimilarityScan {
    per_layer: Vec<Vec<f64>>,
}

impl SimilarityScan {
    pub(crate) fn new(query: &FeatureMap, at: Pixel, target: &FeatureMap) -> Self {
        let per_layer = query
            .layers
            .iter()
            .zip(&target.layers)
            .map(|(lq, lt)| {
                let v = lq.at(at);
                let nv = lq.norm_at(at);
                lt.data
                    .chunks_exact(lt.channels)
                    .zip(lt.norms())
                    .map(|(w, &nw)| {
                        if nv == 0.0 || nw == 0.0 {
                            0.0
                        } else {
                            dot(v, w) / (nv * nw)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { per_layer }
    }

    /// Best pixel of `target` in row-major order (first maximum wins).
    pub(crate) fn argmax(&self, target: &FeatureMap) -> (Pixel, f64) {
        let n_layers = self.per_layer.len() as f64;
        let mut best = (Pixel::new(0, 0), f64::NEG_INFINITY);
        for y in 0..target.height {
            for x in 0..target.width {
                let mut sum = 0.0;
                for (l, cos) in self.per_layer.iter().enumerate() {
                    let cols = target.layers[l].cols;
                    sum += cos[(y >> l) * cols + (x >> l)];
                }
                let s = sum / n_layers;
                if s > best.1 {
                    best = (Pixel::new(x, y), s);
                }
            }
        }
        best
    }
}
