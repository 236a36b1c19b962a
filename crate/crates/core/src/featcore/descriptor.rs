//! Built-in label-free dense descriptor.
//!
//! Every channel is a linear or gradient-magnitude statistic of the image
//! derivatives, so adding a constant to the image leaves the map unchanged.
//! The raw derivatives are taken first with finite differences and smoothed
//! afterwards; when the offset addition itself is exact, the resulting maps are
//! bit-identical.
//!
//! Per layer `l` the working scale is `sigma = base_sigma * 2^l` and the bank
//! holds, in channel order:
//!
//! | channels | content |
//! |----------|---------|
//! | 0..8     | 8-bin gradient orientation histogram pooled at `2 sigma` |
//! | 8..16    | the same histogram pooled at `4 sigma` |
//! | 16..22   | `(Lx, Ly)` at `sigma`, `2 sigma`, `4 sigma`, scale normalized |
//! | 22..31   | `(Lxx, Lxy, Lyy)` at `sigma`, `2 sigma`, `4 sigma`, scale normalized |
//! | 31       | gradient magnitude at `4 sigma` |
//!
//! The full-resolution channel images are averaged over `2^l x 2^l` blocks and
//! each cell vector is L2-normalized.

use std::f64::consts::TAU;

use crate::error::{Result, ScpError};
use crate::featcore::feature::{FeatureLayer, FeatureMap};
use crate::featcore::image::Image;

pub const BANK_SIZE: usize = 32;
const ORIENTATION_BINS: usize = 8;
/// Raw descriptors with a smaller norm become zero vectors.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorConfig {
    pub layers: usize,
    /// Number of leading bank channels kept, at most [`BANK_SIZE`].
    pub channels: usize,
    /// Smoothing scale of the finest layer, in pixels.
    pub base_sigma: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            channels: BANK_SIZE,
            base_sigma: 1.0,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.layers > 16 {
            return Err(ScpError::Config(format!(
                "layer count {} outside 1..=16",
                self.layers
            )));
        }
        if self.channels == 0 || self.channels > BANK_SIZE {
            return Err(ScpError::Config(format!(
                "channel count {} outside 1..={BANK_SIZE}",
                self.channels
            )));
        }
        if !(self.base_sigma.is_finite() && self.base_sigma > 0.0) {
            return Err(ScpError::Config(format!(
                "base sigma {} must be positive",
                self.base_sigma
            )));
        }
        Ok(())
    }

    /// Radius of the widest Gaussian in the bank.
    pub fn support_radius(&self) -> usize {
        let widest = 4.0 * self.base_sigma * (1u64 << (self.layers - 1)) as f64;
        kernel_radius(widest)
    }
}

pub(crate) fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil() as usize
}

pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = kernel_radius(sigma) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Mirror index without repeating the edge sample; valid for `-n < i < 2n - 1`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    j as usize
}

/// Row-major `f64` plane.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    fn at_reflect(&self, x: isize, y: isize) -> f64 {
        self.get(reflect(x, self.width), reflect(y, self.height))
    }

    /// Separable Gaussian blur with mirrored borders.
    pub fn blur(&self, sigma: f64) -> Plane {
        let k = gaussian_kernel(sigma);
        let r = (k.len() / 2) as isize;
        let (w, h) = (self.width, self.height);
        let mut tmp = Plane::zeros(w, h);
        for y in 0..h {
            let row = &self.data[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (i, kv) in k.iter().enumerate() {
                    acc += kv * row[reflect(x as isize + i as isize - r, w)];
                }
                tmp.data[y * w + x] = acc;
            }
        }
        let mut out = Plane::zeros(w, h);
        for y in 0..h {
            for (i, kv) in k.iter().enumerate() {
                let src = reflect(y as isize + i as isize - r, h) * w;
                let dst = &mut out.data[y * w..(y + 1) * w];
                for (d, s) in dst.iter_mut().zip(&tmp.data[src..src + w]) {
                    *d += kv * s;
                }
            }
        }
        out
    }
}

/// Finite-difference derivative images `(Ix, Iy, Ixx, Ixy, Iyy)` of the raw image.
pub(crate) fn raw_derivatives(img: &Image) -> [Plane; 5] {
    let (w, h) = (img.width(), img.height());
    let mut base = Plane::zeros(w, h);
    for (d, s) in base.data.iter_mut().zip(img.pixels()) {
        *d = *s as f64;
    }
    let mut ix = Plane::zeros(w, h);
    let mut iy = Plane::zeros(w, h);
    let mut ixx = Plane::zeros(w, h);
    let mut ixy = Plane::zeros(w, h);
    let mut iyy = Plane::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = base.at_reflect(x, y);
            let l = base.at_reflect(x - 1, y);
            let r = base.at_reflect(x + 1, y);
            let u = base.at_reflect(x, y - 1);
            let d = base.at_reflect(x, y + 1);
            let i = y as usize * w + x as usize;
            ix.data[i] = (r - l) / 2.0;
            iy.data[i] = (d - u) / 2.0;
            ixx.data[i] = r - 2.0 * c + l;
            iyy.data[i] = d - 2.0 * c + u;
            ixy.data[i] = (base.at_reflect(x + 1, y + 1)
                - base.at_reflect(x - 1, y + 1)
                - base.at_reflect(x + 1, y - 1)
                + base.at_reflect(x - 1, y - 1))
                / 4.0;
        }
    }
    [ix, iy, ixx, ixy, iyy]
}

/// Full-resolution channel planes of the bank for one working scale.
pub(crate) fn bank_planes(derivs: &[Plane; 5], sigma: f64) -> Vec<Plane> {
    let [ix, iy, ixx, ixy, iyy] = derivs;
    let (w, h) = (ix.width, ix.height);
    let scales = [sigma, 2.0 * sigma, 4.0 * sigma];

    let gx = ix.blur(sigma);
    let gy = iy.blur(sigma);
    let mut orient: Vec<Plane> = (0..ORIENTATION_BINS).map(|_| Plane::zeros(w, h)).collect();
    for i in 0..w * h {
        let (dx, dy) = (gx.data[i], gy.data[i]);
        let mag = (dx * dx + dy * dy).sqrt() * sigma;
        if mag == 0.0 {
            continue;
        }
        let theta = dy.atan2(dx).rem_euclid(TAU);
        let pos = theta / TAU * ORIENTATION_BINS as f64;
        let b0 = (pos.floor() as usize) % ORIENTATION_BINS;
        let frac = pos - pos.floor();
        orient[b0].data[i] += mag * (1.0 - frac);
        orient[(b0 + 1) % ORIENTATION_BINS].data[i] += mag * frac;
    }

    let mut planes = Vec::with_capacity(BANK_SIZE);
    for pool in [2.0 * sigma, 4.0 * sigma] {
        planes.extend(orient.iter().map(|p| p.blur(pool)));
    }
    for s in scales {
        for d in [ix, iy] {
            let mut p = d.blur(s);
            p.data.iter_mut().for_each(|v| *v *= s);
            planes.push(p);
        }
    }
    for s in scales {
        for d in [ixx, ixy, iyy] {
            let mut p = d.blur(s);
            p.data.iter_mut().for_each(|v| *v *= s * s);
            planes.push(p);
        }
    }
    let (gx4, gy4) = (&planes[20], &planes[21]);
    let mut mag4 = Plane::zeros(w, h);
    for i in 0..w * h {
        mag4.data[i] = (gx4.data[i] * gx4.data[i] + gy4.data[i] * gy4.data[i]).sqrt();
    }
    planes.push(mag4);
    debug_assert_eq!(planes.len(), BANK_SIZE);
    planes
}

/// Block-averages `planes` by `d` and L2-normalizes each cell vector.
pub(crate) fn pool_layer(planes: &[Plane], d: usize, channels: usize) -> Result<FeatureLayer> {
    let (w, h) = (planes[0].width, planes[0].height);
    let (rows, cols) = (h.div_ceil(d), w.div_ceil(d));
    let mut data = Vec::with_capacity(rows * cols * channels);
    let mut cell = vec![0.0f64; channels];
    for r in 0..rows {
        for c in 0..cols {
            let (y0, y1) = (r * d, ((r + 1) * d).min(h));
            let (x0, x1) = (c * d, ((c + 1) * d).min(w));
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            for (ch, slot) in cell.iter_mut().enumerate() {
                let p = &planes[ch];
                let mut acc = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += p.get(x, y);
                    }
                }
                *slot = acc / count;
            }
            let norm = cell.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < DEGENERATE_NORM {
                data.extend(std::iter::repeat_n(0.0f32, channels));
            } else {
                data.extend(cell.iter().map(|v| (v / norm) as f32));
            }
        }
    }
    FeatureLayer::new(d, rows, cols, channels, data)
}

/// Computes the built-in dense feature map of an image.
pub fn extract_features_builtin(img: &Image, config: &DescriptorConfig) -> Result<FeatureMap> {
    config.validate()?;
    let radius = config.support_radius();
    if img.width().min(img.height()) <= radius {
        return Err(ScpError::Size(format!(
            "image {} is {}x{}, the descriptor needs both sides above {radius}",
            img.id(),
            img.width(),
            img.height()
        )));
    }
    let derivs = raw_derivatives(img);
    let layers = (0..config.layers)
        .map(|l| {
            let d = 1usize << l;
            let planes = bank_planes(&derivs, config.base_sigma * d as f64);
            pool_layer(&planes, d, config.channels)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMap::new(
        img.id(),
        "builtin",
        img.height(),
        img.width(),
        img.spacing_mm(),
        layers,
    )
}
