//! Difference-of-Gaussians extremum detector (the localization half of SIFT).

use crate::error::{Result, ScpError};
use crate::featcore::descriptor::{kernel_radius, Plane};
use crate::featcore::image::Image;
use crate::keypoints::{Detector, KeyPoint, KeyPointSet};

/// Blur already present in a sampled image.
const ASSUMED_INPUT_BLUR: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DogConfig {
    pub octaves: usize,
    pub scales_per_octave: usize,
    pub sigma0: f64,
    /// Minimum |DoG| on `[0, 1]` intensities.
    pub contrast_threshold: f64,
    /// Principal-curvature ratio bound for the edge test.
    pub edge_ratio: f64,
    /// Octaves whose smaller side falls below this are skipped.
    pub min_octave_size: usize,
}

impl Default for DogConfig {
    fn default() -> Self {
        Self {
            octaves: 4,
            scales_per_octave: 3,
            sigma0: 1.6,
            contrast_threshold: 0.01,
            edge_ratio: 10.0,
            min_octave_size: 16,
        }
    }
}

fn blur_or_copy(p: &Plane, sigma: f64) -> Option<Plane> {
    if sigma <= 0.0 {
        return Some(p.clone());
    }
    if kernel_radius(sigma) >= p.width.min(p.height) {
        return None;
    }
    Some(p.blur(sigma))
}

fn downsample(p: &Plane) -> Plane {
    let (w, h) = (p.width.div_ceil(2), p.height.div_ceil(2));
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.data[y * w + x] = p.get(2 * x, 2 * y);
        }
    }
    out
}

struct Candidate {
    x: usize,
    y: usize,
    response: f64,
    scale: f64,
}

/// `true` when `v` is strictly above (or strictly below) all 26 neighbours.
fn is_extremum(dogs: &[Plane], i: usize, x: usize, y: usize, v: f64) -> bool {
    let mut is_max = true;
    let mut is_min = true;
    for plane in &dogs[i - 1..=i + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if std::ptr::eq(plane, &dogs[i]) && xx == x && yy == y {
                    continue;
                }
                let n = plane.get(xx, yy);
                is_max &= v > n;
                is_min &= v < n;
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

fn passes_edge_test(d: &Plane, x: usize, y: usize, ratio: f64) -> bool {
    let c = d.get(x, y);
    let dxx = d.get(x + 1, y) + d.get(x - 1, y) - 2.0 * c;
    let dyy = d.get(x, y + 1) + d.get(x, y - 1) - 2.0 * c;
    let dxy = (d.get(x + 1, y + 1) - d.get(x - 1, y + 1) - d.get(x + 1, y - 1)
        + d.get(x - 1, y - 1))
        / 4.0;
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    det > 0.0 && tr * tr * ratio < (ratio + 1.0) * (ratio + 1.0) * det
}

/// Greedy suppression: keep candidates in order unless closer than `min_dist`
/// to an already kept one. Stops after `k` survivors.
fn suppress(cands: &[Candidate], k: usize, min_dist: f64) -> Vec<KeyPoint> {
    let min_sq = min_dist * min_dist;
    let mut kept: Vec<KeyPoint> = Vec::with_capacity(k.min(cands.len()));
    for c in cands {
        if kept.len() == k {
            break;
        }
        let clear = kept.iter().all(|p| {
            let dx = p.x as f64 - c.x as f64;
            let dy = p.y as f64 - c.y as f64;
            dx * dx + dy * dy >= min_sq
        });
        if clear {
            kept.push(KeyPoint {
                x: c.x,
                y: c.y,
                response: c.response,
                scale: c.scale,
            });
        }
    }
    kept
}

pub fn detect_keypoints_dog(img: &Image, k: usize, min_dist: f64) -> Result<KeyPointSet> {
    detect_keypoints_dog_with(img, k, min_dist, &DogConfig::default())
}

pub fn detect_keypoints_dog_with(
    img: &Image,
    k: usize,
    min_dist: f64,
    cfg: &DogConfig,
) -> Result<KeyPointSet> {
    if k == 0 {
        return Err(ScpError::Argument("k must be at least 1".into()));
    }
    if !(min_dist.is_finite() && min_dist >= 0.0) {
        return Err(ScpError::Argument(format!(
            "min_dist {min_dist} must be non-negative"
        )));
    }
    if cfg.octaves == 0 || cfg.scales_per_octave == 0 || cfg.sigma0 <= ASSUMED_INPUT_BLUR {
        return Err(ScpError::Config(format!(
            "invalid DoG configuration {cfg:?}"
        )));
    }
    let min_side = cfg.min_octave_size.max(3);
    if img.width().min(img.height()) < min_side {
        return Err(ScpError::Size(format!(
            "image {} is {}x{}, one octave needs {min_side} px per side",
            img.id(),
            img.width(),
            img.height()
        )));
    }

    let s = cfg.scales_per_octave;
    let step = 2f64.powf(1.0 / s as f64);
    let sigmas: Vec<f64> = (0..s + 3)
        .map(|i| cfg.sigma0 * step.powi(i as i32))
        .collect();

    let mut base = Plane::zeros(img.width(), img.height());
    for (d, v) in base.data.iter_mut().zip(img.pixels()) {
        *d = *v as f64;
    }
    let initial = (cfg.sigma0.powi(2) - ASSUMED_INPUT_BLUR.powi(2)).sqrt();
    let mut base = blur_or_copy(&base, initial)
        .ok_or_else(|| ScpError::Size(format!("image {} too small for initial blur", img.id())))?;

    let mut cands = Vec::new();
    for octave in 0..cfg.octaves {
        if base.width.min(base.height) < min_side {
            break;
        }
        let mut gauss = vec![base.clone()];
        for i in 1..sigmas.len() {
            let inc = (sigmas[i].powi(2) - sigmas[i - 1].powi(2)).sqrt();
            match blur_or_copy(&gauss[i - 1], inc) {
                Some(p) => gauss.push(p),
                None => break,
            }
        }
        if gauss.len() < sigmas.len() {
            break;
        }
        let dogs: Vec<Plane> = gauss
            .windows(2)
            .map(|w| {
                let mut d = w[1].clone();
                d.data.iter_mut().zip(&w[0].data).for_each(|(a, b)| *a -= b);
                d
            })
            .collect();
        let factor = (1usize << octave) as f64;
        for i in 1..=s {
            let d = &dogs[i];
            for y in 1..d.height - 1 {
                for x in 1..d.width - 1 {
                    let v = d.get(x, y);
                    if v.abs() < cfg.contrast_threshold {
                        continue;
                    }
                    if !is_extremum(&dogs, i, x, y, v) || !passes_edge_test(d, x, y, cfg.edge_ratio)
                    {
                        continue;
                    }
                    cands.push(Candidate {
                        x: (x << octave).min(img.width() - 1),
                        y: (y << octave).min(img.height() - 1),
                        response: v.abs(),
                        scale: sigmas[i] * factor,
                    });
                }
            }
        }
        base = downsample(&gauss[s]);
    }

    cands.sort_by(|a, b| {
        b.response
            .total_cmp(&a.response)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
    });
    Ok(KeyPointSet {
        image_id: img.id().to_string(),
        detector: Detector::DogSift,
        k,
        points: suppress(&cands, k, min_dist),
    })
}
