//! Baseline detectors: a regular lattice and uniform random pixels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ScpError};
use crate::featcore::image::Image;
use crate::keypoints::{Detector, KeyPoint, KeyPointSet};

/// `k` points on a `ceil(sqrt(k))`-column lattice of cell centres, row-major.
pub fn detect_keypoints_grid(img: &Image, k: usize) -> Result<KeyPointSet> {
    if k == 0 {
        return Err(ScpError::Argument("k must be at least 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let cols = (k as f64).sqrt().ceil() as usize;
    let cols = if cols * cols < k { cols + 1 } else { cols };
    let rows = k.div_ceil(cols);
    let points = (0..k)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            KeyPoint {
                x: ((2 * c + 1) * w) / (2 * cols),
                y: ((2 * r + 1) * h) / (2 * rows),
                response: 1.0,
                scale: 1.0,
            }
        })
        .collect();
    Ok(KeyPointSet {
        image_id: img.id().to_string(),
        detector: Detector::Grid,
        k,
        points,
    })
}

/// `k` distinct pixels drawn uniformly without replacement, listed in row-major order.
pub fn detect_keypoints_random(img: &Image, k: usize, seed: u64) -> Result<KeyPointSet> {
    let n = img.width() * img.height();
    if k == 0 {
        return Err(ScpError::Argument("k must be at least 1".into()));
    }
    if k > n {
        return Err(ScpError::Capacity {
            requested: k,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let points = idx
        .into_iter()
        .map(|i| KeyPoint {
            x: i % img.width(),
            y: i / img.width(),
            response: 1.0,
            scale: 1.0,
        })
        .collect();
    Ok(KeyPointSet {
        image_id: img.id().to_string(),
        detector: Detector::Random,
        k,
        points,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn blank(w: usize, h: usize) -> Image {
        Image::new("b", w, h, 0.1, vec![0.0; w * h]).unwrap()
    }

    #[test]
    fn grid_four_points() {
        let set = detect_keypoints_grid(&blank(64, 64), 4).unwrap();
        let got: Vec<(usize, usize)> = set.points.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(got, vec![(16, 16), (48, 16), (16, 48), (48, 48)]);
    }

    #[test]
    fn grid_center() {
        let set = detect_keypoints_grid(&blank(64, 64), 1).unwrap();
        assert_eq!((set.points[0].x, set.points[0].y), (32, 32));
    }

    #[test]
    fn grid_in_bounds() {
        for k in [2, 3, 5, 7, 99, 100, 1000, 5000] {
            let set = detect_keypoints_grid(&blank(37, 21), k).unwrap();
            assert_eq!(set.len(), k);
            assert!(set.points.iter().all(|p| p.x < 37 && p.y < 21));
        }
    }

    #[test]
    fn random_is_seeded() {
        let img = blank(64, 64);
        assert_eq!(
            detect_keypoints_random(&img, 100, 7).unwrap(),
            detect_keypoints_random(&img, 100, 7).unwrap()
        );
    }

    #[test]
    fn random_exhaustion_covers_every_pixel() {
        let img = blank(16, 17);
        let set = detect_keypoints_random(&img, 16 * 17, 3).unwrap();
        let uniq: HashSet<(usize, usize)> = set.points.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(uniq.len(), 16 * 17);
        assert!(matches!(
            detect_keypoints_random(&img, 16 * 17 + 1, 3),
            Err(ScpError::Capacity { .. })
        ));
    }

    #[test]
    fn random_seeds_differ() {
        // Two independent 100-subsets of 4096 pixels coincide with probability
        // 1 / C(4096, 100); any equality over 100 pairs would indicate a seeding bug.
        let img = blank(64, 64);
        for s in 0..100u64 {
            let a = detect_keypoints_random(&img, 100, 2 * s).unwrap();
            let b = detect_keypoints_random(&img, 100, 2 * s + 1).unwrap();
            assert_ne!(a.points, b.points, "seed pair {s}");
        }
    }
}
