//! Shared fixtures and naive nested-loop oracles for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scp_core::dataset::{Dataset, Sample};
use scp_core::eval::LandmarkSet;
use scp_core::featcore::{cosine_similarity, FeatureLayer, FeatureMap, Pixel};
use scp_core::keypoints::{Detector, KeyPoint, KeyPointSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(rng: &mut ChaCha8Rng, channels: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

/// Random map whose cells are drawn from a small palette (so ties occur) or
/// freshly, with occasional zero vectors.
pub fn random_map(
    rng: &mut ChaCha8Rng,
    id: &str,
    height: usize,
    width: usize,
    layers: usize,
    channels: usize,
) -> FeatureMap {
    let palette: Vec<Vec<f32>> = (0..3).map(|_| unit(rng, channels)).collect();
    let use_palette = rng.random_bool(0.4);
    let layers = (0..layers)
        .map(|l| {
            let d = 1usize << l;
            let (rows, cols) = (height.div_ceil(d), width.div_ceil(d));
            let mut data = Vec::with_capacity(rows * cols * channels);
            for _ in 0..rows * cols {
                if rng.random_bool(0.05) {
                    data.extend(std::iter::repeat_n(0.0f32, channels));
                } else if use_palette {
                    data.extend(&palette[rng.random_range(0..palette.len())]);
                } else {
                    data.extend(unit(rng, channels));
                }
            }
            FeatureLayer::new(d, rows, cols, channels, data).unwrap()
        })
        .collect();
    FeatureMap::new(id, "test", height, width, 0.1, layers).unwrap()
}

pub fn random_keypoints(rng: &mut ChaCha8Rng, id: &str, fm: &FeatureMap, k: usize) -> KeyPointSet {
    let points = (0..k)
        .map(|_| KeyPoint {
            x: rng.random_range(0..fm.width()),
            y: rng.random_range(0..fm.height()),
            response: 1.0,
            scale: 1.0,
        })
        .collect();
    KeyPointSet {
        image_id: id.to_string(),
        detector: Detector::Random,
        k,
        points,
    }
}

/// `n` maps sharing one structure, each with `k` random keypoints.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, max_side: usize, k: usize) -> Dataset {
    let h = rng.random_range(4..=max_side);
    let w = rng.random_range(4..=max_side);
    let layers = rng.random_range(1..=3);
    let channels = rng.random_range(2..=6);
    let samples = (0..n)
        .map(|i| {
            let id = format!("m{i:02}");
            let features = random_map(rng, &id, h, w, layers, channels);
            let keypoints = random_keypoints(rng, &id, &features, k);
            Sample {
                features,
                keypoints,
                landmarks: None,
            }
        })
        .collect();
    Dataset::new(samples).unwrap()
}

pub fn with_landmarks(dataset: &Dataset, rng: &mut ChaCha8Rng, l_count: usize) -> Dataset {
    let samples = dataset
        .samples()
        .iter()
        .map(|s| {
            let (w, h) = (s.features.width(), s.features.height());
            let points = (0..l_count)
                .map(|_| {
                    scp_core::eval::Point2::new(
                        rng.random_range(0.0..(w - 1) as f64),
                        rng.random_range(0.0..(h - 1) as f64),
                    )
                })
                .collect();
            Sample {
                landmarks: Some(LandmarkSet::new(s.id(), points)),
                ..s.clone()
            }
        })
        .collect();
    Dataset::new(samples).unwrap()
}

/// Mean over layers of the per-layer cosine, layer cells found by floor division.
pub fn naive_point_similarity(fa: &FeatureMap, pa: Pixel, fb: &FeatureMap, pb: Pixel) -> f64 {
    let mut sum = 0.0;
    for (la, lb) in fa.layers().iter().zip(fb.layers()) {
        let d = la.downsample();
        let va = la.cell(pa.y / d, pa.x / d);
        let vb = lb.cell(pb.y / d, pb.x / d);
        sum += cosine_similarity(va, vb).unwrap();
    }
    sum / fa.layers().len() as f64
}

/// (template index, location, similarity): templates outer, rows, then columns.
pub fn naive_forward_multi(
    tmpls: &[&FeatureMap],
    pts: &[Pixel],
    target: &FeatureMap,
) -> (usize, Pixel, f64) {
    let mut best = (0, Pixel::new(0, 0), f64::NEG_INFINITY);
    for (m, t) in tmpls.iter().enumerate() {
        for y in 0..target.height() {
            for x in 0..target.width() {
                let s = naive_point_similarity(t, pts[m], target, Pixel::new(x, y));
                if s > best.2 {
                    best = (m, Pixel::new(x, y), s);
                }
            }
        }
    }
    best
}

pub fn naive_reverse(target: &FeatureMap, q: Pixel, tmpls: &[&FeatureMap]) -> (usize, Pixel, f64) {
    let mut best = (0, Pixel::new(0, 0), f64::NEG_INFINITY);
    for (m, t) in tmpls.iter().enumerate() {
        for y in 0..t.height() {
            for x in 0..t.width() {
                let s = naive_point_similarity(target, q, t, Pixel::new(x, y));
                if s > best.2 {
                    best = (m, Pixel::new(x, y), s);
                }
            }
        }
    }
    best
}

/// Four-level loop over (image, keypoint, template, template pixel).
pub fn naive_representative(dataset: &Dataset, idx: &[usize]) -> f64 {
    let tmpls: Vec<&FeatureMap> = idx
        .iter()
        .map(|&i| &dataset.samples()[i].features)
        .collect();
    let mut total = 0.0;
    for s in dataset.samples() {
        let mut per_image = 0.0;
        for q in s.keypoints.pixels() {
            per_image += naive_reverse(&s.features, q, &tmpls).2;
        }
        total += per_image / s.keypoints.len() as f64;
    }
    total / dataset.len() as f64
}

/// Label-aware counterpart: forward matches of every landmark.
pub fn naive_landmark_representative(dataset: &Dataset, idx: &[usize]) -> f64 {
    let tmpls: Vec<&FeatureMap> = idx
        .iter()
        .map(|&i| &dataset.samples()[i].features)
        .collect();
    let l_count = dataset.samples()[0].landmarks.as_ref().unwrap().len();
    let mut total = 0.0;
    for s in dataset.samples() {
        let mut per_image = 0.0;
        for l in 0..l_count {
            let pts: Vec<Pixel> = idx
                .iter()
                .map(|&i| {
                    let t = &dataset.samples()[i];
                    t.landmarks.as_ref().unwrap().points[l]
                        .to_pixel(t.features.width(), t.features.height())
                })
                .collect();
            per_image += naive_forward_multi(&tmpls, &pts, &s.features).2;
        }
        total += per_image / l_count as f64;
    }
    total / dataset.len() as f64
}

/// Every `m`-subset of `0..n`, recursively.
pub fn naive_subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Best subset by score, ties broken by the sorted id list.
pub fn naive_best_subset(dataset: &Dataset, m: usize) -> (Vec<String>, f64) {
    let mut best: Option<(Vec<String>, f64)> = None;
    for s in naive_subsets(dataset.len(), m) {
        let score = naive_representative(dataset, &s);
        let mut ids: Vec<String> = s
            .iter()
            .map(|&i| dataset.samples()[i].id().to_string())
            .collect();
        ids.sort();
        let better = match &best {
            None => true,
            Some((bi, bs)) => score > *bs || (score == *bs && ids < *bi),
        };
        if better {
            best = Some((ids, score));
        }
    }
    best.unwrap()
}
