//! Ground-truth evaluation: landmark detection by template matching, radial
//! error metrics, correlations and a synthetic dataset generator.

mod bench;
mod detect;
mod metrics;
mod synthetic;

use std::fs;
use std::path::Path;

pub use bench::{run_bench, run_bench_on, synthetic_samples, BenchConfig, BenchOutcome};
pub use detect::{
    detect_landmarks, landmark_representative_score, oracle_template_sweep,
    oracle_template_sweep_with, ForwardTable, SweepRow,
};
pub use metrics::{evaluate, mre, pearson_cc, radial_errors, sdr, EvalReport, DEFAULT_RADII_MM};
pub use synthetic::{generate_synthetic_dataset, SyntheticDatasetSpec};

use crate::error::{Result, ScpError};
use crate::featcore::image::{validate_id, Pixel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest pixel, clamped into a `width x height` grid.
    pub fn to_pixel(self, width: usize, height: usize) -> Pixel {
        let clamp = |v: f64, n: usize| (v.round().max(0.0) as usize).min(n - 1);
        Pixel::new(clamp(self.x, width), clamp(self.y, height))
    }
}

impl From<Pixel> for Point2 {
    fn from(p: Pixel) -> Self {
        Point2::new(p.x as f64, p.y as f64)
    }
}

/// Ordered landmark coordinates of one image (sub-pixel allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub image_id: String,
    pub points: Vec<Point2>,
}

impl LandmarkSet {
    pub fn new(image_id: impl Into<String>, points: Vec<Point2>) -> Self {
        Self {
            image_id: image_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        for p in &self.points {
            let ok = p.x.is_finite()
                && p.y.is_finite()
                && p.x >= 0.0
                && p.y >= 0.0
                && p.x <= (width - 1) as f64
                && p.y <= (height - 1) as f64;
            if !ok {
                return Err(ScpError::Data(format!(
                    "landmark ({}, {}) of {} outside {width}x{height}",
                    p.x, p.y, self.image_id
                )));
            }
        }
        Ok(())
    }
}

pub fn encode_landmarks(set: &LandmarkSet) -> String {
    let mut out = format!("scp-lm v1 {} {}\n", set.image_id, set.points.len());
    for p in &set.points {
        out.push_str(&format!("{} {}\n", p.x, p.y));
    }
    out
}

pub fn decode_landmarks(text: &str) -> Result<LandmarkSet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| ScpError::Parse("empty landmark file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "scp-lm" || fields[1] != "v1" {
        return Err(ScpError::Parse(format!("bad landmark header {header:?}")));
    }
    validate_id(fields[2])?;
    let count: usize = fields[3]
        .parse()
        .map_err(|_| ScpError::Parse(format!("bad landmark count {:?}", fields[3])))?;
    let points = lines
        .map(|line| {
            let bad = || ScpError::Parse(format!("bad landmark line {line:?}"));
            let mut it = line.split_whitespace();
            let x: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let y: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if it.next().is_some() || !x.is_finite() || !y.is_finite() {
                return Err(bad());
            }
            Ok(Point2::new(x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    if points.len() != count {
        return Err(ScpError::Schema(format!(
            "header declares {count} landmarks, found {}",
            points.len()
        )));
    }
    Ok(LandmarkSet::new(fields[2], points))
}

pub fn write_landmark_file(set: &LandmarkSet, path: &Path) -> Result<()> {
    fs::write(path, encode_landmarks(set))?;
    Ok(())
}

pub fn read_landmark_file(path: &Path) -> Result<LandmarkSet> {
    decode_landmarks(&fs::read_to_string(path)?)
}
