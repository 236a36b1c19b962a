//! Handcrafted keypoint proposals standing in for unknown landmarks.

mod dog;
mod simple;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

pub use dog::{detect_keypoints_dog, detect_keypoints_dog_with, DogConfig};
pub use simple::{detect_keypoints_grid, detect_keypoints_random};

use crate::error::{Result, ScpError};
use crate::featcore::image::{validate_id, Image, Pixel};

/// Keypoint budget per image.
pub const DEFAULT_KEYPOINTS: usize = 100;
/// Suppression radius, full-resolution pixels.
pub const DEFAULT_MIN_DIST: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyPoint {
    pub x: usize,
    pub y: usize,
    pub response: f64,
    pub scale: f64,
}

impl KeyPoint {
    pub fn pixel(&self) -> Pixel {
        Pixel::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    DogSift,
    Grid,
    Random,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::DogSift => "dog_sift",
            Detector::Grid => "grid",
            Detector::Random => "random",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Detector {
    type Err = ScpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dog_sift" | "dog" | "sift" => Ok(Detector::DogSift),
            "grid" => Ok(Detector::Grid),
            "random" => Ok(Detector::Random),
            other => Err(ScpError::Argument(format!("unknown detector {other:?}"))),
        }
    }
}

/// Runs `detector`; `min_dist` only affects DoG and `seed` only the random detector.
pub fn detect_keypoints(
    img: &Image,
    detector: Detector,
    k: usize,
    min_dist: f64,
    seed: u64,
) -> Result<KeyPointSet> {
    match detector {
        Detector::DogSift => detect_keypoints_dog(img, k, min_dist),
        Detector::Grid => detect_keypoints_grid(img, k),
        Detector::Random => detect_keypoints_random(img, k, seed),
    }
}

/// Ranked keypoints of one image, strongest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPointSet {
    pub image_id: String,
    pub detector: Detector,
    /// Requested budget; `points.len()` may be smaller.
    pub k: usize,
    pub points: Vec<KeyPoint>,
}

impl KeyPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.points.iter().map(KeyPoint::pixel)
    }
}

/// Formats like C's `%g` with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn encode_keypoints(set: &KeyPointSet) -> String {
    let mut out = format!("scp-kp v1 {} {} k={}\n", set.image_id, set.detector, set.k);
    for p in &set.points {
        out.push_str(&format!(
            "{} {} {} {}\n",
            p.x,
            p.y,
            format_sig6(p.response),
            format_sig6(p.scale)
        ));
    }
    out
}

pub fn decode_keypoints(text: &str) -> Result<KeyPointSet> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ScpError::Parse("empty keypoint file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 4 || fields[0] != "scp-kp" || fields[1] != "v1" {
        return Err(ScpError::Parse(format!("bad keypoint header {header:?}")));
    }
    let image_id = fields[2].to_string();
    validate_id(&image_id)?;
    let detector: Detector = fields[3].parse()?;
    let mut k = None;
    for extra in &fields[4..] {
        if let Some(v) = extra.strip_prefix("k=") {
            k = Some(
                v.parse::<usize>()
                    .map_err(|_| ScpError::Parse(format!("bad k in header: {extra}")))?,
            );
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || ScpError::Parse(format!("bad keypoint line {}: {line:?}", i + 2));
        if parts.len() != 4 {
            return Err(bad());
        }
        let point = KeyPoint {
            x: parts[0].parse().map_err(|_| bad())?,
            y: parts[1].parse().map_err(|_| bad())?,
            response: parts[2].parse().map_err(|_| bad())?,
            scale: parts[3].parse().map_err(|_| bad())?,
        };
        if !(point.response.is_finite() && point.response >= 0.0)
            || !(point.scale.is_finite() && point.scale > 0.0)
        {
            return Err(bad());
        }
        points.push(point);
    }
    if points.windows(2).any(|w| w[0].response < w[1].response) {
        return Err(ScpError::Parse("keypoints not sorted by response".into()));
    }
    Ok(KeyPointSet {
        image_id,
        detector,
        k: k.unwrap_or(points.len()),
        points,
    })
}

pub fn write_keypoint_file(set: &KeyPointSet, path: &Path) -> Result<()> {
    fs::write(path, encode_keypoints(set))?;
    Ok(())
}

pub fn read_keypoint_file(path: &Path) -> Result<KeyPointSet> {
    decode_keypoints(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_matches_printf_g() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.0123456789), "0.0123457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(0.00001234), "1.234e-05");
        assert_eq!(format_sig6(2.5), "2.5");
        assert_eq!(format_sig6(999999.5), "1e+06");
    }

    #[test]
    fn text_round_trip() {
        let set = KeyPointSet {
            image_id: "img_3".into(),
            detector: Detector::DogSift,
            k: 100,
            points: vec![
                KeyPoint {
                    x: 3,
                    y: 4,
                    response: 0.25,
                    scale: 2.0159,
                },
                KeyPoint {
                    x: 10,
                    y: 0,
                    response: 0.125,
                    scale: 1.6,
                },
            ],
        };
        let text = encode_keypoints(&set);
        assert!(text.starts_with("scp-kp v1 img_3 dog_sift k=100\n"));
        assert_eq!(decode_keypoints(&text).unwrap(), set);
    }

    #[test]
    fn header_without_k_is_accepted() {
        let set = decode_keypoints("scp-kp v1 a grid\n1 2 1 1\n").unwrap();
        assert_eq!(set.k, 1);
        assert_eq!(set.detector, Detector::Grid);
        assert!(decode_keypoints("scp-kp v2 a grid\n").is_err());
        assert!(decode_keypoints("scp-kp v1 a surf\n").is_err());
        assert!(decode_keypoints("scp-kp v1 a grid\n1 2 x 1\n").is_err());
    }
}
