//! `scp-manifest v1`: a tab-separated listing of the images in a dataset.
//!
//! ```text
//! scp-manifest v1
//! spacing_mm	0.1
//! root	data
//! img000	img000.pgm	features/img000.scpf	-	lm/img000.lm
//! ```
//!
//! Key lines have two fields, entry lines five (`id image features keypoints
//! landmarks`, `-` for absent). Paths are relative to the manifest directory
//! joined with `root`. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Result, ScpError};
use crate::featcore::image::validate_id;

pub const MANIFEST_MAGIC: &str = "scp-manifest v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub features: Option<String>,
    pub keypoints: Option<String>,
    pub landmarks: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
    pub root: Option<String>,
    pub spacing_mm: f64,
    pub entries: Vec<ManifestEntry>,
}

fn optional(field: &str) -> Option<String> {
    (field != "-").then(|| field.to_string())
}

impl Manifest {
    pub fn parse(text: &str, manifest_dir: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l.trim_end() == MANIFEST_MAGIC => {}
            _ => {
                return Err(ScpError::Parse(format!(
                    "manifest must start with {MANIFEST_MAGIC:?}"
                )))
            }
        }
        let mut root = None;
        let mut spacing_mm = None;
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (no, line) in lines {
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let bad = |msg: &str| ScpError::Parse(format!("manifest line {}: {msg}", no + 1));
            match fields.as_slice() {
                ["spacing_mm", v] => {
                    let s: f64 = v.parse().map_err(|_| bad("spacing_mm is not a number"))?;
                    if !(s.is_finite() && s > 0.0) {
                        return Err(bad("spacing_mm must be positive"));
                    }
                    spacing_mm = Some(s);
                }
                ["root", v] => root = Some(v.to_string()),
                [id, image, features, keypoints, landmarks] => {
                    validate_id(id)?;
                    if entries.iter().any(|e| e.id == *id) {
                        return Err(bad(&format!("duplicate id {id:?}")));
                    }
                    entries.push(ManifestEntry {
                        id: id.to_string(),
                        image: image.to_string(),
                        features: optional(features),
                        keypoints: optional(keypoints),
                        landmarks: optional(landmarks),
                    });
                }
                _ => return Err(bad("expected a key line or five tab-separated fields")),
            }
        }
        let spacing_mm =
            spacing_mm.ok_or_else(|| ScpError::Parse("manifest lacks spacing_mm".into()))?;
        if entries.is_empty() {
            return Err(ScpError::Parse("manifest lists no images".into()));
        }
        let base = match &root {
            Some(r) => manifest_dir.join(r),
            None => manifest_dir.to_path_buf(),
        };
        Ok(Self {
            base,
            root,
            spacing_mm,
            entries,
        })
    }

    pub fn encode(&self) -> String {
        let mut out = format!("{MANIFEST_MAGIC}\nspacing_mm\t{}\n", self.spacing_mm);
        if let Some(r) = &self.root {
            let _ = writeln!(out, "root\t{r}");
        }
        let dash = |o: &Option<String>| o.clone().unwrap_or_else(|| "-".into());
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.id,
                e.image,
                dash(&e.features),
                dash(&e.keypoints),
                dash(&e.landmarks)
            );
        }
        out
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }
}
