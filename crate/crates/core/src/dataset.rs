use std::collections::HashMap;

use crate::error::{Result, ScpError};
use crate::eval::LandmarkSet;
use crate::featcore::FeatureMap;
use crate::keypoints::KeyPointSet;

/// Precomputed artifacts of one image.
#[derive(Debug, Clone)]
pub struct Sample {
    pub features: FeatureMap,
    pub keypoints: KeyPointSet,
    pub landmarks: Option<LandmarkSet>,
}

impl Sample {
    pub fn id(&self) -> &str {
        self.features.source_image_id()
    }
}

/// The image collection searched for templates.
#[derive(Debug, Clone)]
pub struct Dataset {
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Checks id uniqueness, a shared layer structure and keypoint bounds.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(ScpError::Data("dataset is empty".into()));
        }
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id().to_string(), i).is_some() {
                return Err(ScpError::Data(format!("duplicate image id {:?}", s.id())));
            }
            s.features.check_structure(&samples[0].features)?;
            for p in s.keypoints.pixels() {
                s.features.check_bounds(p)?;
            }
            if let Some(lm) = &s.landmarks {
                lm.check_bounds(s.features.width(), s.features.height())?;
            }
        }
        Ok(Self { samples, index })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ScpError::Lookup(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<&Sample> {
        Ok(&self.samples[self.position(id)?])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(Sample::id)
    }

    pub(crate) fn require_keypoints(&self) -> Result<()> {
        match self.samples.iter().find(|s| s.keypoints.is_empty()) {
            Some(s) => Err(ScpError::Data(format!(
                "image {:?} has no keypoints",
                s.id()
            ))),
            None => Ok(()),
        }
    }
}
