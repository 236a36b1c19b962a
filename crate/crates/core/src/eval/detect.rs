use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Result, ScpError};
use crate::eval::metrics::mre;
use crate::eval::{LandmarkSet, Point2};
use crate::featcore::feature::{FeatureMap, SimilarityScan};
use crate::featcore::image::Pixel;
use crate::matching::match_forward_multi;
use crate::selection::{combination, resolve, CombinationScore, ReverseTable};

/// Predicts every landmark of `target` from labeled templates.
pub fn detect_landmarks(
    tmpls: &[(&FeatureMap, &LandmarkSet)],
    target: &FeatureMap,
) -> Result<LandmarkSet> {
    let Some(first) = tmpls.first() else {
        return Err(ScpError::Argument("template list is empty".into()));
    };
    let l_count = first.1.len();
    if let Some((_, bad)) = tmpls.iter().find(|(_, lm)| lm.len() != l_count) {
        return Err(ScpError::Schema(format!(
            "template {} has {} landmarks, expected {l_count}",
            bad.image_id,
            bad.len()
        )));
    }
    let maps: Vec<&FeatureMap> = tmpls.iter().map(|(f, _)| *f).collect();
    let points = (0..l_count)
        .map(|l| {
            let pts: Vec<Pixel> = tmpls
                .iter()
                .map(|(f, lm)| lm.points[l].to_pixel(f.width(), f.height()))
                .collect();
            match_forward_multi(&maps, &pts, target).map(|r| Point2::from(r.location))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LandmarkSet::new(target.source_image_id(), points))
}

fn landmarks_of(dataset: &Dataset, i: usize) -> Result<&LandmarkSet> {
    let s = &dataset.samples()[i];
    s.landmarks
        .as_ref()
        .ok_or_else(|| ScpError::Data(format!("image {:?} is unlabeled", s.id())))
}

fn require_labels(dataset: &Dataset) -> Result<usize> {
    let l_count = landmarks_of(dataset, 0)?.len();
    for i in 0..dataset.len() {
        let lm = landmarks_of(dataset, i)?;
        if lm.len() != l_count {
            return Err(ScpError::Schema(format!(
                "image {} has {} landmarks, expected {l_count}",
                lm.image_id,
                lm.len()
            )));
        }
    }
    if l_count == 0 {
        return Err(ScpError::Schema("landmark sets are empty".into()));
    }
    Ok(l_count)
}

/// Label-aware representative score: mean over images of the mean over
/// landmarks of the best forward-match similarity from the templates.
pub fn landmark_representative_score<S: AsRef<str>>(
    tmpl_ids: &[S],
    dataset: &Dataset,
) -> Result<CombinationScore> {
    let idx = resolve(tmpl_ids, dataset)?;
    let l_count = require_labels(dataset)?;
    let tmpls: Vec<&FeatureMap> = idx
        .iter()
        .map(|&i| &dataset.samples()[i].features)
        .collect();
    let lms: Vec<&LandmarkSet> = idx
        .iter()
        .map(|&i| landmarks_of(dataset, i))
        .collect::<Result<_>>()?;
    let means = dataset
        .samples()
        .par_iter()
        .map(|s| {
            let mut sum = 0.0;
            for l in 0..l_count {
                let pts: Vec<Pixel> = tmpls
                    .iter()
                    .zip(&lms)
                    .map(|(f, lm)| lm.points[l].to_pixel(f.width(), f.height()))
                    .collect();
                sum += match_forward_multi(&tmpls, &pts, &s.features)?.similarity;
            }
            Ok(sum / l_count as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(combination(dataset, &idx, means))
}

/// Single-template forward matches of every landmark of every template onto every image.
#[derive(Debug, Clone)]
pub struct ForwardTable {
    /// `entries[t][n * l_count + l]`
    entries: Vec<Vec<(Pixel, f64)>>,
    l_count: usize,
}

impl ForwardTable {
    pub fn build(dataset: &Dataset) -> Result<Self> {
        let l_count = require_labels(dataset)?;
        let samples = dataset.samples();
        let entries = samples
            .par_iter()
            .map(|t| {
                let lm = t.landmarks.as_ref().expect("labels checked");
                let mut row = Vec::with_capacity(samples.len() * l_count);
                for target in samples {
                    for p in &lm.points {
                        let q = p.to_pixel(t.features.width(), t.features.height());
                        row.push(
                            SimilarityScan::new(&t.features, q, &target.features)
                                .argmax(&target.features),
                        );
                    }
                }
                row
            })
            .collect();
        Ok(Self { entries, l_count })
    }

    pub fn landmark_count(&self) -> usize {
        self.l_count
    }

    /// Prediction for landmark `l` of image `n` using template `t` alone.
    pub fn get(&self, t: usize, n: usize, l: usize) -> (Pixel, f64) {
        self.entries[t][n * self.l_count + l]
    }

    /// Landmark score of the single template `t`.
    pub fn landmark_score(&self, t: usize) -> f64 {
        let n_images = self.entries[t].len() / self.l_count;
        let means = self.entries[t]
            .chunks_exact(self.l_count)
            .map(|c| c.iter().map(|e| e.1).sum::<f64>() / self.l_count as f64);
        means.sum::<f64>() / n_images as f64
    }

    pub fn predictions(&self, dataset: &Dataset, t: usize, n: usize) -> LandmarkSet {
        let points = (0..self.l_count)
            .map(|l| Point2::from(self.get(t, n, l).0))
            .collect();
        LandmarkSet::new(dataset.samples()[n].id(), points)
    }

    /// Mean MRE of template `t` over every other image.
    pub fn mean_mre(&self, dataset: &Dataset, t: usize) -> Result<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for n in (0..dataset.len()).filter(|&n| n != t) {
            let pred = self.predictions(dataset, t, n);
            let s = &dataset.samples()[n];
            sum += mre(&pred, landmarks_of(dataset, n)?, s.features.spacing_mm())?;
            count += 1;
        }
        Ok(sum / count as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub template_id: String,
    /// Keypoint-based representative score of the template alone.
    pub r_keypoint: f64,
    /// Landmark-based representative score of the template alone.
    pub r_landmark: f64,
    /// Mean radial error when detecting the other images' landmarks.
    pub mean_mre_mm: f64,
}

/// One row per candidate single template, ordered by template id.
pub fn oracle_template_sweep(dataset: &Dataset) -> Result<Vec<SweepRow>> {
    if dataset.len() < 2 {
        return Err(ScpError::Data("the sweep needs at least two images".into()));
    }
    let forward = ForwardTable::build(dataset)?;
    let reverse = ReverseTable::build(dataset)?;
    oracle_template_sweep_with(dataset, &reverse, &forward)
}

pub fn oracle_template_sweep_with(
    dataset: &Dataset,
    reverse: &ReverseTable,
    forward: &ForwardTable,
) -> Result<Vec<SweepRow>> {
    if dataset.len() < 2 {
        return Err(ScpError::Data("the sweep needs at least two images".into()));
    }
    let mut rows = (0..dataset.len())
        .map(|t| {
            Ok(SweepRow {
                template_id: dataset.samples()[t].id().to_string(),
                r_keypoint: reverse.score(&[t]),
                r_landmark: forward.landmark_score(t),
                mean_mre_mm: forward.mean_mre(dataset, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.template_id.cmp(&b.template_id));
    Ok(rows)
}
