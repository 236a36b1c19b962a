//! Forward (template landmark -> image) and reverse (image keypoint ->
//! templates) matching over dense feature maps.
//!
//! Every search is exhaustive over full-resolution pixels. Ties go to the
//! lowest template index, then the lowest row-major pixel index.

use rayon::prelude::*;

use crate::error::{Result, ScpError};
use crate::featcore::feature::{
    cosine_from_parts, dot, point_similarity_unchecked, FeatureMap, SimilarityScan,
};
use crate::featcore::image::Pixel;
use crate::keypoints::KeyPointSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Matched pixel in the searched map.
    pub location: Pixel,
    pub template_index: usize,
    pub similarity: f64,
}

fn check_templates(tmpls: &[&FeatureMap], other: &FeatureMap) -> Result<()> {
    if tmpls.is_empty() {
        return Err(ScpError::Argument("template list is empty".into()));
    }
    tmpls.iter().try_for_each(|t| t.check_structure(other))
}

/// Best pixel of `target` for the template vector at `p_t`.
pub fn match_forward(tmpl: &FeatureMap, p_t: Pixel, target: &FeatureMap) -> Result<MatchResult> {
    match_forward_multi(&[tmpl], &[p_t], target)
}

/// Joint argmax over templates and target pixels; `pts[m]` is the landmark in `tmpls[m]`.
pub fn match_forward_multi(
    tmpls: &[&FeatureMap],
    pts: &[Pixel],
    target: &FeatureMap,
) -> Result<MatchResult> {
    check_templates(tmpls, target)?;
    if pts.len() != tmpls.len() {
        return Err(ScpError::Argument(format!(
            "{} templates but {} landmark coordinates",
            tmpls.len(),
            pts.len()
        )));
    }
    for (t, p) in tmpls.iter().zip(pts) {
        t.check_bounds(*p)?;
    }
    let mut best: Option<MatchResult> = None;
    for (m, (t, p)) in tmpls.iter().zip(pts).enumerate() {
        let (location, similarity) = SimilarityScan::new(t, *p, target).argmax(target);
        if best.is_none_or(|b| similarity > b.similarity) {
            best = Some(MatchResult {
                location,
                template_index: m,
                similarity,
            });
        }
    }
    Ok(best.expect("non-empty template list"))
}

/// Best `(template, pixel)` for the target vector at `q_k`.
pub fn match_reverse(
    target: &FeatureMap,
    q_k: Pixel,
    tmpls: &[&FeatureMap],
) -> Result<MatchResult> {
    check_templates(tmpls, target)?;
    target.check_bounds(q_k)?;
    Ok(reverse_unchecked(target, q_k, tmpls))
}

pub(crate) fn reverse_unchecked(
    target: &FeatureMap,
    q_k: Pixel,
    tmpls: &[&FeatureMap],
) -> MatchResult {
    let mut best: Option<MatchResult> = None;
    for (m, t) in tmpls.iter().enumerate() {
        let (location, similarity) = SimilarityScan::new(target, q_k, t).argmax(t);
        if best.is_none_or(|b| similarity > b.similarity) {
            best = Some(MatchResult {
                location,
                template_index: m,
                similarity,
            });
        }
    }
    best.expect("non-empty template list")
}

fn check_batch(target: &FeatureMap, kps: &KeyPointSet, tmpls: &[&FeatureMap]) -> Result<()> {
    check_templates(tmpls, target)?;
    kps.pixels().try_for_each(|p| target.check_bounds(p))
}

/// [`match_reverse`] for every keypoint, evaluated in parallel, in input order.
pub fn match_reverse_batch(
    target: &FeatureMap,
    kps: &KeyPointSet,
    tmpls: &[&FeatureMap],
) -> Result<Vec<MatchResult>> {
    check_batch(target, kps, tmpls)?;
    Ok(kps
        .points
        .par_iter()
        .map(|k| reverse_unchecked(target, k.pixel(), tmpls))
        .collect())
}

pub fn match_reverse_batch_serial(
    target: &FeatureMap,
    kps: &KeyPointSet,
    tmpls: &[&FeatureMap],
) -> Result<Vec<MatchResult>> {
    check_batch(target, kps, tmpls)?;
    Ok(kps
        .points
        .iter()
        .map(|k| reverse_unchecked(target, k.pixel(), tmpls))
        .collect())
}

/// Approximate coarse-to-fine variant of [`match_forward`].
///
/// The coarsest layer is scanned in full using only that layer; each finer
/// level searches a window of +-2 cells around the children of the previous
/// winner, scoring with the layers at and above that level. The returned
/// similarity is the exact multi-layer similarity at the returned pixel, but
/// the pixel may differ from the exhaustive argmax.
pub fn match_forward_cascade(
    tmpl: &FeatureMap,
    p_t: Pixel,
    target: &FeatureMap,
) -> Result<MatchResult> {
    tmpl.check_structure(target)?;
    tmpl.check_bounds(p_t)?;
    let layers = tmpl.layers();
    let top = layers.len() - 1;
    let query: Vec<(&[f32], f64)> = layers
        .iter()
        .map(|l| {
            let v = l.at(p_t);
            (v, crate::featcore::feature::l2_norm(v))
        })
        .collect();
    let level_score = |level: usize, row: usize, col: usize| -> f64 {
        let mut sum = 0.0;
        for (l, tl) in target.layers().iter().enumerate().skip(level) {
            let (r, c) = (row >> (l - level), col >> (l - level));
            let (v, nv) = query[l];
            sum += cosine_from_parts(dot(v, tl.cell(r, c)), nv, tl.cell_norm(r, c));
        }
        sum / (layers.len() - level) as f64
    };

    let coarse = &target.layers()[top];
    let mut best = (0usize, 0usize);
    let mut best_score = f64::NEG_INFINITY;
    for r in 0..coarse.rows() {
        for c in 0..coarse.cols() {
            let s = level_score(top, r, c);
            if s > best_score {
                best_score = s;
                best = (r, c);
            }
        }
    }
    for level in (0..top).rev() {
        let tl = &target.layers()[level];
        let (r0, c0) = (2 * best.0, 2 * best.1);
        let rows = r0.saturating_sub(2)..=(r0 + 3).min(tl.rows() - 1);
        let cols = c0.saturating_sub(2)..=(c0 + 3).min(tl.cols() - 1);
        best_score = f64::NEG_INFINITY;
        for r in rows {
            for c in cols.clone() {
                let s = level_score(level, r, c);
                if s > best_score {
                    best_score = s;
                    best = (r, c);
                }
            }
        }
    }
    let location = Pixel::new(best.1, best.0);
    Ok(MatchResult {
        location,
        template_index: 0,
        similarity: point_similarity_unchecked(tmpl, p_t, target, location),
    })
}
