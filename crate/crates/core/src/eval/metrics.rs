use crate::error::{Result, ScpError};
use crate::eval::LandmarkSet;

/// SDR radii in millimetres used by the cephalometric benchmarks.
pub const DEFAULT_RADII_MM: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mre_mm: f64,
    /// `(radius_mm, rate)` in ascending radius order.
    pub sdr: Vec<(f64, f64)>,
    /// Radial error of every (image, landmark) pair, image-major.
    pub per_landmark_errors_mm: Vec<f64>,
}

fn check_pair(pred: &LandmarkSet, gt: &LandmarkSet) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(ScpError::Schema(format!(
            "{} predicted landmarks vs {} ground truth for {}",
            pred.len(),
            gt.len(),
            gt.image_id
        )));
    }
    if pred.image_id != gt.image_id {
        return Err(ScpError::Schema(format!(
            "prediction for {} paired with ground truth of {}",
            pred.image_id, gt.image_id
        )));
    }
    if gt.is_empty() {
        return Err(ScpError::Schema(format!(
            "{} has no landmarks",
            gt.image_id
        )));
    }
    Ok(())
}

/// Per-landmark radial errors in millimetres.
pub fn radial_errors(pred: &LandmarkSet, gt: &LandmarkSet, spacing_mm: f64) -> Result<Vec<f64>> {
    check_pair(pred, gt)?;
    Ok(pred
        .points
        .iter()
        .zip(&gt.points)
        .map(|(p, g)| spacing_mm * p.distance(*g))
        .collect())
}

/// Mean radial error in millimetres.
pub fn mre(pred: &LandmarkSet, gt: &LandmarkSet, spacing_mm: f64) -> Result<f64> {
    let errs = radial_errors(pred, gt, spacing_mm)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

fn check_radii(radii_mm: &[f64]) -> Result<()> {
    if radii_mm.is_empty()
        || radii_mm.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || radii_mm.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ScpError::Argument(format!(
            "radii {radii_mm:?} must be positive and strictly ascending"
        )));
    }
    Ok(())
}

fn all_errors(preds: &[LandmarkSet], gts: &[LandmarkSet], spacing_mm: f64) -> Result<Vec<f64>> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(ScpError::Schema(format!(
            "{} predictions vs {} ground-truth sets",
            preds.len(),
            gts.len()
        )));
    }
    let mut out = Vec::new();
    for (p, g) in preds.iter().zip(gts) {
        out.extend(radial_errors(p, g, spacing_mm)?);
    }
    Ok(out)
}

fn rates(errors: &[f64], radii_mm: &[f64]) -> Vec<(f64, f64)> {
    radii_mm
        .iter()
        .map(|&r| {
            let hits = errors.iter().filter(|&&e| e <= r).count();
            (r, hits as f64 / errors.len() as f64)
        })
        .collect()
}

/// Successful detection rate per radius over all (image, landmark) pairs.
pub fn sdr(
    preds: &[LandmarkSet],
    gts: &[LandmarkSet],
    spacing_mm: f64,
    radii_mm: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_radii(radii_mm)?;
    Ok(rates(&all_errors(preds, gts, spacing_mm)?, radii_mm))
}

pub fn evaluate(
    preds: &[LandmarkSet],
    gts: &[LandmarkSet],
    spacing_mm: f64,
    radii_mm: &[f64],
) -> Result<EvalReport> {
    check_radii(radii_mm)?;
    let errors = all_errors(preds, gts, spacing_mm)?;
    Ok(EvalReport {
        mre_mm: errors.iter().sum::<f64>() / errors.len() as f64,
        sdr: rates(&errors, radii_mm),
        per_landmark_errors_mm: errors,
    })
}

/// Pearson correlation coefficient.
pub fn pearson_cc(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(ScpError::Dimension {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(ScpError::Argument(format!(
            "correlation needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ScpError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
