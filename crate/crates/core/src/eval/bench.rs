use rayon::prelude::*;

use crate::dataset::{Dataset, Sample};
use crate::error::{Result, ScpError};
use crate::eval::detect::{oracle_template_sweep_with, ForwardTable, SweepRow};
use crate::eval::metrics::pearson_cc;
use crate::eval::synthetic::{generate_synthetic_dataset, SyntheticDatasetSpec};
use crate::featcore::{extract_features_builtin, DescriptorConfig};
use crate::keypoints::{detect_keypoints, Detector, DEFAULT_KEYPOINTS, DEFAULT_MIN_DIST};
use crate::selection::{ReverseTable, SelectionReport, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub spec: SyntheticDatasetSpec,
    pub descriptor: DescriptorConfig,
    pub detector: Detector,
    pub keypoints: usize,
    pub min_dist: f64,
    pub budget: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            spec: SyntheticDatasetSpec::default(),
            descriptor: DescriptorConfig::default(),
            detector: Detector::DogSift,
            keypoints: DEFAULT_KEYPOINTS,
            min_dist: DEFAULT_MIN_DIST,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Renders the synthetic images and computes features and keypoints for each.
/// The random detector is seeded with `seed + index`.
pub fn synthetic_samples(cfg: &BenchConfig) -> Result<Dataset> {
    let images = generate_synthetic_dataset(&cfg.spec)?;
    let samples = images
        .into_par_iter()
        .enumerate()
        .map(|(i, (img, lm))| {
            Ok(Sample {
                features: extract_features_builtin(&img, &cfg.descriptor)?,
                keypoints: detect_keypoints(
                    &img,
                    cfg.detector,
                    cfg.keypoints,
                    cfg.min_dist,
                    cfg.spec.seed.wrapping_add(i as u64),
                )?,
                landmarks: Some(lm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples)
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<SweepRow>,
    /// `None` when either series is constant.
    pub cc_keypoint_mre: Option<f64>,
    pub cc_keypoint_landmark: Option<f64>,
    /// Single-template selection.
    pub selection: SelectionReport,
    pub selected_mre_mm: f64,
    /// Expected MRE of a uniformly random single template.
    pub candidate_mean_mre_mm: f64,
    pub candidate_std_mre_mm: f64,
    /// Kept for follow-up subset scoring without rebuilding.
    pub table: ReverseTable,
}

fn optional_cc(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    match pearson_cc(xs, ys) {
        Ok(cc) => Ok(Some(cc)),
        Err(ScpError::DegenerateVariance) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Sweep, correlations and selected-vs-random comparison on an existing dataset.
pub fn run_bench_on(dataset: &Dataset, budget: usize, seed: u64) -> Result<BenchOutcome> {
    let reverse = ReverseTable::build(dataset)?;
    let forward = ForwardTable::build(dataset)?;
    let rows = oracle_template_sweep_with(dataset, &reverse, &forward)?;
    let rk: Vec<f64> = rows.iter().map(|r| r.r_keypoint).collect();
    let rl: Vec<f64> = rows.iter().map(|r| r.r_landmark).collect();
    let mres: Vec<f64> = rows.iter().map(|r| r.mean_mre_mm).collect();
    let (cc_keypoint_mre, cc_keypoint_landmark) = if rows.len() >= 3 {
        (optional_cc(&rk, &mres)?, optional_cc(&rk, &rl)?)
    } else {
        (None, None)
    };
    let selection = reverse.select(dataset, 1, budget, seed)?;
    let chosen = &selection.best.template_ids[0];
    let selected_mre_mm = rows
        .iter()
        .find(|r| &r.template_id == chosen)
        .map(|r| r.mean_mre_mm)
        .expect("selected id is a candidate");
    let n = mres.len() as f64;
    let mean = mres.iter().sum::<f64>() / n;
    let var = mres.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BenchOutcome {
        rows,
        cc_keypoint_mre,
        cc_keypoint_landmark,
        selection,
        selected_mre_mm,
        candidate_mean_mre_mm: mean,
        candidate_std_mre_mm: var.sqrt(),
        table: reverse,
    })
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchOutcome> {
    run_bench_on(&synthetic_samples(cfg)?, cfg.budget, cfg.spec.seed)
}
