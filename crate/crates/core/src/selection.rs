//! Representative score of a template subset and the search for the best subset.
//!
//! The score of templates `S` is the mean over images of the mean over that
//! image's keypoints of the best reverse-match similarity against `S`. Template
//! images are part of the averaged collection.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Result, ScpError};
use crate::featcore::feature::{FeatureMap, SimilarityScan};
use crate::matching::reverse_unchecked;

pub const DEFAULT_BUDGET: usize = 10_000;
pub const MAX_BUDGET: usize = 100_000;
/// Redraw attempts allowed per requested combination when sampling.
pub const REDRAW_FACTOR: usize = 50;
/// Combinations listed in a serialized report.
pub const REPORT_TOP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationScore {
    /// Template ids, sorted.
    pub template_ids: Vec<String>,
    pub score: f64,
    pub per_image_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    Sampled,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::Sampled => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single score.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl ScoreSummary {
    pub fn from_scores(scores: &[f64]) -> Self {
        let n = scores.len();
        if n == 0 {
            return Self {
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = scores.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count: n,
            mean,
            std,
            min: scores.iter().cloned().fold(f64::INFINITY, f64::min),
            max: scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCombination {
    pub template_ids: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub best: CombinationScore,
    pub m: usize,
    pub trials_evaluated: usize,
    pub search_mode: SearchMode,
    pub seed: u64,
    pub all_scores_summary: ScoreSummary,
    /// Highest-scoring combinations, best first, at most [`REPORT_TOP`].
    pub top: Vec<RankedCombination>,
}

fn mean_of(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    values.sum::<f64>() / count as f64
}

/// Scores a template subset directly from the feature maps.
pub fn representative_score<S: AsRef<str>>(
    tmpl_ids: &[S],
    dataset: &Dataset,
) -> Result<CombinationScore> {
    let idx = resolve(tmpl_ids, dataset)?;
    dataset.require_keypoints()?;
    let tmpls: Vec<&FeatureMap> = idx
        .iter()
        .map(|&i| &dataset.samples()[i].features)
        .collect();
    let means: Vec<f64> = dataset
        .samples()
        .par_iter()
        .map(|s| {
            let sims = s
                .keypoints
                .pixels()
                .map(|q| reverse_unchecked(&s.features, q, &tmpls).similarity);
            mean_of(sims, s.keypoints.len())
        })
        .collect();
    Ok(combination(dataset, &idx, means))
}

pub(crate) fn resolve<S: AsRef<str>>(tmpl_ids: &[S], dataset: &Dataset) -> Result<Vec<usize>> {
    if tmpl_ids.is_empty() {
        return Err(ScpError::Argument("template list is empty".into()));
    }
    let idx = tmpl_ids
        .iter()
        .map(|id| dataset.position(id.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let uniq: HashSet<usize> = idx.iter().copied().collect();
    if uniq.len() != idx.len() {
        return Err(ScpError::Argument("template ids must be distinct".into()));
    }
    Ok(idx)
}

fn sorted_ids(dataset: &Dataset, idx: &[usize]) -> Vec<String> {
    let mut ids: Vec<String> = idx
        .iter()
        .map(|&i| dataset.samples()[i].id().to_string())
        .collect();
    ids.sort();
    ids
}

pub(crate) fn combination(dataset: &Dataset, idx: &[usize], means: Vec<f64>) -> CombinationScore {
    let score = mean_of(means.iter().copied(), means.len());
    CombinationScore {
        template_ids: sorted_ids(dataset, idx),
        score,
        per_image_means: dataset.ids().map(str::to_string).zip(means).collect(),
    }
}

/// Best single-template similarity for every (image, keypoint, candidate template).
///
/// The multi-template reverse match is the maximum of single-template matches,
/// so any subset can be scored from this table with the same bits as
/// [`representative_score`].
#[derive(Debug, Clone)]
pub struct ReverseTable {
    /// `sims[n][k * n_templates + m]`
    sims: Vec<Vec<f64>>,
    keypoint_counts: Vec<usize>,
    n_templates: usize,
}

impl ReverseTable {
    pub fn build(dataset: &Dataset) -> Result<Self> {
        dataset.require_keypoints()?;
        let n = dataset.len();
        let sims = dataset
            .samples()
            .par_iter()
            .map(|s| {
                let mut row = Vec::with_capacity(s.keypoints.len() * n);
                for q in s.keypoints.pixels() {
                    for t in dataset.samples() {
                        let (_, sim) =
                            SimilarityScan::new(&s.features, q, &t.features).argmax(&t.features);
                        row.push(sim);
                    }
                }
                row
            })
            .collect();
        Ok(Self {
            sims,
            keypoint_counts: dataset
                .samples()
                .iter()
                .map(|s| s.keypoints.len())
                .collect(),
            n_templates: n,
        })
    }

    pub fn n_images(&self) -> usize {
        self.sims.len()
    }

    /// Similarity of keypoint `k` of image `n` against template `m` alone.
    pub fn get(&self, n: usize, k: usize, m: usize) -> f64 {
        self.sims[n][k * self.n_templates + m]
    }

    /// Per-image keypoint means for the template subset `idx`.
    pub fn image_means(&self, idx: &[usize]) -> Vec<f64> {
        self.sims
            .iter()
            .zip(&self.keypoint_counts)
            .map(|(row, &k)| {
                let per_kp = row
                    .chunks_exact(self.n_templates)
                    .map(|r| idx.iter().map(|&m| r[m]).fold(f64::NEG_INFINITY, f64::max));
                mean_of(per_kp, k)
            })
            .collect()
    }

    pub fn score(&self, idx: &[usize]) -> f64 {
        let means = self.image_means(idx);
        mean_of(means.iter().copied(), means.len())
    }

    pub fn combination_score(&self, dataset: &Dataset, idx: &[usize]) -> CombinationScore {
        combination(dataset, idx, self.image_means(idx))
    }

    /// Searches for the `m`-subset with the highest score.
    pub fn select(
        &self,
        dataset: &Dataset,
        m: usize,
        budget: usize,
        seed: u64,
    ) -> Result<SelectionReport> {
        let n = self.n_images();
        check_subset_size(m, n)?;
        if budget == 0 {
            return Err(ScpError::Argument("budget must be at least 1".into()));
        }
        let (combos, mode) = if binomial(n, m).is_some_and(|c| c <= budget as u128) {
            (all_combinations(n, m), SearchMode::Exhaustive)
        } else {
            (sample_combinations(n, m, budget, seed), SearchMode::Sampled)
        };
        let mut scored: Vec<(f64, Vec<String>, &Vec<usize>)> = combos
            .par_iter()
            .map(|c| (self.score(c), sorted_ids(dataset, c), c))
            .collect();
        let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let best = self.combination_score(dataset, scored[0].2);
        Ok(SelectionReport {
            best,
            m,
            trials_evaluated: scored.len(),
            search_mode: mode,
            seed,
            all_scores_summary: ScoreSummary::from_scores(&scores),
            top: scored
                .iter()
                .take(REPORT_TOP)
                .map(|(score, ids, _)| RankedCombination {
                    template_ids: ids.clone(),
                    score: *score,
                })
                .collect(),
        })
    }

    /// Scores of `trials` uniformly drawn `m`-subsets (drawn independently).
    pub fn random_scores(&self, m: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
        check_subset_size(m, self.n_images())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let combos: Vec<Vec<usize>> = (0..trials)
            .map(|_| draw_combination(&mut rng, self.n_images(), m))
            .collect();
        Ok(combos.par_iter().map(|c| self.score(c)).collect())
    }

    pub fn random_baseline(&self, m: usize, trials: usize, seed: u64) -> Result<ScoreSummary> {
        if trials < 2 {
            return Err(ScpError::Argument(
                "random baseline needs at least 2 trials".into(),
            ));
        }
        Ok(ScoreSummary::from_scores(
            &self.random_scores(m, trials, seed)?,
        ))
    }
}

fn check_subset_size(m: usize, n: usize) -> Result<()> {
    if m == 0 {
        return Err(ScpError::Argument("m must be at least 1".into()));
    }
    if m > n {
        return Err(ScpError::Capacity {
            requested: m,
            available: n,
        });
    }
    Ok(())
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// All `m`-subsets of `0..n` in lexicographic order.
pub fn all_combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..m).rev().find(|&i| cur[i] != i + n - m) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..m {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn draw_combination(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<usize> {
    let mut c = rand::seq::index::sample(rng, n, m).into_vec();
    c.sort_unstable();
    c
}

/// Up to `budget` distinct combinations; gives up after `REDRAW_FACTOR * budget` draws.
fn sample_combinations(n: usize, m: usize, budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(budget);
    let mut out = Vec::with_capacity(budget);
    let max_draws = budget.saturating_mul(REDRAW_FACTOR);
    let mut draws = 0;
    while out.len() < budget && draws < max_draws {
        draws += 1;
        let c = draw_combination(&mut rng, n, m);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Searches the `m` templates with the highest representative score.
pub fn select_templates(
    dataset: &Dataset,
    m: usize,
    budget: usize,
    seed: u64,
) -> Result<SelectionReport> {
    check_subset_size(m, dataset.len())?;
    ReverseTable::build(dataset)?.select(dataset, m, budget, seed)
}

/// Spread of the score over random `m`-subsets.
pub fn random_baseline(
    dataset: &Dataset,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<ScoreSummary> {
    check_subset_size(m, dataset.len())?;
    if trials < 2 {
        return Err(ScpError::Argument(
            "random baseline needs at least 2 trials".into(),
        ));
    }
    ReverseTable::build(dataset)?.random_baseline(m, trials, seed)
}

/// Text form of a report, versioned `scp-report v1`.
pub fn encode_report(report: &SelectionReport) -> String {
    let s = &report.all_scores_summary;
    let mut out = String::from("scp-report v1\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}\t{v}");
    };
    kv("search_mode", report.search_mode.name().into());
    kv("m", report.m.to_string());
    kv("seed", report.seed.to_string());
    kv("trials_evaluated", report.trials_evaluated.to_string());
    kv("best_score", format!("{:.12}", report.best.score));
    kv("best_templates", report.best.template_ids.join(","));
    kv("scores_mean", format!("{:.12}", s.mean));
    kv("scores_std", format!("{:.12}", s.std));
    kv("scores_min", format!("{:.12}", s.min));
    kv("scores_max", format!("{:.12}", s.max));
    out.push_str("\n[top]\nrank\tscore\ttemplates\n");
    for (i, c) in report.top.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:.12}\t{}",
            i + 1,
            c.score,
            c.template_ids.join(",")
        );
    }
    out.push_str("\n[best_per_image]\nimage_id\tmean_similarity\n");
    for (id, v) in &report.best.per_image_means {
        let _ = writeln!(out, "{id}\t{v:.12}");
    }
    out
}
