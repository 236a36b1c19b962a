//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;

use scp_core::dataset::Dataset;
use scp_core::error::{FormatError, ScpError};
use scp_core::eval::{
    detect_landmarks, landmark_representative_score, run_bench, BenchConfig, LandmarkSet, Point2,
    SyntheticDatasetSpec,
};
use scp_core::featcore::scpf::{decode_feature_map, encode_feature_map, MAGIC};
use scp_core::featcore::{
    point_similarity, read_feature_file, write_feature_file, FeatureMap, Pixel,
};
use scp_core::matching::{match_forward, match_forward_multi, match_reverse, match_reverse_batch};
use scp_core::selection::{
    binomial, representative_score, select_templates, ReverseTable, ScoreSummary, SearchMode,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bits(v: f64) -> u64 {
    v.to_bits()
}

/// One randomized instance: every matching and scoring operation against nested loops.
fn oracle_instance(r: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let n = r.random_range(2..=4);
    let k = r.random_range(1..=4);
    let l_count = r.random_range(1..=3);
    let ds = with_landmarks(&random_dataset(r, n, 12, k), r, l_count);
    let maps: Vec<&FeatureMap> = ds.samples().iter().map(|s| &s.features).collect();
    let m = r.random_range(1..=n.min(3));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, r.random_range(0..=i));
    }
    idx.truncate(m);
    let tmpls: Vec<&FeatureMap> = idx.iter().map(|&i| maps[i]).collect();
    let target = maps[r.random_range(0..n)];
    let (w, h) = (target.width(), target.height());
    let px =
        |r: &mut rand_chacha::ChaCha8Rng| Pixel::new(r.random_range(0..w), r.random_range(0..h));

    let (pa, pb) = (px(r), px(r));
    if bits(point_similarity(tmpls[0], pa, target, pb).unwrap())
        != bits(naive_point_similarity(tmpls[0], pa, target, pb))
    {
        return Err("point_similarity".into());
    }
    let pts: Vec<Pixel> = (0..m).map(|_| px(r)).collect();
    let single = match_forward(tmpls[0], pts[0], target).unwrap();
    let want = naive_forward_multi(&tmpls[..1], &pts[..1], target);
    if (single.location, bits(single.similarity)) != (want.1, bits(want.2)) {
        return Err("match_forward".into());
    }
    let multi = match_forward_multi(&tmpls, &pts, target).unwrap();
    let want = naive_forward_multi(&tmpls, &pts, target);
    if (multi.template_index, multi.location, bits(multi.similarity))
        != (want.0, want.1, bits(want.2))
    {
        return Err("match_forward_multi".into());
    }
    let s = &ds.samples()[0];
    let batch = match_reverse_batch(&s.features, &s.keypoints, &tmpls).unwrap();
    for (res, q) in batch.iter().zip(s.keypoints.pixels()) {
        let want = naive_reverse(&s.features, q, &tmpls);
        let single = match_reverse(&s.features, q, &tmpls).unwrap();
        if (res.template_index, res.location, bits(res.similarity))
            != (want.0, want.1, bits(want.2))
            || *res != single
        {
            return Err("match_reverse".into());
        }
    }
    let ids: Vec<&str> = idx.iter().map(|&i| ds.samples()[i].id()).collect();
    let canonical = representative_score(&ids, &ds).unwrap();
    let naive = naive_representative(&ds, &idx);
    let table = ReverseTable::build(&ds)
        .unwrap()
        .combination_score(&ds, &idx);
    if bits(canonical.score) != bits(naive) || table != canonical {
        return Err("representative_score".into());
    }
    let lm = landmark_representative_score(&ids, &ds).unwrap().score;
    if bits(lm) != bits(naive_landmark_representative(&ds, &idx)) {
        return Err("landmark_representative_score".into());
    }
    let labeled: Vec<(&FeatureMap, &LandmarkSet)> = idx
        .iter()
        .map(|&i| (maps[i], ds.samples()[i].landmarks.as_ref().unwrap()))
        .collect();
    let pred = detect_landmarks(&labeled, target).unwrap();
    for (l, p) in pred.points.iter().enumerate() {
        let lpts: Vec<Pixel> = labeled
            .iter()
            .map(|(f, lm)| lm.points[l].to_pixel(f.width(), f.height()))
            .collect();
        if *p != Point2::from(naive_forward_multi(&tmpls, &lpts, target).1) {
            return Err("detect_landmarks".into());
        }
    }
    Ok(())
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(0xACCE);
    let instances = 1000;
    for i in 0..instances {
        if let Err(op) = oracle_instance(&mut r) {
            return outcome(
                false,
                format!("{op} differs from nested loops at instance {i}"),
            );
        }
    }
    let t = start.elapsed();
    outcome(
        t < Duration::from_secs(60),
        format!(
            "{instances} instances bit-exact in {:.1} s (limit 60 s)",
            t.as_secs_f64()
        ),
    )
}

/// Full enumeration ranked by (score desc, sorted ids asc).
fn enumerate(ds: &Dataset, m: usize) -> Vec<(f64, Vec<String>)> {
    let mut all: Vec<(f64, Vec<String>)> = naive_subsets(ds.len(), m)
        .into_iter()
        .map(|s| {
            let mut ids: Vec<String> = s
                .iter()
                .map(|&i| ds.samples()[i].id().to_string())
                .collect();
            ids.sort();
            (naive_representative(ds, &s), ids)
        })
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    all
}

fn exhaustive_sampled_consistency() -> Outcome {
    for seed in 0..20u64 {
        let mut r = rng(1000 + seed);
        let ds = random_dataset(&mut r, 10, 10, 4);
        for m in 1..=3 {
            let full = enumerate(&ds, m);
            let c = binomial(10, m).unwrap() as usize;
            let scores: Vec<f64> = naive_subsets(10, m)
                .iter()
                .map(|s| naive_representative(&ds, s))
                .collect();
            let summary = ScoreSummary::from_scores(&scores);
            for budget in [c, c + 1, 100_000] {
                let rep = select_templates(&ds, m, budget, seed).unwrap();
                let top: Vec<(u64, &Vec<String>)> = rep
                    .top
                    .iter()
                    .map(|t| (bits(t.score), &t.template_ids))
                    .collect();
                let want: Vec<(u64, &Vec<String>)> = full
                    .iter()
                    .take(20)
                    .map(|(s, ids)| (bits(*s), ids))
                    .collect();
                let same = rep.search_mode == SearchMode::Exhaustive
                    && rep.trials_evaluated == c
                    && rep.best.template_ids == full[0].1
                    && bits(rep.best.score) == bits(full[0].0)
                    && top == want
                    && bits(rep.all_scores_summary.mean) == bits(summary.mean)
                    && bits(rep.all_scores_summary.std) == bits(summary.std);
                if !same {
                    return outcome(
                        false,
                        format!("seed {seed}, m={m}, budget {budget}: differs from enumeration"),
                    );
                }
            }
        }
    }
    outcome(
        true,
        "N=10, m in {1,2,3}, 20 seeds, budgets C(N,m), C(N,m)+1, 100000",
    )
}

struct SweepStats {
    beats: usize,
    anticorrelated: usize,
    correlated: usize,
    spread: usize,
    elapsed: Duration,
    lines: Vec<String>,
}

fn synthetic_sweeps() -> SweepStats {
    let start = Instant::now();
    let mut stats = SweepStats {
        beats: 0,
        anticorrelated: 0,
        correlated: 0,
        spread: 0,
        elapsed: Duration::ZERO,
        lines: Vec::new(),
    };
    for seed in 0..10u64 {
        let cfg = BenchConfig {
            spec: SyntheticDatasetSpec {
                n_images: 40,
                image_size: 64,
                n_landmarks: 5,
                seed,
                ..Default::default()
            },
            keypoints: 100,
            ..Default::default()
        };
        let o = run_bench(&cfg).expect("bench runs");
        let std1 = o.table.random_baseline(1, 200, seed).unwrap().std;
        let std5 = o.table.random_baseline(5, 200, seed).unwrap().std;
        stats.beats += usize::from(o.selected_mre_mm <= o.candidate_mean_mre_mm);
        stats.anticorrelated += usize::from(o.cc_keypoint_mre.is_some_and(|c| c < -0.3));
        stats.correlated += usize::from(o.cc_keypoint_landmark.is_some_and(|c| c > 0.2));
        stats.spread += usize::from(std5 < std1);
        let cc = |c: Option<f64>| c.map_or("n/a".to_string(), |v| format!("{v:+.3}"));
        stats.lines.push(format!(
            "      seed {seed}: selected {:.3} mm vs mean {:.3} mm, CC(R,MRE) {}, CC(Rkp,Rlm) {}, std m=1 {:.4} m=5 {:.4}",
            o.selected_mre_mm,
            o.candidate_mean_mre_mm,
            cc(o.cc_keypoint_mre),
            cc(o.cc_keypoint_landmark),
            std1,
            std5
        ));
    }
    stats.elapsed = start.elapsed();
    stats
}

fn subset_monotonicity() -> Outcome {
    let mut r = rng(0x5B5E7);
    let mut worst = f64::NEG_INFINITY;
    let mut draws = 0;
    while draws < 500 {
        let ds = random_dataset(&mut r, 6, 9, 3);
        for _ in 0..10 {
            let size = r.random_range(1..=4);
            let mut pool: Vec<usize> = (0..6).collect();
            for i in (1..6).rev() {
                pool.swap(i, r.random_range(0..=i));
            }
            let s: Vec<&str> = pool[..size].iter().map(|&i| ds.samples()[i].id()).collect();
            let mut sup = s.clone();
            sup.push(ds.samples()[pool[size]].id());
            let a = representative_score(&s, &ds).unwrap().score;
            let b = representative_score(&sup, &ds).unwrap().score;
            worst = worst.max(a - b);
            draws += 1;
        }
    }
    outcome(
        worst <= 1e-9,
        format!("{draws} draws, max R(S) - R(S+t) = {worst:.3e} (tolerance 1e-9)"),
    )
}

fn header(height: u32, width: u32, layer_count: u8, channels: u16) -> Vec<u8> {
    let mut b = MAGIC.to_vec();
    b.extend_from_slice(&1u16.to_le_bytes());
    for s in [&b"img"[..], b"tag"] {
        b.extend_from_slice(&(s.len() as u16).to_le_bytes());
        b.extend_from_slice(s);
    }
    b.extend_from_slice(&height.to_le_bytes());
    b.extend_from_slice(&width.to_le_bytes());
    b.extend_from_slice(&0.1f64.to_le_bytes());
    b.push(layer_count);
    b.extend_from_slice(&channels.to_le_bytes());
    b
}

fn layer(b: &mut Vec<u8>, d: u16, rows: u32, cols: u32, values: usize) {
    b.extend_from_slice(&d.to_le_bytes());
    b.extend_from_slice(&rows.to_le_bytes());
    b.extend_from_slice(&cols.to_le_bytes());
    for _ in 0..values {
        b.extend_from_slice(&1.0f32.to_le_bytes());
    }
}

fn format_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(0x5C9F);
    for i in 0..200 {
        let (h, w) = (r.random_range(1..=24), r.random_range(1..=24));
        let layers = r.random_range(1..=4);
        let channels = r.random_range(1..=12);
        let fm = random_map(&mut r, &format!("map{i}"), h, w, layers, channels);
        let path = dir.path().join(format!("{i}.scpf"));
        write_feature_file(&fm, &path).unwrap();
        let back = read_feature_file(&path).unwrap();
        if back != fm || encode_feature_map(&back) != fs::read(&path).unwrap() {
            return outcome(false, format!("map {i} changed across write/read"));
        }
    }

    let good = {
        let mut b = header(2, 2, 1, 1);
        layer(&mut b, 1, 2, 2, 4);
        b
    };
    let mut fixtures: Vec<(&str, Vec<u8>, fn(&FormatError) -> bool)> = Vec::new();
    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"SCPX");
    fixtures.push(("bad magic", bad_magic, |e| {
        matches!(e, FormatError::BadMagic(_))
    }));
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    fixtures.push(("version 9", bad_version, |e| {
        matches!(e, FormatError::UnsupportedVersion(9))
    }));
    fixtures.push(("header cut short", good[..12].to_vec(), |e| {
        matches!(e, FormatError::Truncated(_))
    }));
    fixtures.push(("values cut short", good[..good.len() - 2].to_vec(), |e| {
        matches!(e, FormatError::Truncated(_))
    }));
    let mut dims = header(4, 4, 2, 1);
    layer(&mut dims, 1, 4, 4, 16);
    layer(&mut dims, 2, 3, 2, 6);
    fixtures.push(("layer dims off the doubling rule", dims, |e| {
        matches!(e, FormatError::Structure(_))
    }));
    let mut factor = header(4, 4, 2, 1);
    layer(&mut factor, 1, 4, 4, 16);
    layer(&mut factor, 3, 2, 2, 4);
    fixtures.push(("downsample 3 after 1", factor, |e| {
        matches!(e, FormatError::Structure(_))
    }));
    fixtures.push(("zero layers", header(2, 2, 0, 1), |e| {
        matches!(e, FormatError::Structure(_))
    }));
    let mut trailing = good.clone();
    trailing.push(0);
    fixtures.push(("trailing byte", trailing, |e| {
        matches!(e, FormatError::Structure(_))
    }));
    let mut huge = header(u32::MAX, u32::MAX, 1, u16::MAX);
    layer(&mut huge, 1, u32::MAX, u32::MAX, 0);
    fixtures.push(("size product overflows", huge, |e| {
        matches!(e, FormatError::DimensionOverflow(_))
    }));
    let mut utf8 = good.clone();
    utf8[8] = 0xFF;
    fixtures.push(("invalid UTF-8 id", utf8, |e| {
        matches!(e, FormatError::Utf8(_))
    }));

    for (name, bytes, expected) in &fixtures {
        match decode_feature_map(bytes) {
            Err(ScpError::Format(e)) if expected(&e) => {}
            other => return outcome(false, format!("fixture {name:?} gave {other:?}")),
        }
    }
    outcome(
        true,
        format!(
            "200 random maps bit-exact; {} malformed fixtures rejected with their error classes",
            fixtures.len()
        ),
    )
}

/// Every file under `dir` with its bytes, keyed by relative path.
fn snapshot(dir: &Path, prefix: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            snapshot(&path, prefix, out);
        } else {
            let rel = path
                .strip_prefix(prefix)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            out.insert(rel, fs::read(&path).unwrap());
        }
    }
}

fn cli_run(jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let manifest = data.join("manifest.txt");
    let m = manifest.to_str().unwrap();
    let d = data.to_str().unwrap();
    let report = data.join("select.txt");
    let eval = data.join("eval.txt");
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "bench",
            "--n-images",
            "6",
            "--keypoints",
            "20",
            "--seed",
            "5",
            "--export",
            d,
        ],
        vec!["extract", "--manifest", m],
        vec![
            "keypoints",
            "--manifest",
            m,
            "--detector",
            "random",
            "--keypoints",
            "30",
            "--seed",
            "11",
            "--out",
            "kp_random",
        ],
        vec![
            "keypoints",
            "--manifest",
            m,
            "--detector",
            "grid",
            "--out",
            "kp_grid",
        ],
        vec!["keypoints", "--manifest", m],
        vec![
            "select",
            "--manifest",
            m,
            "-m",
            "3",
            "--budget",
            "7",
            "--seed",
            "4",
            "--report",
            report.to_str().unwrap(),
        ],
        vec!["select", "--manifest", m, "-m", "2", "--seed", "4"],
        vec![
            "evaluate",
            "--manifest",
            m,
            "--templates",
            "img001,img004",
            "--report",
            eval.to_str().unwrap(),
        ],
    ];
    let mut out = BTreeMap::new();
    for (i, args) in steps.iter().enumerate() {
        let res = Command::new(env!("CARGO_BIN_EXE_scp"))
            .args(args)
            .args(["--jobs", jobs])
            .output()
            .map_err(|e| e.to_string())?;
        if !res.status.success() {
            return Err(format!(
                "{args:?} failed: {}",
                String::from_utf8_lossy(&res.stderr)
            ));
        }
        out.insert(format!("stdout {i} {}", args[0]), res.stdout);
    }
    snapshot(&data, &data, &mut out);
    Ok(out)
}

fn cli_determinism() -> Outcome {
    let mut runs = Vec::new();
    for jobs in ["1", "4", "1", "4"] {
        match cli_run(jobs) {
            Ok(s) => runs.push(s),
            Err(e) => return outcome(false, e),
        }
    }
    let reference = &runs[0];
    for (i, run) in runs.iter().enumerate().skip(1) {
        if run != reference {
            let diff = reference
                .keys()
                .chain(run.keys())
                .find(|k| reference.get(*k) != run.get(*k))
                .cloned()
                .unwrap_or_default();
            return outcome(false, format!("run {i} differs at {diff}"));
        }
    }
    outcome(true, format!("bench, extract, keypoints x3, select x2, evaluate: {} outputs identical over --jobs 1,4 twice", reference.len()))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name, o: Outcome| {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((name, o));
    };

    report("oracle equivalence", oracle_equivalence());
    report(
        "exhaustive-sampled consistency",
        exhaustive_sampled_consistency(),
    );

    let sweeps = synthetic_sweeps();
    for line in &sweeps.lines {
        println!("{line}");
    }
    let secs = sweeps.elapsed.as_secs_f64();
    report(
        "selection beats random",
        outcome(
            sweeps.beats >= 8 && secs < 300.0,
            format!(
                "{}/10 seeds (need 8), sweeps took {secs:.1} s (limit 300 s)",
                sweeps.beats
            ),
        ),
    );
    report(
        "similarity-MRE anticorrelation",
        outcome(
            sweeps.anticorrelated >= 8,
            format!("CC < -0.3 in {}/10 seeds (need 8)", sweeps.anticorrelated),
        ),
    );
    report(
        "keypoint-landmark score correlation",
        outcome(
            sweeps.correlated >= 8,
            format!("CC > 0.2 in {}/10 seeds (need 8)", sweeps.correlated),
        ),
    );
    report(
        "diminishing spread",
        outcome(
            sweeps.spread >= 9,
            format!("std(m=5) < std(m=1) in {}/10 seeds (need 9)", sweeps.spread),
        ),
    );
    report("subset monotonicity", subset_monotonicity());
    report("format round trip", format_round_trip());
    report("CLI determinism", cli_determinism());

    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| *n)
        .collect();
    println!(
        "{}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
