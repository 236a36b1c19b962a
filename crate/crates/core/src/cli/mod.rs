//! The `scp` command line: extract, keypoints, select, evaluate, bench.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable or malformed input,
//! 3 missing prerequisite artifacts, 64 usage error.

pub mod manifest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::dataset::{Dataset, Sample};
use crate::error::ScpError;
use crate::eval::{
    detect_landmarks, evaluate, generate_synthetic_dataset, read_landmark_file, run_bench,
    write_landmark_file, BenchConfig, LandmarkSet, SyntheticDatasetSpec,
};
use crate::featcore::{
    extract_features_builtin, read_feature_file, read_pgm, write_feature_file, write_pgm16,
    DescriptorConfig, FeatureMap,
};
use crate::keypoints::{
    detect_keypoints, read_keypoint_file, write_keypoint_file, Detector, DEFAULT_KEYPOINTS,
    DEFAULT_MIN_DIST,
};
use crate::selection::{encode_report, select_templates, DEFAULT_BUDGET};
use manifest::{Manifest, ManifestEntry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "scp",
    version,
    about = "Choose representative templates for few-shot landmark detection"
)]
struct Cli {
    /// Dataset manifest (`scp-manifest v1`).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; falls back to SCP_JOBS, then to the core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DescriptorArgs {
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 1.0)]
    base_sigma: f64,
}

impl DescriptorArgs {
    fn config(&self) -> DescriptorConfig {
        DescriptorConfig {
            layers: self.layers,
            channels: self.channels,
            base_sigma: self.base_sigma,
        }
    }
}

#[derive(Debug, Args)]
struct DetectorArgs {
    /// dog_sift, grid or random.
    #[arg(long, default_value = "dog_sift")]
    detector: Detector,
    #[arg(long, default_value_t = DEFAULT_KEYPOINTS)]
    keypoints: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_DIST)]
    min_dist: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a feature file for every image.
    Extract {
        /// Output directory, relative to the manifest base.
        #[arg(long, default_value = "features")]
        out: String,
        #[command(flatten)]
        descriptor: DescriptorArgs,
    },
    /// Detect keypoints on every image.
    Keypoints {
        #[arg(long, default_value = "keypoints")]
        out: String,
        #[command(flatten)]
        detector: DetectorArgs,
    },
    /// Search the most representative template subset.
    Select {
        /// Number of templates.
        #[arg(short, long = "m", default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Where to write the selection report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Detect landmarks on the other images from chosen templates and score them.
    Evaluate {
        /// Comma-separated template ids.
        #[arg(long)]
        templates: String,
        /// Comma-separated SDR radii in millimetres.
        #[arg(long, default_value = "2,2.5,3,4")]
        radii: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the single-template sweep on a synthetic dataset.
    Bench {
        #[arg(long, default_value_t = 40)]
        n_images: usize,
        #[arg(long, default_value_t = 64)]
        image_size: usize,
        #[arg(long, default_value_t = 5)]
        landmarks: usize,
        #[arg(long, default_value_t = 0.1)]
        spacing_mm: f64,
        #[arg(long, default_value_t = 3.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value_t = 0.15)]
        outlier_fraction: f64,
        #[arg(long, default_value_t = 3.0)]
        outlier_factor: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        descriptor: DescriptorArgs,
        /// Also write the tables to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the synthetic images, landmarks and a manifest into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(Vec<String>),
    Missing(Vec<String>),
    Other(Vec<String>),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_IO,
            Failure::Missing(_) => EXIT_MISSING,
            Failure::Other(_) => EXIT_FAILURE,
        }
    }

    fn report(&self) {
        match self {
            Failure::Usage(msg) => eprintln!("usage error: {msg}"),
            Failure::Missing(gaps) => {
                eprintln!("missing artifacts:");
                for g in gaps {
                    eprintln!("  {g}");
                }
            }
            Failure::Io(msgs) | Failure::Other(msgs) => {
                for m in msgs {
                    eprintln!("error: {m}");
                }
            }
        }
    }

    /// Classifies a library error raised while handling `context`.
    fn from_error(e: ScpError, context: &str) -> Self {
        let msg = if context.is_empty() {
            e.to_string()
        } else {
            format!("{context}: {e}")
        };
        match e {
            ScpError::Argument(_) | ScpError::Config(_) => Failure::Usage(msg),
            ScpError::Io(_) | ScpError::Format(_) | ScpError::Parse(_) | ScpError::Image(_) => {
                Failure::Io(vec![msg])
            }
            _ => Failure::Other(vec![msg]),
        }
    }

    /// Merges per-file failures, I/O taking precedence.
    fn merge(failures: Vec<Failure>) -> Option<Failure> {
        let io = failures.iter().any(|f| matches!(f, Failure::Io(_)));
        let msgs: Vec<String> = failures
            .into_iter()
            .flat_map(|f| match f {
                Failure::Usage(m) => vec![m],
                Failure::Io(v) | Failure::Missing(v) | Failure::Other(v) => v,
            })
            .collect();
        match (msgs.is_empty(), io) {
            (true, _) => None,
            (false, true) => Some(Failure::Io(msgs)),
            (false, false) => Some(Failure::Other(msgs)),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            f.report();
            f.code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var("SCP_JOBS") {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Failure::Usage(format!("SCP_JOBS={v:?} is not a count")))?,
            ),
            _ => None,
        },
    };
    if jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

/// Writes to stdout; a reader that went away early (`| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn execute(cli: Cli) -> CliResult {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.jobs)? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::Other(vec![format!("thread pool: {e}")]))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> CliResult {
    let seed = cli.seed;
    match cli.command {
        Command::Bench {
            n_images,
            image_size,
            landmarks,
            spacing_mm,
            jitter,
            noise,
            outlier_fraction,
            outlier_factor,
            budget,
            detector,
            descriptor,
            out,
            export,
        } => {
            let cfg = BenchConfig {
                spec: SyntheticDatasetSpec {
                    n_images,
                    image_size,
                    n_landmarks: landmarks,
                    spacing_mm,
                    geometry_jitter_px: jitter,
                    intensity_noise: noise,
                    seed,
                    outlier_fraction,
                    outlier_jitter_factor: outlier_factor,
                },
                descriptor: descriptor.config(),
                detector: detector.detector,
                keypoints: detector.keypoints,
                min_dist: detector.min_dist,
                budget,
            };
            if let Some(dir) = export {
                export_synthetic(&cfg.spec, &dir)?;
            }
            cmd_bench(&cfg, out.as_deref())
        }
        command => {
            let path = cli
                .manifest
                .ok_or_else(|| Failure::Usage("--manifest is required".into()))?;
            let mut manifest = load_manifest(&path)?;
            match command {
                Command::Extract { out, descriptor } => {
                    cmd_extract(&mut manifest, &path, &out, &descriptor.config())
                }
                Command::Keypoints { out, detector } => {
                    cmd_keypoints(&mut manifest, &path, &out, &detector, seed)
                }
                Command::Select { m, budget, report } => {
                    cmd_select(&manifest, m, budget, seed, report.as_deref())
                }
                Command::Evaluate {
                    templates,
                    radii,
                    report,
                } => cmd_evaluate(&manifest, &templates, &radii, report.as_deref()),
                Command::Bench { .. } => unreachable!("handled above"),
            }
        }
    }
}

fn load_manifest(path: &Path) -> CliResult<Manifest> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(vec![format!("{}: {e}", path.display())]))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    Manifest::parse(&text, dir).map_err(|e| Failure::Io(vec![format!("{}: {e}", path.display())]))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure::Io(vec![format!("{}: {e}", path.display())]))
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure::Io(vec![format!("{}: {e}", path.display())]))
}

/// Runs `job` per manifest entry in parallel; the successes come back in entry order.
fn per_entry<T: Send>(
    manifest: &Manifest,
    job: impl Fn(usize) -> CliResult<T> + Sync + Send,
) -> CliResult<Vec<T>> {
    let results: Vec<CliResult<T>> = (0..manifest.entries.len())
        .into_par_iter()
        .map(job)
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(f) => failed.push(f),
        }
    }
    match Failure::merge(failed) {
        Some(f) => Err(f),
        None => Ok(ok),
    }
}

fn cmd_extract(
    manifest: &mut Manifest,
    path: &Path,
    out: &str,
    cfg: &DescriptorConfig,
) -> CliResult {
    cfg.validate().map_err(|e| Failure::from_error(e, ""))?;
    create_dir(&manifest.resolve(out))?;
    let spacing = manifest.spacing_mm;
    let m = &*manifest;
    let results: Vec<CliResult<String>> = (0..m.entries.len())
        .into_par_iter()
        .map(|i| {
            let e = &m.entries[i];
            let src = m.resolve(&e.image);
            let ctx = format!("{}: {}", e.id, src.display());
            let img =
                read_pgm(&src, &e.id, spacing).map_err(|err| Failure::from_error(err, &ctx))?;
            let fm = extract_features_builtin(&img, cfg)
                .map_err(|err| Failure::from_error(err, &e.id))?;
            let rel = format!("{out}/{}.scpf", e.id);
            let dst = m.resolve(&rel);
            write_feature_file(&fm, &dst)
                .map_err(|err| Failure::from_error(err, &dst.display().to_string()))?;
            Ok(rel)
        })
        .collect();
    let mut failures = Vec::new();
    for (entry, r) in manifest.entries.iter_mut().zip(results) {
        match r {
            Ok(rel) => {
                emit(&format!("{rel}\n"));
                entry.features = Some(rel);
            }
            Err(f) => failures.push(f),
        }
    }
    write_text(path, &manifest.encode())?;
    Failure::merge(failures).map_or(Ok(()), Err)
}

fn cmd_keypoints(
    manifest: &mut Manifest,
    path: &Path,
    out: &str,
    args: &DetectorArgs,
    seed: u64,
) -> CliResult {
    create_dir(&manifest.resolve(out))?;
    let spacing = manifest.spacing_mm;
    let m = &*manifest;
    let results: Vec<CliResult<String>> = (0..m.entries.len())
        .into_par_iter()
        .map(|i| {
            let e = &m.entries[i];
            let src = m.resolve(&e.image);
            let ctx = format!("{}: {}", e.id, src.display());
            let img =
                read_pgm(&src, &e.id, spacing).map_err(|err| Failure::from_error(err, &ctx))?;
            let set = detect_keypoints(
                &img,
                args.detector,
                args.keypoints,
                args.min_dist,
                seed.wrapping_add(i as u64),
            )
            .map_err(|err| Failure::from_error(err, &e.id))?;
            let rel = format!("{out}/{}.kp", e.id);
            let dst = m.resolve(&rel);
            write_keypoint_file(&set, &dst)
                .map_err(|err| Failure::from_error(err, &dst.display().to_string()))?;
            Ok(rel)
        })
        .collect();
    let mut failures = Vec::new();
    for (entry, r) in manifest.entries.iter_mut().zip(results) {
        match r {
            Ok(rel) => {
                emit(&format!("{rel}\n"));
                entry.keypoints = Some(rel);
            }
            Err(f) => failures.push(f),
        }
    }
    write_text(path, &manifest.encode())?;
    // A single bad argument fails every image the same way; report it once.
    if let Some(Failure::Usage(msg)) = failures.first() {
        return Err(Failure::Usage(msg.clone()));
    }
    Failure::merge(failures).map_or(Ok(()), Err)
}

#[derive(Clone, Copy, PartialEq)]
enum Artifact {
    Features,
    Keypoints,
    Landmarks,
}

impl Artifact {
    fn name(self) -> &'static str {
        match self {
            Artifact::Features => "features",
            Artifact::Keypoints => "keypoints",
            Artifact::Landmarks => "landmarks",
        }
    }
}

/// Lists every required artifact that is undeclared or absent on disk.
fn check_artifacts(manifest: &Manifest, needed: &[Artifact]) -> CliResult {
    let mut gaps = Vec::new();
    for e in &manifest.entries {
        for &a in needed {
            let declared = match a {
                Artifact::Features => &e.features,
                Artifact::Keypoints => &e.keypoints,
                Artifact::Landmarks => &e.landmarks,
            };
            match declared {
                None => gaps.push(format!("{}: no {} file", e.id, a.name())),
                Some(rel) if !manifest.resolve(rel).is_file() => gaps.push(format!(
                    "{}: {} file {} not found",
                    e.id,
                    a.name(),
                    manifest.resolve(rel).display()
                )),
                Some(_) => {}
            }
        }
    }
    if gaps.is_empty() {
        Ok(())
    } else {
        Err(Failure::Missing(gaps))
    }
}

fn load_artifact<T>(
    manifest: &Manifest,
    id: &str,
    rel: &Option<String>,
    read: impl Fn(&Path) -> crate::Result<T>,
) -> CliResult<T> {
    let path = manifest.resolve(rel.as_deref().expect("checked by check_artifacts"));
    read(&path).map_err(|e| Failure::from_error(e, &format!("{id}: {}", path.display())))
}

fn check_id(kind: &str, expected: &str, found: &str, path_hint: &str) -> CliResult {
    if expected == found {
        Ok(())
    } else {
        Err(Failure::Other(vec![format!(
            "{expected}: {kind} {path_hint} belongs to image {found:?}"
        )]))
    }
}

fn load_features(manifest: &Manifest, i: usize) -> CliResult<FeatureMap> {
    let e = &manifest.entries[i];
    let fm = load_artifact(manifest, &e.id, &e.features, read_feature_file)?;
    check_id(
        "feature file",
        &e.id,
        fm.source_image_id(),
        e.features.as_deref().unwrap_or(""),
    )?;
    Ok(fm)
}

fn load_landmarks(manifest: &Manifest, i: usize) -> CliResult<LandmarkSet> {
    let e = &manifest.entries[i];
    let lm = load_artifact(manifest, &e.id, &e.landmarks, read_landmark_file)?;
    check_id(
        "landmark file",
        &e.id,
        &lm.image_id,
        e.landmarks.as_deref().unwrap_or(""),
    )?;
    Ok(lm)
}

fn cmd_select(
    manifest: &Manifest,
    m: usize,
    budget: usize,
    seed: u64,
    report: Option<&Path>,
) -> CliResult {
    check_artifacts(manifest, &[Artifact::Features, Artifact::Keypoints])?;
    let samples = per_entry(manifest, |i| {
        let e = &manifest.entries[i];
        let features = load_features(manifest, i)?;
        let keypoints = load_artifact(manifest, &e.id, &e.keypoints, read_keypoint_file)?;
        check_id(
            "keypoint file",
            &e.id,
            &keypoints.image_id,
            e.keypoints.as_deref().unwrap_or(""),
        )?;
        Ok(Sample {
            features,
            keypoints,
            landmarks: None,
        })
    })?;
    let dataset = Dataset::new(samples).map_err(|e| Failure::from_error(e, "dataset"))?;
    let result =
        select_templates(&dataset, m, budget, seed).map_err(|e| Failure::from_error(e, ""))?;
    if let Some(path) = report {
        write_text(path, &encode_report(&result))?;
    }
    for id in &result.best.template_ids {
        emit(&format!("{id}\n"));
    }
    Ok(())
}

fn parse_radii(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|r| {
            r.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("radius {r:?} is not a number")))
        })
        .collect()
}

fn cmd_evaluate(
    manifest: &Manifest,
    templates: &str,
    radii: &str,
    report: Option<&Path>,
) -> CliResult {
    let radii = parse_radii(radii)?;
    let ids: Vec<&str> = templates
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if ids.is_empty() {
        return Err(Failure::Usage("--templates lists no ids".into()));
    }
    let mut tmpl_idx = Vec::with_capacity(ids.len());
    for id in &ids {
        let i = manifest
            .entries
            .iter()
            .position(|e| e.id == *id)
            .ok_or_else(|| Failure::Usage(format!("template {id:?} is not in the manifest")))?;
        if !tmpl_idx.contains(&i) {
            tmpl_idx.push(i);
        }
    }
    let targets: Vec<usize> = (0..manifest.entries.len())
        .filter(|i| !tmpl_idx.contains(i))
        .collect();
    if targets.is_empty() {
        return Err(Failure::Usage(
            "every image is a template; nothing to evaluate".into(),
        ));
    }
    check_artifacts(manifest, &[Artifact::Features, Artifact::Landmarks])?;
    let loaded = per_entry(manifest, |i| {
        Ok((load_features(manifest, i)?, load_landmarks(manifest, i)?))
    })?;
    let tmpls: Vec<(&FeatureMap, &LandmarkSet)> = tmpl_idx
        .iter()
        .map(|&i| (&loaded[i].0, &loaded[i].1))
        .collect();
    let preds = targets
        .par_iter()
        .map(|&i| {
            detect_landmarks(&tmpls, &loaded[i].0)
                .map_err(|e| Failure::from_error(e, &manifest.entries[i].id))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let gts: Vec<LandmarkSet> = targets.iter().map(|&i| loaded[i].1.clone()).collect();
    let result = evaluate(&preds, &gts, manifest.spacing_mm, &radii)
        .map_err(|e| Failure::from_error(e, ""))?;

    let mut out = String::from("scp-eval v1\n");
    let _ = writeln!(out, "templates\t{}", ids.join(","));
    let _ = writeln!(out, "images\t{}", targets.len());
    let _ = writeln!(out, "spacing_mm\t{}", manifest.spacing_mm);
    let _ = writeln!(out, "mre_mm\t{:.6}", result.mre_mm);
    out.push_str("\n[sdr]\nradius_mm\trate\n");
    for (r, rate) in &result.sdr {
        let _ = writeln!(out, "{r}\t{rate:.6}");
    }
    out.push_str("\n[errors]\nimage_id\tlandmark\tpred_x\tpred_y\terror_mm\n");
    let mut errs = result.per_landmark_errors_mm.iter();
    for p in &preds {
        for (l, pt) in p.points.iter().enumerate() {
            let err = errs.next().expect("one error per landmark");
            let _ = writeln!(out, "{}\t{l}\t{}\t{}\t{err:.6}", p.image_id, pt.x, pt.y);
        }
    }
    if let Some(path) = report {
        write_text(path, &out)?;
    }
    emit(&out);
    Ok(())
}

/// Lays out `images/<id>.pgm`, `landmarks/<id>.lm` and `manifest.txt` under `dir`.
fn export_synthetic(spec: &SyntheticDatasetSpec, dir: &Path) -> CliResult {
    let data = generate_synthetic_dataset(spec).map_err(|e| Failure::from_error(e, "bench"))?;
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("landmarks"))?;
    let mut manifest = Manifest {
        base: dir.to_path_buf(),
        root: None,
        spacing_mm: spec.spacing_mm,
        entries: Vec::with_capacity(data.len()),
    };
    for (img, lm) in &data {
        let image = format!("images/{}.pgm", img.id());
        let landmarks = format!("landmarks/{}.lm", img.id());
        let io = |e: ScpError| Failure::from_error(e, img.id());
        write_pgm16(img, &dir.join(&image)).map_err(io)?;
        write_landmark_file(lm, &dir.join(&landmarks)).map_err(io)?;
        manifest.entries.push(ManifestEntry {
            id: img.id().to_string(),
            image,
            features: None,
            keypoints: None,
            landmarks: Some(landmarks),
        });
    }
    write_text(&dir.join("manifest.txt"), &manifest.encode())
}

fn fmt_cc(cc: Option<f64>) -> String {
    cc.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

fn cmd_bench(cfg: &BenchConfig, out_path: Option<&Path>) -> CliResult {
    let outcome = run_bench(cfg).map_err(|e| Failure::from_error(e, "bench"))?;
    let s = &cfg.spec;
    let mut out = String::from("scp-bench v1\n");
    let _ = writeln!(out, "seed\t{}", s.seed);
    let _ = writeln!(out, "n_images\t{}", s.n_images);
    let _ = writeln!(out, "image_size\t{}", s.image_size);
    let _ = writeln!(out, "landmarks\t{}", s.n_landmarks);
    let _ = writeln!(out, "detector\t{}", cfg.detector);
    let _ = writeln!(out, "keypoints\t{}", cfg.keypoints);
    out.push_str("\n[sweep]\ntemplate_id\tr_keypoint\tr_landmark\tmean_mre_mm\n");
    for r in &outcome.rows {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}",
            r.template_id, r.r_keypoint, r.r_landmark, r.mean_mre_mm
        );
    }
    out.push_str("\n[summary]\n");
    let _ = writeln!(out, "cc_keypoint_mre\t{}", fmt_cc(outcome.cc_keypoint_mre));
    let _ = writeln!(
        out,
        "cc_keypoint_landmark\t{}",
        fmt_cc(outcome.cc_keypoint_landmark)
    );
    let _ = writeln!(
        out,
        "selected_template\t{}",
        outcome.selection.best.template_ids.join(",")
    );
    let _ = writeln!(out, "selected_score\t{:.6}", outcome.selection.best.score);
    let _ = writeln!(out, "selected_mre_mm\t{:.6}", outcome.selected_mre_mm);
    let _ = writeln!(
        out,
        "random_mre_mm_mean\t{:.6}",
        outcome.candidate_mean_mre_mm
    );
    let _ = writeln!(
        out,
        "random_mre_mm_std\t{:.6}",
        outcome.candidate_std_mre_mm
    );
    if let Some(path) = out_path {
        write_text(path, &out)?;
    }
    emit(&out);
    Ok(())
}
