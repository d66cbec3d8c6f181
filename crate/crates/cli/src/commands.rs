use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use glf_core::classify::{
    compare_methods, eigen_sweep, evaluate_aus, evaluate_expressions, shuffle_expressions, ClassifierConfig,
    ExpressionResult, Kernel, SvmParams,
};
use glf_core::data::{load_manifest, save_manifest, scan_bu3dfe_dir, synth_generate};
use glf_core::features::{read_features, write_features, FeatureFormat, FeatureMatrix, FeatureMode, Method};
use glf_core::labels::Expression;
use glf_core::mesh::load_landmarks;
use glf_core::patch::{PatchConfig, PatchFrame};
use glf_core::pipeline::{
    shared_basis, Extraction, FeatureExtractor, MissingPolicy, PatchManifest, ScanFailure,
};
use glf_core::report::{ExperimentReport, ReportError, Task};
use glf_core::spectral::{config_hash, load_basis, save_basis};
use serde::Serialize;

use crate::config::RunConfig;
use crate::tables;
use crate::{
    BasisArgs, ClassifierArg, Cli, CliError, Command, EvaluateArgs, FeaturesArgs, FrameArg, IngestArgs, KernelArg,
    MethodArg, MissingArg, ModeArg, Outcome, PatchArgs, PatchesArgs, SynthArgs, TaskArg,
};

type CliResult = Result<Outcome, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Configuration problems found by core validation are usage errors.
fn checked(r: glf_core::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| usage(e.to_string()))
}

pub fn run(cli: Cli) -> CliResult {
    let mut run = RunConfig::load(cli.config.as_deref())?;
    run.apply_seed(cli.seed);
    if cli.jobs.is_some() {
        run.jobs = cli.jobs;
    }
    if let Some(jobs) = run.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| usage(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => synth(run, a),
        Command::Ingest(a) => ingest(a),
        Command::Basis(a) => basis(run, a),
        Command::Patches(a) => patches(run, a),
        Command::Features(a) => features(run, a),
        Command::Evaluate(a) => evaluate(run, a),
    }
}

fn synth(mut run: RunConfig, a: SynthArgs) -> CliResult {
    let cfg = &mut run.synth;
    if let Some(v) = a.subjects {
        cfg.subjects = v;
    }
    if let Some(v) = a.levels {
        cfg.levels = v;
    }
    if let Some(v) = a.amplitude {
        cfg.amplitude_scale = v;
    }
    if let Some(v) = a.resolution {
        cfg.resolution_mm = v;
    }
    if let Some(v) = a.jitter {
        cfg.jitter_mm = v;
    }
    if let Some(codes) = &a.expressions {
        cfg.expressions = codes
            .iter()
            .map(|c| c.parse::<Expression>().map_err(|e| usage(e.to_string())))
            .collect::<Result<_, _>>()?;
    }
    checked(cfg.validate())?;

    let t = Instant::now();
    fs::create_dir_all(&a.out).map_err(|e| CliError::Run(glf_core::Error::Io { path: a.out.clone(), source: e }))?;
    let manifest = synth_generate(cfg, &a.out)?;
    write_json(&a.out.join("run_config.json"), &run)?;
    println!(
        "{}",
        tables::key_values(&[
            ("scans", manifest.len().to_string()),
            ("subjects", run.synth.subjects.to_string()),
            (
                "expressions",
                run.synth.expressions.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
            ),
            ("levels", run.synth.levels.to_string()),
            ("seed", run.synth.seed.to_string()),
            ("manifest", a.out.join("manifest.csv").display().to_string()),
            ("seconds", format!("{:.1}", t.elapsed().as_secs_f64())),
        ])
    );
    Ok(Outcome::Complete)
}

fn ingest(a: IngestArgs) -> CliResult {
    let (manifest, skipped) = scan_bu3dfe_dir(&a.dir, &a.ext)?;
    save_manifest(&manifest, &a.out)?;
    for s in &skipped {
        log::info!("skipped {s}");
    }
    println!(
        "{}",
        tables::key_values(&[
            ("scans", manifest.len().to_string()),
            ("skipped files", skipped.len().to_string()),
            ("manifest", a.out.display().to_string()),
        ])
    );
    Ok(Outcome::Complete)
}

fn patch_config(base: PatchConfig, a: &PatchArgs) -> Result<PatchConfig, CliError> {
    let mut cfg = base;
    if let Some(v) = a.lambda_min {
        cfg.lambda_min = v;
    }
    if let Some(v) = a.lambda_max {
        cfg.lambda_max = v;
    }
    if let Some(v) = a.curves {
        cfg.curves = v;
    }
    if let Some(v) = a.samples {
        cfg.samples = v;
    }
    checked(cfg.validate())?;
    Ok(cfg)
}

fn frame(f: FrameArg) -> PatchFrame {
    match f {
        FrameArg::Translated => PatchFrame::Translated,
        FrameArg::NormalAligned => PatchFrame::NormalAligned,
    }
}

fn basis(run: RunConfig, a: BasisArgs) -> CliResult {
    let cfg = patch_config(run.extraction.patch, &a.patch)?;
    let n = cfg.vertex_count();
    let k = a.k.unwrap_or(n);
    if k == 0 || k > n {
        return Err(usage(format!("--k must be in 1..={n} for this patch configuration, got {k}")));
    }
    let t = Instant::now();
    let basis = shared_basis(&cfg, k)?;
    save_basis(&basis, config_hash(cfg.curves, cfg.samples), &a.out)?;
    let head: Vec<String> = basis.eigenvalues.iter().take(5).map(|v| format!("{v:.6}")).collect();
    println!(
        "{}",
        tables::key_values(&[
            ("dimension", n.to_string()),
            ("eigenpairs", k.to_string()),
            ("smallest eigenvalues", head.join(" ")),
            ("config hash", format!("{:016x}", config_hash(cfg.curves, cfg.samples))),
            ("file", a.out.display().to_string()),
            ("seconds", format!("{:.2}", t.elapsed().as_secs_f64())),
        ])
    );
    Ok(Outcome::Complete)
}

/// Landmarks to use: explicit list, or those of the first scan.
fn landmark_labels(explicit: Option<Vec<String>>, first_file: Option<&Path>) -> Result<Vec<String>, CliError> {
    if let Some(l) = explicit {
        if l.is_empty() {
            return Err(usage("--landmarks is empty"));
        }
        return Ok(l);
    }
    match first_file {
        Some(p) => Ok(load_landmarks(p)?.labels()),
        None => Err(usage("the manifest lists no scans")),
    }
}

fn patches(run: RunConfig, a: PatchesArgs) -> CliResult {
    let mut cfg = run.extraction.clone();
    cfg.patch = patch_config(cfg.patch, &a.patch)?;
    if let Some(f) = a.frame {
        cfg.frame = frame(f);
    }
    // cutting patches needs no Laplacian basis
    cfg.method = Method::ShapeDna;
    cfg.k = 1;
    checked(cfg.validate())?;
    let manifest = load_manifest(&a.manifest)?;
    let labels = landmark_labels(a.landmarks, manifest.records.first().map(|r| r.landmarks.as_path()))?;
    let t = Instant::now();
    let out = FeatureExtractor::new(cfg)?.write_patch_archives(&manifest.records, &labels, &a.out)?;
    let missing: usize = out.records.iter().map(|r| r.missing).sum();
    println!(
        "{}",
        tables::key_values(&[
            ("scans", manifest.len().to_string()),
            ("archives", out.records.len().to_string()),
            ("failed scans", out.failed.len().to_string()),
            ("missing patches", missing.to_string()),
            ("index", a.out.join(glf_core::pipeline::PATCH_MANIFEST).display().to_string()),
            ("seconds", format!("{:.1}", t.elapsed().as_secs_f64())),
        ])
    );
    print_failures(&out.failed);
    Ok(if out.failed.is_empty() { Outcome::Complete } else { Outcome::Partial })
}

fn print_failures(failed: &[ScanFailure]) {
    for f in failed {
        eprintln!("failed: scan {} ({} {} {}): {}", f.index, f.subject, f.expression, f.intensity, f.error);
    }
}

#[derive(Serialize)]
struct ExtractionErrors<'a> {
    failed_scans: &'a [ScanFailure],
    dropped: &'a [usize],
    missing_patches: usize,
}

fn errors_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".errors.json");
    PathBuf::from(s)
}

fn features(run: RunConfig, a: FeaturesArgs) -> CliResult {
    let mut cfg = run.extraction.clone();
    cfg.patch = patch_config(cfg.patch, &a.patch)?;
    if let Some(m) = a.method {
        cfg.method = match m {
            MethodArg::Glf => Method::Glf,
            MethodArg::Shapedna => Method::ShapeDna,
        };
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Coords => FeatureMode::Coords,
            ModeArg::Norms => FeatureMode::Norms,
        };
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if a.skip_constant {
        cfg.skip_constant = true;
    }
    if let Some(m) = a.missing {
        cfg.missing = match m {
            MissingArg::ZeroFill => MissingPolicy::ZeroFill,
            MissingArg::Drop => MissingPolicy::DropSample,
        };
    }
    if let Some(f) = a.frame {
        cfg.frame = frame(f);
    }
    checked(cfg.validate())?;
    if a.basis.is_some() && cfg.method != Method::Glf {
        return Err(usage("--basis only applies to --method glf"));
    }

    let t = Instant::now();
    let extractor = match &a.basis {
        Some(path) => {
            let basis = load_basis(path, cfg.config_hash())?;
            FeatureExtractor::with_basis(cfg.clone(), basis).map_err(|e| usage(e.to_string()))?
        }
        None => FeatureExtractor::new(cfg.clone())?,
    };
    let (scans, mut extraction) = if let Some(path) = &a.manifest {
        let manifest = load_manifest(path)?;
        let labels = landmark_labels(a.landmarks, manifest.records.first().map(|r| r.landmarks.as_path()))?;
        (manifest.len(), extractor.extract(&manifest.records, &labels)?)
    } else {
        let path = a.patches.as_ref().expect("clap requires an input");
        let pm = PatchManifest::load(path)?;
        let labels = a.landmarks.unwrap_or_else(|| pm.labels.clone());
        let mut ex: Extraction = extractor.extract_archives(&pm, &labels)?;
        let mut failed = pm.failed.clone();
        failed.append(&mut ex.failed_scans);
        ex.failed_scans = failed;
        (pm.records.len() + pm.failed.len(), ex)
    };
    extraction.failed_scans.sort_by_key(|f| f.index);

    write_features(&a.out, &extraction.matrix, FeatureFormat::from_path(&a.out))?;
    let err_path = errors_path(&a.out);
    let clean = extraction.failed_scans.is_empty() && extraction.dropped.is_empty() && extraction.missing_patches == 0;
    if clean {
        if err_path.exists() {
            fs::remove_file(&err_path).map_err(|e| CliError::Run(glf_core::Error::Io { path: err_path.clone(), source: e }))?;
        }
    } else {
        write_json(
            &err_path,
            &ExtractionErrors {
                failed_scans: &extraction.failed_scans,
                dropped: &extraction.dropped,
                missing_patches: extraction.missing_patches,
            },
        )?;
    }
    let m = &extraction.matrix;
    println!(
        "{}",
        tables::key_values(&[
            ("method", cfg.method.to_string()),
            ("scans", scans.to_string()),
            ("rows written", m.len().to_string()),
            ("columns", m.layout.len().to_string()),
            ("failed scans", extraction.failed_scans.len().to_string()),
            ("dropped scans", extraction.dropped.len().to_string()),
            ("missing patches", extraction.missing_patches.to_string()),
            ("file", a.out.display().to_string()),
            ("seconds", format!("{:.1}", t.elapsed().as_secs_f64())),
        ])
    );
    print_failures(&extraction.failed_scans);
    Ok(if extraction.failed_scans.is_empty() { Outcome::Complete } else { Outcome::Partial })
}

#[derive(Serialize)]
struct EvaluateEcho<'a> {
    command: &'static str,
    run: &'a RunConfig,
    features: &'a Path,
    method: Method,
    mode: FeatureMode,
    feature_k: usize,
    task: Task,
    k: Option<usize>,
    sweep: Option<&'a [usize]>,
    compare: Option<&'a Path>,
    control_seed: Option<u64>,
}

fn eval_settings(run: &mut RunConfig, a: &EvaluateArgs) -> Result<(), CliError> {
    let ev = &mut run.evaluation;
    let svm_flags = a.kernel.is_some() || a.c.is_some() || a.gamma.is_some();
    match a.classifier {
        Some(ClassifierArg::Flda) => {
            if svm_flags {
                return Err(usage("--kernel, -C and --gamma only apply to --classifier svm"));
            }
            ev.classifier = ClassifierConfig::Flda;
        }
        Some(ClassifierArg::Svm) | None => {
            if a.classifier.is_none() && ev.classifier == ClassifierConfig::Flda {
                if svm_flags {
                    return Err(usage("the configured classifier is FLDA; pass --classifier svm to use SVM flags"));
                }
            } else {
                let mut p = match ev.classifier {
                    ClassifierConfig::Svm(p) => p,
                    ClassifierConfig::Flda => SvmParams::default(),
                };
                if let Some(k) = a.kernel {
                    p.kernel = match k {
                        KernelArg::Linear => Kernel::Linear,
                        KernelArg::Rbf => Kernel::Rbf { gamma: None },
                    };
                }
                if let Some(g) = a.gamma {
                    if p.kernel == Kernel::Linear {
                        return Err(usage("--gamma needs the rbf kernel"));
                    }
                    p.kernel = Kernel::Rbf { gamma: Some(g) };
                }
                if let Some(c) = a.c {
                    p.c = c;
                }
                ev.classifier = ClassifierConfig::Svm(p);
            }
        }
    }
    if let Some(f) = a.folds {
        ev.folds = f;
    }
    checked(ev.validate())?;

    let aus = a.task == TaskArg::Aus;
    if a.sweep.is_some() && (aus || a.compare.is_some() || a.control || a.k.is_some()) {
        return Err(usage("--sweep runs on its own: drop --task aus, --compare, --control and --k"));
    }
    if aus && (a.compare.is_some() || a.control) {
        return Err(usage("--compare and --control apply to the expression task"));
    }
    if let Some(s) = &a.sweep {
        if s.is_empty() || s.contains(&0) {
            return Err(usage("--sweep needs positive k values"));
        }
    }
    Ok(())
}

fn check_k(k: usize, data: &FeatureMatrix, what: &str) -> Result<(), CliError> {
    if k == 0 || k > data.layout.k {
        return Err(usage(format!("{what} {k} outside 1..={} stored in the feature file", data.layout.k)));
    }
    Ok(())
}

fn evaluate(mut run: RunConfig, a: EvaluateArgs) -> CliResult {
    eval_settings(&mut run, &a)?;
    let full = read_features(&a.features)?;
    if let Some(k) = a.k {
        check_k(k, &full, "--k")?;
    }
    for &k in a.sweep.iter().flatten() {
        check_k(k, &full, "sweep value")?;
    }
    let subjects: BTreeSet<&str> = full.samples.iter().map(|s| s.subject.as_str()).collect();
    if run.evaluation.folds > subjects.len() {
        return Err(usage(format!(
            "{} folds requested but the data has {} subjects",
            run.evaluation.folds,
            subjects.len()
        )));
    }
    let second = match &a.compare {
        Some(p) => {
            let m = read_features(p)?;
            let key = |f: &FeatureMatrix| {
                f.samples
                    .iter()
                    .map(|s| (s.subject.clone(), s.expression, s.intensity))
                    .collect::<Vec<_>>()
            };
            if key(&m) != key(&full) {
                return Err(usage("--compare file lists different scans or a different order"));
            }
            Some(m)
        }
        None => None,
    };

    let task = match (a.task, &a.sweep) {
        (_, Some(_)) => Task::Sweep,
        (TaskArg::Aus, None) => Task::Aus,
        (TaskArg::Expressions, None) => Task::Expressions,
    };
    let echo = EvaluateEcho {
        command: "evaluate",
        run: &run,
        features: &a.features,
        method: full.layout.method,
        mode: full.layout.mode,
        feature_k: full.layout.k,
        task,
        k: a.k,
        sweep: a.sweep.as_deref(),
        compare: a.compare.as_deref(),
        control_seed: a.control.then_some(a.control_seed),
    };
    let mut report = ExperimentReport::new(task, &echo)?;
    let data = match a.k {
        Some(k) => full.truncate_k(k)?,
        None => full.clone(),
    };
    let cfg = run.evaluation;
    let t = Instant::now();
    let fail = |report: &mut ExperimentReport, stage: &str, item: Option<String>, e: glf_core::Error| {
        eprintln!("{stage}: {e}");
        report.errors.push(ReportError {
            stage: stage.to_string(),
            item,
            message: e.to_string(),
        });
    };

    println!(
        "{} features ({}), {} scans, {} subjects, {}-fold identity-disjoint CV",
        data.layout.method,
        data.layout.len(),
        data.len(),
        subjects.len(),
        cfg.folds
    );
    match task {
        Task::Sweep => match eigen_sweep(&full, a.sweep.as_deref().unwrap_or_default(), &cfg) {
            Ok(table) => {
                println!("{}", tables::sweep(&table));
                report.sweep = Some(table);
            }
            Err(e) => fail(&mut report, "sweep", None, e),
        },
        Task::Aus => match evaluate_aus(&data, &cfg) {
            Ok(r) => {
                println!("{}", tables::aus(&r));
                report.aus = Some(r);
            }
            Err(e) => fail(&mut report, "aus", None, e),
        },
        Task::Expressions => {
            let main = match evaluate_expressions(&data, &cfg) {
                Ok(r) => {
                    print_expressions(&data.layout.method.to_string(), &r);
                    Some(r)
                }
                Err(e) => {
                    fail(&mut report, "expressions", None, e);
                    None
                }
            };
            if a.control {
                match evaluate_expressions(&shuffle_expressions(&data, a.control_seed), &cfg) {
                    Ok(r) => {
                        println!("shuffled-label control: {:.2}% +- {:.2}", r.mean_accuracy, r.std_accuracy);
                        report.control = Some(r);
                    }
                    Err(e) => fail(&mut report, "control", None, e),
                }
            }
            if let (Some(other), Some(first)) = (&second, &main) {
                let other = match a.k {
                    Some(k) if k <= other.layout.k => other.truncate_k(k),
                    _ => Ok(other.clone()),
                };
                let outcome = other.and_then(|o| {
                    let r = evaluate_expressions(&o, &cfg)?;
                    let name = |m: Method, path: &Path| {
                        let n = m.to_string();
                        if m == o.layout.method && m == data.layout.method {
                            format!("{n}:{}", path.display())
                        } else {
                            n
                        }
                    };
                    compare_methods(
                        &name(data.layout.method, &a.features),
                        first,
                        &name(o.layout.method, a.compare.as_deref().unwrap()),
                        &r,
                    )
                });
                match outcome {
                    Ok(c) => {
                        println!("{}", tables::comparison(&c));
                        report.comparison = Some(c);
                    }
                    Err(e) => fail(&mut report, "comparison", a.compare.as_ref().map(|p| p.display().to_string()), e),
                }
            }
            report.expressions = main;
        }
    }
    println!("evaluation took {:.1} s", t.elapsed().as_secs_f64());
    if let Some(out) = &a.out {
        report.save(out)?;
        println!("report written to {}", out.display());
    }
    Ok(if report.errors.is_empty() { Outcome::Complete } else { Outcome::Partial })
}

fn print_expressions(name: &str, r: &ExpressionResult) {
    println!("{name}: {:.2}% +- {:.2}", r.mean_accuracy, r.std_accuracy);
    println!("{}", tables::folds(r));
    println!("{}", tables::confusion(r));
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.into()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Run(glf_core::Error::Io { path: path.to_path_buf(), source: e }))
}
