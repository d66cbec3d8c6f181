//! Scan-to-feature extraction shared by the command line and the bindings.

use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::LabeledSample;
use crate::data::{ManifestRecord, SynthScan};
use crate::error::{Error, Result};
use crate::features::{
    assemble_face, glf_norms, glf_project_range, FaceFeatureVector, FeatureLayout, FeatureMatrix, FeatureMode, Method,
};
use crate::labels::Expression;
use crate::mesh::{load_landmarks, load_mesh, LandmarkSet, MeshFormat, TriangleMesh};
use crate::patch::{
    build_patch, canonical_connectivity, read_patch_archive, write_patch_archive, CanonicalPatch, PatchConfig,
    PatchFrame, PatchOptions,
};
use crate::spectral::{config_hash, eig_sym, graph_laplacian, shape_dna_with, MassScheme, SpectralBasis};

/// What to do with a scan that has at least one missing patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    ZeroFill,
    DropSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    pub patch: PatchConfig,
    pub frame: PatchFrame,
    pub reference_axis: Vector3<f64>,
    pub method: Method,
    pub mode: FeatureMode,
    /// Eigenpairs per patch.
    pub k: usize,
    /// Drop the constant graph-Laplacian eigenvector from GLF features.
    pub skip_constant: bool,
    pub mass: MassScheme,
    pub missing: MissingPolicy,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            patch: PatchConfig::default(),
            frame: PatchFrame::default(),
            reference_axis: Vector3::x(),
            method: Method::Glf,
            mode: FeatureMode::Coords,
            k: 50,
            skip_constant: false,
            mass: MassScheme::default(),
            missing: MissingPolicy::default(),
        }
    }
}

impl ExtractionConfig {
    fn first(&self) -> usize {
        usize::from(self.method == Method::Glf && self.skip_constant)
    }

    pub fn validate(&self) -> Result<()> {
        self.patch.validate()?;
        let n = self.patch.vertex_count();
        if self.k == 0 || self.first() + self.k > n {
            return Err(Error::Config(format!(
                "k = {} does not fit a {n}-vertex patch",
                self.k
            )));
        }
        if self.reference_axis.norm() < 1e-12 {
            return Err(Error::Config("reference axis must be non-zero".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> u64 {
        config_hash(self.patch.curves, self.patch.samples)
    }
}

/// Smallest `k` eigenpairs of the graph Laplacian on the canonical connectivity.
pub fn shared_basis(cfg: &PatchConfig, k: usize) -> Result<SpectralBasis> {
    cfg.validate()?;
    let faces = canonical_connectivity(cfg);
    eig_sym(&graph_laplacian(&faces, cfg.vertex_count())?, k)
}

/// Labels and geometry of one scan.
pub trait ScanSource: Sync {
    fn subject(&self) -> &str;
    fn expression(&self) -> Expression;
    fn intensity(&self) -> u8;
    fn aus(&self) -> &[u8];
    fn load(&self) -> Result<(Cow<'_, TriangleMesh>, Cow<'_, LandmarkSet>)>;
}

impl ScanSource for SynthScan {
    fn subject(&self) -> &str {
        &self.subject
    }
    fn expression(&self) -> Expression {
        self.expression
    }
    fn intensity(&self) -> u8 {
        self.intensity
    }
    fn aus(&self) -> &[u8] {
        &self.aus
    }
    fn load(&self) -> Result<(Cow<'_, TriangleMesh>, Cow<'_, LandmarkSet>)> {
        Ok((Cow::Borrowed(&self.mesh), Cow::Borrowed(&self.landmarks)))
    }
}

impl ScanSource for ManifestRecord {
    fn subject(&self) -> &str {
        &self.subject
    }
    fn expression(&self) -> Expression {
        self.expression
    }
    fn intensity(&self) -> u8 {
        self.intensity
    }
    fn aus(&self) -> &[u8] {
        &self.aus
    }
    fn load(&self) -> Result<(Cow<'_, TriangleMesh>, Cow<'_, LandmarkSet>)> {
        let format = MeshFormat::from_path(&self.mesh)
            .ok_or_else(|| Error::Config(format!("unknown mesh format for {}", self.mesh.display())))?;
        let mesh = load_mesh(&self.mesh, format)?;
        let landmarks = load_landmarks(&self.landmarks)?;
        Ok((Cow::Owned(mesh), Cow::Owned(landmarks)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchFailure {
    pub landmark: String,
    pub error: String,
}

/// Features of one scan plus the patches that could not be extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFeatures {
    pub vector: FaceFeatureVector,
    pub failures: Vec<PatchFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub index: usize,
    pub subject: String,
    pub expression: Expression,
    pub intensity: u8,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub matrix: FeatureMatrix,
    /// Scans that could not be loaded or processed at all.
    pub failed_scans: Vec<ScanFailure>,
    /// Scans left out because of missing patches under [`MissingPolicy::DropSample`].
    pub dropped: Vec<usize>,
    /// Missing patches across the kept scans.
    pub missing_patches: usize,
}

impl Extraction {
    pub fn is_complete(&self) -> bool {
        self.failed_scans.is_empty()
    }
}

pub struct FeatureExtractor {
    cfg: ExtractionConfig,
    faces: Vec<[usize; 3]>,
    basis: Option<SpectralBasis>,
}

impl FeatureExtractor {
    /// Computes the shared basis when GLF features are requested.
    pub fn new(cfg: ExtractionConfig) -> Result<Self> {
        cfg.validate()?;
        let basis = match cfg.method {
            Method::Glf => Some(shared_basis(&cfg.patch, cfg.first() + cfg.k)?),
            Method::ShapeDna => None,
        };
        Ok(Self {
            faces: canonical_connectivity(&cfg.patch),
            cfg,
            basis,
        })
    }

    /// Uses a precomputed basis, which must match the patch size and hold
    /// enough eigenpairs.
    pub fn with_basis(cfg: ExtractionConfig, basis: SpectralBasis) -> Result<Self> {
        cfg.validate()?;
        let need = cfg.first() + cfg.k;
        if basis.dimension() != cfg.patch.vertex_count() || basis.len() < need {
            return Err(Error::Config(format!(
                "basis is {}x{}, need {} rows and at least {need} columns",
                basis.dimension(),
                basis.len(),
                cfg.patch.vertex_count()
            )));
        }
        Ok(Self {
            faces: canonical_connectivity(&cfg.patch),
            cfg,
            basis: Some(basis),
        })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.cfg
    }

    pub fn basis(&self) -> Option<&SpectralBasis> {
        self.basis.as_ref()
    }

    pub fn connectivity(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn layout(&self, landmarks: Vec<String>) -> FeatureLayout {
        FeatureLayout {
            method: self.cfg.method,
            mode: self.cfg.mode,
            k: self.cfg.k,
            first: self.cfg.first(),
            landmarks,
        }
    }

    fn block_len(&self) -> usize {
        self.layout(Vec::new()).block_len()
    }

    pub fn patch(&self, mesh: &TriangleMesh, label: &str, apex: &nalgebra::Point3<f64>) -> Result<CanonicalPatch> {
        let opts = PatchOptions {
            frame: self.cfg.frame,
            reference_axis: self.cfg.reference_axis,
        };
        build_patch(mesh, label, apex, &self.cfg.patch, &opts)
    }

    pub fn patch_features(&self, patch: &CanonicalPatch) -> Result<Vec<f64>> {
        match self.cfg.method {
            Method::Glf => {
                let basis = self.basis.as_ref().expect("GLF extractors always hold a basis");
                let coeffs = glf_project_range(patch, basis, self.cfg.first(), self.cfg.k)?;
                Ok(match self.cfg.mode {
                    FeatureMode::Coords => coeffs.flatten(),
                    FeatureMode::Norms => glf_norms(&coeffs),
                })
            }
            Method::ShapeDna => shape_dna_with(&patch.vertices, &self.faces, self.cfg.k, self.cfg.mass),
        }
    }

    /// Patches of every landmark in `labels`; a landmark absent from the scan
    /// or whose patch cannot be built is `None` and reported.
    pub fn scan_patches(
        &self,
        mesh: &TriangleMesh,
        landmarks: &LandmarkSet,
        labels: &[String],
    ) -> (Vec<Option<CanonicalPatch>>, Vec<PatchFailure>) {
        let mut failures = Vec::new();
        let patches = labels
            .iter()
            .map(|label| {
                let result = landmarks
                    .iter()
                    .find(|l| &l.label == label)
                    .ok_or_else(|| Error::Config("landmark not present in scan".into()))
                    .and_then(|l| self.patch(mesh, label, &l.position));
                match result {
                    Ok(p) => Some(p),
                    Err(e) => {
                        failures.push(PatchFailure {
                            landmark: label.clone(),
                            error: e.to_string(),
                        });
                        None
                    }
                }
            })
            .collect();
        (patches, failures)
    }

    /// Features from already extracted patches, aligned with `labels`.
    pub fn features_from_patches(&self, patches: &[Option<CanonicalPatch>], labels: &[String]) -> Result<ScanFeatures> {
        if patches.len() != labels.len() {
            return Err(Error::Config(format!("{} patches for {} landmarks", patches.len(), labels.len())));
        }
        let mut failures = Vec::new();
        let blocks: Vec<Option<Vec<f64>>> = patches
            .iter()
            .zip(labels)
            .map(|(p, label)| match p.as_ref().map(|p| self.patch_features(p)) {
                Some(Ok(f)) => Some(f),
                Some(Err(e)) => {
                    failures.push(PatchFailure {
                        landmark: label.clone(),
                        error: e.to_string(),
                    });
                    None
                }
                None => None,
            })
            .collect();
        let vector = assemble_face(&blocks, self.cfg.method, self.block_len())?;
        Ok(ScanFeatures { vector, failures })
    }

    pub fn scan_features(&self, mesh: &TriangleMesh, landmarks: &LandmarkSet, labels: &[String]) -> Result<ScanFeatures> {
        let (patches, mut failures) = self.scan_patches(mesh, landmarks, labels);
        let mut out = self.features_from_patches(&patches, labels)?;
        failures.append(&mut out.failures);
        out.failures = failures;
        Ok(out)
    }

    /// Extracts every scan in parallel; output order follows `scans`. Scans
    /// that fail outright are reported and left out.
    pub fn extract<S: ScanSource>(&self, scans: &[S], labels: &[String]) -> Result<Extraction> {
        let outcomes: Vec<Result<ScanFeatures>> = scans
            .par_iter()
            .map(|s| {
                let (mesh, landmarks) = s.load()?;
                self.scan_features(&mesh, &landmarks, labels)
            })
            .collect();
        let meta = scans.iter().map(ScanMeta::of).collect();
        self.collect(meta, outcomes, labels)
    }

    /// Features from archives written by [`FeatureExtractor::write_patch_archives`].
    /// The archives must use this extractor's patch configuration.
    pub fn extract_archives(&self, manifest: &PatchManifest, labels: &[String]) -> Result<Extraction> {
        if manifest.config != self.cfg.patch {
            return Err(Error::Config(format!(
                "archives were cut with {:?}, extractor expects {:?}",
                manifest.config, self.cfg.patch
            )));
        }
        let outcomes: Vec<Result<ScanFeatures>> = manifest
            .records
            .par_iter()
            .map(|r| {
                let archive = read_patch_archive(&r.archive)?;
                if archive.meta.config != self.cfg.patch {
                    return Err(Error::Config(format!("{}: patch configuration differs", r.archive.display())));
                }
                let patches: Vec<Option<CanonicalPatch>> = labels
                    .iter()
                    .map(|label| {
                        archive
                            .meta
                            .labels
                            .iter()
                            .position(|l| l == label)
                            .and_then(|i| archive.patches[i].clone())
                    })
                    .collect();
                let mut out = self.features_from_patches(&patches, labels)?;
                for (label, p) in labels.iter().zip(&patches) {
                    if p.is_none() {
                        out.failures.push(PatchFailure {
                            landmark: label.clone(),
                            error: "patch missing from archive".into(),
                        });
                    }
                }
                Ok(out)
            })
            .collect();
        let meta = manifest.records.iter().map(ScanMeta::of_record).collect();
        self.collect(meta, outcomes, labels)
    }

    /// Cuts the patches of every scan and stores one archive per scan under
    /// `out_dir`, plus a `patches.json` manifest. Scans that cannot be loaded
    /// are listed in the manifest's `failed` section.
    pub fn write_patch_archives<S: ScanSource>(
        &self,
        scans: &[S],
        labels: &[String],
        out_dir: impl AsRef<Path>,
    ) -> Result<PatchManifest> {
        let out_dir = out_dir.as_ref();
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let outcomes: Vec<Result<(PathBuf, usize)>> = scans
            .par_iter()
            .map(|s| {
                let (mesh, landmarks) = s.load()?;
                let (patches, failures) = self.scan_patches(&mesh, &landmarks, labels);
                for f in &failures {
                    warn!("{} {}{:02}: patch {} missing: {}", s.subject(), s.expression(), s.intensity(), f.landmark, f.error);
                }
                let path = out_dir.join(format!("{}_{}{:02}.patches", s.subject(), s.expression(), s.intensity()));
                write_patch_archive(&path, &self.cfg.patch, labels, &patches)?;
                Ok((path, failures.len()))
            })
            .collect();
        let mut manifest = PatchManifest {
            config: self.cfg.patch,
            labels: labels.to_vec(),
            records: Vec::new(),
            failed: Vec::new(),
        };
        for (index, (s, outcome)) in scans.iter().zip(outcomes).enumerate() {
            match outcome {
                Ok((archive, missing)) => manifest.records.push(PatchRecord {
                    subject: s.subject().to_string(),
                    expression: s.expression(),
                    intensity: s.intensity(),
                    aus: s.aus().to_vec(),
                    archive,
                    missing,
                }),
                Err(e) => {
                    warn!("scan {index} ({} {} {}): {e}", s.subject(), s.expression(), s.intensity());
                    manifest.failed.push(ScanFailure {
                        index,
                        subject: s.subject().to_string(),
                        expression: s.expression(),
                        intensity: s.intensity(),
                        error: e.to_string(),
                    });
                }
            }
        }
        manifest.save(out_dir.join(PATCH_MANIFEST))?;
        Ok(manifest)
    }

    fn collect(&self, meta: Vec<ScanMeta>, outcomes: Vec<Result<ScanFeatures>>, labels: &[String]) -> Result<Extraction> {
        let mut samples = Vec::with_capacity(meta.len());
        let mut failed_scans = Vec::new();
        let mut dropped = Vec::new();
        let mut missing_patches = 0;
        for (index, (scan, outcome)) in meta.into_iter().zip(outcomes).enumerate() {
            match outcome {
                Err(e) => {
                    warn!("scan {index} ({} {} {}): {e}", scan.subject, scan.expression, scan.intensity);
                    failed_scans.push(ScanFailure {
                        index,
                        subject: scan.subject,
                        expression: scan.expression,
                        intensity: scan.intensity,
                        error: e.to_string(),
                    });
                }
                Ok(f) => {
                    for p in &f.failures {
                        warn!("scan {index} ({}): patch {} missing: {}", scan.subject, p.landmark, p.error);
                    }
                    if !f.failures.is_empty() && self.cfg.missing == MissingPolicy::DropSample {
                        dropped.push(index);
                        continue;
                    }
                    missing_patches += f.failures.len();
                    samples.push(LabeledSample {
                        subject: scan.subject,
                        expression: scan.expression,
                        intensity: scan.intensity,
                        aus: scan.aus,
                        features: f.vector.values,
                        missing: f.vector.missing,
                    });
                }
            }
        }
        let matrix = FeatureMatrix::new(self.layout(labels.to_vec()), samples)?.with_config_hash(self.cfg.config_hash());
        Ok(Extraction {
            matrix,
            failed_scans,
            dropped,
            missing_patches,
        })
    }
}

struct ScanMeta {
    subject: String,
    expression: Expression,
    intensity: u8,
    aus: Vec<u8>,
}

impl ScanMeta {
    fn of<S: ScanSource>(s: &S) -> Self {
        Self {
            subject: s.subject().to_string(),
            expression: s.expression(),
            intensity: s.intensity(),
            aus: s.aus().to_vec(),
        }
    }

    fn of_record(r: &PatchRecord) -> Self {
        Self {
            subject: r.subject.clone(),
            expression: r.expression,
            intensity: r.intensity,
            aus: r.aus.clone(),
        }
    }
}

/// File name of the index written next to patch archives.
pub const PATCH_MANIFEST: &str = "patches.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub subject: String,
    pub expression: Expression,
    pub intensity: u8,
    #[serde(default)]
    pub aus: Vec<u8>,
    pub archive: PathBuf,
    /// Patches that could not be cut for this scan.
    #[serde(default)]
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchManifest {
    pub config: PatchConfig,
    pub labels: Vec<String>,
    pub records: Vec<PatchRecord>,
    #[serde(default)]
    pub failed: Vec<ScanFailure>,
}

impl PatchManifest {
    /// Archive paths are stored relative to the manifest's directory.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let mut copy = self.clone();
        for r in &mut copy.records {
            if let Ok(rel) = r.archive.strip_prefix(base) {
                r.archive = rel.to_path_buf();
            }
        }
        fs::write(path, serde_json::to_vec_pretty(&copy)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: PatchManifest =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        m.config.validate()?;
        for r in &mut m.records {
            r.archive = base.join(&r.archive);
        }
        Ok(m)
    }
}
