use std::sync::OnceLock;

use glf_core::classify::{eigen_sweep, EvalConfig};
use glf_core::data::{landmark_labels, synth_face, synth_scans, SynthConfig, SynthScan};
use glf_core::features::Method;
use glf_core::mesh::TriangleMesh;
use glf_core::patch::{canonical_connectivity, PatchConfig};
use glf_core::pipeline::{ExtractionConfig, FeatureExtractor, MissingPolicy, PatchManifest, PATCH_MANIFEST};
use glf_core::spectral::shape_dna;

fn small_set() -> &'static Vec<SynthScan> {
    static CELL: OnceLock<Vec<SynthScan>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = SynthConfig {
            subjects: 2,
            levels: 1,
            jitter_mm: 0.1,
            seed: 21,
            ..SynthConfig::default()
        };
        synth_scans(&cfg).unwrap()
    })
}

fn patch_only() -> FeatureExtractor {
    // Shape-DNA with k = 1 needs no shared basis, so this only cuts patches
    FeatureExtractor::new(ExtractionConfig {
        method: Method::ShapeDna,
        k: 1,
        ..ExtractionConfig::default()
    })
    .unwrap()
}

#[test]
fn every_landmark_yields_a_default_patch() {
    let ex = patch_only();
    let labels = landmark_labels();
    let cfg = SynthConfig {
        subjects: 3,
        levels: 2,
        ..SynthConfig::default()
    };
    let scans: Vec<SynthScan> = synth_scans(&cfg).unwrap().into_iter().filter(|s| s.intensity == 2).collect();
    for s in &scans {
        let (patches, failures) = ex.scan_patches(&s.mesh, &s.landmarks, &labels);
        assert!(failures.is_empty(), "{} {}: {:?}", s.subject, s.expression, failures);
        assert!(patches.iter().all(|p| p.as_ref().is_some_and(|p| p.vertex_count() == 751)));
    }
}

#[test]
fn shape_dna_changes_only_near_the_deformation() {
    let cfg = SynthConfig::default();
    let (neutral, marks) = synth_face(&cfg, 0, &[], 1, 0).unwrap();
    let (smile, smile_marks) = synth_face(&cfg, 0, &[12], 2, 0).unwrap();
    let pcfg = PatchConfig::new(5.0, 20.0, 15, 24).unwrap();
    let faces = canonical_connectivity(&pcfg);
    let ex = FeatureExtractor::new(ExtractionConfig {
        patch: pcfg,
        method: Method::ShapeDna,
        k: 1,
        ..ExtractionConfig::default()
    })
    .unwrap();
    let spectrum = |mesh: &TriangleMesh, i: usize, m: &glf_core::mesh::LandmarkSet| {
        let lm = m.get(i).unwrap();
        shape_dna(&ex.patch(mesh, &lm.label, &lm.position).unwrap(), &faces, 20).unwrap()
    };
    let rel = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max);

    // mouth corner sits inside the smile bump
    let near = rel(&spectrum(&neutral, 48, &marks), &spectrum(&smile, 48, &smile_marks));
    assert!(near > 1e-3, "mouth corner spectrum barely moved: {near:e}");
    // jaw ends and the brow centre are far outside it
    for far_lm in [0, 16, 21] {
        let far = rel(&spectrum(&neutral, far_lm, &marks), &spectrum(&smile, far_lm, &smile_marks));
        assert!(far <= 1e-6, "landmark {} moved by {far:e}", far_lm + 1);
    }
}

/// Replaces the faces around one landmark with a hole.
fn punch_hole(scan: &SynthScan, landmark: usize, radius: f64) -> SynthScan {
    let centre = scan.landmarks.get(landmark).unwrap().position;
    let v = scan.mesh.vertices();
    let faces = scan
        .mesh
        .faces()
        .iter()
        .filter(|f| f.iter().all(|&i| (v[i] - centre).norm() > radius))
        .copied()
        .collect();
    SynthScan {
        mesh: TriangleMesh::new(v.to_vec(), faces).unwrap(),
        ..scan.clone()
    }
}

fn extractor(missing: MissingPolicy) -> FeatureExtractor {
    FeatureExtractor::new(ExtractionConfig {
        patch: PatchConfig::new(5.0, 20.0, 5, 12).unwrap(),
        k: 10,
        missing,
        ..ExtractionConfig::default()
    })
    .unwrap()
}

#[test]
fn missing_patches_zero_fill_or_drop() {
    let mut scans = small_set().clone();
    scans[3] = punch_hole(&scans[3], 30, 8.0);
    let labels = landmark_labels();

    let filled = extractor(MissingPolicy::ZeroFill).extract(&scans, &labels).unwrap();
    assert!(filled.is_complete());
    assert_eq!(filled.matrix.len(), scans.len());
    assert!(filled.missing_patches >= 1);
    let row = &filled.matrix.samples[3];
    let block = filled.matrix.layout.block_len();
    assert!(row.missing[30]);
    assert!(row.features[30 * block..31 * block].iter().all(|&x| x == 0.0));
    assert!(filled.matrix.samples.iter().enumerate().all(|(i, s)| i == 3 || !s.missing.iter().any(|&m| m)));

    let dropped = extractor(MissingPolicy::DropSample).extract(&scans, &labels).unwrap();
    assert_eq!(dropped.dropped, vec![3]);
    assert_eq!(dropped.matrix.len(), scans.len() - 1);
    assert_eq!(dropped.matrix.samples[3], filled.matrix.samples[4]);
}

#[test]
fn archives_reproduce_direct_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let labels = landmark_labels();
    let ex = extractor(MissingPolicy::ZeroFill);
    let direct = ex.extract(small_set(), &labels).unwrap();
    ex.write_patch_archives(small_set(), &labels, dir.path()).unwrap();
    let manifest = PatchManifest::load(dir.path().join(PATCH_MANIFEST)).unwrap();
    assert_eq!(manifest.records.len(), small_set().len());
    let archived = ex.extract_archives(&manifest, &labels).unwrap();
    assert_eq!(archived.matrix.samples, direct.matrix.samples);

    let other = extractor(MissingPolicy::ZeroFill);
    let rerun = other.extract(small_set(), &labels).unwrap();
    assert_eq!(rerun.matrix.samples, direct.matrix.samples);
}

#[test]
fn sweep_saturates_and_single_eigenvector_is_weaker() {
    let scans = synth_scans(&SynthConfig::default()).unwrap();
    let pcfg = PatchConfig::new(5.0, 20.0, 7, 10).unwrap();
    let n = pcfg.vertex_count();
    let out = FeatureExtractor::new(ExtractionConfig {
        patch: pcfg,
        k: n,
        ..ExtractionConfig::default()
    })
    .unwrap()
    .extract(&scans, &landmark_labels())
    .unwrap();
    assert!(out.is_complete() && out.missing_patches == 0);
    let cfg = EvalConfig {
        seed: 1,
        ..EvalConfig::default()
    };
    let table = eigen_sweep(&out.matrix, &[1, 50, n], &cfg).unwrap();
    let acc: Vec<f64> = table.rows.iter().map(|r| r.mean_accuracy).collect();
    println!("k=1 {:.2}%, k=50 {:.2}%, k={n} {:.2}%", acc[0], acc[1], acc[2]);
    assert!(acc[0] < acc[1]);
    assert!((acc[2] - acc[1]).abs() <= 5.0);
}
