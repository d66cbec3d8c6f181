//! Synthetic face scans.
//!
//! The base surface is an open ellipsoid cap facing +z (x is the subject's
//! left, y is up), parametrized by azimuth and elevation. Every displacement
//! is applied along the ellipsoid normal and built from compactly supported
//! bumps `A (1 - r^2/R^2)^3`, so geometry outside a bump's radius is untouched.
//! A scan's surface height is the sum of static relief (nose, eye sockets,
//! brows, lips, chin), a subject-specific low-frequency field, and one bump
//! set per active Action Unit scaled by the intensity level.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{save_manifest, DatasetManifest, ManifestRecord, MAX_INTENSITY};
use crate::error::{Error, Result};
use crate::labels::{au_index, Expression};
use crate::mesh::{save_landmarks, save_obj, LandmarkSet, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub subjects: usize,
    pub expressions: Vec<Expression>,
    /// Intensity levels `1..=levels`.
    pub levels: u8,
    /// Target vertex spacing (mm).
    pub resolution_mm: f64,
    /// Multiplier on every Action Unit bump amplitude.
    pub amplitude_scale: f64,
    /// Typical size of each subject's low-frequency shape perturbation (mm).
    pub subject_variation_mm: f64,
    /// Half-width of the per-subject relative spread of AU amplitudes.
    pub au_variation: f64,
    /// Chance that each optional AU of an expression is active in a scan.
    pub optional_au_probability: f64,
    /// Standard deviation of per-vertex normal jitter (mm).
    pub jitter_mm: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 20,
            expressions: Expression::ALL.to_vec(),
            levels: 2,
            resolution_mm: 2.0,
            amplitude_scale: 0.3,
            subject_variation_mm: 2.0,
            au_variation: 0.25,
            optional_au_probability: 0.5,
            jitter_mm: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.subjects == 0 {
            return bad("need at least one subject".into());
        }
        if self.expressions.is_empty() {
            return bad("need at least one expression".into());
        }
        let mut e = self.expressions.clone();
        e.sort();
        e.dedup();
        if e.len() != self.expressions.len() {
            return bad("expressions must be distinct".into());
        }
        if self.levels == 0 || self.levels > MAX_INTENSITY {
            return bad(format!("levels must be in 1..={MAX_INTENSITY}, got {}", self.levels));
        }
        if !(self.resolution_mm >= 0.25 && self.resolution_mm <= 10.0) {
            return bad(format!("resolution must be in [0.25, 10] mm, got {}", self.resolution_mm));
        }
        if !(self.amplitude_scale > 0.0 && self.amplitude_scale.is_finite()) {
            return bad(format!("amplitude scale must be positive, got {}", self.amplitude_scale));
        }
        if !(self.subject_variation_mm >= 0.0 && self.subject_variation_mm <= 10.0) {
            return bad(format!("subject variation must be in [0, 10] mm, got {}", self.subject_variation_mm));
        }
        if !(0.0..1.0).contains(&self.au_variation) {
            return bad(format!("AU variation must be in [0, 1), got {}", self.au_variation));
        }
        if !(0.0..=1.0).contains(&self.optional_au_probability) {
            return bad(format!(
                "optional AU probability must be in [0, 1], got {}",
                self.optional_au_probability
            ));
        }
        if !(self.jitter_mm >= 0.0 && self.jitter_mm <= 1.0) {
            return bad(format!("jitter must be in [0, 1] mm, got {}", self.jitter_mm));
        }
        Ok(())
    }

    pub fn scan_count(&self) -> usize {
        self.subjects * self.expressions.len() * self.levels as usize
    }
}

/// Core (always active) and optional Action Units of each expression.
pub const EXPRESSION_AUS: [(Expression, &[u8], &[u8]); 6] = [
    (Expression::Anger, &[4, 7, 23], &[5, 17, 24]),
    (Expression::Disgust, &[9, 10], &[15, 16, 17, 25]),
    (Expression::Fear, &[1, 2, 4, 20], &[5, 25, 26]),
    (Expression::Happiness, &[6, 12], &[25, 26]),
    (Expression::Sadness, &[1, 4, 15], &[17]),
    (Expression::Surprise, &[1, 2, 26], &[5, 25]),
];

/// Bump centre in degrees (azimuth, elevation), amplitude and support radius
/// in mm. A non-zero azimuth is mirrored to the other side of the face.
type Bump = (f64, f64, f64, f64);

const STATIC_RELIEF: [Bump; 5] = [
    (0.0, -5.0, 14.0, 22.0),
    (22.0, 12.0, -5.0, 16.0),
    (20.0, 22.0, 3.0, 18.0),
    (0.0, -25.0, 4.0, 16.0),
    (0.0, -42.0, 5.0, 20.0),
];

fn au_bumps(au: u8) -> &'static [Bump] {
    match au {
        1 => &[(8.0, 29.0, 2.5, 16.0)],
        2 => &[(30.0, 30.0, 2.5, 16.0)],
        4 => &[(7.0, 20.0, -3.0, 14.0)],
        5 => &[(22.0, 17.0, 2.0, 12.0)],
        6 => &[(27.0, 0.0, 3.0, 20.0)],
        7 => &[(22.0, 9.0, 2.0, 10.0)],
        9 => &[(6.0, 0.0, 2.5, 12.0)],
        10 => &[(9.0, -18.0, 2.5, 12.0)],
        12 => &[(22.0, -23.0, 3.0, 16.0)],
        15 => &[(19.0, -31.0, -2.5, 14.0)],
        16 => &[(0.0, -33.0, 2.0, 14.0)],
        17 => &[(0.0, -40.0, 3.0, 16.0)],
        20 => &[(24.0, -28.0, -2.0, 16.0)],
        23 => &[(0.0, -24.0, 2.0, 12.0)],
        24 => &[(0.0, -21.0, -2.0, 12.0)],
        25 => &[(0.0, -26.5, -3.0, 12.0)],
        26 => &[(0.0, -36.0, -3.0, 20.0)],
        _ => &[],
    }
}

/// Parametric landmark positions in degrees, in the usual 68-point order:
/// jaw, brows, nose bridge, nostrils, eyes, outer lips, inner lips.
fn landmark_angles() -> Vec<(f64, f64)> {
    let mut v = Vec::with_capacity(68);
    for i in 0..17 {
        let t = i as f64 / 16.0;
        v.push((-64.0 * (PI * t).cos(), -2.0 - 42.0 * (PI * t).sin()));
    }
    let brow = [(38.0, 22.0), (31.0, 25.5), (24.0, 27.0), (17.0, 26.5), (10.0, 24.0)];
    v.extend(brow.iter().map(|&(a, e)| (-a, e)));
    v.extend(brow.iter().rev().map(|&(a, e)| (a, e)));
    v.extend([16.0, 10.0, 4.0, -2.0].iter().map(|&e| (0.0, e)));
    v.extend([(-9.0, -11.0), (-4.5, -12.0), (0.0, -12.5), (4.5, -12.0), (9.0, -11.0)]);
    let eye = [(30.0, 13.0), (25.0, 15.5), (19.0, 15.5), (14.0, 13.0), (19.0, 10.5), (25.0, 10.5)];
    v.extend(eye.iter().map(|&(a, e)| (-a, e)));
    // left eye starts at its inner corner and runs over the top
    v.extend([3, 2, 1, 0, 5, 4].iter().map(|&i| eye[i]));
    v.extend([
        (-18.0, -26.0),
        (-11.0, -22.5),
        (-4.0, -21.0),
        (0.0, -21.5),
        (4.0, -21.0),
        (11.0, -22.5),
        (18.0, -26.0),
        (11.0, -30.0),
        (4.0, -31.5),
        (0.0, -32.0),
        (-4.0, -31.5),
        (-11.0, -30.0),
    ]);
    v.extend([
        (-14.0, -26.0),
        (-5.0, -24.5),
        (0.0, -24.5),
        (5.0, -24.5),
        (14.0, -26.0),
        (5.0, -27.5),
        (0.0, -27.5),
        (-5.0, -27.5),
    ]);
    v
}

/// Landmark labels `"1"` to `"68"`.
pub fn landmark_labels() -> Vec<String> {
    (1..=68).map(|i| i.to_string()).collect()
}

const BASE_RADII: [f64; 3] = [75.0, 95.0, 90.0];
const AZIMUTH_LIMIT: f64 = 100.0;
const ELEVATION_LIMIT: f64 = 70.0;
const SUBJECT_STREAM: u64 = 1;
const SCAN_STREAM: u64 = 1 << 40;

/// Per-subject shape parameters.
struct Subject {
    radii: Vector3<f64>,
    relief_scale: Vec<f64>,
    waves: Vec<(f64, f64, f64, f64)>,
    au_scale: Vec<f64>,
    landmark_offsets: Vec<(f64, f64)>,
}

impl Subject {
    fn new(cfg: &SynthConfig, index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(SUBJECT_STREAM + index as u64);
        let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        let radii = Vector3::from_fn(|i, _| BASE_RADII[i] * (1.0 + 0.04 * normal(&mut rng).clamp(-2.5, 2.5)));
        let relief_scale = STATIC_RELIEF
            .iter()
            .map(|_| 1.0 + 0.15 * normal(&mut rng).clamp(-2.5, 2.5))
            .collect();
        let waves = (0..4)
            .map(|_| {
                (
                    0.5 * cfg.subject_variation_mm * normal(&mut rng),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.5..2.0),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let v = cfg.au_variation;
        let au_scale = (0..crate::labels::ACTION_UNITS.len())
            .map(|_| if v > 0.0 { rng.random_range(1.0 - v..1.0 + v) } else { 1.0 })
            .collect();
        let landmark_offsets = (0..68)
            .map(|_| (0.5 * normal(&mut rng), 0.5 * normal(&mut rng)))
            .collect();
        Self {
            radii,
            relief_scale,
            waves,
            au_scale,
            landmark_offsets,
        }
    }

    fn base_point(&self, az: f64, el: f64) -> Point3<f64> {
        let r = &self.radii;
        Point3::new(r.x * az.sin() * el.cos(), r.y * el.sin(), r.z * az.cos() * el.cos())
    }

    fn normal(&self, p: &Point3<f64>) -> Vector3<f64> {
        let r = &self.radii;
        Vector3::new(p.x / (r.x * r.x), p.y / (r.y * r.y), p.z / (r.z * r.z)).normalize()
    }
}

/// Active bumps of one scan as (centre on the base surface, amplitude, radius).
fn scan_bumps(subject: &Subject, aus: &[u8], level: u8, amplitude_scale: f64) -> Vec<(Point3<f64>, f64, f64)> {
    let mut out = Vec::new();
    let mut push = |&(az, el, a, r): &Bump, amp: f64| {
        let sides: &[f64] = if az == 0.0 { &[1.0] } else { &[1.0, -1.0] };
        for s in sides {
            out.push((subject.base_point((s * az).to_radians(), el.to_radians()), a * amp, r));
        }
    };
    for (b, scale) in STATIC_RELIEF.iter().zip(&subject.relief_scale) {
        push(b, *scale);
    }
    for &au in aus {
        let amp = amplitude_scale * level as f64 * subject.au_scale[au_index(au).unwrap()];
        for b in au_bumps(au) {
            push(b, amp);
        }
    }
    out
}

fn height(subject: &Subject, bumps: &[(Point3<f64>, f64, f64)], p0: &Point3<f64>, az: f64, el: f64) -> f64 {
    let mut h: f64 = subject
        .waves
        .iter()
        .map(|&(c, fa, fe, phase)| c * (fa * az + fe * el + phase).cos())
        .sum();
    for (centre, a, r) in bumps {
        let s2 = (p0 - centre).norm_squared() / (r * r);
        if s2 < 1.0 {
            let t = 1.0 - s2;
            h += a * t * t * t;
        }
    }
    h
}

fn surface_point(subject: &Subject, bumps: &[(Point3<f64>, f64, f64)], az: f64, el: f64) -> Point3<f64> {
    let p0 = subject.base_point(az, el);
    p0 + subject.normal(&p0) * height(subject, bumps, &p0, az, el)
}

/// Builds one face. `aus` must come from the scored set; an empty list gives
/// the subject's neutral face. `jitter_stream` selects the vertex noise.
pub fn synth_face(
    cfg: &SynthConfig,
    subject: usize,
    aus: &[u8],
    level: u8,
    jitter_stream: u64,
) -> Result<(TriangleMesh, LandmarkSet)> {
    cfg.validate()?;
    if let Some(bad) = aus.iter().find(|&&a| au_index(a).is_none()) {
        return Err(Error::Config(format!("AU{bad} is not in the scored set")));
    }
    let subj = Subject::new(cfg, subject);
    let bumps = scan_bumps(&subj, aus, level, cfg.amplitude_scale);

    let mean_radius = (BASE_RADII[0] + BASE_RADII[2]) / 2.0;
    let cols = (mean_radius * (2.0 * AZIMUTH_LIMIT).to_radians() / cfg.resolution_mm).ceil() as usize;
    let rows = (BASE_RADII[1] * (2.0 * ELEVATION_LIMIT).to_radians() / cfg.resolution_mm).ceil() as usize;
    let az_at = |i: usize| (-AZIMUTH_LIMIT + 2.0 * AZIMUTH_LIMIT * i as f64 / cols as f64).to_radians();
    let el_at = |j: usize| (-ELEVATION_LIMIT + 2.0 * ELEVATION_LIMIT * j as f64 / rows as f64).to_radians();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SCAN_STREAM + jitter_stream);
    let mut vertices = Vec::with_capacity((rows + 1) * (cols + 1));
    for j in 0..=rows {
        for i in 0..=cols {
            let (az, el) = (az_at(i), el_at(j));
            let mut p = surface_point(&subj, &bumps, az, el);
            if cfg.jitter_mm > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                p += subj.normal(&subj.base_point(az, el)) * (cfg.jitter_mm * n);
            }
            vertices.push(p);
        }
    }
    let idx = |i: usize, j: usize| j * (cols + 1) + i;
    let mut faces = Vec::with_capacity(2 * rows * cols);
    for j in 0..rows {
        for i in 0..cols {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mesh = TriangleMesh::new(vertices, faces)?;

    let landmarks = landmark_angles()
        .into_iter()
        .zip(&subj.landmark_offsets)
        .zip(landmark_labels())
        .map(|(((az, el), (da, de)), label)| {
            (label, surface_point(&subj, &bumps, (az + da).to_radians(), (el + de).to_radians()))
        });
    Ok((mesh, LandmarkSet::from_pairs(landmarks)?))
}

#[derive(Debug, Clone)]
pub struct SynthScan {
    pub subject: String,
    pub expression: Expression,
    pub intensity: u8,
    pub aus: Vec<u8>,
    pub mesh: TriangleMesh,
    pub landmarks: LandmarkSet,
}

struct ScanSpec {
    subject: usize,
    expression: Expression,
    level: u8,
}

fn specs(cfg: &SynthConfig) -> Vec<ScanSpec> {
    let mut expressions = cfg.expressions.clone();
    expressions.sort();
    let mut out = Vec::with_capacity(cfg.scan_count());
    for subject in 0..cfg.subjects {
        for &expression in &expressions {
            for level in 1..=cfg.levels {
                out.push(ScanSpec {
                    subject,
                    expression,
                    level,
                });
            }
        }
    }
    out
}

fn subject_id(i: usize) -> String {
    format!("S{i:03}")
}

impl ScanSpec {
    fn stream(&self) -> u64 {
        ((self.subject as u64) << 16) | ((self.expression.index() as u64) << 8) | self.level as u64
    }

    fn active_aus(&self, cfg: &SynthConfig) -> Vec<u8> {
        let (_, core, optional) = EXPRESSION_AUS[self.expression.index()];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_da11_u64);
        rng.set_stream(SCAN_STREAM + self.stream());
        let mut aus = core.to_vec();
        for &a in optional {
            if rng.random_bool(cfg.optional_au_probability) {
                aus.push(a);
            }
        }
        aus.sort_unstable();
        aus
    }

    fn build(&self, cfg: &SynthConfig) -> Result<SynthScan> {
        let aus = self.active_aus(cfg);
        let (mesh, landmarks) = synth_face(cfg, self.subject, &aus, self.level, self.stream())?;
        Ok(SynthScan {
            subject: subject_id(self.subject),
            expression: self.expression,
            intensity: self.level,
            aus,
            mesh,
            landmarks,
        })
    }
}

/// All scans of `cfg` in memory, ordered by subject, expression and level.
pub fn synth_scans(cfg: &SynthConfig) -> Result<Vec<SynthScan>> {
    cfg.validate()?;
    specs(cfg).par_iter().map(|s| s.build(cfg)).collect()
}

/// Writes every scan as OBJ plus landmark CSV under `out_dir` and returns the
/// manifest, which is also saved as `out_dir/manifest.csv`.
pub fn synth_generate(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    cfg.validate()?;
    let out = out_dir.as_ref();
    for sub in ["meshes", "landmarks"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let records = specs(cfg)
        .par_iter()
        .map(|s| {
            let scan = s.build(cfg)?;
            let stem = format!("{}_{}{:02}", scan.subject, scan.expression, scan.intensity);
            let mesh = out.join("meshes").join(format!("{stem}.obj"));
            let landmarks = out.join("landmarks").join(format!("{stem}.csv"));
            save_obj(&scan.mesh, &mesh)?;
            save_landmarks(&scan.landmarks, &landmarks)?;
            Ok(ManifestRecord {
                subject: scan.subject,
                expression: scan.expression,
                intensity: scan.intensity,
                mesh,
                landmarks,
                aus: scan.aus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest::new(records)?;
    save_manifest(&manifest, out.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            subjects: 2,
            expressions: vec![Expression::Happiness, Expression::Fear],
            resolution_mm: 4.0,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn landmark_table_is_complete() {
        let a = landmark_angles();
        assert_eq!(a.len(), 68);
        // mirrored pairs: jaw ends, outer brow ends, outer eye corners, mouth corners
        for (l, r) in [(0, 16), (17, 26), (36, 45), (48, 54)] {
            assert!((a[l].0 + a[r].0).abs() < 1e-12 && (a[l].1 - a[r].1).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_ordered() {
        let cfg = small();
        let a = synth_scans(&cfg).unwrap();
        let b = synth_scans(&cfg).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mesh, y.mesh);
            assert_eq!(x.landmarks, y.landmarks);
            assert_eq!(x.aus, y.aus);
        }
        assert_eq!(a[0].subject, "S000");
        assert_eq!(a[0].expression, Expression::Fear);
        assert_eq!((a[0].intensity, a[1].intensity), (1, 2));
        let other = synth_scans(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(other[0].mesh, a[0].mesh);
    }

    #[test]
    fn level_two_doubles_bump_height() {
        let cfg = SynthConfig {
            resolution_mm: 4.0,
            jitter_mm: 0.0,
            amplitude_scale: 1.0,
            ..SynthConfig::default()
        };
        let (neutral, _) = synth_face(&cfg, 0, &[], 1, 0).unwrap();
        let (one, _) = synth_face(&cfg, 0, &[12], 1, 0).unwrap();
        let (two, _) = synth_face(&cfg, 0, &[12], 2, 0).unwrap();
        let mut peak = 0.0f64;
        for ((n, a), b) in neutral.vertices().iter().zip(one.vertices()).zip(two.vertices()) {
            let d1 = (a - n).norm();
            let d2 = (b - n).norm();
            assert!((d2 - 2.0 * d1).abs() < 1e-9);
            peak = peak.max(d1);
        }
        assert!(peak > 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        for bad in [
            SynthConfig {
                amplitude_scale: 0.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                subjects: 0,
                ..SynthConfig::default()
            },
            SynthConfig {
                levels: 5,
                ..SynthConfig::default()
            },
            SynthConfig {
                expressions: vec![Expression::Anger, Expression::Anger],
                ..SynthConfig::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn on_disk_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            subjects: 1,
            expressions: vec![Expression::Sadness],
            levels: 1,
            resolution_mm: 5.0,
            ..SynthConfig::default()
        };
        let m = synth_generate(&cfg, dir.path()).unwrap();
        assert_eq!(m.len(), 1);
        let loaded = super::super::load_manifest(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded, m);
        let mesh = crate::mesh::load_mesh(&m.records[0].mesh, crate::mesh::MeshFormat::Obj).unwrap();
        let scan = &synth_scans(&cfg).unwrap()[0];
        assert_eq!(mesh, scan.mesh);
    }
}
