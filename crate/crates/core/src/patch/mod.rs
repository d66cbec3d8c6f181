//! Landmark-centred surface patches with a fixed, shared topology.
//!
//! A patch is built from `K` iso-distance curves around a landmark, each
//! resampled to `m` points. Vertex 0 is the landmark itself and sample `j` of
//! curve `k` sits at index `1 + k * m + j`, so every patch of a given
//! [`PatchConfig`] shares one triangulation ([`canonical_connectivity`]).

mod archive;
mod contour;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

pub use archive::{read_patch_archive, write_patch_archive, PatchArchive, PatchArchiveMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchConfig {
    /// Innermost curve radius (mm).
    pub lambda_min: f64,
    /// Outermost curve radius (mm).
    pub lambda_max: f64,
    /// Number of level curves.
    pub curves: usize,
    /// Samples per curve after uniform resampling.
    pub samples: usize,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self {
            lambda_min: 5.0,
            lambda_max: 20.0,
            curves: 15,
            samples: 50,
        }
    }
}

impl PatchConfig {
    pub fn new(lambda_min: f64, lambda_max: f64, curves: usize, samples: usize) -> Result<Self> {
        let cfg = Self {
            lambda_min,
            lambda_max,
            curves,
            samples,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < lambda_min < lambda_max, got {} and {}",
                self.lambda_min, self.lambda_max
            )));
        }
        if self.curves < 2 {
            return Err(Error::Config(format!("need at least 2 curves, got {}", self.curves)));
        }
        if self.samples < 3 {
            return Err(Error::Config(format!(
                "need at least 3 samples per curve, got {}",
                self.samples
            )));
        }
        Ok(())
    }

    /// Vertex count `1 + K * m` of every patch.
    pub fn vertex_count(&self) -> usize {
        1 + self.curves * self.samples
    }

    /// Radii `lambda_min + k (lambda_max - lambda_min) / (K - 1)`.
    pub fn levels(&self) -> Vec<f64> {
        let step = (self.lambda_max - self.lambda_min) / (self.curves - 1) as f64;
        (0..self.curves)
            .map(|k| {
                if k + 1 == self.curves {
                    self.lambda_max
                } else {
                    self.lambda_min + k as f64 * step
                }
            })
            .collect()
    }
}

/// Ordered closed polyline at constant distance `lambda` from a landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub points: Vec<Point3<f64>>,
    pub lambda: f64,
}

impl LevelCurve {
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| (self.points[(i + 1) % n] - self.points[i]).norm())
            .sum()
    }
}

/// How patch coordinates are expressed after extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchFrame {
    /// Translate the landmark to the origin only.
    #[default]
    Translated,
    /// Also rotate the apex normal onto +z and the first curve's start onto +x.
    NormalAligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchOptions {
    pub frame: PatchFrame,
    /// Direction used to pick each curve's start point; the face's left-right
    /// axis in mesh coordinates.
    pub reference_axis: Vector3<f64>,
}

impl Default for PatchOptions {
    fn default() -> Self {
        Self {
            frame: PatchFrame::Translated,
            reference_axis: Vector3::x(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPatch {
    pub label: String,
    pub curves: usize,
    pub samples: usize,
    pub vertices: Vec<Point3<f64>>,
}

impl CanonicalPatch {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Sample `j` of curve `k`.
    pub fn sample(&self, k: usize, j: usize) -> &Point3<f64> {
        &self.vertices[1 + k * self.samples + j]
    }

    pub fn curve(&self, k: usize) -> &[Point3<f64>] {
        let start = 1 + k * self.samples;
        &self.vertices[start..start + self.samples]
    }

    /// Coordinate channel `c` (0 = x, 1 = y, 2 = z) of every vertex.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.vertices.iter().map(|p| p[c]).collect()
    }

    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> CanonicalPatch {
        CanonicalPatch {
            vertices: self.vertices.iter().map(f).collect(),
            ..self.clone()
        }
    }
}

/// Iso-distance curve of `mesh` at radius `lambda` around `r`, oriented
/// counter-clockwise about the surface normal at `r`.
pub fn extract_level_curve(mesh: &TriangleMesh, r: &Point3<f64>, lambda: f64) -> Result<LevelCurve> {
    extract_level_curve_labeled(mesh, r, lambda, "?")
}

pub fn extract_level_curve_labeled(
    mesh: &TriangleMesh,
    r: &Point3<f64>,
    lambda: f64,
    label: &str,
) -> Result<LevelCurve> {
    contour::LocalField::new(mesh, *r, label, lambda)?.level_curve(lambda)
}

/// `m` points at equal arclength along the closed polyline, starting at its
/// first point.
pub fn resample_uniform(points: &[Point3<f64>], m: usize) -> Result<Vec<Point3<f64>>> {
    let n = points.len();
    if n < 2 || m == 0 {
        return Err(Error::DegenerateCurve(format!(
            "cannot resample {n} points into {m} samples"
        )));
    }
    let seg: Vec<f64> = (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).collect();
    let total: f64 = seg.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateCurve("curve has zero arclength".into()));
    }
    let step = total / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut i = 0;
    let mut walked = 0.0;
    for j in 0..m {
        let target = j as f64 * step;
        while i < n - 1 && walked + seg[i] <= target {
            walked += seg[i];
            i += 1;
        }
        let a = points[i];
        let b = points[(i + 1) % n];
        let t = if seg[i] > 0.0 { ((target - walked) / seg[i]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(a + (b - a) * t);
    }
    Ok(out)
}

/// Triangulation shared by every patch of a given `(K, m)`.
///
/// An apex fan of `m` triangles joins vertex 0 to curve 0; consecutive curves
/// are joined by closed quad strips, each quad split along the diagonal from
/// `(k, j)` to `(k + 1, j + 1)`.
pub fn canonical_connectivity(cfg: &PatchConfig) -> Vec<[usize; 3]> {
    let m = cfg.samples;
    let idx = |k: usize, j: usize| 1 + k * m + (j % m);
    let mut faces = Vec::with_capacity(m + 2 * m * (cfg.curves - 1));
    for j in 0..m {
        faces.push([0, idx(0, j), idx(0, j + 1)]);
    }
    for k in 0..cfg.curves - 1 {
        for j in 0..m {
            let a = idx(k, j);
            let b = idx(k, j + 1);
            let c = idx(k + 1, j + 1);
            let d = idx(k + 1, j);
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    faces
}

/// Extracts the canonical patch of one landmark.
///
/// Each curve starts at its crossing point furthest along the reference axis
/// (projected into the tangent plane); curves after the first are then
/// cyclically shifted to best match the previous curve sample-by-sample.
pub fn build_patch(
    mesh: &TriangleMesh,
    label: &str,
    apex: &Point3<f64>,
    cfg: &PatchConfig,
    opts: &PatchOptions,
) -> Result<CanonicalPatch> {
    cfg.validate()?;
    let field = contour::LocalField::new(mesh, *apex, label, cfg.lambda_max)?;
    let normal = field.normal();
    let mut axis = opts.reference_axis - normal.as_ref() * normal.dot(&opts.reference_axis);
    if axis.norm() < 1e-9 {
        axis = contour::tangent_frame(&normal).0;
    }
    let axis = axis.normalize();

    let m = cfg.samples;
    let mut vertices = Vec::with_capacity(cfg.vertex_count());
    vertices.push(Point3::origin());
    let mut previous: Option<Vec<Point3<f64>>> = None;
    for lambda in cfg.levels() {
        let mut curve = field.level_curve(lambda)?;
        let start = curve
            .points
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| (*p - apex).dot(&axis).total_cmp(&(*q - apex).dot(&axis)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        curve.points.rotate_left(start);
        let mut samples = resample_uniform(&curve.points, m).map_err(|e| Error::Extraction {
            landmark: label.to_string(),
            lambda,
            reason: e.to_string(),
        })?;
        if let Some(prev) = &previous {
            let shift = best_cyclic_shift(prev, &samples);
            samples.rotate_left(shift);
        }
        vertices.extend(samples.iter().map(|p| Point3::from(p - apex)));
        previous = Some(samples);
    }

    if opts.frame == PatchFrame::NormalAligned {
        let to_z = Rotation3::rotation_between(normal.as_ref(), &Vector3::z())
            .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
        let first = to_z * vertices[1].coords;
        let spin = Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::z()), -first.y.atan2(first.x));
        let rot = spin * to_z;
        for p in &mut vertices {
            *p = rot * *p;
        }
    }

    Ok(CanonicalPatch {
        label: label.to_string(),
        curves: cfg.curves,
        samples: m,
        vertices,
    })
}

/// Shift `s` minimizing `sum_j |curve[(j + s) % m] - reference[j]|`; lowest `s` on ties.
fn best_cyclic_shift(reference: &[Point3<f64>], curve: &[Point3<f64>]) -> usize {
    let m = curve.len();
    let mut best = (0, f64::INFINITY);
    for s in 0..m {
        let cost: f64 = (0..m).map(|j| (curve[(j + s) % m] - reference[j]).norm()).sum();
        if cost < best.1 {
            best = (s, cost);
        }
    }
    best.0
}
