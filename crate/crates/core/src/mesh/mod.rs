//! Triangle meshes, landmark sets and rigid transforms.
//!
//! Coordinates are millimetres. A mesh is an indexed face soup; only the
//! invariants checked in [`TriangleMesh::new`] are enforced, so non-manifold
//! scans are accepted as long as every face is a proper triangle.

mod io;

use std::collections::HashSet;

use nalgebra::{Matrix3, Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_landmarks, load_mesh, load_mesh_scaled, save_landmarks, save_obj, MeshFormat};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    valid: Option<Vec<bool>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (f, tri) in faces.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(Error::Structure(format!(
                    "face {f} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Structure(format!(
                    "face {f} repeats a vertex index: {tri:?}"
                )));
            }
        }
        Ok(Self {
            vertices,
            faces,
            valid: None,
        })
    }

    /// Attaches per-vertex validity flags (e.g. scanner confidence masks).
    pub fn with_validity(mut self, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != self.vertices.len() {
            return Err(Error::Structure(format!(
                "validity mask has {} entries for {} vertices",
                valid.len(),
                self.vertices.len()
            )));
        }
        self.valid = Some(valid);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn validity(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Undirected edge set derived from the faces, as sorted `(lo, hi)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        edges_of(&self.faces)
    }

    /// Number of distinct undirected edges incident to each vertex.
    pub fn vertex_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.vertices.len()];
        for (a, b) in self.edges() {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Euclidean distance from every vertex to `r`.
    pub fn distance_field(&self, r: &Point3<f64>) -> Vec<f64> {
        self.vertices.iter().map(|v| (v - r).norm()).collect()
    }

    pub fn apply_transform(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            faces: self.faces.clone(),
            valid: self.valid.clone(),
        }
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c])
    }

    /// Unnormalized face normal; its length is twice the face area.
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.faces[f];
        let (pa, pb, pc) = (&self.vertices[a], &self.vertices[b], &self.vertices[c]);
        (pb - pa).cross(&(pc - pa))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted average of the normals of the faces incident to `v`.
    pub fn vertex_normal(&self, v: usize) -> Option<Unit<Vector3<f64>>> {
        let mut acc = Vector3::zeros();
        for (f, tri) in self.faces.iter().enumerate() {
            if tri.contains(&v) {
                acc += self.face_normal(f);
            }
        }
        Unit::try_new(acc, 1e-300)
    }

    /// Index of the vertex closest to `p`; ties resolve to the lowest index.
    pub fn nearest_vertex(&self, p: &Point3<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm_squared();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }
}

pub(crate) fn edges_of(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut set = HashSet::with_capacity(faces.len() * 3 / 2 + 1);
    for tri in faces {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            set.insert((a.min(b), a.max(b)));
        }
    }
    let mut edges: Vec<_> = set.into_iter().collect();
    edges.sort_unstable();
    edges
}

pub fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub label: String,
    pub position: Point3<f64>,
}

/// Ordered, uniquely labelled landmark annotations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(entries: Vec<Landmark>) -> Result<Self> {
        let mut seen = HashSet::new();
        for lm in &entries {
            if !seen.insert(lm.label.as_str()) {
                return Err(Error::Structure(format!(
                    "duplicate landmark label '{}'",
                    lm.label
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, Point3<f64>)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, position)| Landmark {
                    label: label.into(),
                    position,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Landmark> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Landmark> {
        self.entries.get(i)
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|l| l.label.clone()).collect()
    }

    /// Moves every landmark onto its nearest mesh vertex.
    pub fn snap_to_vertices(&self, mesh: &TriangleMesh) -> Result<LandmarkSet> {
        let entries = self
            .entries
            .iter()
            .map(|lm| {
                let v = mesh
                    .nearest_vertex(&lm.position)
                    .ok_or_else(|| Error::Structure("cannot snap landmarks to an empty mesh".into()))?;
                Ok(Landmark {
                    label: lm.label.clone(),
                    position: mesh.vertices()[v],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LandmarkSet { entries })
    }

    pub fn apply_transform(&self, t: &RigidTransform) -> LandmarkSet {
        LandmarkSet {
            entries: self
                .entries
                .iter()
                .map(|lm| Landmark {
                    label: lm.label.clone(),
                    position: t.apply_point(&lm.position),
                })
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a LandmarkSet {
    type Item = &'a Landmark;
    type IntoIter = std::slice::Iter<'a, Landmark>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Similarity transform `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    scale: f64,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {scale}")));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if off > 1e-9 {
            return Err(Error::Config(format!(
                "rotation columns are not orthonormal (deviation {off:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::Config("rotation has negative determinant".into()));
        }
        Ok(Self {
            rotation,
            translation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn scaling(scale: f64) -> Result<Self> {
        Self::new(Matrix3::identity(), Vector3::zeros(), scale)
    }

    /// Rotation by `angle` radians about `axis`, followed by a translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Result<Self> {
        let axis = Unit::try_new(axis, 1e-12)
            .ok_or_else(|| Error::Config("rotation axis has zero length".into()))?;
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        Self::new(*rot.matrix(), translation, 1.0)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation_vector(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// Applies the linear part only (no translation).
    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * v)
    }
}
