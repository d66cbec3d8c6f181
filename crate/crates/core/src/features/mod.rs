//! Per-patch spectral descriptors and their concatenation into face vectors.
//!
//! GLF coefficients project the patch's x, y and z coordinate functions onto
//! the eigenvectors of the shared graph Laplacian. Shape-DNA uses the patch's
//! own Laplace-Beltrami eigenvalues instead.

mod io;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::CanonicalPatch;
use crate::spectral::SpectralBasis;

pub use io::{read_features, write_features, FeatureFormat, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Glf,
    ShapeDna,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Glf => "glf",
            Method::ShapeDna => "shapedna",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "glf" => Ok(Method::Glf),
            "shapedna" => Ok(Method::ShapeDna),
            _ => Err(Error::Config(format!("unknown method '{s}' (expected glf or shapedna)"))),
        }
    }
}

/// Channel handling for GLF coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// `k x 3` coefficients per patch.
    #[default]
    Coords,
    /// Per-eigenvector norm across x, y, z (`k` values per patch).
    Norms,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coords" => Ok(FeatureMode::Coords),
            "norms" => Ok(FeatureMode::Norms),
            _ => Err(Error::Config(format!("unknown feature mode '{s}' (expected coords or norms)"))),
        }
    }
}

/// Projection coefficients of one patch: row `i`, column `c` is the dot
/// product of eigenvector `i` with coordinate channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlfCoefficients {
    pub rows: DMatrix<f64>,
}

pub fn glf_project(patch: &CanonicalPatch, basis: &SpectralBasis, k: usize) -> Result<GlfCoefficients> {
    glf_project_range(patch, basis, 0, k)
}

/// Projection onto eigenvectors `first .. first + k`.
pub fn glf_project_range(
    patch: &CanonicalPatch,
    basis: &SpectralBasis,
    first: usize,
    k: usize,
) -> Result<GlfCoefficients> {
    let n = patch.vertex_count();
    if basis.dimension() != n {
        return Err(Error::Config(format!(
            "basis has dimension {} but the patch has {n} vertices",
            basis.dimension()
        )));
    }
    if first + k > basis.len() {
        return Err(Error::Config(format!(
            "requested eigenvectors {first}..{} but the basis holds {}",
            first + k,
            basis.len()
        )));
    }
    let coords = DMatrix::from_fn(n, 3, |i, c| patch.vertices[i][c]);
    let v = basis.eigenvectors.columns(first, k);
    Ok(GlfCoefficients {
        rows: v.transpose() * coords,
    })
}

pub fn glf_norms(coeffs: &GlfCoefficients) -> Vec<f64> {
    coeffs.rows.row_iter().map(|r| r.norm()).collect()
}

/// Coordinates recovered from the first `k` coefficients.
pub fn glf_reconstruct(coeffs: &GlfCoefficients, basis: &SpectralBasis) -> Vec<Point3<f64>> {
    let k = coeffs.rows.nrows();
    let xyz = basis.eigenvectors.columns(0, k) * &coeffs.rows;
    xyz.row_iter().map(|r| Point3::new(r[0], r[1], r[2])).collect()
}

impl GlfCoefficients {
    /// Row-major flattening `[e0x, e0y, e0z, e1x, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.transpose().as_slice().to_vec()
    }
}

/// Describes how a face vector is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub method: Method,
    pub mode: FeatureMode,
    /// Eigenpairs per patch.
    pub k: usize,
    /// Index of the first eigenvector used (1 when the constant one is skipped).
    #[serde(default)]
    pub first: usize,
    pub landmarks: Vec<String>,
}

impl FeatureLayout {
    pub fn channels(&self) -> usize {
        match (self.method, self.mode) {
            (Method::Glf, FeatureMode::Coords) => 3,
            _ => 1,
        }
    }

    pub fn block_len(&self) -> usize {
        self.k * self.channels()
    }

    pub fn len(&self) -> usize {
        self.landmarks.len() * self.block_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column names `L{label}_e{i}_{x|y|z}` (or `L{label}_e{i}` for
    /// single-channel features).
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.len());
        for label in &self.landmarks {
            for e in self.first..self.first + self.k {
                if self.channels() == 3 {
                    for c in ["x", "y", "z"] {
                        names.push(format!("L{label}_e{e}_{c}"));
                    }
                } else {
                    names.push(format!("L{label}_e{e}"));
                }
            }
        }
        names
    }

    /// Column indices that survive truncating every block to `k` eigenpairs.
    pub fn truncated_columns(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.k {
            return Err(Error::Config(format!("cannot truncate {} eigenpairs to {k}", self.k)));
        }
        let c = self.channels();
        let block = self.block_len();
        Ok((0..self.landmarks.len())
            .flat_map(|l| (0..k * c).map(move |j| l * block + j))
            .collect())
    }
}

/// One face's concatenated per-landmark features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceFeatureVector {
    pub method: Method,
    pub values: Vec<f64>,
    /// One flag per landmark; missing blocks are zero-filled.
    pub missing: Vec<bool>,
}

impl FaceFeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn any_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }
}

/// Concatenates per-landmark blocks in order, zero-filling missing ones.
pub fn assemble_face(blocks: &[Option<Vec<f64>>], method: Method, block_len: usize) -> Result<FaceFeatureVector> {
    let mut values = Vec::with_capacity(blocks.len() * block_len);
    let mut missing = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        match b {
            Some(b) if b.len() == block_len => {
                values.extend_from_slice(b);
                missing.push(false);
            }
            Some(b) => {
                return Err(Error::Config(format!(
                    "patch {i} has {} features, expected {block_len}",
                    b.len()
                )))
            }
            None => {
                values.resize(values.len() + block_len, 0.0);
                missing.push(true);
            }
        }
    }
    Ok(FaceFeatureVector { method, values, missing })
}

/// Per-dimension z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut count = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for row in rows {
            if count == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            } else if row.len() != mean.len() {
                return Err(Error::Config("rows have inconsistent lengths".into()));
            }
            count += 1;
            for (j, &x) in row.iter().enumerate() {
                let delta = x - mean[j];
                mean[j] += delta / count as f64;
                m2[j] += delta * (x - mean[j]);
            }
        }
        if count == 0 {
            return Err(Error::Config("cannot standardize an empty training set".into()));
        }
        let scale = m2
            .iter()
            .map(|&s| {
                let sd = (s / count as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}
