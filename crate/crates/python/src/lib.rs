//! Python bindings. Results with nested structure (evaluation reports) are
//! handed over as plain dicts built from their JSON form.

use std::path::PathBuf;

use glf_core::classify::{self, ClassifierConfig, EvalConfig, Kernel, SvmParams};
use glf_core::data::{self, SynthConfig};
use glf_core::features::{self, FeatureMatrix, FeatureMode, Method};
use glf_core::mesh::{self, TriangleMesh};
use glf_core::patch::{self, CanonicalPatch, PatchConfig, PatchOptions};
use glf_core::pipeline::{self, ExtractionConfig, FeatureExtractor};
use glf_core::spectral::{self, SpectralBasis};
use nalgebra::Point3;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: glf_core::Error) -> PyErr {
    use glf_core::Error as E;
    match e {
        E::Io { .. } => PyIOError::new_err(e.to_string()),
        E::Config(_) | E::Parse { .. } | E::Schema(_) | E::Structure(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_dict<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Landmarks as `(label, xyz)` pairs.
type Marks = Vec<(String, [f64; 3])>;

fn points(p: &[Point3<f64>]) -> Vec<[f64; 3]> {
    p.iter().map(|v| [v.x, v.y, v.z]).collect()
}

#[pyclass(name = "PatchConfig", module = "glf", frozen)]
#[derive(Clone)]
struct PyPatchConfig {
    inner: PatchConfig,
}

#[pymethods]
impl PyPatchConfig {
    #[new]
    #[pyo3(signature = (lambda_min = 5.0, lambda_max = 20.0, curves = 15, samples = 50))]
    fn new(lambda_min: f64, lambda_max: f64, curves: usize, samples: usize) -> PyResult<Self> {
        Ok(Self {
            inner: PatchConfig::new(lambda_min, lambda_max, curves, samples).map_err(err)?,
        })
    }

    #[getter]
    fn lambda_min(&self) -> f64 {
        self.inner.lambda_min
    }

    #[getter]
    fn lambda_max(&self) -> f64 {
        self.inner.lambda_max
    }

    #[getter]
    fn curves(&self) -> usize {
        self.inner.curves
    }

    #[getter]
    fn samples(&self) -> usize {
        self.inner.samples
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    /// Radii of the level curves, innermost first.
    fn levels(&self) -> Vec<f64> {
        self.inner.levels()
    }

    /// Triangles of the canonical patch layout.
    fn connectivity(&self) -> Vec<[usize; 3]> {
        patch::canonical_connectivity(&self.inner)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "PatchConfig(lambda_min={}, lambda_max={}, curves={}, samples={})",
            c.lambda_min, c.lambda_max, c.curves, c.samples
        )
    }
}

#[pyclass(name = "TriangleMesh", module = "glf", frozen)]
struct PyMesh {
    inner: TriangleMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<Self> {
        let v = vertices.into_iter().map(Point3::from).collect();
        Ok(Self {
            inner: TriangleMesh::new(v, faces).map_err(err)?,
        })
    }

    /// Reads an OBJ or PLY file (format from the extension).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let format = mesh::MeshFormat::from_path(&path)
            .ok_or_else(|| PyValueError::new_err(format!("unknown mesh format: {}", path.display())))?;
        Ok(Self {
            inner: mesh::load_mesh(&path, format).map_err(err)?,
        })
    }

    fn save_obj(&self, path: PathBuf) -> PyResult<()> {
        mesh::save_obj(&self.inner, path).map_err(err)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_faces(&self) -> usize {
        self.inner.num_faces()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        points(self.inner.vertices())
    }

    fn faces(&self) -> Vec<[usize; 3]> {
        self.inner.faces().to_vec()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn __repr__(&self) -> String {
        format!("TriangleMesh({} vertices, {} faces)", self.inner.num_vertices(), self.inner.num_faces())
    }
}

#[pyclass(name = "SpectralBasis", module = "glf", frozen)]
struct PyBasis {
    inner: SpectralBasis,
}

#[pymethods]
impl PyBasis {
    /// Loads a basis file written for patches with `curves` x `samples` samples.
    #[staticmethod]
    fn load(path: PathBuf, curves: usize, samples: usize) -> PyResult<Self> {
        Ok(Self {
            inner: spectral::load_basis(path, spectral::config_hash(curves, samples)).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf, curves: usize, samples: usize) -> PyResult<()> {
        spectral::save_basis(&self.inner, spectral::config_hash(curves, samples), path).map_err(err)
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn eigenvector(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("basis has {} vectors", self.inner.len())));
        }
        Ok(self.inner.eigenvectors.column(i).iter().copied().collect())
    }
}

#[pyclass(name = "CanonicalPatch", module = "glf", frozen)]
struct PyPatch {
    inner: CanonicalPatch,
}

#[pymethods]
impl PyPatch {
    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn curves(&self) -> usize {
        self.inner.curves
    }

    #[getter]
    fn samples(&self) -> usize {
        self.inner.samples
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        points(&self.inner.vertices)
    }

    fn __len__(&self) -> usize {
        self.inner.vertex_count()
    }
}

#[pyclass(name = "FeatureMatrix", module = "glf", frozen)]
struct PyFeatures {
    inner: FeatureMatrix,
}

#[pymethods]
impl PyFeatures {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: features::read_features(path).map_err(err)?,
        })
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.layout.method.to_string()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.layout.k
    }

    fn names(&self) -> Vec<String> {
        self.inner.layout.names()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.samples.iter().map(|s| s.features.clone()).collect()
    }

    fn subjects(&self) -> Vec<String> {
        self.inner.samples.iter().map(|s| s.subject.clone()).collect()
    }

    fn expressions(&self) -> Vec<String> {
        self.inner.samples.iter().map(|s| s.expression.to_string()).collect()
    }

    fn intensities(&self) -> Vec<u8> {
        self.inner.samples.iter().map(|s| s.intensity).collect()
    }

    fn truncate(&self, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.truncate_k(k).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (config, k = None))]
fn shared_basis(py: Python<'_>, config: &PyPatchConfig, k: Option<usize>) -> PyResult<PyBasis> {
    let cfg = config.inner;
    let k = k.unwrap_or(cfg.vertex_count());
    let inner = py.detach(|| pipeline::shared_basis(&cfg, k)).map_err(err)?;
    Ok(PyBasis { inner })
}

#[pyfunction]
#[pyo3(signature = (faces, n))]
fn graph_laplacian_eigenvalues(faces: Vec<[usize; 3]>, n: usize) -> PyResult<Vec<f64>> {
    let l = spectral::graph_laplacian(&faces, n).map_err(err)?;
    spectral::eigenvalues_sym(&l).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (mesh, apex, config, label = String::new()))]
fn build_patch(mesh: &PyMesh, apex: [f64; 3], config: &PyPatchConfig, label: String) -> PyResult<PyPatch> {
    let inner = patch::build_patch(&mesh.inner, &label, &Point3::from(apex), &config.inner, &PatchOptions::default())
        .map_err(err)?;
    Ok(PyPatch { inner })
}

/// `k x 3` projections of the patch coordinates onto the first `k` basis vectors.
#[pyfunction]
fn glf_coefficients(patch: &PyPatch, basis: &PyBasis, k: usize) -> PyResult<Vec<[f64; 3]>> {
    let c = features::glf_project(&patch.inner, &basis.inner, k).map_err(err)?;
    Ok(c.rows.row_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

#[pyfunction]
fn glf_norms(patch: &PyPatch, basis: &PyBasis, k: usize) -> PyResult<Vec<f64>> {
    let c = features::glf_project(&patch.inner, &basis.inner, k).map_err(err)?;
    Ok(features::glf_norms(&c))
}

#[pyfunction]
fn shape_dna(patch: &PyPatch, k: usize) -> PyResult<Vec<f64>> {
    let faces = patch::canonical_connectivity(&PatchConfig {
        curves: patch.inner.curves,
        samples: patch.inner.samples,
        ..PatchConfig::default()
    });
    spectral::shape_dna(&patch.inner, &faces, k).map_err(err)
}

#[pyfunction]
fn load_landmarks(path: PathBuf) -> PyResult<Marks> {
    let set = mesh::load_landmarks(path).map_err(err)?;
    Ok(set.iter().map(|l| (l.label.clone(), [l.position.x, l.position.y, l.position.z])).collect())
}

fn synth_config(subjects: usize, levels: u8, seed: u64, amplitude_scale: Option<f64>) -> PyResult<SynthConfig> {
    let mut cfg = SynthConfig {
        subjects,
        levels,
        seed,
        ..SynthConfig::default()
    };
    if let Some(a) = amplitude_scale {
        cfg.amplitude_scale = a;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Writes a synthetic dataset and returns the number of scans.
#[pyfunction]
#[pyo3(signature = (out_dir, subjects = 20, levels = 2, seed = 7, amplitude_scale = None))]
fn synth_generate(
    py: Python<'_>,
    out_dir: PathBuf,
    subjects: usize,
    levels: u8,
    seed: u64,
    amplitude_scale: Option<f64>,
) -> PyResult<usize> {
    let cfg = synth_config(subjects, levels, seed, amplitude_scale)?;
    let m = py.detach(|| data::synth_generate(&cfg, &out_dir)).map_err(err)?;
    Ok(m.len())
}

/// One synthetic face: the mesh and its landmarks as `(label, xyz)` pairs.
#[pyfunction]
#[pyo3(signature = (subject = 0, aus = Vec::new(), level = 1, seed = 7))]
fn synth_face(subject: usize, aus: Vec<u8>, level: u8, seed: u64) -> PyResult<(PyMesh, Marks)> {
    let cfg = synth_config(subject + 1, level.max(1), seed, None)?;
    let (m, marks) = data::synth_face(&cfg, subject, &aus, level, 0).map_err(err)?;
    let marks = marks.iter().map(|l| (l.label.clone(), [l.position.x, l.position.y, l.position.z])).collect();
    Ok((PyMesh { inner: m }, marks))
}

/// Extracts features for every scan in a manifest and writes them to `out`.
/// Returns a summary dict.
#[pyfunction]
#[pyo3(signature = (manifest, out, method = "glf", k = 50, mode = "coords", config = None))]
fn extract_features(
    py: Python<'_>,
    manifest: PathBuf,
    out: PathBuf,
    method: &str,
    k: usize,
    mode: &str,
    config: Option<&PyPatchConfig>,
) -> PyResult<Py<PyAny>> {
    let cfg = ExtractionConfig {
        patch: config.map_or_else(PatchConfig::default, |c| c.inner),
        method: method.parse::<Method>().map_err(err)?,
        mode: mode.parse::<FeatureMode>().map_err(err)?,
        k,
        ..ExtractionConfig::default()
    };
    let summary = py
        .detach(|| -> glf_core::Result<_> {
            let m = data::load_manifest(&manifest)?;
            let labels = match m.records.first() {
                Some(r) => mesh::load_landmarks(&r.landmarks)?.labels(),
                None => Vec::new(),
            };
            let ex = FeatureExtractor::new(cfg)?.extract(&m.records, &labels)?;
            features::write_features(&out, &ex.matrix, features::FeatureFormat::from_path(&out))?;
            Ok(serde_json::json!({
                "rows": ex.matrix.len(),
                "columns": ex.matrix.layout.len(),
                "failed_scans": ex.failed_scans,
                "missing_patches": ex.missing_patches,
            }))
        })
        .map_err(err)?;
    to_dict(py, &summary)
}

fn eval_config(classifier: &str, folds: usize, seed: u64, c: f64, gamma: Option<f64>) -> PyResult<EvalConfig> {
    let classifier = match classifier {
        "flda" => ClassifierConfig::Flda,
        "svm" | "svm-rbf" => ClassifierConfig::Svm(SvmParams {
            kernel: Kernel::Rbf { gamma },
            c,
            ..SvmParams::default()
        }),
        "svm-linear" => ClassifierConfig::Svm(SvmParams {
            kernel: Kernel::Linear,
            c,
            ..SvmParams::default()
        }),
        other => {
            return Err(PyValueError::new_err(format!(
                "classifier must be 'svm', 'svm-linear' or 'flda', got '{other}'"
            )))
        }
    };
    let cfg = EvalConfig { classifier, folds, seed };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Identity-disjoint cross-validated expression recognition.
#[pyfunction]
#[pyo3(signature = (features, classifier = "svm", folds = 10, seed = 0, c = 1.0, gamma = None, control_seed = None))]
#[allow(clippy::too_many_arguments)]
fn evaluate_expressions(
    py: Python<'_>,
    features: &PyFeatures,
    classifier: &str,
    folds: usize,
    seed: u64,
    c: f64,
    gamma: Option<f64>,
    control_seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let cfg = eval_config(classifier, folds, seed, c, gamma)?;
    let data = &features.inner;
    let result = py
        .detach(|| match control_seed {
            Some(s) => classify::evaluate_expressions(&classify::shuffle_expressions(data, s), &cfg),
            None => classify::evaluate_expressions(data, &cfg),
        })
        .map_err(err)?;
    to_dict(py, &result)
}

/// Per-AU detection scores and the positive-weighted F1.
#[pyfunction]
#[pyo3(signature = (features, classifier = "svm", folds = 10, seed = 0, c = 1.0, gamma = None))]
fn evaluate_aus(
    py: Python<'_>,
    features: &PyFeatures,
    classifier: &str,
    folds: usize,
    seed: u64,
    c: f64,
    gamma: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let cfg = eval_config(classifier, folds, seed, c, gamma)?;
    let data = &features.inner;
    let result = py.detach(|| classify::evaluate_aus(data, &cfg)).map_err(err)?;
    to_dict(py, &result)
}

/// Expression accuracy for each `k`, using one fold assignment throughout.
#[pyfunction]
#[pyo3(signature = (features, ks, classifier = "svm", folds = 10, seed = 0))]
fn eigen_sweep(
    py: Python<'_>,
    features: &PyFeatures,
    ks: Vec<usize>,
    classifier: &str,
    folds: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let cfg = eval_config(classifier, folds, seed, 1.0, None)?;
    let data = &features.inner;
    let result = py.detach(|| classify::eigen_sweep(data, &ks, &cfg)).map_err(err)?;
    to_dict(py, &result)
}

#[pymodule]
fn glf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPatchConfig>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyPatch>()?;
    m.add_class::<PyFeatures>()?;
    m.add_function(wrap_pyfunction!(shared_basis, m)?)?;
    m.add_function(wrap_pyfunction!(graph_laplacian_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(build_patch, m)?)?;
    m.add_function(wrap_pyfunction!(glf_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(glf_norms, m)?)?;
    m.add_function(wrap_pyfunction!(shape_dna, m)?)?;
    m.add_function(wrap_pyfunction!(load_landmarks, m)?)?;
    m.add_function(wrap_pyfunction!(synth_generate, m)?)?;
    m.add_function(wrap_pyfunction!(synth_face, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_expressions, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_aus, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_sweep, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
