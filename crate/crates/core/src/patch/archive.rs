//! Per-scan patch archives: a raw little-endian `f64` block of
//! `N x (1 + K m) x 3` coordinates plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::{CanonicalPatch, PatchConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchArchiveMeta {
    pub config: PatchConfig,
    pub labels: Vec<String>,
    pub missing: Vec<bool>,
    pub vertex_count: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchArchive {
    pub meta: PatchArchiveMeta,
    /// One entry per landmark; `None` where the patch could not be extracted.
    pub patches: Vec<Option<CanonicalPatch>>,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `path` (binary block) and `path.json` (metadata). Missing patches
/// are stored as zeros.
pub fn write_patch_archive(
    path: impl AsRef<Path>,
    cfg: &PatchConfig,
    labels: &[String],
    patches: &[Option<CanonicalPatch>],
) -> Result<()> {
    let path = path.as_ref();
    if labels.len() != patches.len() {
        return Err(Error::Config(format!(
            "{} labels for {} patches",
            labels.len(),
            patches.len()
        )));
    }
    let n = cfg.vertex_count();
    let mut bytes = Vec::with_capacity(patches.len() * n * 24);
    for (i, p) in patches.iter().enumerate() {
        match p {
            Some(p) if p.vertex_count() == n => {
                for v in &p.vertices {
                    for c in 0..3 {
                        bytes.extend_from_slice(&v[c].to_le_bytes());
                    }
                }
            }
            Some(p) => {
                return Err(Error::Config(format!(
                    "patch {i} has {} vertices, config expects {n}",
                    p.vertex_count()
                )))
            }
            None => bytes.resize(bytes.len() + n * 24, 0),
        }
    }
    let meta = PatchArchiveMeta {
        config: *cfg,
        labels: labels.to_vec(),
        missing: patches.iter().map(Option::is_none).collect(),
        vertex_count: n,
        dtype: "f64le".into(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = sidecar(path);
    fs::write(&side, serde_json::to_vec_pretty(&meta)?).map_err(|e| Error::io(&side, e))
}

pub fn read_patch_archive(path: impl AsRef<Path>) -> Result<PatchArchive> {
    let path = path.as_ref();
    let side = sidecar(path);
    let meta: PatchArchiveMeta =
        serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    meta.config.validate()?;
    let n = meta.vertex_count;
    if n != meta.config.vertex_count() || meta.labels.len() != meta.missing.len() {
        return Err(Error::Schema(format!("inconsistent patch archive metadata in {}", side.display())));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != meta.labels.len() * n * 24 {
        return Err(Error::parse(
            path.display(),
            format!("byte {}", bytes.len()),
            format!("expected {} bytes", meta.labels.len() * n * 24),
        ));
    }
    let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut patches = Vec::with_capacity(meta.labels.len());
    for (label, &missing) in meta.labels.iter().zip(&meta.missing) {
        let vertices: Vec<Point3<f64>> = (0..n)
            .map(|_| {
                let x = vals.next().unwrap();
                let y = vals.next().unwrap();
                let z = vals.next().unwrap();
                Point3::new(x, y, z)
            })
            .collect();
        patches.push((!missing).then(|| CanonicalPatch {
            label: label.clone(),
            curves: meta.config.curves,
            samples: meta.config.samples,
            vertices,
        }));
    }
    Ok(PatchArchive { meta, patches })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_missing_patch() {
        let cfg = PatchConfig::new(1.0, 2.0, 2, 3).unwrap();
        let p = CanonicalPatch {
            label: "a".into(),
            curves: 2,
            samples: 3,
            vertices: (0..7).map(|i| Point3::new(i as f64, -0.5 * i as f64, 1e-3)).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.patches");
        let labels = vec!["a".to_string(), "b".to_string()];
        write_patch_archive(&path, &cfg, &labels, &[Some(p.clone()), None]).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 2 * 7 * 24);
        let back = read_patch_archive(&path).unwrap();
        assert_eq!(back.patches, vec![Some(p), None]);
        assert_eq!(back.meta.missing, vec![false, true]);
    }

    #[test]
    fn truncated_archive_rejected() {
        let cfg = PatchConfig::new(1.0, 2.0, 2, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.patches");
        write_patch_archive(&path, &cfg, &["a".to_string()], &[None]).unwrap();
        fs::write(&path, [0u8; 10]).unwrap();
        assert!(read_patch_archive(&path).is_err());
    }
}
