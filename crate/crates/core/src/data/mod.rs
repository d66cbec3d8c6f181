//! Dataset manifests, the BU-3DFE file-name adapter and the synthetic generator.

mod synth;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{format_aus, parse_aus, Expression};

pub use synth::{
    landmark_labels, synth_face, synth_generate, synth_scans, SynthConfig, SynthScan, EXPRESSION_AUS,
};

/// Highest intensity level accepted in a manifest.
pub const MAX_INTENSITY: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub subject: String,
    pub expression: Expression,
    pub intensity: u8,
    pub mesh: PathBuf,
    pub landmarks: PathBuf,
    #[serde(default)]
    pub aus: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if r.intensity == 0 || r.intensity > MAX_INTENSITY {
                return Err(Error::Schema(format!(
                    "{}/{}: intensity {} outside 1..={MAX_INTENSITY}",
                    r.subject, r.expression, r.intensity
                )));
            }
            if r.subject.trim().is_empty() {
                return Err(Error::Schema("empty subject id".into()));
            }
            if !seen.insert((r.subject.clone(), r.expression, r.intensity)) {
                return Err(Error::Schema(format!(
                    "duplicate record for subject {} expression {} intensity {}",
                    r.subject, r.expression, r.intensity
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Sorted by subject, expression, then intensity.
    pub fn sorted(mut self) -> Self {
        self.records
            .sort_by(|a, b| (&a.subject, a.expression, a.intensity).cmp(&(&b.subject, b.expression, b.intensity)));
        self
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    subject: String,
    expression: String,
    intensity: String,
    mesh: String,
    landmarks: String,
    #[serde(default)]
    aus: String,
}

const HEADER: [&str; 6] = ["subject", "expression", "intensity", "mesh", "landmarks", "aus"];

/// Reads a CSV (`.csv`) or JSON manifest. Relative paths are resolved
/// against the manifest's directory and must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut records = if is_json {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        m.records
    } else {
        read_csv_manifest(path)?
    };
    for r in &mut records {
        r.mesh = base.join(&r.mesh);
        r.landmarks = base.join(&r.landmarks);
        for p in [&r.mesh, &r.landmarks] {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "listed in manifest but missing"),
                ));
            }
        }
    }
    DatasetManifest::new(records)
}

fn read_csv_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path.display(), "header", format!("{other:?}")),
        })?;
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER && names != HEADER[..5] {
        return Err(Error::parse(
            path.display(),
            "line 1",
            format!("expected header '{}'", HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = format!("line {}", i + 2);
        let row = row.map_err(|e| Error::parse(path.display(), &line, e))?;
        let expression: Expression = row.expression.parse()?;
        let intensity = row
            .intensity
            .trim()
            .parse()
            .map_err(|_| Error::parse(path.display(), &line, format!("bad intensity '{}'", row.intensity)))?;
        out.push(ManifestRecord {
            subject: row.subject.trim().to_string(),
            expression,
            intensity,
            mesh: PathBuf::from(row.mesh.trim()),
            landmarks: PathBuf::from(row.landmarks.trim()),
            aus: parse_aus(&row.aus)?,
        });
    }
    Ok(out)
}

/// Writes a CSV manifest; paths under the manifest's directory are stored relative to it.
pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in &manifest.records {
        w.write_record([
            r.subject.clone(),
            r.expression.to_string(),
            r.intensity.to_string(),
            rel(&r.mesh),
            rel(&r.landmarks),
            format_aus(&r.aus),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Decodes a BU-3DFE style stem such as `F0001_AN01WH_F3D`: subject,
/// two-letter expression code, two-digit level and a race code. Neutral
/// scans (`NE00`) and unrelated names yield `None`.
pub fn parse_bu3dfe_name(stem: &str) -> Option<(String, Expression, u8)> {
    let mut parts = stem.split('_');
    let subject = parts.next()?;
    let code = parts.next()?;
    let valid_subject = subject.len() == 5
        && matches!(subject.as_bytes()[0], b'F' | b'M')
        && subject[1..].bytes().all(|b| b.is_ascii_digit());
    if !valid_subject || code.len() < 4 || !code.is_ascii() {
        return None;
    }
    let expression = code[..2].parse().ok()?;
    let level: u8 = code[2..4].parse().ok()?;
    (1..=MAX_INTENSITY)
        .contains(&level)
        .then(|| (subject.to_string(), expression, level))
}

/// Builds a manifest from a directory of BU-3DFE named meshes. Each mesh
/// `<stem>.<mesh_ext>` needs a landmark file `<stem>.csv` beside it.
/// Returns the manifest and the stems skipped for lacking landmarks.
pub fn scan_bu3dfe_dir(dir: impl AsRef<Path>, mesh_ext: &str) -> Result<(DatasetManifest, Vec<String>)> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case(mesh_ext))
            {
                paths.push(p);
            }
        }
    }
    paths.sort();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for mesh in paths {
        let stem = mesh.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let Some((subject, expression, intensity)) = parse_bu3dfe_name(&stem) else {
            continue;
        };
        let landmarks = mesh.with_extension("csv");
        if !landmarks.exists() {
            skipped.push(stem);
            continue;
        }
        records.push(ManifestRecord {
            subject,
            expression,
            intensity,
            mesh,
            landmarks,
            aus: Vec::new(),
        });
    }
    Ok((DatasetManifest::new(records)?.sorted(), skipped))
}
