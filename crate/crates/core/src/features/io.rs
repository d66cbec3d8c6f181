//! Feature matrix persistence.
//!
//! Both formats write a `<path>.json` sidecar holding the layout and the
//! per-row labels. The CSV body repeats the labels in leading columns
//! (`subject,expression,intensity,aus,missing`) followed by one named column
//! per feature; the binary body is row-major little-endian `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FeatureLayout;
use crate::classify::LabeledSample;
use crate::error::{Error, Result};
use crate::labels::{format_aus, parse_aus};

const LABEL_COLUMNS: [&str; 5] = ["subject", "expression", "intensity", "aus", "missing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// Labelled face vectors sharing one layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub layout: FeatureLayout,
    pub samples: Vec<LabeledSample>,
    /// Hash of the patch configuration the features were extracted with.
    pub config_hash: Option<u64>,
}

impl FeatureMatrix {
    pub fn new(layout: FeatureLayout, samples: Vec<LabeledSample>) -> Result<Self> {
        let width = layout.len();
        let blocks = layout.landmarks.len();
        for s in &samples {
            if s.features.len() != width || s.missing.len() != blocks {
                return Err(Error::Config(format!(
                    "sample {}/{} has {} features and {} flags, layout expects {width} and {blocks}",
                    s.subject,
                    s.expression,
                    s.features.len(),
                    s.missing.len()
                )));
            }
        }
        Ok(Self {
            layout,
            samples,
            config_hash: None,
        })
    }

    pub fn with_config_hash(mut self, hash: u64) -> Self {
        self.config_hash = Some(hash);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keeps the first `k` eigenpairs of every patch block.
    pub fn truncate_k(&self, k: usize) -> Result<FeatureMatrix> {
        let cols = self.layout.truncated_columns(k)?;
        let layout = FeatureLayout { k, ..self.layout.clone() };
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                features: cols.iter().map(|&c| s.features[c]).collect(),
                ..s.clone()
            })
            .collect();
        Ok(FeatureMatrix {
            layout,
            samples,
            config_hash: self.config_hash,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: FeatureFormat,
    #[serde(default)]
    config_hash: Option<u64>,
    layout: FeatureLayout,
    rows: Vec<RowMeta>,
}

#[derive(Serialize, Deserialize)]
struct RowMeta {
    subject: String,
    expression: crate::labels::Expression,
    intensity: u8,
    aus: Vec<u8>,
    missing: Vec<bool>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_features(path: impl AsRef<Path>, matrix: &FeatureMatrix, format: FeatureFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        FeatureFormat::Csv => write_csv(path, matrix)?,
        FeatureFormat::Binary => {
            let mut out = Vec::with_capacity(matrix.len() * matrix.layout.len() * 8);
            for s in &matrix.samples {
                for v in &s.features {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(path, out).map_err(|e| Error::io(path, e))?;
        }
    }
    let side = Sidecar {
        format,
        config_hash: matrix.config_hash,
        layout: matrix.layout.clone(),
        rows: matrix
            .samples
            .iter()
            .map(|s| RowMeta {
                subject: s.subject.clone(),
                expression: s.expression,
                intensity: s.intensity,
                aus: s.aus.clone(),
                missing: s.missing.clone(),
            })
            .collect(),
    };
    let sp = sidecar_path(path);
    let file = fs::File::create(&sp).map_err(|e| Error::io(&sp, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &side)?;
    Ok(())
}

fn write_csv(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = LABEL_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(matrix.layout.names());
    w.write_record(&header)?;
    for s in &matrix.samples {
        let missing: Vec<String> = s
            .missing
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| matrix.layout.landmarks[i].clone())
            .collect();
        let mut rec = vec![
            s.subject.clone(),
            s.expression.to_string(),
            s.intensity.to_string(),
            format_aus(&s.aus),
            missing.join("+"),
        ];
        rec.extend(s.features.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let sp = sidecar_path(path);
    let text = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    let side: Sidecar = serde_json::from_str(&text)?;
    let width = side.layout.len();
    let samples = match side.format {
        FeatureFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() != side.rows.len() * width * 8 {
                return Err(Error::parse(
                    path.display(),
                    format!("byte {}", bytes.len()),
                    format!("expected {} rows of {width} values", side.rows.len()),
                ));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            side.rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| sample(r, values[i * width..(i + 1) * width].to_vec()))
                .collect()
        }
        FeatureFormat::Csv => read_csv_body(path, &side)?,
    };
    let m = FeatureMatrix::new(side.layout, samples)?;
    Ok(FeatureMatrix {
        config_hash: side.config_hash,
        ..m
    })
}

fn sample(r: RowMeta, features: Vec<f64>) -> LabeledSample {
    LabeledSample {
        subject: r.subject,
        expression: r.expression,
        intensity: r.intensity,
        aus: r.aus,
        features,
        missing: r.missing,
    }
}

fn read_csv_body(path: &Path, side: &Sidecar) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let mut expected: Vec<String> = LABEL_COLUMNS.iter().map(|s| s.to_string()).collect();
    expected.extend(side.layout.names());
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::parse(path.display(), "line 1", "header does not match the feature layout"));
    }
    let mut out = Vec::with_capacity(side.rows.len());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = format!("line {}", i + 2);
        let bad = |msg: String| Error::parse(path.display(), line.clone(), msg);
        let meta = side
            .rows
            .get(i)
            .ok_or_else(|| bad("more rows than the sidecar lists".into()))?;
        let expression = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let intensity: u8 = rec[2].parse().map_err(|_| bad(format!("bad intensity '{}'", &rec[2])))?;
        let aus = parse_aus(&rec[3]).map_err(|e| bad(e.to_string()))?;
        if rec[0] != *meta.subject || expression != meta.expression || intensity != meta.intensity || aus != meta.aus
        {
            return Err(bad("labels disagree with the sidecar".into()));
        }
        let features = rec
            .iter()
            .skip(LABEL_COLUMNS.len())
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad number '{v}'"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(LabeledSample {
            subject: meta.subject.clone(),
            expression,
            intensity,
            aus,
            features,
            missing: meta.missing.clone(),
        });
    }
    if out.len() != side.rows.len() {
        return Err(Error::parse(path.display(), "end", "fewer rows than the sidecar lists"));
    }
    Ok(out)
}
