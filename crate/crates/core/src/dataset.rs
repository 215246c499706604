//! Feature datasets on disk: a JSON manifest plus one features CSV.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::FEATURE_DIM;
use crate::Feature;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEATURES_FILE: &str = "features.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub measurements: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    subjects: Vec<Subject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub measurements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub feature_dim: usize,
    pub features_file: String,
    pub sha256: String,
    pub subjects: Vec<SubjectEntry>,
}

impl Dataset {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &subjects {
            if s.id.is_empty() || s.id.contains([',', '\n', '"']) {
                return Err(Error::Dataset(format!("invalid subject id {:?}", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Dataset(format!("duplicate subject id {}", s.id)));
            }
            if s.measurements.is_empty() {
                return Err(Error::Dataset(format!("subject {} has no measurements", s.id)));
            }
            for m in &s.measurements {
                if m.values.len() != FEATURE_DIM {
                    return Err(Error::Dataset(format!(
                        "subject {} has a feature of width {}",
                        s.id,
                        m.values.len()
                    )));
                }
            }
        }
        Ok(Self { subjects })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn n_rows(&self) -> usize {
        self.subjects.iter().map(|s| s.measurements.len()).sum()
    }

    /// Canonical CSV: `subject_id,measurement_id,f0..f255` with shortest
    /// round-trip decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,measurement_id");
        for i in 0..FEATURE_DIM {
            write!(out, ",f{i}").expect("writing to a String");
        }
        out.push('\n');
        for s in &self.subjects {
            for m in &s.measurements {
                write!(out, "{},{}", s.id, m.measurement_id).expect("writing to a String");
                for v in &m.values {
                    write!(out, ",{v}").expect("writing to a String");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Hex SHA-256 of the canonical CSV.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_csv().as_bytes())
    }

    pub fn manifest(&self, digest: String) -> Manifest {
        Manifest {
            feature_dim: FEATURE_DIM,
            features_file: FEATURES_FILE.into(),
            sha256: digest,
            subjects: self
                .subjects
                .iter()
                .map(|s| SubjectEntry {
                    id: s.id.clone(),
                    measurements: s.measurements.len(),
                })
                .collect(),
        }
    }

    /// Writes `manifest.json` and `features.csv` into `dir` and returns the
    /// digest.
    pub fn write_dir(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir)?;
        let csv = self.to_csv();
        let digest = sha256_hex(csv.as_bytes());
        fs::write(dir.join(FEATURES_FILE), csv)?;
        let manifest = serde_json::to_string_pretty(&self.manifest(digest.clone()))?;
        fs::write(dir.join(MANIFEST_FILE), manifest + "\n")?;
        Ok(digest)
    }

    /// Loads from a dataset directory or a manifest path, verifying the
    /// digest and the per-subject counts.
    pub fn read(path: &Path) -> Result<Self> {
        let manifest_path: PathBuf = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        if manifest.feature_dim != FEATURE_DIM {
            return Err(Error::Dataset(format!(
                "feature width {} (expected {FEATURE_DIM})",
                manifest.feature_dim
            )));
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let bytes = fs::read(base.join(&manifest.features_file))?;
        let actual = sha256_hex(&bytes);
        if actual != manifest.sha256 {
            return Err(Error::Dataset(format!(
                "features digest {actual} does not match manifest {}",
                manifest.sha256
            )));
        }

        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let mut subjects: Vec<Subject> = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != FEATURE_DIM + 2 {
                return Err(Error::Dataset(format!(
                    "row has {} columns (expected {})",
                    record.len(),
                    FEATURE_DIM + 2
                )));
            }
            let id = &record[0];
            let mid: u32 = record[1]
                .parse()
                .map_err(|_| Error::Dataset(format!("bad measurement id {:?}", &record[1])))?;
            let values = record
                .iter()
                .skip(2)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Dataset(format!("bad feature value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let feature = Feature::new(values, id, mid)?;
            match subjects.last_mut() {
                Some(s) if s.id == id => s.measurements.push(feature),
                _ => subjects.push(Subject {
                    id: id.to_string(),
                    measurements: vec![feature],
                }),
            }
        }

        let listed: Vec<SubjectEntry> = subjects
            .iter()
            .map(|s| SubjectEntry {
                id: s.id.clone(),
                measurements: s.measurements.len(),
            })
            .collect();
        if listed != manifest.subjects {
            return Err(Error::Dataset(
                "features file does not match the manifest subject list".into(),
            ));
        }
        Self::new(subjects)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
