//! Dataset manifest: `path,label_index,label_name` CSV. Relative paths are
//! resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use super::msib::read_msib;
use crate::error::{Error, Result};

pub const HEADER: [&str; 3] = ["path", "label_index", "label_name"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    /// As written in the manifest.
    pub path: PathBuf,
    pub label_index: usize,
    pub label_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Directory relative paths resolve against.
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
    /// Label names indexed by label index.
    pub labels: Vec<String>,
}

impl DatasetManifest {
    /// Checks that label indices are dense in `[0, K)` and each index maps to
    /// one name.
    pub fn new(root: PathBuf, records: Vec<ManifestRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyManifest);
        }
        let k = records.iter().map(|r| r.label_index).max().unwrap_or(0) + 1;
        let mut labels: Vec<Option<String>> = vec![None; k];
        for r in &records {
            match &labels[r.label_index] {
                None => labels[r.label_index] = Some(r.label_name.clone()),
                Some(name) if *name != r.label_name => {
                    return Err(Error::Config(format!(
                        "label index {} named both {name:?} and {:?}",
                        r.label_index, r.label_name
                    )))
                }
                Some(_) => {}
            }
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| Error::Config(format!("label indices not dense: {i} unused"))))
            .collect::<Result<_>>()?;
        Ok(DatasetManifest { root, records, labels })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn resolve(&self, record: usize) -> PathBuf {
        self.root.join(&self.records[record].path)
    }

    /// Reads every referenced raster once, failing on the first that does
    /// not parse.
    pub fn verify(&self) -> Result<()> {
        for i in 0..self.len() {
            read_msib(&self.resolve(i))?;
        }
        Ok(())
    }
}

pub fn write_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(HEADER).map_err(io)?;
    for r in &manifest.records {
        let p = r.path.to_string_lossy();
        w.write_record([p.as_ref(), &r.label_index.to_string(), &r.label_name])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| fmt(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(fmt(format!("expected header {}", HEADER.join(","))));
    }
    let mut records = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| fmt(e.to_string()))?;
        let label_index = row[1]
            .trim()
            .parse()
            .map_err(|_| fmt(format!("bad label index {:?}", &row[1])))?;
        records.push(ManifestRecord {
            path: PathBuf::from(&row[0]),
            label_index,
            label_name: row[2].to_string(),
        });
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::new(root, records)
}
