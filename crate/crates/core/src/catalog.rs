//! Dataset catalog on the shared storage. Every cluster kind sees the same
//! records; stage-in cost is zero unless a cluster declares a bandwidth.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClusterSpec, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub name: String,
    pub size_bytes: u64,
    pub registered_at_ms: Millis,
}

/// On-disk value; the name is the map key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredDataset {
    size_bytes: u64,
    registered_at_ms: Millis,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("dataset `{0}` is already registered")]
    DuplicateDataset(String),
    #[error("dataset name must not be empty")]
    EmptyName,
    #[error("dataset `{0}` is not in the catalog")]
    MissingDataset(String),
    #[error("catalog file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("catalog file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    records: BTreeMap<String, StoredDataset>,
    path: Option<PathBuf>,
}

impl Catalog {
    /// In-memory catalog with no backing file.
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a catalog backed by `path`, loading it if the file exists.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, CatalogError> {
        let path = path.into();
        let records = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| CatalogError::Parse {
                path: path.clone(),
                source,
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => return Err(CatalogError::Io { path, source }),
        };
        Ok(Catalog {
            records,
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn register(
        &mut self,
        name: &str,
        size_bytes: u64,
        now: Millis,
    ) -> Result<DatasetRecord, CatalogError> {
        if name.is_empty() {
            return Err(CatalogError::EmptyName);
        }
        if self.records.contains_key(name) {
            return Err(CatalogError::DuplicateDataset(name.to_string()));
        }
        let stored = StoredDataset {
            size_bytes,
            registered_at_ms: now,
        };
        self.records.insert(name.to_string(), stored);
        if let Err(e) = self.persist() {
            self.records.remove(name);
            return Err(e);
        }
        Ok(to_record(name, stored))
    }

    pub fn get(&self, name: &str) -> Option<DatasetRecord> {
        self.records.get(name).map(|s| to_record(name, *s))
    }

    /// All records for `refs`, or the first missing name. Never partial.
    pub fn resolve(&self, refs: &[String]) -> Result<Vec<DatasetRecord>, CatalogError> {
        refs.iter()
            .map(|name| {
                self.get(name)
                    .ok_or_else(|| CatalogError::MissingDataset(name.clone()))
            })
            .collect()
    }

    pub fn records(&self) -> Vec<DatasetRecord> {
        self.records
            .iter()
            .map(|(name, s)| to_record(name, *s))
            .collect()
    }

    /// Stage-in time for the datasets a job references on a cluster; names
    /// not in the catalog cost nothing.
    pub fn staging_for(&self, refs: &[String], cluster: &ClusterSpec) -> Millis {
        refs.iter()
            .filter_map(|name| self.get(name))
            .map(|d| staging_delay_ms(&d, cluster))
            .fold(0, Millis::saturating_add)
    }

    fn persist(&self) -> Result<(), CatalogError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let io_err = |source| CatalogError::Io {
            path: path.clone(),
            source,
        };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
        let body = serde_json::to_vec_pretty(&self.records).expect("catalog serializes");
        tmp.write_all(&body).map_err(io_err)?;
        tmp.as_file().sync_all().map_err(io_err)?;
        tmp.persist(path).map_err(|e| io_err(e.error))?;
        Ok(())
    }
}

fn to_record(name: &str, s: StoredDataset) -> DatasetRecord {
    DatasetRecord {
        name: name.to_string(),
        size_bytes: s.size_bytes,
        registered_at_ms: s.registered_at_ms,
    }
}

/// `ceil(1000 * size / bandwidth)` when the cluster declares a stage-in
/// bandwidth, zero under uniform shared access.
pub fn staging_delay_ms(dataset: &DatasetRecord, cluster: &ClusterSpec) -> Millis {
    match cluster.staging_bandwidth_bytes_per_s {
        None | Some(0) => 0,
        Some(bw) => {
            let scaled = u128::from(dataset.size_bytes) * 1000;
            let ms = scaled.div_ceil(u128::from(bw));
            Millis::try_from(ms).unwrap_or(Millis::MAX)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ResourceKind;

    fn cluster(kind: ResourceKind, bw: Option<u64>) -> ClusterSpec {
        ClusterSpec {
            cluster_id: format!("{kind}-a"),
            kind,
            node_count: 1,
            cores_per_node: 1,
            speed_factor: 1,
            staging_bandwidth_bytes_per_s: bw,
        }
    }

    fn ds(size: u64) -> DatasetRecord {
        DatasetRecord {
            name: "d".into(),
            size_bytes: size,
            registered_at_ms: 0,
        }
    }

    #[test]
    fn register_and_reject_duplicates() {
        let mut c = Catalog::new();
        let r = c.register("sdss_dr12", 1_000_000_000_000, 5).unwrap();
        assert_eq!(r.size_bytes, 1_000_000_000_000);
        assert!(matches!(
            c.register("sdss_dr12", 1, 6),
            Err(CatalogError::DuplicateDataset(_))
        ));
        assert!(matches!(c.register("", 1, 6), Err(CatalogError::EmptyName)));
    }

    #[test]
    fn resolve_is_atomic() {
        let mut c = Catalog::new();
        c.register("a", 1, 0).unwrap();
        assert_eq!(c.resolve(&[]).unwrap(), vec![]);
        assert_eq!(c.resolve(&["a".into()]).unwrap().len(), 1);
        match c.resolve(&["a".into(), "b".into()]) {
            Err(CatalogError::MissingDataset(name)) => assert_eq!(name, "b"),
            other => panic!("expected MissingDataset, got {other:?}"),
        }
    }

    #[test]
    fn staging_delays() {
        for kind in ResourceKind::ALL {
            assert_eq!(staging_delay_ms(&ds(1 << 40), &cluster(kind, None)), 0);
        }
        let bw = cluster(ResourceKind::Cpu, Some(1_000_000_000));
        assert_eq!(staging_delay_ms(&ds(1_000_000_000), &bw), 1000);
        assert_eq!(staging_delay_ms(&ds(3), &cluster(ResourceKind::Cpu, Some(2))), 1500);
    }

    #[test]
    fn persists_atomically_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        let mut c = Catalog::open(&path).unwrap();
        assert!(c.is_empty());
        c.register("gaia", 42, 7).unwrap();
        let raw: serde_json::Value =
            serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(
            raw,
            serde_json::json!({"gaia": {"size_bytes": 42, "registered_at_ms": 7}})
        );
        let reopened = Catalog::open(&path).unwrap();
        assert_eq!(reopened.get("gaia"), c.get("gaia"));
    }

    #[test]
    fn corrupt_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.json");
        fs::write(&path, b"{not json").unwrap();
        assert!(matches!(Catalog::open(&path), Err(CatalogError::Parse { .. })));
    }
}
