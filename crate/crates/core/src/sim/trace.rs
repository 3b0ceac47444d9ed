use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ClusterSpec, JobSpec, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceJob {
    pub t_ms: Millis,
    pub spec: JobSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultDirective {
    pub t_ms: Millis,
    pub cluster_id: String,
    pub node_index: u32,
    pub down_duration_ms: Millis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDataset {
    pub name: String,
    pub size_bytes: u64,
}

/// Timed job submissions and node faults. Job `i` (0-based) of a trace is
/// assigned job id `i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmissionTrace {
    /// Seed the trace was generated from; recorded, not consumed.
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub jobs: Vec<TraceJob>,
    #[serde(default)]
    pub faults: Vec<FaultDirective>,
    /// Datasets registered on the shared storage before the run.
    #[serde(default)]
    pub datasets: Vec<TraceDataset>,
}

impl SubmissionTrace {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json(&text)?)
    }

    /// Index of the first job submitted earlier than its predecessor.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.jobs
            .windows(2)
            .position(|w| w[1].t_ms < w[0].t_ms)
            .map(|i| i + 1)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Cluster topology file: a JSON array of cluster specs.
pub fn load_clusters(path: &Path) -> Result<Vec<ClusterSpec>, LoadError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
