use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use hybridsched_core::cloud::Quota;
use hybridsched_core::model::ClusterSpec;
use hybridsched_core::scheduler::SchedulerPolicy;
use hybridsched_core::sim::{load_clusters, LoadError, SimConfig};

pub const ADDR_ENV: &str = "HYBRIDSCHED_ADDR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Virtual time runs `time_scale` times faster than the wall clock.
    #[default]
    Virtual,
    /// Virtual time tracks the wall clock one to one.
    Realtime,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedUser {
    pub user_id: String,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default = "Quota::unlimited")]
    pub quota: Quota,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub listen_addr: String,
    pub mode: ClockMode,
    /// Virtual milliseconds per wall-clock millisecond in virtual mode.
    /// Zero freezes the clock.
    pub time_scale: u64,
    /// How often the clock is pushed forward while idle.
    pub tick_ms: u64,
    /// Header carrying the caller's user id.
    pub auth_header: String,
    pub policy: SchedulerPolicy,
    pub retry_budget: u32,
    /// Inline topology; ignored when `clusters_file` is set.
    pub clusters: Vec<ClusterSpec>,
    pub clusters_file: Option<PathBuf>,
    /// Dataset catalog file, created on first registration.
    pub catalog_path: Option<PathBuf>,
    pub users: Vec<SeedUser>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen_addr: "127.0.0.1:8080".into(),
            mode: ClockMode::Virtual,
            time_scale: 1,
            tick_ms: 50,
            auth_header: "x-user-id".into(),
            policy: SchedulerPolicy::default(),
            retry_budget: 1,
            clusters: Vec::new(),
            clusters_file: None,
            catalog_path: None,
            users: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("loading clusters: {0}")]
    Clusters(#[from] LoadError),
    #[error("no clusters configured")]
    NoClusters,
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ServerConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        // Relative paths are taken relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.clusters_file, &mut config.catalog_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    /// Applies `HYBRIDSCHED_ADDR` if set.
    pub fn with_env(mut self) -> Self {
        if let Ok(addr) = std::env::var(ADDR_ENV) {
            if !addr.is_empty() {
                self.listen_addr = addr;
            }
        }
        self
    }

    pub fn cluster_specs(&self) -> Result<Vec<ClusterSpec>, ConfigError> {
        let specs = match &self.clusters_file {
            Some(path) => load_clusters(path)?,
            None => self.clusters.clone(),
        };
        if specs.is_empty() {
            return Err(ConfigError::NoClusters);
        }
        Ok(specs)
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            policy: self.policy,
            retry_budget: self.retry_budget,
            ..SimConfig::default()
        }
    }

    pub fn effective_scale(&self) -> u64 {
        match self.mode {
            ClockMode::Virtual => self.time_scale,
            ClockMode::Realtime => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let path = dir.join("server.toml");
        std::fs::write(
            &path,
            r#"
listen_addr = "0.0.0.0:9000"
mode = "realtime"
time_scale = 500
catalog_path = "catalog.json"

[policy]
backfill = false

[[clusters]]
cluster_id = "cpu-a"
kind = "cpu"
node_count = 4
cores_per_node = 16
speed_factor = 1

[[users]]
user_id = "alice"
quota = { max_concurrent_jobs = 2, max_nodes_in_use = 8, max_vcluster_nodes = 2 }
"#,
        )
        .unwrap();
        let c = ServerConfig::load(&path).unwrap();
        assert_eq!(c.listen_addr, "0.0.0.0:9000");
        assert_eq!(c.effective_scale(), 1);
        assert!(!c.policy.backfill);
        assert_eq!(c.catalog_path, Some(dir.join("catalog.json")));
        assert_eq!(c.cluster_specs().unwrap().len(), 1);
        assert_eq!(c.users[0].quota.max_concurrent_jobs, 2);
        assert_eq!(c.auth_header, "x-user-id");
    }

    #[test]
    fn rejects_unknown_keys_and_empty_topology() {
        assert!(toml::from_str::<ServerConfig>("listen = 1").is_err());
        assert!(matches!(ServerConfig::default().cluster_specs(), Err(ConfigError::NoClusters)));
    }
}
