//! Tenancy for the top layer: user accounts with quotas, admission and
//! routing of incoming jobs, and virtual clusters carved out of the cloud
//! pool.
//!
//! This module only keeps books. Node carving itself goes through the
//! scheduler so that carved nodes are invisible to batch planning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{JobShape, JobSpec, Millis, ResourceKind};
use crate::scheduler::{NodeHolder, Scheduler, VClusterId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub max_concurrent_jobs: u32,
    pub max_nodes_in_use: u32,
    pub max_vcluster_nodes: u32,
}

impl Quota {
    pub fn unlimited() -> Self {
        Quota {
            max_concurrent_jobs: u32::MAX,
            max_nodes_in_use: u32::MAX,
            max_vcluster_nodes: u32::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: String,
    pub display_name: String,
    pub quota: Quota,
    pub created_at_ms: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VClusterState {
    Provisioning,
    Ready,
    Released,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualCluster {
    pub vcluster_id: u64,
    pub owner: String,
    pub cluster_id: String,
    pub node_indices: Vec<u32>,
    /// Opaque label such as "spark" or "mapreduce".
    pub image: String,
    pub state: VClusterState,
    pub created_at_ms: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub released_at_ms: Option<Millis>,
}

/// Which layer an admitted job is handed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Elastic data-parallel work on the cloud pool.
    Cloud,
    /// Rigid batch work on the HPC clusters.
    Hpc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Error)]
pub enum Rejection {
    #[error("concurrent job quota reached")]
    ConcurrencyQuota,
    #[error("node quota would be exceeded")]
    NodeQuota,
    #[error("no routable resource kind: rigid jobs may not use the cloud pool")]
    UnroutableKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CloudError {
    #[error("user `{0}` already exists")]
    DuplicateUser(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("user id must not be empty")]
    EmptyUserId,
    #[error("node count must be at least 1")]
    ZeroNodes,
    #[error("cloud pool has {free} free nodes, {requested} requested")]
    InsufficientCloudCapacity { requested: u32, free: u32 },
    #[error("virtual-cluster quota of {limit} nodes exceeded ({held} held, {requested} requested)")]
    QuotaExceeded { limit: u32, held: u32, requested: u32 },
    #[error("unknown virtual cluster {0}")]
    UnknownVCluster(u64),
    #[error("virtual cluster {0} is already released")]
    AlreadyReleased(u64),
}

/// Outcome of admission: the route plus the worker cap an elastic job gets
/// so that its growth stays inside the owner's node quota.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub route: Route,
    pub worker_cap: Option<u32>,
    /// Nodes the job counts against the owner's quota while it is live.
    pub committed_nodes: u32,
}

/// What a user currently holds, recounted by the caller from live state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Usage {
    /// Admitted jobs that are not terminal.
    pub live_jobs: u32,
    /// Nodes committed by those jobs.
    pub committed_nodes: u32,
}

pub fn route(spec: &JobSpec, hybrid_rigid_on_cloud: bool) -> Result<Route, Rejection> {
    match spec.shape {
        JobShape::Elastic { .. } => Ok(Route::Cloud),
        JobShape::Rigid { .. } => {
            let hpc = spec
                .kind_preferences
                .iter()
                .any(|&k| k != ResourceKind::Cloud || hybrid_rigid_on_cloud);
            if hpc {
                Ok(Route::Hpc)
            } else {
                Err(Rejection::UnroutableKind)
            }
        }
    }
}

/// Quota check for one job. Rigid jobs commit their node count; elastic
/// jobs commit up to `max_workers`, capped by the remaining headroom, and
/// need at least `min_workers` of it.
pub fn admit(
    spec: &JobSpec,
    quota: &Quota,
    usage: Usage,
    hybrid_rigid_on_cloud: bool,
) -> Result<Admission, Rejection> {
    if usage.live_jobs >= quota.max_concurrent_jobs {
        return Err(Rejection::ConcurrencyQuota);
    }
    let headroom = quota.max_nodes_in_use.saturating_sub(usage.committed_nodes);
    let (needed, cap) = match spec.shape {
        JobShape::Rigid { node_count } => (node_count, None),
        JobShape::Elastic {
            min_workers,
            max_workers,
        } => (min_workers, Some(max_workers.min(headroom))),
    };
    if needed > headroom {
        return Err(Rejection::NodeQuota);
    }
    let route = route(spec, hybrid_rigid_on_cloud)?;
    Ok(Admission {
        route,
        worker_cap: cap,
        committed_nodes: cap.unwrap_or(needed),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CloudLayer {
    users: BTreeMap<String, UserAccount>,
    vclusters: BTreeMap<u64, VirtualCluster>,
    next_vcluster: u64,
}

impl CloudLayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn create_user(
        &mut self,
        user_id: &str,
        display_name: Option<&str>,
        quota: Quota,
        now: Millis,
    ) -> Result<&UserAccount, CloudError> {
        if user_id.is_empty() {
            return Err(CloudError::EmptyUserId);
        }
        if self.users.contains_key(user_id) {
            return Err(CloudError::DuplicateUser(user_id.to_string()));
        }
        let account = UserAccount {
            user_id: user_id.to_string(),
            display_name: display_name.unwrap_or(user_id).to_string(),
            quota,
            created_at_ms: now,
        };
        Ok(self.users.entry(user_id.to_string()).or_insert(account))
    }

    pub fn user(&self, user_id: &str) -> Result<&UserAccount, CloudError> {
        self.users
            .get(user_id)
            .ok_or_else(|| CloudError::UnknownUser(user_id.to_string()))
    }

    pub fn users(&self) -> impl Iterator<Item = &UserAccount> {
        self.users.values()
    }

    pub fn vcluster(&self, id: u64) -> Option<&VirtualCluster> {
        self.vclusters.get(&id)
    }

    pub fn vclusters(&self) -> impl Iterator<Item = &VirtualCluster> {
        self.vclusters.values()
    }

    /// Nodes held by the user's live virtual clusters.
    pub fn vcluster_nodes_held(&self, user_id: &str) -> u32 {
        self.vclusters
            .values()
            .filter(|v| v.owner == user_id && v.state != VClusterState::Released)
            .map(|v| v.node_indices.len() as u32)
            .sum()
    }

    /// The cloud pool is the first cloud-kind cluster by id.
    pub fn cloud_pool(sched: &Scheduler) -> Option<&str> {
        sched
            .clusters()
            .iter()
            .find(|c| c.spec.kind == ResourceKind::Cloud)
            .map(|c| c.id())
    }

    /// Carves `node_count` free cloud nodes, first-fit by ascending index.
    pub fn provision(
        &mut self,
        sched: &mut Scheduler,
        user_id: &str,
        node_count: u32,
        image: &str,
        now: Millis,
    ) -> Result<&VirtualCluster, CloudError> {
        let quota = self.user(user_id)?.quota;
        if node_count == 0 {
            return Err(CloudError::ZeroNodes);
        }
        let held = self.vcluster_nodes_held(user_id);
        if u64::from(held) + u64::from(node_count) > u64::from(quota.max_vcluster_nodes) {
            return Err(CloudError::QuotaExceeded {
                limit: quota.max_vcluster_nodes,
                held,
                requested: node_count,
            });
        }
        let Some(pool) = Self::cloud_pool(sched).map(str::to_string) else {
            return Err(CloudError::InsufficientCloudCapacity {
                requested: node_count,
                free: 0,
            });
        };
        let id = self.next_vcluster + 1;
        let nodes = sched
            .carve(&pool, node_count, VClusterId(id))
            .map_err(|_| CloudError::InsufficientCloudCapacity {
                requested: node_count,
                free: sched.cluster(&pool).map_or(0, |c| c.free_count()),
            })?;
        self.next_vcluster = id;
        let vc = VirtualCluster {
            vcluster_id: id,
            owner: user_id.to_string(),
            cluster_id: pool,
            node_indices: nodes,
            image: image.to_string(),
            // Provisioning is instantaneous in virtual time.
            state: VClusterState::Ready,
            created_at_ms: now,
            released_at_ms: None,
        };
        Ok(self.vclusters.entry(id).or_insert(vc))
    }

    /// Returns a virtual cluster's nodes to the scheduler.
    pub fn release(
        &mut self,
        sched: &mut Scheduler,
        id: u64,
        now: Millis,
    ) -> Result<Vec<u32>, CloudError> {
        let vc = self
            .vclusters
            .get_mut(&id)
            .ok_or(CloudError::UnknownVCluster(id))?;
        if vc.state == VClusterState::Released {
            return Err(CloudError::AlreadyReleased(id));
        }
        let freed = sched
            .uncarve(&vc.cluster_id, VClusterId(id))
            .expect("vcluster names a known cluster");
        vc.state = VClusterState::Released;
        vc.released_at_ms = Some(now);
        Ok(freed)
    }
}

/// Checks that every node of every cluster is exactly one of free, held by
/// a live job allocation, or held by a live virtual cluster, and that those
/// holdings agree with the scheduler's and cloud layer's records.
pub fn check_partition(sched: &Scheduler, cloud: &CloudLayer) -> Result<(), String> {
    for cluster in sched.clusters() {
        for (i, slot) in cluster.slots().iter().enumerate() {
            let i = i as u32;
            match slot.holder {
                NodeHolder::Free => {}
                NodeHolder::Job(job) => {
                    let owned = sched.live().get(&job).is_some_and(|l| {
                        l.allocation.cluster_id == cluster.id()
                            && l.allocation.node_indices.contains(&i)
                    });
                    if !owned {
                        return Err(format!("{}:{i} held by {job} without an allocation", cluster.id()));
                    }
                }
                NodeHolder::VCluster(VClusterId(v)) => {
                    let owned = cloud.vcluster(v).is_some_and(|vc| {
                        vc.state != VClusterState::Released
                            && vc.cluster_id == cluster.id()
                            && vc.node_indices.contains(&i)
                    });
                    if !owned {
                        return Err(format!("{}:{i} held by vcluster {v} that does not own it", cluster.id()));
                    }
                }
            }
        }
    }
    for (job, live) in sched.live() {
        let cluster = &sched.clusters()[live.cluster];
        for &n in &live.allocation.node_indices {
            if cluster.slot(n).map(|s| s.holder) != Some(NodeHolder::Job(*job)) {
                return Err(format!("{job} lists {}:{n} but does not hold it", cluster.id()));
            }
        }
    }
    for vc in cloud.vclusters().filter(|v| v.state != VClusterState::Released) {
        let cluster = sched
            .cluster(&vc.cluster_id)
            .ok_or_else(|| format!("vcluster {} on unknown cluster", vc.vcluster_id))?;
        for &n in &vc.node_indices {
            if cluster.slot(n).map(|s| s.holder) != Some(NodeHolder::VCluster(VClusterId(vc.vcluster_id))) {
                return Err(format!("vcluster {} lists {}:{n} but does not hold it", vc.vcluster_id, vc.cluster_id));
            }
        }
    }
    Ok(())
}
