//! The resource-scheduling component: a priority/FIFO queue over typed
//! resource pools, dispatching with conservative backfilling and first-fit
//! node packing, plus fair-share rescaling of elastic jobs on cloud pools.
//!
//! All mutation goes through `&mut Scheduler`; callers serialize commands.

mod cluster;
mod elastic;
mod plan;
mod queue;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_clusters, Allocation, ClusterConfigError, ClusterSpec, InvalidTransition, JobId,
    JobRecord, JobShape, JobState, LifecycleEvent, Millis, ResourceKind, WorkerSample,
};

pub use cluster::{ClusterState, NodeCounts, NodeHolder, NodeSlot, VClusterId};
pub use elastic::fair_shares;
pub use queue::{JobQueue, QueueEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerPolicy {
    /// Let later queue entries start ahead of a blocked head when they
    /// cannot delay its reservation.
    pub backfill: bool,
    /// Allow rigid jobs that list `cloud` to run on cloud-pool nodes.
    pub hybrid_rigid_on_cloud: bool,
    /// Restrict every job to its first preferred kind (the statically
    /// partitioned baseline).
    pub static_partition: bool,
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        SchedulerPolicy {
            backfill: true,
            hybrid_rigid_on_cloud: false,
            static_partition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchedError {
    #[error("job {0} is already registered")]
    DuplicateJob(JobId),
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {0} holds no allocation")]
    NoAllocation(JobId),
    #[error("job {job} is already terminal ({state})")]
    AlreadyTerminal { job: JobId, state: JobState },
    #[error("job {0} is not elastic")]
    NotElastic(JobId),
    #[error("job {0} is not running")]
    NotRunning(JobId),
    #[error("job {job} must be queued to be enqueued, found {state}")]
    NotQueued { job: JobId, state: JobState },
    #[error("unknown cluster `{0}`")]
    UnknownCluster(String),
    #[error("cluster `{cluster}` has no node {node}")]
    UnknownNode { cluster: String, node: u32 },
    #[error("not enough free nodes on `{cluster}`: requested {requested}, free {free}")]
    InsufficientNodes {
        cluster: String,
        requested: u32,
        free: u32,
    },
    #[error(transparent)]
    Transition(#[from] InvalidTransition),
}

/// A running job's hold on nodes, with progress accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveAllocation {
    pub allocation: Allocation,
    pub cluster: usize,
    /// start + walltime; the latest instant the job may hold its nodes.
    pub expected_end_ms: Millis,
    pub submit_seq: u64,
    pub workers: u32,
    /// Work credited so far in thousandths of a unit.
    pub credited_milli: u64,
    /// Credit is complete up to this instant. Starts at the end of stage-in.
    pub credited_through_ms: Millis,
}

/// Start time promised to a blocked queue head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub job_id: JobId,
    pub cluster_id: String,
    pub node_indices: Vec<u32>,
    pub start_ms: Millis,
    pub expected_end_ms: Millis,
}

/// Nodes taken back from an elastic job's surplus workers to make room for
/// a start.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reclaim {
    pub job_id: JobId,
    pub node_indices: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DispatchDecision {
    /// Applied before `starts`.
    pub reclaims: Vec<Reclaim>,
    pub starts: Vec<(JobId, Allocation)>,
    pub reservation: Option<Reservation>,
    /// Jobs needing more nodes than any acceptable cluster owns.
    pub unsatisfiable: Vec<JobId>,
}

impl DispatchDecision {
    pub fn is_empty(&self) -> bool {
        self.starts.is_empty() && self.reclaims.is_empty() && self.unsatisfiable.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RescaleChange {
    pub job_id: JobId,
    pub cluster_id: String,
    pub workers: u32,
    pub node_indices: Vec<u32>,
}

/// What happened to the job (if any) holding a node that went down.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeLoss {
    Idle,
    /// An elastic job lost one worker and keeps running.
    Shrunk(RescaleChange),
    Requeued(JobId),
    Failed(JobId),
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    retry_budget: u32,
    clusters: Vec<ClusterState>,
    cluster_index: HashMap<String, usize>,
    by_kind: BTreeMap<ResourceKind, Vec<usize>>,
    queue: JobQueue,
    jobs: BTreeMap<JobId, JobRecord>,
    live: BTreeMap<JobId, LiveAllocation>,
    reservation: Option<Reservation>,
}

impl Scheduler {
    pub fn new(
        mut specs: Vec<ClusterSpec>,
        policy: SchedulerPolicy,
        retry_budget: u32,
    ) -> Result<Self, ClusterConfigError> {
        validate_clusters(&specs)?;
        specs.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        let clusters: Vec<ClusterState> = specs.into_iter().map(ClusterState::new).collect();
        let mut cluster_index = HashMap::new();
        let mut by_kind: BTreeMap<ResourceKind, Vec<usize>> = BTreeMap::new();
        for (i, c) in clusters.iter().enumerate() {
            cluster_index.insert(c.id().to_string(), i);
            by_kind.entry(c.spec.kind).or_default().push(i);
        }
        Ok(Scheduler {
            policy,
            retry_budget,
            clusters,
            cluster_index,
            by_kind,
            queue: JobQueue::new(),
            jobs: BTreeMap::new(),
            live: BTreeMap::new(),
            reservation: None,
        })
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    pub fn retry_budget(&self) -> u32 {
        self.retry_budget
    }

    pub fn clusters(&self) -> &[ClusterState] {
        &self.clusters
    }

    pub fn cluster(&self, id: &str) -> Option<&ClusterState> {
        self.cluster_index.get(id).map(|&i| &self.clusters[i])
    }

    pub fn cluster_idx(&self, id: &str) -> Result<usize, SchedError> {
        self.cluster_index
            .get(id)
            .copied()
            .ok_or_else(|| SchedError::UnknownCluster(id.to_string()))
    }

    pub fn known_kinds(&self) -> std::collections::BTreeSet<ResourceKind> {
        self.by_kind.keys().copied().collect()
    }

    pub fn queue(&self) -> &JobQueue {
        &self.queue
    }

    pub fn jobs(&self) -> &BTreeMap<JobId, JobRecord> {
        &self.jobs
    }

    pub fn job(&self, id: JobId) -> Option<&JobRecord> {
        self.jobs.get(&id)
    }

    pub fn live(&self) -> &BTreeMap<JobId, LiveAllocation> {
        &self.live
    }

    pub fn reservation(&self) -> Option<&Reservation> {
        self.reservation.as_ref()
    }

    /// Adds a freshly submitted job (state `Submitted`).
    pub fn register(&mut self, record: JobRecord) -> Result<(), SchedError> {
        if self.jobs.contains_key(&record.job_id) {
            return Err(SchedError::DuplicateJob(record.job_id));
        }
        self.jobs.insert(record.job_id, record);
        Ok(())
    }

    /// Marks a registered job validated and queues it.
    pub fn accept(&mut self, job_id: JobId, now: Millis) -> Result<QueueEntry, SchedError> {
        let rec = self.job_mut(job_id)?;
        rec.apply(LifecycleEvent::Validated)?;
        rec.submit_ms = Some(now);
        self.enqueue(job_id, now)
    }

    /// Inserts a `Queued` job into the queue.
    pub fn enqueue(&mut self, job_id: JobId, _now: Millis) -> Result<QueueEntry, SchedError> {
        let rec = self
            .jobs
            .get(&job_id)
            .ok_or(SchedError::UnknownJob(job_id))?;
        if self.queue.contains(job_id) || self.live.contains_key(&job_id) {
            return Err(SchedError::DuplicateJob(job_id));
        }
        if rec.state != JobState::Queued {
            return Err(SchedError::NotQueued {
                job: job_id,
                state: rec.state,
            });
        }
        let kinds = self.placeable_kinds(rec);
        let priority = rec.spec.priority;
        Ok(self.queue.push(job_id, priority, kinds))
    }

    /// Kinds the job may use under the current policy, in preference order.
    pub fn placeable_kinds(&self, rec: &JobRecord) -> Vec<ResourceKind> {
        let prefs = &rec.spec.kind_preferences;
        let prefs = if self.policy.static_partition {
            &prefs[..prefs.len().min(1)]
        } else {
            &prefs[..]
        };
        prefs
            .iter()
            .copied()
            .filter(|&k| match rec.spec.shape {
                JobShape::Elastic { .. } => k == ResourceKind::Cloud,
                JobShape::Rigid { .. } => {
                    k != ResourceKind::Cloud || self.policy.hybrid_rigid_on_cloud
                }
            })
            .collect()
    }

    /// Cluster indices a job may use, in scan order: preference order of
    /// kinds, then cluster id.
    pub(crate) fn acceptable_clusters(&self, kinds: &[ResourceKind]) -> Vec<usize> {
        kinds
            .iter()
            .filter_map(|k| self.by_kind.get(k))
            .flatten()
            .copied()
            .collect()
    }

    /// False when no acceptable cluster owns enough nodes in total.
    pub fn is_satisfiable(&self, job_id: JobId) -> bool {
        let Some(rec) = self.jobs.get(&job_id) else {
            return false;
        };
        let need = rec.spec.shape.nodes_to_start();
        self.acceptable_clusters(&self.placeable_kinds(rec))
            .into_iter()
            .any(|c| self.clusters[c].node_count() >= need)
    }

    fn job_mut(&mut self, id: JobId) -> Result<&mut JobRecord, SchedError> {
        self.jobs.get_mut(&id).ok_or(SchedError::UnknownJob(id))
    }

    /// Executes a plan: reclaims elastic surplus, then starts every listed
    /// job. `staging` gives the stage-in delay for a job on a cluster.
    pub fn apply(
        &mut self,
        decision: &DispatchDecision,
        now: Millis,
        staging: &dyn Fn(&JobRecord, &ClusterSpec) -> Millis,
    ) -> Result<Vec<RescaleChange>, SchedError> {
        let mut shrunk = Vec::new();
        for reclaim in &decision.reclaims {
            shrunk.push(self.remove_workers(reclaim.job_id, &reclaim.node_indices, now)?);
        }
        for (job_id, alloc) in &decision.starts {
            self.start(*job_id, alloc.clone(), now, staging)?;
        }
        self.reservation = decision.reservation.clone();
        Ok(shrunk)
    }

    fn start(
        &mut self,
        job_id: JobId,
        alloc: Allocation,
        now: Millis,
        staging: &dyn Fn(&JobRecord, &ClusterSpec) -> Millis,
    ) -> Result<(), SchedError> {
        let ci = self.cluster_idx(&alloc.cluster_id)?;
        let entry = self
            .queue
            .get(job_id)
            .cloned()
            .ok_or(SchedError::NotQueued {
                job: job_id,
                state: self.jobs.get(&job_id).map_or(JobState::Submitted, |r| r.state),
            })?;
        {
            let cluster = &self.clusters[ci];
            for &n in &alloc.node_indices {
                match cluster.slot(n) {
                    None => {
                        return Err(SchedError::UnknownNode {
                            cluster: alloc.cluster_id.clone(),
                            node: n,
                        })
                    }
                    Some(s) if !s.is_available() => {
                        return Err(SchedError::InsufficientNodes {
                            cluster: alloc.cluster_id.clone(),
                            requested: alloc.node_indices.len() as u32,
                            free: cluster.free_count(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        let stage_ms = staging(&self.jobs[&job_id], &self.clusters[ci].spec);
        let rec = self.jobs.get_mut(&job_id).expect("queued job is registered");
        rec.apply(LifecycleEvent::Scheduled)?;
        rec.apply(LifecycleEvent::Started)?;
        self.queue.remove(job_id);
        let workers = alloc.node_indices.len() as u32;
        rec.start_ms = Some(now);
        rec.end_ms = None;
        rec.allocation = Some(alloc.clone());
        rec.credited_work_milli = 0;
        if rec.spec.shape.is_elastic() {
            rec.worker_history.push(WorkerSample {
                time_ms: now,
                worker_count: workers,
            });
        }
        let expected_end_ms = now.saturating_add(rec.spec.walltime_limit_ms);
        for &n in &alloc.node_indices {
            self.clusters[ci].assign(n, NodeHolder::Job(job_id));
        }
        self.live.insert(
            job_id,
            LiveAllocation {
                allocation: alloc,
                cluster: ci,
                expected_end_ms,
                submit_seq: entry.submit_seq,
                workers,
                credited_milli: 0,
                credited_through_ms: now.saturating_add(stage_ms),
            },
        );
        Ok(())
    }

    fn credit(&mut self, job_id: JobId, now: Millis) {
        if let Some(live) = self.live.get_mut(&job_id) {
            if now > live.credited_through_ms {
                let speed = self.clusters[live.cluster].spec.speed_factor;
                let dt = now - live.credited_through_ms;
                live.credited_milli = live
                    .credited_milli
                    .saturating_add((live.workers as u64).saturating_mul(speed).saturating_mul(dt));
                live.credited_through_ms = now;
            }
            if let Some(rec) = self.jobs.get_mut(&job_id) {
                rec.credited_work_milli = live.credited_milli;
            }
        }
    }

    /// Instant at which a running job has accumulated its required work at
    /// its current worker count.
    pub fn completion_time(&self, job_id: JobId) -> Option<Millis> {
        let live = self.live.get(&job_id)?;
        let rec = &self.jobs[&job_id];
        let speed = self.clusters[live.cluster].spec.speed_factor;
        let required = rec.spec.work_units.saturating_mul(1000);
        let remaining = required.saturating_sub(live.credited_milli);
        let rate = (live.workers as u64).saturating_mul(speed).max(1);
        Some(live.credited_through_ms.saturating_add(remaining.div_ceil(rate)))
    }

    /// Frees every node held by the job and retires its allocation. The
    /// job's state is left to the caller.
    pub fn release(&mut self, job_id: JobId, now: Millis) -> Result<Vec<u32>, SchedError> {
        if !self.live.contains_key(&job_id) {
            return Err(SchedError::NoAllocation(job_id));
        }
        self.credit(job_id, now);
        let live = self.live.remove(&job_id).expect("checked above");
        let cluster = &mut self.clusters[live.cluster];
        for &n in &live.allocation.node_indices {
            cluster.clear(n);
        }
        if let Some(rec) = self.jobs.get_mut(&job_id) {
            rec.allocation = None;
            rec.last_allocation = Some(live.allocation.clone());
        }
        Ok(live.allocation.node_indices)
    }

    /// Ends a running job with `Finished`, `Errored` or `WalltimeExceeded`.
    pub fn finish(
        &mut self,
        job_id: JobId,
        event: LifecycleEvent,
        now: Millis,
    ) -> Result<JobState, SchedError> {
        let rec = self.jobs.get(&job_id).ok_or(SchedError::UnknownJob(job_id))?;
        if rec.state != JobState::Running {
            return Err(SchedError::NotRunning(job_id));
        }
        self.release(job_id, now)?;
        let rec = self.job_mut(job_id)?;
        let state = rec.apply(event)?;
        rec.end_ms = Some(now);
        Ok(state)
    }

    /// Fails a job straight out of the queue (e.g. unsatisfiable request).
    pub fn fail_queued(
        &mut self,
        job_id: JobId,
        reason: &str,
        now: Millis,
    ) -> Result<JobState, SchedError> {
        self.queue.remove(job_id);
        let rec = self.job_mut(job_id)?;
        let state = rec.apply(LifecycleEvent::Errored)?;
        rec.end_ms = Some(now);
        rec.failure_reason = Some(reason.to_string());
        Ok(state)
    }

    pub fn cancel(&mut self, job_id: JobId, now: Millis) -> Result<JobState, SchedError> {
        let rec = self.jobs.get(&job_id).ok_or(SchedError::UnknownJob(job_id))?;
        if rec.state.is_terminal() {
            return Err(SchedError::AlreadyTerminal {
                job: job_id,
                state: rec.state,
            });
        }
        self.queue.remove(job_id);
        if self.live.contains_key(&job_id) {
            self.release(job_id, now)?;
        }
        if self.reservation.as_ref().is_some_and(|r| r.job_id == job_id) {
            self.reservation = None;
        }
        let rec = self.job_mut(job_id)?;
        let state = rec.apply(LifecycleEvent::CancelRequested)?;
        rec.end_ms = Some(now);
        Ok(state)
    }

    /// Marks a node down until `until`. A job holding it either loses one
    /// elastic worker, is requeued (retry budget permitting) or fails.
    pub fn node_down(
        &mut self,
        cluster_id: &str,
        node: u32,
        until: Millis,
        now: Millis,
    ) -> Result<NodeLoss, SchedError> {
        let ci = self.cluster_idx(cluster_id)?;
        let slot = *self.clusters[ci]
            .slot(node)
            .ok_or_else(|| SchedError::UnknownNode {
                cluster: cluster_id.to_string(),
                node,
            })?;
        self.clusters[ci].set_down(node, until);
        let NodeHolder::Job(job_id) = slot.holder else {
            return Ok(NodeLoss::Idle);
        };
        let live = &self.live[&job_id];
        if let JobShape::Elastic { min_workers, .. } = self.jobs[&job_id].spec.shape {
            if live.workers > min_workers {
                let change = self.remove_workers(job_id, &[node], now)?;
                return Ok(NodeLoss::Shrunk(change));
            }
        }
        self.release(job_id, now)?;
        let rec = self.job_mut(job_id)?;
        let state = rec.apply(LifecycleEvent::NodeLost)?;
        if state == JobState::Queued {
            rec.retries_left -= 1;
            rec.start_ms = None;
            self.enqueue(job_id, now)?;
            Ok(NodeLoss::Requeued(job_id))
        } else {
            rec.end_ms = Some(now);
            rec.failure_reason = Some("node_lost".to_string());
            Ok(NodeLoss::Failed(job_id))
        }
    }

    /// Returns the node to service unless a later outage still covers `now`.
    pub fn node_up(&mut self, cluster_id: &str, node: u32, now: Millis) -> Result<bool, SchedError> {
        let ci = self.cluster_idx(cluster_id)?;
        if self.clusters[ci].slot(node).is_none() {
            return Err(SchedError::UnknownNode {
                cluster: cluster_id.to_string(),
                node,
            });
        }
        Ok(self.clusters[ci].set_up(node, now))
    }

    /// Removes specific nodes from a running elastic job.
    fn remove_workers(
        &mut self,
        job_id: JobId,
        nodes: &[u32],
        now: Millis,
    ) -> Result<RescaleChange, SchedError> {
        self.credit(job_id, now);
        let live = self
            .live
            .get_mut(&job_id)
            .ok_or(SchedError::NoAllocation(job_id))?;
        let cluster = &mut self.clusters[live.cluster];
        for n in nodes {
            if let Ok(pos) = live.allocation.node_indices.binary_search(n) {
                live.allocation.node_indices.remove(pos);
                cluster.clear(*n);
            }
        }
        live.workers = live.allocation.node_indices.len() as u32;
        let change = RescaleChange {
            job_id,
            cluster_id: live.allocation.cluster_id.clone(),
            workers: live.workers,
            node_indices: live.allocation.node_indices.clone(),
        };
        let rec = self.jobs.get_mut(&job_id).expect("live job is registered");
        rec.allocation = Some(live.allocation.clone());
        rec.worker_history.push(WorkerSample {
            time_ms: now,
            worker_count: change.workers,
        });
        Ok(change)
    }

    /// Carves `count` free nodes (first-fit) out of a cluster for a virtual
    /// cluster. The nodes become invisible to batch planning.
    pub fn carve(
        &mut self,
        cluster_id: &str,
        count: u32,
        holder: VClusterId,
    ) -> Result<Vec<u32>, SchedError> {
        let ci = self.cluster_idx(cluster_id)?;
        let cluster = &mut self.clusters[ci];
        let nodes: Vec<u32> = cluster.free_nodes().take(count as usize).collect();
        if (nodes.len() as u32) < count {
            return Err(SchedError::InsufficientNodes {
                cluster: cluster_id.to_string(),
                requested: count,
                free: cluster.free_count(),
            });
        }
        for &n in &nodes {
            cluster.assign(n, NodeHolder::VCluster(holder));
        }
        Ok(nodes)
    }

    pub fn uncarve(&mut self, cluster_id: &str, holder: VClusterId) -> Result<Vec<u32>, SchedError> {
        let ci = self.cluster_idx(cluster_id)?;
        let cluster = &mut self.clusters[ci];
        let nodes = cluster.nodes_held_by(NodeHolder::VCluster(holder));
        for &n in &nodes {
            cluster.clear(n);
        }
        Ok(nodes)
    }
}
