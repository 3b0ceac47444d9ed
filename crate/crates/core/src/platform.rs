//! The authoritative platform state: simulator, scheduler, cloud tenancy
//! and dataset catalog behind one set of operations. A service serializes
//! every mutation through a single owner of this value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::cloud::{
    self, check_partition, CloudError, CloudLayer, Quota, Rejection, Route, UserAccount,
    VClusterState, VirtualCluster,
};
use crate::metrics::{self, CarveInterval, UtilizationReport, WaitStats, Window};
use crate::model::{validate_job, ClusterSpec, JobId, JobRecord, JobSpec, JobState, Millis, ValidationError};
use crate::scheduler::{NodeCounts, SchedError};
use crate::sim::{SimConfig, SimError, SimEvent, Simulator};

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown dataset `{0}`")]
    MissingDataset(String),
    #[error(transparent)]
    Rejected(#[from] Rejection),
}

#[derive(Debug, Error)]
pub enum ResultError {
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("job {job} is {state}, not finished")]
    NotFinished { job: JobId, state: JobState },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submitted {
    pub job_id: JobId,
    pub route: Route,
    pub state: JobState,
}

/// Completion manifest returned for a terminal job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub job_id: JobId,
    pub terminal: JobState,
    /// 0 for a completed job, 1 otherwise.
    pub exit_status: i32,
    pub start_ms: Option<Millis>,
    pub end_ms: Option<Millis>,
    pub cluster_id: Option<String>,
    pub node_indices: Vec<u32>,
    pub credited_work_milli: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterView {
    #[serde(flatten)]
    pub spec: ClusterSpec,
    pub free: u32,
    pub busy: u32,
    pub down: u32,
    pub vcluster: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsView {
    pub now_ms: Millis,
    pub utilization: UtilizationReport,
    pub wait: WaitStats,
}

pub struct Platform {
    sim: Simulator,
    cloud: CloudLayer,
    /// Owner and committed node count of every admitted job.
    admitted: BTreeMap<JobId, (String, u32)>,
}

impl Platform {
    pub fn new(clusters: Vec<ClusterSpec>, config: SimConfig) -> Result<Self, SimError> {
        Ok(Platform {
            sim: Simulator::new(clusters, config)?,
            cloud: CloudLayer::new(),
            admitted: BTreeMap::new(),
        })
    }

    pub fn with_catalog(mut self, catalog: Catalog) -> Self {
        self.sim = self.sim.with_catalog(catalog);
        self
    }

    pub fn now(&self) -> Millis {
        self.sim.clock()
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn cloud(&self) -> &CloudLayer {
        &self.cloud
    }

    /// Moves virtual time forward, firing due events.
    pub fn advance_to(&mut self, t: Millis) -> Vec<SimEvent> {
        self.sim.step(t)
    }

    pub fn create_user(
        &mut self,
        user_id: &str,
        display_name: Option<&str>,
        quota: Quota,
    ) -> Result<UserAccount, CloudError> {
        let now = self.now();
        self.cloud
            .create_user(user_id, display_name, quota, now)
            .cloned()
    }

    pub fn register_dataset(&mut self, name: &str, size_bytes: u64) -> Result<(), CatalogError> {
        let now = self.now();
        self.sim.catalog_mut().register(name, size_bytes, now).map(|_| ())
    }

    /// Validate, resolve datasets, check quota, route, then enqueue. On any
    /// error no job state is created.
    pub fn submit(&mut self, spec: JobSpec) -> Result<Submitted, SubmitError> {
        let spec = validate_job(spec, &self.sim.scheduler().known_kinds())?;
        let quota = self
            .cloud
            .user(&spec.user_id)
            .map_err(|_| SubmitError::UnknownUser(spec.user_id.clone()))?
            .quota;
        self.sim.catalog().resolve(&spec.dataset_refs).map_err(|e| match e {
            CatalogError::MissingDataset(name) => SubmitError::MissingDataset(name),
            other => SubmitError::MissingDataset(other.to_string()),
        })?;
        let usage = self.usage(&spec.user_id);
        let admission = cloud::admit(
            &spec,
            &quota,
            usage,
            self.sim.config().policy.hybrid_rigid_on_cloud,
        )?;
        let owner = spec.user_id.clone();
        let job_id = self.sim.submit_now(spec, admission.worker_cap);
        self.admitted.insert(job_id, (owner, admission.committed_nodes));
        self.debug_check();
        Ok(Submitted {
            job_id,
            route: admission.route,
            state: self.sim.job(job_id).expect("just submitted").state,
        })
    }

    /// Recounts a user's live jobs and their committed nodes.
    pub fn usage(&self, user_id: &str) -> cloud::Usage {
        let mut usage = cloud::Usage::default();
        for (job, (owner, nodes)) in &self.admitted {
            let live = self.sim.job(*job).is_some_and(|r| !r.state.is_terminal());
            if owner == user_id && live {
                usage.live_jobs += 1;
                usage.committed_nodes += nodes;
            }
        }
        usage
    }

    pub fn job(&self, id: JobId) -> Option<&JobRecord> {
        self.sim.job(id)
    }

    pub fn result(&self, id: JobId) -> Result<ResultManifest, ResultError> {
        let rec = self.sim.job(id).ok_or(ResultError::UnknownJob(id))?;
        if !rec.state.is_terminal() {
            return Err(ResultError::NotFinished {
                job: id,
                state: rec.state,
            });
        }
        let alloc = rec.last_allocation.as_ref();
        Ok(ResultManifest {
            job_id: id,
            terminal: rec.state,
            exit_status: i32::from(rec.state != JobState::Completed),
            start_ms: rec.start_ms,
            end_ms: rec.end_ms,
            cluster_id: alloc.map(|a| a.cluster_id.clone()),
            node_indices: alloc.map(|a| a.node_indices.clone()).unwrap_or_default(),
            credited_work_milli: rec.credited_work_milli,
            failure_reason: rec.failure_reason.clone(),
        })
    }

    pub fn cancel(&mut self, id: JobId) -> Result<JobState, SchedError> {
        let state = self.sim.cancel(id)?;
        self.debug_check();
        Ok(state)
    }

    pub fn clusters(&self) -> Vec<ClusterView> {
        self.sim
            .scheduler()
            .clusters()
            .iter()
            .map(|c| {
                let NodeCounts {
                    free,
                    busy,
                    down,
                    carved,
                } = c.counts();
                ClusterView {
                    spec: c.spec.clone(),
                    free,
                    busy,
                    down,
                    vcluster: carved,
                }
            })
            .collect()
    }

    pub fn provision_vcluster(
        &mut self,
        user_id: &str,
        node_count: u32,
        image: &str,
    ) -> Result<VirtualCluster, CloudError> {
        let now = self.now();
        let vc = self
            .cloud
            .provision(self.sim.scheduler_mut(), user_id, node_count, image, now)?
            .clone();
        self.debug_check();
        Ok(vc)
    }

    pub fn release_vcluster(&mut self, id: u64) -> Result<Vec<u32>, CloudError> {
        let now = self.now();
        let freed = self.cloud.release(self.sim.scheduler_mut(), id, now)?;
        self.sim.replan();
        self.debug_check();
        Ok(freed)
    }

    /// Carve-out intervals of every virtual cluster ever provisioned.
    pub fn carve_intervals(&self) -> Vec<CarveInterval> {
        self.cloud
            .vclusters()
            .map(|v| CarveInterval {
                cluster_id: v.cluster_id.clone(),
                node_count: v.node_indices.len() as u32,
                from_ms: v.created_at_ms,
                to_ms: match v.state {
                    VClusterState::Released => v.released_at_ms,
                    _ => None,
                },
            })
            .collect()
    }

    /// Utilization over the last `window_ms` of virtual time (clipped at 0)
    /// and wait statistics over the whole log. An empty window reads zero.
    pub fn metrics(&self, window_ms: Millis) -> MetricsView {
        let now = self.now();
        let from = now.saturating_sub(window_ms);
        let specs: Vec<ClusterSpec> = self
            .sim
            .scheduler()
            .clusters()
            .iter()
            .map(|c| c.spec.clone())
            .collect();
        let utilization = match Window::new(from, now) {
            Ok(w) => metrics::utilization(self.sim.log(), &specs, w, &self.carve_intervals())
                .expect("window is non-empty"),
            Err(_) => metrics::empty_report(&specs, from, now),
        };
        MetricsView {
            now_ms: now,
            utilization,
            wait: metrics::wait_stats(self.sim.log()),
        }
    }

    pub fn check_partition(&self) -> Result<(), String> {
        check_partition(self.sim.scheduler(), &self.cloud)
    }

    fn debug_check(&self) {
        debug_assert_eq!(self.check_partition(), Ok(()));
    }
}
