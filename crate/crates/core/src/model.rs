//! Shared domain types: jobs, clusters, allocations, the job lifecycle
//! state machine and the linear runtime model.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Virtual time in integer milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u64);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Cpu,
    Gpu,
    Knl,
    Cloud,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Cpu,
        ResourceKind::Gpu,
        ResourceKind::Knl,
        ResourceKind::Cloud,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Cpu => "cpu",
            ResourceKind::Gpu => "gpu",
            ResourceKind::Knl => "knl",
            ResourceKind::Cloud => "cloud",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown resource kind `{0}`")]
pub struct ParseKindError(pub String);

impl FromStr for ResourceKind {
    type Err = ParseKindError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" => Ok(ResourceKind::Cpu),
            "gpu" => Ok(ResourceKind::Gpu),
            "knl" => Ok(ResourceKind::Knl),
            "cloud" => Ok(ResourceKind::Cloud),
            other => Err(ParseKindError(other.to_string())),
        }
    }
}

/// Node requirement of a job. Rigid jobs hold a fixed node count for their
/// whole run; elastic jobs run on the cloud pool with a varying worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum JobShape {
    Rigid { node_count: u32 },
    Elastic { min_workers: u32, max_workers: u32 },
}

impl JobShape {
    /// Nodes needed to start the job.
    pub fn nodes_to_start(&self) -> u32 {
        match *self {
            JobShape::Rigid { node_count } => node_count,
            JobShape::Elastic { min_workers, .. } => min_workers,
        }
    }

    pub fn is_elastic(&self) -> bool {
        matches!(self, JobShape::Elastic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub name: String,
    /// Owner. May be omitted in API bodies, where the caller's identity
    /// header fills it in.
    #[serde(default)]
    pub user_id: String,
    pub kind_preferences: Vec<ResourceKind>,
    pub shape: JobShape,
    pub work_units: u64,
    pub walltime_limit_ms: Millis,
    #[serde(default)]
    pub dataset_refs: Vec<String>,
    #[serde(default)]
    pub priority: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("kind_preferences must not be empty")]
    EmptyPreferences,
    #[error("kind `{0}` listed more than once in kind_preferences")]
    DuplicateKind(ResourceKind),
    #[error("no configured cluster offers kind `{0}`")]
    UnknownKind(ResourceKind),
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("`{0}` must be at least 1")]
    NonPositive(&'static str),
}

impl ValidationError {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::EmptyPreferences => "EmptyPreferences",
            ValidationError::DuplicateKind(_) => "DuplicateKind",
            ValidationError::UnknownKind(_) => "UnknownKind",
            ValidationError::BadShape(_) => "BadShape",
            ValidationError::NonPositive(_) => "NonPositive",
        }
    }
}

/// Checks every `JobSpec` invariant and that each preferred kind is offered
/// by some configured cluster. Returns the spec unchanged on success.
pub fn validate_job(
    spec: JobSpec,
    known_kinds: &BTreeSet<ResourceKind>,
) -> Result<JobSpec, ValidationError> {
    if spec.kind_preferences.is_empty() {
        return Err(ValidationError::EmptyPreferences);
    }
    let mut seen = BTreeSet::new();
    for &kind in &spec.kind_preferences {
        if !seen.insert(kind) {
            return Err(ValidationError::DuplicateKind(kind));
        }
    }
    if let Some(&kind) = spec
        .kind_preferences
        .iter()
        .find(|k| !known_kinds.contains(k))
    {
        return Err(ValidationError::UnknownKind(kind));
    }
    if spec.work_units == 0 {
        return Err(ValidationError::NonPositive("work_units"));
    }
    if spec.walltime_limit_ms == 0 {
        return Err(ValidationError::NonPositive("walltime_limit_ms"));
    }
    match spec.shape {
        JobShape::Rigid { node_count: 0 } => {
            return Err(ValidationError::NonPositive("node_count"));
        }
        JobShape::Rigid { .. } => {}
        JobShape::Elastic {
            min_workers,
            max_workers,
        } => {
            if min_workers == 0 {
                return Err(ValidationError::NonPositive("min_workers"));
            }
            if min_workers > max_workers {
                return Err(ValidationError::BadShape(format!(
                    "min_workers {min_workers} exceeds max_workers {max_workers}"
                )));
            }
            if !spec.kind_preferences.contains(&ResourceKind::Cloud) {
                return Err(ValidationError::BadShape(
                    "elastic jobs only run on kind cloud".to_string(),
                ));
            }
        }
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JobState {
    Submitted,
    Queued,
    Dispatched,
    Running,
    Completed,
    Failed,
    Cancelled,
    TimedOut,
}

impl JobState {
    pub const ALL: [JobState; 8] = [
        JobState::Submitted,
        JobState::Queued,
        JobState::Dispatched,
        JobState::Running,
        JobState::Completed,
        JobState::Failed,
        JobState::Cancelled,
        JobState::TimedOut,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Completed | JobState::Failed | JobState::Cancelled | JobState::TimedOut
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LifecycleEvent {
    Validated,
    Scheduled,
    Started,
    Finished,
    Errored,
    CancelRequested,
    WalltimeExceeded,
    NodeLost,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 8] = [
        LifecycleEvent::Validated,
        LifecycleEvent::Scheduled,
        LifecycleEvent::Started,
        LifecycleEvent::Finished,
        LifecycleEvent::Errored,
        LifecycleEvent::CancelRequested,
        LifecycleEvent::WalltimeExceeded,
        LifecycleEvent::NodeLost,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("invalid transition: {event:?} in state {state}")]
pub struct InvalidTransition {
    pub state: JobState,
    pub event: LifecycleEvent,
}

/// Next lifecycle state. `retries_left` only matters for `NodeLost`, which
/// requeues while retries remain and fails the job otherwise.
pub fn transition(
    state: JobState,
    event: LifecycleEvent,
    retries_left: u32,
) -> Result<JobState, InvalidTransition> {
    use JobState::*;
    use LifecycleEvent::*;
    let next = match (state, event) {
        (Submitted, Validated) => Queued,
        (Queued, Scheduled) => Dispatched,
        (Dispatched, Started) => Running,
        (Running, Finished) => Completed,
        (Running, Errored) => Failed,
        // unsatisfiable requests are failed straight out of the queue
        (Queued, Errored) => Failed,
        (Running, WalltimeExceeded) => TimedOut,
        (Submitted | Queued | Dispatched | Running, CancelRequested) => Cancelled,
        (Running, NodeLost) if retries_left > 0 => Queued,
        (Running, NodeLost) => Failed,
        _ => return Err(InvalidTransition { state, event }),
    };
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("duration computation overflowed")]
pub struct Overflow;

/// Virtual run time of `work_units` on `nodes` nodes of a pool with the given
/// speed factor: `ceil(1000 * work / (speed * nodes))`, never below 1 ms.
pub fn job_duration_ms(work_units: u64, speed_factor: u64, nodes: u64) -> Result<Millis, Overflow> {
    assert!(
        work_units >= 1 && speed_factor >= 1 && nodes >= 1,
        "job_duration_ms arguments must be positive"
    );
    let work = work_units.checked_mul(1000).ok_or(Overflow)?;
    let rate = speed_factor.checked_mul(nodes).ok_or(Overflow)?;
    Ok(work.div_ceil(rate).max(1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub cluster_id: String,
    pub kind: ResourceKind,
    pub node_count: u32,
    pub cores_per_node: u32,
    pub speed_factor: u64,
    /// Stage-in bandwidth from shared storage. Absent means uniform access
    /// with no staging delay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub staging_bandwidth_bytes_per_s: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterConfigError {
    #[error("cluster `{0}` must have at least one node")]
    NoNodes(String),
    #[error("cluster `{0}` must have speed_factor of at least 1")]
    ZeroSpeed(String),
    #[error("cluster `{0}` must have at least one core per node")]
    ZeroCores(String),
    #[error("cluster `{0}` has zero staging bandwidth")]
    ZeroBandwidth(String),
    #[error("cluster id `{0}` is configured more than once")]
    DuplicateId(String),
}

pub fn validate_clusters(clusters: &[ClusterSpec]) -> Result<(), ClusterConfigError> {
    let mut ids = BTreeSet::new();
    for c in clusters {
        if c.node_count == 0 {
            return Err(ClusterConfigError::NoNodes(c.cluster_id.clone()));
        }
        if c.speed_factor == 0 {
            return Err(ClusterConfigError::ZeroSpeed(c.cluster_id.clone()));
        }
        if c.cores_per_node == 0 {
            return Err(ClusterConfigError::ZeroCores(c.cluster_id.clone()));
        }
        if c.staging_bandwidth_bytes_per_s == Some(0) {
            return Err(ClusterConfigError::ZeroBandwidth(c.cluster_id.clone()));
        }
        if !ids.insert(c.cluster_id.as_str()) {
            return Err(ClusterConfigError::DuplicateId(c.cluster_id.clone()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub job_id: JobId,
    pub cluster_id: String,
    /// Sorted ascending, no duplicates.
    pub node_indices: Vec<u32>,
    pub start_ms: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerSample {
    pub time_ms: Millis,
    pub worker_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: JobId,
    pub spec: JobSpec,
    pub state: JobState,
    pub submit_ms: Option<Millis>,
    pub start_ms: Option<Millis>,
    pub end_ms: Option<Millis>,
    pub allocation: Option<Allocation>,
    pub worker_history: Vec<WorkerSample>,
    /// Placement of the most recent run, kept after the allocation is retired.
    pub last_allocation: Option<Allocation>,
    /// Work credited so far, in thousandths of a work unit
    /// (node-count x speed_factor x elapsed ms).
    pub credited_work_milli: u64,
    pub retries_left: u32,
    /// Upper bound on elastic workers imposed at admission (node quota).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

impl JobRecord {
    pub fn new(job_id: JobId, spec: JobSpec, retries_left: u32) -> Self {
        JobRecord {
            job_id,
            spec,
            state: JobState::Submitted,
            submit_ms: None,
            start_ms: None,
            end_ms: None,
            allocation: None,
            worker_history: Vec::new(),
            last_allocation: None,
            credited_work_milli: 0,
            retries_left,
            worker_cap: None,
            failure_reason: None,
        }
    }

    /// Largest worker count this job may reach.
    pub fn max_workers(&self) -> u32 {
        match self.spec.shape {
            JobShape::Rigid { node_count } => node_count,
            JobShape::Elastic { max_workers, .. } => {
                self.worker_cap.map_or(max_workers, |cap| cap.min(max_workers))
            }
        }
    }

    pub fn apply(&mut self, event: LifecycleEvent) -> Result<JobState, InvalidTransition> {
        self.state = transition(self.state, event, self.retries_left)?;
        Ok(self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kinds: Vec<ResourceKind>, shape: JobShape) -> JobSpec {
        JobSpec {
            name: "j".into(),
            user_id: "alice".into(),
            kind_preferences: kinds,
            shape,
            work_units: 100,
            walltime_limit_ms: 10_000,
            dataset_refs: vec![],
            priority: 0,
        }
    }

    fn known(kinds: &[ResourceKind]) -> BTreeSet<ResourceKind> {
        kinds.iter().copied().collect()
    }

    #[test]
    fn validate_accepts_well_formed_gpu_job() {
        let s = spec(vec![ResourceKind::Gpu], JobShape::Rigid { node_count: 2 });
        let k = known(&[ResourceKind::Cpu, ResourceKind::Gpu]);
        assert_eq!(validate_job(s.clone(), &k), Ok(s));
    }

    #[test]
    fn validate_rejects_unoffered_kind() {
        let s = spec(vec![ResourceKind::Knl], JobShape::Rigid { node_count: 1 });
        let k = known(&[ResourceKind::Cpu, ResourceKind::Gpu]);
        assert_eq!(
            validate_job(s, &k),
            Err(ValidationError::UnknownKind(ResourceKind::Knl))
        );
    }

    #[test]
    fn validate_rejects_inverted_elastic_bounds() {
        let s = spec(
            vec![ResourceKind::Cloud],
            JobShape::Elastic {
                min_workers: 4,
                max_workers: 2,
            },
        );
        let err = validate_job(s, &known(&ResourceKind::ALL)).unwrap_err();
        assert_eq!(err.code(), "BadShape");
    }

    #[test]
    fn validate_rejects_remaining_violations() {
        let all = known(&ResourceKind::ALL);
        let empty = spec(vec![], JobShape::Rigid { node_count: 1 });
        assert_eq!(validate_job(empty, &all), Err(ValidationError::EmptyPreferences));

        let dup = spec(
            vec![ResourceKind::Gpu, ResourceKind::Gpu],
            JobShape::Rigid { node_count: 1 },
        );
        assert_eq!(
            validate_job(dup, &all),
            Err(ValidationError::DuplicateKind(ResourceKind::Gpu))
        );

        let mut zero_work = spec(vec![ResourceKind::Cpu], JobShape::Rigid { node_count: 1 });
        zero_work.work_units = 0;
        assert_eq!(
            validate_job(zero_work, &all),
            Err(ValidationError::NonPositive("work_units"))
        );

        let zero_nodes = spec(vec![ResourceKind::Cpu], JobShape::Rigid { node_count: 0 });
        assert_eq!(
            validate_job(zero_nodes, &all),
            Err(ValidationError::NonPositive("node_count"))
        );

        let elastic_on_gpu = spec(
            vec![ResourceKind::Gpu],
            JobShape::Elastic {
                min_workers: 1,
                max_workers: 2,
            },
        );
        assert_eq!(validate_job(elastic_on_gpu, &all).unwrap_err().code(), "BadShape");
    }

    #[test]
    fn transition_table_spot_checks() {
        assert_eq!(
            transition(JobState::Queued, LifecycleEvent::Scheduled, 1),
            Ok(JobState::Dispatched)
        );
        assert!(transition(JobState::Completed, LifecycleEvent::CancelRequested, 1).is_err());
        assert_eq!(
            transition(JobState::Running, LifecycleEvent::NodeLost, 1),
            Ok(JobState::Queued)
        );
        assert_eq!(
            transition(JobState::Running, LifecycleEvent::NodeLost, 0),
            Ok(JobState::Failed)
        );
    }

    #[test]
    fn terminal_states_absorb_every_event() {
        for state in JobState::ALL.into_iter().filter(|s| s.is_terminal()) {
            for event in LifecycleEvent::ALL {
                assert!(transition(state, event, 5).is_err(), "{state:?} {event:?}");
            }
        }
    }

    #[test]
    fn duration_examples() {
        assert_eq!(job_duration_ms(100, 10, 2), Ok(5000));
        assert_eq!(job_duration_ms(1, 1000, 1000), Ok(1));
        // 7000 / 6 = 1166.67, rounded up
        assert_eq!(job_duration_ms(7, 3, 2), Ok(1167));
        assert_eq!(job_duration_ms(u64::MAX, 1, 1), Err(Overflow));
        assert_eq!(job_duration_ms(1, u64::MAX, 2), Err(Overflow));
    }

    #[test]
    fn kind_round_trips() {
        for k in ResourceKind::ALL {
            assert_eq!(k.as_str().parse::<ResourceKind>(), Ok(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
        assert!("tpu".parse::<ResourceKind>().is_err());
    }

    #[test]
    fn job_spec_wire_encoding() {
        let json = r#"{"name":"n","user_id":"u","kind_preferences":["gpu","cpu"],
            "shape":{"rigid":{"node_count":2}},"work_units":5,"walltime_limit_ms":9}"#;
        let s: JobSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.shape, JobShape::Rigid { node_count: 2 });
        assert_eq!(s.priority, 0);
        assert!(s.dataset_refs.is_empty());

        let elastic = r#"{"name":"n","user_id":"u","kind_preferences":["cloud"],
            "shape":{"elastic":{"min_workers":1,"max_workers":3}},"work_units":5,
            "walltime_limit_ms":9,"dataset_refs":["a"],"priority":2}"#;
        let s: JobSpec = serde_json::from_str(elastic).unwrap();
        assert_eq!(
            s.shape,
            JobShape::Elastic {
                min_workers: 1,
                max_workers: 3
            }
        );

        let unknown = r#"{"name":"n","user_id":"u","kind_preferences":["gpu"],
            "shape":{"rigid":{"node_count":2}},"work_units":5,"walltime_limit_ms":9,"extra":1}"#;
        assert!(serde_json::from_str::<JobSpec>(unknown).is_err());
        let unknown_shape = r#"{"name":"n","user_id":"u","kind_preferences":["gpu"],
            "shape":{"rigid":{"node_count":2,"x":1}},"work_units":5,"walltime_limit_ms":9}"#;
        assert!(serde_json::from_str::<JobSpec>(unknown_shape).is_err());
    }

    #[test]
    fn cluster_validation() {
        let c = |id: &str, n| ClusterSpec {
            cluster_id: id.into(),
            kind: ResourceKind::Cpu,
            node_count: n,
            cores_per_node: 8,
            speed_factor: 1,
            staging_bandwidth_bytes_per_s: None,
        };
        assert!(validate_clusters(&[c("a", 1), c("b", 2)]).is_ok());
        assert_eq!(
            validate_clusters(&[c("a", 1), c("a", 2)]),
            Err(ClusterConfigError::DuplicateId("a".into()))
        );
        assert_eq!(
            validate_clusters(&[c("a", 0)]),
            Err(ClusterConfigError::NoNodes("a".into()))
        );
    }
}
