//! Deterministic discrete-event simulator standing in for the physical
//! clusters. Events fire in `(time, class, insertion order)` order, the
//! scheduler plans after every event, and everything observable is appended
//! to a canonical event log. The engine consumes no randomness.

mod events;
mod trace;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::model::{
    validate_job, ClusterConfigError, ClusterSpec, JobId, JobRecord, JobSpec, JobState,
    LifecycleEvent, Millis, ValidationError,
};
use crate::scheduler::{
    NodeLoss, RescaleChange, Reservation, SchedError, Scheduler, SchedulerPolicy, VClusterId,
};

pub use events::{EventKind, EventLog, SimEvent};
pub use trace::{load_clusters, FaultDirective, LoadError, SubmissionTrace, TraceDataset, TraceJob};

pub const DEFAULT_HORIZON_MS: Millis = 10_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub policy: SchedulerPolicy,
    /// Requeues allowed per job after losing a node.
    pub retry_budget: u32,
    pub horizon_ms: Millis,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            policy: SchedulerPolicy::default(),
            retry_budget: 1,
            horizon_ms: DEFAULT_HORIZON_MS,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Cluster(#[from] ClusterConfigError),
    #[error("trace job {index}: {source}")]
    InvalidJob {
        index: usize,
        #[source]
        source: ValidationError,
    },
    #[error("trace job {index} references unknown dataset `{name}`")]
    MissingDataset { index: usize, name: String },
    #[error("trace job {0} is submitted before its predecessor")]
    UnsortedTrace(usize),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("cluster `{cluster}` has no node {node}")]
    UnknownNode { cluster: String, node: u32 },
    #[error("cannot schedule at {at} ms, clock is already at {now} ms")]
    PastTime { at: Millis, now: Millis },
    #[error("simulation did not terminate: {detail} at t={t_ms} ms with {live_jobs} unfinished jobs")]
    NonTerminating {
        t_ms: Millis,
        live_jobs: usize,
        detail: String,
    },
    #[error(transparent)]
    Sched(#[from] SchedError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Action {
    Complete { job: JobId, version: u64 },
    Timeout { job: JobId, attempt: u64 },
    NodeUp { cluster: String, node: u32 },
    NodeDown { cluster: String, node: u32, up_at: Millis },
    Submit { job: JobId },
}

impl Action {
    /// Same-instant ordering: releases before faults before arrivals.
    fn class(&self) -> u8 {
        match self {
            Action::Complete { .. } => 0,
            Action::Timeout { .. } => 1,
            Action::NodeUp { .. } => 2,
            Action::NodeDown { .. } => 3,
            Action::Submit { .. } => 4,
        }
    }
}

#[derive(Debug)]
struct Pending {
    t: Millis,
    class: u8,
    order: u64,
    action: Action,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.t, self.class, self.order).cmp(&(other.t, other.class, other.order))
    }
}

/// A reservation as issued by a plan cycle, with the log length at that
/// moment so the planner's view can be rebuilt from the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationRecord {
    pub computed_at_ms: Millis,
    pub log_len: usize,
    pub reservation: Reservation,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: EventLog,
    pub jobs: Vec<JobRecord>,
    pub reservations: Vec<ReservationRecord>,
    pub rng_seed: u64,
    pub end_ms: Millis,
}

pub struct Simulator {
    sched: Scheduler,
    catalog: Catalog,
    config: SimConfig,
    clock: Millis,
    pending: BinaryHeap<Reverse<Pending>>,
    order: u64,
    log: EventLog,
    completion_versions: HashMap<JobId, u64>,
    attempts: HashMap<JobId, u64>,
    scheduled_specs: HashMap<JobId, JobSpec>,
    next_job: u64,
    reservations: Vec<ReservationRecord>,
    rng_seed: u64,
}

impl Simulator {
    pub fn new(clusters: Vec<ClusterSpec>, config: SimConfig) -> Result<Self, SimError> {
        Ok(Simulator {
            sched: Scheduler::new(clusters, config.policy, config.retry_budget)?,
            catalog: Catalog::new(),
            config,
            clock: 0,
            pending: BinaryHeap::new(),
            order: 0,
            log: EventLog::new(),
            completion_versions: HashMap::new(),
            attempts: HashMap::new(),
            scheduled_specs: HashMap::new(),
            next_job: 1,
            reservations: Vec::new(),
            rng_seed: 0,
        })
    }

    pub fn with_catalog(mut self, catalog: Catalog) -> Self {
        self.catalog = catalog;
        self
    }

    pub fn set_rng_seed(&mut self, seed: u64) {
        self.rng_seed = seed;
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> Millis {
        self.clock
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.sched
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn catalog_mut(&mut self) -> &mut Catalog {
        &mut self.catalog
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn reservations(&self) -> &[ReservationRecord] {
        &self.reservations
    }

    pub fn job(&self, id: JobId) -> Option<&JobRecord> {
        self.sched.job(id)
    }

    /// True when nothing is pending and every known job is terminal.
    pub fn is_quiescent(&self) -> bool {
        self.pending.is_empty() && self.unfinished_jobs() == 0
    }

    fn unfinished_jobs(&self) -> usize {
        self.scheduled_specs.len()
            + self
                .sched
                .jobs()
                .values()
                .filter(|r| !r.state.is_terminal())
                .count()
    }

    fn push(&mut self, t: Millis, action: Action) {
        let class = action.class();
        self.pending.push(Reverse(Pending {
            t,
            class,
            order: self.order,
            action,
        }));
        self.order += 1;
    }

    fn emit(&mut self, kind: EventKind, fill: impl FnOnce(&mut SimEvent)) {
        let mut e = SimEvent::new(self.clock, 0, kind);
        fill(&mut e);
        self.log.push(e);
    }

    fn allocate_id(&mut self) -> JobId {
        let id = JobId(self.next_job);
        self.next_job += 1;
        id
    }

    /// Queues a submission at a future instant. The spec must already be
    /// validated.
    pub fn schedule_submission(&mut self, at: Millis, spec: JobSpec) -> Result<JobId, SimError> {
        if at < self.clock {
            return Err(SimError::PastTime {
                at,
                now: self.clock,
            });
        }
        let id = self.allocate_id();
        self.scheduled_specs.insert(id, spec);
        self.push(at, Action::Submit { job: id });
        Ok(id)
    }

    /// Submits a validated job at the current instant and runs a plan cycle.
    /// `worker_cap` bounds elastic growth.
    pub fn submit_now(&mut self, spec: JobSpec, worker_cap: Option<u32>) -> JobId {
        let id = self.allocate_id();
        self.admit(id, spec, worker_cap);
        self.cycle();
        id
    }

    fn admit(&mut self, id: JobId, spec: JobSpec, worker_cap: Option<u32>) {
        let mut rec = JobRecord::new(id, spec, self.config.retry_budget);
        rec.worker_cap = worker_cap;
        self.sched.register(rec).expect("fresh job id");
        self.emit(EventKind::JobSubmitted, |e| e.job = Some(id));
        self.sched.accept(id, self.clock).expect("submitted job accepts");
        self.emit(EventKind::JobQueued, |e| e.job = Some(id));
        if !self.sched.is_satisfiable(id) {
            self.fail_unsatisfiable(id);
        }
    }

    fn fail_unsatisfiable(&mut self, id: JobId) {
        if self.sched.fail_queued(id, "unsatisfiable", self.clock).is_ok() {
            self.emit(EventKind::JobFailed, |e| {
                e.job = Some(id);
                e.reason = Some("unsatisfiable".into());
            });
        }
    }

    pub fn cancel(&mut self, job: JobId) -> Result<JobState, SchedError> {
        let state = self.sched.cancel(job, self.clock)?;
        self.emit(EventKind::JobCancelled, |e| e.job = Some(job));
        self.cycle();
        Ok(state)
    }

    /// Schedules a node outage `[at_ms, at_ms + down_ms)`.
    pub fn inject_node_failure(
        &mut self,
        cluster_id: &str,
        node: u32,
        at_ms: Millis,
        down_ms: Millis,
    ) -> Result<(Millis, Millis), SimError> {
        let exists = self
            .sched
            .cluster(cluster_id)
            .is_some_and(|c| node < c.node_count());
        if !exists {
            return Err(SimError::UnknownNode {
                cluster: cluster_id.to_string(),
                node,
            });
        }
        if at_ms < self.clock {
            return Err(SimError::PastTime {
                at: at_ms,
                now: self.clock,
            });
        }
        let up_at = at_ms.saturating_add(down_ms);
        self.push(
            at_ms,
            Action::NodeDown {
                cluster: cluster_id.to_string(),
                node,
                up_at,
            },
        );
        self.push(
            up_at,
            Action::NodeUp {
                cluster: cluster_id.to_string(),
                node,
            },
        );
        Ok((at_ms, up_at))
    }

    pub(crate) fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.sched
    }

    /// Runs a plan cycle at the current instant, e.g. after capacity was
    /// returned outside the event loop.
    pub fn replan(&mut self) {
        self.cycle();
    }

    /// Takes free nodes out of batch use for a virtual cluster.
    pub fn carve(
        &mut self,
        cluster_id: &str,
        count: u32,
        holder: VClusterId,
    ) -> Result<Vec<u32>, SchedError> {
        self.sched.carve(cluster_id, count, holder)
    }

    /// Returns a virtual cluster's nodes to batch use and replans.
    pub fn uncarve(&mut self, cluster_id: &str, holder: VClusterId) -> Result<Vec<u32>, SchedError> {
        let nodes = self.sched.uncarve(cluster_id, holder)?;
        self.cycle();
        Ok(nodes)
    }

    /// Fires every pending event with `t <= until_ms` and leaves the clock
    /// at `until_ms` (never moving it backwards). Returns the events logged.
    pub fn step(&mut self, until_ms: Millis) -> Vec<SimEvent> {
        let first = self.log.len();
        while self
            .pending
            .peek()
            .is_some_and(|Reverse(p)| p.t <= until_ms)
        {
            self.fire_next();
        }
        self.clock = self.clock.max(until_ms);
        self.log.events()[first..].to_vec()
    }

    fn fire_next(&mut self) {
        let Reverse(p) = self.pending.pop().expect("caller checked");
        self.clock = self.clock.max(p.t);
        if self.handle(p.action) {
            self.cycle();
        }
    }

    /// Runs until every job is terminal and no events remain.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(p)) = self.pending.peek() {
            if p.t > self.config.horizon_ms {
                return Err(SimError::NonTerminating {
                    t_ms: p.t,
                    live_jobs: self.unfinished_jobs(),
                    detail: format!("horizon of {} ms exceeded", self.config.horizon_ms),
                });
            }
            self.fire_next();
        }
        let stuck = self.unfinished_jobs();
        if stuck > 0 {
            return Err(SimError::NonTerminating {
                t_ms: self.clock,
                live_jobs: stuck,
                detail: "no pending events left".into(),
            });
        }
        Ok(())
    }

    pub fn into_outcome(self) -> SimOutcome {
        SimOutcome {
            end_ms: self.log.events().last().map_or(0, |e| e.t),
            log: self.log,
            jobs: self.sched.jobs().values().cloned().collect(),
            reservations: self.reservations,
            rng_seed: self.rng_seed,
        }
    }

    /// Applies one event. Returns false for stale events that change nothing.
    fn handle(&mut self, action: Action) -> bool {
        let now = self.clock;
        match action {
            Action::Submit { job } => {
                let spec = self
                    .scheduled_specs
                    .remove(&job)
                    .expect("scheduled submission has a spec");
                self.admit(job, spec, None);
                true
            }
            Action::Complete { job, version } => {
                if self.completion_versions.get(&job) != Some(&version) || !self.is_running(job) {
                    return false;
                }
                self.sched
                    .finish(job, LifecycleEvent::Finished, now)
                    .expect("running job finishes");
                self.emit(EventKind::JobFinished, |e| e.job = Some(job));
                true
            }
            Action::Timeout { job, attempt } => {
                if self.attempts.get(&job) != Some(&attempt) || !self.is_running(job) {
                    return false;
                }
                self.sched
                    .finish(job, LifecycleEvent::WalltimeExceeded, now)
                    .expect("running job times out");
                self.emit(EventKind::JobTimedOut, |e| e.job = Some(job));
                true
            }
            Action::NodeDown {
                cluster,
                node,
                up_at,
            } => {
                let loss = self
                    .sched
                    .node_down(&cluster, node, up_at, now)
                    .expect("fault target validated at injection");
                self.emit(EventKind::NodeDown, |e| {
                    e.cluster = Some(cluster);
                    e.node = Some(node);
                });
                match loss {
                    NodeLoss::Idle => {}
                    NodeLoss::Shrunk(change) => self.log_rescale(change),
                    NodeLoss::Requeued(job) => self.emit(EventKind::JobQueued, |e| {
                        e.job = Some(job);
                        e.reason = Some("node_lost".into());
                    }),
                    NodeLoss::Failed(job) => self.emit(EventKind::JobFailed, |e| {
                        e.job = Some(job);
                        e.reason = Some("node_lost".into());
                    }),
                }
                true
            }
            Action::NodeUp { cluster, node } => {
                let up = self
                    .sched
                    .node_up(&cluster, node, now)
                    .expect("fault target validated at injection");
                if up {
                    self.emit(EventKind::NodeUp, |e| {
                        e.cluster = Some(cluster);
                        e.node = Some(node);
                    });
                }
                up
            }
        }
    }

    fn is_running(&self, job: JobId) -> bool {
        self.sched
            .job(job)
            .is_some_and(|r| r.state == JobState::Running)
    }

    fn log_rescale(&mut self, change: RescaleChange) {
        let job = change.job_id;
        self.emit(EventKind::RescaleApplied, |e| {
            e.cluster = Some(change.cluster_id);
            e.job = Some(change.job_id);
            e.nodes = Some(change.node_indices);
            e.workers = Some(change.workers);
        });
        self.schedule_completion(job);
    }

    fn schedule_completion(&mut self, job: JobId) {
        let version = {
            let v = self.completion_versions.entry(job).or_default();
            *v += 1;
            *v
        };
        let Some(done) = self.sched.completion_time(job) else {
            return;
        };
        let deadline = self.sched.live()[&job].expected_end_ms;
        if done <= deadline {
            self.push(done, Action::Complete { job, version });
        }
    }

    /// One scheduler pass after an event: fail unsatisfiable jobs, start
    /// what fits, rebalance elastic jobs.
    fn cycle(&mut self) {
        let now = self.clock;
        let decision = self.sched.plan(now);
        for &job in &decision.unsatisfiable {
            self.fail_unsatisfiable(job);
        }
        let shrunk = {
            let catalog = &self.catalog;
            let staging = |rec: &JobRecord, c: &ClusterSpec| {
                catalog.staging_for(&rec.spec.dataset_refs, c)
            };
            self.sched
                .apply(&decision, now, &staging)
                .expect("plan only references queued jobs and free nodes")
        };
        for change in shrunk {
            self.log_rescale(change);
        }
        for (job, alloc) in decision.starts {
            self.emit(EventKind::JobStarted, |e| {
                e.cluster = Some(alloc.cluster_id);
                e.job = Some(job);
                e.nodes = Some(alloc.node_indices);
            });
            let attempt = {
                let a = self.attempts.entry(job).or_default();
                *a += 1;
                *a
            };
            let deadline = self.sched.live()[&job].expected_end_ms;
            self.push(deadline, Action::Timeout { job, attempt });
            self.schedule_completion(job);
        }
        for change in self.sched.rescale_all(now) {
            self.log_rescale(change);
        }
        if let Some(res) = self.sched.reservation() {
            let changed = self
                .reservations
                .last()
                .is_none_or(|last| &last.reservation != res);
            if changed {
                self.reservations.push(ReservationRecord {
                    computed_at_ms: now,
                    log_len: self.log.len(),
                    reservation: res.clone(),
                });
            }
        }
    }
}

/// Replays a submission trace against a topology to completion.
pub fn run_trace(
    trace: &SubmissionTrace,
    clusters: &[ClusterSpec],
    config: SimConfig,
) -> Result<SimOutcome, SimError> {
    if let Some(i) = trace.first_unsorted() {
        return Err(SimError::UnsortedTrace(i));
    }
    let mut catalog = Catalog::new();
    for d in &trace.datasets {
        catalog.register(&d.name, d.size_bytes, 0)?;
    }
    let mut sim = Simulator::new(clusters.to_vec(), config)?.with_catalog(catalog);
    sim.set_rng_seed(trace.rng_seed);
    let known = sim.scheduler().known_kinds();
    for (index, job) in trace.jobs.iter().enumerate() {
        let spec = validate_job(job.spec.clone(), &known)
            .map_err(|source| SimError::InvalidJob { index, source })?;
        if let Some(name) = spec
            .dataset_refs
            .iter()
            .find(|n| sim.catalog().get(n).is_none())
        {
            return Err(SimError::MissingDataset {
                index,
                name: name.clone(),
            });
        }
        sim.schedule_submission(job.t_ms, spec)?;
    }
    for f in &trace.faults {
        sim.inject_node_failure(&f.cluster_id, f.node_index, f.t_ms, f.down_duration_ms)?;
    }
    sim.run_to_end()?;
    Ok(sim.into_outcome())
}
