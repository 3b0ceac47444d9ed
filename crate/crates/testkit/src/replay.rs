//! Post-hoc replay of an event log, checking capacity, kind respect and
//! causal order event by event.

use std::collections::{BTreeMap, BTreeSet};

use hybridsched_core::model::{ClusterSpec, JobId, JobShape, JobSpec, ResourceKind};
use hybridsched_core::scheduler::SchedulerPolicy;
use hybridsched_core::sim::{EventKind, EventLog};

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub starts: usize,
    pub terminal: usize,
    /// Highest number of simultaneously held nodes seen per cluster.
    pub peak: BTreeMap<String, u32>,
}

#[derive(Default)]
struct JobTrack {
    submitted: bool,
    queued: bool,
    terminal: bool,
    running: bool,
}

/// Replays `log` and fails on the first violation of:
/// - a node held by two jobs, a node index out of range, or more nodes
///   held on a cluster than it has;
/// - a node handed out while it is down;
/// - a start on a cluster whose kind is not allowed for the job;
/// - a rigid start with the wrong node count;
/// - time going backwards, sequence gaps, or a job event out of lifecycle
///   order (anything after a terminal event, a start without a queue
///   entry, two terminal events).
pub fn check_log(
    log: &EventLog,
    clusters: &[ClusterSpec],
    specs: &BTreeMap<JobId, JobSpec>,
    policy: &SchedulerPolicy,
) -> Result<ReplaySummary, String> {
    let by_id: BTreeMap<&str, &ClusterSpec> =
        clusters.iter().map(|c| (c.cluster_id.as_str(), c)).collect();
    let mut holder: BTreeMap<(String, u32), JobId> = BTreeMap::new();
    let mut held: BTreeMap<JobId, (String, BTreeSet<u32>)> = BTreeMap::new();
    let mut down: BTreeSet<(String, u32)> = BTreeSet::new();
    let mut jobs: BTreeMap<JobId, JobTrack> = BTreeMap::new();
    let mut summary = ReplaySummary::default();
    let mut last_t = 0;

    fn release(
        job: JobId,
        held: &mut BTreeMap<JobId, (String, BTreeSet<u32>)>,
        holder: &mut BTreeMap<(String, u32), JobId>,
    ) {
        if let Some((cluster, nodes)) = held.remove(&job) {
            for n in nodes {
                holder.remove(&(cluster.clone(), n));
            }
        }
    }

    for (i, e) in log.events().iter().enumerate() {
        let at = format!("event {i} (t={}, {:?})", e.t, e.kind);
        if e.seq != i as u64 {
            return Err(format!("{at}: seq {} out of order", e.seq));
        }
        if e.t < last_t {
            return Err(format!("{at}: time went backwards from {last_t}"));
        }
        last_t = e.t;

        if let Some(job) = e.job {
            let track = jobs.entry(job).or_default();
            if track.terminal {
                return Err(format!("{at}: {job} has an event after its terminal event"));
            }
            match e.kind {
                EventKind::JobSubmitted => {
                    if track.submitted {
                        return Err(format!("{at}: {job} submitted twice"));
                    }
                    track.submitted = true;
                }
                EventKind::JobQueued => {
                    if !track.submitted {
                        return Err(format!("{at}: {job} queued before submission"));
                    }
                    track.queued = true;
                    track.running = false;
                }
                EventKind::JobStarted => {
                    if !track.queued || track.running {
                        return Err(format!("{at}: {job} started without being queued"));
                    }
                    track.running = true;
                }
                EventKind::RescaleApplied => {
                    if !track.running {
                        return Err(format!("{at}: {job} rescaled while not running"));
                    }
                }
                k if k.is_terminal() => {
                    if !track.submitted {
                        return Err(format!("{at}: {job} ended before submission"));
                    }
                    if matches!(k, EventKind::JobFinished | EventKind::JobTimedOut) && !track.running {
                        return Err(format!("{at}: {job} finished without running"));
                    }
                    track.terminal = true;
                    track.running = false;
                    summary.terminal += 1;
                }
                _ => {}
            }
        }

        match e.kind {
            EventKind::JobStarted | EventKind::RescaleApplied => {
                let job = e.job.ok_or_else(|| format!("{at}: missing job"))?;
                let cid = e.cluster.clone().ok_or_else(|| format!("{at}: missing cluster"))?;
                let cluster = by_id
                    .get(cid.as_str())
                    .ok_or_else(|| format!("{at}: unknown cluster {cid}"))?;
                let spec = specs.get(&job).ok_or_else(|| format!("{at}: unknown {job}"))?;
                let nodes: BTreeSet<u32> = e
                    .nodes
                    .clone()
                    .ok_or_else(|| format!("{at}: missing node list"))?
                    .into_iter()
                    .collect();
                if e.kind == EventKind::JobStarted {
                    summary.starts += 1;
                    kind_allowed(spec, cluster.kind, policy).map_err(|m| format!("{at}: {job} {m}"))?;
                    if let JobShape::Rigid { node_count } = spec.shape {
                        if nodes.len() as u32 != node_count {
                            return Err(format!("{at}: {job} got {} nodes, wants {node_count}", nodes.len()));
                        }
                    }
                } else if held.get(&job).is_none_or(|(c, _)| *c != cid) {
                    return Err(format!("{at}: {job} rescaled on a cluster it does not run on"));
                }
                let previous = held.get(&job).map(|(_, n)| n.clone()).unwrap_or_default();
                release(job, &mut held, &mut holder);
                for &n in &nodes {
                    if n >= cluster.node_count {
                        return Err(format!("{at}: node {n} out of range on {cid}"));
                    }
                    let key = (cid.clone(), n);
                    if let Some(other) = holder.get(&key) {
                        return Err(format!("{at}: {cid}:{n} given to {job} while held by {other}"));
                    }
                    if down.contains(&key) && !previous.contains(&n) {
                        return Err(format!("{at}: {cid}:{n} given to {job} while down"));
                    }
                    holder.insert(key, job);
                }
                let count = holder.keys().filter(|(c, _)| *c == cid).count() as u32;
                if count > cluster.node_count {
                    return Err(format!("{at}: {cid} holds {count} > {} nodes", cluster.node_count));
                }
                let peak = summary.peak.entry(cid.clone()).or_default();
                *peak = (*peak).max(count);
                held.insert(job, (cid, nodes));
            }
            EventKind::JobQueued
            | EventKind::JobFinished
            | EventKind::JobFailed
            | EventKind::JobTimedOut
            | EventKind::JobCancelled => {
                if let Some(job) = e.job {
                    release(job, &mut held, &mut holder);
                }
            }
            EventKind::NodeDown => {
                // A holder must be shrunk, requeued or failed within the
                // same instant; checked below once the instant is over.
                let key = (e.cluster.clone().unwrap_or_default(), e.node.unwrap_or(u32::MAX));
                down.insert(key);
            }
            EventKind::NodeUp => {
                let key = (e.cluster.clone().unwrap_or_default(), e.node.unwrap_or(u32::MAX));
                down.remove(&key);
            }
            EventKind::JobSubmitted => {}
        }

        // A down node may not stay allocated once its instant is over.
        let instant_over = log.events().get(i + 1).is_none_or(|next| next.t > e.t);
        if instant_over {
            if let Some(key) = down.iter().find(|k| holder.contains_key(*k)) {
                return Err(format!("{at}: {}:{} still allocated while down", key.0, key.1));
            }
        }
    }
    Ok(summary)
}

fn kind_allowed(spec: &JobSpec, kind: ResourceKind, policy: &SchedulerPolicy) -> Result<(), String> {
    if !spec.kind_preferences.contains(&kind) {
        return Err(format!("placed on {kind}, not in {:?}", spec.kind_preferences));
    }
    match spec.shape {
        JobShape::Elastic { .. } if kind != ResourceKind::Cloud => {
            Err(format!("elastic job placed on {kind}"))
        }
        JobShape::Rigid { .. } if kind == ResourceKind::Cloud && !policy.hybrid_rigid_on_cloud => {
            Err("rigid job placed on the cloud pool".into())
        }
        JobShape::Rigid { .. } if policy.static_partition && spec.kind_preferences[0] != kind => {
            Err(format!("static partition placed on {kind}, not the first preference"))
        }
        _ => Ok(()),
    }
}

/// Every job in `specs` reached exactly one terminal event.
pub fn all_terminal(log: &EventLog, specs: &BTreeMap<JobId, JobSpec>) -> Result<(), String> {
    let mut ends: BTreeMap<JobId, usize> = BTreeMap::new();
    for e in log.events().iter().filter(|e| e.kind.is_terminal()) {
        *ends.entry(e.job.expect("terminal events name a job")).or_default() += 1;
    }
    for job in specs.keys() {
        match ends.get(job) {
            Some(1) => {}
            Some(n) => return Err(format!("{job} has {n} terminal events")),
            None => return Err(format!("{job} never reached a terminal state")),
        }
    }
    Ok(())
}
