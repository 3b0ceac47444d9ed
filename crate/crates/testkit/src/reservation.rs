//! Rebuilds the planner's view at each recorded reservation from the log
//! prefix and recomputes the head job's earliest start by scanning every
//! candidate time on every acceptable cluster.
//!
//! Supports rigid jobs without stage-in and without node faults, where a
//! running job's nodes come back exactly at start + walltime.

use std::collections::BTreeMap;

use hybridsched_core::model::{ClusterSpec, JobId, JobShape, JobSpec, Millis, ResourceKind};
use hybridsched_core::scheduler::{Reservation, SchedulerPolicy};
use hybridsched_core::sim::{EventKind, EventLog, ReservationRecord};

/// Earliest reservation for the queue head as of `log[..len]`, or `None`
/// when the queue is empty.
pub fn recompute(
    log: &EventLog,
    len: usize,
    now: Millis,
    clusters: &[ClusterSpec],
    specs: &BTreeMap<JobId, JobSpec>,
    policy: &SchedulerPolicy,
) -> Result<Option<Reservation>, String> {
    // job -> (cluster, nodes, start)
    let mut running: BTreeMap<JobId, (String, Vec<u32>, Millis)> = BTreeMap::new();
    // job -> position of its latest JobQueued event
    let mut waiting: BTreeMap<JobId, usize> = BTreeMap::new();
    for (i, e) in log.events()[..len].iter().enumerate() {
        match e.kind {
            EventKind::NodeDown | EventKind::NodeUp => {
                return Err("node faults are outside this oracle".into());
            }
            EventKind::RescaleApplied => return Err("elastic jobs are outside this oracle".into()),
            EventKind::JobQueued => {
                waiting.insert(e.job.unwrap(), i);
            }
            EventKind::JobStarted => {
                let job = e.job.unwrap();
                waiting.remove(&job);
                running.insert(job, (e.cluster.clone().unwrap(), e.nodes.clone().unwrap(), e.t));
            }
            k if k.is_terminal() => {
                let job = e.job.unwrap();
                waiting.remove(&job);
                running.remove(&job);
            }
            _ => {}
        }
    }

    let head = waiting
        .iter()
        .min_by_key(|(job, pos)| (-specs[*job].priority, **pos, **job))
        .map(|(job, _)| *job);
    let Some(head) = head else { return Ok(None) };
    let spec = &specs[&head];
    let JobShape::Rigid { node_count: need } = spec.shape else {
        return Err("elastic jobs are outside this oracle".into());
    };

    let kinds: Vec<ResourceKind> = if policy.static_partition {
        spec.kind_preferences[..1].to_vec()
    } else {
        spec.kind_preferences.clone()
    };
    let mut candidates: Vec<&ClusterSpec> = Vec::new();
    for kind in kinds {
        if kind == ResourceKind::Cloud && !policy.hybrid_rigid_on_cloud {
            continue;
        }
        let mut of_kind: Vec<&ClusterSpec> = clusters.iter().filter(|c| c.kind == kind).collect();
        of_kind.sort_by(|a, b| a.cluster_id.cmp(&b.cluster_id));
        candidates.extend(of_kind);
    }

    let mut best: Option<(Millis, &ClusterSpec, Vec<Millis>)> = None;
    for c in candidates {
        if c.node_count < need {
            continue;
        }
        let mut avail = vec![now; c.node_count as usize];
        for (job, (cid, nodes, start)) in &running {
            if *cid == c.cluster_id {
                let end = start + specs[job].walltime_limit_ms;
                for &n in nodes {
                    avail[n as usize] = end.max(now);
                }
            }
        }
        // Try each distinct availability time in order; the first at which
        // `need` nodes are available is the earliest start here.
        let mut times = avail.clone();
        times.sort();
        times.dedup();
        let earliest = times
            .into_iter()
            .find(|&t| avail.iter().filter(|&&a| a <= t).count() as u32 >= need);
        if let Some(t) = earliest {
            if best.as_ref().is_none_or(|(bt, _, _)| t < *bt) {
                best = Some((t, c, avail));
            }
        }
    }
    Ok(best.map(|(start, c, avail)| Reservation {
        job_id: head,
        cluster_id: c.cluster_id.clone(),
        node_indices: (0..c.node_count)
            .filter(|&n| avail[n as usize] <= start)
            .take(need as usize)
            .collect(),
        start_ms: start,
        expected_end_ms: start + spec.walltime_limit_ms,
    }))
}

/// Checks every recorded reservation against the recomputation.
pub fn check_all(
    log: &EventLog,
    records: &[ReservationRecord],
    clusters: &[ClusterSpec],
    specs: &BTreeMap<JobId, JobSpec>,
    policy: &SchedulerPolicy,
) -> Result<usize, String> {
    for (i, r) in records.iter().enumerate() {
        let expected = recompute(log, r.log_len, r.computed_at_ms, clusters, specs, policy)?;
        if expected.as_ref() != Some(&r.reservation) {
            return Err(format!(
                "reservation {i} at t={}: planner {:?}, oracle {:?}",
                r.computed_at_ms, r.reservation, expected
            ));
        }
    }
    Ok(records.len())
}
