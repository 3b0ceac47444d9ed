//! Millisecond-by-millisecond occupancy scan and a from-scratch
//! recomputation of wait statistics.

use std::collections::{BTreeMap, BTreeSet};

use hybridsched_core::metrics::CarveInterval;
use hybridsched_core::model::{ClusterSpec, JobId, Millis};
use hybridsched_core::sim::{EventKind, EventLog};

/// (busy node-ms, available node-ms) for one cluster.
pub type Tally = (u64, u64);

/// Walks every millisecond of `[from, to)`, applying all events stamped at
/// or before it, and counts held, down and carved nodes one by one.
pub fn utilization(
    log: &EventLog,
    clusters: &[ClusterSpec],
    from: Millis,
    to: Millis,
    carve_outs: &[CarveInterval],
) -> Vec<Tally> {
    let mut held: BTreeMap<JobId, (String, u32)> = BTreeMap::new();
    let mut down: BTreeSet<(String, u32)> = BTreeSet::new();
    let mut tallies = vec![(0u64, 0u64); clusters.len()];
    let events = log.events();
    let mut next = 0;
    for t in 0..to {
        while next < events.len() && events[next].t <= t {
            let e = &events[next];
            next += 1;
            match e.kind {
                EventKind::JobStarted | EventKind::RescaleApplied => {
                    let count = match (e.workers, &e.nodes) {
                        (Some(w), _) => w,
                        (None, Some(n)) => n.len() as u32,
                        (None, None) => 0,
                    };
                    held.insert(e.job.unwrap(), (e.cluster.clone().unwrap(), count));
                }
                EventKind::NodeDown => {
                    down.insert((e.cluster.clone().unwrap(), e.node.unwrap()));
                }
                EventKind::NodeUp => {
                    down.remove(&(e.cluster.clone().unwrap(), e.node.unwrap()));
                }
                EventKind::JobSubmitted => {}
                _ => {
                    held.remove(&e.job.unwrap());
                }
            }
        }
        if t < from {
            continue;
        }
        for (i, c) in clusters.iter().enumerate() {
            let mut busy = 0;
            for (cid, count) in held.values() {
                if *cid == c.cluster_id {
                    busy += u64::from(*count);
                }
            }
            let mut unavailable = 0;
            for n in 0..c.node_count {
                if down.contains(&(c.cluster_id.clone(), n)) {
                    unavailable += 1;
                }
            }
            for v in carve_outs.iter().filter(|v| v.cluster_id == c.cluster_id) {
                if v.from_ms <= t && v.to_ms.is_none_or(|end| t < end) {
                    unavailable += u64::from(v.node_count);
                }
            }
            tallies[i].0 += busy;
            tallies[i].1 += u64::from(c.node_count) - unavailable;
        }
    }
    tallies
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waits {
    pub mean: u64,
    pub median: u64,
    pub p95: u64,
    pub mean_turnaround: u64,
    pub makespan: u64,
    pub never_started: usize,
}

/// Recomputes wait figures from the raw log with plain loops.
pub fn waits(log: &EventLog) -> Waits {
    let mut submit = BTreeMap::new();
    let mut start = BTreeMap::new();
    let mut end = BTreeMap::new();
    for e in log.events() {
        let Some(job) = e.job else { continue };
        match e.kind {
            EventKind::JobSubmitted => {
                submit.insert(job, e.t);
            }
            EventKind::JobStarted => {
                start.entry(job).or_insert(e.t);
            }
            EventKind::JobFinished
            | EventKind::JobFailed
            | EventKind::JobTimedOut
            | EventKind::JobCancelled => {
                end.insert(job, e.t);
            }
            _ => {}
        }
    }
    let mut w: Vec<u64> = Vec::new();
    let mut turn: Vec<u64> = Vec::new();
    let mut never_started = 0;
    for (job, s) in &submit {
        match start.get(job) {
            Some(st) => {
                w.push(st - s);
                if let Some(en) = end.get(job) {
                    turn.push(en - s);
                }
            }
            None => {
                if end.contains_key(job) {
                    never_started += 1;
                }
            }
        }
    }
    w.sort();
    // Nearest rank: the smallest value with at least p% of samples at or
    // below it.
    let pick = |p: usize| -> u64 {
        for (i, v) in w.iter().enumerate() {
            if (i + 1) * 100 >= p * w.len() {
                return *v;
            }
        }
        0
    };
    let avg = |v: &[u64]| if v.is_empty() { 0 } else { v.iter().sum::<u64>() / v.len() as u64 };
    let first = submit.values().min().copied();
    let last = end.values().max().copied();
    Waits {
        mean: avg(&w),
        median: pick(50),
        p95: pick(95),
        mean_turnaround: avg(&turn),
        makespan: match (first, last) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        },
        never_started,
    }
}
