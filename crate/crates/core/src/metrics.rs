//! Efficiency figures computed from event logs: node-time utilization per
//! cluster, wait/turnaround statistics, makespan, and side-by-side runs of
//! two configurations on the same trace.
//!
//! Everything is exact integer arithmetic; ratios are carried as
//! (numerator, denominator) pairs and rendered with four decimals.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClusterSpec, JobId, Millis, ResourceKind};
use crate::sim::{run_trace, EventKind, EventLog, SimConfig, SimError, SubmissionTrace};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty window: from {from_ms} ms is not before to {to_ms} ms")]
    EmptyWindow { from_ms: Millis, to_ms: Millis },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from_ms: Millis,
    pub to_ms: Millis,
}

impl Window {
    pub fn new(from_ms: Millis, to_ms: Millis) -> Result<Self, MetricsError> {
        if from_ms >= to_ms {
            return Err(MetricsError::EmptyWindow { from_ms, to_ms });
        }
        Ok(Window { from_ms, to_ms })
    }

    pub fn len(&self) -> Millis {
        self.to_ms - self.from_ms
    }

    pub fn is_empty(&self) -> bool {
        self.to_ms <= self.from_ms
    }

    /// Length of `[a, b)` inside the window.
    fn overlap(&self, a: Millis, b: Millis) -> Millis {
        b.min(self.to_ms).saturating_sub(a.max(self.from_ms))
    }
}

/// Exact non-negative ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    /// Four-decimal rendering, rounded half up. A zero denominator reads 0.
    pub fn to_fixed4(self) -> String {
        if self.den == 0 {
            return "0.0000".to_string();
        }
        let scaled = (u128::from(self.num) * 20_000 + u128::from(self.den)) / (2 * u128::from(self.den));
        format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
    }

    /// `self - other` rendered with sign and four decimals, rounding half
    /// away from zero so that `a - b` and `b - a` differ only in sign.
    pub fn diff_fixed4(self, other: Ratio) -> String {
        let (a, b) = (self.as_parts(), other.as_parts());
        let num = i128::from(a.0) * i128::from(b.1) - i128::from(b.0) * i128::from(a.1);
        let den = i128::from(a.1) * i128::from(b.1);
        let mag = (num.unsigned_abs() * 20_000 + den as u128) / (2 * den as u128);
        let sign = if num < 0 && mag > 0 { "-" } else { "+" };
        format!("{sign}{}.{:04}", mag / 10_000, mag % 10_000)
    }

    fn as_parts(self) -> (u64, u64) {
        if self.den == 0 {
            (0, 1)
        } else {
            (self.num, self.den)
        }
    }

    /// True when `self - other >= points / 100`.
    pub fn exceeds_by_points(self, other: Ratio, points: u64) -> bool {
        let (a, b) = (self.as_parts(), other.as_parts());
        let lhs = 100 * (i128::from(a.0) * i128::from(b.1) - i128::from(b.0) * i128::from(a.1));
        lhs >= i128::from(points) * i128::from(a.1) * i128::from(b.1)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fixed4())
    }
}

/// Nodes of a cluster held by a virtual cluster over `[from_ms, to_ms)`;
/// an open interval runs to the end of the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CarveInterval {
    pub cluster_id: String,
    pub node_count: u32,
    pub from_ms: Millis,
    pub to_ms: Option<Millis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterUtilization {
    pub cluster_id: String,
    pub kind: ResourceKind,
    pub node_count: u32,
    pub busy_node_ms: u64,
    pub down_node_ms: u64,
    pub vcluster_node_ms: u64,
    /// node_count x window, minus downtime and virtual-cluster carve-outs.
    pub available_node_ms: u64,
    pub utilization: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateUtilization {
    pub busy_node_ms: u64,
    pub available_node_ms: u64,
    pub vcluster_node_ms: u64,
    pub utilization: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub window: Window,
    pub clusters: Vec<ClusterUtilization>,
    pub aggregate: AggregateUtilization,
}

impl UtilizationReport {
    pub fn aggregate_ratio(&self) -> Ratio {
        Ratio::new(self.aggregate.busy_node_ms, self.aggregate.available_node_ms)
    }
}

/// One contiguous stretch of a job holding a fixed number of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusySegment {
    pub job: JobId,
    pub cluster: usize,
    pub nodes: u32,
    pub from_ms: Millis,
    pub to_ms: Millis,
}

/// Rebuilds node occupancy from a log. Segments still open at the end of
/// the log are closed at `close_at`.
pub fn busy_segments(
    log: &EventLog,
    clusters: &[ClusterSpec],
    close_at: Millis,
) -> (Vec<BusySegment>, Vec<(usize, Millis, Millis)>) {
    let index: HashMap<&str, usize> = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| (c.cluster_id.as_str(), i))
        .collect();
    let mut open: BTreeMap<JobId, (usize, u32, Millis)> = BTreeMap::new();
    let mut down_open: BTreeMap<(usize, u32), Millis> = BTreeMap::new();
    let mut segments = Vec::new();
    let mut downtime = Vec::new();

    let mut close = |open: &mut BTreeMap<JobId, (usize, u32, Millis)>, job: JobId, t: Millis| {
        if let Some((cluster, nodes, from)) = open.remove(&job) {
            segments.push(BusySegment {
                job,
                cluster,
                nodes,
                from_ms: from,
                to_ms: t,
            });
        }
    };

    for e in log.events() {
        match e.kind {
            EventKind::JobStarted | EventKind::RescaleApplied => {
                let (Some(job), Some(cluster)) = (e.job, e.cluster.as_deref()) else {
                    continue;
                };
                let Some(&ci) = index.get(cluster) else {
                    continue;
                };
                close(&mut open, job, e.t);
                let nodes = e
                    .workers
                    .unwrap_or_else(|| e.nodes.as_ref().map_or(0, |n| n.len() as u32));
                open.insert(job, (ci, nodes, e.t));
            }
            EventKind::JobQueued
            | EventKind::JobFinished
            | EventKind::JobFailed
            | EventKind::JobTimedOut
            | EventKind::JobCancelled => {
                if let Some(job) = e.job {
                    close(&mut open, job, e.t);
                }
            }
            EventKind::NodeDown => {
                if let (Some(c), Some(n)) = (e.cluster.as_deref(), e.node) {
                    if let Some(&ci) = index.get(c) {
                        down_open.entry((ci, n)).or_insert(e.t);
                    }
                }
            }
            EventKind::NodeUp => {
                if let (Some(c), Some(n)) = (e.cluster.as_deref(), e.node) {
                    if let Some(&ci) = index.get(c) {
                        if let Some(from) = down_open.remove(&(ci, n)) {
                            downtime.push((ci, from, e.t));
                        }
                    }
                }
            }
            EventKind::JobSubmitted => {}
        }
    }
    let still_open: Vec<JobId> = open.keys().copied().collect();
    for job in still_open {
        close(&mut open, job, close_at);
    }
    for ((ci, _), from) in down_open {
        downtime.push((ci, from, close_at.max(from)));
    }
    (segments, downtime)
}

/// Busy node-time over available node-time per cluster and in aggregate.
pub fn utilization(
    log: &EventLog,
    clusters: &[ClusterSpec],
    window: Window,
    carve_outs: &[CarveInterval],
) -> Result<UtilizationReport, MetricsError> {
    let window = Window::new(window.from_ms, window.to_ms)?;
    let (segments, downtime) = busy_segments(log, clusters, window.to_ms);
    let mut busy = vec![0u64; clusters.len()];
    let mut down = vec![0u64; clusters.len()];
    let mut carved = vec![0u64; clusters.len()];
    for s in &segments {
        busy[s.cluster] += window.overlap(s.from_ms, s.to_ms) * u64::from(s.nodes);
    }
    for &(ci, from, to) in &downtime {
        down[ci] += window.overlap(from, to);
    }
    for c in carve_outs {
        if let Some(ci) = clusters.iter().position(|s| s.cluster_id == c.cluster_id) {
            let to = c.to_ms.unwrap_or(window.to_ms);
            carved[ci] += window.overlap(c.from_ms, to) * u64::from(c.node_count);
        }
    }

    let rows: Vec<ClusterUtilization> = clusters
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let capacity = u64::from(c.node_count) * window.len();
            let available = capacity.saturating_sub(down[i] + carved[i]);
            ClusterUtilization {
                cluster_id: c.cluster_id.clone(),
                kind: c.kind,
                node_count: c.node_count,
                busy_node_ms: busy[i],
                down_node_ms: down[i],
                vcluster_node_ms: carved[i],
                available_node_ms: available,
                utilization: Ratio::new(busy[i], available).to_fixed4(),
            }
        })
        .collect();
    let total_busy: u64 = rows.iter().map(|r| r.busy_node_ms).sum();
    let total_available: u64 = rows.iter().map(|r| r.available_node_ms).sum();
    Ok(UtilizationReport {
        window,
        aggregate: AggregateUtilization {
            busy_node_ms: total_busy,
            available_node_ms: total_available,
            vcluster_node_ms: rows.iter().map(|r| r.vcluster_node_ms).sum(),
            utilization: Ratio::new(total_busy, total_available).to_fixed4(),
        },
        clusters: rows,
    })
}

/// All-zero report for a window with nothing in it.
pub fn empty_report(clusters: &[ClusterSpec], from_ms: Millis, to_ms: Millis) -> UtilizationReport {
    let zero = Ratio::new(0, 0).to_fixed4();
    UtilizationReport {
        window: Window { from_ms, to_ms },
        clusters: clusters
            .iter()
            .map(|c| ClusterUtilization {
                cluster_id: c.cluster_id.clone(),
                kind: c.kind,
                node_count: c.node_count,
                busy_node_ms: 0,
                down_node_ms: 0,
                vcluster_node_ms: 0,
                available_node_ms: 0,
                utilization: zero.clone(),
            })
            .collect(),
        aggregate: AggregateUtilization {
            busy_node_ms: 0,
            available_node_ms: 0,
            vcluster_node_ms: 0,
            utilization: zero,
        },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaitStats {
    pub jobs: usize,
    pub started: usize,
    /// Terminal without ever starting (cancelled in queue, unsatisfiable).
    pub never_started: usize,
    /// Submitted but not yet terminal.
    pub unfinished: usize,
    pub mean_wait_ms: u64,
    pub median_wait_ms: u64,
    pub p95_wait_ms: u64,
    pub mean_turnaround_ms: u64,
    pub makespan_ms: u64,
}

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p / 100 * n)`.
pub fn nearest_rank(sorted: &[u64], p: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let n = sorted.len() as u64;
    let rank = (p * n).div_ceil(100).clamp(1, n);
    sorted[(rank - 1) as usize]
}

/// Wait is first start minus submission; turnaround is terminal time minus
/// submission; makespan runs from the first submission to the last
/// terminal event.
pub fn wait_stats(log: &EventLog) -> WaitStats {
    #[derive(Default)]
    struct Seen {
        submit: Option<Millis>,
        start: Option<Millis>,
        end: Option<Millis>,
    }
    let mut jobs: BTreeMap<JobId, Seen> = BTreeMap::new();
    for e in log.events() {
        let Some(job) = e.job else { continue };
        let seen = jobs.entry(job).or_default();
        match e.kind {
            EventKind::JobSubmitted => seen.submit = seen.submit.or(Some(e.t)),
            EventKind::JobStarted => seen.start = seen.start.or(Some(e.t)),
            k if k.is_terminal() => seen.end = Some(e.t),
            _ => {}
        }
    }
    let mut stats = WaitStats::default();
    let mut waits = Vec::new();
    let mut turnarounds = Vec::new();
    let mut first_submit: Option<Millis> = None;
    let mut last_end: Option<Millis> = None;
    for seen in jobs.values() {
        let Some(submit) = seen.submit else { continue };
        stats.jobs += 1;
        first_submit = Some(first_submit.map_or(submit, |f| f.min(submit)));
        match (seen.start, seen.end) {
            (Some(start), end) => {
                stats.started += 1;
                waits.push(start - submit);
                if let Some(end) = end {
                    turnarounds.push(end - submit);
                } else {
                    stats.unfinished += 1;
                }
            }
            (None, Some(_)) => stats.never_started += 1,
            (None, None) => stats.unfinished += 1,
        }
        if let Some(end) = seen.end {
            last_end = Some(last_end.map_or(end, |l| l.max(end)));
        }
    }
    waits.sort_unstable();
    let mean = |v: &[u64]| {
        if v.is_empty() {
            0
        } else {
            v.iter().sum::<u64>() / v.len() as u64
        }
    };
    stats.mean_wait_ms = mean(&waits);
    stats.median_wait_ms = nearest_rank(&waits, 50);
    stats.p95_wait_ms = nearest_rank(&waits, 95);
    stats.mean_turnaround_ms = mean(&turnarounds);
    stats.makespan_ms = match (first_submit, last_end) {
        (Some(a), Some(b)) => b.saturating_sub(a),
        _ => 0,
    };
    stats
}

/// One side of a comparison: a topology plus scheduling configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub clusters: Vec<ClusterSpec>,
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub label: String,
    pub busy_node_ms: u64,
    pub available_node_ms: u64,
    pub utilization: String,
    pub mean_wait_ms: u64,
    pub p95_wait_ms: u64,
    pub makespan_ms: u64,
    pub end_ms: Millis,
}

impl ScenarioSummary {
    pub fn utilization_ratio(&self) -> Ratio {
        Ratio::new(self.busy_node_ms, self.available_node_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonDelta {
    /// `b - a`, four decimals with sign.
    pub utilization: String,
    pub mean_wait_ms: i64,
    pub p95_wait_ms: i64,
    pub makespan_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: ScenarioSummary,
    pub b: ScenarioSummary,
    pub delta: ComparisonDelta,
}

/// Summarizes a finished run over `[0, end)`, `end` being its last event.
pub fn summarize(label: &str, log: &EventLog, clusters: &[ClusterSpec]) -> ScenarioSummary {
    let end_ms = log.events().last().map_or(0, |e| e.t);
    let (busy, available, utilization) = match Window::new(0, end_ms) {
        Ok(w) => {
            let r = utilization(log, clusters, w, &[]).expect("window is non-empty");
            (
                r.aggregate.busy_node_ms,
                r.aggregate.available_node_ms,
                r.aggregate.utilization,
            )
        }
        Err(_) => (0, 0, Ratio::new(0, 0).to_fixed4()),
    };
    let w = wait_stats(log);
    ScenarioSummary {
        label: label.to_string(),
        busy_node_ms: busy,
        available_node_ms: available,
        utilization,
        mean_wait_ms: w.mean_wait_ms,
        p95_wait_ms: w.p95_wait_ms,
        makespan_ms: w.makespan_ms,
        end_ms,
    }
}

pub fn compare_summaries(a: ScenarioSummary, b: ScenarioSummary) -> Comparison {
    let signed = |x: u64, y: u64| i64::try_from(i128::from(x) - i128::from(y)).unwrap_or(i64::MAX);
    let delta = ComparisonDelta {
        utilization: b.utilization_ratio().diff_fixed4(a.utilization_ratio()),
        mean_wait_ms: signed(b.mean_wait_ms, a.mean_wait_ms),
        p95_wait_ms: signed(b.p95_wait_ms, a.p95_wait_ms),
        makespan_ms: signed(b.makespan_ms, a.makespan_ms),
    };
    Comparison { a, b, delta }
}

/// Runs the same trace through two scenarios and reports them side by side.
pub fn compare(
    trace: &SubmissionTrace,
    a: &Scenario,
    b: &Scenario,
) -> Result<Comparison, MetricsError> {
    let run = |s: &Scenario| -> Result<ScenarioSummary, MetricsError> {
        let out = run_trace(trace, &s.clusters, s.config)?;
        Ok(summarize(&s.label, &out.log, &s.clusters))
    };
    Ok(compare_summaries(run(a)?, run(b)?))
}

/// Aligned plain-text rendering of a comparison.
pub fn render_comparison(c: &Comparison) -> String {
    let header = ["scenario", "utilization", "busy_node_ms", "avail_node_ms", "mean_wait_ms", "p95_wait_ms", "makespan_ms"];
    let row = |s: &ScenarioSummary| {
        vec![
            s.label.clone(),
            s.utilization.clone(),
            s.busy_node_ms.to_string(),
            s.available_node_ms.to_string(),
            s.mean_wait_ms.to_string(),
            s.p95_wait_ms.to_string(),
            s.makespan_ms.to_string(),
        ]
    };
    let delta = vec![
        "delta (b-a)".to_string(),
        c.delta.utilization.clone(),
        String::new(),
        String::new(),
        format!("{:+}", c.delta.mean_wait_ms),
        format!("{:+}", c.delta.p95_wait_ms),
        format!("{:+}", c.delta.makespan_ms),
    ];
    let rows = vec![
        header.iter().map(|s| s.to_string()).collect(),
        row(&c.a),
        row(&c.b),
        delta,
    ];
    render_table(&rows)
}

/// Aligned plain-text rendering of a utilization report.
pub fn render_utilization(r: &UtilizationReport) -> String {
    let mut rows = vec![["cluster", "kind", "nodes", "busy_node_ms", "down_node_ms", "vcluster_node_ms", "avail_node_ms", "utilization"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()];
    for c in &r.clusters {
        rows.push(vec![
            c.cluster_id.clone(),
            c.kind.to_string(),
            c.node_count.to_string(),
            c.busy_node_ms.to_string(),
            c.down_node_ms.to_string(),
            c.vcluster_node_ms.to_string(),
            c.available_node_ms.to_string(),
            c.utilization.clone(),
        ]);
    }
    rows.push(vec![
        "total".into(),
        String::new(),
        String::new(),
        r.aggregate.busy_node_ms.to_string(),
        String::new(),
        r.aggregate.vcluster_node_ms.to_string(),
        r.aggregate.available_node_ms.to_string(),
        r.aggregate.utilization.clone(),
    ]);
    let mut out = format!("window [{}, {}) ms\n", r.window.from_ms, r.window.to_ms);
    out.push_str(&render_table(&rows));
    out
}

/// Left-aligned columns separated by two spaces; the first row is the header.
pub fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{:<width$}", cell, width = widths[i]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimEvent;

    fn spec(id: &str, nodes: u32) -> ClusterSpec {
        ClusterSpec {
            cluster_id: id.into(),
            kind: ResourceKind::Cpu,
            node_count: nodes,
            cores_per_node: 1,
            speed_factor: 1,
            staging_bandwidth_bytes_per_s: None,
        }
    }

    fn ev(t: Millis, kind: EventKind, job: u64) -> SimEvent {
        let mut e = SimEvent::new(t, 0, kind);
        e.job = Some(JobId(job));
        e
    }

    fn started(t: Millis, job: u64, cluster: &str, nodes: Vec<u32>) -> SimEvent {
        let mut e = ev(t, EventKind::JobStarted, job);
        e.cluster = Some(cluster.into());
        e.nodes = Some(nodes);
        e
    }

    #[test]
    fn half_busy_cluster() {
        let log = EventLog::from(vec![
            ev(0, EventKind::JobSubmitted, 1),
            started(0, 1, "c", vec![0, 1]),
            ev(5000, EventKind::JobFinished, 1),
        ]);
        let r = utilization(&log, &[spec("c", 2)], Window::new(0, 10_000).unwrap(), &[]).unwrap();
        assert_eq!(r.clusters[0].busy_node_ms, 10_000);
        assert_eq!(r.clusters[0].available_node_ms, 20_000);
        assert_eq!(r.aggregate.utilization, "0.5000");
    }

    #[test]
    fn idle_log_is_zero_and_empty_window_errors() {
        let log = EventLog::new();
        let r = utilization(&log, &[spec("c", 2)], Window { from_ms: 0, to_ms: 10 }, &[]).unwrap();
        assert_eq!(r.aggregate.utilization, "0.0000");
        assert!(matches!(
            utilization(&log, &[spec("c", 2)], Window { from_ms: 5, to_ms: 5 }, &[]),
            Err(MetricsError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn downtime_and_carve_outs_shrink_availability() {
        let mut down = SimEvent::new(0, 0, EventKind::NodeDown);
        down.cluster = Some("c".into());
        down.node = Some(0);
        let mut up = SimEvent::new(1000, 0, EventKind::NodeUp);
        up.cluster = Some("c".into());
        up.node = Some(0);
        let log = EventLog::from(vec![down, up]);
        let carve = CarveInterval {
            cluster_id: "c".into(),
            node_count: 1,
            from_ms: 500,
            to_ms: None,
        };
        let r = utilization(&log, &[spec("c", 4)], Window::new(0, 2000).unwrap(), &[carve]).unwrap();
        let c = &r.clusters[0];
        assert_eq!((c.down_node_ms, c.vcluster_node_ms), (1000, 1500));
        assert_eq!(c.available_node_ms, 8000 - 2500);
        assert_eq!(r.aggregate.vcluster_node_ms, 1500);
    }

    #[test]
    fn rescale_and_requeue_segments() {
        let mut grow = ev(100, EventKind::RescaleApplied, 1);
        grow.cluster = Some("c".into());
        grow.workers = Some(3);
        grow.nodes = Some(vec![0, 1, 2]);
        let log = EventLog::from(vec![
            started(0, 1, "c", vec![0]),
            grow,
            ev(200, EventKind::JobQueued, 1),
            started(300, 1, "c", vec![0]),
            ev(400, EventKind::JobFinished, 1),
        ]);
        let r = utilization(&log, &[spec("c", 4)], Window::new(0, 1000).unwrap(), &[]).unwrap();
        assert_eq!(r.clusters[0].busy_node_ms, 100 + 300 + 100);
    }

    #[test]
    fn window_clips_segments() {
        let log = EventLog::from(vec![started(0, 1, "c", vec![0, 1]), ev(5000, EventKind::JobFinished, 1)]);
        let r = utilization(&log, &[spec("c", 2)], Window::new(4000, 6000).unwrap(), &[]).unwrap();
        assert_eq!(r.clusters[0].busy_node_ms, 2000);
        assert_eq!(r.aggregate.utilization, "0.5000");
    }

    #[test]
    fn ratio_rendering() {
        assert_eq!(Ratio::new(1, 3).to_fixed4(), "0.3333");
        assert_eq!(Ratio::new(2, 3).to_fixed4(), "0.6667");
        assert_eq!(Ratio::new(1, 1).to_fixed4(), "1.0000");
        assert_eq!(Ratio::new(0, 0).to_fixed4(), "0.0000");
        assert_eq!(Ratio::new(7, 9).diff_fixed4(Ratio::new(5, 12)), "+0.3611");
        assert_eq!(Ratio::new(5, 12).diff_fixed4(Ratio::new(7, 9)), "-0.3611");
        assert_eq!(Ratio::new(1, 2).diff_fixed4(Ratio::new(1, 2)), "+0.0000");
        assert!(Ratio::new(6, 10).exceeds_by_points(Ratio::new(5, 10), 10));
        assert!(!Ratio::new(6, 10).exceeds_by_points(Ratio::new(5, 10), 11));
    }

    #[test]
    fn nearest_rank_definition() {
        assert_eq!(nearest_rank(&[0, 1000], 50), 0);
        assert_eq!(nearest_rank(&[0, 1000], 95), 1000);
        assert_eq!(nearest_rank(&[5], 95), 5);
        assert_eq!(nearest_rank(&[], 50), 0);
        let v: Vec<u64> = (1..=20).collect();
        assert_eq!(nearest_rank(&v, 95), 19);
    }

    #[test]
    fn wait_stats_examples() {
        let single = EventLog::from(vec![
            ev(0, EventKind::JobSubmitted, 1),
            started(0, 1, "c", vec![0]),
            ev(10, EventKind::JobFinished, 1),
        ]);
        let s = wait_stats(&single);
        assert_eq!((s.mean_wait_ms, s.median_wait_ms, s.makespan_ms), (0, 0, 10));

        let two = EventLog::from(vec![
            ev(0, EventKind::JobSubmitted, 1),
            ev(0, EventKind::JobSubmitted, 2),
            started(0, 1, "c", vec![0]),
            started(1000, 2, "c", vec![0]),
            ev(2000, EventKind::JobFinished, 2),
            ev(3000, EventKind::JobFinished, 1),
            ev(3000, EventKind::JobSubmitted, 3),
            ev(3500, EventKind::JobCancelled, 3),
        ]);
        let s = wait_stats(&two);
        assert_eq!(s.mean_wait_ms, 500);
        assert_eq!(s.median_wait_ms, 0);
        assert_eq!(s.p95_wait_ms, 1000);
        assert_eq!(s.mean_turnaround_ms, 2500);
        assert_eq!(s.never_started, 1);
        assert_eq!(s.makespan_ms, 3500);
    }

    #[test]
    fn table_is_aligned() {
        let t = render_table(&[
            vec!["a".into(), "bb".into()],
            vec!["ccc".into(), "d".into()],
        ]);
        assert_eq!(t, "a    bb\nccc  d\n");
    }
}
