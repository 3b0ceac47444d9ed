use hybridsched_core::metrics::{render_table, render_utilization};
use hybridsched_core::model::JobRecord;
use hybridsched_core::platform::{ClusterView, MetricsView};

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn row(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

pub fn job(rec: &JobRecord) -> String {
    let alloc = rec.allocation.as_ref().or(rec.last_allocation.as_ref());
    let nodes = alloc.map(|a| {
        a.node_indices
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(",")
    });
    let duration = rec.start_ms.zip(rec.end_ms).map(|(s, e)| format!("{} ms", e - s));
    let mut rows = vec![
        vec!["job".into(), rec.job_id.0.to_string()],
        vec!["name".into(), rec.spec.name.clone()],
        vec!["user".into(), rec.spec.user_id.clone()],
        vec!["state".into(), format!("{:?}", rec.state)],
        vec!["cluster".into(), opt(alloc.map(|a| a.cluster_id.clone()))],
        vec!["nodes".into(), opt(nodes)],
        vec!["submitted_ms".into(), opt(rec.submit_ms)],
        vec!["started_ms".into(), opt(rec.start_ms)],
        vec!["ended_ms".into(), opt(rec.end_ms)],
        vec!["duration".into(), opt(duration)],
    ];
    if let Some(reason) = &rec.failure_reason {
        rows.push(vec!["reason".into(), reason.clone()]);
    }
    render_table(&rows)
}

pub fn clusters(views: &[ClusterView]) -> String {
    let mut rows = vec![row(&["cluster", "kind", "nodes", "speed", "free", "busy", "down", "vcluster"])];
    for v in views {
        rows.push(vec![
            v.spec.cluster_id.clone(),
            v.spec.kind.to_string(),
            v.spec.node_count.to_string(),
            v.spec.speed_factor.to_string(),
            v.free.to_string(),
            v.busy.to_string(),
            v.down.to_string(),
            v.vcluster.to_string(),
        ]);
    }
    render_table(&rows)
}

pub fn metrics(m: &MetricsView) -> String {
    let w = &m.wait;
    let mut out = format!("now {} ms\n", m.now_ms);
    out.push_str(&render_utilization(&m.utilization));
    out.push('\n');
    out.push_str(&render_table(&[
        row(&["jobs", "started", "unfinished", "mean_wait_ms", "median_wait_ms", "p95_wait_ms", "makespan_ms"]),
        vec![
            w.jobs.to_string(),
            w.started.to_string(),
            w.unfinished.to_string(),
            w.mean_wait_ms.to_string(),
            w.median_wait_ms.to_string(),
            w.p95_wait_ms.to_string(),
            w.makespan_ms.to_string(),
        ],
    ]));
    out
}
