//! Small fixed scenarios with hand-walked expected outcomes.

use hybridsched_core::model::{ClusterSpec, JobShape, JobSpec, Millis, ResourceKind};
use hybridsched_core::scheduler::SchedulerPolicy;
use hybridsched_core::sim::{FaultDirective, SimConfig, SubmissionTrace, TraceJob};

pub fn cluster(id: &str, kind: ResourceKind, nodes: u32, speed: u64) -> ClusterSpec {
    ClusterSpec {
        cluster_id: id.into(),
        kind,
        node_count: nodes,
        cores_per_node: 16,
        speed_factor: speed,
        staging_bandwidth_bytes_per_s: None,
    }
}

pub fn rigid(name: &str, kinds: &[ResourceKind], nodes: u32, work: u64, wall: Millis) -> JobSpec {
    JobSpec {
        name: name.into(),
        user_id: "alice".into(),
        kind_preferences: kinds.to_vec(),
        shape: JobShape::Rigid { node_count: nodes },
        work_units: work,
        walltime_limit_ms: wall,
        dataset_refs: vec![],
        priority: 0,
    }
}

fn trace(jobs: Vec<(Millis, JobSpec)>) -> SubmissionTrace {
    SubmissionTrace {
        rng_seed: 0,
        jobs: jobs.into_iter().map(|(t_ms, spec)| TraceJob { t_ms, spec }).collect(),
        ..SubmissionTrace::default()
    }
}

/// One 2-node job on a 2-node GPU cluster (speed 10, work 100, so 5000 ms)
/// whose node 1 fails at 1000 ms for 2000 ms.
pub fn node_failure() -> (Vec<ClusterSpec>, SubmissionTrace) {
    let mut t = trace(vec![(0, rigid("nbody", &[ResourceKind::Gpu], 2, 100, 60_000))]);
    t.faults.push(FaultDirective {
        t_ms: 1000,
        cluster_id: "gpu-a".into(),
        node_index: 1,
        down_duration_ms: 2000,
    });
    (vec![cluster("gpu-a", ResourceKind::Gpu, 2, 10)], t)
}

/// Retry budget 1: the job is requeued at 1000, waits for the node to come
/// back at 3000, then reruns for its full 5000 ms and finishes at 8000.
pub const NODE_FAILURE_RETRY: [&str; 8] = [
    r#"{"t":0,"seq":0,"kind":"JobSubmitted","job":1}"#,
    r#"{"t":0,"seq":1,"kind":"JobQueued","job":1}"#,
    r#"{"t":0,"seq":2,"kind":"JobStarted","cluster":"gpu-a","job":1,"nodes":[0,1]}"#,
    r#"{"t":1000,"seq":3,"kind":"NodeDown","cluster":"gpu-a","node":1}"#,
    r#"{"t":1000,"seq":4,"kind":"JobQueued","job":1,"reason":"node_lost"}"#,
    r#"{"t":3000,"seq":5,"kind":"NodeUp","cluster":"gpu-a","node":1}"#,
    r#"{"t":3000,"seq":6,"kind":"JobStarted","cluster":"gpu-a","job":1,"nodes":[0,1]}"#,
    r#"{"t":8000,"seq":7,"kind":"JobFinished","job":1}"#,
];

/// Retry budget 0: the job fails at 1000 and the node still comes back.
pub const NODE_FAILURE_NO_RETRY: [&str; 6] = [
    r#"{"t":0,"seq":0,"kind":"JobSubmitted","job":1}"#,
    r#"{"t":0,"seq":1,"kind":"JobQueued","job":1}"#,
    r#"{"t":0,"seq":2,"kind":"JobStarted","cluster":"gpu-a","job":1,"nodes":[0,1]}"#,
    r#"{"t":1000,"seq":3,"kind":"NodeDown","cluster":"gpu-a","node":1}"#,
    r#"{"t":1000,"seq":4,"kind":"JobFailed","job":1,"reason":"node_lost"}"#,
    r#"{"t":3000,"seq":5,"kind":"NodeUp","cluster":"gpu-a","node":1}"#,
];

/// Four CPU nodes (speed 1) and two GPU nodes (speed 2). At t=0 arrive,
/// in order: one 4-node CPU-only job of 10 units, then four 2-node jobs of
/// 20 units that prefer GPU but accept CPU.
///
/// Partitioned (GPU jobs confined to GPU): the CPU job runs [0, 2500) on
/// all four CPU nodes; the GPU jobs run back to back on the two GPU nodes,
/// 5000 ms each, ending at 20000. Busy = 4*2500 + 4*2*5000 = 50000 over
/// 6*20000 = 120000 available.
///
/// Hybrid: G1 takes the GPU pair [0, 5000). At 2500 the CPU job ends and
/// G2, G3 start on CPU nodes {0,1} and {2,3} for 10000 ms each, ending at
/// 12500. G4 takes the GPU pair [5000, 10000). Busy = 10000 + 10000 +
/// 20000 + 20000 + 10000 = 70000 over 6*12500 = 75000 available.
pub fn hybrid_mix() -> (Vec<ClusterSpec>, SubmissionTrace) {
    let clusters = vec![
        cluster("cpu-a", ResourceKind::Cpu, 4, 1),
        cluster("gpu-a", ResourceKind::Gpu, 2, 2),
    ];
    let gpu_first = [ResourceKind::Gpu, ResourceKind::Cpu];
    let mut jobs = vec![(0, rigid("reduce", &[ResourceKind::Cpu], 4, 10, 10_000))];
    for i in 1..=4 {
        jobs.push((0, rigid(&format!("nbody-{i}"), &gpu_first, 2, 20, 20_000)));
    }
    (clusters, trace(jobs))
}

pub const HYBRID_BUSY: u64 = 70_000;
pub const HYBRID_AVAILABLE: u64 = 75_000;
pub const PARTITIONED_BUSY: u64 = 50_000;
pub const PARTITIONED_AVAILABLE: u64 = 120_000;

pub fn partitioned_config() -> SimConfig {
    SimConfig {
        policy: SchedulerPolicy {
            static_partition: true,
            ..SchedulerPolicy::default()
        },
        ..SimConfig::default()
    }
}

/// Three jobs for a service round trip: two rigid on CPU and GPU and one
/// elastic on the cloud pool.
pub fn smoke_clusters() -> Vec<ClusterSpec> {
    vec![
        cluster("cloud-a", ResourceKind::Cloud, 4, 1),
        cluster("cpu-a", ResourceKind::Cpu, 4, 1),
        cluster("gpu-a", ResourceKind::Gpu, 2, 10),
        cluster("knl-a", ResourceKind::Knl, 2, 3),
    ]
}

pub fn smoke_jobs() -> Vec<JobSpec> {
    vec![
        rigid("galaxy-fit", &[ResourceKind::Cpu], 2, 4, 10_000),
        rigid("nbody", &[ResourceKind::Gpu, ResourceKind::Cpu], 2, 100, 60_000),
        JobSpec {
            name: "catalog-join".into(),
            user_id: "alice".into(),
            kind_preferences: vec![ResourceKind::Cloud],
            shape: JobShape::Elastic {
                min_workers: 1,
                max_workers: 4,
            },
            work_units: 8,
            walltime_limit_ms: 60_000,
            dataset_refs: vec![],
            priority: 0,
        },
    ]
}
