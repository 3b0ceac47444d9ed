//! Seeded synthetic workloads and topologies. The same seed and parameters
//! always yield the same trace.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{job_duration_ms, ClusterSpec, JobShape, JobSpec, ResourceKind};
use crate::sim::{FaultDirective, SubmissionTrace, TraceDataset, TraceJob};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadParams {
    pub max_jobs: usize,
    pub max_clusters: usize,
    pub max_nodes_per_cluster: u32,
    /// Upper bound of the gap between consecutive submissions.
    pub max_gap_ms: u64,
    pub max_work_units: u64,
    /// Percentage of jobs drawn elastic when the topology has a cloud pool.
    pub elastic_pct: u32,
    pub max_faults: usize,
    pub with_datasets: bool,
    pub with_priorities: bool,
    /// Every speed factor is 1 and every walltime equals the modeled
    /// runtime, so estimates are exact. Forces rigid jobs only.
    pub exact_estimates: bool,
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            max_jobs: 200,
            max_clusters: 4,
            max_nodes_per_cluster: 8,
            max_gap_ms: 2000,
            max_work_units: 50,
            elastic_pct: 25,
            max_faults: 3,
            with_datasets: true,
            with_priorities: true,
            exact_estimates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workload {
    pub clusters: Vec<ClusterSpec>,
    pub trace: SubmissionTrace,
}

fn kind_speed(kind: ResourceKind) -> u64 {
    match kind {
        ResourceKind::Cpu => 1,
        ResourceKind::Gpu => 4,
        ResourceKind::Knl => 2,
        ResourceKind::Cloud => 1,
    }
}

pub fn random_topology(rng: &mut impl Rng, params: &WorkloadParams) -> Vec<ClusterSpec> {
    let n = rng.gen_range(1..=params.max_clusters.max(1));
    (0..n)
        .map(|i| {
            let kind = ResourceKind::ALL[rng.gen_range(0..ResourceKind::ALL.len())];
            ClusterSpec {
                cluster_id: format!("{kind}-{i}"),
                kind,
                node_count: rng.gen_range(1..=params.max_nodes_per_cluster.max(1)),
                cores_per_node: 16,
                speed_factor: if params.exact_estimates {
                    1
                } else {
                    kind_speed(kind) * rng.gen_range(1..=2)
                },
                staging_bandwidth_bytes_per_s: Some(rng.gen_range(1..=8) * 1_000_000),
            }
        })
        .collect()
}

/// A random workload over a random topology.
pub fn random_workload(seed: u64, params: &WorkloadParams) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = random_topology(&mut rng, params);
    let trace = random_trace(&mut rng, seed, &clusters, params);
    Workload { clusters, trace }
}

/// A random trace against a given topology.
pub fn random_trace(
    rng: &mut impl Rng,
    seed: u64,
    clusters: &[ClusterSpec],
    params: &WorkloadParams,
) -> SubmissionTrace {
    let mut kinds: Vec<ResourceKind> = clusters.iter().map(|c| c.kind).collect();
    kinds.sort();
    kinds.dedup();
    let max_nodes = clusters.iter().map(|c| c.node_count).max().unwrap_or(1);
    let slowest = clusters.iter().map(|c| c.speed_factor).min().unwrap_or(1);

    let datasets: Vec<TraceDataset> = if params.with_datasets {
        (0..3)
            .map(|i| TraceDataset {
                name: format!("ds{i}"),
                size_bytes: rng.gen_range(0..=4_000_000),
            })
            .collect()
    } else {
        Vec::new()
    };

    let n_jobs = rng.gen_range(0..=params.max_jobs);
    let mut t = 0;
    let mut jobs = Vec::with_capacity(n_jobs);
    for i in 0..n_jobs {
        t += rng.gen_range(0..=params.max_gap_ms);
        let elastic = !params.exact_estimates
            && kinds.contains(&ResourceKind::Cloud)
            && rng.gen_range(0..100) < params.elastic_pct;
        let mut prefs = kinds.clone();
        prefs.shuffle(rng);
        prefs.truncate(rng.gen_range(1..=prefs.len()));
        let shape = if elastic {
            if !prefs.contains(&ResourceKind::Cloud) {
                prefs.push(ResourceKind::Cloud);
            }
            let min_workers = rng.gen_range(1..=2);
            JobShape::Elastic {
                min_workers,
                max_workers: rng.gen_range(min_workers..=6),
            }
        } else {
            JobShape::Rigid {
                node_count: rng.gen_range(1..=max_nodes),
            }
        };
        let work_units = rng.gen_range(1..=params.max_work_units.max(1));
        let walltime_limit_ms = if params.exact_estimates {
            job_duration_ms(work_units, 1, u64::from(shape.nodes_to_start())).expect("small values")
        } else {
            let base = job_duration_ms(work_units, slowest, u64::from(shape.nodes_to_start())).expect("small values");
            // Between half and twice the runtime on the slowest cluster.
            (base * rng.gen_range(50..=200) / 100).max(1)
        };
        let dataset_refs = if !datasets.is_empty() && rng.gen_bool(0.3) {
            vec![datasets[rng.gen_range(0..datasets.len())].name.clone()]
        } else {
            Vec::new()
        };
        jobs.push(TraceJob {
            t_ms: t,
            spec: JobSpec {
                name: format!("job-{i}"),
                user_id: format!("user-{}", rng.gen_range(0..3)),
                kind_preferences: prefs,
                shape,
                work_units,
                walltime_limit_ms,
                dataset_refs,
                priority: if params.with_priorities {
                    rng.gen_range(0..=2)
                } else {
                    0
                },
            },
        });
    }

    let n_faults = rng.gen_range(0..=params.max_faults);
    let faults = (0..n_faults)
        .map(|_| {
            let c = &clusters[rng.gen_range(0..clusters.len())];
            FaultDirective {
                t_ms: rng.gen_range(0..=t.max(1)),
                cluster_id: c.cluster_id.clone(),
                node_index: rng.gen_range(0..c.node_count),
                down_duration_ms: rng.gen_range(1..=5000),
            }
        })
        .collect();

    SubmissionTrace {
        rng_seed: seed,
        jobs,
        faults,
        datasets,
    }
}

/// Elastic-only jobs on a single cloud pool.
pub fn elastic_workload(seed: u64, max_jobs: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = vec![ClusterSpec {
        cluster_id: "cloud-0".into(),
        kind: ResourceKind::Cloud,
        node_count: rng.gen_range(1..=12),
        cores_per_node: 8,
        speed_factor: rng.gen_range(1..=3),
        staging_bandwidth_bytes_per_s: None,
    }];
    let params = WorkloadParams {
        max_jobs,
        elastic_pct: 100,
        max_faults: 0,
        with_datasets: false,
        max_gap_ms: 500,
        max_work_units: 40,
        ..WorkloadParams::default()
    };
    let mut trace = random_trace(&mut rng, seed, &clusters, &params);
    // Generous walltimes so that runs end by completion, not timeout.
    for j in &mut trace.jobs {
        j.spec.walltime_limit_ms = j.spec.walltime_limit_ms.max(1) * 4;
    }
    Workload { clusters, trace }
}

/// The large trace used for throughput checks: `jobs` rigid jobs over four
/// 64-node clusters with arrivals roughly matching capacity.
pub fn throughput_workload(seed: u64, jobs: usize) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters: Vec<ClusterSpec> = [ResourceKind::Cpu, ResourceKind::Gpu, ResourceKind::Knl, ResourceKind::Cpu]
        .iter()
        .enumerate()
        .map(|(i, &kind)| ClusterSpec {
            cluster_id: format!("{kind}-{i}"),
            kind,
            node_count: 64,
            cores_per_node: 32,
            speed_factor: kind_speed(kind),
            staging_bandwidth_bytes_per_s: None,
        })
        .collect();
    let kinds = [ResourceKind::Cpu, ResourceKind::Gpu, ResourceKind::Knl];
    let mut t = 0;
    let trace_jobs = (0..jobs)
        .map(|i| {
            t += rng.gen_range(0..=400);
            let mut prefs = kinds.to_vec();
            prefs.shuffle(&mut rng);
            prefs.truncate(rng.gen_range(1..=3));
            let node_count = rng.gen_range(1..=16);
            let work_units = rng.gen_range(1..=200);
            let base = job_duration_ms(work_units, 1, u64::from(node_count)).expect("small values");
            TraceJob {
                t_ms: t,
                spec: JobSpec {
                    name: format!("job-{i}"),
                    user_id: format!("user-{}", i % 7),
                    kind_preferences: prefs,
                    shape: JobShape::Rigid { node_count },
                    work_units,
                    walltime_limit_ms: base * rng.gen_range(100..=150) / 100,
                    dataset_refs: Vec::new(),
                    priority: rng.gen_range(0..=1),
                },
            }
        })
        .collect();
    Workload {
        clusters,
        trace: SubmissionTrace {
            rng_seed: seed,
            jobs: trace_jobs,
            ..SubmissionTrace::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_trace, SimConfig};

    #[test]
    fn same_seed_same_workload() {
        let p = WorkloadParams::default();
        assert_eq!(random_workload(7, &p), random_workload(7, &p));
        assert_ne!(random_workload(7, &p), random_workload(8, &p));
    }

    #[test]
    fn generated_traces_run() {
        let p = WorkloadParams {
            max_jobs: 30,
            ..WorkloadParams::default()
        };
        for seed in 0..20 {
            let w = random_workload(seed, &p);
            assert_eq!(w.trace.first_unsorted(), None);
            run_trace(&w.trace, &w.clusters, SimConfig::default()).unwrap();
        }
    }

    #[test]
    fn exact_estimates_never_time_out() {
        let p = WorkloadParams {
            max_jobs: 20,
            exact_estimates: true,
            with_datasets: false,
            max_faults: 0,
            ..WorkloadParams::default()
        };
        for seed in 0..20 {
            let w = random_workload(seed, &p);
            let out = run_trace(&w.trace, &w.clusters, SimConfig::default()).unwrap();
            assert!(out
                .jobs
                .iter()
                .all(|j| j.state != crate::model::JobState::TimedOut));
        }
    }
}
