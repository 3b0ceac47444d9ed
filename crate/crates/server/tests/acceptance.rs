//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances are pinned below.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use hybridsched_core::metrics::{self, Scenario, Window};
use hybridsched_core::model::{job_duration_ms, transition, JobShape, JobState, LifecycleEvent};
use hybridsched_core::scheduler::SchedulerPolicy;
use hybridsched_core::sim::{run_trace, EventKind, SimConfig};
use hybridsched_core::workload::{elastic_workload, random_workload, throughput_workload, WorkloadParams};
use hybridsched_testkit::{brute, replay, reservation, scenarios, specs_of, transitions};
use serde_json::Value;

const DETERMINISM_BUDGET: Duration = Duration::from_secs(10);
const HYBRID_BUDGET: Duration = Duration::from_secs(1);
const HYBRID_MIN_POINTS: u64 = 10;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(5);
const THROUGHPUT_BUDGET: Duration = Duration::from_secs(5);
const THROUGHPUT_MIN_EVENTS: usize = 30_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn determinism() -> Outcome {
    let params = WorkloadParams {
        max_jobs: 200,
        max_clusters: 4,
        ..WorkloadParams::default()
    };
    let started = Instant::now();
    for seed in 0..50 {
        let w = random_workload(seed, &params);
        let a = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
        let b = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
        ensure(a.log.to_canonical_string() == b.log.to_canonical_string(), || {
            format!("seed {seed}: logs differ")
        })?;
    }
    let took = started.elapsed();
    ensure(took < DETERMINISM_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("50 traces byte-identical in {took:?}"))
}

fn safety() -> Outcome {
    let base = SchedulerPolicy::default();
    let policies = [
        base,
        SchedulerPolicy { backfill: false, ..base },
        SchedulerPolicy { static_partition: true, ..base },
        SchedulerPolicy { hybrid_rigid_on_cloud: true, ..base },
    ];
    let params = WorkloadParams {
        max_jobs: 60,
        ..WorkloadParams::default()
    };
    let mut events = 0;
    for seed in 0..1000u64 {
        let w = random_workload(seed, &params);
        let policy = policies[(seed % 4) as usize];
        let config = SimConfig { policy, ..SimConfig::default() };
        let out = run_trace(&w.trace, &w.clusters, config).map_err(|e| e.to_string())?;
        let specs = specs_of(&w.trace);
        replay::check_log(&out.log, &w.clusters, &specs, &policy).map_err(|e| format!("seed {seed}: {e}"))?;
        replay::all_terminal(&out.log, &specs).map_err(|e| format!("seed {seed}: {e}"))?;
        events += out.log.len();
    }
    Ok(format!("1000 traces, {events} events replayed clean"))
}

fn backfill() -> Outcome {
    let params = WorkloadParams {
        max_jobs: 20,
        exact_estimates: true,
        with_datasets: false,
        with_priorities: false,
        max_faults: 0,
        ..WorkloadParams::default()
    };
    let no_backfill = SchedulerPolicy {
        backfill: false,
        ..SchedulerPolicy::default()
    };
    let (mut checked, mut compared) = (0, 0);
    for seed in 0..300u64 {
        let w = random_workload(seed, &params);
        let specs = specs_of(&w.trace);
        let with = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
        reservation::check_all(&with.log, &with.reservations, &w.clusters, &specs, &SchedulerPolicy::default())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        checked += with.reservations.len();
        for r in &with.reservations {
            let job = with.jobs.iter().find(|j| j.job_id == r.reservation.job_id).unwrap();
            ensure(job.start_ms.is_some_and(|s| s <= r.reservation.start_ms), || {
                format!("seed {seed}: {} started after its reservation", r.reservation.job_id)
            })?;
        }
        let Some(first) = with.reservations.first() else { continue };
        let config = SimConfig { policy: no_backfill, ..SimConfig::default() };
        let without = run_trace(&w.trace, &w.clusters, config).map_err(|e| e.to_string())?;
        let start = |jobs: &[hybridsched_core::model::JobRecord]| {
            jobs.iter().find(|j| j.job_id == first.reservation.job_id).and_then(|j| j.start_ms)
        };
        ensure(start(&with.jobs) <= start(&without.jobs), || {
            format!("seed {seed}: backfill delayed {}", first.reservation.job_id)
        })?;
        compared += 1;
    }
    ensure(checked > 0 && compared > 0, || "no reservations were exercised".into())?;
    Ok(format!("{checked} reservations match the oracle, {compared} head jobs not delayed"))
}

fn lifecycle() -> Outcome {
    let mut cells = 0;
    for state in JobState::ALL {
        for event in LifecycleEvent::ALL {
            for retries in [0, 1] {
                let got = transition(state, event, retries).ok();
                let want = transitions::expected(state, event, retries);
                ensure(got == want, || format!("{state:?} x {event:?} ({retries} retries): {got:?} != {want:?}"))?;
            }
            cells += 1;
        }
    }
    Ok(format!("{cells} transitions match the table"))
}

fn hybrid_gain() -> Outcome {
    let started = Instant::now();
    let (clusters, trace) = scenarios::hybrid_mix();
    let partitioned = Scenario {
        label: "partitioned".into(),
        clusters: clusters.clone(),
        config: scenarios::partitioned_config(),
    };
    let hybrid = Scenario {
        label: "hybrid".into(),
        clusters,
        config: SimConfig::default(),
    };
    let c = metrics::compare(&trace, &partitioned, &hybrid).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    ensure(
        (c.a.busy_node_ms, c.a.available_node_ms, c.b.busy_node_ms, c.b.available_node_ms)
            == (
                scenarios::PARTITIONED_BUSY,
                scenarios::PARTITIONED_AVAILABLE,
                scenarios::HYBRID_BUSY,
                scenarios::HYBRID_AVAILABLE,
            ),
        || format!("unexpected totals {c:?}"),
    )?;
    ensure(c.b.utilization_ratio().exceeds_by_points(c.a.utilization_ratio(), HYBRID_MIN_POINTS), || {
        format!("gain {} below {HYBRID_MIN_POINTS} points", c.delta.utilization)
    })?;
    ensure(took < HYBRID_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{} vs {} ({})", c.b.utilization, c.a.utilization, c.delta.utilization))
}

fn utilization() -> Outcome {
    let params = WorkloadParams {
        max_jobs: 12,
        max_gap_ms: 500,
        max_work_units: 10,
        ..WorkloadParams::default()
    };
    for seed in 0..100u64 {
        let w = random_workload(seed, &params);
        let out = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
        let end = out.end_ms.max(1);
        for (from, to) in [(0, end), (end / 3, end / 3 + end / 2 + 1)] {
            let window = Window::new(from, to).map_err(|e| e.to_string())?;
            let r = metrics::utilization(&out.log, &w.clusters, window, &[]).map_err(|e| e.to_string())?;
            let oracle = brute::utilization(&out.log, &w.clusters, from, to, &[]);
            for (row, (busy, avail)) in r.clusters.iter().zip(oracle) {
                ensure((row.busy_node_ms, row.available_node_ms) == (busy, avail), || {
                    format!("seed {seed} {}: ({}, {}) != ({busy}, {avail})", row.cluster_id, row.busy_node_ms, row.available_node_ms)
                })?;
            }
        }
    }
    Ok("100 logs match the per-millisecond count exactly".into())
}

fn elastic() -> Outcome {
    let mut jobs = 0;
    for seed in 0..100u64 {
        let w = elastic_workload(seed, 15);
        let out = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
        let speed = w.clusters[0].speed_factor;
        for job in &out.jobs {
            let JobShape::Elastic { min_workers, max_workers } = job.spec.shape else { continue };
            for s in &job.worker_history {
                ensure((min_workers..=max_workers).contains(&s.worker_count), || {
                    format!("seed {seed} {}: {} workers outside [{min_workers}, {max_workers}]", job.job_id, s.worker_count)
                })?;
            }
            if job.state == JobState::Completed {
                let need = job.spec.work_units * 1000;
                let credit = job.credited_work_milli;
                ensure(credit >= need && credit < need + u64::from(max_workers) * speed, || {
                    format!("seed {seed} {}: credited {credit} for {need}", job.job_id)
                })?;
            }
            jobs += 1;
        }
    }
    Ok(format!("{jobs} elastic jobs within bounds"))
}

fn round_trip() -> Outcome {
    let started = Instant::now();
    let s = common::TestServer::start(common::config(scenarios::smoke_clusters(), 1000));
    let mut ids = Vec::new();
    for spec in scenarios::smoke_jobs() {
        let (code, body) = s.post("/v1/jobs", Some("alice"), &serde_json::to_string(&spec).unwrap());
        ensure(code == 201, || format!("submit {}: {code} {body}", spec.name))?;
        ids.push(body["job_id"].as_u64().unwrap());
    }
    let mut manifests: Vec<Value> = Vec::new();
    for id in &ids {
        let rec = s.wait_terminal(*id);
        ensure(rec["state"] == "Completed", || format!("job {id} ended {}", rec["state"]))?;
        let (code, m) = s.get(&format!("/v1/jobs/{id}/result"));
        ensure(code == 200, || format!("result {id}: {code}"))?;
        manifests.push(m);
    }
    let log = s.log();
    for (id, m) in ids.iter().zip(&manifests) {
        let at = |kind: EventKind| {
            log.events()
                .iter()
                .filter(|e| e.kind == kind && e.job.is_some_and(|j| j.0 == *id))
                .map(|e| e.t)
                .next_back()
        };
        let (start, end) = (m["start_ms"].as_u64(), m["end_ms"].as_u64());
        ensure((start, end) == (at(EventKind::JobStarted), at(EventKind::JobFinished)), || {
            format!("job {id}: manifest {start:?}..{end:?} disagrees with the log")
        })?;
    }
    // Rigid runtimes follow the work formula on the chosen cluster.
    let dur = |m: &Value| m["end_ms"].as_u64().unwrap() - m["start_ms"].as_u64().unwrap();
    let expect = [job_duration_ms(4, 1, 2).unwrap(), job_duration_ms(100, 10, 2).unwrap()];
    ensure([dur(&manifests[0]), dur(&manifests[1])] == expect, || {
        format!("rigid durations {:?} != {expect:?}", [dur(&manifests[0]), dur(&manifests[1])])
    })?;
    let took = started.elapsed();
    ensure(took < ROUND_TRIP_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("3 jobs round-tripped in {took:?}"))
}

fn failures() -> Outcome {
    let (clusters, trace) = scenarios::node_failure();
    let lines = |config| -> Result<Vec<String>, String> {
        let out = run_trace(&trace, &clusters, config).map_err(|e| e.to_string())?;
        Ok(out.log.to_canonical_string().lines().map(str::to_string).collect())
    };
    let retry = lines(SimConfig::default())?;
    ensure(retry == scenarios::NODE_FAILURE_RETRY, || format!("retry timeline: {retry:#?}"))?;
    let config = SimConfig {
        retry_budget: 0,
        ..SimConfig::default()
    };
    let no_retry = lines(config)?;
    ensure(no_retry == scenarios::NODE_FAILURE_NO_RETRY, || format!("no-retry timeline: {no_retry:#?}"))?;
    Ok("requeue and fail timelines match".into())
}

fn throughput() -> Outcome {
    let w = throughput_workload(11, 10_000);
    let started = Instant::now();
    let out = run_trace(&w.trace, &w.clusters, SimConfig::default()).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    let n = out.log.len();
    ensure(n >= THROUGHPUT_MIN_EVENTS, || format!("only {n} events"))?;
    ensure(took < THROUGHPUT_BUDGET, || format!("{n} events took {took:?}"))?;
    Ok(format!("{n} events in {took:?}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("determinism", determinism),
        ("allocation-safety", safety),
        ("backfill-correctness", backfill),
        ("lifecycle-table", lifecycle),
        ("hybrid-utilization-gain", hybrid_gain),
        ("utilization-accounting", utilization),
        ("elastic-bounds", elastic),
        ("api-round-trip", round_trip),
        ("node-failure-handling", failures),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(note) => println!("PASS {:>2} {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
