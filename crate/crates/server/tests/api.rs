mod common;

use common::{config, TestServer};
use hybridsched_core::model::ResourceKind;
use hybridsched_testkit::scenarios::{cluster, smoke_clusters};
use serde_json::{json, Value};

fn job(kinds: &[&str], shape: Value, work: u64) -> String {
    json!({
        "name": "t",
        "kind_preferences": kinds,
        "shape": shape,
        "work_units": work,
        "walltime_limit_ms": 60000
    })
    .to_string()
}

fn frozen() -> TestServer {
    TestServer::start(config(smoke_clusters(), 0))
}

#[test]
fn submit_status_result_round_trip() {
    let s = TestServer::start(config(smoke_clusters(), 1000));
    let (code, body) = s.post("/v1/jobs", Some("alice"), &job(&["gpu"], json!({"rigid": {"node_count": 2}}), 100));
    assert_eq!(code, 201, "{body}");
    let id = body["job_id"].as_u64().unwrap();
    assert_eq!(body["route"], "hpc");
    let done = s.wait_terminal(id);
    assert_eq!(done["state"], "Completed");
    assert_eq!(done["spec"]["user_id"], "alice");
    let (code, manifest) = s.get(&format!("/v1/jobs/{id}/result"));
    assert_eq!(code, 200);
    // speed 10 on two nodes: 1000 * 100 / 20 = 5000 ms
    assert_eq!(manifest["end_ms"].as_u64().unwrap() - manifest["start_ms"].as_u64().unwrap(), 5000);
    assert_eq!(manifest["exit_status"], 0);
    // A terminal record is stable.
    assert_eq!(s.get(&format!("/v1/jobs/{id}")).1, s.get(&format!("/v1/jobs/{id}")).1);
}

#[test]
fn submit_errors() {
    let s = frozen();
    let bad = job(&["cloud"], json!({"elastic": {"min_workers": 4, "max_workers": 2}}), 1);
    let (code, body) = s.post("/v1/jobs", Some("alice"), &bad);
    assert_eq!((code, body["code"].as_str(), body["detail"].as_str()), (422, Some("validation_failed"), Some("BadShape")));

    let ok = job(&["cpu"], json!({"rigid": {"node_count": 1}}), 1);
    let (code, body) = s.post("/v1/jobs", None, &ok);
    assert_eq!((code, body["code"].as_str()), (401, Some("unauthenticated")));
    let (code, body) = s.post("/v1/jobs", Some("mallory"), &ok);
    assert_eq!((code, body["code"].as_str()), (404, Some("unknown_user")));
    let (code, body) = s.post("/v1/jobs", Some("alice"), "{not json");
    assert_eq!((code, body["code"].as_str()), (400, Some("bad_request")));
    let (code, body) = s.post("/v1/jobs", Some("alice"), r#"{"name": 3}"#);
    assert_eq!((code, body["code"].as_str()), (422, Some("validation_failed")));

    let cloud_rigid = job(&["cloud"], json!({"rigid": {"node_count": 1}}), 1);
    let (code, body) = s.post("/v1/jobs", Some("alice"), &cloud_rigid);
    assert_eq!((code, body["code"].as_str()), (422, Some("unroutable_kind")));

    let mut with_data: Value = serde_json::from_str(&ok).unwrap();
    with_data["dataset_refs"] = json!(["sdss-dr7"]);
    let (code, body) = s.post("/v1/jobs", Some("alice"), &with_data.to_string());
    assert_eq!((code, body["code"].as_str()), (422, Some("missing_dataset")));

    // Nothing above created a job.
    let (code, _) = s.get("/v1/jobs/1");
    assert_eq!(code, 404);
}

#[test]
fn quota_rejection() {
    let s = frozen();
    let (code, _) = s.post(
        "/v1/users",
        None,
        r#"{"user_id": "bob", "quota": {"max_concurrent_jobs": 1, "max_nodes_in_use": 4, "max_vcluster_nodes": 0}}"#,
    );
    assert_eq!(code, 201);
    let one = job(&["cpu"], json!({"rigid": {"node_count": 1}}), 1);
    assert_eq!(s.post("/v1/jobs", Some("bob"), &one).0, 201);
    let (code, body) = s.post("/v1/jobs", Some("bob"), &one);
    assert_eq!((code, body["code"].as_str(), body["detail"].as_str()), (403, Some("quota_rejected"), Some("ConcurrencyQuota")));
    let (code, body) = s.post("/v1/users", None, r#"{"user_id": "bob"}"#);
    assert_eq!((code, body["code"].as_str()), (409, Some("duplicate_user")));
}

#[test]
fn cancel_paths() {
    let s = frozen();
    // Fill the GPU cluster so the second job waits in the queue.
    let big = job(&["gpu"], json!({"rigid": {"node_count": 2}}), 100);
    s.post("/v1/jobs", Some("alice"), &big);
    let (_, queued) = s.post("/v1/jobs", Some("alice"), &big);
    let id = queued["job_id"].as_u64().unwrap();
    assert_eq!(s.get(&format!("/v1/jobs/{id}")).1["state"], "Queued");
    let (code, _) = s.get(&format!("/v1/jobs/{id}/result"));
    assert_eq!(code, 409);

    let (code, body) = s.delete(&format!("/v1/jobs/{id}"));
    assert_eq!((code, body["state"].as_str()), (202, Some("Cancelled")));
    assert_eq!(s.get(&format!("/v1/jobs/{id}")).1["state"], "Cancelled");
    let (code, body) = s.delete(&format!("/v1/jobs/{id}"));
    assert_eq!((code, body["code"].as_str()), (409, Some("already_terminal")));
    let (code, manifest) = s.get(&format!("/v1/jobs/{id}/result"));
    assert_eq!((code, manifest["terminal"].as_str()), (200, Some("Cancelled")));

    let (code, body) = s.delete("/v1/jobs/999");
    assert_eq!((code, body["code"].as_str()), (404, Some("unknown_job")));
    let (code, body) = s.get("/v1/jobs/abc");
    assert_eq!((code, body["code"].as_str()), (400, Some("bad_request")));
}

#[test]
fn clusters_and_metrics() {
    let three = vec![
        cluster("cpu-a", ResourceKind::Cpu, 4, 1),
        cluster("gpu-a", ResourceKind::Gpu, 2, 10),
        cluster("knl-a", ResourceKind::Knl, 2, 3),
    ];
    let s = TestServer::start(config(three, 0));
    let (code, body) = s.get("/v1/clusters");
    assert_eq!(code, 200);
    let kinds: Vec<&str> = body.as_array().unwrap().iter().map(|c| c["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["cpu", "gpu", "knl"]);
    assert_eq!(body[0]["free"], 4);

    let (code, m) = s.get("/v1/metrics?window_ms=10000");
    assert_eq!(code, 200);
    assert_eq!(m["utilization"]["aggregate"]["utilization"], "0.0000");
    assert_eq!(m["wait"]["jobs"], 0);
    let (code, body) = s.get("/v1/metrics?window_ms=abc");
    assert_eq!((code, body["code"].as_str()), (400, Some("bad_request")));

    // Reads without writes in between are identical.
    assert_eq!(s.get_raw("/v1/clusters"), s.get_raw("/v1/clusters"));
    assert_eq!(s.get_raw("/v1/metrics"), s.get_raw("/v1/metrics"));
    let (code, body) = s.get("/v1/nope");
    assert_eq!((code, body["code"].as_str()), (404, Some("not_found")));
}

#[test]
fn vcluster_lifecycle() {
    let s = frozen();
    let (code, vc) = s.post("/v1/vclusters", Some("alice"), r#"{"node_count": 2, "image": "spark"}"#);
    assert_eq!(code, 201, "{vc}");
    assert_eq!(vc["node_indices"], json!([0, 1]));
    assert_eq!(vc["state"], "Ready");
    let (_, clusters) = s.get("/v1/clusters");
    assert_eq!((clusters[0]["free"].as_u64(), clusters[0]["vcluster"].as_u64()), (Some(2), Some(2)));

    let (code, body) = s.post("/v1/vclusters", Some("alice"), r#"{"node_count": 8}"#);
    assert_eq!((code, body["code"].as_str()), (409, Some("insufficient_capacity")));
    let (code, body) = s.post("/v1/vclusters", Some("alice"), r#"{"node_count": 0}"#);
    assert_eq!((code, body["code"].as_str()), (422, Some("invalid_request")));

    let id = vc["vcluster_id"].as_u64().unwrap();
    let (code, body) = s.delete(&format!("/v1/vclusters/{id}"));
    assert_eq!((code, body["freed_nodes"].clone()), (200, json!([0, 1])));
    let (code, body) = s.delete(&format!("/v1/vclusters/{id}"));
    assert_eq!((code, body["code"].as_str()), (409, Some("already_released")));
    let (code, body) = s.delete("/v1/vclusters/77");
    assert_eq!((code, body["code"].as_str()), (404, Some("unknown_vcluster")));
}

#[test]
fn missing_dataset_resolves_from_catalog_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("catalog.json");
    std::fs::write(&path, r#"{"sdss-dr7": {"size_bytes": 1000, "registered_at_ms": 0}}"#).unwrap();
    let mut cfg = config(smoke_clusters(), 0);
    cfg.catalog_path = Some(path);
    let s = TestServer::start(cfg);
    let mut body: Value = serde_json::from_str(&job(&["cpu"], json!({"rigid": {"node_count": 1}}), 1)).unwrap();
    body["dataset_refs"] = json!(["sdss-dr7"]);
    assert_eq!(s.post("/v1/jobs", Some("alice"), &body.to_string()).0, 201);
    body["dataset_refs"] = json!(["sdss-dr7", "gaia"]);
    let (code, err) = s.post("/v1/jobs", Some("alice"), &body.to_string());
    assert_eq!((code, err["code"].as_str()), (422, Some("missing_dataset")));
}

#[test]
fn sample_config_starts() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/server.toml");
    let mut cfg = hybridsched_server::ServerConfig::load(&path).unwrap();
    cfg.listen_addr = "127.0.0.1:0".into();
    let s = TestServer::start(cfg);
    let (code, clusters) = s.get("/v1/clusters");
    assert_eq!(code, 200);
    assert_eq!(clusters.as_array().unwrap().len(), 4);
    let job = std::fs::read_to_string(path.with_file_name("job.json")).unwrap();
    assert_eq!(s.post("/v1/jobs", Some("alice"), &job).0, 201);
}
