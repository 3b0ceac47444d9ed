#![allow(dead_code)]

use hybridsched_core::cloud::Quota;
use hybridsched_core::model::ClusterSpec;
use hybridsched_server::config::SeedUser;
use hybridsched_server::ServerConfig;
use hybridsched_core::sim::EventLog;
use serde_json::Value;

pub struct TestServer {
    pub base: String,
    agent: ureq::Agent,
    handle: hybridsched_server::Handle,
    rt: tokio::runtime::Runtime,
}

pub fn config(clusters: Vec<ClusterSpec>, time_scale: u64) -> ServerConfig {
    ServerConfig {
        listen_addr: "127.0.0.1:0".into(),
        time_scale,
        tick_ms: 5,
        clusters,
        users: vec![SeedUser {
            user_id: "alice".into(),
            display_name: None,
            quota: Quota::unlimited(),
        }],
        ..ServerConfig::default()
    }
}

impl TestServer {
    pub fn start(config: ServerConfig) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let running = rt.block_on(hybridsched_server::start(&config)).unwrap();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        TestServer {
            base: format!("http://{}", running.addr),
            agent,
            handle: running.handle,
            rt,
        }
    }

    /// Snapshot of the server's event log.
    pub fn log(&self) -> EventLog {
        self.rt
            .block_on(self.handle.call(|p| p.sim().log().clone()))
            .unwrap()
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, String) {
        let mut resp = resp.expect("request reaches the server");
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_string().unwrap())
    }

    pub fn get_raw(&self, path: &str) -> (u16, String) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let (s, body) = self.get_raw(path);
        (s, serde_json::from_str(&body).unwrap())
    }

    pub fn post(&self, path: &str, user: Option<&str>, body: &str) -> (u16, Value) {
        let mut req = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json");
        if let Some(u) = user {
            req = req.header("x-user-id", u);
        }
        let (s, body) = Self::finish(req.send(body));
        (s, serde_json::from_str(&body).unwrap())
    }

    pub fn delete(&self, path: &str) -> (u16, Value) {
        let (s, body) = Self::finish(self.agent.delete(format!("{}{path}", self.base)).call());
        (s, serde_json::from_str(&body).unwrap())
    }

    /// Polls a job until it is terminal.
    pub fn wait_terminal(&self, id: u64) -> Value {
        for _ in 0..2000 {
            let (_, v) = self.get(&format!("/v1/jobs/{id}"));
            let state = v["state"].as_str().unwrap().to_string();
            if ["Completed", "Failed", "Cancelled", "TimedOut"].contains(&state.as_str()) {
                return v;
            }
            std::thread::sleep(std::time::Duration::from_millis(2));
        }
        panic!("job {id} did not finish");
    }
}
