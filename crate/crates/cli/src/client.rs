use ureq::http::Response;
use ureq::Body;

use crate::CliError;

/// Thin blocking client. Bodies are returned verbatim so `--json` can pass
/// them through untouched.
pub struct Client {
    base: String,
    user: Option<String>,
    agent: ureq::Agent,
}

pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Client {
    pub fn new(server: &str, user: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Client {
            base: server.trim_end_matches('/').to_string(),
            user,
            agent,
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish(&self, resp: Result<Response<Body>, ureq::Error>) -> Result<Reply, CliError> {
        let mut resp = resp.map_err(|e| CliError::Remote(format!("{}: {e}", self.base)))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| CliError::Remote(format!("reading response: {e}")))?;
        Ok(Reply { status, body })
    }

    pub fn get(&self, path: &str) -> Result<Reply, CliError> {
        self.finish(self.agent.get(self.url(path)).call())
    }

    pub fn delete(&self, path: &str) -> Result<Reply, CliError> {
        self.finish(self.agent.delete(self.url(path)).call())
    }

    pub fn post(&self, path: &str, body: &str) -> Result<Reply, CliError> {
        let mut req = self
            .agent
            .post(self.url(path))
            .header("content-type", "application/json");
        if let Some(user) = &self.user {
            req = req.header("x-user-id", user);
        }
        self.finish(req.send(body))
    }
}
