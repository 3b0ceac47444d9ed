//! `hsctl`: submit, watch and cancel jobs on a running scheduler, or run
//! a trace offline.
//!
//! Exit codes: 0 success, 1 remote or API error, 2 bad input, 3 the
//! simulation did not terminate.

mod client;
mod render;
mod simulate;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

use hybridsched_core::model::JobRecord;
use hybridsched_core::platform::{ClusterView, MetricsView, Submitted};

use client::{Client, Reply};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Remote(String),
    #[error("{code} ({status}): {message}")]
    Api {
        status: u16,
        code: String,
        message: String,
    },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NonTerminating(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Remote(_) | CliError::Api { .. } => 1,
            CliError::Input(_) => 2,
            CliError::NonTerminating(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "hsctl", version, about = "Client for the hybrid cluster scheduler")]
struct Cli {
    /// Scheduler service base URL.
    #[arg(long, global = true, env = "HYBRIDSCHED_SERVER", default_value = "http://127.0.0.1:8080")]
    server: String,
    /// Print raw JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Submit a job described by a JSON file.
    Submit {
        #[arg(long)]
        file: PathBuf,
        /// Submitting user; defaults to the file's `user_id`.
        #[arg(long, env = "HYBRIDSCHED_USER")]
        user: Option<String>,
    },
    /// Show a job.
    Status { job_id: u64 },
    /// Cancel a job.
    Cancel { job_id: u64 },
    /// List clusters and their node counts.
    Clusters,
    /// Utilization and wait statistics.
    Metrics {
        /// Trailing window; defaults to everything since start.
        #[arg(long)]
        window_ms: Option<u64>,
    },
    /// Run a trace offline and write its event log.
    Simulate(simulate::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hsctl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Submit { file, user } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
            let body: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
            let user = user.or_else(|| body["user_id"].as_str().map(str::to_string));
            let client = Client::new(&cli.server, user);
            let reply = client.post("/v1/jobs", &text)?;
            if let Some(s) = decode::<Submitted>(reply, json)? {
                println!("{}", s.job_id.0);
            }
        }
        Command::Status { job_id } => {
            let reply = Client::new(&cli.server, None).get(&format!("/v1/jobs/{job_id}"))?;
            if let Some(rec) = decode::<JobRecord>(reply, json)? {
                print!("{}", render::job(&rec));
            }
        }
        Command::Cancel { job_id } => {
            let reply = Client::new(&cli.server, None).delete(&format!("/v1/jobs/{job_id}"))?;
            if let Some(v) = decode::<Value>(reply, json)? {
                println!("job {job_id}: {}", v["state"].as_str().unwrap_or("?"));
            }
        }
        Command::Clusters => {
            let reply = Client::new(&cli.server, None).get("/v1/clusters")?;
            if let Some(views) = decode::<Vec<ClusterView>>(reply, json)? {
                print!("{}", render::clusters(&views));
            }
        }
        Command::Metrics { window_ms } => {
            let path = match window_ms {
                Some(w) => format!("/v1/metrics?window_ms={w}"),
                None => "/v1/metrics".to_string(),
            };
            let reply = Client::new(&cli.server, None).get(&path)?;
            if let Some(m) = decode::<MetricsView>(reply, json)? {
                print!("{}", render::metrics(&m));
            }
        }
        Command::Simulate(args) => simulate::run(&args, json)?,
    }
    Ok(())
}

/// Checks the status and parses the body. With `--json` the body is
/// written out verbatim instead and `None` comes back.
fn decode<T: DeserializeOwned>(reply: Reply, json: bool) -> Result<Option<T>, CliError> {
    if json {
        let mut out = std::io::stdout().lock();
        out.write_all(reply.body.as_bytes())
            .and_then(|()| out.flush())
            .map_err(|e| CliError::Input(format!("writing output: {e}")))?;
    }
    if !(200..300).contains(&reply.status) {
        let v: Value = serde_json::from_str(&reply.body).unwrap_or(Value::Null);
        return Err(CliError::Api {
            status: reply.status,
            code: v["code"].as_str().unwrap_or("unknown").to_string(),
            message: v["message"].as_str().unwrap_or(&reply.body).to_string(),
        });
    }
    if json {
        return Ok(None);
    }
    serde_json::from_str(&reply.body)
        .map(Some)
        .map_err(|e| CliError::Remote(format!("unexpected response: {e}")))
}
