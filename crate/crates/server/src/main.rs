use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybridsched_server::{start, ServerConfig};

/// Scheduler service: accepts jobs over HTTP and runs them on the
/// configured clusters in virtual time.
#[derive(Parser)]
#[command(name = "hybridschedd", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long, short)]
    config: PathBuf,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .init();
    let args = Args::parse();
    let config = match ServerConfig::load(&args.config) {
        Ok(c) => c.with_env(),
        Err(e) => {
            eprintln!("hybridschedd: {e}");
            return ExitCode::from(2);
        }
    };
    let running = match start(&config).await {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hybridschedd: {e}");
            return ExitCode::from(2);
        }
    };
    tokio::select! {
        _ = running.server => {}
        _ = tokio::signal::ctrl_c() => tracing::info!("shutting down"),
    }
    ExitCode::SUCCESS
}
