//! HTTP front end for the platform. Handlers run concurrently but every
//! read and write is a closure executed in order by one actor task that
//! owns the [`Platform`], so responses follow a single linear history.

pub mod config;
pub mod error;
mod routes;

use std::net::SocketAddr;
use std::time::{Duration, Instant};

use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use hybridsched_core::catalog::Catalog;
use hybridsched_core::model::Millis;
use hybridsched_core::platform::Platform;

pub use config::{ClockMode, ConfigError, ServerConfig};
pub use error::{ApiError, ERROR_TABLE};
pub use routes::router;

type Command = Box<dyn FnOnce(&mut Platform) + Send>;

/// Cheap, cloneable handle to the actor.
#[derive(Clone)]
pub struct Handle {
    tx: mpsc::Sender<Command>,
    auth_header: String,
}

impl Handle {
    /// Runs `f` against the platform after every earlier command.
    pub async fn call<R, F>(&self, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Platform) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let cmd: Command = Box::new(move |p| {
            let _ = tx.send(f(p));
        });
        self.tx.send(cmd).await.map_err(|_| ApiError::unavailable())?;
        rx.await.map_err(|_| ApiError::unavailable())
    }

    pub fn auth_header(&self) -> &str {
        &self.auth_header
    }
}

/// Maps wall-clock time onto virtual time.
struct Clock {
    origin: Instant,
    base: Millis,
    scale: u64,
}

impl Clock {
    fn target(&self) -> Millis {
        let micros = u64::try_from(self.origin.elapsed().as_micros()).unwrap_or(u64::MAX);
        self.base.saturating_add(micros.saturating_mul(self.scale) / 1000)
    }
}

/// Builds the platform described by `config`.
pub fn build_platform(config: &ServerConfig) -> Result<Platform, StartError> {
    let clusters = config.cluster_specs()?;
    let mut platform = Platform::new(clusters, config.sim_config())?;
    if let Some(path) = &config.catalog_path {
        platform = platform.with_catalog(Catalog::open(path)?);
    }
    for u in &config.users {
        platform.create_user(&u.user_id, u.display_name.as_deref(), u.quota)?;
    }
    Ok(platform)
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] hybridsched_core::sim::SimError),
    #[error(transparent)]
    Catalog(#[from] hybridsched_core::catalog::CatalogError),
    #[error("seeding users: {0}")]
    User(#[from] hybridsched_core::cloud::CloudError),
    #[error("binding {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

/// Starts the actor on the current runtime.
pub fn spawn_actor(mut platform: Platform, config: &ServerConfig) -> (Handle, JoinHandle<()>) {
    let (tx, mut rx) = mpsc::channel::<Command>(256);
    let clock = Clock {
        origin: Instant::now(),
        base: platform.now(),
        scale: config.effective_scale(),
    };
    let tick = Duration::from_millis(config.tick_ms.max(1));
    let task = tokio::spawn(async move {
        let mut ticker = tokio::time::interval(tick);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                cmd = rx.recv() => {
                    let Some(cmd) = cmd else { break };
                    platform.advance_to(clock.target());
                    cmd(&mut platform);
                }
                _ = ticker.tick() => {
                    platform.advance_to(clock.target());
                }
            }
        }
    });
    let handle = Handle {
        tx,
        auth_header: config.auth_header.to_ascii_lowercase(),
    };
    (handle, task)
}

/// A running server bound to a local address.
pub struct Running {
    pub addr: SocketAddr,
    pub handle: Handle,
    pub server: JoinHandle<()>,
}

/// Binds `config.listen_addr`, starts the actor and serves until the
/// runtime shuts down.
pub async fn start(config: &ServerConfig) -> Result<Running, StartError> {
    let platform = build_platform(config)?;
    let listener = TcpListener::bind(&config.listen_addr)
        .await
        .map_err(|source| StartError::Bind {
            addr: config.listen_addr.clone(),
            source,
        })?;
    let addr = listener.local_addr().map_err(|source| StartError::Bind {
        addr: config.listen_addr.clone(),
        source,
    })?;
    let (handle, _actor) = spawn_actor(platform, config);
    let app = router(handle.clone());
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server stopped: {e}");
        }
    });
    tracing::info!("listening on {addr}");
    Ok(Running {
        addr,
        handle,
        server,
    })
}
