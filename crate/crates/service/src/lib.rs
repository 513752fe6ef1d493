//! Local HTTP API over a sacode data directory.
//!
//! Every response is an [`ApiEnvelope`]. Mutations are appended to the
//! session's event log and synced before the response is sent.

mod api;
mod error;

use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use sacode_core::{CodingTree, StoreError, Workspace};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use api::{router, AppState};
pub use error::{ApiEnvelope, ApiError, ErrorBody};

pub const DEFAULT_HOST: &str = "127.0.0.1";
pub const DEFAULT_PORT: u16 = 8787;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            host: DEFAULT_HOST.to_string(),
            port: DEFAULT_PORT,
            data_dir: data_dir.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: io::Error,
    },
    #[error("data directory: {0}")]
    DataDir(#[from] StoreError),
    #[error("server error: {0}")]
    Serve(#[source] io::Error),
}

/// A running server. Dropping the handle leaves the server running; call
/// [`shutdown`](ServiceHandle::shutdown) to stop it.
#[derive(Debug)]
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<io::Result<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        self.wait().await
    }

    /// Waits until the server exits.
    pub async fn wait(self) -> Result<(), ServiceError> {
        match self.task.await {
            Ok(r) => r.map_err(ServiceError::Serve),
            Err(e) => Err(ServiceError::Serve(io::Error::other(e))),
        }
    }
}

/// Opens the data directory, binds, and starts serving in the background.
pub async fn serve(config: ServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let workspace = Workspace::open(&config.data_dir, Arc::new(CodingTree::default_tree()))?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: addr.clone(), source })?;
    let local = listener
        .local_addr()
        .map_err(|source| ServiceError::Bind { addr, source })?;
    let app = router(AppState::new(workspace));
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServiceHandle {
        addr: local,
        stop: Some(stop),
        task,
    })
}
