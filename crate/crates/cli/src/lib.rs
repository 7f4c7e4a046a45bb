//! Operator commands behind the `ngi` binary.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 I/O or
//! environment failure.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use ngi_core::catalog::{load_catalog, sample_source, scope_report, CatalogError};
use ngi_core::journal::{parse_events, ReplayError};
use ngi_core::report::{render_journal, ReportError};
use ngi_core::session::{PresenterPolicy, SessionConfig};
use ngi_service::store::{FileStore, MemoryStore, Store, StoreError};
use ngi_service::{router, AppState};

#[derive(Debug, Parser)]
#[command(name = "ngi", version, about = "Facilitated group appraisal interviews")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Check a catalog file and list every violation.
    Validate {
        catalog: PathBuf,
        /// Also print story coverage for these maturity levels, e.g. 2,3.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u8>,
    },
    /// Replay a transcript and write the findings and exports.
    Replay {
        transcript: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Render a draft from a transcript that does not end closed.
        #[arg(long)]
        draft: bool,
    },
    /// Print the shipped sample catalog.
    SampleCatalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Rotate,
    Manual,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "NGI_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Session storage directory.
    #[arg(long, env = "NGI_DATA", required_unless_present = "memory")]
    pub data: Option<PathBuf>,
    /// Keep sessions in memory only.
    #[arg(long, conflicts_with = "data")]
    pub memory: bool,
    /// Default advisory clarification time-box.
    #[arg(long, env = "NGI_TIMEBOX_SECONDS")]
    pub timebox_seconds: Option<u32>,
    /// Default presenter policy for new sessions.
    #[arg(long, env = "NGI_PRESENTER_POLICY", value_enum)]
    pub presenter_policy: Option<PolicyArg>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Catalog(#[from] CatalogError),
    #[error("replay failed: {0}")]
    Replay(ReplayError),
    #[error("{0}")]
    Report(ReportError),
    #[error("{0}")]
    Storage(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Listen { addr: SocketAddr, source: io::Error },
    #[error("server failed: {0}")]
    Serve(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Catalog(_) | CliError::Replay(_) | CliError::Report(_) => 1,
            CliError::Storage(StoreError::Corrupt { .. } | StoreError::Roster { .. }) => 1,
            _ => 2,
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Replay(r) => CliError::Replay(r),
            other => CliError::Report(other),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Validates a catalog; returns the report printed on success.
pub fn validate(path: &Path, levels: &[u8]) -> Result<String, CliError> {
    let catalog = load_catalog(&read(path)?)?;
    let mut out = format!(
        "ok: {} {}, {} process areas, {} stories\n",
        catalog.title,
        catalog.version,
        catalog.process_areas.len(),
        catalog.story_count()
    );
    if !levels.is_empty() {
        let requested: BTreeSet<u8> = levels.iter().copied().collect();
        let report = scope_report(&catalog, &requested);
        out.push_str(&ngi_core::report::to_json(&report));
    }
    Ok(out)
}

/// Replays a transcript into `out`; returns the files written.
pub fn replay(transcript: &Path, out: &Path, draft: bool) -> Result<Vec<PathBuf>, CliError> {
    let events = parse_events(&read(transcript)?).map_err(CliError::Replay)?;
    let rendered = render_journal(&events, draft)?;
    fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, body) in rendered {
        let path = out.join(name);
        fs::write(&path, body).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

fn session_defaults(args: &ServeArgs) -> SessionConfig {
    let mut config = SessionConfig::default();
    if let Some(t) = args.timebox_seconds {
        config.clarification_timebox_seconds = t;
    }
    if let Some(p) = args.presenter_policy {
        config.presenter_policy = match p {
            PolicyArg::Rotate => PresenterPolicy::Rotate,
            PolicyArg::Manual => PresenterPolicy::Manual,
        };
    }
    config
}

pub async fn serve(args: ServeArgs) -> Result<(), CliError> {
    let store: Arc<dyn Store> = match &args.data {
        Some(dir) if !args.memory => Arc::new(FileStore::open(dir)?),
        _ => Arc::new(MemoryStore::default()),
    };
    let state = AppState::open(store, session_defaults(&args))?;
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .map_err(|source| CliError::Listen {
            addr: args.listen,
            source,
        })?;
    tracing::info!(listen = %args.listen, sessions = state.session_count(), "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
        .map_err(CliError::Serve)?;
    // Appends are synced before they are acknowledged; nothing is buffered.
    tracing::info!("stopped");
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

/// Runs one command, printing its normal output to stdout.
pub async fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        CliCommand::Serve(args) => serve(args).await,
        CliCommand::Validate { catalog, levels } => {
            print!("{}", validate(&catalog, &levels)?);
            Ok(())
        }
        CliCommand::Replay {
            transcript,
            out,
            draft,
        } => {
            for path in replay(&transcript, &out, draft)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        CliCommand::SampleCatalog => {
            print!("{}", sample_source());
            Ok(())
        }
    }
}
