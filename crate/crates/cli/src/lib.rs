//! Operator tooling for a review board.

pub mod config;
pub mod harvest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::RngCore;

use reviewboard_core::alerts;
use reviewboard_core::ingest::{verify_log_dir, FileLog, Principal, Role, Store, SystemClock, SYSTEM_ACTOR};
use reviewboard_core::query::parse_query;
use reviewboard_core::record_format::emit_redif_public;
use reviewboard_service::{AppState, HttpProbe, ServiceConfig};

use config::{BoardConfig, DataLock};
use harvest::ForeignFile;

#[derive(Debug, Parser)]
#[command(name = "reviewboard", version, about = "Run and maintain an electronic review board")]
pub struct Cli {
    /// Board configuration file.
    #[arg(long, global = true, default_value = "reviewboard.toml")]
    pub config: PathBuf,
    /// Act as the principal holding this token instead of the local operator.
    #[arg(long, global = true, env = "REVIEWBOARD_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a config file, an empty event log and the admin principal.
    Init {
        #[arg(long)]
        title: String,
        #[arg(long)]
        url: String,
        #[arg(long)]
        email: String,
        #[arg(long, default_value = "data")]
        data_dir: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Manage accredited reviewers, editors and admins.
    Principal {
        #[command(subcommand)]
        action: PrincipalCommand,
    },
    /// Serve the HTTP API and public pages.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Match new releases against saved searches and send notifications.
    Sweep,
    /// Write every released record as ReDIF.
    Export {
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the event log's hash chain.
    VerifyAudit,
    /// Fetch another board's public records into a foreign-records file.
    Harvest {
        board_url: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search released records, optionally including harvested ones.
    Search {
        query: String,
        #[arg(long, default_value_t = 50)]
        limit: usize,
        /// Foreign-records file written by `harvest`; may be repeated.
        #[arg(long = "include-foreign")]
        include_foreign: Vec<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PrincipalCommand {
    Add {
        id: String,
        #[arg(long, value_parser = clap::value_parser!(Role))]
        role: Role,
        /// Use this secret instead of generating one.
        #[arg(long = "secret")]
        secret: Option<String>,
    },
    Revoke {
        id: String,
    },
}

fn new_token() -> String {
    let mut bytes = [0u8; 24];
    rand::thread_rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

/// Config, data-directory lock and the replayed store.
struct Opened {
    config: BoardConfig,
    store: Store,
    _lock: DataLock,
}

fn open(config_path: &Path) -> Result<Opened> {
    let config = BoardConfig::load(config_path)?;
    let lock = DataLock::acquire(&config.data_dir)?;
    let (log, events) = FileLog::open(&config.data_dir)
        .with_context(|| format!("opening event log in {}", config.data_dir.display()))?;
    let store = Store::open(config.board.clone(), events, Box::new(log), Box::new(SystemClock))?;
    Ok(Opened {
        config,
        store,
        _lock: lock,
    })
}

/// The acting principal: the token's holder, or None for the local operator.
fn acting(store: &Store, token: Option<&str>, required: Role) -> Result<Option<Principal>> {
    let Some(token) = token else { return Ok(None) };
    let principal = store.authenticate(token)?;
    if principal.role != required {
        bail!("{} is not {required}", principal.principal_id);
    }
    Ok(Some(principal))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<ExitCode> {
    let token = cli.token.as_deref();
    match cli.command {
        Command::Init {
            title,
            url,
            email,
            data_dir,
            port,
        } => {
            if cli.config.exists() {
                bail!("{} already exists", cli.config.display());
            }
            if let Some(dir) = cli.config.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let text = config::initial_config(&title, &url, &email, &data_dir, port);
            let parsed: BoardConfig = toml::from_str(&text)?;
            parsed.board.validate()?;
            let resolved = cli.config.parent().unwrap_or(Path::new(".")).join(&data_dir);
            if resolved.join(reviewboard_core::ingest::LOG_FILE).exists() {
                bail!("{} already holds an event log", resolved.display());
            }
            std::fs::write(&cli.config, text).with_context(|| format!("writing {}", cli.config.display()))?;
            let mut opened = open(&cli.config)?;
            let secret = new_token();
            opened.store.add_principal(None, "admin", Role::Admin, &secret)?;
            writeln!(out, "created {} and {}", cli.config.display(), opened.config.data_dir.display())?;
            writeln!(out, "admin token (shown once): {secret}")?;
        }
        Command::Principal { action } => {
            let mut opened = open(&cli.config)?;
            let admin = acting(&opened.store, token, Role::Admin)?;
            match action {
                PrincipalCommand::Add { id, role, secret } => {
                    let secret = secret.unwrap_or_else(new_token);
                    let p = opened.store.add_principal(admin.as_ref(), &id, role, &secret)?;
                    writeln!(out, "added {} ({})", p.principal_id, p.role)?;
                    writeln!(out, "token (shown once): {secret}")?;
                }
                PrincipalCommand::Revoke { id } => {
                    let p = opened.store.revoke_principal(admin.as_ref(), &id)?;
                    writeln!(out, "revoked {}", p.principal_id)?;
                }
            }
        }
        Command::Serve { port } => {
            let opened = open(&cli.config)?;
            let port = port.unwrap_or(opened.config.port);
            let probe = HttpProbe::new(Duration::from_secs(10))?;
            let sink = opened.config.sink();
            let service_config = ServiceConfig {
                help_dir: opened.config.help_dir.clone(),
                roster: opened.config.roster.clone(),
            };
            let addr = format!("{}:{port}", opened.config.bind);
            let state = AppState::new(opened.store, Arc::new(probe), sink, service_config);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                writeln!(out, "serving {} on http://{}", opened.config.board.title, listener.local_addr()?)?;
                out.flush()?;
                let shutdown = async {
                    let _ = tokio::signal::ctrl_c().await;
                };
                reviewboard_service::serve(listener, state, shutdown).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Sweep => {
            let mut opened = open(&cli.config)?;
            let actor = acting(&opened.store, token, Role::Admin)?
                .map(|p| p.principal_id)
                .unwrap_or_else(|| SYSTEM_ACTOR.to_string());
            let mut sink = opened.config.sink();
            let report = alerts::sweep(&mut opened.store, sink.as_mut(), &actor)?;
            writeln!(
                out,
                "sweep {}: {} subscriptions, {} notifications, {} failed",
                report.sweep_seq,
                report.subscriptions,
                report.notifications.len(),
                report.failed.len()
            )?;
            for id in &report.failed {
                writeln!(out, "delivery failed for {id}; will retry next sweep")?;
            }
        }
        Command::Export { out: path } => {
            let opened = open(&cli.config)?;
            let doc = emit_redif_public(opened.store.state().public_records(), opened.store.board());
            std::fs::write(&path, doc.body.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
            writeln!(
                out,
                "exported {} records to {}",
                opened.store.state().public_records().count(),
                path.display()
            )?;
        }
        Command::VerifyAudit => {
            let config = BoardConfig::load(&cli.config)?;
            let _lock = DataLock::acquire(&config.data_dir)?;
            let report = verify_log_dir(&config.data_dir)?;
            writeln!(out, "{report}")?;
            if !report.is_intact() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Harvest { board_url, out: path } => {
            let client = reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .user_agent(concat!("reviewboard/", env!("CARGO_PKG_VERSION")))
                .build()?;
            let file = harvest::harvest(&client, &board_url)?;
            let json = serde_json::to_string_pretty(&file)?;
            std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
            writeln!(
                out,
                "harvested {} records from {} into {}",
                file.records.len(),
                file.board_url,
                path.display()
            )?;
            for f in &file.failures {
                writeln!(out, "failed {}: {}", f.url, f.error)?;
            }
        }
        Command::Search {
            query,
            limit,
            include_foreign,
        } => {
            let ast = parse_query(&query)?;
            let opened = open(&cli.config)?;
            let mut index = reviewboard_core::query::SearchIndex::new();
            for record in opened.store.state().public_records() {
                index.insert(record.clone());
            }
            let page = index.search(&ast, limit, 0);
            for w in &page.warnings {
                writeln!(out, "warning: {w}")?;
            }
            for r in &page.results {
                writeln!(out, "{}\t{}\t{}", r.record_id, r.record.paper.title, r.record.paper.canonical_url)?;
            }
            for path in &include_foreign {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let file: ForeignFile =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let (foreign, problems) = harvest::foreign_index(&file);
                for p in problems {
                    writeln!(out, "warning: skipped {p}")?;
                }
                for r in foreign.search(&ast, limit, 0).results {
                    writeln!(
                        out,
                        "{}\t{}\t{}\t[{}]",
                        r.record_id, r.record.paper.title, r.record.paper.canonical_url, file.board_url
                    )?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
