//! Operator command line.
//!
//! Exit codes: 0 success, 1 verdict failure (mismatch, missing record or
//! duplicate uid), 2 usage error, 3 runtime error. Machine-readable output
//! goes to stdout, everything meant for people goes to stderr.

use std::collections::HashMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ledgerseal_core::gas::REPORT_SIZES;
use ledgerseal_core::registry::tamper_digest;
use ledgerseal_core::{PricingConfig, SymmetricKey, VerdictStatus, WalletKey};
use serde_json::json;
use tracing::info;

use crate::config::{self, ServiceConfig};
use crate::service::{parse_sizes, Service, ServiceError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERDICT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ledgerseal", version, about = "Seal reviews on an append-only ledger and check their integrity")]
pub struct Cli {
    /// Dotenv-style file read for variables the environment does not set.
    #[arg(long, global = true, value_name = "PATH")]
    pub env_file: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TextSource {
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct OptionalText {
    /// Compare against this text instead of the stored digest.
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Print a fresh Fernet key and wallet key as env lines.
    Keygen,
    /// Seal and store a review.
    Save {
        #[arg(long)]
        uid: String,
        #[command(flatten)]
        source: TextSource,
    },
    /// Fetch and decrypt a stored review.
    Get {
        #[arg(long)]
        uid: String,
    },
    /// Check one review against the ledger.
    Verify {
        #[arg(long)]
        uid: String,
        #[command(flatten)]
        source: OptionalText,
    },
    /// Check every registry record; exits 1 if anything is mismatched or missing.
    VerifyAll {
        #[arg(long, value_name = "PATH")]
        registry: Option<PathBuf>,
    },
    /// Compare storage costs across networks.
    GasReport {
        /// Comma-separated payload sizes in bytes.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long, value_name = "PATH")]
        pricing: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Corrupt the stored digest of one record and show the verdict flip.
    TamperDemo {
        #[arg(long)]
        uid: String,
        /// Confirm the registry file may be modified.
        #[arg(long)]
        yes: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl ToString) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: message.to_string(),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let code = match e {
            ServiceError::DuplicateUid(_) | ServiceError::NotFound(_) => EXIT_VERDICT,
            ServiceError::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::runtime(format!("configuration: {e}"))
    }
}

type CliResult = Result<u8, Failure>;

fn load_config(env_file: Option<&Path>, overrides: &[(&str, String)]) -> Result<ServiceConfig, Failure> {
    let file_vars = match env_file {
        Some(path) => config::load_env_file(path)?,
        None => HashMap::new(),
    };
    let cfg = ServiceConfig::from_lookup(|name| {
        overrides
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v.clone())
            .or_else(|| std::env::var(name).ok())
            .or_else(|| file_vars.get(name).cloned())
    })?;
    Ok(cfg)
}

fn open_service(env_file: Option<&Path>, overrides: &[(&str, String)]) -> Result<Service, Failure> {
    let cfg = load_config(env_file, overrides)?;
    Service::from_config(&cfg).map_err(Failure::runtime)
}

fn read_text(text: Option<String>, file: Option<PathBuf>) -> Result<Option<Vec<u8>>, Failure> {
    match (text, file) {
        (Some(t), _) => Ok(Some(t.into_bytes())),
        (None, Some(path)) => std::fs::read(&path)
            .map(Some)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display()))),
        (None, None) => Ok(None),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(Failure::runtime)?;
    writeln!(out).map_err(Failure::runtime)
}

fn verdict_exit(status: VerdictStatus) -> u8 {
    match status {
        VerdictStatus::Verified => EXIT_OK,
        VerdictStatus::Mismatch | VerdictStatus::NotFound => EXIT_VERDICT,
        VerdictStatus::ChainUnavailable => EXIT_RUNTIME,
    }
}

fn keygen() -> CliResult {
    let key = SymmetricKey::generate().map_err(Failure::runtime)?;
    let wallet = WalletKey::generate().map_err(Failure::runtime)?;
    println!("{}={key}", config::FERNET_KEY);
    println!("{}=0x{}", config::PRIVATE_KEY, wallet.private_hex());
    println!("# wallet address {}", wallet.address());
    eprintln!("keep these values out of version control");
    Ok(EXIT_OK)
}

fn gas_report(sizes: Option<String>, pricing: Option<PathBuf>, format: ReportFormat, output: Option<PathBuf>) -> CliResult {
    let sizes = match sizes {
        Some(raw) => parse_sizes(&raw).map_err(|e| Failure::usage(e.to_string()))?,
        None => REPORT_SIZES.to_vec(),
    };
    let pricing = match pricing {
        Some(path) => PricingConfig::load(&path).map_err(Failure::runtime)?,
        None => PricingConfig::builtin(),
    };
    let report = pricing.compare(&sizes).map_err(|e| Failure::usage(e.to_string()))?;
    let mut body = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    if !body.ends_with('\n') {
        body.push('\n');
    }
    match output {
        Some(path) => std::fs::write(&path, body).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?,
        None => print!("{body}"),
    }
    for s in &report.savings {
        eprintln!(
            "{} bytes: {} is {:.2}% cheaper than {}",
            s.size_bytes, s.cheapest, s.savings_percent, s.most_expensive
        );
    }
    Ok(EXIT_OK)
}

fn tamper_demo(env_file: Option<&Path>, uid: &str, yes: bool) -> CliResult {
    if !yes {
        return Err(Failure::usage("tamper-demo rewrites the registry file; pass --yes to proceed"));
    }
    let cfg = load_config(env_file, &[])?;
    let before = {
        let svc = Service::from_config(&cfg).map_err(Failure::runtime)?;
        let registry = svc.registry().ok_or_else(|| Failure::runtime(ServiceError::Disabled))?;
        if !registry.contains(uid) {
            return Err(Failure::usage(format!("uid {uid:?} is not in {}", cfg.registry_path.display())));
        }
        svc.verify_review(uid, None)?
    };
    tamper_digest(&cfg.registry_path, uid).map_err(Failure::runtime)?;
    let after = Service::from_config(&cfg).map_err(Failure::runtime)?.verify_review(uid, None)?;
    eprintln!("before: {}", before.status.as_str());
    eprintln!("after:  {}", after.status.as_str());
    print_json(&json!({ "uid": uid, "before": before, "after": after }))?;
    Ok(EXIT_OK)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn serve(env_file: Option<&Path>, port: Option<u16>) -> CliResult {
    let cfg = load_config(env_file, &[])?;
    let service = Arc::new(Service::from_config(&cfg).map_err(Failure::runtime)?);
    let addr = SocketAddr::new(cfg.bind, port.unwrap_or(cfg.listen_port));
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure::runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(Failure::runtime)?;
        info!(%local, enabled = service.is_enabled(), backend = service.mode().as_str(), "listening");
        eprintln!("ledgerseal listening on http://{local}");
        axum::serve(listener, crate::api::router(service))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(Failure::runtime)?;
        eprintln!("ledgerseal stopped");
        Ok(EXIT_OK)
    })
}

fn dispatch(cli: Cli) -> CliResult {
    let env_file = cli.env_file.as_deref();
    match cli.command {
        Command::Serve { port } => serve(env_file, port),
        Command::Keygen => keygen(),
        Command::Save { uid, source } => {
            let text = read_text(source.text, source.file)?.unwrap_or_default();
            let out = open_service(env_file, &[])?.save_review(&uid, &text)?;
            eprintln!("saved {uid} at entry {} in {}", out.entry_index, out.tx_hash);
            print_json(&out)?;
            Ok(EXIT_OK)
        }
        Command::Get { uid } => {
            let review = open_service(env_file, &[])?.get_review(&uid)?;
            print_json(&review)?;
            Ok(EXIT_OK)
        }
        Command::Verify { uid, source } => {
            let text = read_text(source.text, source.file)?;
            let verdict = open_service(env_file, &[])?.verify_review(&uid, text.as_deref())?;
            eprintln!("{uid}: {}", verdict.status.as_str());
            print_json(&verdict)?;
            Ok(verdict_exit(verdict.status))
        }
        Command::VerifyAll { registry } => {
            let overrides: Vec<(&str, String)> = registry
                .map(|p| (config::REGISTRY_PATH, p.display().to_string()))
                .into_iter()
                .collect();
            let summary = open_service(env_file, &overrides)?.verify_all()?;
            eprintln!(
                "{} records: {} verified, {} mismatched, {} not found, {} unavailable",
                summary.total, summary.verified, summary.mismatched, summary.not_found, summary.unavailable
            );
            if summary.unavailable > 0 {
                eprintln!("warning: {} records could not be checked against the chain", summary.unavailable);
            }
            print_json(&summary)?;
            Ok(if summary.is_clean() { EXIT_OK } else { EXIT_VERDICT })
        }
        Command::GasReport {
            sizes,
            pricing,
            format,
            output,
        } => gas_report(sizes, pricing, format, output),
        Command::TamperDemo { uid, yes } => tamper_demo(env_file, &uid, yes),
    }
}

fn init_tracing(serving: bool) {
    let default = if serving { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    init_tracing(matches!(cli.command, Command::Serve { .. }));
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
