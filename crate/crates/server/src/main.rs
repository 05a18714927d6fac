use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use easel_core::mock::{FixtureRegistry, MockBackends};
use easel_core::script::{self, Golden, Scenario, StepStatus};
use easel_core::workflow::SystemClock;
use easel_core::{Backends, Capability, Engine, EngineConfig};
use easel_server::config::ServiceConfig;
use easel_server::gateway::HttpBackends;
use easel_server::service::{self, AppState};
use easel_server::store::{Archive, Store};
use easel_server::mockserver;

#[derive(Parser)]
#[command(name = "easel", version, about = "Multi-turn image editing session service")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use in-process mock backends.
        #[arg(long)]
        mock: bool,
        /// Scene fixtures for the mocks.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Replay a scenario script and report each step.
    Replay {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        mock: bool,
        /// Service config naming the backends, when not using --mock.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "fixtures/scenes")]
        fixtures: PathBuf,
        /// Compare against this golden file.
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Write the golden file instead of comparing.
        #[arg(long, requires = "golden")]
        update_golden: bool,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a session archive.
    ExportSession {
        id: String,
        #[arg(long, env = "EASEL_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Store a session archive under a new id and print the id.
    ImportSession {
        archive: PathBuf,
        #[arg(long, env = "EASEL_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
    /// Serve mock capability endpoints.
    Mock {
        /// chat, segment, generate, inpaint, fill, or all. Repeatable.
        #[arg(long, default_value = "all")]
        capability: Vec<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "EASEL_PORT", default_value_t = 9000)]
        port: u16,
        #[arg(long, default_value = "fixtures/scenes")]
        fixtures: PathBuf,
    },
}

fn load_registry(dir: &Path) -> anyhow::Result<Arc<FixtureRegistry>> {
    Ok(Arc::new(
        FixtureRegistry::load_dir(dir).with_context(|| format!("loading fixtures from {}", dir.display()))?,
    ))
}

fn parse_capabilities(names: &[String]) -> anyhow::Result<Vec<Capability>> {
    let mut out = Vec::new();
    for n in names.iter().flat_map(|n| n.split(',')) {
        match n.trim() {
            "all" => out.extend_from_slice(&Capability::ALL),
            other => out.push(Capability::parse(other).with_context(|| format!("unknown capability {other:?}"))?),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

async fn serve(config: Option<PathBuf>, mock: bool, fixtures: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let mut cfg = match config {
        Some(p) => ServiceConfig::load(&p).with_context(|| format!("reading {}", p.display()))?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env();
    cfg.mock_mode |= mock;
    if fixtures.is_some() {
        cfg.fixtures_dir = fixtures;
    }
    if cfg.mock_mode && cfg.fixtures_dir.is_none() && Path::new("fixtures/scenes").is_dir() {
        cfg.fixtures_dir = Some("fixtures/scenes".into());
    }
    let state = AppState::from_config(cfg)?;
    service::serve(state).await?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn replay(
    script_path: &Path,
    mock: bool,
    config: Option<PathBuf>,
    fixtures: &Path,
    golden: Option<PathBuf>,
    update_golden: bool,
    report_path: Option<PathBuf>,
) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(script_path).with_context(|| format!("reading {}", script_path.display()))?;
    let scenario = Scenario::from_json(&text).with_context(|| format!("parsing {}", script_path.display()))?;
    let registry = load_registry(fixtures)?;
    let mut engine_config = EngineConfig::default();
    let backends: Arc<dyn Backends> = if mock {
        Arc::new(MockBackends::new(registry.clone()))
    } else {
        let Some(p) = config else {
            bail!("replay needs --mock or --config naming the backends");
        };
        let mut cfg = ServiceConfig::load(&p).with_context(|| format!("reading {}", p.display()))?;
        cfg.apply_env();
        engine_config.output_size = cfg.output_size;
        Arc::new(HttpBackends::new(cfg.backends).map_err(anyhow::Error::msg)?)
    };
    let engine = Engine::new(backends, Arc::new(SystemClock), engine_config);
    let report = script::replay(&scenario, Some(registry.as_ref()), &engine);

    for s in &report.steps {
        let status = match s.status {
            StepStatus::Ok => "ok",
            StepStatus::ExpectedError => "expected-error",
            StepStatus::Failed => "FAILED",
            StepStatus::Skipped => "skipped",
        };
        let hash = s.canvas_hash_after.map(|h| h.to_string()).unwrap_or_else(|| "-".into());
        print!("{:>3} {:<20} {:<15} {hash} {:>6}ms", s.step, s.op, status, s.duration_ms);
        if let Some(e) = &s.error {
            print!("  {}: {e}", s.error_code.as_deref().unwrap_or("error"));
        }
        println!();
    }
    let final_hash = report.final_canvas_hash.map(|h| h.to_string()).unwrap_or_else(|| "-".into());
    println!("scenario {}: final canvas {final_hash}", report.scenario);

    if let Some(p) = report_path {
        std::fs::write(&p, serde_json::to_vec_pretty(&report)?)?;
    }
    let mut ok = report.passed();
    if let Some(g) = golden {
        if update_golden {
            std::fs::write(&g, serde_json::to_string_pretty(&report.golden())? + "\n")?;
            println!("golden written to {}", g.display());
        } else {
            let golden: Golden = serde_json::from_str(&std::fs::read_to_string(&g)?)
                .with_context(|| format!("parsing {}", g.display()))?;
            let diffs = golden.diff(&report);
            if diffs.is_empty() {
                println!("golden {}: match", g.display());
            } else {
                ok = false;
                for d in diffs {
                    println!("golden mismatch: {d}");
                }
            }
        }
    }
    if let Some(f) = report.first_failure() {
        eprintln!("failed at step {}: {}", f.step, f.error.as_deref().unwrap_or("unknown error"));
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn export_session(id: &str, data_dir: PathBuf, out: Option<PathBuf>) -> anyhow::Result<ExitCode> {
    let store = Store::open(data_dir)?;
    let archive = store.export(id)?;
    let json = serde_json::to_vec(&archive)?;
    match out {
        Some(p) => std::fs::write(p, json)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&json)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn import_session(archive: &Path, data_dir: PathBuf) -> anyhow::Result<ExitCode> {
    let store = Store::open(data_dir)?;
    let archive: Archive = serde_json::from_slice(&std::fs::read(archive)?)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    store.import(archive, &id)?;
    println!("{id}");
    Ok(ExitCode::SUCCESS)
}

async fn mock(capability: Vec<String>, host: String, port: u16, fixtures: PathBuf) -> anyhow::Result<ExitCode> {
    let caps = parse_capabilities(&capability)?;
    let registry = load_registry(&fixtures)?;
    let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
    tracing::info!(addr = %listener.local_addr()?, ?caps, scenes = registry.len(), "mock backends listening");
    mockserver::serve(listener, registry, caps).await?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Replay {
            script,
            mock,
            config,
            fixtures,
            golden,
            update_golden,
            report,
        } => replay(&script, mock, config, &fixtures, golden, update_golden, report),
        Cmd::ExportSession { id, data_dir, out } => export_session(&id, data_dir, out),
        Cmd::ImportSession { archive, data_dir } => import_session(&archive, data_dir),
        Cmd::Serve { config, mock, fixtures } => runtime().block_on(serve(config, mock, fixtures)),
        Cmd::Mock {
            capability,
            host,
            port,
            fixtures,
        } => runtime().block_on(mock(capability, host, port, fixtures)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime starts")
}
