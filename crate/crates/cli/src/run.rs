use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use parley_analysis::embed::{Embedder, HashingEmbedder, RemoteEmbedder};
use parley_analysis::labels::{ClusterLabeler, RemoteLabeler};
use parley_analysis::report::{analyze, write_bundle, AnalyzeConfig};
use parley_core::tables::{read_messages, read_participants};
use parley_core::{EndReason, Status};
use parley_service::events::{read_log, write_log, FileLog, LogHeader};
use parley_service::export::{export, write_tables, MESSAGES_FILE, PARTICIPANTS_FILE};
use parley_service::hub::{Hub, HubConfig};
use parley_service::sim::{simulate, SimOutcome, SimStats};

use crate::config::{resolve_under, Args, Mode, ProviderKind, RunConfig, KEY_ENV};
use crate::error::CliError;
use crate::plot;

pub const EVENTS_FILE: &str = "events.ndjson";
pub const SIM_SUMMARY_FILE: &str = "sim_summary.json";

/// Printed as one JSON line on stdout when a mode succeeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub seed: u64,
    pub stats: SimStats,
    /// Conversations by final dose 0..=4.
    pub dose_distribution: [usize; 5],
    pub completed_full_length: usize,
    pub completed_fraction: f64,
    pub mean_messages_per_conversation: f64,
}

impl SimSummary {
    pub fn of(seed: u64, outcome: &SimOutcome) -> Self {
        let mut dose_distribution = [0usize; 5];
        let mut complete = 0;
        let mut messages = 0;
        for state in outcome.live.values() {
            dose_distribution[usize::from(state.dose()).min(4)] += 1;
            complete += usize::from(state.status == Status::Ended(EndReason::Complete));
            messages += state.messages.len();
        }
        let n = outcome.live.len().max(1) as f64;
        Self {
            seed,
            stats: outcome.stats.clone(),
            dose_distribution,
            completed_full_length: complete,
            completed_fraction: complete as f64 / n,
            mean_messages_per_conversation: messages as f64 / n,
        }
    }
}

pub fn run(args: &Args) -> Result<Summary, CliError> {
    let config = RunConfig::resolve(args)?;
    match args.mode {
        Mode::Simulate => run_simulate(&config),
        Mode::Export => run_export(&config),
        Mode::Analyze => run_analyze(&config, args.seed, !args.no_plots),
        Mode::Serve => run_serve(&config),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn hub_config(config: &RunConfig) -> Result<HubConfig, CliError> {
    let (pre, post) = config.instruments()?;
    Ok(HubConfig {
        seed: config.seed,
        pre_survey: Some(pre),
        post_survey: Some(post),
        ..config.sim.hub.clone()
    })
}

pub fn run_simulate(config: &RunConfig) -> Result<Summary, CliError> {
    let out = config.out_dir();
    create_dir(&out)?;
    let mut sim = config.sim.clone();
    sim.hub = hub_config(config)?;
    let outcome = simulate(config.seed, sim, config.engine()?)?;
    let log = out.join(EVENTS_FILE);
    write_log(&log, &outcome.header, &outcome.records).map_err(|e| CliError::output(&log, e))?;
    let summary = SimSummary::of(config.seed, &outcome);
    let path = out.join(SIM_SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::output(&path, e))?;
    tracing::info!(
        conversations = summary.stats.conversations,
        complete = summary.completed_full_length,
        "simulation written"
    );
    Ok(Summary {
        mode: Mode::Simulate,
        seed: config.seed,
        artifacts: vec![log, path],
        simulation: Some(summary),
    })
}

pub fn run_export(config: &RunConfig) -> Result<Summary, CliError> {
    let out = config.out_dir();
    let log = resolve_under(&out, config.paths.input.as_deref(), EVENTS_FILE);
    let (header, records) = read_log(&log).map_err(|source| CliError::Log {
        path: log.display().to_string(),
        source,
    })?;
    let (pre, post) = config.instruments()?;
    let tables = export(&records, &pre, &post)?;
    create_dir(&out)?;
    write_tables(&out, header.seed, &tables)?;
    Ok(Summary {
        mode: Mode::Export,
        seed: header.seed,
        artifacts: vec![out.join(MESSAGES_FILE), out.join(PARTICIPANTS_FILE)],
        simulation: None,
    })
}

fn open_table(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Table {
        path: path.display().to_string(),
        source: e.into(),
    })
}

/// The analysis seed is the `--seed` flag if given, else the seed recorded
/// in the message table, else the config seed.
pub fn run_analyze(config: &RunConfig, seed_flag: Option<u64>, plots: bool) -> Result<Summary, CliError> {
    let out = config.out_dir();
    let dir = config.paths.input.clone().unwrap_or_else(|| out.clone());
    let table_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Table { path, source }
    };
    let mpath = dir.join(MESSAGES_FILE);
    let (table_seed, messages) = read_messages(open_table(&mpath)?).map_err(table_err(&mpath))?;
    let ppath = dir.join(PARTICIPANTS_FILE);
    let (_, participants) = read_participants(open_table(&ppath)?).map_err(table_err(&ppath))?;
    let seed = seed_flag.or(table_seed).unwrap_or(config.seed);

    let key = std::env::var(KEY_ENV).ok();
    let remote = config.provider == ProviderKind::Remote;
    let hashing = HashingEmbedder::default();
    let remote_embedder = config
        .remote
        .embed_endpoint
        .as_ref()
        .filter(|_| remote)
        .map(|url| RemoteEmbedder::new(url.clone(), key.clone(), config.analysis_timeout()));
    let labeler = config
        .remote
        .label_endpoint
        .as_ref()
        .filter(|_| remote)
        .map(|url| RemoteLabeler::new(url.clone(), key.clone(), config.analysis_timeout()));
    let embedder: &dyn Embedder = match &remote_embedder {
        Some(r) => r,
        None => &hashing,
    };
    let bundle = analyze(
        &messages,
        &participants,
        &AnalyzeConfig {
            seed,
            k: config.k,
            embedder,
            fallback: remote_embedder.as_ref().map(|_| HashingEmbedder::default()),
            labeler: labeler.as_ref().map(|l| l as &dyn ClusterLabeler),
        },
    )?;
    let mut artifacts = write_bundle(&out, &bundle)?;
    if plots {
        artifacts.extend(plot::render_all(&out, &bundle)?);
    }
    Ok(Summary {
        mode: Mode::Analyze,
        seed,
        artifacts,
        simulation: None,
    })
}

pub fn run_serve(config: &RunConfig) -> Result<Summary, CliError> {
    let out = config.out_dir();
    create_dir(&out)?;
    let log_path = out.join(EVENTS_FILE);
    let sink = FileLog::create(&log_path, &LogHeader::new(config.seed)).map_err(|e| CliError::output(&log_path, e))?;
    let hub = Hub::new(hub_config(config)?, Box::new(sink));
    let engine = config.engine()?;
    let serve = config.serve.clone();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Serve(e.to_string()))?;
    runtime.block_on(async move {
        let handle = parley_service::server::spawn_hub(hub, engine);
        let tcp = tokio::net::TcpListener::bind(&serve.tcp)
            .await
            .map_err(|e| CliError::Serve(format!("bind {}: {e}", serve.tcp)))?;
        tracing::info!(addr = %serve.tcp, "tcp listening");
        tokio::spawn(parley_service::server::serve_tcp(tcp, handle.clone()));
        if let Some(addr) = &serve.ws {
            let ws = tokio::net::TcpListener::bind(addr)
                .await
                .map_err(|e| CliError::Serve(format!("bind {addr}: {e}")))?;
            tracing::info!(addr = %addr, "websocket listening on /ws");
            let app = parley_service::server::ws_router(handle.clone());
            tokio::spawn(async move { axum::serve(ws, app).await });
        }
        tokio::signal::ctrl_c().await.map_err(|e| CliError::Serve(e.to_string()))?;
        tracing::info!("shutting down");
        handle.shutdown().await;
        Ok::<_, CliError>(())
    })?;
    Ok(Summary {
        mode: Mode::Serve,
        seed: config.seed,
        artifacts: vec![log_path],
        simulation: None,
    })
}
