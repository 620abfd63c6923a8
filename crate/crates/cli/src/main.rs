mod chat;
mod demo;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use openpda_core::bus::{Broker, BrokerConfig};
use openpda_core::dialog::EngineConfig;
use openpda_core::home::{self, HomeAgentConfig};
use openpda_core::service::{self, ServiceConfig};
use openpda_core::sim::{self, SimConfig};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "openpda", version, about = "Natural-language assistant with a simulated smart home")]
struct Cli {
    /// Log filter, e.g. `info` or `openpda_core=debug`.
    #[arg(long, env = "OPENPDA_LOG", default_value = "info", global = true)]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the assistant HTTP service.
    Serve(ServeArgs),
    /// Run the message broker.
    Broker(BrokerArgs),
    /// Run the smart home agent.
    HomeAgent(HomeAgentArgs),
    /// Run the simulated sensor/relay device.
    DeviceSim(DeviceSimArgs),
    /// Talk to a local engine on the terminal.
    Chat(ChatArgs),
    /// Start everything in-process and replay the reference dialogs.
    Demo,
}

#[derive(Args, Clone)]
pub struct EngineArgs {
    /// Directory of app descriptors; the bundled Home and Calendar apps when omitted.
    #[arg(long, env = "OPENPDA_APPS_DIR")]
    apps_dir: Option<PathBuf>,
    /// Word vectors in text format; the bundled toy vectors when omitted.
    #[arg(long, env = "OPENPDA_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    /// A sample matches when its distance to the request is below this.
    #[arg(long, env = "OPENPDA_THRESHOLD", default_value_t = 1.0, allow_hyphen_values = true)]
    threshold: f64,
    /// Keep stopwords when comparing requests with samples.
    #[arg(long, env = "OPENPDA_KEEP_STOPWORDS")]
    keep_stopwords: bool,
    #[arg(long, env = "OPENPDA_MAX_REASKS", default_value_t = 2)]
    max_reasks: u32,
}

impl EngineArgs {
    fn engine_config(&self) -> Result<EngineConfig> {
        let config = EngineConfig {
            threshold: self.threshold,
            max_reasks: self.max_reasks,
            drop_stopwords: !self.keep_stopwords,
            ..EngineConfig::default()
        };
        config.validate()?;
        Ok(config)
    }

    fn check_paths(&self) -> Result<()> {
        if let Some(path) = &self.embeddings {
            if !path.is_file() {
                bail!("embeddings file {} does not exist", path.display());
            }
        }
        if let Some(dir) = &self.apps_dir {
            if !dir.is_dir() {
                bail!("apps directory {} does not exist", dir.display());
            }
        }
        Ok(())
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "OPENPDA_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[command(flatten)]
    engine: EngineArgs,
    /// Broker to mirror readings and commands from, for the event stream.
    #[arg(long, env = "OPENPDA_BUS")]
    bus: Option<SocketAddr>,
    /// Home agent base URL for the console proxy.
    #[arg(long, env = "OPENPDA_AGENT_URL")]
    agent_url: Option<String>,
    /// Append the conversation log to this JSON-lines file.
    #[arg(long, env = "OPENPDA_TRANSCRIPT")]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct BrokerArgs {
    #[arg(long, env = "OPENPDA_BUS_BIND", default_value = "127.0.0.1:1883")]
    bind: SocketAddr,
    #[arg(long, env = "OPENPDA_RETRY_MS", default_value_t = 1000)]
    retry_ms: u64,
    /// Fraction of publish/ack frames to drop, for fault testing.
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    #[arg(long, default_value_t = 0)]
    fault_seed: u64,
}

#[derive(Args)]
struct HomeAgentArgs {
    #[arg(long, env = "OPENPDA_AGENT_LISTEN", default_value = "127.0.0.1:7878")]
    listen: SocketAddr,
    #[arg(long, env = "OPENPDA_BUS", default_value = "127.0.0.1:1883")]
    bus: SocketAddr,
    #[arg(long, env = "OPENPDA_JOURNAL", default_value = "readings.jsonl")]
    journal: PathBuf,
    /// Device and synonym table; the built-in table when omitted.
    #[arg(long, env = "OPENPDA_DEVICES")]
    devices: Option<PathBuf>,
}

#[derive(Args)]
struct DeviceSimArgs {
    #[arg(long, env = "OPENPDA_BUS", default_value = "127.0.0.1:1883")]
    bus: SocketAddr,
    #[arg(long, env = "OPENPDA_INTERVAL_MS", default_value_t = 2000)]
    interval_ms: u64,
    #[arg(long, env = "OPENPDA_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, env = "OPENPDA_DEVICE_ID", default_value = "esp-1")]
    device: String,
}

#[derive(Args)]
pub struct ChatArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Print commands instead of sending them to the apps.
    #[arg(long)]
    dry_run: bool,
}

fn init_logging(filter: &str) -> Result<()> {
    let filter = EnvFilter::try_new(filter).context("invalid log filter")?;
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init()
        .map_err(|e| anyhow::anyhow!(e))
}

async fn until_ctrl_c() {
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve(args) => {
            let engine = args.engine.engine_config()?;
            args.engine.check_paths()?;
            let config = ServiceConfig {
                listen: args.listen,
                apps_dir: args.engine.apps_dir,
                embeddings: args.engine.embeddings,
                engine,
                bus: args.bus,
                agent_url: args.agent_url,
                transcript: args.transcript,
                ..ServiceConfig::default()
            };
            let mut handle = service::serve(config).await?;
            println!("assistant service listening on {}", handle.url());
            tokio::select! {
                _ = until_ctrl_c() => handle.shutdown().await,
                _ = handle.wait() => bail!("service stopped unexpectedly"),
            }
        }
        Command::Broker(args) => {
            if !(0.0..=1.0).contains(&args.drop_rate) {
                bail!("--drop-rate must be within [0, 1]");
            }
            let mut broker = Broker::start(BrokerConfig {
                bind: args.bind,
                retry_interval: Duration::from_millis(args.retry_ms.max(1)),
                drop_rate: args.drop_rate,
                fault_seed: args.fault_seed,
            })
            .await?;
            println!("broker listening on {}", broker.local_addr());
            tokio::select! {
                _ = until_ctrl_c() => broker.shutdown().await,
                _ = broker.wait() => bail!("broker stopped unexpectedly"),
            }
        }
        Command::HomeAgent(args) => {
            let mut handle = home::serve(HomeAgentConfig {
                http_bind: args.listen,
                bus: Some(args.bus),
                journal: Some(args.journal),
                devices: args.devices,
                ..HomeAgentConfig::default()
            })
            .await?;
            println!("home agent listening on {}", handle.url());
            tokio::select! {
                _ = until_ctrl_c() => handle.shutdown().await,
                _ = handle.wait() => bail!("home agent stopped unexpectedly"),
            }
        }
        Command::DeviceSim(args) => {
            let config = SimConfig {
                device_id: args.device,
                publish_interval: Duration::from_millis(args.interval_ms),
                rng_seed: args.seed,
                ..SimConfig::default()
            };
            let mut handle = sim::spawn(config, args.bus)?;
            println!("device simulator publishing to {}", args.bus);
            tokio::select! {
                _ = until_ctrl_c() => handle.shutdown().await,
                _ = handle.wait() => bail!("device simulator stopped unexpectedly"),
            }
        }
        Command::Chat(args) => chat::run(args).await?,
        Command::Demo => return demo::run().await,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging(&cli.log) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
