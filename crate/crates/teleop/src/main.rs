use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use navtune_teleop::{start, EnvSource, LoadedEnv, Outputs, ServerConfig, Teleop, TeleopConfig, DEFAULT_PORT};

/// Serve a live intervention session over WebSocket at /ws.
#[derive(Parser)]
#[command(name = "navtune-teleop", version)]
struct Args {
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Grid file to load; a generated world is used when absent.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Seed of the simulator and of the generated world.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.35)]
    fill: f64,
    /// Simulated seconds per wall-clock second; 0 runs unpaced.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Intervention log that saved records are appended to.
    #[arg(long, default_value = "interventions.log")]
    records: PathBuf,
    /// Command log for headless replay.
    #[arg(long, default_value = "commands.jsonl")]
    commands: PathBuf,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let existing = match args.records.exists() {
        true => match navtune::intervention::load_log(&args.records) {
            Ok(r) => r.len() as u32,
            Err(e) => {
                eprintln!("error: {}: {e}", args.records.display());
                return ExitCode::FAILURE;
            }
        },
        false => 0,
    };
    let config = TeleopConfig {
        seed: args.seed,
        first_context: existing + 1,
        ..TeleopConfig::default()
    };
    let source = match &args.env {
        Some(p) => EnvSource::File {
            path: p.display().to_string(),
        },
        None => EnvSource::Generated {
            seed: args.seed,
            fill_prob: args.fill,
        },
    };
    let teleop = LoadedEnv::load(&source, config.sim.dwa.footprint_radius)
        .and_then(|env| Teleop::new(env, config))
        .and_then(|t| {
            t.with_outputs(Outputs {
                records: Some(args.records.clone()),
                commands: Some(args.commands.clone()),
            })
        });
    let teleop = match teleop {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let server = start(
        teleop,
        ServerConfig {
            addr: SocketAddr::new(args.host, args.port),
            speed: args.speed,
            ..ServerConfig::default()
        },
    )
    .await;
    match server {
        Ok(s) => {
            s.wait().await;
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
