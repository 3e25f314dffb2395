use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pacmap::server::{self, AppState, ServerOptions};
use pacmap_core::game_space::{build_game_space, GameSpace, GameSpaceConfig};
use pacmap_core::osm::{parse_extract, OsmExtract, OsmFormat};
use pacmap_core::session::{write_event_log, SessionConfig};
use pacmap_core::sim::{self, Trace};
use pacmap_core::{GeoPoint, Meters};

#[derive(Parser)]
#[command(name = "pacmap", version, about = "PacMan chase game on real streets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the game server.
    Serve {
        #[arg(long)]
        osm_file: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Game seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Build a stage and print it as JSON.
    Stage {
        #[arg(long)]
        osm_file: PathBuf,
        /// "lat,lon"
        #[arg(long, value_parser = parse_center)]
        center: GeoPoint,
        #[arg(long, default_value_t = 200.0)]
        radius: f64,
        #[arg(long, default_value_t = 15.0)]
        cookie_spacing: f64,
    },
    /// Replay a trace headlessly and print the event log as JSON lines.
    Replay {
        #[arg(long)]
        stage: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Session settings as JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Keep ticking until this game time instead of the last fix.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Time shortest-path queries on a synthetic grid.
    Bench {
        #[arg(long, default_value_t = 420)]
        nodes: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 50.0)]
        edge_length: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn parse_center(s: &str) -> Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected lat,lon")?;
    let lat: f64 = lat.trim().parse().map_err(|e| format!("latitude: {e}"))?;
    let lon: f64 = lon.trim().parse().map_err(|e| format!("longitude: {e}"))?;
    GeoPoint::new(lat, lon).map_err(|e| e.to_string())
}

fn load_extract(path: &Path) -> Result<OsmExtract> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_extract(&raw, OsmFormat::from_path(path)).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Serve {
            osm_file,
            port,
            host,
            speed,
        } => {
            if !(speed.is_finite() && speed > 0.0) {
                bail!("--speed must be positive");
            }
            let extract = load_extract(&osm_file)?;
            let state = AppState::new(
                extract,
                ServerOptions {
                    speed,
                    ..ServerOptions::default()
                },
            );
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                server::serve(listener, state).await?;
                Ok(())
            })
        }
        Command::Stage {
            osm_file,
            center,
            radius,
            cookie_spacing,
        } => {
            let extract = load_extract(&osm_file)?;
            let config = GameSpaceConfig {
                radius: Meters::new(radius)?,
                cookie_spacing: Meters::new(cookie_spacing)?,
                ..GameSpaceConfig::default()
            };
            let space = build_game_space(&extract, center, config)?;
            print_json(&space)
        }
        Command::Replay {
            stage,
            trace,
            seed,
            config,
            until,
        } => {
            let space: GameSpace = serde_json::from_str(
                &fs::read_to_string(&stage).with_context(|| format!("reading {}", stage.display()))?,
            )
            .with_context(|| format!("parsing {}", stage.display()))?;
            let trace = Trace::parse_jsonl(
                &fs::read_to_string(&trace).with_context(|| format!("reading {}", trace.display()))?,
            )?;
            let mut config: SessionConfig = match config {
                Some(path) => serde_json::from_str(&fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => SessionConfig::default(),
            };
            config.seed = seed;
            let state = sim::replay(space, config, &trace, until)?;
            let mut out = BufWriter::new(io::stdout().lock());
            write_event_log(state.events(), &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Bench {
            nodes,
            queries,
            edge_length,
            seed,
        } => {
            let origin = GeoPoint::new(39.087, 26.554)?;
            let graph = sim::generate_synthetic_grid(nodes, Meters::new(edge_length)?, origin)?;
            let report = sim::bench_dijkstra(&graph, queries, seed)?;
            print_json(&report)
        }
    }
}
