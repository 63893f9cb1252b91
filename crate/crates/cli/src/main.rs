//! `spiderweb`: classify level sets, extract loops, compute itineraries,
//! construct orbits and probe periodic points from the command line.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "spiderweb", version, about = "Numerical evidence for spider's-web fast escaping sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON object overriding the configuration file.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// gap-series, exponential, polynomial or monomial.
    #[arg(long, global = true)]
    function: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    param: Option<String>,
    /// Base radius R.
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    level: Option<String>,
    /// Iteration depth of the level test.
    #[arg(long, global = true)]
    depth: Option<String>,
    /// cx,cy,hw,res
    #[arg(long, global = true, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    stride: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Any configuration key, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify a grid against one level and write a raster, sidecar and image.
    Classify,
    /// Extract holes and loops and check nesting, forward mapping and degrees.
    Loops {
        /// SWGC rasters used as hole masks instead of the function.
        #[arg(long, value_delimiter = ',')]
        masks: Vec<String>,
    },
    /// Itineraries of sampled points or of `--point x,y`.
    Itinerary {
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        #[arg(long)]
        points: Option<String>,
        #[arg(long)]
        length: Option<String>,
    },
    /// Realize a point with a prescribed orbit type.
    Construct {
        /// a, b or c.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        prefix: Option<String>,
        #[arg(long)]
        max_subdiv: Option<String>,
    },
    /// Find periodic points and gather singleton evidence.
    Periodic {
        #[arg(long)]
        period: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Render a raster, optionally with loops overlaid.
    Render {
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        overlay: Option<String>,
        #[arg(long)]
        png: bool,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let c = &cli.common;
    if let Some(path) = &c.config {
        cfg.load_kv(path).map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(path) = &c.json {
        cfg.load_json(path).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut flags: Vec<(&str, String)> = Vec::new();
    let mut push = |key: &'static str, v: &Option<String>| {
        if let Some(v) = v {
            flags.push((key, v.clone()));
        }
    };
    push("function", &c.function);
    push("param", &c.param);
    push("radius", &c.radius);
    push("level", &c.level);
    push("depth", &c.depth);
    push("grid", &c.grid);
    push("stride", &c.stride);
    push("out", &c.out);
    push("threads", &c.threads);
    push("seed", &c.seed);
    match &cli.command {
        Command::Classify => {}
        Command::Loops { masks } => {
            if !masks.is_empty() {
                flags.push(("masks", masks.join(",")));
            }
        }
        Command::Itinerary { point, points, length } => {
            push("point", point);
            push("points", points);
            push("length", length);
        }
        Command::Construct { kind, prefix, max_subdiv } => {
            push("kind", kind);
            push("prefix", prefix);
            push("max_subdiv", max_subdiv);
        }
        Command::Periodic { period, seeds } => {
            push("period", period);
            push("seeds", seeds);
        }
        Command::Render { input, overlay, png } => {
            push("input", input);
            push("overlay", overlay);
            if *png {
                flags.push(("png", "true".into()));
            }
        }
    }
    for (key, value) in flags {
        cfg.set(key, &value).map_err(|m| CliError::Config(format!("--{}: {m}", key.replace('_', "-"))))?;
    }
    for kv in &c.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k, v).map_err(|m| CliError::Config(format!("--set {k}: {m}")))?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = build_config(cli)?;
    if cfg.threads > 0 {
        // Ignored if a pool already exists; results never depend on it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.command {
        Command::Classify => commands::classify(&cfg),
        Command::Loops { .. } => commands::loops(&cfg),
        Command::Itinerary { .. } => commands::itinerary(&cfg),
        Command::Construct { .. } => commands::construct(&cfg),
        Command::Periodic { .. } => commands::periodic(&cfg),
        Command::Render { .. } => commands::render(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spiderweb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
