use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use pursuit_arena::episode::{EpisodeConfig, MapId};
use pursuit_arena::harness::{self, ExperimentSpec};
use pursuit_arena::protocol::{serve_stdio, ServeOptions, Server, SlotSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "pursuit-arena", version, about = "Pursuit-evasion arena: experiments, theory and agent server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play scripted episodes and summarize the scores.
    Run(RunArgs),
    /// Print closed-form capture-time and score predictions.
    Theory(TheoryArgs),
    /// Check the closed forms against Monte Carlo oracles.
    Validate(ValidateArgs),
    /// Serve the lockstep agent protocol over TCP or standard streams.
    Serve(ServeArgs),
}

#[derive(Args)]
struct MapArgs {
    /// find-and-defeat-zerglings or find-and-defeat-drones.
    #[arg(long, default_value = "find-and-defeat-drones")]
    map: MapId,
    /// Episode config overrides: inline JSON object or path to a JSON file.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, default_value = "traversal")]
    pursuer: String,
    #[arg(long, default_value = "builtin")]
    evader: String,
    #[arg(long, default_value_t = 100)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write one row per episode here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    map: MapArgs,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(10_000..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    map: MapArgs,
    /// `socket` for a remote client, otherwise a scripted agent name.
    #[arg(long, default_value = "socket")]
    pursuer: String,
    #[arg(long, default_value = "socket")]
    evader: String,
    #[arg(long, default_value_t = 5000)]
    port: u16,
    /// Serve one client on standard input and output instead of TCP.
    #[arg(long)]
    stdio: bool,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-step action timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Validation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Theory(args) => theory(args),
        Command::Validate(args) => validate(args),
        Command::Serve(args) => serve(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Validation) => ExitCode::from(EXIT_VALIDATION),
    }
}

fn load_overrides(config: Option<&str>) -> Result<Option<serde_json::Value>, Failure> {
    let Some(config) = config else {
        return Ok(None);
    };
    let text = if config.trim_start().starts_with('{') {
        config.to_owned()
    } else {
        std::fs::read_to_string(config).map_err(|e| Failure::Usage(format!("cannot read config {config}: {e}")))?
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("config is not valid JSON: {e}")))?;
    if !value.is_object() {
        return Err(Failure::Usage("config must be a JSON object".into()));
    }
    Ok(Some(value))
}

fn usage_or_runtime(e: harness::HarnessError) -> Failure {
    use harness::HarnessError as E;
    match e {
        E::UnknownAgent(_) | E::Config(_) | E::NoEpisodes => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut spec = ExperimentSpec::new(args.map.map, &args.pursuer, &args.evader, args.episodes, args.seed);
    spec.overrides = load_overrides(args.map.config.as_deref())?;
    spec.csv = args.csv;
    let (_, summary) = harness::run(&spec).map_err(usage_or_runtime)?;
    println!("{} vs {} on {:?}", spec.pursuer, spec.evader, spec.map_id);
    println!("{summary}");
    Ok(())
}

fn theory(args: TheoryArgs) -> Result<(), Failure> {
    let overrides = load_overrides(args.map.config.as_deref())?;
    let table = harness::theory(args.map.map, overrides.as_ref()).map_err(usage_or_runtime)?;
    print!("{table}");
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let report = harness::validate(args.trials, args.seed).map_err(usage_or_runtime)?;
    print!("{report}");
    if report.passed() {
        println!("all checks within {:.0}%", 100.0 * report.tolerance);
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let mut overrides = load_overrides(args.map.config.as_deref())?.unwrap_or_else(|| serde_json::json!({}));
    // transport settings may ride along in the config document
    let object = overrides.as_object_mut().expect("checked to be an object");
    let port = match object.remove("port") {
        Some(v) => v
            .as_u64()
            .and_then(|p| u16::try_from(p).ok())
            .ok_or_else(|| Failure::Usage(format!("invalid port {v}")))?,
        None => args.port,
    };
    let timeout_ms = match object.remove("action_timeout_ms") {
        Some(v) => Some(v.as_u64().ok_or_else(|| Failure::Usage(format!("invalid action_timeout_ms {v}")))?),
        None => args.timeout_ms,
    };

    let config = EpisodeConfig::for_map(args.map.map)
        .with_overrides(&overrides)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_seed(args.seed);
    let mut options = ServeOptions::new(config, SlotSpec::parse(&args.pursuer), SlotSpec::parse(&args.evader));
    options.session.episodes = args.episodes;
    if let Some(ms) = timeout_ms {
        options.session.action_timeout = Duration::from_millis(ms);
    }

    let report = if args.stdio {
        serve_stdio(&options).map_err(|e| Failure::Usage(e.to_string()))?
    } else {
        let server = Server::bind(("0.0.0.0", port)).map_err(|e| Failure::Runtime(e.to_string()))?;
        eprintln!("listening on {}", server.local_addr().map_err(|e| Failure::Runtime(e.to_string()))?);
        server.run(&options).map_err(|e| Failure::Runtime(e.to_string()))?
    };
    for ep in &report.episodes {
        eprintln!(
            "episode {} seed {} score {} duration {:.2} s{}",
            ep.episode,
            ep.seed,
            ep.score,
            ep.duration,
            if ep.aborted { " (aborted)" } else { "" }
        );
    }
    if report.episodes.iter().any(|e| e.aborted) {
        return Err(Failure::Runtime("a remote agent disconnected".into()));
    }
    Ok(())
}
