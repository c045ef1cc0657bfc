//! `wayfinder`: simulate listeners, score and rank explanation corpora,
//! replay trajectories and run the participant service.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 remote translator
//! unavailable.

mod replay;

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use wayfinder_core::gridworld::{load_map_file, parse_map, GridMap};
use wayfinder_core::pipeline::{self, DirectActorKind, PipelineError, RunConfig};
use wayfinder_core::planner::{run_episode, write_trajectory, PlannerError};
use wayfinder_core::translator::{build_translator, Explanation, TranslateError, TranslatorKind};
use wayfinder_service::{ServiceConfig, Sessions, SystemClock, ADMIN_TOKEN_ENV};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Remote(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_remote_failure() {
            CliError::Remote(e.to_string())
        } else if e.is_usage_error() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<TranslateError> for CliError {
    fn from(e: TranslateError) -> Self {
        match e {
            TranslateError::RemoteUnavailable { .. } => CliError::Remote(e.to_string()),
            TranslateError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Translate(t) => t.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "wayfinder", version, about = "Score navigation explanations with a simulated listener")]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode on one map and print S, L and R.
    Simulate(SimulateArgs),
    /// Evaluate every corpus explanation and write scores.
    Score(RunArgs),
    /// Score, then write quality bins and speaker distributions.
    Rank(RunArgs),
    /// Corpus statistics and failure categories.
    Analyze(RunArgs),
    /// Print a trajectory file as ASCII frames.
    Replay(ReplayArgs),
    /// Start the participant HTTP service.
    Serve(ServeArgs),
    /// Check every map in a directory.
    ValidateMaps(ValidateArgs),
}

#[derive(Args, Clone, Default)]
struct TranslatorArgs {
    #[arg(long, value_parser = parse_kind)]
    translator: Option<TranslatorKind>,
    /// Chat-completions endpoint for the remote translator.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Response cache directory for the remote translator.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Scripted translator outputs, separated by `---` lines.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Custom keyword lexicon (TOML).
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<TranslatorKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "oracle" => Ok(TranslatorKind::Oracle),
        "keyword" => Ok(TranslatorKind::Keyword),
        "remote" => Ok(TranslatorKind::Remote),
        "scripted" => Ok(TranslatorKind::Scripted),
        _ => Err(format!("unknown translator `{s}` (oracle, keyword, remote, scripted)")),
    }
}

fn parse_actor(s: &str) -> Result<DirectActorKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "keyword" => Ok(DirectActorKind::Keyword),
        "oracle" => Ok(DirectActorKind::Oracle),
        "remote" => Ok(DirectActorKind::Remote),
        _ => Err(format!("unknown direct actor `{s}` (keyword, oracle, remote)")),
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    map: PathBuf,
    /// Explanation text for the keyword and remote translators.
    #[arg(long, default_value = "")]
    text: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    max_replans: Option<u32>,
    /// Run settings file; only its episode and translator sections apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the step-by-step trajectory here.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[command(flatten)]
    translator: TranslatorArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Run settings file (TOML). Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Attempts per explanation.
    #[arg(long)]
    attempts: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_parser = parse_actor)]
    direct_actor: Option<DirectActorKind>,
    #[command(flatten)]
    translator: TranslatorArgs,
}

#[derive(Args)]
struct ReplayArgs {
    trajectory: PathBuf,
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value_t = wayfinder_core::gridworld::DEFAULT_FOV_RADIUS)]
    fov: usize,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    maps: PathBuf,
    /// Session log directory.
    #[arg(long)]
    data: PathBuf,
    /// Explanations offered in Rate and Navigate sessions.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Web UI bundle served at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = wayfinder_core::gridworld::DEFAULT_FOV_RADIUS)]
    fov: usize,
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
}

#[derive(Args)]
struct ValidateArgs {
    dir: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
        }
    }
}

fn apply_translator(config: &mut RunConfig, t: &TranslatorArgs) {
    let tc = &mut config.translator;
    if let Some(k) = t.translator {
        tc.kind = k;
    }
    if let Some(v) = &t.endpoint {
        tc.endpoint_url = Some(v.clone());
    }
    if let Some(v) = &t.model {
        tc.model_name = Some(v.clone());
    }
    if let Some(v) = &t.cache {
        tc.cache_dir = Some(v.clone());
    }
    if let Some(v) = &t.script {
        tc.script_path = Some(v.clone());
    }
    if let Some(v) = &t.lexicon {
        tc.lexicon_path = Some(v.clone());
    }
}

fn run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = load_config(args.config.as_deref())?;
    if let Some(v) = &args.maps {
        c.maps = Some(v.clone());
    }
    if let Some(v) = &args.corpus {
        c.corpus = Some(v.clone());
    }
    if let Some(v) = &args.out {
        c.out = Some(v.clone());
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.parallelism {
        c.parallelism = v;
    }
    if let Some(v) = args.attempts {
        c.attempts = v;
    }
    if let Some(v) = args.budget {
        c.episode.budget = Some(v);
    }
    if let Some(v) = args.direct_actor {
        c.direct_actor = v;
    }
    apply_translator(&mut c, &args.translator);
    for (name, path, dir) in [("maps", &c.maps, true), ("corpus", &c.corpus, false)] {
        match path {
            None => return Err(CliError::Usage(format!("--{name} is required"))),
            Some(p) if dir && !p.is_dir() => {
                return Err(CliError::Usage(format!("{} is not a directory", p.display())))
            }
            Some(p) if !dir && !p.is_file() => return Err(CliError::Usage(format!("{} does not exist", p.display()))),
            _ => {}
        }
    }
    if c.out.is_none() {
        return Err(CliError::Usage("--out is required".into()));
    }
    Ok(c)
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if config.translator.kind == TranslatorKind::Keyword && args.translator.translator.is_none() && args.text.is_empty() {
        return Err(CliError::Usage("--text is required unless --translator is oracle or scripted".into()));
    }
    apply_translator(&mut config, &args.translator);
    if let Some(b) = args.budget {
        config.episode.budget = Some(b);
    }
    if let Some(r) = args.max_replans {
        config.episode.max_replans = r;
    }
    config.episode.validate()?;
    config.translator.validate()?;
    let world = load_map_file(&args.map).map_err(|e| CliError::Data(e.to_string()))?;
    let translator = build_translator(&config.translator)?;
    let explanation = Explanation::new("cli", world.id.clone(), args.text);
    let params = config.episode.params_for(&world, args.seed.unwrap_or(config.seed));
    let attempt = run_episode(&world, &explanation, translator.as_ref(), &params)?;
    println!(
        "S={} L={} R={}",
        u8::from(attempt.success),
        attempt.length,
        attempt.replans
    );
    for f in &attempt.failures {
        tracing::info!(step = f.step, replanned = f.replanned, "{:?}", f.reason);
    }
    if let Some(path) = args.trajectory {
        let file = fs::File::create(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        write_trajectory(std::io::BufWriter::new(file), &attempt.trajectory)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        println!("trajectory: {}", path.display());
    }
    Ok(())
}

fn score(args: RunArgs) -> Result<(), CliError> {
    let config = run_config(&args)?;
    let out = pipeline::score(&config)?;
    let dir = config.out.as_ref().expect("checked");
    println!(
        "{} rows ({} evaluated, {} reused) -> {}",
        out.rows.len(),
        out.evaluated,
        out.reused,
        dir.join("scores.csv").display()
    );
    Ok(())
}

fn rank(args: RunArgs) -> Result<(), CliError> {
    let config = run_config(&args)?;
    let out = pipeline::rank(&config)?;
    for b in &out.bins {
        println!("{}\t{}\t{}\t{}", b.map_id, b.model.name(), b.label, b.selected_explanation_id);
    }
    Ok(())
}

fn analyze(args: RunArgs) -> Result<(), CliError> {
    let config = run_config(&args)?;
    pipeline::analyze(&config)?;
    println!("{}", config.out.as_ref().expect("checked").join("analysis.csv").display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut config = ServiceConfig::new(args.maps, args.data);
    config.corpus = args.corpus;
    config.static_dir = args.static_dir;
    config.budget = args.budget;
    config.fov_radius = args.fov;
    config.idle_timeout_ms = args.idle_minutes * 60 * 1000;
    config.admin_token = std::env::var(ADMIN_TOKEN_ENV).ok().filter(|t| !t.is_empty());
    let sessions = Sessions::open(config, Arc::new(SystemClock)).map_err(|e| CliError::Data(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime
        .block_on(wayfinder_service::serve(Arc::new(sessions), args.addr))
        .map_err(|e| CliError::Data(format!("server: {e}")))
}

fn validate_maps(args: ValidateArgs) -> Result<(), CliError> {
    let entries = fs::read_dir(&args.dir).map_err(|e| CliError::Usage(format!("{}: {e}", args.dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "map"))
        .collect();
    paths.sort();
    let mut problems = 0;
    let mut ids: Vec<(String, PathBuf)> = Vec::new();
    for path in &paths {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                problems += 1;
                println!("{}: {e}", path.display());
                continue;
            }
        };
        let map: GridMap = match parse_map(&text) {
            Ok(m) => m,
            Err(e) => {
                problems += 1;
                println!("{}: {e}", path.display());
                continue;
            }
        };
        let id = if map.id.is_empty() {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        } else {
            map.id.clone()
        };
        if let Some((_, other)) = ids.iter().find(|(i, _)| *i == id) {
            problems += 1;
            println!("{}: id `{id}` already used by {}", path.display(), other.display());
        }
        ids.push((id.clone(), path.clone()));
        if map.to_ascii() != text {
            problems += 1;
            println!("{}: not in canonical form (LF endings, no trailing whitespace)", path.display());
        }
        let m = map.metrics();
        println!(
            "{id}: {}x{} shortest_path={} brittleness={:.3} openness={:.3} reachable={}",
            map.width(),
            map.height(),
            m.shortest_path,
            m.brittleness,
            m.openness,
            m.reachable_cells
        );
    }
    if paths.is_empty() {
        return Err(CliError::Data(format!("no .map files in {}", args.dir.display())));
    }
    if problems > 0 {
        return Err(CliError::Data(format!("{problems} problem(s) in {} map file(s)", paths.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Score(a) => score(a),
        Command::Rank(a) => rank(a),
        Command::Analyze(a) => analyze(a),
        Command::Replay(a) => replay::run(&a.trajectory, &a.map, a.fov),
        Command::Serve(a) => serve(a),
        Command::ValidateMaps(a) => validate_maps(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
