use clap::{Parser, Subcommand};
use eden_core::session::{self, EnvironmentControlRule, SaveState, SessionLog, SessionRecord};
use eden_core::{probe, EdenError, EngineConfig, Entity};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  simulation or internal error
  2  invalid command line
  3  missing or unreadable file, or write failure
  4  schema violation (malformed document or invalid configuration)
  5  save-state format version mismatch
  6  replay diverged

Errors are printed to stderr as one line:
  error kind=<kind> code=<n> message=<text>";

#[derive(Parser)]
#[command(name = "eden", version, about = "Seed, train, lock and inspect eden entities", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seed a new entity from a configuration file and write its save state.
    Init {
        /// JSON engine configuration; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the configuration's seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run epochs against an input pattern and write the state back.
    Train {
        #[arg(long)]
        state: PathBuf,
        /// JSON array of frames, cycled once per epoch.
        #[arg(long)]
        pattern: PathBuf,
        #[arg(long)]
        epochs: u64,
        /// Session log, appended one JSON record per epoch.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Environment control rules.
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Write the trained state here instead of over --state.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Freeze an entity so that only propagation runs.
    Lock {
        #[arg(long)]
        state: PathBuf,
        /// Restore all phases instead.
        #[arg(long)]
        unlock: bool,
    },
    /// Print a summary of a save state.
    Inspect {
        #[arg(long)]
        state: PathBuf,
    },
    /// Per-epoch CSV of stability, spike and node counts from a session log.
    ExportMetrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a save state twice and compare every epoch report.
    Replay {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        epochs: u64,
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Engine(#[from] EdenError),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("replay diverged at epoch {0}")]
    Diverged(u64),
}

impl CliError {
    fn kind_and_code(&self) -> (&'static str, u8) {
        match self {
            CliError::Engine(e) => match e {
                EdenError::Io { .. } => ("io", 3),
                EdenError::Malformed { .. } | EdenError::InvalidConfig(_) => ("schema", 4),
                EdenError::VersionMismatch { .. } => ("version", 5),
                _ => ("simulation", 1),
            },
            CliError::Csv { .. } => ("io", 3),
            CliError::Diverged(_) => ("diverged", 6),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_config(path: Option<&Path>) -> CliResult<EngineConfig> {
    let Some(path) = path else {
        return Ok(EngineConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| EdenError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    EngineConfig::from_json(&text).map_err(|e| {
        EdenError::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
        .into()
    })
}

fn read_rules(path: Option<&Path>) -> CliResult<Vec<EnvironmentControlRule>> {
    Ok(match path {
        Some(p) => session::load_rules(p)?,
        None => Vec::new(),
    })
}

fn cmd_init(config: Option<&Path>, out: &Path, seed_override: Option<u64>) -> CliResult<()> {
    let mut cfg = read_config(config)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let entity = Entity::seed(cfg)?;
    session::save(&entity, out)?;
    println!("seeded {} nodes into {}", entity.nodes.len(), out.display());
    Ok(())
}

fn cmd_train(
    state: &Path,
    pattern: &Path,
    epochs: u64,
    log: Option<&Path>,
    rules: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut entity = session::load(state)?;
    let frames = probe::load_pattern(pattern)?;
    let rules = read_rules(rules)?;
    if epochs == 0 {
        println!("0 epochs requested, nothing written");
        return Ok(());
    }
    entity.set_input_pattern(frames)?;
    let mut log = log.map(SessionLog::open).transpose()?;
    let result = session::train(&mut entity, epochs, &rules, log.as_mut());
    // Whatever completed is still saved when the log fails mid-run.
    session::save(&entity, out.unwrap_or(state))?;
    let reports = result?;
    let spikes: usize = reports.iter().map(|r| r.spike_count()).sum();
    println!(
        "trained {} epochs: clock {}, {} nodes, {} spikes",
        reports.len(),
        entity.entity_clock,
        entity.nodes.len(),
        spikes
    );
    Ok(())
}

fn cmd_lock(state: &Path, unlock: bool) -> CliResult<()> {
    let mut entity = session::load(state)?;
    if unlock {
        session::unlock(&mut entity);
    } else {
        session::lock(&mut entity);
    }
    session::save(&entity, state)?;
    println!("{} {}", if unlock { "unlocked" } else { "locked" }, state.display());
    Ok(())
}

fn cmd_inspect(state: &Path) -> CliResult<()> {
    let entity = session::load(state)?;
    let stab: Vec<f64> = entity.nodes.values().map(|n| n.stability_index).collect();
    println!("state:        {}", state.display());
    println!("locked:       {}", entity.locked);
    println!("epoch clock:  {}", entity.entity_clock);
    println!("nodes:        {}", entity.nodes.len());
    println!("functomes:    {}", entity.functomes.len());
    println!("payloads:     {}", entity.grid.len());
    println!("input probes: {}", entity.input_probes.len());
    println!("output probes:{}", entity.output_probes.len());
    if let Some((lo, hi, mean)) = summarize(&stab) {
        println!("stability:    mean {mean:.4}  min {lo:.4}  max {hi:.4}");
    }
    for n in entity.nodes.values() {
        let goal = n.goal.as_ref().map_or("-".to_string(), |g| g.z_index.to_string());
        println!(
            "  node {:>4}  soma {:?}  dendrites {}  terminals {}  stability {:.4}  goal z {}  hash {}",
            n.id,
            n.soma_position.0,
            n.dendrites.len(),
            n.axon_terminals.len(),
            n.stability_index,
            goal,
            &n.identity_hash[..n.identity_hash.len().min(12)]
        );
    }
    Ok(())
}

fn summarize(values: &[f64]) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi, values.iter().sum::<f64>() / values.len() as f64))
}

#[derive(Serialize)]
struct MetricsRow {
    epoch: u64,
    nodes: usize,
    spikes: usize,
    stability_mean: Option<f64>,
    stability_min: Option<f64>,
    stability_max: Option<f64>,
    pruned: usize,
    born: usize,
    apoptosed: usize,
}

impl From<&SessionRecord> for MetricsRow {
    fn from(r: &SessionRecord) -> Self {
        let stab: Vec<f64> = r.nodes.iter().map(|n| n.stability).collect();
        let s = summarize(&stab);
        Self {
            epoch: r.epoch,
            nodes: r.nodes.len(),
            spikes: r.spike_count,
            stability_mean: s.map(|s| s.2),
            stability_min: s.map(|s| s.0),
            stability_max: s.map(|s| s.1),
            pruned: r.pruned.len(),
            born: r.born.len(),
            apoptosed: r.apoptosed.len(),
        }
    }
}

fn cmd_export_metrics(log: &Path, out: &Path) -> CliResult<()> {
    let records = session::read_session_log(log)?;
    let csv_err = |source| CliError::Csv {
        path: out.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(out).map_err(csv_err)?;
    for r in &records {
        w.serialize(MetricsRow::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| EdenError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    println!("wrote {} rows to {}", records.len(), out.display());
    Ok(())
}

fn cmd_replay(state: &Path, epochs: u64, pattern: Option<&Path>, rules: Option<&Path>) -> CliResult<()> {
    let mut entity = session::load(state)?;
    if let Some(p) = pattern {
        entity.set_input_pattern(probe::load_pattern(p)?)?;
    }
    let rules = read_rules(rules)?;
    let text = SaveState::capture(&entity).to_json()?;
    let verdict = session::replay_verify(&text, epochs, &rules)?;
    match verdict.first_divergence {
        None if verdict.identical => {
            println!("identical ({epochs} epochs)");
            Ok(())
        }
        Some(k) => Err(CliError::Diverged(k)),
        None => Err(CliError::Diverged(epochs)),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Init {
            config,
            out,
            seed_override,
        } => cmd_init(config.as_deref(), &out, seed_override),
        Command::Train {
            state,
            pattern,
            epochs,
            log,
            rules,
            out,
        } => cmd_train(&state, &pattern, epochs, log.as_deref(), rules.as_deref(), out.as_deref()),
        Command::Lock { state, unlock } => cmd_lock(&state, unlock),
        Command::Inspect { state } => cmd_inspect(&state),
        Command::ExportMetrics { log, out } => cmd_export_metrics(&log, &out),
        Command::Replay {
            state,
            epochs,
            pattern,
            rules,
        } => cmd_replay(&state, epochs, pattern.as_deref(), rules.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.kind_and_code();
            let message = e.to_string().replace('\n', " ");
            eprintln!("error kind={kind} code={code} message={message}");
            ExitCode::from(code)
        }
    }
}
