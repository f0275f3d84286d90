//! `mmpm`: run the mining pipeline stage by stage inside a workspace
//! directory.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors (including
//! running a stage before its prerequisites), 2 for data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use mmpm::pipeline::{self, IngestArgs, Workspace};
use mmpm::synthgen::{default_plants, PlantSpec, SynthConfig};
use mmpm::Error;

#[derive(Parser, Debug)]
#[command(name = "mmpm", version, about = "Multimodal event pattern mining")]
struct Cli {
    /// Workspace directory holding every stage's artifacts.
    #[arg(long, short = 'w', env = "MMPM_WORKSPACE", default_value = "mmpm-workspace", global = true)]
    workspace: PathBuf,

    /// Configuration file; defaults to `<workspace>/mmpm.conf` when present.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, short = 'j', default_value_t = 0, global = true)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load captions, feature maps, ontology and embeddings; assign events.
    Ingest {
        /// Corpus JSONL (default: `<workspace>/corpus/corpus.jsonl`).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory feature references resolve against (default: the corpus directory).
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Build the caption vocabulary and cluster its word embeddings.
    Cluster,
    /// Turn feature maps and captions into patch-level transactions.
    Transact,
    /// Mine event-predicting multimodal patterns.
    Mine,
    /// Name each pattern from the captions that support it.
    Name,
    /// Train the pattern-activation event classifier.
    Classify,
    /// Write patterns.json with names, per-event counts and report.html.
    Report,
    /// Generate a synthetic corpus with planted patterns into the workspace.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        total_tx: usize,
        #[arg(long, default_value_t = 0.01)]
        noise_p: f64,
        /// JSON array of plant specs (default: five built-in plants).
        #[arg(long)]
        plants: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> mmpm::Result<()> {
    let mut ws = Workspace::open(&cli.workspace, cli.config.as_deref())?;
    match cli.command {
        Command::Ingest {
            corpus,
            features,
            ontology,
            embeddings,
        } => {
            let m = pipeline::ingest(
                &ws,
                &IngestArgs {
                    corpus,
                    features_dir: features,
                    ontology,
                    embeddings,
                },
            )?;
            println!(
                "ingested {} documents ({} with events, {} lines skipped)",
                m.documents,
                m.labeled,
                m.skipped.len()
            );
        }
        Command::Cluster => {
            let log = pipeline::cluster(&ws)?;
            println!(
                "clustered {} of {} words in {} iterations (converged: {})",
                log.clustered, log.vocabulary, log.iterations, log.converged
            );
        }
        Command::Transact => {
            let s = pipeline::transact(&ws)?;
            println!("{} transactions from {} documents", s.transactions, s.documents);
        }
        Command::Mine => {
            let p = pipeline::mine_stage(&ws)?;
            println!("{} patterns", p.len());
        }
        Command::Name => {
            let n = pipeline::name_stage(&ws)?;
            let named = n.iter().filter(|r| r.name.is_some()).count();
            println!("named {named} of {} patterns", n.len());
        }
        Command::Classify => {
            let s = pipeline::classify(&ws)?;
            println!(
                "trained on {} documents with {} pattern features; training accuracy {:.4}",
                s.documents.len(),
                s.patterns,
                s.train_accuracy
            );
        }
        Command::Report => {
            let counts = pipeline::report(&ws)?;
            for c in &counts {
                println!("{:<20} {}", c.name, c.patterns);
            }
            println!("wrote {}", ws.path(pipeline::REPORT).display());
        }
        Command::Synth {
            seed,
            total_tx,
            noise_p,
            plants,
        } => {
            let specs: Vec<PlantSpec> = match plants {
                Some(path) => {
                    let text = std::fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    serde_json::from_slice(&text).map_err(|e| Error::Json { path, source: e })?
                }
                None => default_plants(),
            };
            let cfg = SynthConfig {
                seed,
                total_tx,
                noise_p,
                ..SynthConfig::default()
            };
            let m = pipeline::synth(&mut ws, &specs, &cfg)?;
            println!(
                "generated {} documents with {} plants; clusters = {}",
                m.documents,
                m.plants.len(),
                m.recommended_clusters
            );
        }
    }
    info!("done");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
