use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seizure_core::config::{ConfigError, PipelineConfig};
use seizure_core::pipeline::{Pipeline, PipelineError, Stage};
use seizure_core::store::Store;
use seizure_core::synthetic::{self, SynthConfig};

/// EEG seizure-detection pipeline.
#[derive(Debug, Parser)]
#[command(name = "seizure", version)]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply to every missing key.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Store database; defaults to `<output>/seizure.sqlite`.
    #[arg(long, global = true, env = "SEIZURE_STORE")]
    store: Option<PathBuf>,

    /// Validate the configuration and print the execution plan only.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Worker threads for per-recording and per-fold work.
    #[arg(long, short, global = true)]
    jobs: Option<usize>,

    /// More log output (repeatable).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read EDF/EDF+ files (or directories of them) into the store.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Filter, resample, re-reference and epoch every recording.
    Preprocess,
    /// Compute the feature catalogue for every epoch.
    Featurize,
    /// Build the subject-wise fold plan and run Boruta per fold.
    Select,
    /// Random hyper-parameter search per model and fold.
    Tune,
    /// Fit every configured model on every fold.
    Train,
    /// Predict held-out recordings; optionally add streams from a CSV.
    Predict {
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Binary and mean voting across model streams.
    Vote,
    /// Refine every prediction stream.
    Postprocess,
    /// Metrics, statistics, ROC and importance tables.
    Evaluate,
    /// Text summary of the last evaluation.
    Report,
    /// Every stage in order.
    Run {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Write the bundled synthetic dataset and a matching configuration.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 12)]
        patients: usize,
        /// Recording length in seconds.
        #[arg(long, default_value_t = 300)]
        duration: usize,
        /// Seed of the generator (distinct from the pipeline seed).
        #[arg(long, default_value_t = 7)]
        data_seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::MissingStage(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

impl Command {
    fn stages(&self) -> Vec<Stage> {
        match self {
            Command::Ingest { .. } => vec![Stage::Ingest],
            Command::Preprocess => vec![Stage::Preprocess],
            Command::Featurize => vec![Stage::Featurize],
            Command::Select => vec![Stage::Select],
            Command::Tune => vec![Stage::Tune],
            Command::Train => vec![Stage::Train],
            Command::Predict { .. } => vec![Stage::Predict],
            Command::Vote => vec![Stage::Vote],
            Command::Postprocess => vec![Stage::Postprocess],
            Command::Evaluate => vec![Stage::Evaluate],
            Command::Report => vec![Stage::Report],
            Command::Run { .. } => Stage::ALL.to_vec(),
            Command::Synth { .. } => Vec::new(),
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.output {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_inputs(inputs: &[PathBuf]) -> Result<(), Failure> {
    match inputs.iter().find(|p| !p.exists()) {
        Some(p) => Err(Failure::Data(format!("{}: no such file or directory", p.display()))),
        None => Ok(()),
    }
}

fn synth(dir: &Path, patients: usize, duration: usize, data_seed: u64, seed: u64) -> Result<(), Failure> {
    let cfg = SynthConfig {
        n_patients: patients,
        duration,
        seed: data_seed,
        ..Default::default()
    };
    let files = synthetic::write_dataset(dir, &cfg).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let pipeline = synthetic::pipeline_config(seed, &dir.join("out"));
    let path = dir.join("pipeline.json");
    std::fs::write(&path, pipeline.to_json()).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    println!("wrote {} recordings and {}", files.len(), path.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    if let Command::Synth {
        dir,
        patients,
        duration,
        data_seed,
    } = &cli.command
    {
        if cli.dry_run {
            println!("would write {patients} synthetic recordings of {duration} s to {}", dir.display());
            return Ok(());
        }
        return synth(dir, *patients, *duration, *data_seed, cli.seed.unwrap_or(42));
    }
    let cfg = load_config(&cli)?;
    let store_path = cli.store.clone().unwrap_or_else(|| cfg.output_dir.join("seizure.sqlite"));
    if let Command::Ingest { inputs } | Command::Run { inputs } = &cli.command {
        check_inputs(inputs)?;
    }
    if cli.dry_run {
        let pipeline = Pipeline::new(cfg, Store::open_in_memory().map_err(|e| Failure::Data(e.to_string()))?);
        print!("{}", pipeline.plan(&cli.command.stages()));
        println!("store: {}", store_path.display());
        return Ok(());
    }
    if let Some(parent) = store_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Data(format!("{}: {e}", parent.display())))?;
    }
    let store = Store::open(&store_path).map_err(|e| Failure::Data(format!("{}: {e}", store_path.display())))?;
    let mut p = Pipeline::new(cfg, store);
    let out = p.output_dir().to_path_buf();
    match &cli.command {
        Command::Ingest { inputs } => {
            let s = p.ingest(inputs)?;
            println!("ingested {} recordings ({} diagnostics)", s.recordings, s.diagnostics.len());
        }
        Command::Preprocess => p.preprocess()?,
        Command::Featurize => p.featurize()?,
        Command::Select => p.select()?,
        Command::Tune => p.tune()?,
        Command::Train => p.train()?,
        Command::Predict { import } => p.predict(import.as_deref())?,
        Command::Vote => p.vote()?,
        Command::Postprocess => p.postprocess()?,
        Command::Evaluate => {
            p.evaluate()?;
            println!("metrics: {}", out.join("metrics.csv").display());
        }
        Command::Report => print!("{}", p.report()?),
        Command::Run { inputs } => print!("{}", p.run_all(inputs)?),
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
