//! `mobex`: the end-to-end pipeline from raw flight, price and mobility files
//! to network summaries, weekly indices, quantile regression tables and GEV
//! return levels.
//!
//! Every subcommand reads one TOML configuration, writes into an output tree
//! and finishes with `manifest.json`, which lists each file written together
//! with its digest. Outputs depend only on the configuration, the inputs and
//! the seed.

pub mod config;
pub mod context;
pub mod error;
pub mod manifest;
pub mod output;
pub mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mobility_extremes::Execution;

use config::PipelineConfig;
use context::Context;
use error::CliError;
use manifest::{RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
use output::Outputs;
use stages::Outcome;

/// Environment variable consulted when `--out` is absent.
pub const OUT_DIR_ENV: &str = "MOBEX_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mobex", version, about = "Airline mobility, prices and extreme-value analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weekly and monthly flight network snapshots and their summaries.
    BuildNetwork(CommonArgs),
    /// Raw and z-scored weekly indices plus the aligned design table.
    Indices(CommonArgs),
    /// Quantile regression of the response index across the configured taus.
    Quantreg(CommonArgs),
    /// GEV fits to monthly price minima, model selection and return levels.
    Gev(CommonArgs),
    /// Every stage in order, stopping at the first failure.
    RunAll(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides MOBEX_OUT_DIR and the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    /// Run every parallel section on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Network,
    Indices,
    Quantreg,
    Gev,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Network, Stage::Indices, Stage::Quantreg, Stage::Gev];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Network => "network",
            Stage::Indices => "indices",
            Stage::Quantreg => "quantreg",
            Stage::Gev => "gev",
        }
    }

    fn run(self, ctx: &mut Context, out: &mut Outputs) -> Result<Outcome, CliError> {
        match self {
            Stage::Network => stages::network::run(ctx, out),
            Stage::Indices => stages::indices::run(ctx, out),
            Stage::Quantreg => stages::quantreg::run(ctx, out),
            Stage::Gev => stages::gev::run(ctx, out),
        }
    }
}

/// Resolved settings for one invocation.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: String,
    pub stages: Vec<Stage>,
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub execution: Execution,
    pub threads: Option<usize>,
}

/// Everything a finished run leaves behind. `error` is the failure that
/// stopped it, if any; the manifest is written either way.
#[derive(Debug)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    pub error: Option<CliError>,
}

fn output_dir(flag: Option<PathBuf>, config: &PipelineConfig) -> PathBuf {
    if let Some(p) = flag {
        return p;
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    match &config.output_dir {
        Some(p) => config.resolve(p),
        None => config.resolve(Path::new("out")),
    }
}

fn invocation(command: Command) -> Result<Invocation, CliError> {
    let (name, stages, args) = match command {
        Command::BuildNetwork(a) => ("build-network", vec![Stage::Network], a),
        Command::Indices(a) => ("indices", vec![Stage::Indices], a),
        Command::Quantreg(a) => ("quantreg", vec![Stage::Quantreg], a),
        Command::Gev(a) => ("gev", vec![Stage::Gev], a),
        Command::RunAll(a) => ("run-all", Stage::ALL.to_vec(), a),
    };
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out_dir = output_dir(args.out, &config);
    Ok(Invocation {
        command: name.to_string(),
        stages,
        config,
        out_dir,
        execution: if args.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
        threads: args.threads,
    })
}

fn run_stages(inv: &Invocation) -> Result<RunReport, CliError> {
    let mut manifest = RunManifest::new(&inv.command, &inv.config)?;
    let mut out = Outputs::new(&inv.out_dir)?;
    let mut ctx = Context::new(&inv.config, inv.execution);
    let mut error = None;
    for &stage in &inv.stages {
        let result = stage.run(&mut ctx, &mut out);
        let (status, message) = match &result {
            Ok(Outcome::Ran) => (StageStatus::Ok, None),
            Ok(Outcome::Skipped) => (StageStatus::Skipped, None),
            Err(e) => (StageStatus::Failed, Some(e.to_string())),
        };
        manifest.push(StageRecord {
            name: stage.name().to_string(),
            status,
            files: out.take_written(),
            warnings: ctx.take_warnings(),
            error: message,
        });
        if let Err(e) = result {
            error = Some(e);
            break;
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    let path = inv.out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, bytes).map_err(|e| CliError::data(format!("writing {}", path.display()), e))?;
    Ok(RunReport {
        manifest,
        out_dir: inv.out_dir.clone(),
        error,
    })
}

/// Runs the invocation's stages, on a dedicated pool when `threads` is set.
pub fn execute(inv: &Invocation) -> Result<RunReport, CliError> {
    match inv.threads {
        #[cfg(feature = "parallel")]
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("--threads {n}: {e}")))?;
            pool.install(|| run_stages(inv))
        }
        _ => run_stages(inv),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let inv = match invocation(cli.command) {
        Ok(inv) => inv,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if inv.threads.is_some() && !cfg!(feature = "parallel") {
        eprintln!("warning: built without the parallel feature; --threads ignored");
    }
    let report = match execute(&inv) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    for stage in &report.manifest.stages {
        for w in &stage.warnings {
            eprintln!("warning [{}]: {w}", stage.name);
        }
    }
    let files = report.manifest.files().count();
    match report.error {
        Some(e) => {
            let stage = report.manifest.failed_stage.as_deref().unwrap_or("?");
            eprintln!("error [{stage}]: {e}");
            eprintln!("{files} files written to {} before the failure", report.out_dir.display());
            e.exit_code()
        }
        None => {
            println!("{}: {files} files written to {}", inv.command, report.out_dir.display());
            0
        }
    }
}
