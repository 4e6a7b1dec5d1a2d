use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shareprefill::{Config, Error, RunMode};

mod commands;

/// Block-sparse prefill attention with pattern sharing across heads.
#[derive(Debug, Parser)]
#[command(name = "shareprefill", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file; flags given here override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed of the synthetic model (templates and head assignment).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cumulative attention threshold.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Similarity threshold; 0 disables sharing.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Sparsity threshold; 1.01 disables the highly-sparse exclusion.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true, value_name = "TOKENS")]
    block_size: Option<usize>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record pooled attention maps of every head into an AMAP file.
    Calibrate {
        /// Map resolution R.
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        input_seed: Option<u64>,
    },
    /// Cluster calibration maps into a head dictionary.
    Cluster {
        /// Calibration maps; defaults to `<out>/calibration.amap`.
        #[arg(long, value_name = "PATH")]
        amap: Option<PathBuf>,
        #[arg(long)]
        distance_threshold: Option<f64>,
        #[arg(long)]
        min_cluster_size: Option<usize>,
    },
    /// Run prefill over the synthetic model and write a trace.
    Prefill {
        /// Head dictionary; defaults to `<out>/head_dict.json`, else one is
        /// built in memory from a calibration pass.
        #[arg(long, value_name = "PATH")]
        head_dict: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Write each head's block mask as a PGM image.
        #[arg(long)]
        dump_masks: bool,
    },
    /// Time dense against block-sparse attention over sequence lengths.
    Bench {
        /// Comma-separated sequence lengths.
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        /// Use a random mask of this causal density instead of a searched one.
        #[arg(long)]
        density: Option<f64>,
        /// Permit lengths above the desk-scale limit.
        #[arg(long)]
        allow_large: bool,
    },
    /// Compare pooled score estimates with exact block means.
    DiagnosePooling {
        /// Additional random 1-d cases.
        #[arg(long, default_value_t = 1000)]
        random: usize,
    },
    /// Pairwise Jaccard similarity of the heads' attention patterns.
    Similarity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sparse,
    Dense,
    Both,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sparse => RunMode::Sparse,
            ModeArg::Dense => RunMode::Dense,
            ModeArg::Both => RunMode::Both,
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Json(_) | Error::Malformed(_) | Error::Version { .. } => EXIT_IO,
        Error::Invariant(_) | Error::Contract(_) => EXIT_INVARIANT,
        _ => EXIT_FAILURE,
    }
}

fn load_config(global: &GlobalArgs) -> shareprefill::Result<Config> {
    let mut config = match &global.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = global.seed {
        config.model.seed = seed;
        config.bench.seed = seed;
    }
    if let Some(g) = global.gamma {
        config.thresholds.gamma = g;
    }
    if let Some(t) = global.tau {
        config.thresholds.tau = t;
    }
    if let Some(d) = global.delta {
        config.thresholds.delta = d;
    }
    if let Some(bs) = global.block_size {
        config.model.block_size = bs;
        config.bench.block_size = bs;
    }
    if let Some(t) = global.threads {
        config.threads = Some(t);
    }
    if let Some(out) = &global.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> shareprefill::Result<()> {
    let mut config = load_config(&cli.global)?;
    if let Some(n) = config.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Calibrate { resolution, input_seed } => {
            if let Some(r) = resolution {
                config.calibration.resolution = r;
            }
            if let Some(s) = input_seed {
                config.calibration.input_seed = s;
            }
            config.validate()?;
            commands::calibrate(&config)
        }
        Command::Cluster { amap, distance_threshold, min_cluster_size } => {
            if let Some(t) = distance_threshold {
                config.cluster.distance_threshold = t;
            }
            if let Some(m) = min_cluster_size {
                config.cluster.min_cluster_size = m;
            }
            config.validate()?;
            commands::cluster(&config, amap)
        }
        Command::Prefill { head_dict, mode, dump_masks } => {
            if let Some(m) = mode {
                config.mode = m.into();
            }
            config.dump_masks |= dump_masks;
            commands::prefill(&config, head_dict)
        }
        Command::Bench { lengths, reps, density, allow_large } => {
            if let Some(l) = lengths {
                config.bench.lengths = l;
            }
            if let Some(r) = reps {
                config.bench.repetitions = r;
            }
            if let Some(d) = density {
                config.bench.mask = shareprefill::bench::BenchMask::Random { density: d };
            }
            config.bench.allow_large |= allow_large;
            config.validate()?;
            commands::bench(&config)
        }
        Command::DiagnosePooling { random } => commands::diagnose_pooling(&config, random),
        Command::Similarity => commands::similarity(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHAREPREFILL_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
