use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use rssi_cell::commands::{self, FilterRun, ImportRun};
use rssi_cell::config::{self, EvaluateConfig, FilterMethod, GenerateConfig, SweepLConfig, SweepNodesConfig};
use rssi_cell::{models, Error, ExitCode, Result, DATA_DIR_ENV};

/// Cell-level localization from RSSI traces: generate, evaluate, sweep.
#[derive(Parser)]
#[command(name = "rssi-cell", version, about)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Directory of measurement-set CSVs.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Training sets per split.
    #[arg(long)]
    n_train: Option<usize>,
    /// Neighbours for the KNN classifier.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl DataArgs {
    fn data_dir(&self) -> Result<&Path> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| Error::Usage(format!("no dataset directory: pass --data-dir or set {DATA_DIR_ENV}")))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic measurement sets.
    Generate {
        /// Scenario JSON; the built-in default scenario when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and score the pipeline on every requested split.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated node names.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<String>>,
        #[arg(long = "moment-l")]
        moment_l: Option<usize>,
        /// none, hmm, hmm-adjacent or median(M).
        #[arg(long)]
        filter: Option<String>,
        /// Comma-separated split indices.
        #[arg(long, value_delimiter = ',')]
        splits: Option<Vec<usize>>,
    },
    /// Mean accuracy per moment length and filter.
    SweepL {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated L values.
        #[arg(long = "l-values", value_delimiter = ',')]
        l_values: Option<Vec<String>>,
        /// Comma-separated filters.
        #[arg(long, value_delimiter = ',')]
        filters: Option<Vec<String>>,
        /// Restrict to one node combination (comma-separated names).
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<String>>,
    },
    /// Mean accuracy per node combination, with a histogram.
    SweepNodes {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "moment-l")]
        moment_l: Option<usize>,
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Apply a saved HMM or a median filter to a predictions CSV.
    Filter {
        #[arg(long)]
        input: PathBuf,
        /// HMM JSON as written by `evaluate`.
        #[arg(long, conflicts_with = "median", required_unless_present = "median")]
        hmm: Option<PathBuf>,
        /// Median filter look-back M.
        #[arg(long)]
        median: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a dataset directory.
    Validate {
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
    },
    /// Convert wide RSSI CSV dumps into canonical set files.
    Import {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a manifest and check its outputs byte for byte.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn parse_l_values(raw: &[String]) -> Result<Vec<usize>> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Usage(format!("invalid L value {s:?}"))))
        .collect()
}

fn apply_common(data: &DataArgs, knn: &mut rssi_cell::core::classify::KnnParams, n_train: &mut Option<usize>, seed: &mut u64) {
    if let Some(k) = data.k {
        knn.k = k;
    }
    if data.n_train.is_some() {
        *n_train = data.n_train;
    }
    if let Some(s) = data.seed {
        *seed = s;
    }
}

fn run(cli: Cli) -> Result<String> {
    let outcome = match cli.command {
        Command::Generate { scenario, out, count, seed } => {
            let scenario = match scenario {
                Some(p) => models::load_scenario(&p)?,
                None => Default::default(),
            };
            commands::generate(&GenerateConfig { scenario, count, seed }, &out)?
        }
        Command::Evaluate { data, nodes, moment_l, filter, splits } => {
            let mut cfg: EvaluateConfig = config::load_or_default(data.config.as_deref())?;
            apply_common(&data, &mut cfg.knn, &mut cfg.n_train, &mut cfg.seed);
            if nodes.is_some() {
                cfg.nodes = nodes;
            }
            if let Some(l) = moment_l {
                cfg.moment_l = l;
            }
            if let Some(f) = filter {
                cfg.filter = config::parse_filter(&f)?;
            }
            if splits.is_some() {
                cfg.splits = splits;
            }
            commands::evaluate(data.data_dir()?, &cfg, &data.out, data.jobs)?
        }
        Command::SweepL { data, l_values, filters, nodes } => {
            let mut cfg: SweepLConfig = config::load_or_default(data.config.as_deref())?;
            apply_common(&data, &mut cfg.knn, &mut cfg.n_train, &mut cfg.seed);
            if let Some(raw) = l_values {
                cfg.l_values = parse_l_values(&raw)?;
            }
            if let Some(fs) = filters {
                cfg.filters = fs.iter().map(|f| config::parse_filter(f)).collect::<Result<_>>()?;
            }
            if let Some(n) = nodes {
                cfg.masks = Some(vec![n]);
            }
            commands::sweep_l(data.data_dir()?, &cfg, &data.out, data.jobs)?
        }
        Command::SweepNodes { data, moment_l, filter, bin_width } => {
            let mut cfg: SweepNodesConfig = config::load_or_default(data.config.as_deref())?;
            apply_common(&data, &mut cfg.knn, &mut cfg.n_train, &mut cfg.seed);
            if let Some(l) = moment_l {
                cfg.moment_l = l;
            }
            if let Some(f) = filter {
                cfg.filter = config::parse_filter(&f)?;
            }
            if let Some(w) = bin_width {
                cfg.bin_width = w;
            }
            commands::sweep_nodes(data.data_dir()?, &cfg, &data.out, data.jobs)?
        }
        Command::Filter { input, hmm, median, out } => {
            let method = match (hmm, median) {
                (Some(p), _) => FilterMethod::Hmm { model: models::load_hmm(&p)? },
                (None, Some(m)) => FilterMethod::Median { m },
                (None, None) => return Err(Error::Usage("pass --hmm or --median".into())),
            };
            commands::filter(&FilterRun { input, method }, &out)?
        }
        Command::Validate { data_dir } => {
            let dir = data_dir.ok_or_else(|| Error::Usage(format!("pass --data-dir or set {DATA_DIR_ENV}")))?;
            return commands::validate(&dir);
        }
        Command::Import { files, out } => commands::import(&ImportRun { files }, &out)?,
        Command::Replay { manifest, out, jobs } => commands::replay(&manifest, &out, jobs)?,
    };
    Ok(outcome.summary)
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert_ne!(code, ExitCode::Success);
            process::exit(code as i32);
        }
    }
}
