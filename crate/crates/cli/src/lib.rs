//! The `agentlab` command line: solve the benchmarks, scan scenario
//! complexity, run simulations, analyze transcripts and render reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use agentlab_core::agent::PersonaId;
pub use config::CliConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "agentlab", version, about = "Battery arbitrage laboratory: benchmarks, agent simulations, transcript analytics and reports")]
pub struct Cli {
    /// TOML config file. Built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override battery.horizon (days).
    #[arg(long, global = true, value_name = "DAYS")]
    pub horizon: Option<u32>,
    /// Override battery.initial_soc_kwh.
    #[arg(long, global = true, value_name = "KWH")]
    pub initial_soc: Option<f64>,
    /// Override output_dir.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the DP benchmark, write the policy JSON and print E[DP], E[G] and rho.
    SolveDp(SolveDpArgs),
    /// Run Monte Carlo repetitions of a benchmark or agent policy.
    Simulate(SimulateArgs),
    /// Compute rho on sampled price paths and bucket them by difficulty.
    Scan(ScanArgs),
    /// Cluster agent transcripts and measure treatment/control shifts.
    Analyze(AnalyzeArgs),
    /// Render SVG figures and their CSV data from run directories.
    Report(ReportArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
pub struct SolveDpArgs {
    /// Policy JSON path [default: <output_dir>/dp_policy.json].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Dp,
    Greedy,
    Agent,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    /// Agent persona(s); one run per persona.
    #[arg(long, value_delimiter = ',', default_value = "thinker")]
    pub persona: Vec<PersonaId>,
    /// Agent backend: `http`, or `mock:<script>` with script one of dp, greedy,
    /// hold, blackout-discharge, reserve-keeper, greedy-reserve-keeper, each
    /// optionally followed by +switch and/or +flaky.
    #[arg(long, default_value = "mock:dp")]
    pub backend: String,
    /// Sample repetition i's path with seed PATH_SEED + i [default: run.seed].
    #[arg(long, conflicts_with = "path_file")]
    pub path_seed: Option<u64>,
    /// Use one fixed path for every repetition: dollar prices separated by
    /// commas or whitespace, or a JSON object {"prices": [cents, ...]}.
    #[arg(long, value_name = "FILE")]
    pub path_file: Option<PathBuf>,
    /// Blackout days, e.g. 8,9. Without a value, uses run.blackout_days.
    #[arg(long, value_name = "DAYS", num_args = 0..=1)]
    pub blackout: Option<Option<String>>,
    /// Run a treatment arm (with blackout) and a control arm on identical paths.
    #[arg(long)]
    pub paired: bool,
    /// Repetitions [default: run.benchmark_repetitions for dp/greedy, run.repetitions for agents].
    #[arg(long)]
    pub reps: Option<u32>,
    /// Base seed of agent repetitions [default: run.seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run name [default: derived from policy, persona and backend].
    #[arg(long)]
    pub run_id: Option<String>,
    /// Concurrent repetitions [default: run.workers].
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Number of sampled paths [default: run.benchmark_repetitions].
    #[arg(long)]
    pub n_paths: Option<u32>,
    /// First path seed [default: run.seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV path [default: <output_dir>/scan.csv].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VectorMode {
    /// Local TF-IDF vectors.
    Tfidf,
    /// Vectors from the configured embeddings endpoint.
    Embed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterSpaceArg {
    /// The document vectors.
    Vectors,
    /// The 2-D t-SNE layout.
    Tsne,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Run directories, or directories containing run directories.
    #[arg(long, num_args = 1.., required = true, value_name = "DIR")]
    pub runs: Vec<PathBuf>,
    /// Number of clusters [default: analysis.k].
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value = "tfidf")]
    pub mode: VectorMode,
    /// Space k-means runs in.
    #[arg(long, value_enum, default_value = "vectors")]
    pub cluster_space: ClusterSpaceArg,
    /// t-SNE perplexity [default: analysis.perplexity].
    #[arg(long)]
    pub perplexity: Option<f64>,
    /// t-SNE iterations [default: analysis.tsne_iterations].
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Output directory [default: <output_dir>/analysis].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories, or directories containing run directories.
    #[arg(long, num_args = 1.., required = true, value_name = "DIR")]
    pub runs: Vec<PathBuf>,
    /// An `analyze` output directory whose t-SNE layout is also drawn.
    #[arg(long, value_name = "DIR")]
    pub analysis: Option<PathBuf>,
    /// Output directory [default: <output_dir>/report].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Cli {
    /// Loads the config file and applies the global overrides.
    pub fn resolve_config(&self) -> Result<CliConfig, CliError> {
        let mut cfg = CliConfig::load(self.config.as_deref())?;
        if let Some(h) = self.horizon {
            cfg.battery.horizon = h;
        }
        if let Some(s) = self.initial_soc {
            cfg.battery.initial_soc_kwh = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.output_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::SolveDp(args) => commands::solve_dp::run(&cfg, args, out),
        Command::Simulate(args) => commands::simulate::run(&cfg, args, out).map(|_| ()),
        Command::Scan(args) => commands::scan::run(&cfg, args, out).map(|_| ()),
        Command::Analyze(args) => commands::analyze::run(&cfg, args, out).map(|_| ()),
        Command::Report(args) => commands::report::run(&cfg, args, out).map(|_| ()),
        Command::Config => {
            write!(out, "{}", cfg.to_toml())?;
            Ok(())
        }
    }
}
