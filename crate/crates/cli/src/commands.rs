use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sfgroup::dgp::{generate, Design};
use sfgroup::individual::NoiseFeature;
use sfgroup::montecarlo::{render_tables, sensitivity_sweep, McConfig, MonteCarloReport};
use sfgroup::{estimate, PipelineConfig};

use crate::data::{read_panel, write_panel, write_truth, ColumnMap};
use crate::report::{build, summary_table, write_curves, EstimateResult};
use crate::{io_error, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "sfgroup", version, about = "Panel stochastic frontiers with latent groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a design to a long-format CSV plus truth sidecar.
    Simulate(SimulateArgs),
    /// Estimate groups, frontiers and the inefficiency law from a CSV panel.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study described by a TOML file.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// DGP1U, DGP1M, DGP2U, DGP2M, DGP3U, DGP3M or BANK.
    #[arg(long)]
    pub design: String,
    #[arg(short = 'n', long)]
    pub firms: usize,
    #[arg(short = 't', long)]
    pub periods: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, default_value = "firm_id")]
    pub firm_col: String,
    #[arg(long, default_value = "t")]
    pub time_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Comma-separated regressor columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub x_cols: Option<Vec<String>>,
    /// Firm-level sieve size; ⌊T^{1/5}⌋ (at least 2) by default.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c_lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_tilde: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Variance)]
    pub noise_feature: NoiseArg,
    /// Seed of the random mixture start.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long)]
    pub emit_curves: bool,
    /// Points on the frontier grid.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum NoiseArg {
    Variance,
    Stddev,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// TOML configuration; optional with `--full`.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// All six designs on the nine published sizes, 500 replications and the
    /// full penalty grid. Takes hours.
    #[arg(long)]
    pub full: bool,
    /// Overrides `workers` from the configuration.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(short, long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Estimate(a) => estimate_cmd(&a).map(|_| ()),
        Command::Montecarlo(a) => montecarlo(&a).map(|_| ()),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let design: Design = args.design.parse()?;
    let (panel, truth) = generate(design, args.firms, args.periods, args.seed)?;
    write_panel(&args.out, &panel)?;
    write_truth(&args.out, &panel, &truth)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn estimate_cmd(args: &EstimateArgs) -> Result<EstimateResult> {
    if args.kmax == 0 {
        return Err(CliError::input("--kmax must be at least 1"));
    }
    let columns = ColumnMap {
        firm: args.firm_col.clone(),
        time: args.time_col.clone(),
        outcome: args.y_col.clone(),
        regressors: args.x_cols.clone(),
    };
    let panel = read_panel(&args.input, &columns)?;
    let mut config = PipelineConfig {
        m: args.m,
        k_max: args.kmax,
        noise_feature: match args.noise_feature {
            NoiseArg::Variance => NoiseFeature::Variance,
            NoiseArg::Stddev => NoiseFeature::StdDev,
        },
        c_lambda: args.c_lambda,
        c_tilde: args.c_tilde,
        ..PipelineConfig::default()
    };
    config.mle.seed = args.seed;
    let est = with_workers(args.workers, || estimate(&panel, &config))??;
    let result = build(&args.input.display().to_string(), &panel, &config, &est, args.grid)?;

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_json(&dir.join("result.json"), &result)?;
    write_text(&dir.join("summary.txt"), &summary_table(&result))?;
    if args.emit_curves {
        write_curves(&dir.join("curves"), &result.curves)?;
    }
    Ok(result)
}

/// Parse a Monte Carlo TOML file; unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<McConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let config: McConfig = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    config.validate().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

pub fn montecarlo(args: &MonteCarloArgs) -> Result<Vec<MonteCarloReport>> {
    let mut config = match (&args.config, args.full) {
        (_, true) => McConfig::paper_full(),
        (Some(path), false) => load_config(path)?,
        (None, false) => return Err(CliError::config("montecarlo needs --config <file> or --full")),
    };
    if let Some(w) = args.workers {
        config.workers = w;
    }
    let reports = sensitivity_sweep(&config)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    write_json(&dir.join("report.json"), &reports)?;
    write_text(&dir.join("tables.txt"), &render_tables(&reports))?;
    Ok(reports)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    write_text(path, &(text + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
