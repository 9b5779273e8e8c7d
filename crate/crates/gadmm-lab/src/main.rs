//! `gadmm-lab`: run decentralized-optimization experiments, compare variant
//! summaries, and reproduce the built-in figure recipes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver divergence,
//! 4 i/o failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gadmm_lab::compression::CensorNorm;
use gadmm_lab::engine::Variant;
use gadmm_lab::error::{Error, Result};
use gadmm_lab::experiment::{
    compare_variants, comparison_to_csv, recipe, run_experiment, summary_from_csv,
    summary_to_csv, write_gnuplot, ChannelModeName, ExperimentConfig, ProblemKind, TopologyKind,
};
use gadmm_lab::problem::LossKind;

#[derive(Parser)]
#[command(name = "gadmm-lab", version, about = "communication-efficient decentralized optimization lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and/or flags.
    Run(Box<RunArgs>),
    /// Normalize variant summaries against the first entry.
    Compare(CompareArgs),
    /// Run one of the built-in figure recipes.
    Recipe(RecipeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; flags override file keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Solver variant (repeatable).
    #[arg(long = "variant")]
    variants: Vec<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory, or a single `.csv` path when running exactly one
    /// variant for one trial.
    #[arg(long)]
    out: Option<String>,
    /// Also emit a gnuplot script next to the traces.
    #[arg(long)]
    gnuplot: bool,

    // problem
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rows_per_worker: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    feature_decades: Option<f64>,
    /// least-squares | ridge | logistic
    #[arg(long, value_parser = parse_loss)]
    loss: Option<LossKind>,
    #[arg(long)]
    mu: Option<f64>,
    /// Single CSV shard file with a worker-id first column.
    #[arg(long)]
    data_file: Option<String>,
    /// Per-worker CSV shard files (repeatable).
    #[arg(long = "data-files")]
    data_files: Vec<String>,

    // topology
    /// chain | random-bipartite
    #[arg(long, value_parser = parse_topology)]
    topology: Option<TopologyKind>,
    #[arg(long)]
    extra_edges: Option<usize>,
    #[arg(long)]
    shuffle_period: Option<usize>,

    // solver
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    target_error: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    censor_omega: Option<f64>,
    #[arg(long)]
    censor_zeta: Option<f64>,
    /// inf | l2
    #[arg(long, value_parser = parse_censor_norm)]
    censor_norm: Option<CensorNorm>,

    // channel
    /// digital | analog
    #[arg(long, value_parser = parse_channel_mode)]
    channel: Option<ChannelModeName>,
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    #[arg(long)]
    slot_sec: Option<f64>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    power_budget: Option<f64>,
    #[arg(long)]
    blocklength: Option<u64>,
    #[arg(long)]
    pkt_error: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Summary CSV files produced by `run` or `recipe`.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    /// Write the comparison CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecipeArgs {
    /// Recipe name: fig4, fig5, fig6, or fig7a.
    name: String,
    /// Override the recipe's output directory.
    #[arg(long)]
    out: Option<String>,
    /// Also emit a gnuplot script next to the traces.
    #[arg(long)]
    gnuplot: bool,
    /// Print the recipe's config as TOML and exit without running.
    #[arg(long)]
    emit_config: bool,
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    match s {
        "least-squares" => Ok(LossKind::LeastSquares),
        "ridge" => Ok(LossKind::Ridge),
        "logistic" => Ok(LossKind::Logistic),
        _ => Err(format!("unknown loss `{s}`; expected least-squares, ridge, or logistic")),
    }
}

fn parse_topology(s: &str) -> std::result::Result<TopologyKind, String> {
    match s {
        "chain" => Ok(TopologyKind::Chain),
        "random-bipartite" => Ok(TopologyKind::RandomBipartite),
        _ => Err(format!("unknown topology `{s}`; expected chain or random-bipartite")),
    }
}

fn parse_censor_norm(s: &str) -> std::result::Result<CensorNorm, String> {
    match s {
        "inf" | "infinity" => Ok(CensorNorm::Infinity),
        "l2" => Ok(CensorNorm::L2),
        _ => Err(format!("unknown censor norm `{s}`; expected inf or l2")),
    }
}

fn parse_channel_mode(s: &str) -> std::result::Result<ChannelModeName, String> {
    match s {
        "digital" => Ok(ChannelModeName::Digital),
        "analog" => Ok(ChannelModeName::Analog),
        _ => Err(format!("unknown channel mode `{s}`; expected digital or analog")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Compare(args) => cmd_compare(args),
        Command::Recipe(args) => cmd_recipe(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, &args)?;

    // `--out something.csv` with a single job writes the trace right there
    let single_csv = args
        .out
        .as_ref()
        .filter(|o| o.ends_with(".csv"))
        .map(PathBuf::from);
    if let Some(csv_path) = &single_csv {
        if cfg.variants.len() != 1 || cfg.trials != 1 {
            return Err(Error::Config(
                "--out <file.csv> needs exactly one variant and one trial; use a directory otherwise"
                    .into(),
            ));
        }
        let parent = csv_path.parent().filter(|p| !p.as_os_str().is_empty());
        cfg.out_dir = parent.map(|p| p.to_string_lossy().into_owned()).unwrap_or_else(|| ".".into());
    }

    let output = run_experiment(&cfg)?;
    if args.gnuplot {
        write_gnuplot(&cfg, std::path::Path::new(&cfg.out_dir))?;
    }
    if let Some(csv_path) = &single_csv {
        let produced = &output.trace_paths[0];
        if produced != csv_path {
            std::fs::rename(produced, csv_path)?;
        }
        println!("trace written to {}", csv_path.display());
    }
    print!("{}", summary_to_csv(&output.summary));
    eprintln!("summary written to {}", output.summary_path.display());
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if !args.variants.is_empty() {
        cfg.variants = args.variants.clone();
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = &args.out {
        if !v.ends_with(".csv") {
            cfg.out_dir = v.clone();
        }
    }
    if let Some(v) = args.workers {
        cfg.problem.workers = v;
    }
    if let Some(v) = args.dim {
        cfg.problem.dim = v;
    }
    if let Some(v) = args.rows_per_worker {
        cfg.problem.rows_per_worker = v;
    }
    if let Some(v) = args.noise_sigma {
        cfg.problem.noise_sigma = v;
    }
    if let Some(v) = args.feature_decades {
        cfg.problem.feature_decades = v;
    }
    if let Some(v) = args.loss {
        cfg.problem.loss = v;
    }
    if let Some(v) = args.mu {
        cfg.problem.mu = v;
    }
    if let Some(v) = &args.data_file {
        cfg.problem.kind = ProblemKind::Csv;
        cfg.problem.path = Some(v.clone());
    }
    if !args.data_files.is_empty() {
        cfg.problem.kind = ProblemKind::Csv;
        cfg.problem.files = args.data_files.clone();
    }
    if let Some(v) = args.topology {
        cfg.topology.kind = v;
    }
    if let Some(v) = args.extra_edges {
        cfg.topology.extra_edges = v;
    }
    if let Some(v) = args.shuffle_period {
        cfg.topology.shuffle_period = Some(v);
    }
    if let Some(v) = args.rho {
        cfg.solver.rho = v;
    }
    if let Some(v) = args.rounds {
        cfg.solver.rounds = v;
    }
    if let Some(v) = args.target_error {
        cfg.solver.target_error = v;
    }
    if let Some(v) = args.eta {
        cfg.solver.eta = Some(v);
    }
    if let Some(v) = args.epochs {
        cfg.solver.local_epochs = v;
    }
    if let Some(v) = args.bits {
        cfg.solver.bits = v;
    }
    if let Some(v) = args.censor_omega {
        cfg.solver.censor_omega = v;
    }
    if let Some(v) = args.censor_zeta {
        cfg.solver.censor_zeta = v;
    }
    if let Some(v) = args.censor_norm {
        cfg.solver.censor_norm = v;
    }
    if let Some(v) = args.channel {
        cfg.channel.mode = Some(v);
    }
    if let Some(v) = args.snr_db {
        cfg.channel.snr_db = v;
    }
    if let Some(v) = args.bandwidth_hz {
        cfg.channel.bandwidth_hz = v;
    }
    if let Some(v) = args.slot_sec {
        cfg.channel.slot_sec = v;
    }
    if let Some(v) = args.noise_var {
        cfg.channel.noise_var = v;
    }
    if let Some(v) = args.power_budget {
        cfg.channel.power_budget = v;
    }
    if let Some(v) = args.blocklength {
        cfg.channel.blocklength = v;
    }
    if let Some(v) = args.pkt_error {
        cfg.channel.pkt_error = v;
    }
    cfg.validate()
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in &args.summaries {
        let text = std::fs::read_to_string(path)?;
        rows.extend(summary_from_csv(&text)?);
    }
    let report = compare_variants(&rows)?;
    let csv = comparison_to_csv(&report);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_recipe(args: RecipeArgs) -> Result<()> {
    let mut cfg = recipe(&args.name)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if args.emit_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    eprintln!(
        "running recipe {} ({} variants, {} trial{}) ...",
        args.name,
        cfg.variants.len(),
        cfg.trials,
        if cfg.trials == 1 { "" } else { "s" }
    );
    let output = run_experiment(&cfg)?;
    if args.gnuplot {
        write_gnuplot(&cfg, std::path::Path::new(&cfg.out_dir))?;
    }
    print!("{}", summary_to_csv(&output.summary));
    eprintln!("summary written to {}", output.summary_path.display());
    Ok(())
}
