//! Experiment harness: TOML configuration, batch execution over variants and
//! trials, summary emission, cross-variant comparison, and the built-in
//! figure recipes.
//!
//! A config is a flat-sectioned TOML document; unknown keys are rejected.
//! Every piece of randomness in an experiment flows from the single `seed`
//! (trial streams, worker streams, fading, quantizers), so reruns are
//! byte-identical. Trials may run concurrently (capped by the
//! `GADMM_LAB_THREADS` environment variable); each writes its own trace
//! files and the summary is aggregated after the join.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::compression::{CensorNorm, CensorSchedule};
use crate::engine::{self, derive_seed, stream, Family, SolverConfig, Variant, STREAM_PROBLEM, STREAM_TOPOLOGY};
use crate::error::{Error, Result};
use crate::problem::{
    generate_synthetic, load_shards_per_file, load_shards_single_file, LossKind, ProblemInstance,
    SyntheticSpec,
};
use crate::topology::{build_chain, build_random_bipartite, Topology};

const STREAM_TRIAL_BASE: u64 = 1_000_000;

// ── Configuration schema ─────────────────────────────────────────────────

/// Data source selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpecConfig {
    pub kind: ProblemKind,
    pub workers: usize,
    pub dim: usize,
    pub rows_per_worker: usize,
    /// Additive Gaussian target noise of the synthetic generator.
    pub noise_sigma: f64,
    /// Feature-column scales span `10^feature_decades`, controlling the
    /// condition number of the stacked Gram matrix.
    pub feature_decades: f64,
    pub loss: LossKind,
    pub mu: f64,
    /// Single CSV with a worker-id first column.
    pub path: Option<String>,
    /// One header-less CSV per worker.
    pub files: Vec<String>,
}

impl Default for ProblemSpecConfig {
    fn default() -> Self {
        ProblemSpecConfig {
            kind: ProblemKind::Synthetic,
            workers: 10,
            dim: 6,
            rows_per_worker: 20,
            noise_sigma: 0.1,
            feature_decades: 0.0,
            loss: LossKind::LeastSquares,
            mu: 0.0,
            path: None,
            files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Chain,
    RandomBipartite,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpecConfig {
    pub kind: TopologyKind,
    /// Cross edges beyond the spanning tree for `random-bipartite`.
    pub extra_edges: usize,
    /// Reshuffle period in rounds; unset lets `d-gadmm` default to 10.
    pub shuffle_period: Option<usize>,
}

impl Default for TopologySpecConfig {
    fn default() -> Self {
        TopologySpecConfig { kind: TopologyKind::Chain, extra_edges: 0, shuffle_period: None }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpecConfig {
    pub rho: f64,
    pub rounds: usize,
    /// Relative target error; `inf` disables early stopping.
    pub target_error: f64,
    pub eta: Option<f64>,
    pub local_epochs: usize,
    pub bits: u32,
    pub censor_omega: f64,
    pub censor_zeta: f64,
    pub censor_norm: CensorNorm,
}

impl Default for SolverSpecConfig {
    fn default() -> Self {
        SolverSpecConfig {
            rho: 1.0,
            rounds: 2000,
            target_error: f64::INFINITY,
            eta: None,
            local_epochs: 1,
            bits: 2,
            censor_omega: 1.0,
            censor_zeta: 0.9,
            censor_norm: CensorNorm::Infinity,
        }
    }
}

/// Channel mode named the way the CLI spells it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModeName {
    Digital,
    Analog,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSpecConfig {
    /// Optional consistency check against the variant family.
    pub mode: Option<ChannelModeName>,
    pub snr_db: f64,
    pub bandwidth_hz: f64,
    pub slot_sec: f64,
    pub noise_psd: f64,
    pub blocklength: u64,
    pub pkt_error: f64,
    /// Analog MAC noise variance per coordinate.
    pub noise_var: f64,
    pub power_budget: f64,
}

impl Default for ChannelSpecConfig {
    fn default() -> Self {
        ChannelSpecConfig {
            mode: None,
            snr_db: 10.0,
            bandwidth_hz: 1e6,
            slot_sec: 1e-3,
            noise_psd: 1e-9,
            blocklength: 1000,
            pkt_error: 1e-3,
            noise_var: 1e-6,
            power_budget: 10.0,
        }
    }
}

/// Top-level experiment description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub out_dir: String,
    pub variants: Vec<Variant>,
    pub problem: ProblemSpecConfig,
    pub topology: TopologySpecConfig,
    pub solver: SolverSpecConfig,
    pub channel: ChannelSpecConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            trials: 1,
            out_dir: "out".into(),
            variants: vec![Variant::Gadmm],
            problem: ProblemSpecConfig::default(),
            topology: TopologySpecConfig::default(),
            solver: SolverSpecConfig::default(),
            channel: ChannelSpecConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("variants list is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        match self.problem.kind {
            ProblemKind::Synthetic => {
                if self.problem.path.is_some() || !self.problem.files.is_empty() {
                    return Err(Error::Config(
                        "synthetic problems take no csv keys (path, files)".into(),
                    ));
                }
                if self.problem.workers < 1 || self.problem.dim < 1 || self.problem.rows_per_worker < 1
                {
                    return Err(Error::Config(
                        "problem.workers, problem.dim, problem.rows_per_worker must be positive"
                            .into(),
                    ));
                }
            }
            ProblemKind::Csv => {
                let single = self.problem.path.is_some();
                let multi = !self.problem.files.is_empty();
                if single == multi {
                    return Err(Error::Config(
                        "csv problems need exactly one of problem.path (worker-id column) or problem.files (file per worker)".into(),
                    ));
                }
            }
        }
        if let Some(mode) = self.channel.mode {
            for v in &self.variants {
                if v.family() == Family::Fadmm {
                    let want = if *v == Variant::AFadmm {
                        ChannelModeName::Analog
                    } else {
                        ChannelModeName::Digital
                    };
                    if mode != want {
                        return Err(Error::Config(format!(
                            "variant {v} requires channel.mode = {}",
                            match want {
                                ChannelModeName::Analog => "analog",
                                ChannelModeName::Digital => "digital",
                            }
                        )));
                    }
                }
            }
        }
        for v in &self.variants {
            self.solver_config(*v).validate()?;
        }
        Ok(())
    }

    /// Assembles the per-variant solver configuration.
    pub fn solver_config(&self, variant: Variant) -> SolverConfig {
        // reshuffling is what distinguishes d-gadmm; the other variants
        // always run on the static topology
        let shuffle_period = match variant {
            Variant::DGadmm => self.topology.shuffle_period.unwrap_or(10),
            _ => 0,
        };
        SolverConfig {
            variant,
            rho: self.solver.rho,
            max_rounds: self.solver.rounds,
            target_error: self.solver.target_error,
            eta: self.solver.eta,
            local_epochs: self.solver.local_epochs,
            bits: self.solver.bits,
            censor: CensorSchedule {
                omega: self.solver.censor_omega,
                zeta: self.solver.censor_zeta,
                norm: self.solver.censor_norm,
            },
            shuffle_period,
            link: crate::channel::LinkBudget {
                snr: 10f64.powf(self.channel.snr_db / 10.0),
                bandwidth_hz: self.channel.bandwidth_hz,
                blocklength: self.channel.blocklength,
                target_error: self.channel.pkt_error,
                noise_psd: self.channel.noise_psd,
                slot_sec: self.channel.slot_sec,
            },
            analog: engine::AnalogConfig {
                noise_variance: self.channel.noise_var,
                power_budget: self.channel.power_budget,
                time_varying: true,
            },
        }
    }

    /// Builds the trial's problem instance (deterministic per trial seed).
    pub fn build_problem(&self, trial_seed: u64) -> Result<ProblemInstance> {
        match self.problem.kind {
            ProblemKind::Synthetic => generate_synthetic(
                &SyntheticSpec {
                    workers: self.problem.workers,
                    dim: self.problem.dim,
                    rows_per_worker: self.problem.rows_per_worker,
                    noise_sigma: self.problem.noise_sigma,
                    feature_decades: self.problem.feature_decades,
                    loss: self.problem.loss,
                    mu: self.problem.mu,
                },
                &mut stream(trial_seed, STREAM_PROBLEM),
            ),
            ProblemKind::Csv => {
                if let Some(path) = &self.problem.path {
                    load_shards_single_file(path, self.problem.loss, self.problem.mu)
                } else {
                    load_shards_per_file(&self.problem.files, self.problem.loss, self.problem.mu)
                }
            }
        }
    }

    pub fn build_topology(&self, n: usize, trial_seed: u64) -> Result<Topology> {
        match self.topology.kind {
            TopologyKind::Chain => build_chain(n),
            TopologyKind::RandomBipartite => build_random_bipartite(
                n,
                self.topology.extra_edges,
                &mut stream(trial_seed, STREAM_TOPOLOGY.wrapping_add(500)),
            ),
        }
    }
}

// ── Execution ────────────────────────────────────────────────────────────

/// Outcome of one (variant, trial) run, with costs evaluated at the target.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub variant: Variant,
    pub trial: usize,
    pub trace_path: PathBuf,
    pub reached_target: bool,
    pub rounds_to_target: f64,
    pub bits_to_target: f64,
    pub joules_to_target: f64,
    pub msgs_to_target: f64,
    pub final_rel_error: f64,
    pub problem_hash: String,
    pub fstar: f64,
}

/// Per-variant summary: medians over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub problem_hash: String,
    pub fstar: f64,
    pub target_error: f64,
    pub rounds_to_target: f64,
    pub cum_bits: f64,
    pub cum_joules: f64,
    pub total_msgs: f64,
    pub final_rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: Vec<SummaryRow>,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

fn thread_cap() -> usize {
    std::env::var("GADMM_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Runs every configured variant for every trial, writes one trace CSV per
/// (variant, trial) plus `summary.csv`, and returns the summary rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;

    let results: Mutex<Vec<Option<Vec<TrialOutcome>>>> =
        Mutex::new(vec![None; cfg.trials]);
    let next_trial = AtomicUsize::new(0);
    let workers = thread_cap().min(cfg.trials);

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| -> Result<()> {
                loop {
                    let trial = next_trial.fetch_add(1, Ordering::Relaxed);
                    if trial >= cfg.trials {
                        return Ok(());
                    }
                    let outcomes = run_trial(cfg, trial, &out_dir)?;
                    results.lock().expect("no poisoned lock")[trial] = Some(outcomes);
                }
            }));
        }
        for h in handles {
            h.join().expect("trial thread panicked")?;
        }
        Ok(())
    })?;

    let per_trial: Vec<Vec<TrialOutcome>> = results
        .into_inner()
        .expect("no poisoned lock")
        .into_iter()
        .map(|o| o.expect("every trial ran"))
        .collect();

    // refuse to aggregate across different problems
    let hash0 = per_trial[0][0].problem_hash.clone();
    if cfg.problem.kind == ProblemKind::Csv {
        for t in &per_trial {
            for o in t {
                if o.problem_hash != hash0 {
                    return Err(Error::ComparisonMismatch("problem hash drifted across trials".into()));
                }
            }
        }
    }

    let mut summary = Vec::new();
    for (vi, variant) in cfg.variants.iter().enumerate() {
        let rows: Vec<&TrialOutcome> = per_trial.iter().map(|t| &t[vi]).collect();
        summary.push(SummaryRow {
            variant: variant.name().to_string(),
            problem_hash: rows[0].problem_hash.clone(),
            fstar: median(rows.iter().map(|r| r.fstar)),
            target_error: cfg.solver.target_error,
            rounds_to_target: median(rows.iter().map(|r| r.rounds_to_target)),
            cum_bits: median(rows.iter().map(|r| r.bits_to_target)),
            cum_joules: median(rows.iter().map(|r| r.joules_to_target)),
            total_msgs: median(rows.iter().map(|r| r.msgs_to_target)),
            final_rel_error: median(rows.iter().map(|r| r.final_rel_error)),
        });
    }

    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_to_csv(&summary))?;

    let trace_paths = per_trial
        .iter()
        .flat_map(|t| t.iter().map(|o| o.trace_path.clone()))
        .collect();
    Ok(ExperimentOutput { summary, summary_path, trace_paths })
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, out_dir: &Path) -> Result<Vec<TrialOutcome>> {
    let trial_seed = derive_seed(cfg.seed, STREAM_TRIAL_BASE + trial as u64);
    let problem = cfg.build_problem(trial_seed)?;
    // star-topology variants run fine on problems a chain cannot span
    let topology = if cfg.variants.iter().any(|v| v.family() == Family::Decentralized) {
        Some(cfg.build_topology(problem.num_workers(), trial_seed)?)
    } else {
        None
    };
    let mut outcomes = Vec::with_capacity(cfg.variants.len());
    for variant in &cfg.variants {
        let solver = cfg.solver_config(*variant);
        let trace = engine::run(&problem, topology.as_ref(), &solver, trial_seed)?;
        let path = out_dir.join(format!("trace_{}_{trial}.csv", variant.name()));
        trace.write_csv(&path)?;
        let target = cfg.solver.target_error;
        // with early stopping disabled the summary reports end-of-run totals
        let (reached, rounds, bits, joules, msgs) = if target.is_finite() {
            let rounds = trace.rounds_to_target(target);
            let (b, j, m) = trace.cost_at_target(target);
            (rounds.is_some(), rounds.map(|r| r as f64).unwrap_or(f64::INFINITY), b, j, m)
        } else {
            let last = trace.rows.last().expect("trace has rows");
            (false, last.round as f64, last.cum_bits, last.cum_joules, trace.total_messages())
        };
        outcomes.push(TrialOutcome {
            variant: *variant,
            trial,
            trace_path: path,
            reached_target: reached,
            rounds_to_target: rounds,
            bits_to_target: bits as f64,
            joules_to_target: joules,
            msgs_to_target: msgs as f64,
            final_rel_error: trace.final_error() / trace.fstar.abs().max(f64::MIN_POSITIVE),
            problem_hash: trace.problem_hash.clone(),
            fstar: trace.fstar,
        });
    }
    Ok(outcomes)
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ── Summary and comparison I/O ───────────────────────────────────────────

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "variant,problem_hash,fstar,target_error,rounds_to_target,cum_bits,cum_joules,total_msgs,final_rel_error\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.variant,
            r.problem_hash,
            r.fstar,
            r.target_error,
            r.rounds_to_target,
            r.cum_bits,
            r.cum_joules,
            r.total_msgs,
            r.final_rel_error
        );
    }
    out
}

pub fn summary_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::invalid(format!("summary row {i}: {} fields, expected 9", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|e| Error::invalid(format!("summary row {i}: {e}")))
        };
        rows.push(SummaryRow {
            variant: f[0].to_string(),
            problem_hash: f[1].to_string(),
            fstar: num(f[2])?,
            target_error: num(f[3])?,
            rounds_to_target: num(f[4])?,
            cum_bits: num(f[5])?,
            cum_joules: num(f[6])?,
            total_msgs: num(f[7])?,
            final_rel_error: num(f[8])?,
        });
    }
    Ok(rows)
}

/// One comparison line: costs normalized to the first (baseline) variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub variant: String,
    pub bits_ratio: f64,
    pub joules_ratio: f64,
    pub rounds_ratio: f64,
    pub msgs_ratio: f64,
}

/// Normalizes every summary row against the first one. Refuses summaries
/// whose problem hashes differ.
pub fn compare_variants(rows: &[SummaryRow]) -> Result<Vec<ComparisonRow>> {
    if rows.len() < 2 {
        return Err(Error::invalid("comparison needs at least two variant summaries"));
    }
    let base = &rows[0];
    for r in rows {
        if r.problem_hash != base.problem_hash {
            return Err(Error::ComparisonMismatch(format!(
                "variant {} ran problem {} but baseline {} ran {}",
                r.variant, r.problem_hash, base.variant, base.problem_hash
            )));
        }
    }
    Ok(rows
        .iter()
        .map(|r| ComparisonRow {
            variant: r.variant.clone(),
            bits_ratio: r.cum_bits / base.cum_bits,
            joules_ratio: r.cum_joules / base.cum_joules,
            rounds_ratio: r.rounds_to_target / base.rounds_to_target,
            msgs_ratio: r.total_msgs / base.total_msgs,
        })
        .collect())
}

pub fn comparison_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("variant,bits_ratio,joules_ratio,rounds_ratio,msgs_ratio\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.variant, r.bits_ratio, r.joules_ratio, r.rounds_ratio, r.msgs_ratio
        );
    }
    out
}

/// Emits a gnuplot script plotting objective error against rounds for every
/// trace of trial 0.
pub fn write_gnuplot(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let mut script = String::from(
        "set datafile separator \",\"\nset logscale y\nset xlabel \"round\"\nset ylabel \"|F - F*|\"\nset key outside\nplot \\\n",
    );
    let lines: Vec<String> = cfg
        .variants
        .iter()
        .map(|v| {
            format!(
                "  \"trace_{}_0.csv\" using 1:2 with lines title \"{}\"",
                v.name(),
                v.name()
            )
        })
        .collect();
    script.push_str(&lines.join(", \\\n"));
    script.push('\n');
    let path = out_dir.join("plot.gp");
    std::fs::write(&path, script)?;
    Ok(path)
}

// ── Recipes ──────────────────────────────────────────────────────────────

pub const RECIPE_NAMES: [&str; 4] = ["fig4", "fig5", "fig6", "fig7a"];

/// Built-in experiment recipes with every free parameter pinned
/// (synthetic noise 0.1, zero initial models, rho = 1).
pub fn recipe(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        // quantized decentralized updates against full precision and a
        // quantized-gradient parameter-server baseline, priced in energy
        "fig4" => {
            cfg.seed = 7;
            cfg.out_dir = "out/fig4".into();
            cfg.variants = vec![Variant::Gadmm, Variant::QGadmm, Variant::QuantizedGd];
            cfg.problem.workers = 50;
            cfg.problem.dim = 6;
            // few rows per worker so consensus does real work, and strongly
            // scaled features so first-order baselines feel the conditioning
            cfg.problem.rows_per_worker = 6;
            cfg.problem.feature_decades = 2.0;
            cfg.solver.bits = 2;
            cfg.solver.rounds = 400_000;
            cfg.solver.target_error = 1e-2;
        }
        // dynamic neighbor reshuffling against the static chain
        "fig5" => {
            cfg.seed = 11;
            cfg.out_dir = "out/fig5".into();
            cfg.variants = vec![Variant::Gadmm, Variant::DGadmm];
            cfg.trials = 10;
            cfg.problem.workers = 20;
            cfg.problem.dim = 6;
            cfg.problem.rows_per_worker = 6;
            cfg.topology.shuffle_period = Some(10);
            cfg.solver.rounds = 30_000;
            cfg.solver.target_error = 1e-4;
        }
        // censoring and censoring-plus-quantization over a bipartite graph
        "fig6" => {
            cfg.seed = 19;
            cfg.out_dir = "out/fig6".into();
            cfg.variants = vec![Variant::Ggadmm, Variant::CGgadmm, Variant::CQggadmm];
            cfg.problem.workers = 20;
            cfg.problem.dim = 6;
            cfg.problem.rows_per_worker = 6;
            cfg.topology.kind = TopologyKind::RandomBipartite;
            cfg.topology.extra_edges = 5;
            cfg.solver.bits = 2;
            cfg.solver.censor_omega = 1.0;
            cfg.solver.censor_zeta = 0.85;
            cfg.solver.rounds = 30_000;
            cfg.solver.target_error = 1e-3;
        }
        // analog over-the-air aggregation against orthogonal digital uplinks
        "fig7a" => {
            cfg.seed = 23;
            cfg.out_dir = "out/fig7a".into();
            cfg.variants = vec![Variant::AFadmm, Variant::DFadmm, Variant::DFadmm10x];
            cfg.problem.workers = 50;
            cfg.problem.dim = 6;
            cfg.channel.noise_var = 1e-6;
            cfg.channel.power_budget = 10.0;
            cfg.solver.rounds = 20_000;
            cfg.solver.target_error = 1e-4;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown recipe `{other}`; expected one of {}",
                RECIPE_NAMES.join(", ")
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
