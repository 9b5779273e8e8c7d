//! Round orchestration for the GADMM family and the parameter-server
//! baselines, plus the experiment run loop that emits metric traces.
//!
//! A decentralized round proceeds in two half-duplex phases: every head
//! solves its augmented-Lagrangian subproblem against the tail models cached
//! from the previous round, heads transmit (possibly quantized or censored),
//! every tail solves against the head models received in the current round,
//! tails transmit, and finally each worker advances the dual on every
//! incident edge by `rho * (head reconstruction - tail reconstruction)`.
//! Duals are driven by the reconstructions both endpoints share, so the two
//! copies of each edge dual stay bit-identical without extra communication.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{transmit_energy, LinkBudget};
use crate::compression::{
    censor_decision, payload_bits, CensorNorm, CensorSchedule, PayloadMode, QuantizerState,
};
use crate::error::{Error, Result};
use crate::problem::{problem_hash, DualVector, ModelVector, ProblemInstance, ProxTerm};
use crate::topology::{reshuffle, Topology};
use crate::trace::{MetricsTrace, TraceRow};

/// Divergence guard: abort when the objective error exceeds this multiple of
/// the initial error.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Guard below which a fading gain is treated as a dead channel.
pub const GAIN_GUARD: f64 = 1e-9;

// ── RNG stream derivation ────────────────────────────────────────────────

/// splitmix64 finalizer; every RNG stream in a run is derived from the
/// experiment seed and a stream label so reruns are bit-identical.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed.wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const STREAM_PROBLEM: u64 = 1;
pub const STREAM_TOPOLOGY: u64 = 2;
pub const STREAM_FADING: u64 = 3;
pub const STREAM_WORKER_BASE: u64 = 1000;

pub fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

// ── Variants ─────────────────────────────────────────────────────────────

/// Solver variants the run loop dispatches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    #[serde(rename = "gadmm")]
    Gadmm,
    #[serde(rename = "ggadmm")]
    Ggadmm,
    #[serde(rename = "d-gadmm")]
    DGadmm,
    #[serde(rename = "q-gadmm")]
    QGadmm,
    #[serde(rename = "c-ggadmm")]
    CGgadmm,
    #[serde(rename = "c-qggadmm")]
    CQggadmm,
    #[serde(rename = "ps-admm")]
    PsAdmm,
    #[serde(rename = "fedavg-gd")]
    FedavgGd,
    #[serde(rename = "quantized-gd")]
    QuantizedGd,
    #[serde(rename = "a-fadmm")]
    AFadmm,
    #[serde(rename = "d-fadmm")]
    DFadmm,
    #[serde(rename = "d-fadmm-10x")]
    DFadmm10x,
}

/// Execution family a variant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Head/tail rounds over a bipartite worker graph.
    Decentralized,
    /// Star topology around a parameter server.
    ParameterServer,
    /// Federated ADMM over the modeled uplink channel.
    Fadmm,
}

impl Variant {
    pub const ALL: [Variant; 12] = [
        Variant::Gadmm,
        Variant::Ggadmm,
        Variant::DGadmm,
        Variant::QGadmm,
        Variant::CGgadmm,
        Variant::CQggadmm,
        Variant::PsAdmm,
        Variant::FedavgGd,
        Variant::QuantizedGd,
        Variant::AFadmm,
        Variant::DFadmm,
        Variant::DFadmm10x,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Gadmm => "gadmm",
            Variant::Ggadmm => "ggadmm",
            Variant::DGadmm => "d-gadmm",
            Variant::QGadmm => "q-gadmm",
            Variant::CGgadmm => "c-ggadmm",
            Variant::CQggadmm => "c-qggadmm",
            Variant::PsAdmm => "ps-admm",
            Variant::FedavgGd => "fedavg-gd",
            Variant::QuantizedGd => "quantized-gd",
            Variant::AFadmm => "a-fadmm",
            Variant::DFadmm => "d-fadmm",
            Variant::DFadmm10x => "d-fadmm-10x",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Variant::Gadmm
            | Variant::Ggadmm
            | Variant::DGadmm
            | Variant::QGadmm
            | Variant::CGgadmm
            | Variant::CQggadmm => Family::Decentralized,
            Variant::PsAdmm | Variant::FedavgGd | Variant::QuantizedGd => Family::ParameterServer,
            Variant::AFadmm | Variant::DFadmm | Variant::DFadmm10x => Family::Fadmm,
        }
    }

    /// Whether uplinks carry quantized payloads (`b d + 32` bits).
    pub fn quantized(&self) -> bool {
        matches!(self, Variant::QGadmm | Variant::CQggadmm | Variant::QuantizedGd)
    }

    /// Whether transmissions pass the censoring rule first.
    pub fn censored(&self) -> bool {
        matches!(self, Variant::CGgadmm | Variant::CQggadmm)
    }

    pub fn payload_mode(&self) -> PayloadMode {
        if self.quantized() {
            PayloadMode::Quantized
        } else {
            PayloadMode::FullPrecision
        }
    }

    /// Digital bandwidth multiplier of the federated-ADMM baselines.
    pub fn bandwidth_multiplier(&self) -> f64 {
        match self {
            Variant::DFadmm10x => 10.0,
            _ => 1.0,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .find(|v| v.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown variant `{s}`; expected one of {}",
                    Variant::ALL.map(|v| v.name()).join(", ")
                ))
            })
    }
}

// ── Configuration ────────────────────────────────────────────────────────

/// Analog multiple-access parameters used by the federated-ADMM variants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnalogConfig {
    /// Complex noise variance per coordinate at the server.
    pub noise_variance: f64,
    /// Per-worker transmit power budget.
    pub power_budget: f64,
    /// Redraw fading every round (block fading) instead of once per run.
    pub time_varying: bool,
}

impl Default for AnalogConfig {
    fn default() -> Self {
        AnalogConfig { noise_variance: 1e-6, power_budget: 10.0, time_varying: true }
    }
}

/// Full solver configuration: one active variant plus the quantizer,
/// censoring, and channel sub-configurations the variant may consume.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    /// ADMM penalty.
    pub rho: f64,
    pub max_rounds: usize,
    /// Relative objective-error stopping target; a non-finite value disables
    /// early stopping.
    pub target_error: f64,
    /// Gradient step for the GD baselines; derived from the data when unset.
    pub eta: Option<f64>,
    /// Local epochs per round for `fedavg-gd`.
    pub local_epochs: usize,
    /// Bits per coordinate for the quantized variants.
    pub bits: u32,
    pub censor: CensorSchedule,
    /// Reshuffle period in rounds for dynamic topologies (0 disables).
    pub shuffle_period: usize,
    pub link: LinkBudget,
    pub analog: AnalogConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variant: Variant::Gadmm,
            rho: 1.0,
            max_rounds: 2000,
            target_error: f64::INFINITY,
            eta: None,
            local_epochs: 1,
            bits: 2,
            censor: CensorSchedule { omega: 1.0, zeta: 0.9, norm: CensorNorm::Infinity },
            shuffle_period: 0,
            link: LinkBudget {
                snr: 10.0,
                bandwidth_hz: 1e6,
                blocklength: 1000,
                target_error: 1e-3,
                noise_psd: 1e-9,
                slot_sec: 1e-3,
            },
            analog: AnalogConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_rounds == 0 {
            return Err(Error::invalid("max_rounds must be at least 1"));
        }
        if self.target_error.is_finite() && self.target_error < 0.0 {
            return Err(Error::invalid("target_error must be nonnegative"));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) {
                return Err(Error::invalid(format!("eta must be positive, got {eta}")));
            }
        }
        if self.local_epochs == 0 {
            return Err(Error::invalid("local_epochs must be at least 1"));
        }
        if self.variant.quantized() && !(1..=32).contains(&self.bits) {
            return Err(Error::invalid(format!("bits must be in 1..=32, got {}", self.bits)));
        }
        if self.variant.censored() {
            CensorSchedule::new(self.censor.omega, self.censor.zeta, self.censor.norm)?;
        }
        if self.variant == Variant::DGadmm && self.shuffle_period == 0 {
            return Err(Error::invalid("d-gadmm requires shuffle_period >= 1"));
        }
        if self.variant.family() == Family::Fadmm {
            if !(self.analog.noise_variance >= 0.0) {
                return Err(Error::invalid("analog noise_variance must be >= 0"));
            }
            if !(self.analog.power_budget > 0.0) {
                return Err(Error::invalid("analog power_budget must be positive"));
            }
        }
        self.link.validate()
    }

    /// Step size for the GD baselines: the configured `eta`, or a safe
    /// default derived from the Gram traces (`1/L` with the trace bounding
    /// the spectral norm).
    pub fn effective_eta(&self, problem: &ProblemInstance) -> f64 {
        if let Some(eta) = self.eta {
            return eta;
        }
        let n = problem.num_workers();
        let curvature: f64 = match problem.loss_kind() {
            crate::problem::LossKind::Logistic => 0.25,
            _ => 1.0,
        };
        match self.variant {
            // server steps along the worker-averaged gradient: the global
            // curvature bound is (sum_n tr G_n)/N in averaged units
            Variant::QuantizedGd => {
                let total: f64 = (0..n).map(|w| problem.gram_trace(w)).sum();
                let l = curvature * total / n as f64 + problem.mu();
                1.0 / l
            }
            // each worker descends its own local loss
            _ => {
                let worst = (0..n)
                    .map(|w| curvature * problem.gram_trace(w) + problem.mu())
                    .fold(0.0f64, f64::max);
                1.0 / worst
            }
        }
    }
}

// ── Decentralized engine ─────────────────────────────────────────────────

/// One worker's mutable state inside a decentralized run.
#[derive(Debug, Clone)]
pub struct WorkerState {
    /// Current primal model.
    pub theta: ModelVector,
    /// Reconstruction receivers currently hold for this worker.
    pub theta_hat: ModelVector,
    /// Incident-edge bookkeeping, in global edge order.
    pub incident: Vec<IncidentEdge>,
    /// Per-worker quantizer for the quantized variants.
    pub quantizer: Option<QuantizerState>,
    rng: ChaCha8Rng,
}

/// Per-edge state as seen from one endpoint.
#[derive(Debug, Clone)]
pub struct IncidentEdge {
    pub edge: usize,
    pub neighbor: usize,
    /// +1 when this worker is the edge's head, -1 when it is the tail.
    pub sign: f64,
    /// This endpoint's copy of the edge dual.
    pub dual: DualVector,
    /// Last reconstruction received from the neighbor.
    pub cache: ModelVector,
}

/// Full state of a decentralized run.
pub struct EngineState<'a> {
    pub problem: &'a ProblemInstance,
    pub topology: Topology,
    pub workers: Vec<WorkerState>,
    rho: f64,
}

/// Communication tally of one round.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundStats {
    pub bits: u64,
    pub joules: f64,
    pub sent: u64,
    pub censored: u64,
}

impl<'a> EngineState<'a> {
    /// Initializes all workers at the zero model with zero duals and empty
    /// (zero) reconstruction caches.
    pub fn new(
        problem: &'a ProblemInstance,
        topology: Topology,
        cfg: &SolverConfig,
        seed: u64,
    ) -> Result<Self> {
        if topology.num_workers() != problem.num_workers() {
            return Err(Error::invalid(format!(
                "topology has {} workers but problem has {}",
                topology.num_workers(),
                problem.num_workers()
            )));
        }
        let d = problem.dim();
        let n = problem.num_workers();
        let mut workers: Vec<WorkerState> = (0..n)
            .map(|w| {
                let quantizer = if cfg.variant.quantized() {
                    Some(QuantizerState::new(cfg.bits, d).expect("bits validated"))
                } else {
                    None
                };
                Ok(WorkerState {
                    theta: DVector::zeros(d),
                    theta_hat: DVector::zeros(d),
                    incident: Vec::new(),
                    quantizer,
                    rng: stream(seed, STREAM_WORKER_BASE + w as u64),
                })
            })
            .collect::<Result<_>>()?;
        build_incidents(&topology, &mut workers, d);
        Ok(EngineState { problem, topology, workers, rho: cfg.rho })
    }

    /// Worker-averaged model, the iterate objective errors are evaluated at.
    pub fn mean_model(&self) -> ModelVector {
        let d = self.problem.dim();
        let mut acc = DVector::zeros(d);
        for w in &self.workers {
            acc += &w.theta;
        }
        acc / self.workers.len() as f64
    }

    /// Largest per-edge consensus gap `max_e ||hat(theta)_h - hat(theta)_t||_inf`.
    pub fn max_consensus_gap(&self) -> f64 {
        self.topology
            .edges()
            .iter()
            .map(|&(h, t)| (&self.workers[h].theta_hat - &self.workers[t].theta_hat).amax())
            .fold(0.0, f64::max)
    }

    /// Simulator-enforced consistency: every cache equals the neighbor's
    /// current reconstruction and both copies of each edge dual agree.
    /// Violations are bugs, not user errors.
    pub fn assert_consistent(&self) {
        for (w, worker) in self.workers.iter().enumerate() {
            for inc in &worker.incident {
                assert_eq!(
                    inc.cache, self.workers[inc.neighbor].theta_hat,
                    "worker {w} cache for neighbor {} is stale",
                    inc.neighbor
                );
            }
            if let Some(q) = &worker.quantizer {
                assert_eq!(
                    q.prev_reconstruction, worker.theta_hat,
                    "worker {w} quantizer state diverged from its reconstruction"
                );
            }
        }
        for (e, &(h, t)) in self.topology.edges().iter().enumerate() {
            let dh = &self.workers[h].incident.iter().find(|i| i.edge == e).expect("head incident").dual;
            let dt = &self.workers[t].incident.iter().find(|i| i.edge == e).expect("tail incident").dual;
            assert_eq!(dh, dt, "edge {e} dual copies diverged");
        }
    }

    /// Runs one full head/tail round. `round_k` indexes the censoring
    /// schedule.
    pub fn round(&mut self, cfg: &SolverConfig, round_k: usize) -> Result<RoundStats> {
        let mut stats = RoundStats::default();
        self.half_round(cfg, round_k, true, &mut stats)?;
        self.half_round(cfg, round_k, false, &mut stats)?;
        self.dual_update();
        self.assert_consistent();
        Ok(stats)
    }

    fn half_round(
        &mut self,
        cfg: &SolverConfig,
        round_k: usize,
        heads: bool,
        stats: &mut RoundStats,
    ) -> Result<()> {
        let group: Vec<usize> = (0..self.workers.len())
            .filter(|&w| self.topology.is_head(w) == heads)
            .collect();

        // primal updates: pure functions of the cached neighbor models, so
        // in-group order cannot matter
        for &w in &group {
            let terms: Vec<ProxTerm> = self.workers[w]
                .incident
                .iter()
                .map(|inc| ProxTerm {
                    linear: inc.sign * &inc.dual,
                    anchor: inc.cache.clone(),
                    weight: 1.0,
                })
                .collect();
            self.workers[w].theta = self.problem.prox_update(w, &terms, self.rho)?;
        }

        // transmissions
        let mut transmitters: Vec<usize> = Vec::new();
        for &w in &group {
            let candidate = self.workers[w].theta.clone();
            let transmit = if cfg.variant.censored() {
                censor_decision(&candidate, &self.workers[w].theta_hat, round_k, &cfg.censor)
            } else {
                true
            };
            if !transmit {
                stats.censored += 1;
                continue;
            }
            let recon = {
                let worker = &mut self.workers[w];
                match worker.quantizer.as_mut() {
                    Some(q) => {
                        let payload = q.quantize(&candidate, &mut worker.rng)?;
                        q.commit(&payload)?
                    }
                    None => candidate,
                }
            };
            self.workers[w].theta_hat = recon.clone();
            let destinations: Vec<(usize, usize)> = self.workers[w]
                .incident
                .iter()
                .map(|inc| (inc.neighbor, inc.edge))
                .collect();
            for (nb, edge) in destinations {
                let slot = self.workers[nb]
                    .incident
                    .iter_mut()
                    .find(|i| i.edge == edge)
                    .expect("incident lists are symmetric");
                slot.cache = recon.clone();
            }
            transmitters.push(w);
        }

        // bandwidth-halving structure: only one side of the partition ever
        // transmits within a phase
        assert!(
            transmitters.iter().all(|&w| self.topology.is_head(w) == heads),
            "transmitter outside the active group"
        );

        let n_active = transmitters.len();
        if n_active > 0 {
            let bits_per_msg = payload_bits(self.problem.dim(), cfg.bits, cfg.variant.payload_mode());
            let energy_per_msg = transmit_energy(bits_per_msg, &cfg.link.share(n_active));
            stats.bits += bits_per_msg * n_active as u64;
            stats.joules += energy_per_msg * n_active as f64;
            stats.sent += n_active as u64;
        }
        Ok(())
    }

    fn dual_update(&mut self) {
        let rho = self.rho;
        for (e, &(h, t)) in self.topology.edges().iter().enumerate() {
            let delta = rho * (&self.workers[h].theta_hat - &self.workers[t].theta_hat);
            for w in [h, t] {
                let slot = self.workers[w]
                    .incident
                    .iter_mut()
                    .find(|i| i.edge == e)
                    .expect("incident lists are symmetric");
                slot.dual += &delta;
            }
        }
    }

    /// Replaces the topology with a reshuffled one, carrying the dual state
    /// over so every worker's aggregate dual force `sum_e sign * lambda_e`
    /// is preserved. Preserving the aggregate keeps the primal subproblems
    /// (and hence any fixed point already reached) unchanged across the
    /// switch; per-edge duals are re-derived by solving the resulting flow
    /// system on a spanning tree of the new graph, with off-tree duals
    /// reset to zero. Caches are re-seeded with the new neighbors' current
    /// reconstructions.
    pub fn reshuffle_topology(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let d = self.problem.dim();
        // per-worker aggregate dual force under the old topology
        let aggregates: Vec<DualVector> = self
            .workers
            .iter()
            .map(|w| {
                let mut acc = DVector::zeros(d);
                for inc in &w.incident {
                    acc += inc.sign * &inc.dual;
                }
                acc
            })
            .collect();

        let new_topo = reshuffle(&self.topology, rng)?;
        self.topology = new_topo;
        build_incidents(&self.topology, &mut self.workers, d);
        for w in 0..self.workers.len() {
            let hat_of = |v: usize| self.workers[v].theta_hat.clone();
            let caches: Vec<ModelVector> = self.workers[w]
                .incident
                .iter()
                .map(|inc| hat_of(inc.neighbor))
                .collect();
            for (inc, cache) in self.workers[w].incident.iter_mut().zip(caches) {
                inc.cache = cache;
            }
        }
        self.transfer_duals(&aggregates);
        Ok(())
    }

    /// Solves `sum_{e incident to w} sign(w,e) * lambda_e = aggregate_w` on a
    /// BFS spanning tree of the current topology (off-tree edges stay zero),
    /// peeling from the leaves inward.
    fn transfer_duals(&mut self, aggregates: &[DualVector]) {
        let n = self.workers.len();
        let d = self.problem.dim();
        let edges = self.topology.edges().to_vec();

        // BFS tree
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (edge, neighbor)
        for (e, &(h, t)) in edges.iter().enumerate() {
            adj[h].push((e, t));
            adj[t].push((e, h));
        }
        let mut parent_edge: Vec<Option<usize>> = vec![None; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(e, v) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent_edge[v] = Some(e);
                    queue.push_back(v);
                }
            }
        }
        debug_assert_eq!(order.len(), n, "topology must be connected");

        let mut duals: Vec<DualVector> = vec![DVector::zeros(d); edges.len()];
        let mut residual: Vec<DualVector> = aggregates.to_vec();
        for &v in order.iter().rev() {
            let Some(e) = parent_edge[v] else { continue };
            let (h, t) = edges[e];
            let sign_v = if h == v { 1.0 } else { -1.0 };
            // children edges of v are already fixed; off-tree edges are zero
            let lambda = sign_v * &residual[v];
            let other = if h == v { t } else { h };
            let sign_other = -sign_v;
            residual[other] -= sign_other * &lambda;
            residual[v] -= sign_v * &lambda; // now zero up to rounding
            duals[e] = lambda;
        }
        let root_residual = residual[order[0]].amax();
        let scale = aggregates.iter().map(|a| a.amax()).fold(1.0, f64::max);
        debug_assert!(
            root_residual <= 1e-6 * scale,
            "dual transfer left residual {root_residual} at the root"
        );

        for (e, lambda) in duals.into_iter().enumerate() {
            let (h, t) = edges[e];
            for w in [h, t] {
                let slot = self.workers[w]
                    .incident
                    .iter_mut()
                    .find(|i| i.edge == e)
                    .expect("incident lists are symmetric");
                slot.dual = lambda.clone();
            }
        }
    }
}

fn build_incidents(topology: &Topology, workers: &mut [WorkerState], dim: usize) {
    for w in workers.iter_mut() {
        w.incident.clear();
    }
    for (e, &(h, t)) in topology.edges().iter().enumerate() {
        workers[h].incident.push(IncidentEdge {
            edge: e,
            neighbor: t,
            sign: 1.0,
            dual: DVector::zeros(dim),
            cache: DVector::zeros(dim),
        });
        workers[t].incident.push(IncidentEdge {
            edge: e,
            neighbor: h,
            sign: -1.0,
            dual: DVector::zeros(dim),
            cache: DVector::zeros(dim),
        });
    }
}

// ── Parameter-server engine ──────────────────────────────────────────────

/// State of a star-topology run: per-worker models, per-worker duals (ADMM
/// only), the server's global model, and the quantizers of `quantized-gd`.
pub struct PsState {
    pub thetas: Vec<ModelVector>,
    pub duals: Vec<DualVector>,
    pub global: ModelVector,
    pub quantizers: Vec<QuantizerState>,
    rngs: Vec<ChaCha8Rng>,
}

impl PsState {
    pub fn new(problem: &ProblemInstance, cfg: &SolverConfig, seed: u64) -> Result<Self> {
        let d = problem.dim();
        let n = problem.num_workers();
        let quantizers = if cfg.variant.quantized() {
            (0..n)
                .map(|_| QuantizerState::new(cfg.bits, d))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(PsState {
            thetas: vec![DVector::zeros(d); n],
            duals: vec![DVector::zeros(d); n],
            global: DVector::zeros(d),
            quantizers,
            rngs: (0..n).map(|w| stream(seed, STREAM_WORKER_BASE + w as u64)).collect(),
        })
    }

    pub fn mean_model(&self) -> ModelVector {
        let mut acc = DVector::zeros(self.global.len());
        for t in &self.thetas {
            acc += t;
        }
        acc / self.thetas.len() as f64
    }
}

/// One parameter-server ADMM round: every worker proxes against the global
/// model, the server recomputes the global model from the stationarity
/// condition, and duals update locally.
pub fn ps_admm_round(state: &mut PsState, problem: &ProblemInstance, cfg: &SolverConfig) -> Result<RoundStats> {
    let n = problem.num_workers();
    let rho = cfg.rho;
    for w in 0..n {
        let term = ProxTerm {
            linear: state.duals[w].clone(),
            anchor: state.global.clone(),
            weight: 1.0,
        };
        state.thetas[w] = problem.prox_update(w, &[term], rho)?;
    }
    // global minimizer of the augmented Lagrangian: mean(theta + lambda/rho)
    let mut acc = DVector::zeros(problem.dim());
    for w in 0..n {
        acc += &state.thetas[w] + &state.duals[w] / rho;
    }
    state.global = acc / n as f64;
    for w in 0..n {
        state.duals[w] += rho * (&state.thetas[w] - &state.global);
    }
    Ok(ps_round_stats(problem, cfg, n))
}

/// One FedAvg round: `local_epochs` gradient steps per worker from the
/// global model, then server-side averaging.
pub fn fedavg_gd_round(state: &mut PsState, problem: &ProblemInstance, cfg: &SolverConfig) -> Result<RoundStats> {
    let eta = cfg.effective_eta(problem);
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let n = problem.num_workers();
    for w in 0..n {
        let mut t = state.global.clone();
        for _ in 0..cfg.local_epochs {
            let g = problem.local_gradient(w, &t)?;
            t -= eta * g;
        }
        state.thetas[w] = t;
    }
    let mut acc = DVector::zeros(problem.dim());
    for t in &state.thetas {
        acc += t;
    }
    state.global = acc / n as f64;
    // workers download the new global model
    for t in state.thetas.iter_mut() {
        *t = state.global.clone();
    }
    Ok(ps_round_stats(problem, cfg, n))
}

/// One quantized-gradient round: workers upload stochastically quantized
/// gradients, the server steps along their average.
pub fn quantized_gd_round(state: &mut PsState, problem: &ProblemInstance, cfg: &SolverConfig) -> Result<RoundStats> {
    let eta = cfg.effective_eta(problem);
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let n = problem.num_workers();
    let mut mean_grad = DVector::zeros(problem.dim());
    for w in 0..n {
        let g = problem.local_gradient(w, &state.global)?;
        let payload = state.quantizers[w].quantize(&g, &mut state.rngs[w])?;
        let ghat = state.quantizers[w].commit(&payload)?;
        mean_grad += ghat;
    }
    mean_grad /= n as f64;
    state.global -= eta * mean_grad;
    for t in state.thetas.iter_mut() {
        *t = state.global.clone();
    }
    Ok(ps_round_stats(problem, cfg, n))
}

fn ps_round_stats(problem: &ProblemInstance, cfg: &SolverConfig, n: usize) -> RoundStats {
    let bits_per_msg = payload_bits(problem.dim(), cfg.bits, cfg.variant.payload_mode());
    let energy_per_msg = transmit_energy(bits_per_msg, &cfg.link.share(n));
    RoundStats {
        bits: bits_per_msg * n as u64,
        joules: energy_per_msg * n as f64,
        sent: n as u64,
        censored: 0,
    }
}

// ── Run loop ─────────────────────────────────────────────────────────────

/// Runs a full experiment for one variant and returns its trace. Row `k`
/// records the state after `k` rounds; the run stops at the relative target
/// error (when finite) or after `max_rounds` rows. Fully deterministic
/// given `(problem, topology, cfg, seed)`.
pub fn run(
    problem: &ProblemInstance,
    topology: Option<&Topology>,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<MetricsTrace> {
    cfg.validate()?;
    if cfg.variant.family() == Family::Fadmm {
        return crate::afadmm::run(problem, cfg, seed);
    }

    let fstar_theta = problem.centralized_solution()?;
    let fstar = problem.global_loss(&fstar_theta)?;
    let mut trace = MetricsTrace {
        rows: Vec::new(),
        problem_hash: problem_hash(problem),
        variant: cfg.variant.name().to_string(),
        seed,
        fstar,
        analog_columns: false,
    };

    match cfg.variant.family() {
        Family::Decentralized => {
            let topo = topology
                .ok_or_else(|| Error::invalid("decentralized variants need a topology"))?;
            let mut state = EngineState::new(problem, topo.clone(), cfg, seed)?;
            let mut topo_rng = stream(seed, STREAM_TOPOLOGY);
            run_loop(problem, cfg, seed, &mut trace, |round| {
                if cfg.shuffle_period > 0 && round > 0 && round % cfg.shuffle_period == 0 {
                    state.reshuffle_topology(&mut topo_rng)?;
                }
                let stats = state.round(cfg, round)?;
                Ok((stats, state.mean_model()))
            })?;
        }
        Family::ParameterServer => {
            let mut state = PsState::new(problem, cfg, seed)?;
            run_loop(problem, cfg, seed, &mut trace, |_round| {
                let stats = match cfg.variant {
                    Variant::PsAdmm => ps_admm_round(&mut state, problem, cfg)?,
                    Variant::FedavgGd => fedavg_gd_round(&mut state, problem, cfg)?,
                    Variant::QuantizedGd => quantized_gd_round(&mut state, problem, cfg)?,
                    _ => unreachable!("family checked"),
                };
                Ok((stats, state.mean_model()))
            })?;
        }
        Family::Fadmm => unreachable!("dispatched above"),
    }
    Ok(trace)
}

/// Shared row-emission loop: row 0 is the initialization, each subsequent
/// row is the state after one more round.
pub(crate) fn run_loop(
    problem: &ProblemInstance,
    cfg: &SolverConfig,
    _seed: u64,
    trace: &mut MetricsTrace,
    mut step: impl FnMut(usize) -> Result<(RoundStats, ModelVector)>,
) -> Result<()> {
    let fstar = trace.fstar;
    let init_model = DVector::zeros(problem.dim());
    let err0 = (problem.global_loss(&init_model)? - fstar).abs();
    let guard = DIVERGENCE_FACTOR * err0.max(1e-12 * fstar.abs().max(1.0));
    trace.push(TraceRow {
        round: 0,
        obj_error: err0,
        cum_bits: 0,
        cum_joules: 0.0,
        msgs_sent: 0,
        msgs_censored: 0,
        noise_floor_est: trace.analog_columns.then_some(0.0),
        imag_residue: trace.analog_columns.then_some(0.0),
    });
    let rel_scale = fstar.abs().max(f64::MIN_POSITIVE);
    if cfg.target_error.is_finite() && err0 / rel_scale <= cfg.target_error {
        return Ok(());
    }
    let mut cum_bits = 0u64;
    let mut cum_joules = 0.0f64;
    for row in 1..cfg.max_rounds {
        let (stats, mean_model) = step(row - 1)?;
        cum_bits += stats.bits;
        cum_joules += stats.joules;
        let err = (problem.global_loss(&mean_model)? - fstar).abs();
        trace.push(TraceRow {
            round: row,
            obj_error: err,
            cum_bits,
            cum_joules,
            msgs_sent: stats.sent,
            msgs_censored: stats.censored,
            noise_floor_est: trace.analog_columns.then_some(0.0),
            imag_residue: trace.analog_columns.then_some(0.0),
        });
        if !err.is_finite() || err > guard {
            return Err(Error::Divergence { round: row, factor: DIVERGENCE_FACTOR });
        }
        if cfg.target_error.is_finite() && err / rel_scale <= cfg.target_error {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_synthetic, LossKind, SyntheticSpec};
    use crate::topology::build_chain;
    use nalgebra::DMatrix;

    fn synthetic(seed: u64, workers: usize, dim: usize, rows: usize) -> ProblemInstance {
        generate_synthetic(
            &SyntheticSpec {
                workers,
                dim,
                rows_per_worker: rows,
                noise_sigma: 0.1,
                feature_decades: 0.0,
                loss: LossKind::LeastSquares,
                mu: 0.0,
            },
            &mut stream(seed, STREAM_PROBLEM),
        )
        .unwrap()
    }

    fn zero_loss_problem(workers: usize, dim: usize) -> ProblemInstance {
        let shards = (0..workers)
            .map(|_| (DMatrix::zeros(1, dim), DVector::zeros(1)))
            .collect();
        ProblemInstance::new(shards, LossKind::LeastSquares, 0.0).unwrap()
    }

    fn base_cfg(variant: Variant) -> SolverConfig {
        SolverConfig { variant, ..SolverConfig::default() }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("not-a-variant".parse::<Variant>().is_err());
    }

    #[test]
    fn two_worker_round_contracts_consensus_gap() {
        // f == 0, theta0 = (1), theta1 = (0): the head moves onto the tail's
        // cached model and the tail matches the head's transmitted value
        let problem = zero_loss_problem(2, 1);
        let topo = build_chain(2).unwrap();
        let cfg = base_cfg(Variant::Gadmm);
        let mut state = EngineState::new(&problem, topo, &cfg, 0).unwrap();
        state.workers[0].theta[0] = 1.0;
        state.workers[1].theta[0] = 0.0;
        let gap_before = (state.workers[0].theta[0] - state.workers[1].theta[0]).abs();
        state.round(&cfg, 0).unwrap();
        // head prox against zero cache pulls it to 0
        assert!(state.workers[0].theta[0].abs() < 1e-12);
        assert_eq!(state.workers[1].theta, state.workers[0].theta_hat);
        let gap_after = (state.workers[0].theta_hat[0] - state.workers[1].theta_hat[0]).abs();
        assert!(gap_after < gap_before);
    }

    #[test]
    fn fully_censored_round_keeps_reconstructions() {
        let problem = synthetic(3, 4, 3, 6);
        let topo = build_chain(4).unwrap();
        let mut cfg = base_cfg(Variant::CGgadmm);
        cfg.censor = CensorSchedule { omega: 1e9, zeta: 0.9, norm: CensorNorm::Infinity };
        let mut state = EngineState::new(&problem, topo, &cfg, 1).unwrap();
        let stats = state.round(&cfg, 0).unwrap();
        assert_eq!(stats.sent, 0);
        assert_eq!(stats.censored, 4);
        assert_eq!(stats.bits, 0);
        // reconstructions and caches never moved; duals updated from the
        // stale (all-zero) reconstructions, hence stayed zero
        for w in &state.workers {
            assert!(w.theta_hat.amax() == 0.0);
            for inc in &w.incident {
                assert!(inc.cache.amax() == 0.0);
                assert!(inc.dual.amax() == 0.0);
            }
            // the primal still ran against the unchanged caches
            assert!(w.theta.amax() > 0.0);
        }
    }

    #[test]
    fn chain_gadmm_reaches_oracle() {
        // N=6 chain, 200 rounds, rho=1: |F - F*| < 1e-6 and final per-edge
        // consensus gap < 1e-5, against the normal-equations oracle
        let problem = synthetic(42, 6, 3, 6);
        let topo = build_chain(6).unwrap();
        let mut cfg = base_cfg(Variant::Gadmm);
        cfg.max_rounds = 201; // row 200 = state after 200 rounds
        let trace = run(&problem, Some(&topo), &cfg, 7).unwrap();
        assert_eq!(trace.rows.len(), 201);
        assert!(
            trace.final_error() < 1e-6,
            "final |F-F*| = {}",
            trace.final_error()
        );

        // re-run statefully to inspect the consensus gap
        let mut state = EngineState::new(&problem, topo, &cfg, 7).unwrap();
        for k in 0..200 {
            state.round(&cfg, k).unwrap();
        }
        assert!(state.max_consensus_gap() < 1e-5, "gap {}", state.max_consensus_gap());
    }

    #[test]
    fn consensus_gap_trend_is_nonincreasing() {
        let problem = synthetic(9, 6, 3, 8);
        let topo = build_chain(6).unwrap();
        let cfg = base_cfg(Variant::Gadmm);
        let mut state = EngineState::new(&problem, topo, &cfg, 3).unwrap();
        let mut gaps = Vec::new();
        for k in 0..400 {
            state.round(&cfg, k).unwrap();
            gaps.push(state.max_consensus_gap());
        }
        for k in 50..200 {
            if gaps[k] > 1e-13 {
                assert!(
                    gaps[2 * k] <= gaps[k] * (1.0 + 1e-9),
                    "gap grew from {} at {k} to {} at {}",
                    gaps[k],
                    gaps[2 * k],
                    2 * k
                );
            }
        }
    }

    #[test]
    fn ps_admm_agrees_with_gadmm() {
        let problem = synthetic(13, 5, 4, 8);
        let topo = build_chain(5).unwrap();
        let mut cfg = base_cfg(Variant::Gadmm);
        cfg.max_rounds = 800;
        let g = run(&problem, Some(&topo), &cfg, 2).unwrap();
        cfg.variant = Variant::PsAdmm;
        let p = run(&problem, None, &cfg, 2).unwrap();
        assert!(g.final_error() < 1e-6);
        assert!(p.final_error() < 1e-6);
    }

    #[test]
    fn ps_admm_strongly_convex_converges_fast() {
        let problem = generate_synthetic(
            &SyntheticSpec {
                workers: 5,
                dim: 4,
                rows_per_worker: 8,
                noise_sigma: 0.1,
                feature_decades: 0.0,
                loss: LossKind::Ridge,
                mu: 0.5,
            },
            &mut stream(1, STREAM_PROBLEM),
        )
        .unwrap();
        let mut cfg = base_cfg(Variant::PsAdmm);
        cfg.max_rounds = 501;
        let trace = run(&problem, None, &cfg, 1).unwrap();
        let rel = trace.final_error() / trace.fstar;
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn fedavg_single_worker_is_plain_gd() {
        let problem = synthetic(5, 1, 3, 10);
        let mut cfg = base_cfg(Variant::FedavgGd);
        cfg.eta = Some(0.01);
        cfg.max_rounds = 50;
        let mut state = PsState::new(&problem, &cfg, 0).unwrap();
        let mut manual = DVector::zeros(3);
        for _ in 0..20 {
            fedavg_gd_round(&mut state, &problem, &cfg).unwrap();
            let g = problem.local_gradient(0, &manual).unwrap();
            manual -= 0.01 * g;
            assert!((&state.global - &manual).amax() < 1e-12);
        }
    }

    #[test]
    fn fedavg_equal_shards_matches_averaged_gradient_descent() {
        // identical shards and E=1: the averaged update equals a centralized
        // step along the worker-averaged gradient
        let base = synthetic(8, 1, 3, 10);
        let shard = (base.shard(0).a.clone(), base.shard(0).y.clone());
        let problem = ProblemInstance::new(
            vec![shard.clone(), shard.clone(), shard],
            LossKind::LeastSquares,
            0.0,
        )
        .unwrap();
        let mut cfg = base_cfg(Variant::FedavgGd);
        cfg.eta = Some(0.005);
        let mut state = PsState::new(&problem, &cfg, 0).unwrap();
        let mut manual = DVector::zeros(3);
        for _ in 0..10 {
            fedavg_gd_round(&mut state, &problem, &cfg).unwrap();
            let mut mean_g = DVector::zeros(3);
            for w in 0..3 {
                mean_g += problem.local_gradient(w, &manual).unwrap();
            }
            mean_g /= 3.0;
            manual -= 0.005 * mean_g;
            assert!((&state.global - &manual).amax() < 1e-12);
        }
    }

    #[test]
    fn fedavg_rejects_nonpositive_eta() {
        let problem = synthetic(2, 2, 2, 4);
        let mut cfg = base_cfg(Variant::FedavgGd);
        cfg.eta = Some(0.0);
        assert!(matches!(
            run(&problem, None, &cfg, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn target_infinity_emits_exactly_max_rounds_rows() {
        let problem = synthetic(2, 2, 2, 4);
        let topo = build_chain(2).unwrap();
        let mut cfg = base_cfg(Variant::Gadmm);
        cfg.max_rounds = 37;
        cfg.target_error = f64::INFINITY;
        let trace = run(&problem, Some(&topo), &cfg, 0).unwrap();
        assert_eq!(trace.rows.len(), 37);
    }

    #[test]
    fn same_seed_gives_bit_identical_traces() {
        let problem = synthetic(3, 4, 3, 8);
        let topo = build_chain(4).unwrap();
        for variant in [Variant::QGadmm, Variant::CQggadmm, Variant::QuantizedGd] {
            let mut cfg = base_cfg(variant);
            cfg.max_rounds = 60;
            let t1 = run(&problem, Some(&topo), &cfg, 11).unwrap();
            let t2 = run(&problem, Some(&topo), &cfg, 11).unwrap();
            assert_eq!(t1.to_csv(), t2.to_csv(), "{variant} not deterministic");
        }
    }

    #[test]
    fn quantized_gadmm_converges_like_full_precision() {
        let problem = synthetic(6, 6, 4, 10);
        let topo = build_chain(6).unwrap();
        let mut cfg = base_cfg(Variant::QGadmm);
        cfg.bits = 2;
        cfg.max_rounds = 600;
        cfg.target_error = 1e-5;
        let q = run(&problem, Some(&topo), &cfg, 4).unwrap();
        cfg.variant = Variant::Gadmm;
        let g = run(&problem, Some(&topo), &cfg, 4).unwrap();
        let qr = q.rounds_to_target(1e-5).expect("q-gadmm reached target");
        let gr = g.rounds_to_target(1e-5).expect("gadmm reached target");
        assert!(qr <= 2 * gr, "q-gadmm took {qr} rounds vs gadmm {gr}");
    }

    #[test]
    fn dgadmm_reshuffle_preserves_convergence() {
        let problem = synthetic(14, 8, 4, 8);
        let topo = build_chain(8).unwrap();
        let mut cfg = base_cfg(Variant::DGadmm);
        cfg.shuffle_period = 10;
        cfg.max_rounds = 800;
        cfg.target_error = 1e-7;
        let trace = run(&problem, Some(&topo), &cfg, 5).unwrap();
        assert!(
            trace.rounds_to_target(1e-7).is_some(),
            "d-gadmm never reached 1e-7, final rel {}",
            trace.final_error() / trace.fstar
        );
    }

    #[test]
    fn dual_transfer_preserves_fixed_point() {
        // run a chain to convergence, reshuffle, and check the next round
        // barely moves the iterates
        let problem = synthetic(21, 6, 3, 8);
        let topo = build_chain(6).unwrap();
        let cfg = base_cfg(Variant::Gadmm);
        let mut state = EngineState::new(&problem, topo, &cfg, 9).unwrap();
        for k in 0..2000 {
            state.round(&cfg, k).unwrap();
        }
        let before = state.mean_model();
        let mut rng = stream(9, STREAM_TOPOLOGY);
        state.reshuffle_topology(&mut rng).unwrap();
        state.assert_consistent();
        state.round(&cfg, 2000).unwrap();
        let after = state.mean_model();
        assert!(
            (&after - &before).amax() < 1e-8,
            "fixed point moved by {}",
            (&after - &before).amax()
        );
    }

    #[test]
    fn logistic_problems_run_end_to_end() {
        // Newton-based primal updates behave like the exact prox: both the
        // decentralized and the parameter-server solvers settle on the
        // centralized logistic optimum
        let problem = generate_synthetic(
            &SyntheticSpec {
                workers: 4,
                dim: 3,
                rows_per_worker: 15,
                noise_sigma: 0.0,
                feature_decades: 0.0,
                loss: LossKind::Logistic,
                mu: 0.1,
            },
            &mut stream(33, STREAM_PROBLEM),
        )
        .unwrap();
        let topo = build_chain(4).unwrap();
        let mut cfg = base_cfg(Variant::Gadmm);
        cfg.max_rounds = 600;
        cfg.target_error = 1e-6;
        let g = run(&problem, Some(&topo), &cfg, 1).unwrap();
        assert!(
            g.rounds_to_target(1e-6).is_some(),
            "gadmm on logistic: final rel {}",
            g.final_error() / g.fstar
        );
        cfg.variant = Variant::PsAdmm;
        let p = run(&problem, None, &cfg, 1).unwrap();
        assert!(p.rounds_to_target(1e-6).is_some());
    }

    #[test]
    fn ridge_problems_run_end_to_end() {
        let problem = generate_synthetic(
            &SyntheticSpec {
                workers: 6,
                dim: 4,
                rows_per_worker: 5,
                noise_sigma: 0.1,
                feature_decades: 0.0,
                loss: LossKind::Ridge,
                mu: 0.3,
            },
            &mut stream(34, STREAM_PROBLEM),
        )
        .unwrap();
        let topo = build_chain(6).unwrap();
        let mut cfg = base_cfg(Variant::QGadmm);
        cfg.max_rounds = 2000;
        cfg.target_error = 1e-5;
        let t = run(&problem, Some(&topo), &cfg, 2).unwrap();
        assert!(t.rounds_to_target(1e-5).is_some());
    }

    #[test]
    fn divergence_guard_fires() {
        let problem = synthetic(2, 2, 2, 6);
        let mut cfg = base_cfg(Variant::FedavgGd);
        cfg.eta = Some(10.0); // wildly unstable step
        cfg.max_rounds = 200;
        match run(&problem, None, &cfg, 0) {
            Err(Error::Divergence { round, .. }) => assert!(round > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn run_requires_topology_for_decentralized() {
        let problem = synthetic(2, 2, 2, 4);
        let cfg = base_cfg(Variant::Gadmm);
        assert!(matches!(
            run(&problem, None, &cfg, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = SolverConfig::default();
        cfg.rho = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig { variant: Variant::DGadmm, ..SolverConfig::default() };
        assert!(cfg.validate().is_err()); // needs shuffle_period
        cfg.shuffle_period = 10;
        assert!(cfg.validate().is_ok());
        let mut cfg = SolverConfig { variant: Variant::QGadmm, ..SolverConfig::default() };
        cfg.bits = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derive_seed_separates_streams() {
        let a = derive_seed(7, STREAM_PROBLEM);
        let b = derive_seed(7, STREAM_TOPOLOGY);
        let c = derive_seed(8, STREAM_PROBLEM);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, STREAM_PROBLEM));
    }
}
