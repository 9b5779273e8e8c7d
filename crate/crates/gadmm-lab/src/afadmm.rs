//! Federated ADMM over the uplink channel: the analog variant rides the
//! superposed multiple-access channel without inverting fading, and the
//! digital variant prices orthogonal per-worker uplinks for comparison.
//!
//! The analog solver works on the consensus problem whose constraints are
//! fading-weighted, `h_n theta_n = h_n Theta`. With complex per-worker duals
//! `lambda_n`, one round is:
//!
//! ```text
//! primal (worker):  grad f_n(theta) + Re{h_n conj(lambda_n)}
//!                     + rho |h_n|^2 (theta - Theta) = 0
//! uplink (worker):  u_n = conj(h_n) theta_n + conj(lambda_n)/rho,
//!                   scaled by the global power factor alpha
//! global (server):  Theta = Re{ sum_n h_n u_n + z } / sum_n |h_n|^2
//! dual (worker):    lambda_n += rho h_n (theta_n - Theta)
//! ```
//!
//! The server never sees an individual worker's field: the channel hands it
//! only the superposition `sum_n h_n u_n + z`, and the aggregate gain
//! `sum |h_n|^2` is assumed known from pilots. When fading changes between
//! rounds, each worker keeps its primal iterate and re-solves the primal
//! stationarity condition for the dual instead (the primal step flips into
//! a dual step), which leaves any reached fixed point stationary under the
//! new gains.

use nalgebra::DVector;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::channel::{analog_mac, sample_fading, transmit_energy, ChannelMode, ChannelRealization};
use crate::compression::{payload_bits, PayloadMode};
use crate::engine::{
    run_loop, stream, Family, RoundStats, SolverConfig, Variant, GAIN_GUARD, STREAM_FADING,
};
use crate::error::{Error, Result};
use crate::problem::{problem_hash, ModelVector, ProblemInstance, ProxTerm};
use crate::trace::MetricsTrace;

/// Complex dual vector attached to one worker's fading-weighted constraint.
pub type ComplexDual = DVector<Complex64>;

/// Mutable state of a federated-ADMM run (analog or digital).
#[derive(Debug, Clone)]
pub struct AfadmmState {
    pub thetas: Vec<ModelVector>,
    pub duals: Vec<ComplexDual>,
    pub global: ModelVector,
    /// Gains currently reflected in the duals.
    pub gains: Vec<Complex64>,
    pub rho: f64,
}

impl AfadmmState {
    pub fn new(problem: &ProblemInstance, rho: f64, gains: Vec<Complex64>) -> Result<Self> {
        if gains.len() != problem.num_workers() {
            return Err(Error::invalid("one fading gain per worker required"));
        }
        let d = problem.dim();
        let n = problem.num_workers();
        Ok(AfadmmState {
            thetas: vec![DVector::zeros(d); n],
            duals: vec![DVector::from_element(d, Complex64::new(0.0, 0.0)); n],
            global: DVector::zeros(d),
            gains,
            rho,
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

/// Diagnostics of one analog round.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalogDiag {
    /// Norm of the realized noise perturbation of the global model.
    pub noise_floor_est: f64,
    /// Norm of the imaginary residue the server discarded.
    pub imag_residue: f64,
    /// All gains were below the dead-channel guard; nothing happened.
    pub skipped: bool,
}

/// One analog round over the multiple-access channel. `channel.gains` must
/// match the gains already reflected in `state` (run
/// [`time_varying_channel_step`] first when fading changes).
pub fn afadmm_round(
    state: &mut AfadmmState,
    problem: &ProblemInstance,
    channel: &ChannelRealization,
    power_budget: f64,
    slot_sec: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(RoundStats, AnalogDiag)> {
    if channel.mode != ChannelMode::AnalogMac {
        return Err(Error::invalid("afadmm_round needs an analog-mac channel"));
    }
    if channel.gains != state.gains {
        return Err(Error::invalid("channel gains out of sync with solver state"));
    }
    let n = problem.num_workers();
    let rho = state.rho;
    let participants: Vec<usize> =
        (0..n).filter(|&w| state.gains[w].norm() >= GAIN_GUARD).collect();
    let mut stats = RoundStats::default();
    if participants.is_empty() {
        stats.censored = n as u64;
        return Ok((stats, AnalogDiag { skipped: true, ..AnalogDiag::default() }));
    }
    stats.censored = (n - participants.len()) as u64;

    // worker primal updates under the fading-weighted augmented term
    for &w in &participants {
        let h = state.gains[w];
        let linear = DVector::from_fn(problem.dim(), |i, _| (h * state.duals[w][i].conj()).re);
        let term = ProxTerm { linear, anchor: state.global.clone(), weight: h.norm_sqr() };
        state.thetas[w] = problem.prox_update(w, &[term], rho)?;
    }

    // uplink signals and the shared power-scaling factor
    let signals_raw: Vec<DVector<Complex64>> = participants
        .iter()
        .map(|&w| {
            let h = state.gains[w];
            DVector::from_fn(problem.dim(), |i, _| {
                h.conj() * state.thetas[w][i] + state.duals[w][i].conj() / rho
            })
        })
        .collect();
    let alpha = signals_raw
        .iter()
        .filter_map(|s| {
            let power: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            (power > 0.0).then(|| (power_budget / power).sqrt())
        })
        .fold(f64::INFINITY, f64::min);
    let alpha = if alpha.is_finite() { alpha } else { 1.0 };
    let signals: Vec<DVector<Complex64>> =
        signals_raw.iter().map(|s| s.map(|v| alpha * v)).collect();
    for s in &signals {
        stats.joules += s.iter().map(|v| v.norm_sqr()).sum::<f64>() * slot_sec;
    }
    // each participant also uploads its 32-bit power scalar
    stats.bits += 32 * participants.len() as u64;
    stats.sent += participants.len() as u64;

    // superposition plus server-side equalization
    let gains: Vec<Complex64> = participants.iter().map(|&w| state.gains[w]).collect();
    let received = analog_mac(&signals, &gains, channel.noise_variance, rng)?;
    let denom: f64 = gains.iter().map(|h| h.norm_sqr()).sum();
    let mut noiseless = DVector::from_element(problem.dim(), Complex64::new(0.0, 0.0));
    for (s, h) in signals.iter().zip(gains.iter()) {
        for i in 0..problem.dim() {
            noiseless[i] += h * s[i];
        }
    }
    let mut imag_sq = 0.0;
    let mut noise_sq = 0.0;
    let mut global = DVector::zeros(problem.dim());
    for i in 0..problem.dim() {
        let v = received[i] / alpha;
        global[i] = v.re / denom;
        let im = v.im / denom;
        imag_sq += im * im;
        let z_re = (received[i] - noiseless[i]).re / (alpha * denom);
        noise_sq += z_re * z_re;
    }
    state.global = global;

    // local dual updates from the broadcast global model
    for &w in &participants {
        let h = state.gains[w];
        for i in 0..problem.dim() {
            state.duals[w][i] += rho * h * (state.thetas[w][i] - state.global[i]);
        }
    }

    Ok((
        stats,
        AnalogDiag {
            noise_floor_est: noise_sq.sqrt(),
            imag_residue: imag_sq.sqrt(),
            skipped: false,
        },
    ))
}

/// Adapts the dual variables to a fresh fading draw. Each changed gain
/// rescales the worker's dual by `conj(h_old) / conj(h_new)`, which keeps
/// the dual force term `Re{h conj(lambda)}` of the primal stationarity
/// condition exactly invariant: a worker already at a fixed point stays
/// stationary under the new gains, and away from one the primal keeps
/// moving under the reweighted penalty. Workers whose gain is unchanged are
/// untouched; workers entering or leaving a dead fade keep their dual and
/// sit the round out.
pub fn time_varying_channel_step(
    state: &mut AfadmmState,
    new_gains: &[Complex64],
) -> Result<()> {
    if new_gains.len() != state.gains.len() {
        return Err(Error::invalid("gain count changed mid-run"));
    }
    for (w, &h_new) in new_gains.iter().enumerate() {
        let h_old = state.gains[w];
        if h_new == h_old {
            continue;
        }
        state.gains[w] = h_new;
        if h_old.norm() < GAIN_GUARD || h_new.norm() < GAIN_GUARD {
            continue;
        }
        let factor = (h_old / h_new).conj();
        for lambda in state.duals[w].iter_mut() {
            *lambda *= factor;
        }
    }
    Ok(())
}

/// One digital round: identical consensus ADMM math on unweighted
/// constraints (payloads arrive exactly), priced as `N` orthogonal
/// full-precision uploads sharing the (possibly multiplied) band.
pub fn digital_fadmm_round(
    state: &mut AfadmmState,
    problem: &ProblemInstance,
    cfg: &SolverConfig,
) -> Result<RoundStats> {
    let n = problem.num_workers();
    let rho = state.rho;
    for w in 0..n {
        let linear = DVector::from_fn(problem.dim(), |i, _| state.duals[w][i].re);
        let term = ProxTerm { linear, anchor: state.global.clone(), weight: 1.0 };
        state.thetas[w] = problem.prox_update(w, &[term], rho)?;
    }
    let mut acc = DVector::zeros(problem.dim());
    for w in 0..n {
        for i in 0..problem.dim() {
            acc[i] += state.thetas[w][i] + state.duals[w][i].re / rho;
        }
    }
    state.global = acc / n as f64;
    for w in 0..n {
        for i in 0..problem.dim() {
            state.duals[w][i] += Complex64::new(rho * (state.thetas[w][i] - state.global[i]), 0.0);
        }
    }
    let mut link = cfg.link;
    link.bandwidth_hz *= cfg.variant.bandwidth_multiplier();
    let bits_per_msg = payload_bits(problem.dim(), 32, PayloadMode::FullPrecision);
    let energy_per_msg = transmit_energy(bits_per_msg, &link.share(n));
    Ok(RoundStats {
        bits: bits_per_msg * n as u64,
        joules: energy_per_msg * n as f64,
        sent: n as u64,
        censored: 0,
    })
}

/// Uplink slots one algorithm round occupies at equal total bandwidth: the
/// analog superposition needs a single slot, while `n` orthogonal digital
/// uploads need `n` base-bandwidth slots (divided by any bandwidth
/// multiplier).
pub fn uplink_slots_per_round(variant: Variant, n_workers: usize) -> f64 {
    match variant {
        Variant::AFadmm => 1.0,
        _ => n_workers as f64 / variant.bandwidth_multiplier(),
    }
}

/// Run loop for the federated-ADMM variants; returns a trace with the
/// analog diagnostic columns.
pub fn run(problem: &ProblemInstance, cfg: &SolverConfig, seed: u64) -> Result<MetricsTrace> {
    debug_assert_eq!(cfg.variant.family(), Family::Fadmm);
    let fstar_theta = problem.centralized_solution()?;
    let fstar = problem.global_loss(&fstar_theta)?;
    let analog = cfg.variant == Variant::AFadmm;
    let mut trace = MetricsTrace {
        rows: Vec::new(),
        problem_hash: problem_hash(problem),
        variant: cfg.variant.name().to_string(),
        seed,
        fstar,
        analog_columns: analog,
    };
    let n = problem.num_workers();
    let mut fading_rng = stream(seed, STREAM_FADING);
    let mut mac_rng = stream(seed, STREAM_FADING.wrapping_add(1_000_000));

    if analog {
        let init_gains: Vec<Complex64> = (0..n).map(|_| sample_fading(&mut fading_rng)).collect();
        let mut state = AfadmmState::new(problem, cfg.rho, init_gains)?;
        let mut diags: Vec<AnalogDiag> = Vec::new();
        run_loop(problem, cfg, seed, &mut trace, |round| {
            if cfg.analog.time_varying && round > 0 {
                let fresh: Vec<Complex64> = (0..n).map(|_| sample_fading(&mut fading_rng)).collect();
                time_varying_channel_step(&mut state, &fresh)?;
            }
            let channel = ChannelRealization::new(
                state.gains.clone(),
                cfg.analog.noise_variance,
                ChannelMode::AnalogMac,
            )?;
            let (stats, diag) = afadmm_round(
                &mut state,
                problem,
                &channel,
                cfg.analog.power_budget,
                cfg.link.slot_sec,
                &mut mac_rng,
            )?;
            diags.push(diag);
            Ok((stats, state.mean_model()))
        })?;
        // backfill the diagnostic columns (row 0 predates any round)
        for (row, diag) in trace.rows.iter_mut().skip(1).zip(diags) {
            row.noise_floor_est = Some(diag.noise_floor_est);
            row.imag_residue = Some(diag.imag_residue);
        }
    } else {
        let gains = vec![Complex64::new(1.0, 0.0); n];
        let mut state = AfadmmState::new(problem, cfg.rho, gains)?;
        run_loop(problem, cfg, seed, &mut trace, |_round| {
            let stats = digital_fadmm_round(&mut state, problem, cfg)?;
            Ok((stats, state.mean_model()))
        })?;
    }
    Ok(trace)
}
