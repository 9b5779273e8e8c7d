//! Payload compression: stochastic quantization of model differences and
//! threshold-based transmission censoring.
//!
//! The quantizer centers a symmetric range of radius `R` on the previously
//! transmitted reconstruction, divides it into `2^b - 1` steps of size
//! `delta = 2R / (2^b - 1)`, and rounds each coordinate up with probability
//! equal to its fractional level so the reconstruction is unbiased. A round's
//! range is the tightest one covering the update, `R = max(||t - prev||_inf,
//! R_MIN)`, encoded as an `f32` (rounded up so coverage survives narrowing)
//! and shipped in a 32-bit header; sender and receivers both reconstruct from
//! the decoded value, so their states match bit-exactly.
//!
//! Censoring skips a transmission whenever the update's norm falls below the
//! decaying threshold `tau_k = omega * zeta^k`.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::ModelVector;

/// Floor for the adaptive range so the step size never collapses to zero.
pub const R_MIN: f64 = 1e-12;

/// Per-worker stochastic quantizer state.
#[derive(Debug, Clone)]
pub struct QuantizerState {
    bits: u32,
    /// Range radius used by the most recent quantization.
    pub range: f64,
    /// Step size `2 * range / (2^bits - 1)` of the most recent quantization.
    pub step: f64,
    /// Reconstruction receivers currently hold for this worker.
    pub prev_reconstruction: ModelVector,
}

/// Quantized message: level indices plus the 32-bit range header.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedPayload {
    pub indices: Vec<u32>,
    pub range: f32,
}

impl QuantizerState {
    /// `bits` must be in `1..=32`. The initial reconstruction is the zero
    /// vector: the first round quantizes the model itself as a difference
    /// from zero.
    pub fn new(bits: u32, dim: usize) -> Result<Self> {
        if !(1..=32).contains(&bits) {
            return Err(Error::invalid(format!("quantizer bits must be in 1..=32, got {bits}")));
        }
        let range = R_MIN;
        Ok(QuantizerState {
            bits,
            range,
            step: 2.0 * range / (2f64.powi(bits as i32) - 1.0),
            prev_reconstruction: DVector::zeros(dim),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Quantizes `candidate` against the current reconstruction. Does not
    /// advance state; call [`QuantizerState::commit`] once the message is
    /// actually transmitted (censored messages never advance).
    pub fn quantize(&self, candidate: &ModelVector, rng: &mut impl Rng) -> Result<QuantizedPayload> {
        if candidate.len() != self.prev_reconstruction.len() {
            return Err(Error::invalid("quantize: dimension mismatch"));
        }
        let diff_inf = (candidate - &self.prev_reconstruction).amax();
        let range = encode_range(diff_inf.max(R_MIN));
        let levels = 2f64.powi(self.bits as i32) - 1.0;
        let delta = 2.0 * (range as f64) / levels;
        let mut indices = Vec::with_capacity(candidate.len());
        for i in 0..candidate.len() {
            let level = ((candidate[i] - self.prev_reconstruction[i]) + range as f64) / delta;
            let level = level.clamp(0.0, levels);
            let floor = level.floor();
            let frac = level - floor;
            let up = rng.random::<f64>() < frac;
            let q = floor as u32 + u32::from(up);
            // rounding to an adjacent level keeps the error within one step
            debug_assert!(
                (self.prev_reconstruction[i] + delta * q as f64 - range as f64 - candidate[i])
                    .abs()
                    <= delta * (1.0 + 1e-12)
            );
            indices.push(q);
        }
        Ok(QuantizedPayload { indices, range })
    }

    /// Reconstructs a payload against this state's reconstruction and
    /// advances the state. Returns the new shared reconstruction.
    pub fn commit(&mut self, payload: &QuantizedPayload) -> Result<ModelVector> {
        let recon = dequantize(&payload.indices, &self.prev_reconstruction, payload.range, self.bits)?;
        self.range = payload.range as f64;
        self.step = 2.0 * self.range / (2f64.powi(self.bits as i32) - 1.0);
        self.prev_reconstruction = recon.clone();
        Ok(recon)
    }
}

/// Rounds a positive range up to the nearest `f32` that still covers it.
fn encode_range(r: f64) -> f32 {
    let mut e = r as f32;
    if (e as f64) < r {
        e = f32::from_bits(e.to_bits() + 1);
    }
    e
}

/// Receiver-side reconstruction: `prev + delta * q - R`.
pub fn dequantize(
    indices: &[u32],
    prev: &ModelVector,
    range: f32,
    bits: u32,
) -> Result<ModelVector> {
    if !(1..=32).contains(&bits) {
        return Err(Error::invalid(format!("dequantize: bits must be in 1..=32, got {bits}")));
    }
    if indices.len() != prev.len() {
        return Err(Error::invalid("dequantize: dimension mismatch"));
    }
    let levels = 2f64.powi(bits as i32) - 1.0;
    let max_index = levels as u32;
    let delta = 2.0 * (range as f64) / levels;
    let mut out = prev.clone();
    for (i, &q) in indices.iter().enumerate() {
        if q > max_index {
            return Err(Error::invalid(format!(
                "dequantize: index {q} out of range 0..={max_index}"
            )));
        }
        out[i] += delta * q as f64 - range as f64;
    }
    Ok(out)
}

/// Transmission mode an uplink message is priced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadMode {
    /// `32 d` bits: one IEEE-754 single per coordinate.
    FullPrecision,
    /// `b d + 32` bits: `b` per coordinate plus the 32-bit range header.
    Quantized,
}

/// Uplink payload size in bits.
pub fn payload_bits(dim: usize, bits: u32, mode: PayloadMode) -> u64 {
    match mode {
        PayloadMode::FullPrecision => 32 * dim as u64,
        PayloadMode::Quantized => u64::from(bits) * dim as u64 + 32,
    }
}

/// Norm the censoring rule applies to the model update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensorNorm {
    Infinity,
    L2,
}

/// Geometric censoring threshold schedule `tau_k = omega * zeta^k`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CensorSchedule {
    pub omega: f64,
    pub zeta: f64,
    pub norm: CensorNorm,
}

impl CensorSchedule {
    pub fn new(omega: f64, zeta: f64, norm: CensorNorm) -> Result<Self> {
        if !(omega >= 1.0) {
            return Err(Error::invalid(format!("censor omega must be >= 1, got {omega}")));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::invalid(format!("censor zeta must be in (0,1), got {zeta}")));
        }
        Ok(CensorSchedule { omega, zeta, norm })
    }

    pub fn threshold(&self, round: usize) -> f64 {
        self.omega * self.zeta.powi(round as i32)
    }
}

/// True iff the update is large enough to transmit:
/// `||candidate - last_sent|| > tau_k`.
pub fn censor_decision(
    candidate: &ModelVector,
    last_sent: &ModelVector,
    round: usize,
    schedule: &CensorSchedule,
) -> bool {
    let diff = candidate - last_sent;
    let gap = match schedule.norm {
        CensorNorm::Infinity => diff.amax(),
        CensorNorm::L2 => diff.norm(),
    };
    gap > schedule.threshold(round)
}
