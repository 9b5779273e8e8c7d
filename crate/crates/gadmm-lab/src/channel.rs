//! Link-level models: Shannon and finite-blocklength rates, transmit-energy
//! pricing, Rayleigh block fading, and the analog multiple-access channel.
//!
//! Conventions: logarithms are base 2 throughout (rates in bits per channel
//! use), SNR is linear, and model vectors ride the real part of the complex
//! baseband signal.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf;
use std::f64::consts::{FRAC_1_SQRT_2, LOG2_E};

use crate::error::{Error, Result};

/// Link parameters shared by the digital rate and energy models.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkBudget {
    /// Linear signal-to-noise ratio.
    pub snr: f64,
    /// Total bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Packet blocklength in channel uses.
    pub blocklength: u64,
    /// Target packet error probability, strictly inside (0, 1).
    pub target_error: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    /// Transmission slot duration in seconds.
    pub slot_sec: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.snr >= 0.0) {
            return Err(Error::invalid(format!("snr must be >= 0, got {}", self.snr)));
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_psd", self.noise_psd),
            ("slot_sec", self.slot_sec),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.blocklength < 1 {
            return Err(Error::invalid("blocklength must be >= 1"));
        }
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return Err(Error::invalid(format!(
                "target_error must be in (0,1), got {}",
                self.target_error
            )));
        }
        Ok(())
    }

    /// Budget seen by one of `n_active` transmitters splitting the band
    /// equally (the digital-orthogonal contention regime).
    pub fn share(&self, n_active: usize) -> LinkBudget {
        let n = n_active.max(1) as f64;
        LinkBudget { bandwidth_hz: self.bandwidth_hz / n, ..*self }
    }
}

/// Shannon rate `log2(1 + snr)` in bits per channel use.
pub fn shannon_rate(snr: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!("snr must be >= 0, got {snr}")));
    }
    Ok((1.0 + snr).log2())
}

/// Inverse Gaussian Q-function via the inverse complementary error function:
/// `Q(x) = erfc(x / sqrt(2)) / 2`, so `Q^-1(e) = sqrt(2) * erfc_inv(2e)`.
///
/// A Newton polish against the forward Q keeps `|Q(Q^-1(e)) - e| < 1e-10`
/// over `e` in `[1e-6, 0.5]`.
pub fn gaussian_q_inv(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0,1), got {epsilon}")));
    }
    let mut x = std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * epsilon);
    for _ in 0..3 {
        let q = gaussian_q(x);
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf == 0.0 {
            break;
        }
        x += (q - epsilon) / pdf; // dQ/dx = -pdf
    }
    Ok(x)
}

/// Gaussian tail probability `Q(x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * erf::erfc(x * FRAC_1_SQRT_2)
}

/// Finite-blocklength achievable rate in bits per channel use:
///
/// ```text
/// R(n, e) = log2(1 + snr) - sqrt(V / n) * Q^-1(e)
/// V = (2 snr + snr^2) (log2 e)^2 / (1 + snr)^2
/// ```
///
/// The `O(log n / n)` correction is dropped and the result is clamped at 0.
pub fn finite_blocklength_rate(snr: f64, blocklength: u64, epsilon: f64) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!("snr must be >= 0, got {snr}")));
    }
    if blocklength < 1 {
        return Err(Error::invalid("blocklength must be >= 1"));
    }
    let qinv = gaussian_q_inv(epsilon)?;
    let dispersion = (2.0 * snr + snr * snr) * LOG2_E * LOG2_E / ((1.0 + snr) * (1.0 + snr));
    let rate = (1.0 + snr).log2() - (dispersion / blocklength as f64).sqrt() * qinv;
    Ok(rate.max(0.0))
}

/// Energy to push `bits` through one slot by inverting the Shannon formula:
/// required power `P = N0 B (2^(bits / (B T)) - 1)`, energy `P * T`.
pub fn transmit_energy(bits: u64, budget: &LinkBudget) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let uses = budget.bandwidth_hz * budget.slot_sec;
    let rate = bits as f64 / uses;
    let power = budget.noise_psd * budget.bandwidth_hz * (2f64.powf(rate) - 1.0);
    power * budget.slot_sec
}

/// Operating mode of a channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    /// Orthogonal digital uplinks; transmitters split the band.
    DigitalOrthogonal,
    /// One shared analog channel; waveforms superpose.
    AnalogMac,
}

/// One block-fading draw: per-worker complex gains plus the noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub gains: Vec<Complex64>,
    pub noise_variance: f64,
    pub mode: ChannelMode,
}

impl ChannelRealization {
    pub fn new(gains: Vec<Complex64>, noise_variance: f64, mode: ChannelMode) -> Result<Self> {
        if !(noise_variance >= 0.0) {
            return Err(Error::invalid("noise variance must be >= 0"));
        }
        Ok(ChannelRealization { gains, noise_variance, mode })
    }
}

/// Unit-variance circularly-symmetric complex Gaussian fading gain
/// (Rayleigh envelope, uniform phase).
pub fn sample_fading(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Superposes simultaneous analog transmissions over one shared channel:
/// returns `sum_n h_n s_n + z` with `z` complex Gaussian per coordinate of
/// variance `noise_variance`. No per-worker bandwidth division.
pub fn analog_mac(
    signals: &[DVector<Complex64>],
    gains: &[Complex64],
    noise_variance: f64,
    rng: &mut impl Rng,
) -> Result<DVector<Complex64>> {
    if signals.len() != gains.len() {
        return Err(Error::invalid(format!(
            "analog_mac: {} signals vs {} gains",
            signals.len(),
            gains.len()
        )));
    }
    if signals.is_empty() {
        return Err(Error::invalid("analog_mac: no transmitters"));
    }
    let dim = signals[0].len();
    if signals.iter().any(|s| s.len() != dim) {
        return Err(Error::invalid("analog_mac: signal dimension mismatch"));
    }
    let mut out = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (s, h) in signals.iter().zip(gains.iter()) {
        for i in 0..dim {
            out[i] += h * s[i];
        }
    }
    if noise_variance > 0.0 {
        let std = (noise_variance / 2.0).sqrt();
        for i in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[i] += Complex64::new(std * re, std * im);
        }
    }
    Ok(out)
}

/// Outcome of channel-inversion precoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Precoded {
    /// `signal / h`, within the power budget.
    Transmit(DVector<Complex64>),
    /// The worker skips this round (deep fade or budget exceeded).
    Refuse(RefusalReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefusalReason {
    GainBelowThreshold,
    PowerBudgetExceeded,
}

/// Default deep-fade cutoff for channel-inversion precoding.
pub const H_THRESHOLD_DEFAULT: f64 = 0.1;

/// Pre-multiplies by `1/h` to cancel fading; refuses when `|h|` is below
/// `h_threshold` or the inverted signal's power exceeds the budget
/// (boundary inclusive: transmit at exactly the budget).
pub fn channel_inversion_precode(
    signal: &DVector<Complex64>,
    h: Complex64,
    power_budget: f64,
    h_threshold: f64,
) -> Result<Precoded> {
    if !(power_budget > 0.0) {
        return Err(Error::invalid("power budget must be positive"));
    }
    if h.norm() < h_threshold {
        return Ok(Precoded::Refuse(RefusalReason::GainBelowThreshold));
    }
    let precoded = signal.map(|v| v / h);
    let power: f64 = precoded.iter().map(|v| v.norm_sqr()).sum();
    if power <= power_budget {
        Ok(Precoded::Transmit(precoded))
    } else {
        Ok(Precoded::Refuse(RefusalReason::PowerBudgetExceeded))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn budget() -> LinkBudget {
        LinkBudget {
            snr: 1.0,
            bandwidth_hz: 1.0,
            blocklength: 1000,
            target_error: 1e-3,
            noise_psd: 1.0,
            slot_sec: 1.0,
        }
    }

    #[test]
    fn shannon_anchor_points() {
        assert_eq!(shannon_rate(0.0).unwrap(), 0.0);
        assert!((shannon_rate(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((shannon_rate(3.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(shannon_rate(-0.1).is_err());
    }

    #[test]
    fn q_inverse_round_trips() {
        // |Q(Q^-1(e)) - e| < 1e-10 across e in [1e-6, 0.5]
        let mut e = 1e-6;
        while e <= 0.5 {
            let x = gaussian_q_inv(e).unwrap();
            let back = gaussian_q(x);
            assert!((back - e).abs() < 1e-10, "e={e}: Q(Qinv) = {back}");
            e *= 1.37;
        }
        assert_eq!(gaussian_q_inv(0.5).unwrap(), 0.0);
        assert!(gaussian_q_inv(0.0).is_err());
        assert!(gaussian_q_inv(1.0).is_err());
    }

    #[test]
    fn fbl_median_error_equals_shannon() {
        for snr in [0.1, 1.0, 10.0] {
            let fbl = finite_blocklength_rate(snr, 100, 0.5).unwrap();
            assert_eq!(fbl, shannon_rate(snr).unwrap());
        }
    }

    #[test]
    fn fbl_penalty_vanishes_for_long_packets() {
        let fbl = finite_blocklength_rate(1.0, 1_000_000_000, 1e-3).unwrap();
        assert!((fbl - shannon_rate(1.0).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn fbl_penalty_scales_as_inverse_sqrt_n() {
        // quadrupling n halves the penalty, ratio exactly 2 up to rounding
        for snr in [0.5, 1.0, 4.0] {
            for eps in [1e-3, 1e-2, 0.1] {
                let n = 64u64;
                let c = shannon_rate(snr).unwrap();
                let p1 = c - finite_blocklength_rate(snr, n, eps).unwrap();
                let p4 = c - finite_blocklength_rate(snr, 4 * n, eps).unwrap();
                assert!((p1 / p4 - 2.0).abs() < 1e-9, "snr={snr} eps={eps}: {}", p1 / p4);
            }
        }
    }

    #[test]
    fn fbl_below_shannon_and_monotone() {
        let snrs = [0.1, 1.0, 10.0];
        let ns = [10u64, 100, 10_000];
        for &snr in &snrs {
            for &n in &ns {
                let r = finite_blocklength_rate(snr, n, 1e-3).unwrap();
                assert!(r <= shannon_rate(snr).unwrap());
            }
            // nondecreasing in n
            let mut last = -1.0;
            for &n in &ns {
                let r = finite_blocklength_rate(snr, n, 1e-3).unwrap();
                assert!(r >= last);
                last = r;
            }
        }
        // nondecreasing in snr
        for &n in &ns {
            let mut last = -1.0;
            for &snr in &snrs {
                let r = finite_blocklength_rate(snr, n, 1e-3).unwrap();
                assert!(r >= last);
                last = r;
            }
        }
    }

    #[test]
    fn energy_zero_bits_is_free() {
        assert_eq!(transmit_energy(0, &budget()), 0.0);
    }

    #[test]
    fn energy_one_bit_per_use_closed_form() {
        // bits = B*T, N0*B = 1, T = 1: E = (2^1 - 1) * 1 * 1 = 1 J
        let b = budget();
        assert!((transmit_energy(1, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_superadditive_in_bits() {
        // E(2m) > 2 E(m): convexity of 2^x - 1 through the origin
        let b = LinkBudget { bandwidth_hz: 100.0, ..budget() };
        for m in [1u64, 7, 50, 150] {
            assert!(transmit_energy(2 * m, &b) > 2.0 * transmit_energy(m, &b));
        }
    }

    #[test]
    fn energy_strictly_convex_second_differences() {
        let b = LinkBudget { bandwidth_hz: 1000.0, ..budget() };
        for m in (32u64..2048).step_by(64) {
            let e0 = transmit_energy(m - 16, &b);
            let e1 = transmit_energy(m, &b);
            let e2 = transmit_energy(m + 16, &b);
            assert!(e2 - 2.0 * e1 + e0 > 0.0, "second difference at {m}");
        }
    }

    #[test]
    fn bandwidth_share_raises_energy() {
        let b = budget();
        let shared = b.share(10);
        assert!((shared.bandwidth_hz - 0.1).abs() < 1e-15);
        assert!(transmit_energy(1, &shared) > transmit_energy(1, &b));
    }

    #[test]
    fn fading_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let draws = 100_000;
        let mean_power: f64 =
            (0..draws).map(|_| sample_fading(&mut rng).norm_sqr()).sum::<f64>() / draws as f64;
        assert!((mean_power - 1.0).abs() < 0.02, "E|h|^2 = {mean_power}");
    }

    #[test]
    fn fading_phase_uniform_ks_test() {
        use std::f64::consts::PI;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut phases: Vec<f64> = (0..draws)
            .map(|_| {
                let h = sample_fading(&mut rng);
                (h.im.atan2(h.re) + PI) / (2.0 * PI)
            })
            .collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = draws as f64;
        let mut d = 0.0f64;
        for (i, p) in phases.iter().enumerate() {
            let lo = (*p - i as f64 / n).abs();
            let hi = ((i + 1) as f64 / n - *p).abs();
            d = d.max(lo).max(hi);
        }
        // 1% critical value for the KS statistic: 1.628 / sqrt(n)
        let crit = 1.628 / n.sqrt();
        assert!(d < crit, "KS statistic {d} exceeds {crit}");
    }

    #[test]
    fn fading_is_seed_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(12);
        let mut b = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            assert_eq!(sample_fading(&mut a), sample_fading(&mut b));
        }
    }

    #[test]
    fn mac_identity_single_worker() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-2.0, 0.5)]);
        let out = analog_mac(std::slice::from_ref(&s), &[Complex64::new(1.0, 0.0)], 0.0, &mut rng).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn mac_opposite_signals_cancel() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let s = DVector::from_vec(vec![Complex64::new(0.7, -0.1), Complex64::new(3.0, 2.0)]);
        let neg = s.map(|v| -v);
        let h = Complex64::new(0.4, 0.9);
        let out = analog_mac(&[s, neg], &[h, h], 0.0, &mut rng).unwrap();
        assert!(out.iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn mac_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let dim = 4;
        let signals: Vec<DVector<Complex64>> = (0..5)
            .map(|_| {
                DVector::from_fn(dim, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let gains: Vec<Complex64> = (0..5).map(|_| sample_fading(&mut rng)).collect();
        let out = analog_mac(&signals, &gains, 0.0, &mut rng).unwrap();
        // independent summation loop
        for i in 0..dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for (s, h) in signals.iter().zip(gains.iter()) {
                acc += h * s[i];
            }
            assert!((out[i] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn mac_is_linear_with_zero_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let s: DVector<Complex64> =
            DVector::from_fn(3, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
        let t: DVector<Complex64> =
            DVector::from_fn(3, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
        let h = vec![sample_fading(&mut rng)];
        let alpha = Complex64::new(2.5, 0.0);

        let m_s = analog_mac(std::slice::from_ref(&s), &h, 0.0, &mut rng).unwrap();
        let m_t = analog_mac(std::slice::from_ref(&t), &h, 0.0, &mut rng).unwrap();
        let m_as = analog_mac(&[s.map(|v| alpha * v)], &h, 0.0, &mut rng).unwrap();
        let m_st = analog_mac(&[&s + &t], &h, 0.0, &mut rng).unwrap();
        for i in 0..3 {
            assert!((m_as[i] - alpha * m_s[i]).norm() < 1e-12);
            assert!((m_st[i] - (m_s[i] + m_t[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn mac_rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DVector::from_vec(vec![Complex64::new(1.0, 0.0)]);
        let b = DVector::from_vec(vec![Complex64::new(1.0, 0.0); 2]);
        let h = Complex64::new(1.0, 0.0);
        assert!(analog_mac(&[a, b], &[h, h], 0.0, &mut rng).is_err());
    }

    #[test]
    fn precode_unit_gain_passthrough() {
        let s = DVector::from_vec(vec![Complex64::new(0.3, 0.0), Complex64::new(-0.4, 0.0)]);
        match channel_inversion_precode(&s, Complex64::new(1.0, 0.0), 1.0, 0.1).unwrap() {
            Precoded::Transmit(out) => assert_eq!(out, s),
            other => panic!("expected transmit, got {other:?}"),
        }
    }

    #[test]
    fn precode_refuses_deep_fade() {
        let s = DVector::from_vec(vec![Complex64::new(1e-6, 0.0)]);
        // tiny signal easily fits the budget, but |h| is below threshold
        match channel_inversion_precode(&s, Complex64::new(0.05, 0.0), 1e6, 0.1).unwrap() {
            Precoded::Refuse(RefusalReason::GainBelowThreshold) => {}
            other => panic!("expected gain refusal, got {other:?}"),
        }
    }

    #[test]
    fn precode_budget_boundary_is_inclusive() {
        // ||s/h||^2 exactly equals the budget: transmit; one ulp above: refuse
        let h = Complex64::new(0.5, 0.0);
        let s = DVector::from_vec(vec![Complex64::new(0.5, 0.0)]);
        let power = (s[0] / h).norm_sqr(); // exactly 1.0
        assert_eq!(power, 1.0);
        match channel_inversion_precode(&s, h, power, 0.1).unwrap() {
            Precoded::Transmit(_) => {}
            other => panic!("expected transmit at boundary, got {other:?}"),
        }
        let below = f64::from_bits(power.to_bits() - 1);
        match channel_inversion_precode(&s, h, below, 0.1).unwrap() {
            Precoded::Refuse(RefusalReason::PowerBudgetExceeded) => {}
            other => panic!("expected refusal just above budget, got {other:?}"),
        }
    }
}
