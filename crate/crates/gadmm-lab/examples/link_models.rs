//! Digital link models: Shannon vs finite-blocklength rates, the
//! transmit-energy curve, and channel-inversion precoding.
//!
//! ```bash
//! cargo run --release --example link_models
//! ```

use gadmm_lab::channel::{
    channel_inversion_precode, finite_blocklength_rate, sample_fading, shannon_rate,
    transmit_energy, LinkBudget, Precoded, H_THRESHOLD_DEFAULT,
};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gadmm_lab::Result<()> {
    println!("rate (bits/use) at snr = 4 (6 dB):");
    println!("{:>10} {:>10} {:>12} {:>12}", "n", "eps=1e-3", "eps=1e-5", "Shannon");
    let c = shannon_rate(4.0)?;
    for n in [50u64, 200, 1000, 100_000] {
        println!(
            "{:>10} {:>10.4} {:>12.4} {:>12.4}",
            n,
            finite_blocklength_rate(4.0, n, 1e-3)?,
            finite_blocklength_rate(4.0, n, 1e-5)?,
            c
        );
    }

    let budget = LinkBudget {
        snr: 10.0,
        bandwidth_hz: 1e6,
        blocklength: 1000,
        target_error: 1e-3,
        noise_psd: 1e-9,
        slot_sec: 1e-3,
    };
    println!("\nenergy to push a payload through one {}s slot:", budget.slot_sec);
    println!("{:>10} {:>14} {:>20}", "bits", "joules", "joules at B/25 share");
    for bits in [44u64, 192, 1000, 4000] {
        println!(
            "{:>10} {:>14.4e} {:>20.4e}",
            bits,
            transmit_energy(bits, &budget),
            transmit_energy(bits, &budget.share(25))
        );
    }

    println!("\nchannel inversion under a unit power budget (threshold |h| >= {H_THRESHOLD_DEFAULT}):");
    let signal = DVector::from_vec(vec![Complex64::new(0.4, 0.0), Complex64::new(-0.2, 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..6 {
        let h = sample_fading(&mut rng);
        match channel_inversion_precode(&signal, h, 1.0, H_THRESHOLD_DEFAULT)? {
            Precoded::Transmit(s) => {
                let p: f64 = s.iter().map(|v| v.norm_sqr()).sum();
                println!("  |h| = {:.3}: transmit at power {p:.3}", h.norm());
            }
            Precoded::Refuse(reason) => println!("  |h| = {:.3}: refused ({reason:?})", h.norm()),
        }
    }
    Ok(())
}
