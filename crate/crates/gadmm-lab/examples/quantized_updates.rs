//! Stochastic quantization of model updates: payload sizes, reconstruction
//! error, and the energy win of 2-bit updates over full precision.
//!
//! ```bash
//! cargo run --release --example quantized_updates
//! ```

use gadmm_lab::compression::{dequantize, payload_bits, PayloadMode, QuantizerState};
use gadmm_lab::engine::{run, stream, SolverConfig, Variant, STREAM_PROBLEM};
use gadmm_lab::problem::{generate_synthetic, LossKind, SyntheticSpec};
use gadmm_lab::topology::build_chain;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gadmm_lab::Result<()> {
    // the quantizer in isolation
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut q = QuantizerState::new(2, 4)?;
    let candidate = DVector::from_vec(vec![0.8, -0.3, 0.05, -0.61]);
    let payload = q.quantize(&candidate, &mut rng)?;
    let recon = dequantize(&payload.indices, &q.prev_reconstruction, payload.range, 2)?;
    let step = 2.0 * payload.range as f64 / 3.0;
    println!("candidate       = {:?}", candidate.as_slice());
    println!("level indices   = {:?} (range {:.4})", payload.indices, payload.range);
    println!("reconstruction  = {:?}", recon.as_slice());
    println!("max |error|     = {:.4} (step size {:.4})", (&recon - &candidate).amax(), step);
    q.commit(&payload)?;

    let d = 6;
    println!(
        "\npayloads for d = {d}: full precision {} bits, 2-bit quantized {} bits",
        payload_bits(d, 2, PayloadMode::FullPrecision),
        payload_bits(d, 2, PayloadMode::Quantized),
    );

    // full run: GADMM vs Q-GADMM on the same 50-worker chain
    let problem = generate_synthetic(
        &SyntheticSpec {
            workers: 50,
            dim: d,
            rows_per_worker: 6,
            noise_sigma: 0.1,
            feature_decades: 2.0,
            loss: LossKind::LeastSquares,
            mu: 0.0,
        },
        &mut stream(7, STREAM_PROBLEM),
    )?;
    let topology = build_chain(problem.num_workers())?;
    let mut cfg = SolverConfig {
        variant: Variant::Gadmm,
        max_rounds: 100_000,
        target_error: 1e-2,
        ..SolverConfig::default()
    };
    let full = run(&problem, Some(&topology), &cfg, 7)?;
    cfg.variant = Variant::QGadmm;
    cfg.bits = 2;
    let quant = run(&problem, Some(&topology), &cfg, 7)?;

    println!("\n{:<10} {:>8} {:>14} {:>14}", "variant", "rounds", "uplink bits", "joules");
    for t in [&full, &quant] {
        let last = t.rows.last().unwrap();
        println!(
            "{:<10} {:>8} {:>14} {:>14.3e}",
            t.variant,
            last.round,
            last.cum_bits,
            last.cum_joules
        );
    }
    Ok(())
}
