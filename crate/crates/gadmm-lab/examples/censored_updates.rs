//! Transmission censoring under the decaying threshold `tau_k = omega *
//! zeta^k`: how many uplinks the censored variants skip on the way to a
//! target error.
//!
//! ```bash
//! cargo run --release --example censored_updates
//! ```

use gadmm_lab::compression::{censor_decision, CensorNorm, CensorSchedule};
use gadmm_lab::engine::{run, stream, SolverConfig, Variant, STREAM_PROBLEM};
use gadmm_lab::problem::{generate_synthetic, LossKind, SyntheticSpec};
use gadmm_lab::topology::build_random_bipartite;
use nalgebra::DVector;

fn main() -> gadmm_lab::Result<()> {
    // the rule in isolation
    let schedule = CensorSchedule::new(1.0, 0.85, CensorNorm::Infinity)?;
    let last_sent = DVector::zeros(2);
    println!("{:>5} {:>12} {:>18}", "round", "tau_k", "update 0.1 sent?");
    for k in [0, 5, 10, 15, 20] {
        let update = DVector::from_vec(vec![0.1, 0.0]);
        println!(
            "{k:>5} {:>12.5} {:>18}",
            schedule.threshold(k),
            censor_decision(&update, &last_sent, k, &schedule)
        );
    }

    // full run over a random bipartite graph
    let problem = generate_synthetic(
        &SyntheticSpec {
            workers: 20,
            dim: 6,
            rows_per_worker: 6,
            noise_sigma: 0.1,
            feature_decades: 0.0,
            loss: LossKind::LeastSquares,
            mu: 0.0,
        },
        &mut stream(19, STREAM_PROBLEM),
    )?;
    let topology = build_random_bipartite(problem.num_workers(), 5, &mut stream(19, 502))?;
    let mut cfg = SolverConfig {
        variant: Variant::Ggadmm,
        max_rounds: 30_000,
        target_error: 1e-3,
        censor: schedule,
        ..SolverConfig::default()
    };

    println!("\n{:<11} {:>7} {:>9} {:>10} {:>12}", "variant", "rounds", "sent", "censored", "uplink bits");
    for variant in [Variant::Ggadmm, Variant::CGgadmm, Variant::CQggadmm] {
        cfg.variant = variant;
        let t = run(&problem, Some(&topology), &cfg, 19)?;
        let sent: u64 = t.rows.iter().map(|r| r.msgs_sent).sum();
        let censored: u64 = t.rows.iter().map(|r| r.msgs_censored).sum();
        let last = t.rows.last().unwrap();
        println!(
            "{:<11} {:>7} {:>9} {:>10} {:>12}",
            t.variant, last.round, sent, censored, last.cum_bits
        );
    }
    Ok(())
}
