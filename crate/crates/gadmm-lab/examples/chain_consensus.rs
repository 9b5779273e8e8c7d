//! Decentralized consensus on a worker chain: GADMM against the
//! normal-equations oracle.
//!
//! ```bash
//! cargo run --release --example chain_consensus
//! ```

use gadmm_lab::engine::{run, stream, SolverConfig, Variant, STREAM_PROBLEM};
use gadmm_lab::problem::{generate_synthetic, LossKind, SyntheticSpec};
use gadmm_lab::topology::build_chain;

fn main() -> gadmm_lab::Result<()> {
    let problem = generate_synthetic(
        &SyntheticSpec {
            workers: 10,
            dim: 6,
            rows_per_worker: 8,
            noise_sigma: 0.1,
            feature_decades: 0.0,
            loss: LossKind::LeastSquares,
            mu: 0.0,
        },
        &mut stream(42, STREAM_PROBLEM),
    )?;
    let topology = build_chain(problem.num_workers())?;
    println!(
        "chain of {} workers, {} edges, heads = {:?}",
        topology.num_workers(),
        topology.edges().len(),
        topology.head_set()
    );

    let cfg = SolverConfig {
        variant: Variant::Gadmm,
        rho: 1.0,
        max_rounds: 500,
        target_error: 1e-8,
        ..SolverConfig::default()
    };
    let trace = run(&problem, Some(&topology), &cfg, 7)?;

    println!("F* = {:.6} (centralized oracle)", trace.fstar);
    println!("{:>6} {:>14} {:>12}", "round", "|F - F*|", "cum. bits");
    for row in trace.rows.iter().step_by(25) {
        println!("{:>6} {:>14.3e} {:>12}", row.round, row.obj_error, row.cum_bits);
    }
    let last = trace.rows.last().unwrap();
    println!("{:>6} {:>14.3e} {:>12}", last.round, last.obj_error, last.cum_bits);
    println!(
        "reached rel 1e-8 after {:?} rounds",
        trace.rounds_to_target(1e-8)
    );
    Ok(())
}
