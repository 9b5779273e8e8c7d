//! Solvers and a link-level simulator for communication-efficient
//! decentralized optimization.
//!
//! The crate implements the GADMM family (chain and general bipartite
//! topologies, dynamic reshuffling, stochastic quantization, transmission
//! censoring), parameter-server baselines (ADMM, federated gradient descent,
//! quantized gradient descent), and analog over-the-air federated ADMM, all
//! driven by a reproducible experiment harness that prices every uplink in
//! bits and joules.
//!
//! Start with the runnable examples (`cargo run --example chain_consensus`)
//! or the `gadmm-lab` binary (`gadmm-lab recipe fig4`).

// `!(x > 0.0)` guards are deliberate: unlike `x <= 0.0` they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod afadmm;
pub mod channel;
pub mod compression;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod problem;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
