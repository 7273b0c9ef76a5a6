//! Channels and measurements: the pushforward identity, compression
//! convergence, and the data-processing inequality.
//!
//! Pulling a POVM back through a channel's dual reproduces, on the input
//! states, exactly the statistics of measuring the channel outputs. The
//! compression-channel family shows the divergence of compressed states
//! increasing monotonically toward the full value as the kept subspace
//! grows.
//!
//! Run with: cargo run --release --example channel_reduction

use qusum::entropy::{measured_relative_entropy, quantum_relative_entropy};
use qusum::experiments::verify_compression_convergence;
use qusum::measurement::{
    apply_channel, compression_channel, pushforward_povm, random_channel, random_density,
    random_povm,
};
use qusum::rng::{RngHandle, StreamKind};
use qusum::states::DensityMatrix;

fn main() -> qusum::Result<()> {
    let mut rng = RngHandle::new(2).sequence(StreamKind::Verification, 0);

    // Pushforward identity on a random instance.
    let channel = random_channel(4, 3, 2, &mut rng)?;
    let povm = random_povm(3, 4, &mut rng)?;
    let sigma = random_density(4, &mut rng);
    let rho = random_density(4, &mut rng);

    let pulled = pushforward_povm(&channel, &povm)?;
    let on_inputs = measured_relative_entropy(&sigma, &rho, &pulled)?;
    let on_outputs = measured_relative_entropy(
        &apply_channel(&channel, &sigma)?,
        &apply_channel(&channel, &rho)?,
        &povm,
    )?;
    println!("pushforward identity (random dim 4 -> 3 instance):");
    println!("  pulled-back POVM on inputs : {on_inputs:.12} nats");
    println!("  POVM on channel outputs    : {on_outputs:.12} nats");
    println!("  discrepancy                : {:.3e}", (on_inputs - on_outputs).abs());

    // Data processing: the channel cannot increase the divergence.
    let d_in = quantum_relative_entropy(&sigma, &rho)?.value;
    let d_out = quantum_relative_entropy(
        &apply_channel(&channel, &sigma)?,
        &apply_channel(&channel, &rho)?,
    )?
    .value;
    println!("\ndata processing: D(in) = {d_in:.6} >= D(out) = {d_out:.6}");

    // Compression convergence on a classical (diagonal) pair.
    let sigma = DensityMatrix::from_probs(&[0.4, 0.25, 0.2, 0.1, 0.05])?;
    let rho = DensityMatrix::from_probs(&[0.1, 0.15, 0.25, 0.2, 0.3])?;
    let report = verify_compression_convergence(&sigma, &rho)?;
    println!("\ncompression convergence (d = 5 diagonal pair):");
    for (i, v) in report.values.iter().enumerate() {
        println!("  keep {} states + sink: D = {v:.9} nats", i + 1);
    }
    println!("  full space           : D = {:.9} nats", report.full_value);
    println!("  monotone = {}, terminal matches = {}", report.monotone, report.terminal_matches);

    // The same family on a qubit: one compression step only.
    let ch = compression_channel(1, 2)?;
    let s2 = DensityMatrix::from_probs(&[0.8, 0.2])?;
    let r2 = DensityMatrix::from_probs(&[0.4, 0.6])?;
    let d = quantum_relative_entropy(&apply_channel(&ch, &s2)?, &apply_channel(&ch, &r2)?)?.value;
    let full = quantum_relative_entropy(&s2, &r2)?.value;
    println!("\nqubit single step: compressed D = {d:.9}, full D = {full:.9}");
    Ok(())
}
