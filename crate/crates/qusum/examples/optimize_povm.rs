//! Maximize the measured relative entropy over POVMs for a fixed state pair.
//!
//! For commuting states the shared eigenbasis attains the quantum value; for
//! non-commuting states the optimizer reports the gap to the quantum ceiling
//! left by single-copy measurements.
//!
//! Run with: cargo run --release --example optimize_povm

use num_complex::Complex64;
use qusum::entropy::quantum_relative_entropy;
use qusum::linalg::ComplexMatrix;
use qusum::povm_search::{optimize_measurement, SearchConfig};
use qusum::states::DensityMatrix;

fn main() -> qusum::Result<()> {
    let cfg = SearchConfig { restarts: 6, max_iters: 400, seed: 7, ..SearchConfig::default() };

    // Commuting pair: measured optimum equals the quantum divergence.
    let sigma = DensityMatrix::from_probs(&[0.9, 0.1])?;
    let rho = DensityMatrix::from_probs(&[0.5, 0.5])?;
    let d = quantum_relative_entropy(&sigma, &rho)?.value;
    let result = optimize_measurement(&sigma, &rho, &cfg)?;
    println!("commuting diag(0.9,0.1) vs diag(0.5,0.5):");
    println!("  quantum D        = {d:.9} nats");
    println!("  best measured    = {:.9} nats", result.best_value);
    println!("  gap              = {:.3e} nats", d - result.best_value);
    println!("  restart values   = {:?}", result.per_restart_values);

    // Non-commuting pair: single-copy measurements leave a strict gap.
    let sigma = DensityMatrix::new(ComplexMatrix::from_rows(
        2,
        2,
        vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.5, 0.0),
        ],
    )?)?;
    let rho = DensityMatrix::from_probs(&[0.75, 0.25])?;
    let d = quantum_relative_entropy(&sigma, &rho)?.value;
    let result = optimize_measurement(&sigma, &rho, &cfg)?;
    println!("\nnon-commuting x-leaning sigma vs diag(0.75,0.25):");
    println!("  quantum D        = {d:.9} nats");
    println!("  best measured    = {:.9} nats", result.best_value);
    println!("  gap              = {:.6} nats", d - result.best_value);
    println!("  converged        = {}", result.converged);

    // The best POVM itself: elements and their traces.
    for (i, el) in result.best_povm.elements().iter().enumerate() {
        let weight = el.trace().re;
        if weight > 1e-6 {
            println!("  element {i}: trace {weight:.4}");
        }
    }
    Ok(())
}
